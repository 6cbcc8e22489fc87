class InputError(ValueError):
    """Malformed or mismatched arguments (wrong shapes, ranks, arities)."""


class PreconditionError(ValueError):
    """Arguments are well formed but violate a mathematical precondition.

    ``defect`` carries the measured violation when there is one.
    """

    def __init__(self, message: str, defect: float | None = None):
        super().__init__(message)
        self.defect = defect
