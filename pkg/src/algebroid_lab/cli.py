"""Command line entry point: ``algebroid-lab run <config> ...``."""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .config import SCENARIOS, SchemaError, load_config
from .errors import InputError
from .scenarios import RunReport, run_scenario


def _emit(obj, out: list[str]):
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if obj is None or isinstance(obj, bool):
        out.append(json.dumps(obj))
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        if math.isnan(obj):
            out.append("NaN")
        elif math.isinf(obj):
            out.append("Infinity" if obj > 0 else "-Infinity")
        else:
            text = format(obj, ".17g")
            out.append(text if any(c in text for c in ".en") else text + ".0")
    elif isinstance(obj, complex):
        _emit([obj.real, obj.imag], out)
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        out.append("{")
        for i, k in enumerate(sorted(obj, key=str)):
            if i:
                out.append(",")
            out.append(json.dumps(str(k)) + ":")
            _emit(obj[k], out)
        out.append("}")
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for i, v in enumerate(obj):
            if i:
                out.append(",")
            _emit(v, out)
        out.append("]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def to_json(obj) -> str:
    """Deterministic json: sorted keys, no whitespace, floats with 17 significant digits."""
    out: list[str] = []
    _emit(obj, out)
    return "".join(out) + "\n"


def _text(report: RunReport) -> str:
    head = f"{'check':<48} {'relation':>8} {'tolerance':>12} {'defect':>12} {'pass':>5}"
    lines = [f"scenario {report.scenario}  seed {report.seed}  cap {report.truncation_cap}",
             head, "-" * len(head)]
    for c in report.checks.checks:
        lines.append(f"{c.name[:48]:<48} {c.relation:>8} {c.tolerance:>12.4e} "
                     f"{c.defect:>12.4e} {'yes' if c.passed else 'NO':>5}")
    for cl in report.classes:
        lines.append(f"class {cl['name']} degree {cl['degree']} closedness "
                     f"{cl['closedness']:.4e}")
    lines.append(f"overall {'PASS' if report.passed else 'FAIL'}")
    return "\n".join(lines) + "\n"


def render_report(report: RunReport, fmt: str = "json") -> bytes:
    if fmt == "json":
        return to_json(report.to_dict()).encode()
    if fmt == "text":
        return _text(report).encode()
    raise InputError(f"unknown format {fmt!r}")


def parse_report(data: bytes | str) -> RunReport:
    return RunReport.from_dict(json.loads(data))


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="algebroid-lab")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario from a json config")
    r.add_argument("config")
    r.add_argument("--scenario", choices=SCENARIOS)
    r.add_argument("--format", choices=("json", "text"), default="json")
    r.add_argument("--out")
    r.add_argument("--seed", type=int)
    r.add_argument("--parallel", action="store_true")
    return p


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None and not 0 <= args.seed < 2 ** 64:
            raise SchemaError("seed must be an unsigned 64-bit integer")
        report = run_scenario(cfg, args.scenario, args.seed, args.parallel)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    data = render_report(report, args.format)
    out = args.out or cfg.output
    if out:
        Path(out).write_bytes(data)
    else:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    return 0 if report.passed else 1
