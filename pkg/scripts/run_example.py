"""Run every scenario on a preset and print the text tables.

usage: python scripts/run_example.py [preset] [seed]
"""
import sys

from algebroid_lab.cli import render_report
from algebroid_lab.config import SCENARIOS, RunConfig
from algebroid_lab.scenarios import run_scenario


def main():
    preset = sys.argv[1] if len(sys.argv) > 1 else "example_3_3"
    seed = int(sys.argv[2]) if len(sys.argv) > 2 else 0
    failed = []
    for name in SCENARIOS:
        cfg = RunConfig(scenario=name, preset=preset, seed=seed)
        try:
            rep = run_scenario(cfg)
        except ValueError as exc:
            print(f"{name}: skipped ({exc})\n")
            continue
        sys.stdout.write(render_report(rep, "text").decode())
        print()
        if not rep.passed:
            failed.append(name)
    print("failed scenarios:", ", ".join(failed) or "none")


if __name__ == "__main__":
    main()
