#!/usr/bin/env python3
"""Run every shipped config through its check list and print a summary.

Usage: python scripts/run_standard_suite.py [outdir]
"""

import sys
from pathlib import Path

from potlab.harness.checks import run_checks, write_check_csv, write_summary
from potlab.harness.config import load_config

CONFIGS = Path(__file__).parents[1] / "configs"


def main() -> int:
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path("out/standard")
    out.mkdir(parents=True, exist_ok=True)
    all_ok = True
    reports = []
    for path in sorted(CONFIGS.glob("*.ini")):
        cfg = load_config(path)
        if not cfg.checks:
            continue
        print(f"== {path.name}: {', '.join(cfg.checks)}")
        for rep in run_checks(cfg):
            reports.append(rep)
            write_check_csv(out / f"{path.stem}_{rep.name}.csv", rep)
            status = "ok" if rep.passed else "FAIL"
            drift = rep.summary.get("drift")
            print(f"   {rep.name:32s} {status}  drift={drift if drift else '-'}")
            all_ok &= rep.passed
    write_summary(out / "summary.txt", reports)
    print(f"reports in {out}")
    return 0 if all_ok else 1


if __name__ == "__main__":
    sys.exit(main())
