"""Command-line interface.

Subcommands: ``solve`` (one solve, raster + diagnostics), ``potential``
(batch Wolff evaluation, CSV), ``verify`` (run the config's check list),
``sweep`` (cross-product over the sweep axes, one report set per cell).
Exit codes: 0 all checks pass, 1 check failure or bad data, 2 usage error.
"""

from __future__ import annotations

import argparse
import itertools
import sys
from pathlib import Path

import numpy as np

from ..errors import PotlabError
from ..grid import ball_mass, write_raster
from ..potentials import WolffParams, frac_maximal, wolff_detail, write_potential_csv
from ..solver import mollify_measure, solve_vi
from .checks import run_checks, sample_points, usable_levels, write_check_csv, write_summary
from .config import build_instance, load_config

__all__ = ["main", "run_cli", "console_entry"]


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", required=True, help="experiment config file")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--seed", type=int, default=None, help="sample-point seed")
    p.add_argument("--jobs", type=int, default=1, help="parallel check jobs")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="potlab",
        description="obstacle problems with Orlicz growth: solves, potentials, estimate checks",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn in (
        ("solve", cmd_solve),
        ("potential", cmd_potential),
        ("verify", cmd_verify),
        ("sweep", cmd_sweep),
    ):
        p = sub.add_parser(name)
        _add_common(p)
        p.set_defaults(fn=fn)
    return parser


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_solve(args) -> int:
    cfg = load_config(args.config)
    out = _outdir(args)
    inst = build_instance(cfg)
    rhs = inst.measure
    if rhs is not None and rhs.atoms:
        level = max(usable_levels(cfg, inst))
        rhs = mollify_measure(rhs, level, inst.grid)
    elif rhs is not None:
        rhs = rhs.density  # already an integrable function
    sol = solve_vi(inst.problem(rhs=rhs), inst.solver)
    write_raster(out / "solution.txt", sol.u)
    with open(out / "diagnostics.txt", "w") as fh:
        fh.write(f"iterations {sol.iterations}\n")
        fh.write(f"energy {sol.energy:.12g}\n")
        fh.write(f"complementarity {sol.complementarity:.12g}\n")
        fh.write(f"residual {sol.residual_history[-1]:.12g}\n")
    print(f"solved in {sol.iterations} iterations; wrote {out / 'solution.txt'}")
    return 0


def cmd_potential(args) -> int:
    cfg = load_config(args.config)
    out = _outdir(args)
    inst = build_instance(cfg)
    if inst.measure is None:
        print("config carries no measure; nothing to evaluate", file=sys.stderr)
        return 1
    seed = cfg.seed if args.seed is None else args.seed
    rng = np.random.default_rng([seed, 97])
    ig = inst.growth.ig
    R = 0.25
    r_min = 2 * inst.grid.h
    wp = WolffParams(1.0 / (ig + 1.0), ig + 1.0, R, r_min=r_min)
    pts = sample_points(rng, 64, R + 2 * inst.grid.h, 1.0 - R - 2 * inst.grid.h)
    wolff_rows, maximal_rows = [], []
    for x in pts:
        value, truncated = wolff_detail(inst.measure, x, wp)
        wolff_rows.append((x[0], x[1], value, truncated))
        mval = frac_maximal(inst.measure, x, 0.0, R, r_min=r_min)
        maximal_rows.append((x[0], x[1], mval, ball_mass(inst.measure, x, r_min) > 0))
    write_potential_csv(out / "wolff.csv", wolff_rows)
    write_potential_csv(out / "maximal.csv", maximal_rows)
    print(f"wrote {out / 'wolff.csv'} and {out / 'maximal.csv'} ({len(pts)} points)")
    return 0


def _report_cycle(cfg, names, seed, jobs, out: Path, prefix: str = "") -> bool:
    reports = run_checks(cfg, names, seed=seed, jobs=jobs)
    for rep in reports:
        write_check_csv(out / f"{prefix}check_{rep.name}.csv", rep)
    write_summary(out / f"{prefix}summary.txt", reports)
    return all(r.passed for r in reports)


def cmd_verify(args) -> int:
    cfg = load_config(args.config)
    out = _outdir(args)
    seed = cfg.seed if args.seed is None else args.seed
    ok = _report_cycle(cfg, cfg.checks or None, seed, args.jobs, out)
    print(f"verify: {'all checks passed' if ok else 'CHECK FAILURES'}; reports in {out}")
    return 0 if ok else 1


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    out = _outdir(args)
    seed = cfg.seed if args.seed is None else args.seed
    axes = {k: v for k, v in cfg.sweep.items() if v}
    if not axes:
        print("config has no sweep axes", file=sys.stderr)
        return 1
    names = sorted(axes)
    ok = True
    for values in itertools.product(*(axes[k] for k in names)):
        cell = dict(zip(names, values))
        cell_cfg = cfg.with_sweep_cell(**cell)
        tag = "_".join(f"{k}{v}" for k, v in cell.items())
        cell_dir = out / f"cell_{tag}"
        cell_dir.mkdir(parents=True, exist_ok=True)
        ok &= _report_cycle(cell_cfg, cfg.checks or None, seed, args.jobs, cell_dir)
    print(f"sweep: {'all cells passed' if ok else 'CELL FAILURES'}; reports in {out}")
    return 0 if ok else 1


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except PotlabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def run_cli(argv) -> int:
    return main(argv)


def console_entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    console_entry()
