"""Config loading, RHS assemblies, checks, reports, and the CLI."""

import numpy as np
import pytest

from potlab.errors import DataError
from potlab.harness.checks import (
    CHECKS,
    CheckRow,
    SolveCache,
    build_context,
    gradient_oscillation_rhs,
    maximal_sum_rhs,
    mstar_rhs,
    pointwise_gradient_rhs,
    run_checks,
    sample_points,
    sharp_gradient_rhs,
    write_check_csv,
    write_summary,
)
from potlab.harness.cli import main
from potlab.harness.config import (
    build_instance,
    load_config,
    radial_potential_profile,
)
from potlab.orlicz import PowerGrowth, RegularizedPowerGrowth
from potlab.solver import solve_op_sequence

TINY = """
[growth]
kind = power
p = 2.0

[coefficient]
preset = constant

[obstacle]
preset = none

[measure]
density = 1.0

[boundary]
preset = zero

[grid]
n = 32

[solver]
tol = 1e-7

[checks]
run = comparison_inhomogeneous

[sweep]
n = 24, 32
scale = 1, 4
"""

DIRAC = """
[growth]
kind = power
p = 2.0

[coefficient]
preset = constant

[obstacle]
preset = quadratic
height = -2.0
curvature = -0.5

[measure]
atoms = 0.5 0.5 1.0

[boundary]
preset = fundamental

[grid]
n = 48

[solver]
tol = 1e-7

[checks]
run = gradient_bounds

[sweep]
n = 48
level = 2, 4
"""


@pytest.fixture
def tiny_config(tmp_path):
    path = tmp_path / "tiny.ini"
    path.write_text(TINY)
    return path


@pytest.fixture
def dirac_config(tmp_path):
    path = tmp_path / "dirac.ini"
    path.write_text(DIRAC)
    return path


def test_load_config(tiny_config):
    cfg = load_config(tiny_config)
    assert cfg.growth == {"kind": "power", "p": 2.0}
    assert cfg.checks == ["comparison_inhomogeneous"]
    assert cfg.sweep["n"] == [24, 32]
    assert cfg.solver.tol == 1e-7
    assert cfg.meshes() == [24, 32]


def test_load_config_missing(tmp_path):
    with pytest.raises(DataError):
        load_config(tmp_path / "absent.ini")


def test_build_instance_scaling(tiny_config):
    cfg = load_config(tiny_config)
    inst = build_instance(cfg, 32, rhs_scale=4.0)
    assert inst.grid.n == 32
    assert np.allclose(inst.measure.density.values, 4.0)
    inst2 = build_instance(cfg, 32, data_scale=2.0)
    assert np.allclose(inst2.measure.density.values, 2.0)


def test_radial_profile_p2_log():
    r = np.array([0.1, 0.25, 0.5, 1.0])
    got = radial_potential_profile(PowerGrowth(2.0), 1.0, r, c0=1.0)
    want = 1.0 - np.log(r) / (2 * np.pi)
    assert np.allclose(got, want, rtol=1e-12)


def test_radial_profile_p4_power():
    r = np.array([0.1, 0.4])
    got = radial_potential_profile(PowerGrowth(4.0), 1.0, r, c0=1.0)
    A = (1.0 / (2 * np.pi)) ** (1 / 3)
    want = 1.0 - A * (r ** (2 / 3) - 1.0) / (2 / 3)
    assert np.allclose(got, want, rtol=1e-12)


def test_radial_profile_generic_matches_power():
    # the quadrature path for a non-power growth that happens to be a power
    r = np.array([0.2, 0.6])
    generic = radial_potential_profile(RegularizedPowerGrowth(3.0, 0.0), 1.0, r)
    closed = radial_potential_profile(PowerGrowth(3.0), 1.0, r)
    assert np.allclose(generic, closed, rtol=1e-6)


def test_sample_points_deterministic_and_clear_of_atoms():
    rng1 = np.random.default_rng([7, 0])
    rng2 = np.random.default_rng([7, 0])
    atoms = [(0.5, 0.5, 1.0)]
    p1 = sample_points(rng1, 10, 0.3, 0.7, atoms, min_sep=0.05)
    p2 = sample_points(rng2, 10, 0.3, 0.7, atoms, min_sep=0.05)
    assert p1 == p2
    assert all(np.hypot(x - 0.5, y - 0.5) >= 0.05 for x, y in p1)


# -- assemblies -----------------------------------------------------------------

@pytest.fixture(scope="module")
def dirac_context(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "dirac.ini"
    path.write_text(DIRAC)
    cfg = load_config(path)
    inst = build_instance(cfg, 48)
    seq = solve_op_sequence(inst.problem(), [2, 4], inst.solver)
    return build_context(inst, seq.finest, 0.3)


def test_alpha_one_reduces_to_gradient_average_bound(dirac_context):
    ctx = dirac_context
    x, R = (0.5, 0.3), 0.15
    assert maximal_sum_rhs(ctx, x, R, 1.0) == pytest.approx(
        mstar_rhs(ctx, x, R), rel=1e-12
    )
    assert pointwise_gradient_rhs(ctx, x, R) == pytest.approx(
        mstar_rhs(ctx, x, R), rel=1e-12
    )


def test_assemblies_monotone_in_data(dirac_context):
    ctx = dirac_context
    x, R = (0.5, 0.3), 0.15
    base_vals = {
        "mstar": mstar_rhs(ctx, x, R),
        "max": maximal_sum_rhs(ctx, x, R, 0.3),
        "sharp": sharp_gradient_rhs(ctx, x, R, 0.3),
    }
    # enlarge the measure: every assembly may only grow
    import dataclasses
    bigger = dataclasses.replace(
        ctx, inst=dataclasses.replace(ctx.inst, measure=ctx.inst.measure.scaled(2.0))
    )
    assert mstar_rhs(bigger, x, R) >= base_vals["mstar"]
    assert maximal_sum_rhs(bigger, x, R, 0.3) >= base_vals["max"]
    assert sharp_gradient_rhs(bigger, x, R, 0.3) >= base_vals["sharp"]
    # enlarge the obstacle kernel pointwise
    od = ctx.od
    fatter = dataclasses.replace(
        ctx, od=type(od)(od.psi, od.kernel.with_values(od.kernel.values + 0.5))
    )
    assert mstar_rhs(fatter, x, R) >= base_vals["mstar"]
    assert sharp_gradient_rhs(fatter, x, R, 0.3) >= base_vals["sharp"]
    # enlarge the coefficient modulus pointwise
    import potlab.field as fieldmod
    om = ctx.modulus
    louder = dataclasses.replace(
        ctx,
        modulus=fieldmod.OscillationModulus(
            om.gamma_prime, om.radii, om.values + 0.1, om.dini_exponent
        ),
    )
    assert mstar_rhs(louder, x, R) >= base_vals["mstar"]
    assert sharp_gradient_rhs(louder, x, R, 0.3) >= base_vals["sharp"]


def test_measure_scaling_identity(dirac_context):
    # scaling mu by 4 multiplies the measure error term by 4^(1/ig) exactly
    import dataclasses
    from potlab.harness.checks import measure_error_term
    ctx = dirac_context
    x, R = (0.5, 0.3), 0.15
    base = measure_error_term(ctx, x, R)
    scaled = dataclasses.replace(
        ctx, inst=dataclasses.replace(ctx.inst, measure=ctx.inst.measure.scaled(4.0))
    )
    ig = ctx.inst.growth.ig
    assert measure_error_term(scaled, x, R) == pytest.approx(
        4.0 ** (1.0 / ig) * base, rel=1e-12
    )


def test_oscillation_rhs_symmetric(dirac_context):
    ctx = dirac_context
    x0 = (0.5, 0.3)
    x, y = (0.52, 0.31), (0.48, 0.29)
    a = gradient_oscillation_rhs(ctx, x0, x, y, 0.15, 0.3)
    b = gradient_oscillation_rhs(ctx, x0, y, x, 0.15, 0.3)
    assert a == b


# -- check running / reports -------------------------------------------------------

def test_run_checks_and_reports(tiny_config, tmp_path):
    cfg = load_config(tiny_config)
    reports = run_checks(cfg)
    assert len(reports) == 1
    rep = reports[0]
    assert rep.passed
    assert all(r.rhs > 0 or r.ratio is None for r in rep.rows)
    csv_path = tmp_path / "report.csv"
    write_check_csv(csv_path, rep)
    lines = csv_path.read_text().splitlines()
    assert lines[0] == "check,point_x,point_y,radius,lhs,rhs,ratio,flag"
    assert len(lines) == 1 + len(rep.rows)
    write_summary(tmp_path / "summary.txt", reports)
    assert "comparison_inhomogeneous" in (tmp_path / "summary.txt").read_text()


def test_run_checks_unknown_name(tiny_config):
    cfg = load_config(tiny_config)
    with pytest.raises(DataError):
        run_checks(cfg, names=["nonsense"])


def test_frozen_check_on_checkerboard(tmp_path):
    text = TINY.replace(
        "[coefficient]\npreset = constant\n",
        "[coefficient]\npreset = checkerboard\namplitude = 0.2\nperiod = 0.25\n",
    ).replace("run = comparison_inhomogeneous", "run = frozen_coefficient")
    path = tmp_path / "checker.ini"
    path.write_text(text)
    cfg = load_config(path)
    cfg.sweep["n"] = [32, 48]
    rep = run_checks(cfg)[0]
    assert rep.passed
    assert any(r.ratio is not None for r in rep.rows)


def test_cli_verify_deterministic_on_estimates(dirac_config, tmp_path):
    # the heaviest code path: mollification sweeps, Wolff and maximal
    # assemblies, seeded points; two runs must agree to the byte
    out1, out2 = tmp_path / "e1", tmp_path / "e2"
    args = ["verify", "--config", str(dirac_config), "--seed", "5"]
    assert main(args + ["--out", str(out1)]) == 0
    assert main(args + ["--out", str(out2)]) == 0
    name = "check_gradient_bounds.csv"
    assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_comparison_check_skips_without_data(tmp_path):
    text = TINY.replace("[measure]\ndensity = 1.0\n", "[measure]\n")
    path = tmp_path / "nodata.ini"
    path.write_text(text)
    cfg = load_config(path)
    rep = run_checks(cfg)[0]
    assert all(r.flag == "degenerate-skip" for r in rep.rows)
    assert any("skipped" in note for note in rep.notes)


def test_run_checks_parallel_matches_serial(tiny_config):
    cfg = load_config(tiny_config)
    serial = run_checks(cfg, names=["comparison_inhomogeneous", "sobolev_median"])
    parallel = run_checks(
        cfg, names=["comparison_inhomogeneous", "sobolev_median"], jobs=2
    )
    for a, b in zip(serial, parallel):
        assert a.name == b.name
        assert [(r.lhs, r.rhs, r.ratio) for r in a.rows] == [
            (r.lhs, r.rhs, r.ratio) for r in b.rows
        ]


def test_all_checks_registered():
    assert set(CHECKS) == {
        "comparison_inhomogeneous",
        "frozen_coefficient",
        "caccioppoli",
        "reverse_holder",
        "sobolev_median",
        "excess_decay_homogeneous",
        "excess_decay_with_errors",
        "maximal_estimates",
        "gradient_bounds",
    }


# -- CLI -----------------------------------------------------------------------------

def test_cli_verify_deterministic(tiny_config, tmp_path):
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    assert main(["verify", "--config", str(tiny_config), "--out", str(out1)]) == 0
    assert main(["verify", "--config", str(tiny_config), "--out", str(out2)]) == 0
    f1 = (out1 / "check_comparison_inhomogeneous.csv").read_bytes()
    f2 = (out2 / "check_comparison_inhomogeneous.csv").read_bytes()
    assert f1 == f2


def test_cli_solve_writes_artifacts(tiny_config, tmp_path):
    out = tmp_path / "sol"
    assert main(["solve", "--config", str(tiny_config), "--out", str(out)]) == 0
    assert (out / "solution.txt").exists()
    diag = (out / "diagnostics.txt").read_text()
    assert "complementarity" in diag


def test_cli_solve_infeasible_exits_one(tmp_path):
    bad = TINY.replace("preset = none", "preset = quadratic\nheight = 3.0\ncurvature = 0.0")
    path = tmp_path / "bad.ini"
    path.write_text(bad)
    assert main(["solve", "--config", str(path), "--out", str(tmp_path / "o")]) == 1


def test_cli_potential_csv(dirac_config, tmp_path):
    out = tmp_path / "pot"
    assert main(["potential", "--config", str(dirac_config), "--out", str(out)]) == 0
    for name in ("wolff.csv", "maximal.csv"):
        lines = (out / name).read_text().splitlines()
        assert lines[0] == "x,y,value,truncation_flag"
        assert len(lines) == 65


def test_cli_sweep_emits_cells(tiny_config, tmp_path):
    out = tmp_path / "sweep"
    assert main(["sweep", "--config", str(tiny_config), "--out", str(out)]) == 0
    cells = sorted(p.name for p in out.iterdir() if p.is_dir())
    assert len(cells) == 4  # n in {24, 32} x scale in {1, 4}
    assert (out / cells[0] / "check_comparison_inhomogeneous.csv").exists()


def test_coefficient_from_raster_config(tiny_config, tmp_path):
    import potlab.grid as gridmod
    g = gridmod.Grid2D(32)
    omega = gridmod.GridFunction.from_callable(g, lambda X, Y: 1.0 + 0.5 * X)
    raster = tmp_path / "omega.txt"
    gridmod.write_raster(raster, omega)
    cfg = load_config(tiny_config)
    cfg.coefficient = {"file": raster.name}
    cfg.base_dir = tmp_path
    inst = build_instance(cfg, 32)
    got = inst.field.coefficient.on_nodes(inst.grid)
    assert np.allclose(got, 1.0 + 0.5 * inst.grid.X, atol=1e-9)


def test_sweep_cell_pins_epsilon_and_gamma(tiny_config):
    cfg = load_config(tiny_config)
    cell = cfg.with_sweep_cell(epsilon=1e-6, gamma_prime=3.0, n=24)
    assert cell.gamma_prime == 3.0
    assert cell.meshes() == [24]
    inst = build_instance(cell)
    assert inst.solver.epsilon == 1e-6


def test_cli_usage_errors():
    assert main([]) == 2
    assert main(["unknown-command"]) == 2
    assert main(["verify"]) == 2  # --config is required


def test_cli_bad_config_exits_one(tmp_path):
    path = tmp_path / "broken.ini"
    path.write_text("[growth]\nkind = nonsense\n\n[checks]\nrun = maximal_estimates\n")
    assert main(["verify", "--config", str(path), "--out", str(tmp_path / "o")]) == 1


# -- small end-to-end check smoke ----------------------------------------------------

def test_gradient_bounds_small_instance(dirac_config):
    cfg = load_config(dirac_config)
    cfg.check_params["points"] = 4
    reports = run_checks(cfg)
    rep = reports[0]
    assert rep.name == "gradient_bounds"
    assert rep.passed
    assert rep.summary["swap_symmetry_gap"] <= 1e-12
    assert all(r.ratio is None or r.ratio > 0 for r in rep.rows)


def test_report_rhs_floor_flagging():
    row = CheckRow((0, 0), 0.1, 0.0, 0.0, None, "degenerate-skip")
    assert row.ratio is None
    cache = SolveCache()
    calls = []
    cache.get("k", lambda: calls.append(1) or 7)
    cache.get("k", lambda: calls.append(1) or 8)
    assert calls == [1]
