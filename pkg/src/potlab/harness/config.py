"""Experiment configuration: INI-style files and instance builders.

A config file holds sections [growth], [coefficient], [obstacle],
[measure], [grid], [solver], [checks], [sweep], and optionally [boundary]
for the Dirichlet trace preset.  ``build_instance`` realizes the config at
a chosen mesh with optional data scalings, producing the immutable bundle
the checks and the CLI consume.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.integrate import cumulative_trapezoid

from ..errors import DataError
from ..field import (
    CoefficientField,
    VectorField,
    coefficient_from_raster,
    make_coefficient,
)
from ..grid import Grid2D, GridFunction, MeasureData, read_raster
from ..orlicz import GrowthFunction, OrliczG, PowerGrowth, make_growth
from ..solver import ObstacleProblem, SolverConfig

__all__ = [
    "ExperimentConfig",
    "Instance",
    "load_config",
    "build_instance",
    "radial_potential_profile",
]

_DEFAULT_SWEEP = {
    "n": [64, 128],
    "scale": [1.0, 4.0, 16.0],
    "level": [2, 4, 8, 16],
    "amplitude": [0.2, 0.4],
    "epsilon": [1e-8],
}


@dataclass
class ExperimentConfig:
    growth: dict = field(default_factory=lambda: {"kind": "power", "p": 2.0})
    coefficient: dict = field(default_factory=lambda: {"preset": "constant"})
    obstacle: dict = field(default_factory=lambda: {"preset": "none"})
    measure: dict = field(default_factory=dict)
    boundary: dict = field(default_factory=lambda: {"preset": "zero"})
    grid: dict = field(default_factory=lambda: {"n": 128, "side": 1.0})
    solver: SolverConfig = field(default_factory=SolverConfig)
    checks: list = field(default_factory=list)
    check_params: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    gamma_prime: float = 2.0
    seed: int = 12345
    base_dir: Path = field(default_factory=Path)

    def sweep_axis(self, name: str) -> list:
        if name in self.sweep:
            return list(self.sweep[name])
        return list(_DEFAULT_SWEEP.get(name, []))

    def meshes(self) -> list[int]:
        return [int(n) for n in self.sweep_axis("n")]

    def with_sweep_cell(self, **axes) -> "ExperimentConfig":
        sweep = dict(self.sweep)
        updates = {}
        for k, v in axes.items():
            sweep[k] = [v]
            if k == "gamma_prime":
                updates["gamma_prime"] = float(v)
        return replace(self, sweep=sweep, **updates)


def _parse_scalar(text: str):
    text = text.strip()
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    return text

def _parse_list(text: str) -> list:
    return [_parse_scalar(tok) for tok in text.split(",") if tok.strip()]

def _section(parser: configparser.ConfigParser, name: str) -> dict:
    if not parser.has_section(name):
        return {}
    return {k: _parse_scalar(v) for k, v in parser.items(name)}


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    parser = configparser.ConfigParser()
    if not parser.read(path):
        raise DataError(f"cannot read config file {path}")
    cfg = ExperimentConfig(base_dir=path.parent)
    for name in ("growth", "coefficient", "obstacle", "measure", "boundary", "grid"):
        sec = _section(parser, name)
        if sec:
            setattr(cfg, name, sec)
    sol = _section(parser, "solver")
    if sol:
        cfg.solver = SolverConfig(
            epsilon=float(sol.get("epsilon", 1e-8)),
            tol=float(sol.get("tol", 1e-8)),
            max_iter=int(sol.get("max_iter", 200_000)),
        )
        if "gamma_prime" in sol:
            cfg.gamma_prime = float(sol["gamma_prime"])
        if "seed" in sol:
            cfg.seed = int(sol["seed"])
    checks = _section(parser, "checks")
    if checks:
        run = checks.pop("run", "")
        cfg.checks = [tok.strip() for tok in str(run).split(",") if tok.strip()]
        cfg.check_params = checks
    if parser.has_section("sweep"):
        cfg.sweep = {k: _parse_list(v) for k, v in parser.items("sweep")}
    return cfg


# ---------------------------------------------------------------------------
# builders

def build_grid(cfg: ExperimentConfig, n: int | None = None) -> Grid2D:
    spec = cfg.grid
    n = int(n if n is not None else spec.get("n", 128))
    side = float(spec.get("side", 1.0))
    origin = spec.get("origin", "0 0")
    if isinstance(origin, str):
        ox, oy = (float(t) for t in origin.split())
    else:
        ox = oy = float(origin)
    return Grid2D(n, side, (ox, oy))


def build_growth(cfg: ExperimentConfig) -> GrowthFunction:
    spec = dict(cfg.growth)
    kind = str(spec.pop("kind", "power"))
    if "file" in spec:
        spec["file"] = str(cfg.base_dir / spec["file"])
    return make_growth(kind, **spec)


def build_coefficient(cfg: ExperimentConfig, amplitude: float | None = None) -> CoefficientField:
    spec = dict(cfg.coefficient)
    if "file" in spec:
        return coefficient_from_raster(read_raster(cfg.base_dir / spec["file"]))
    preset = str(spec.pop("preset", "constant"))
    if amplitude is not None and preset in ("jump", "checkerboard"):
        spec["amplitude"] = amplitude
    return make_coefficient(preset, **spec)


def build_obstacle(cfg: ExperimentConfig, grid: Grid2D, scale: float = 1.0) -> GridFunction | None:
    spec = dict(cfg.obstacle)
    preset = str(spec.pop("preset", "none")).lower()
    if preset == "none":
        return None
    if preset == "affine":
        ax = float(spec.get("ax", 0.1))
        ay = float(spec.get("ay", 0.0))
        b = float(spec.get("b", -1.0))
        fn = lambda X, Y: ax * X + ay * Y + b
    elif preset == "quadratic":
        height = float(spec.get("height", 0.2))
        curv = float(spec.get("curvature", 1.5))
        cx = float(spec.get("cx", 0.5))
        cy = float(spec.get("cy", 0.5))
        fn = lambda X, Y: height - curv * ((X - cx) ** 2 + (Y - cy) ** 2)
    elif preset == "bump":
        height = float(spec.get("height", 0.25))
        radius = float(spec.get("radius", 0.3))
        cx = float(spec.get("cx", 0.5))
        cy = float(spec.get("cy", 0.5))
        floor = float(spec.get("floor", -0.05))
        def fn(X, Y):
            rho2 = ((X - cx) ** 2 + (Y - cy) ** 2) / radius**2
            return floor + height * np.where(rho2 < 1, (1 - np.minimum(rho2, 1)) ** 2, 0.0)
    elif preset == "file":
        return read_raster(cfg.base_dir / spec["path"])
    else:
        raise DataError(f"unknown obstacle preset {preset!r}")
    gf = GridFunction.from_callable(grid, fn)
    return gf.with_values(gf.values * scale)


def build_measure(cfg: ExperimentConfig, grid: Grid2D, scale: float = 1.0) -> MeasureData | None:
    spec = cfg.measure
    if not spec:
        return None
    atoms = []
    raw = str(spec.get("atoms", "")).strip()
    if raw:
        for chunk in raw.split(";"):
            parts = chunk.split()
            if not parts:
                continue
            if len(parts) != 3:
                raise DataError(f"atom spec needs 'x y mass', got {chunk!r}")
            x, y, m = (float(t) for t in parts)
            atoms.append((x, y, m * scale))
    density = None
    dens = spec.get("density", "none")
    if isinstance(dens, (int, float)):
        density = GridFunction.constant(grid, float(dens) * scale)
    elif str(dens).lower() not in ("none", ""):
        density = read_raster(cfg.base_dir / str(dens))
        density = density.with_values(density.values * scale)
    if not atoms and density is None:
        return None
    return MeasureData(atoms, density)


def radial_potential_profile(growth: GrowthFunction, mass: float, r, *,
                             r_ref: float = 1.0, c0: float = 1.0):
    """Radial potential with unit flux balance: u(r) = c0 - int_{r_ref}^{r}
    g^{-1}(mass / (2 pi s)) ds, the field a centered source generates.

    Power growths integrate in closed form; general growths use a dense
    cumulative quadrature.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise DataError("radial profile needs positive radii")
    if isinstance(growth, PowerGrowth):
        p = growth.p
        A = (mass / (2 * np.pi)) ** (1.0 / (p - 1.0))
        if p == 2.0:
            return c0 - A * np.log(r / r_ref)
        kappa = (p - 2.0) / (p - 1.0)
        return c0 - A * (r**kappa - r_ref**kappa) / kappa
    lo = min(float(r.min()), r_ref) / 2.0
    hi = max(float(r.max()), r_ref) * 2.0
    s = np.geomspace(lo, hi, 4096)
    integrand = growth.g_inverse(mass / (2 * np.pi * s))
    cum = np.concatenate([[0.0], cumulative_trapezoid(integrand, s)])
    at = np.interp(r, s, cum)
    at_ref = np.interp(r_ref, s, cum)
    return c0 - (at - at_ref)


def build_boundary(cfg: ExperimentConfig, grid: Grid2D, growth: GrowthFunction,
                   measure: MeasureData | None, scale: float = 1.0) -> GridFunction:
    spec = dict(cfg.boundary)
    preset = str(spec.get("preset", "zero")).lower()
    if preset == "zero":
        fn = lambda X, Y: np.zeros_like(X)
    elif preset == "constant":
        v = float(spec.get("value", 0.0))
        fn = lambda X, Y: np.full_like(X, v)
    elif preset == "affine":
        ax = float(spec.get("ax", 1.0))
        ay = float(spec.get("ay", 0.0))
        b = float(spec.get("b", 0.0))
        fn = lambda X, Y: ax * X + ay * Y + b
    elif preset == "sin_affine":
        amp = float(spec.get("amp", 0.3))
        k = float(spec.get("k", 1.0))
        fn = lambda X, Y: X + amp * np.sin(2 * np.pi * k * Y)
    elif preset in ("fundamental", "radial"):
        if measure is None or not measure.atoms:
            raise DataError("fundamental boundary preset needs an atom in the measure")
        ax_, ay_, mass = measure.atoms[0]
        c0 = float(spec.get("c0", 1.0))
        def fn(X, Y):
            R = np.hypot(X - ax_, Y - ay_)
            return radial_potential_profile(growth, abs(mass), R, c0=c0)
    elif preset == "file":
        return read_raster(cfg.base_dir / spec["path"])
    else:
        raise DataError(f"unknown boundary preset {preset!r}")
    gf = GridFunction.from_callable(grid, fn)
    return gf.with_values(gf.values * scale)


_USE_MEASURE = object()


@dataclass
class Instance:
    """A config realized at one mesh: everything a solve or a check needs."""

    config: ExperimentConfig
    grid: Grid2D
    growth: GrowthFunction
    og: OrliczG
    field: VectorField
    obstacle: GridFunction | None
    measure: MeasureData | None
    boundary: GridFunction
    solver: SolverConfig
    data_scale: float = 1.0
    rhs_scale: float = 1.0

    def problem(self, rhs=_USE_MEASURE) -> ObstacleProblem:
        return ObstacleProblem(
            field=self.field,
            boundary=self.boundary,
            obstacle=self.obstacle,
            rhs=self.measure if rhs is _USE_MEASURE else rhs,
        )


def build_instance(cfg: ExperimentConfig, n: int | None = None, *,
                   data_scale: float = 1.0, rhs_scale: float = 1.0,
                   amplitude: float | None = None,
                   epsilon: float | None = None) -> Instance:
    """Realize the config on a mesh.

    ``data_scale`` multiplies boundary, obstacle, and measure together
    (the full-data scaling); ``rhs_scale`` multiplies the measure only.
    """
    grid = build_grid(cfg, n)
    growth = build_growth(cfg)
    coefficient = build_coefficient(cfg, amplitude)
    vf = VectorField(growth, coefficient)
    obstacle = build_obstacle(cfg, grid, data_scale)
    measure = build_measure(cfg, grid, data_scale * rhs_scale)
    boundary = build_boundary(cfg, grid, growth, measure, data_scale)
    solver = cfg.solver
    if epsilon is None:
        eps_axis = cfg.sweep.get("epsilon", [])
        if len(eps_axis) == 1:
            epsilon = float(eps_axis[0])
    if epsilon is not None:
        solver = replace(solver, epsilon=epsilon)
    return Instance(
        config=cfg,
        grid=grid,
        growth=growth,
        og=OrliczG(growth),
        field=vf,
        obstacle=obstacle,
        measure=measure,
        boundary=boundary,
        solver=solver,
        data_scale=data_scale,
        rhs_scale=rhs_scale,
    )
