"""Wolff potentials and restricted maximal operators.

All radial objects share one log-spaced radius ladder truncated at an
inner cutoff r_min (default 2h): the continuum limit rho -> 0 is not
resolvable on a grid, and keeping the same truncation on both sides of
every inequality preserves ratio-based verification.  The Wolff
quadrature inserts breakpoints at the exact atom distances so the mass
jumps of Dirac measures do not contaminate the log-trapezoid rule.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, RangeError
from .grid import (
    GridFunction,
    MeasureData,
    ball_average,
    ball_mass,
    disk_integral,
    gradient,
    hessian,
)
from .orlicz import GrowthFunction

__all__ = [
    "N_DIM",
    "WolffParams",
    "ObstacleDensity",
    "wolff",
    "wolff_detail",
    "wolff_psi",
    "wolff_psi_detail",
    "frac_maximal",
    "sharp_maximal",
    "sharp_maximal_vector",
    "obstacle_maximal",
    "radius_ladder",
    "write_potential_csv",
]

N_DIM = 2  # planar grids only


@dataclass(frozen=True)
class WolffParams:
    """Quadrature parameters for W_{beta,p}(x, R).

    n - beta*p can take either sign; the log-trapezoid handles both.
    """

    beta: float
    p: float
    R: float
    nodes_per_decade: int = 24
    r_min: float = 1e-3

    def __post_init__(self):
        if not (0.0 < self.beta <= N_DIM):
            raise DataError("beta must lie in (0, n]")
        if self.p <= 1.0:
            raise DataError("p must exceed 1")
        if self.r_min <= 0:
            raise DataError("r_min must be positive")


def radius_ladder(r_min: float, R: float, per_decade: int = 24) -> np.ndarray:
    """Log-spaced radii including both endpoints exactly."""
    if R <= r_min:
        raise RangeError(f"ladder needs R > r_min (got R={R:g}, r_min={r_min:g})")
    count = max(2, int(np.ceil(np.log10(R / r_min) * per_decade)) + 1)
    ladder = np.geomspace(r_min, R, count)
    ladder[0], ladder[-1] = r_min, R
    return ladder


class ObstacleDensity:
    """The obstacle's measure-like density: g(|Dpsi|)/|Dpsi| |D^2 psi| + 1.

    |D^2 psi| is the entrywise l1 norm of the Hessian, and the +1 floor
    keeps the kernel at least 1 everywhere.
    """

    def __init__(self, psi: GridFunction, kernel: GridFunction):
        if np.any(kernel.values < 1.0 - 1e-12):
            raise DataError("obstacle kernel must respect the +1 floor")
        self.psi = psi
        self.kernel = kernel

    @classmethod
    def build(cls, psi: GridFunction, growth: GrowthFunction) -> "ObstacleDensity":
        gx, gy = gradient(psi)
        mag = np.hypot(gx.values, gy.values)
        hxx, hxy, hyy = hessian(psi)
        hess_l1 = np.abs(hxx.values) + np.abs(hyy.values) + 2.0 * np.abs(hxy.values)
        kern = growth.kernel(mag) * hess_l1 + 1.0
        return cls(psi, psi.with_values(kern))

    def mass(self, center, radius: float) -> float:
        return disk_integral(self.kernel, center, radius)


def _wolff_quadrature(mass_fn, wp: WolffParams, breakpoints=()) -> float:
    radii = radius_ladder(wp.r_min, wp.R, wp.nodes_per_decade)
    extra = []
    for d in breakpoints:
        if wp.r_min < d < wp.R:
            extra.extend([d * (1.0 - 1e-9), d])
    if extra:
        radii = np.unique(np.concatenate([radii, np.asarray(extra)]))
    masses = np.array([mass_fn(rho) for rho in radii])
    expo = N_DIM - wp.beta * wp.p
    integrand = (masses / radii**expo) ** (1.0 / (wp.p - 1.0))
    return float(np.trapezoid(integrand, np.log(radii)))


def wolff_detail(mu: MeasureData, x, wp: WolffParams) -> tuple[float, bool]:
    """(value, truncated): the potential over [r_min, R] plus a flag that
    the dropped tail [0, r_min) carries mass, so the value is a lower bound."""
    dists = [float(np.hypot(ax - x[0], ay - x[1])) for ax, ay, _ in mu.atoms]
    value = _wolff_quadrature(lambda rho: ball_mass(mu, x, rho), wp, breakpoints=dists)
    truncated = ball_mass(mu, x, wp.r_min) > 0.0
    return value, truncated


def wolff(mu: MeasureData, x, wp: WolffParams) -> float:
    return wolff_detail(mu, x, wp)[0]


def wolff_psi_detail(od: ObstacleDensity, x, wp: WolffParams) -> tuple[float, bool]:
    value = _wolff_quadrature(lambda rho: od.mass(x, rho), wp)
    truncated = od.mass(x, wp.r_min) > 0.0
    return value, truncated


def wolff_psi(od: ObstacleDensity, x, wp: WolffParams) -> float:
    return wolff_psi_detail(od, x, wp)[0]


def _ladder_for(R: float, r_min: float | None, grid, per_decade: int) -> np.ndarray:
    if r_min is None:
        if grid is None:
            raise DataError("need either a grid (for the 2h cutoff) or an explicit r_min")
        r_min = 2.0 * grid.h
    if R < r_min:
        raise RangeError(f"maximal-operator radius {R:g} below the cutoff {r_min:g}")
    if R == r_min:
        return np.array([R])
    return radius_ladder(r_min, R, per_decade)


def frac_maximal(obj, x, beta: float, R: float, *, r_min: float | None = None,
                 per_decade: int = 24) -> float:
    """Restricted fractional maximal function: sup over the ladder of
    rho^beta times the ball average (functions) or mass/|B_rho| (measures)."""
    if not (0.0 <= beta <= N_DIM):
        raise DataError("beta must lie in [0, n]")
    if isinstance(obj, MeasureData):
        grid = obj.density.grid if obj.density is not None else None
        radii = _ladder_for(R, r_min, grid, per_decade)
        vals = [
            rho**beta * ball_mass(obj, x, rho) / (np.pi * rho**2) for rho in radii
        ]
        return float(max(vals))
    f: GridFunction = obj
    radii = _ladder_for(R, r_min, f.grid, per_decade)
    absf = f.with_values(np.abs(f.values))
    vals = [rho**beta * ball_average(absf, x, rho) for rho in radii]
    return float(max(vals))


def sharp_maximal(f: GridFunction, x, alpha: float, R: float, *,
                  r_min: float | None = None, per_decade: int = 24) -> float:
    """Restricted sharp maximal function: sup of rho^(-alpha) times the
    mean oscillation of f over B_rho(x)."""
    if not (0.0 <= alpha <= N_DIM):
        raise DataError("alpha must lie in [0, n]")
    radii = _ladder_for(R, r_min, f.grid, per_decade)
    best = 0.0
    for rho in radii:
        mean = ball_average(f, x, rho)
        osc = ball_average(f.with_values(np.abs(f.values - mean)), x, rho)
        best = max(best, rho ** (-alpha) * osc)
    return float(best)


def sharp_maximal_vector(components, x, alpha: float, R: float, *,
                         r_min: float | None = None, per_decade: int = 24) -> float:
    """Sharp maximal function of a vector field: the oscillation is the
    euclidean norm against the componentwise ball means."""
    fx, fy = components
    if not (0.0 <= alpha <= N_DIM):
        raise DataError("alpha must lie in [0, n]")
    radii = _ladder_for(R, r_min, fx.grid, per_decade)
    best = 0.0
    for rho in radii:
        mx = ball_average(fx, x, rho)
        my = ball_average(fy, x, rho)
        osc_field = fx.with_values(np.hypot(fx.values - mx, fy.values - my))
        best = max(best, rho ** (-alpha) * ball_average(osc_field, x, rho))
    return float(best)


def obstacle_maximal(od: ObstacleDensity, x, beta: float, R: float, *,
                     r_min: float | None = None, per_decade: int = 24) -> float:
    """sup of rho^beta times the ball average of the obstacle kernel."""
    if not (0.0 <= beta <= N_DIM):
        raise DataError("beta must lie in [0, n]")
    radii = _ladder_for(R, r_min, od.kernel.grid, per_decade)
    vals = [rho**beta * ball_average(od.kernel, x, rho) for rho in radii]
    return float(max(vals))


def write_potential_csv(path, rows) -> None:
    """Batch output: one (x, y, value, truncation_flag) row per point."""
    with open(path, "w") as fh:
        fh.write("x,y,value,truncation_flag\n")
        for x, y, value, flag in rows:
            fh.write(f"{x:.12g},{y:.12g},{value:.12g},{int(flag)}\n")
