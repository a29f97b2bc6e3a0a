"""Variational-inequality and equation solvers.

The discrete energy lives on the (n-1)^2 cells spanned by 2x2 node blocks:

    E(u) = sum_cells omega_c G(m_c) h^2  -  sum_free f u h^2,
    m_c  = sqrt(|Du_c|^2 + eps^2),

with Du_c the average of the four surrounding node differences, which
pins down one gradient sample per cell and avoids the checkerboard null
space of naive node-centered norms.  Minimization over {u >= psi, u = h on
the pinned set} is projected gradient with Armijo backtracking; the
initial step each iteration is the spectral (Barzilai-Borwein) quotient of
the previous accepted step, safeguarded so every accepted step decreases
the energy.  The solver converges when the projected residual satisfies
both  h * ||pr||_2 <= tol  and  max |pr| <= 10 tol,  so the reported
complementarity bound holds by construction.

Ball-restricted solves pin every node outside the ball to the trace
donor, realizing "w = u on the ball boundary" without a second mesh.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.signal import convolve2d

from .errors import (
    ChainError,
    DataError,
    DomainError,
    IterationLimitError,
    LevelError,
)
from .field import VectorField
from .grid import Grid2D, GridFunction, MeasureData, w11_distance

__all__ = [
    "SolverConfig",
    "ObstacleProblem",
    "Solution",
    "solve_vi",
    "solve_equation",
    "solve_frozen",
    "mollify_measure",
    "solve_op_sequence",
    "OPSequence",
    "comparison_chain",
    "ComparisonChain",
    "apply_operator",
]


@dataclass(frozen=True)
class SolverConfig:
    epsilon: float = 1e-8        # kernel regularization inside m = sqrt(|Du|^2 + eps^2)
    tol: float = 1e-8            # projected-residual tolerance, discrete L2 norm
    max_iter: int = 200_000
    backtrack: float = 0.5
    sufficient_decrease: float = 1e-4

    def __post_init__(self):
        if self.tol <= 0 or self.epsilon < 0:
            raise DataError("need tol > 0 and epsilon >= 0")


@dataclass
class ObstacleProblem:
    """Problem instance: field, Dirichlet trace, optional obstacle, data.

    The trace is a full grid function whose outermost ring (or, for ball
    solves, everything outside the ball) supplies the pinned values.
    """

    field: VectorField
    boundary: GridFunction
    obstacle: GridFunction | None = None
    rhs: GridFunction | MeasureData | None = None

    def __post_init__(self):
        g = self.boundary.grid
        if self.obstacle is not None and not self.obstacle.grid.matches(g):
            raise DataError("obstacle and boundary live on different grids")
        if isinstance(self.rhs, GridFunction) and not self.rhs.grid.matches(g):
            raise DataError("rhs and boundary live on different grids")
        if self.obstacle is not None:
            ring = g.ring_mask()
            if np.any(self.boundary.values[ring] < self.obstacle.values[ring] - 1e-12):
                raise DataError("boundary trace lies below the obstacle")

    @property
    def grid(self) -> Grid2D:
        return self.boundary.grid


@dataclass
class Solution:
    u: GridFunction
    iterations: int
    residual_history: list[float]
    energy_history: list[float]
    complementarity: float
    energy: float
    converged: bool = True


def _cell_flux(vals, omega_cells, growth, inv2h, eps2):
    a = vals[:-1, :-1]
    b = vals[1:, :-1]
    c = vals[:-1, 1:]
    d = vals[1:, 1:]
    dux = (b + d - a - c) * inv2h
    duy = (c + d - a - b) * inv2h
    m = np.sqrt(dux * dux + duy * duy + eps2)
    return dux, duy, m


def apply_operator(grid: Grid2D, growth, omega_cells, values, epsilon: float = 0.0):
    """Discrete -div(omega g(|Dv|)/|Dv| Dv) at the nodes, the adjoint of
    the cell-gradient stencil the energy uses."""
    inv2h = 0.5 / grid.h
    dux, duy, m = _cell_flux(values, omega_cells, growth, inv2h, epsilon**2)
    k = omega_cells * growth.kernel(m)
    qx = k * dux
    qy = k * duy
    r = np.zeros_like(values)
    r[:-1, :-1] -= qx + qy
    r[1:, :-1] += qx - qy
    r[:-1, 1:] += qy - qx
    r[1:, 1:] += qx + qy
    r *= inv2h
    return r


class _Objective:
    def __init__(self, grid, growth, omega_cells, f, free, epsilon):
        self.growth = growth
        self.omega = omega_cells
        self.f = f
        self.free = free
        self.h2 = grid.h**2
        self.inv2h = 0.5 / grid.h
        self.eps2 = epsilon**2

    def __call__(self, vals):
        """Return (energy, residual, cell magnitudes)."""
        dux, duy, m = _cell_flux(vals, self.omega, self.growth, self.inv2h, self.eps2)
        E = float((self.omega * self.growth.G(m)).sum())
        k = self.omega * self.growth.kernel(m)
        qx = k * dux
        qy = k * duy
        r = np.zeros_like(vals)
        r[:-1, :-1] -= qx + qy
        r[1:, :-1] += qx - qy
        r[:-1, 1:] += qy - qx
        r[1:, 1:] += qx + qy
        r *= self.inv2h
        if self.f is not None:
            E -= float((self.f[self.free] * vals[self.free]).sum())
            r = r - self.f
        return E * self.h2, r, m


def _projected_residual(resid, u, psi, free):
    pr = np.where(free, resid, 0.0)
    if psi is not None:
        active = free & (u <= psi)
        pr[active] = np.minimum(pr[active], 0.0)
    return pr


def _complementarity(u, resid, psi, free):
    r = resid[free]
    if r.size == 0:
        return 0.0
    if psi is None:
        return float(np.abs(r).max())
    gap = (u - psi)[free]
    return float(np.abs(np.minimum(gap, r)).max())


def _minimize(grid, growth, omega_cells, f, start, psi, free, cfg):
    h = grid.h
    h2 = h * h
    u = np.array(start, dtype=float)
    if psi is not None:
        u[free] = np.maximum(u[free], psi[free])
    objective = _Objective(grid, growth, omega_cells, f, free, cfg.epsilon)

    E, resid, m = objective(u)
    res_hist: list[float] = []
    en_hist: list[float] = [E]
    tau_bb = None
    converged = False
    it = 0
    while it < cfg.max_iter:
        pr = _projected_residual(resid, u, psi, free)
        l2 = h * float(np.linalg.norm(pr))
        linf = float(np.abs(pr).max()) if pr.size else 0.0
        res_hist.append(l2)
        if l2 <= cfg.tol and linf <= 10.0 * cfg.tol:
            converged = True
            break
        kmax = float(
            (omega_cells * np.maximum(growth.dg(m), growth.kernel(m))).max()
        )
        tau0 = h2 / (4.0 * max(kmax, 1e-300))
        tau = tau_bb if tau_bb is not None else tau0
        accepted = False
        for _ in range(60):
            cand = np.where(free, u - tau * resid, u)
            if psi is not None:
                cand = np.where(free, np.maximum(cand, psi), cand)
            Ec, rc, mc = objective(cand)
            dec = h2 * float(np.sum(resid * (cand - u)))
            if Ec <= E + cfg.sufficient_decrease * dec + 1e-14 * (abs(E) + 1e-300):
                accepted = True
                break
            tau *= cfg.backtrack
        if not accepted:
            break  # step collapsed at the numerical floor with tol unmet
        du = cand - u
        dr = rc - resid
        num = float(np.sum(du[free] * du[free]))
        den = float(np.sum(du[free] * dr[free]))
        tau_bb = min(max(num / den, 1e-2 * tau0), 1e8 * tau0) if den > 0 else None
        assert Ec <= E + 1e-12 * (abs(E) + 1.0), "energy increased on an accepted step"
        u, resid, m, E = cand, rc, mc, Ec
        en_hist.append(E)
        it += 1

    comp = _complementarity(u, resid, psi, free)
    return u, it, res_hist, en_hist, comp, E, converged


def _ball_free_mask(grid: Grid2D, ball) -> np.ndarray:
    center, radius = ball
    if not grid.contains_ball(center, radius):
        raise DomainError(f"solve ball of radius {radius:.4g} at {center} exits the domain")
    dist2 = (grid.X - center[0]) ** 2 + (grid.Y - center[1]) ** 2
    return grid.interior_mask() & (dist2 <= radius**2 * (1 + 1e-12))


def _solve(prob: ObstacleProblem, cfg: SolverConfig, ball, warm_start,
           omega_cells=None) -> Solution:
    grid = prob.grid
    if isinstance(prob.rhs, MeasureData):
        raise DataError(
            "raw measure data cannot be solved directly; mollify it first "
            "or use solve_op_sequence"
        )
    f = prob.rhs.values if prob.rhs is not None else None
    psi = prob.obstacle.values if prob.obstacle is not None else None
    free = grid.interior_mask() if ball is None else _ball_free_mask(grid, ball)
    if not free.any():
        raise DataError("no free nodes to solve for")
    if warm_start is not None:
        start = warm_start.values if isinstance(warm_start, GridFunction) else np.asarray(warm_start)
        start = np.array(start, dtype=float)
    else:
        start = np.array(prob.boundary.values, dtype=float)
        if psi is not None:
            start = np.maximum(start, psi)
    # pinned nodes come from the trace donor and are never touched
    start = np.where(free, start, prob.boundary.values)
    if psi is not None and np.any(start[~free] < psi[~free] - 1e-12):
        raise DataError("trace donor lies below the obstacle on pinned nodes")
    if omega_cells is None:
        omega_cells = prob.field.coefficient.on_cells(grid)
    u, iters, res_hist, en_hist, comp, E, ok = _minimize(
        grid, prob.field.growth, omega_cells, f, start, psi, free, cfg
    )
    sol = Solution(
        u=GridFunction(grid, u),
        iterations=iters,
        residual_history=res_hist,
        energy_history=en_hist,
        complementarity=comp,
        energy=E,
        converged=ok,
    )
    if not ok:
        raise IterationLimitError(
            f"no convergence in {iters} iterations "
            f"(projected residual {res_hist[-1]:.3e}, tol {cfg.tol:.1e})",
            last=sol,
        )
    return sol


def solve_vi(prob: ObstacleProblem, cfg: SolverConfig | None = None, *,
             ball=None, warm_start=None) -> Solution:
    """Minimize the discrete energy over {u >= psi, pinned trace}."""
    return _solve(prob, cfg or SolverConfig(), ball, warm_start)


def solve_equation(prob: ObstacleProblem, cfg: SolverConfig | None = None, *,
                   ball=None, warm_start=None) -> Solution:
    """Same minimization without the obstacle projection."""
    if prob.obstacle is not None:
        raise DataError("solve_equation expects a problem without obstacle")
    return _solve(prob, cfg or SolverConfig(), ball, warm_start)


def solve_frozen(prob: ObstacleProblem, ball, cfg: SolverConfig | None = None, *,
                 warm_start=None, freeze_ball=None) -> Solution:
    """Solve on the ball with the coefficient replaced by its ball average.

    For the coefficient-times-kernel field this realizes the frozen field
    exactly: a_bar(eta) = mean(omega) * kernel(|eta|) * eta.
    """
    grid = prob.grid
    freeze_ball = freeze_ball or ball
    center, radius = freeze_ball
    if not grid.contains_ball(center, radius):
        raise DomainError("freeze ball exits the domain")
    dist2 = (grid.X - center[0]) ** 2 + (grid.Y - center[1]) ** 2
    mask = dist2 <= radius**2 * (1 + 1e-12)
    om_bar = float(prob.field.coefficient.on_nodes(grid)[mask].mean())
    n = grid.n
    omega_cells = np.full((n - 1, n - 1), om_bar)
    return _solve(prob, cfg or SolverConfig(), ball, warm_start, omega_cells=omega_cells)


def frozen_coefficient_value(prob: ObstacleProblem, ball) -> float:
    """The constant the frozen solve uses: node mean of omega over the ball."""
    grid = prob.grid
    center, radius = ball
    dist2 = (grid.X - center[0]) ** 2 + (grid.Y - center[1]) ** 2
    mask = dist2 <= radius**2 * (1 + 1e-12)
    return float(prob.field.coefficient.on_nodes(grid)[mask].mean())


def mollify_measure(mu: MeasureData, level: int, grid: Grid2D | None = None) -> GridFunction:
    """Convolve the measure with the normalized bump (1 - |x/r|^2)^2 of
    radius r = 1/(4 level); atom splats are renormalized on the grid so the
    mass is preserved exactly."""
    if level < 1 or int(level) != level:
        raise DataError("mollification level must be a positive integer")
    if grid is None:
        if mu.density is None:
            raise DataError("atom-only measures need an explicit grid to mollify on")
        grid = mu.density.grid
    rb = 1.0 / (4.0 * level)
    if rb < 2.0 * grid.h - 1e-12:
        raise LevelError(
            f"bump radius {rb:.4g} below the 2h resolution floor ({2 * grid.h:.4g})"
        )
    out = np.zeros((grid.n, grid.n))
    for ax, ay, mass in mu.atoms:
        if grid.boundary_distance((ax, ay)) <= rb:
            raise LevelError(
                f"bump of radius {rb:.4g} around atom ({ax:g}, {ay:g}) exits the domain"
            )
        rho2 = ((grid.X - ax) ** 2 + (grid.Y - ay) ** 2) / rb**2
        w = np.where(rho2 < 1.0, (1.0 - np.minimum(rho2, 1.0)) ** 2, 0.0)
        s = float(w.sum()) * grid.h**2
        out += (mass / s) * w
    if mu.density is not None:
        dens = mu.density.values
        support = np.abs(dens) > 0
        if support.any():
            ii, jj = np.nonzero(support)
            margin = min(
                grid.xs[ii].min() - grid.origin[0],
                grid.origin[0] + grid.side - grid.xs[ii].max(),
                grid.ys[jj].min() - grid.origin[1],
                grid.origin[1] + grid.side - grid.ys[jj].max(),
            )
            if margin <= rb:
                raise LevelError("density support within the bump radius of the boundary")
            mrad = int(np.floor(rb / grid.h))
            off = np.arange(-mrad, mrad + 1) * grid.h
            DX, DY = np.meshgrid(off, off, indexing="ij")
            rho2 = (DX**2 + DY**2) / rb**2
            K = np.where(rho2 < 1.0, (1.0 - np.minimum(rho2, 1.0)) ** 2, 0.0)
            K /= K.sum()
            out += convolve2d(dens, K, mode="same")
    return GridFunction(grid, out)


@dataclass
class OPSequence:
    """Mollification sweep: one solve per level plus limit diagnostics."""

    levels: list[int]
    solutions: list[Solution]
    distances: list[float]

    @property
    def finest(self) -> Solution:
        return self.solutions[-1]

    @property
    def w11_monotone(self) -> bool:
        return all(
            self.distances[i + 1] < self.distances[i]
            for i in range(len(self.distances) - 1)
        )


def solve_op_sequence(prob: ObstacleProblem, levels, cfg: SolverConfig | None = None) -> OPSequence:
    """Solve the variational inequality for each mollification level of the
    measure, warm-starting each level with the previous solution."""
    levels = [int(l) for l in levels]
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise DataError("mollification levels must be increasing")
    if not isinstance(prob.rhs, MeasureData):
        raise DataError("solve_op_sequence needs measure data on the right-hand side")
    cfg = cfg or SolverConfig()
    solutions: list[Solution] = []
    distances: list[float] = []
    prev = None
    for lvl in levels:
        try:
            f = mollify_measure(prob.rhs, lvl, prob.grid)
            sol = solve_vi(replace(prob, rhs=f), cfg, warm_start=prev)
        except (LevelError, IterationLimitError) as exc:
            raise type(exc)(f"level {lvl}: {exc}") from exc
        if prev is not None:
            distances.append(w11_distance(prev, sol.u))
        solutions.append(sol)
        prev = sol.u
    return OPSequence(levels, solutions, distances)


@dataclass
class ComparisonChain:
    """The four comparison problems attached to a ball B_R:

    w1  homogeneous obstacle problem on B_R with the outer trace,
    w2  frozen-coefficient obstacle problem on B_{R/2} with trace w1,
    w3  frozen-coefficient equation driven by the obstacle flux on B_{R/2},
    w4  frozen-coefficient homogeneous equation on B_{R/2}.
    """

    w1: Solution
    w2: Solution
    w3: Solution
    w4: Solution
    ball: tuple
    frozen_value: float


def comparison_chain(prob: ObstacleProblem, ball, cfg: SolverConfig | None = None, *,
                     outer: Solution | GridFunction) -> ComparisonChain:
    center, radius = ball
    grid = prob.grid
    if not grid.contains_ball(center, 2 * radius):
        raise DomainError("comparison chain needs the doubled ball inside the domain")
    cfg = cfg or SolverConfig()
    donor = outer.u if isinstance(outer, Solution) else outer
    half = (center, radius / 2.0)

    def stage(name, fn):
        try:
            return fn()
        except (IterationLimitError, DataError, DomainError) as exc:
            raise ChainError(name, exc) from exc

    w1 = stage("w1", lambda: solve_vi(
        replace(prob, boundary=donor, rhs=None), cfg, ball=ball, warm_start=donor
    ))
    w2 = stage("w2", lambda: solve_frozen(
        replace(prob, boundary=w1.u, rhs=None), half, cfg, warm_start=w1.u
    ))
    om_bar = frozen_coefficient_value(prob, half)
    if prob.obstacle is not None:
        n = grid.n
        omega_cells = np.full((n - 1, n - 1), om_bar)
        flux = apply_operator(grid, prob.field.growth, omega_cells,
                              prob.obstacle.values, cfg.epsilon)
        rhs3 = GridFunction(grid, flux)
    else:
        rhs3 = None
    w3 = stage("w3", lambda: solve_frozen(
        replace(prob, boundary=w1.u, obstacle=None, rhs=rhs3), half, cfg, warm_start=w1.u
    ))
    w4 = stage("w4", lambda: solve_frozen(
        replace(prob, boundary=w1.u, obstacle=None, rhs=None), half, cfg, warm_start=w3.u
    ))
    return ComparisonChain(w1, w2, w3, w4, ball, om_bar)
