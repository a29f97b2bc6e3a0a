"""Uniform 2D discretization: scalar fields, stencils, balls, and measures.

Nodes sit at cell centers of an n-by-n square grid; the outermost node
ring doubles as the Dirichlet trace.  Ball queries snap their center to
the nearest node and reuse cached offset tables, so repeated ladder
evaluations cost one fancy-indexing gather per (center, radius).  Measure
mass queries keep the exact center: atom membership is a closed-ball
distance test and cut cells follow the node-center-in-disk rule.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DataError,
    DomainError,
    GridMismatchError,
    ResolutionError,
)

__all__ = [
    "Grid2D",
    "GridFunction",
    "BallIndex",
    "MeasureData",
    "gradient",
    "hessian",
    "ball_average",
    "ball_nodes",
    "disk_integral",
    "ball_mass",
    "median",
    "largest_median",
    "truncate",
    "w11_distance",
    "write_raster",
    "read_raster",
    "write_measure",
    "read_measure",
]

_EPS = 1e-12


@dataclass
class Grid2D:
    """Square grid with n cells per axis and nodes at the cell centers."""

    n: int
    side: float = 1.0
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.n < 16:
            raise DataError("grids need at least 16 cells per axis")
        if self.side <= 0:
            raise DataError("side must be positive")
        self.h = self.side / self.n
        ax = self.origin[0] + (np.arange(self.n) + 0.5) * self.h
        ay = self.origin[1] + (np.arange(self.n) + 0.5) * self.h
        self.xs, self.ys = ax, ay
        self.X, self.Y = np.meshgrid(ax, ay, indexing="ij")
        for arr in (self.xs, self.ys, self.X, self.Y):
            arr.flags.writeable = False

    def node_position(self, ix: int, iy: int) -> tuple[float, float]:
        return float(self.xs[ix]), float(self.ys[iy])

    def nearest_node(self, point) -> tuple[int, int]:
        x, y = point
        if not self.contains_point(point):
            raise DomainError(f"point {point} outside domain")
        ix = int(np.clip(round((x - self.origin[0]) / self.h - 0.5), 0, self.n - 1))
        iy = int(np.clip(round((y - self.origin[1]) / self.h - 0.5), 0, self.n - 1))
        return ix, iy

    def contains_point(self, point) -> bool:
        x, y = point
        return (
            self.origin[0] - _EPS <= x <= self.origin[0] + self.side + _EPS
            and self.origin[1] - _EPS <= y <= self.origin[1] + self.side + _EPS
        )

    def contains_ball(self, center, radius: float) -> bool:
        x, y = center
        slack = _EPS * max(1.0, self.side)
        return (
            x - radius >= self.origin[0] - slack
            and x + radius <= self.origin[0] + self.side + slack
            and y - radius >= self.origin[1] - slack
            and y + radius <= self.origin[1] + self.side + slack
        )

    def boundary_distance(self, point) -> float:
        x, y = point
        return min(
            x - self.origin[0],
            self.origin[0] + self.side - x,
            y - self.origin[1],
            self.origin[1] + self.side - y,
        )

    def interior_mask(self) -> np.ndarray:
        m = np.zeros((self.n, self.n), dtype=bool)
        m[1:-1, 1:-1] = True
        return m

    def ring_mask(self) -> np.ndarray:
        return ~self.interior_mask()

    def matches(self, other: "Grid2D") -> bool:
        return (
            self.n == other.n
            and abs(self.side - other.side) < _EPS
            and abs(self.origin[0] - other.origin[0]) < _EPS
            and abs(self.origin[1] - other.origin[1]) < _EPS
        )


class GridFunction:
    """Scalar field on the nodes of a Grid2D; values are published read-only."""

    def __init__(self, grid: Grid2D, values: np.ndarray):
        values = np.array(values, dtype=float)
        if values.shape != (grid.n, grid.n):
            raise GridMismatchError(
                f"values shape {values.shape} does not match grid ({grid.n}, {grid.n})"
            )
        if not np.all(np.isfinite(values)):
            raise DataError("grid function values must be finite")
        values.flags.writeable = False
        self.grid = grid
        self.values = values

    @classmethod
    def from_callable(cls, grid: Grid2D, fn) -> "GridFunction":
        return cls(grid, np.asarray(fn(grid.X, grid.Y), dtype=float) + np.zeros_like(grid.X))

    @classmethod
    def constant(cls, grid: Grid2D, value: float) -> "GridFunction":
        return cls(grid, np.full((grid.n, grid.n), float(value)))

    def with_values(self, values: np.ndarray) -> "GridFunction":
        return GridFunction(self.grid, values)

    def boundary_values(self) -> np.ndarray:
        """Dirichlet trace: values on the outermost node ring."""
        ring = self.grid.ring_mask()
        return self.values[ring]

    def at_node(self, point) -> float:
        ix, iy = self.grid.nearest_node(point)
        return float(self.values[ix, iy])

    def __repr__(self):
        return f"GridFunction(n={self.grid.n}, range=[{self.values.min():.3g}, {self.values.max():.3g}])"


class BallIndex:
    """Offset tables for node-centered disks, one entry per radius.

    Membership is the node-center rule |node - center| <= radius; every
    listed offset keeps the node inside the stated radius, and the node
    count matches the disk area up to one boundary ring.
    """

    def __init__(self, grid: Grid2D):
        self.grid = grid
        self._tables: dict[float, tuple[np.ndarray, np.ndarray]] = {}

    def offsets(self, radius: float) -> tuple[np.ndarray, np.ndarray]:
        key = round(radius / self.grid.h, 9)
        tab = self._tables.get(key)
        if tab is None:
            m = int(np.floor(radius / self.grid.h + _EPS))
            rng = np.arange(-m, m + 1)
            di, dj = np.meshgrid(rng, rng, indexing="ij")
            keep = (di.astype(float) ** 2 + dj.astype(float) ** 2) <= (
                radius / self.grid.h
            ) ** 2 * (1.0 + 1e-12)
            tab = (di[keep].ravel(), dj[keep].ravel())
            self._tables[key] = tab
        return tab


_INDEX_CACHE: dict[int, BallIndex] = {}


def _index_for(grid: Grid2D) -> BallIndex:
    idx = _INDEX_CACHE.get(id(grid))
    if idx is None or idx.grid is not grid:
        idx = BallIndex(grid)
        _INDEX_CACHE[id(grid)] = idx
    return idx


def ball_nodes(grid: Grid2D, center, radius: float) -> tuple[np.ndarray, np.ndarray]:
    """Node indices of the disk B_radius(center), center snapped to a node.

    Requires radius >= 2h and the (snapped) ball inside the domain.
    """
    if radius < 2.0 * grid.h - _EPS:
        raise ResolutionError(
            f"radius {radius:.4g} below the 2h resolution floor ({2 * grid.h:.4g})"
        )
    ix, iy = grid.nearest_node(center)
    cx, cy = grid.node_position(ix, iy)
    if not grid.contains_ball((cx, cy), radius):
        raise DomainError(f"ball of radius {radius:.4g} at {center} exits the domain")
    di, dj = _index_for(grid).offsets(radius)
    return ix + di, iy + dj


def ball_average(f: GridFunction, center, radius: float) -> float:
    """Arithmetic mean of f over the nodes of B_radius(center)."""
    ii, jj = ball_nodes(f.grid, center, radius)
    return float(f.values[ii, jj].mean())


def median(f: GridFunction, center, radius: float) -> float:
    """Largest median of f over the ball: the supremum of levels exceeded
    by more than half the nodes."""
    ii, jj = ball_nodes(f.grid, center, radius)
    return largest_median(f.values[ii, jj])


def largest_median(values) -> float:
    vals = np.sort(np.asarray(values, dtype=float).ravel())
    k = vals.size
    if k == 0:
        raise DataError("median of an empty sample")
    return float(vals[(k - 1) // 2])


def disk_integral(f: GridFunction, center, radius: float) -> float:
    """Sum of f * h^2 over nodes within radius of the exact center.

    Mass-type query: the disk may exit the domain (the outside contributes
    nothing), and the center is not snapped.
    """
    g = f.grid
    mask = (g.X - center[0]) ** 2 + (g.Y - center[1]) ** 2 <= radius**2 * (1 + 1e-12)
    return float(f.values[mask].sum() * g.h * g.h)


def gradient(f: GridFunction) -> tuple[GridFunction, GridFunction]:
    """Centered differences in the interior, second-order one-sided on the
    boundary ring; exact for affine fields."""
    if f.grid.n < 3:
        raise DataError("gradient needs at least 3 nodes per axis")
    gx = np.gradient(f.values, f.grid.h, axis=0, edge_order=2)
    gy = np.gradient(f.values, f.grid.h, axis=1, edge_order=2)
    return f.with_values(gx), f.with_values(gy)


def _second_diff(v: np.ndarray, h: float, axis: int) -> np.ndarray:
    v = np.moveaxis(v, axis, 0)
    out = np.empty_like(v)
    out[1:-1] = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / h**2
    out[0] = (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / h**2
    out[-1] = (2.0 * v[-1] - 5.0 * v[-2] + 4.0 * v[-3] - v[-4]) / h**2
    return np.moveaxis(out, 0, axis)


def hessian(f: GridFunction) -> tuple[GridFunction, GridFunction, GridFunction]:
    """(f_xx, f_xy, f_yy) by second-order stencils; exact for quadratics.

    The mixed derivative is the y-difference of the x-difference, which is
    symmetric in the two orders because the difference operators commute.
    """
    if f.grid.n < 5:
        raise DataError("hessian needs at least 5 nodes per axis")
    h = f.grid.h
    hxx = _second_diff(f.values, h, axis=0)
    hyy = _second_diff(f.values, h, axis=1)
    gx = np.gradient(f.values, h, axis=0, edge_order=2)
    hxy = np.gradient(gx, h, axis=1, edge_order=2)
    return f.with_values(hxx), f.with_values(hxy), f.with_values(hyy)


def truncate(f: GridFunction, k: float) -> GridFunction:
    """Pointwise clamp to [-k, k]."""
    if not (k > 0):
        raise DataError("truncation level must be positive")
    return f.with_values(np.clip(f.values, -k, k))


def w11_distance(f: GridFunction, g2: GridFunction) -> float:
    """int |f - g2| + int |Df - Dg2| by the midpoint rule on nodes."""
    if not f.grid.matches(g2.grid):
        raise GridMismatchError("w11_distance needs both functions on one grid")
    h2 = f.grid.h**2
    d0 = np.abs(f.values - g2.values).sum() * h2
    fx, fy = gradient(f)
    gx, gy = gradient(g2)
    d1 = np.hypot(fx.values - gx.values, fy.values - gy.values).sum() * h2
    return float(d0 + d1)


@dataclass
class MeasureData:
    """Radon measure: Dirac atoms plus an optional absolutely continuous
    grid density.  Atoms must lie strictly inside the domain the measure is
    used on; that is checked when a grid is available."""

    atoms: list[tuple[float, float, float]] = field(default_factory=list)
    density: GridFunction | None = None

    def __post_init__(self):
        self.atoms = [(float(x), float(y), float(m)) for x, y, m in self.atoms]
        if self.density is not None and np.any(self.density.values < 0):
            raise DataError("measure densities must be nonnegative")
        if self.density is not None:
            g = self.density.grid
            for x, y, _ in self.atoms:
                if g.boundary_distance((x, y)) <= 0:
                    raise DataError(f"atom at ({x}, {y}) not strictly inside the domain")

    @property
    def total_variation(self) -> float:
        tv = sum(abs(m) for _, _, m in self.atoms)
        if self.density is not None:
            g = self.density.grid
            tv += float(np.abs(self.density.values).sum() * g.h * g.h)
        return tv

    def scaled(self, factor: float) -> "MeasureData":
        atoms = [(x, y, m * factor) for x, y, m in self.atoms]
        dens = None
        if self.density is not None:
            dens = self.density.with_values(self.density.values * factor)
        return MeasureData(atoms, dens)

    @property
    def is_trivial(self) -> bool:
        return not self.atoms and (
            self.density is None or not np.any(self.density.values)
        )


def ball_mass(mu: MeasureData, center, radius: float) -> float:
    """|mu| of the closed ball: atom masses within the exact distance plus
    the cut-cell integral of |density| (node-center-in-disk rule)."""
    if radius <= 0:
        raise DataError("ball_mass needs a positive radius")
    cx, cy = center
    tol = radius + _EPS * max(1.0, radius)
    total = sum(
        abs(m) for x, y, m in mu.atoms if np.hypot(x - cx, y - cy) <= tol
    )
    if mu.density is not None:
        total += disk_integral(
            mu.density.with_values(np.abs(mu.density.values)), center, radius
        )
    return float(total)


# ---------------------------------------------------------------------------
# text I/O: headered rasters and measure descriptions

def write_raster(path, f: GridFunction) -> None:
    g = f.grid
    with open(path, "w") as fh:
        fh.write(f"{g.n} {g.n} {g.origin[0]:.17g} {g.origin[1]:.17g} {g.side:.17g}\n")
        for row in f.values:
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def read_raster(path) -> GridFunction:
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 5:
            raise DataError("raster header must be 'nx ny x0 y0 side'")
        nx, ny = int(header[0]), int(header[1])
        if nx != ny:
            raise DataError("only square rasters are supported")
        x0, y0, side = (float(v) for v in header[2:])
        values = np.loadtxt(fh, dtype=float)
    if values.shape != (nx, ny):
        raise DataError(f"raster body has shape {values.shape}, expected ({nx}, {ny})")
    return GridFunction(Grid2D(nx, side, (x0, y0)), values)


def write_measure(path, mu: MeasureData, density_path=None) -> None:
    path = Path(path)
    with open(path, "w") as fh:
        for x, y, m in mu.atoms:
            fh.write(f"atom {x:.17g} {y:.17g} {m:.17g}\n")
        if mu.density is not None:
            if density_path is None:
                density_path = path.with_suffix(".density.txt")
            write_raster(density_path, mu.density)
            fh.write(f"density {Path(density_path).name}\n")


def read_measure(path) -> MeasureData:
    path = Path(path)
    atoms: list[tuple[float, float, float]] = []
    density = None
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "atom":
                if len(parts) != 4:
                    raise DataError(f"malformed atom line: {line!r}")
                atoms.append((float(parts[1]), float(parts[2]), float(parts[3])))
            elif parts[0] == "density":
                density = read_raster(path.parent / parts[1])
            else:
                raise DataError(f"unknown measure line: {line!r}")
    return MeasureData(atoms, density)
