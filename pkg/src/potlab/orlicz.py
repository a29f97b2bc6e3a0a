"""Growth-function calculus.

A growth function g drives the whole laboratory: it is C^1 on (0, inf),
vanishes only at 0, and its elasticity t*g'(t)/g(t) is pinned between the
lower index ig >= 1 and the upper index sg.  Its antiderivative
G(t) = int_0^t g is a strictly convex N-function; this module supplies G,
its inverse, the Young conjugate G*, index estimation, and the Sobolev
companion S(t) = G(t) * (G(t)/t)^(-1/n).

Supported kinds:

* ``power(p)``          g(t) = t^(p-1), indices (p-1, p-1)
* ``regularized_power`` g(t) = (mu + t^2)^((p-2)/2) t, indices (1, p-1)
  for mu > 0 and (p-1, p-1) for mu = 0
* ``tabulated``         monotone cubic interpolation of (t, g(t)) samples

Power and regularized kinds use closed forms for G and G^{-1}; the
tabulated kind integrates its interpolant.  All evaluators accept scalars
or numpy arrays.
"""

from __future__ import annotations

import warnings

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import DataError, DomainError, InsufficientDataError, RangeError

__all__ = [
    "GrowthFunction",
    "PowerGrowth",
    "RegularizedPowerGrowth",
    "TabulatedGrowth",
    "OrliczG",
    "make_growth",
    "eval_g",
    "eval_G",
    "inverse_G",
    "young_conjugate",
    "sobolev_S",
    "estimate_indices",
]


def _checked(t, name="t", allow_negative=False):
    arr = np.asarray(t, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    if not allow_negative and np.any(arr < 0):
        raise DomainError(f"{name} must be nonnegative")
    return arr


def _like(arr, template):
    """Return a python float for scalar input, the array otherwise."""
    if np.isscalar(template) or np.ndim(template) == 0:
        return float(arr)
    return arr


class GrowthFunction:
    """Base class: scalar nonlinearity with pinned growth indices."""

    kind = "base"
    ig: float
    sg: float

    def g(self, t):
        raise NotImplementedError

    def dg(self, t):
        raise NotImplementedError

    def kernel(self, t):
        """g(t)/t, extended to t = 0 by its limit (finite since ig >= 1)."""
        arr = _checked(t)
        out = np.empty_like(arr)
        pos = arr > 0
        out[pos] = self.g(arr[pos]) / arr[pos]
        out[~pos] = self.kernel0
        return _like(out, t)

    @property
    def kernel0(self) -> float:
        raise NotImplementedError

    def G(self, t):
        raise NotImplementedError

    def G_inverse(self, s):
        raise NotImplementedError

    def g_inverse(self, s):
        """Invert g by log-space bisection with a Newton polish.

        The bracket comes from the index sandwich around t = 1:
        g(1) beta^ig <= g(beta) <= g(1) beta^sg for beta >= 1, mirrored
        below 1.
        """
        arr = _checked(s, "s")
        out = np.zeros_like(arr)
        pos = arr > 0
        if np.any(pos):
            out[pos] = self._g_inverse_pos(arr[pos])
        return _like(out, s)

    def _g_inverse_pos(self, s):
        g1 = float(self.g(1.0))
        r = s / g1
        lo = np.where(r >= 1.0, r ** (1.0 / self.sg), r ** (1.0 / self.ig))
        hi = np.where(r >= 1.0, r ** (1.0 / self.ig), r ** (1.0 / self.sg))
        lo = lo * 0.5
        hi = hi * 2.0
        llo, lhi = np.log(lo), np.log(hi)
        for _ in range(64):
            mid = 0.5 * (llo + lhi)
            too_low = self.g(np.exp(mid)) < s
            llo = np.where(too_low, mid, llo)
            lhi = np.where(too_low, lhi, mid)
        t = np.exp(0.5 * (llo + lhi))
        for _ in range(3):
            d = self.dg(t)
            step = np.where(d > 0, (self.g(t) - s) / np.where(d > 0, d, 1.0), 0.0)
            t = np.clip(t - step, np.exp(llo) * 0.5, np.exp(lhi) * 2.0)
        return t

    def check_indices(self, samples: int = 512, slack: float = 1e-9) -> bool:
        """Sampled check of ig <= t g'(t)/g(t) <= sg on a log grid."""
        lo, hi = self._index_sample_range()
        t = np.geomspace(lo, hi, samples)
        ratio = t * self.dg(t) / self.g(t)
        return bool(
            np.all(ratio >= self.ig - slack) and np.all(ratio <= self.sg + slack)
        )

    def _index_sample_range(self):
        return 1e-8, 1e8


class PowerGrowth(GrowthFunction):
    """g(t) = t^(p-1) with p >= 2; G(t) = t^p / p."""

    kind = "power"

    def __init__(self, p: float):
        if not np.isfinite(p) or p < 2.0:
            raise DataError("power growth requires p >= 2")
        self.p = float(p)
        self.ig = self.p - 1.0
        self.sg = self.p - 1.0

    def g(self, t):
        arr = _checked(t)
        return _like(arr ** (self.p - 1.0), t)

    def dg(self, t):
        arr = _checked(t)
        if self.p == 2.0:
            return _like(np.ones_like(arr), t)
        return _like((self.p - 1.0) * arr ** (self.p - 2.0), t)

    @property
    def kernel0(self) -> float:
        return 1.0 if self.p == 2.0 else 0.0

    def G(self, t):
        arr = _checked(t)
        return _like(arr**self.p / self.p, t)

    def G_inverse(self, s):
        arr = _checked(s, "s")
        return _like((self.p * arr) ** (1.0 / self.p), s)

    def __repr__(self):
        return f"PowerGrowth(p={self.p})"


class RegularizedPowerGrowth(GrowthFunction):
    """g(t) = (mu + t^2)^((p-2)/2) t; the classical regularized p-kernel."""

    kind = "regularized_power"

    def __init__(self, p: float, mu: float):
        if not np.isfinite(p) or p < 2.0:
            raise DataError("regularized power growth requires p >= 2")
        if not np.isfinite(mu) or mu < 0.0:
            raise DataError("regularization parameter mu must be >= 0")
        self.p = float(p)
        self.mu = float(mu)
        if self.mu == 0.0 or self.p == 2.0:
            self.ig = 1.0 if self.p == 2.0 else self.p - 1.0
        else:
            self.ig = 1.0
        self.sg = self.p - 1.0

    def g(self, t):
        arr = _checked(t)
        return _like((self.mu + arr**2) ** ((self.p - 2.0) / 2.0) * arr, t)

    def dg(self, t):
        arr = _checked(t)
        q = self.mu + arr**2
        if self.p == 2.0:
            return _like(np.ones_like(arr), t)
        return _like(q ** ((self.p - 4.0) / 2.0) * (self.mu + (self.p - 1.0) * arr**2), t)

    @property
    def kernel0(self) -> float:
        if self.p == 2.0:
            return 1.0
        return self.mu ** ((self.p - 2.0) / 2.0)

    def G(self, t):
        arr = _checked(t)
        if self.mu == 0.0:
            return _like(arr**self.p / self.p, t)
        # mu^(p/2) [ (1 + t^2/mu)^(p/2) - 1 ] / p without cancellation
        mp = self.mu ** (self.p / 2.0)
        val = mp * np.expm1((self.p / 2.0) * np.log1p(arr**2 / self.mu)) / self.p
        return _like(val, t)

    def G_inverse(self, s):
        arr = _checked(s, "s")
        if self.mu == 0.0:
            return _like((self.p * arr) ** (1.0 / self.p), s)
        # (mu + t^2)^(p/2) = p s + mu^(p/2); expm1/log1p guard the small-s
        # cancellation in (..)^(2/p) - mu.
        mp = self.mu ** (self.p / 2.0)
        x = self.p * arr / mp
        t2 = self.mu * np.expm1((2.0 / self.p) * np.log1p(x))
        return _like(np.sqrt(np.maximum(t2, 0.0)), s)

    def __repr__(self):
        return f"RegularizedPowerGrowth(p={self.p}, mu={self.mu})"


class TabulatedGrowth(GrowthFunction):
    """Growth function given by samples (t_i, g(t_i)) with t_i increasing.

    Inside the table, g is the monotone cubic (PCHIP) interpolant and G its
    exact antiderivative; outside, both continue by the power law fitted to
    the edge pair of nodes.  Tables whose estimated lower index falls below
    1 are rejected unless ``allow_sublinear`` is set, in which case a
    warning is issued instead.
    """

    kind = "tabulated"

    def __init__(self, nodes, values, allow_sublinear: bool = False):
        nodes = np.asarray(nodes, dtype=float)
        values = np.asarray(values, dtype=float)
        if nodes.ndim != 1 or nodes.shape != values.shape:
            raise DataError("nodes and values must be 1-d arrays of equal length")
        if nodes.size < 3:
            raise InsufficientDataError("tabulated growth needs at least 3 nodes")
        if np.any(nodes <= 0) or np.any(np.diff(nodes) <= 0):
            raise DataError("nodes must be strictly increasing and positive")
        if np.any(values <= 0) or np.any(np.diff(values) <= 0):
            raise DataError("g samples must be strictly increasing and positive")
        self.nodes = nodes
        self.values = values
        self._interp = PchipInterpolator(nodes, values)
        self._dinterp = self._interp.derivative()
        self._anti = self._interp.antiderivative()
        self._e_lo = float(
            np.log(values[1] / values[0]) / np.log(nodes[1] / nodes[0])
        )
        self._e_hi = float(
            np.log(values[-1] / values[-2]) / np.log(nodes[-1] / nodes[-2])
        )
        t = np.geomspace(nodes[0], nodes[-1], 4096)
        ratio = t * self._dinterp(t) / self._interp(t)
        self.ig = float(min(ratio.min(), self._e_lo, self._e_hi))
        self.sg = float(max(ratio.max(), self._e_lo, self._e_hi))
        if self.ig < 1.0 - 1e-9:
            if allow_sublinear:
                warnings.warn(
                    f"tabulated growth has lower index {self.ig:.4f} < 1",
                    stacklevel=2,
                )
            else:
                raise DataError(
                    f"tabulated growth has lower index {self.ig:.4f} < 1; "
                    "pass allow_sublinear=True to accept it anyway"
                )
        # cumulative integral below the first node, by the edge power law
        self._G0 = values[0] * nodes[0] / (self._e_lo + 1.0)
        self._GN = self._G0 + float(self._anti(nodes[-1]) - self._anti(nodes[0]))

    def g(self, t):
        arr = _checked(t)
        out = np.empty_like(arr)
        t0, tN = self.nodes[0], self.nodes[-1]
        below = arr < t0
        above = arr > tN
        mid = ~below & ~above
        out[mid] = self._interp(arr[mid])
        out[below] = self.values[0] * (arr[below] / t0) ** self._e_lo
        out[above] = self.values[-1] * (arr[above] / tN) ** self._e_hi
        return _like(out, t)

    def dg(self, t):
        arr = _checked(t)
        out = np.empty_like(arr)
        t0, tN = self.nodes[0], self.nodes[-1]
        below = arr < t0
        above = arr > tN
        mid = ~below & ~above
        out[mid] = self._dinterp(arr[mid])
        with np.errstate(divide="ignore"):
            out[below] = (
                self._e_lo
                * self.values[0]
                * (arr[below] / t0) ** (self._e_lo - 1.0)
                / t0
            )
        out[above] = (
            self._e_hi * self.values[-1] * (arr[above] / tN) ** (self._e_hi - 1.0) / tN
        )
        return _like(out, t)

    @property
    def kernel0(self) -> float:
        if self._e_lo > 1.0 + 1e-12:
            return 0.0
        return float(self.values[0] / self.nodes[0])

    def G(self, t):
        arr = _checked(t)
        out = np.empty_like(arr)
        t0, tN = self.nodes[0], self.nodes[-1]
        below = arr < t0
        above = arr > tN
        mid = ~below & ~above
        out[below] = self._G0 * (arr[below] / t0) ** (self._e_lo + 1.0)
        out[mid] = self._G0 + (self._anti(arr[mid]) - self._anti(t0))
        out[above] = self._GN + (
            self.values[-1]
            * tN
            / (self._e_hi + 1.0)
            * ((arr[above] / tN) ** (self._e_hi + 1.0) - 1.0)
        )
        return _like(out, t)

    def G_inverse(self, s):
        arr = _checked(s, "s")
        t_lo, t_hi = self.nodes[0] * 1e-6, self.nodes[-1] * 1e6
        if np.any(arr > self.G(t_hi)) or np.any((arr > 0) & (arr < self.G(t_lo))):
            raise RangeError("value outside the invertible range of the table")
        out = np.zeros_like(arr)
        pos = arr > 0
        if np.any(pos):
            out[pos] = _bisect_increasing(self.G, arr[pos], t_lo, t_hi)
        return _like(out, s)

    def _index_sample_range(self):
        return float(self.nodes[0]), float(self.nodes[-1])

    def __repr__(self):
        return f"TabulatedGrowth({self.nodes.size} nodes)"

    @classmethod
    def from_file(cls, path, allow_sublinear: bool = False) -> "TabulatedGrowth":
        """Load a two-column text file of (t, g(t)) samples."""
        data = np.loadtxt(path, dtype=float)
        if data.ndim != 2 or data.shape[1] != 2:
            raise DataError("expected a two-column (t, g) table")
        return cls(data[:, 0], data[:, 1], allow_sublinear=allow_sublinear)


def _bisect_increasing(fn, s, lo, hi, iters=80):
    llo = np.full_like(s, np.log(lo))
    lhi = np.full_like(s, np.log(hi))
    for _ in range(iters):
        mid = 0.5 * (llo + lhi)
        too_low = fn(np.exp(mid)) < s
        llo = np.where(too_low, mid, llo)
        lhi = np.where(too_low, lhi, mid)
    return np.exp(0.5 * (llo + lhi))


class OrliczG:
    """Convex envelope G of a growth function, with inverse and conjugate.

    Power-type kinds evaluate by closed form; the tabulated kind carries a
    monotone interpolation table (``cache_nodes`` points over
    ``cache_range``) built eagerly at construction.  Instances are
    immutable and safe to share across threads.
    """

    def __init__(self, growth: GrowthFunction, cache_nodes: int = 2048,
                 cache_range=(1e-12, 1e12)):
        self.growth = growth
        self.cache_nodes = int(cache_nodes)
        self.cache_range = (float(cache_range[0]), float(cache_range[1]))
        if growth.kind == "tabulated":
            lo = max(self.cache_range[0], growth.nodes[0] * 1e-6)
            hi = min(self.cache_range[1], growth.nodes[-1] * 1e6)
            self._cache_t = np.geomspace(lo, hi, self.cache_nodes)
            self._cache_G = growth.G(self._cache_t)
        else:
            self._cache_t = None
            self._cache_G = None

    @property
    def ig(self) -> float:
        return self.growth.ig

    @property
    def sg(self) -> float:
        return self.growth.sg

    def G(self, t):
        return self.growth.G(t)

    def G_inverse(self, s):
        return self.growth.G_inverse(s)

    def conjugate(self, s):
        """Young conjugate G*(s) = s g^{-1}(s) - G(g^{-1}(s)).

        First-order optimality of the Legendre transform; valid because G
        is differentiable and strictly convex, so the sup over t is
        attained where g(t) = s.
        """
        arr = _checked(s, "s")
        out = np.zeros_like(arr)
        pos = arr > 0
        if np.any(pos):
            t = self.growth.g_inverse(arr[pos])
            out[pos] = arr[pos] * t - self.growth.G(t)
        return _like(np.maximum(out, 0.0), s)

    def S(self, t, n: int):
        """Sobolev companion S(t) = G(t) (G(t)/t)^(-1/n) for t > 0."""
        if n < 2:
            raise DomainError("dimension must be at least 2")
        arr = _checked(t)
        if np.any(arr <= 0):
            raise DomainError("S is defined for t > 0 only")
        Gt = self.growth.G(arr)
        return _like(Gt * (Gt / arr) ** (-1.0 / n), t)

    def S_inverse(self, s, n: int):
        """Invert the strictly increasing map t -> S(t, n) by bisection."""
        arr = _checked(s, "s")
        out = np.zeros_like(arr)
        pos = arr > 0
        if np.any(pos):
            out[pos] = _bisect_increasing(
                lambda t: self.S(t, n), arr[pos], 1e-14, 1e14
            )
        return _like(out, s)


def make_growth(kind: str, **params) -> GrowthFunction:
    """Factory used by config loading: kind name plus parameters."""
    kind = kind.strip().lower()
    if kind == "power":
        return PowerGrowth(params["p"])
    if kind == "regularized_power":
        return RegularizedPowerGrowth(params["p"], params.get("mu", 0.0))
    if kind == "tabulated":
        if "file" in params:
            return TabulatedGrowth.from_file(
                params["file"], allow_sublinear=params.get("allow_sublinear", False)
            )
        return TabulatedGrowth(
            params["nodes"], params["values"],
            allow_sublinear=params.get("allow_sublinear", False),
        )
    raise DataError(f"unknown growth kind {kind!r}")


# Thin operation-level wrappers; the classes above carry the state.

def eval_g(gf: GrowthFunction, t):
    return gf.g(t)


def eval_G(og: OrliczG, t):
    return og.G(t)


def inverse_G(og: OrliczG, s):
    return og.G_inverse(s)


def young_conjugate(og: OrliczG, s):
    return og.conjugate(s)


def sobolev_S(og: OrliczG, t, n: int):
    return og.S(t, n)


def estimate_indices(gf: GrowthFunction, samples: int = 4096):
    """Sampled (inf, sup) of the elasticity t g'(t)/g(t) on a log grid."""
    if samples < 16:
        raise InsufficientDataError("need at least 16 samples to estimate indices")
    lo, hi = gf._index_sample_range()
    t = np.geomspace(lo, hi, samples)
    ratio = t * gf.dg(t) / gf.g(t)
    return float(ratio.min()), float(ratio.max())
