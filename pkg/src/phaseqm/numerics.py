"""Grids, scalar fields, quadrature, finite differences and bracketed roots.

Everything here works on uniform rectangular grids. Reductions go through
``numpy.sum`` on contiguous data (pairwise summation) in a fixed order so
repeated runs produce bit-identical results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Union

import numpy as np

from .errors import DomainError, NumericError

MIN_COUNT = 9
BOUNDARY_LAYERS = 2
# |psi|^2 on the boundary layer must not exceed this fraction of max |psi|^2
BOUNDARY_DECAY = 1e-10

GRID_KINDS = {
    "xp": ("x", "p"),
    "tE": ("t", "E"),
    "phiL": ("phi", "L"),
}


@dataclass(frozen=True)
class Grid1D:
    """Uniform 1-D grid including both end points.

    A periodic axis still stores both ends; the last sample duplicates the
    first and stencils wrap over the ``count - 1`` distinct points.
    """

    lower: float
    upper: float
    count: int
    periodic: bool = False

    def __post_init__(self):
        if not (math.isfinite(self.lower) and math.isfinite(self.upper)):
            raise DomainError("grid bounds must be finite")
        if not self.lower < self.upper:
            raise DomainError(f"grid requires lower < upper, got [{self.lower}, {self.upper}]")
        if int(self.count) != self.count or self.count < MIN_COUNT:
            raise DomainError(f"grid count must be an integer >= {MIN_COUNT}, got {self.count}")
        object.__setattr__(self, "count", int(self.count))
        object.__setattr__(self, "lower", float(self.lower))
        object.__setattr__(self, "upper", float(self.upper))

    @property
    def spacing(self) -> float:
        return (self.upper - self.lower) / (self.count - 1)

    @property
    def points(self) -> np.ndarray:
        pts = self.lower + self.spacing * np.arange(self.count, dtype=float)
        pts[-1] = self.upper
        return pts

    @property
    def center(self) -> float:
        return 0.5 * (self.lower + self.upper)

    @property
    def half_width(self) -> float:
        return 0.5 * (self.upper - self.lower)

    def refined(self) -> "Grid1D":
        """Same interval with the spacing halved."""
        return Grid1D(self.lower, self.upper, 2 * self.count - 1, self.periodic)

    def to_dict(self) -> dict:
        return {
            "lower": self.lower,
            "upper": self.upper,
            "count": self.count,
            "periodic": self.periodic,
        }


@dataclass(frozen=True)
class PhaseGrid:
    """Rectangular grid over a coordinate axis and its conjugate axis.

    ``axis_a`` always carries the coordinate (x, t or phi) and ``axis_b`` the
    conjugate variable (p, E or L).
    """

    axis_a: Grid1D
    axis_b: Grid1D
    kind: str = "xp"

    def __post_init__(self):
        if self.kind not in GRID_KINDS:
            raise DomainError(f"unknown grid kind {self.kind!r}; expected one of {sorted(GRID_KINDS)}")
        if self.axis_b.periodic:
            raise DomainError("only the coordinate axis may be periodic")

    @property
    def labels(self) -> tuple:
        return GRID_KINDS[self.kind]

    @property
    def shape(self) -> tuple:
        return (self.axis_a.count, self.axis_b.count)

    def axis(self, which: str) -> Grid1D:
        return self.axis_a if which == "a" else self.axis_b

    def mesh(self) -> tuple:
        """Coordinate arrays (A, B) of shape ``self.shape``."""
        return np.meshgrid(self.axis_a.points, self.axis_b.points, indexing="ij")

    def coordinate(self, which: str) -> np.ndarray:
        a, b = self.mesh()
        return a if which == "a" else b

    def to_dict(self) -> dict:
        return {"kind": self.kind, "axis_a": self.axis_a.to_dict(), "axis_b": self.axis_b.to_dict()}

    @classmethod
    def from_dict(cls, data: dict) -> "PhaseGrid":
        return cls(Grid1D(**data["axis_a"]), Grid1D(**data["axis_b"]), data.get("kind", "xp"))


def _check_values(grid: PhaseGrid, values: np.ndarray) -> None:
    if values.shape != grid.shape:
        raise DomainError(f"field shape {values.shape} does not match grid {grid.shape}")
    if not np.all(np.isfinite(values)):
        raise DomainError("field contains non-finite entries")


@dataclass(frozen=True)
class RealField:
    grid: PhaseGrid
    values: np.ndarray
    mask: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        _check_values(self.grid, values)
        values.flags.writeable = False
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class ComplexField:
    grid: PhaseGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=complex)
        _check_values(self.grid, values)
        values.flags.writeable = False
        object.__setattr__(self, "values", values)


Field = Union[RealField, ComplexField]


# --- quadrature -----------------------------------------------------------


@lru_cache(maxsize=64)
def _simpson_coefficients(count: int) -> np.ndarray:
    # integer weights in units of h/6, so the spacing is applied once at the end
    # (a constant on a dyadic grid then integrates exactly)
    w = np.zeros(count)
    # largest odd prefix gets Simpson, a left-over panel gets the trapezoid rule
    m = count if count % 2 == 1 else count - 1
    w[0:m:2] = 4.0
    w[1:m:2] = 8.0
    w[0] = w[m - 1] = 2.0
    if m < count:
        w[m - 1] += 3.0
        w[m] += 3.0
    w.flags.writeable = False
    return w


def simpson_weights(count: int, spacing: float) -> np.ndarray:
    """Composite Simpson weights; an even count adds one trapezoid panel."""
    if count < 3:
        raise DomainError("Simpson quadrature needs at least 3 samples")
    return _simpson_coefficients(int(count)) * (float(spacing) / 6.0)


def integrate_1d(values: np.ndarray, spacing: float) -> float:
    values = np.asarray(values)
    if values.shape[0] < 3:
        raise DomainError("Simpson quadrature needs at least 3 samples")
    return np.sum(values * _simpson_coefficients(values.shape[0])) * spacing / 6.0


def integrate_array(grid: PhaseGrid, values: np.ndarray):
    """Simpson double integral of a raw array sampled on ``grid``."""
    if grid.axis_a.count < MIN_COUNT or grid.axis_b.count < MIN_COUNT:
        raise DomainError("degenerate grid")
    wa = _simpson_coefficients(grid.axis_a.count)
    wb = _simpson_coefficients(grid.axis_b.count)
    rows = np.sum(np.ascontiguousarray(values) * wb[None, :], axis=1)
    return np.sum(rows * wa) * (grid.axis_a.spacing * grid.axis_b.spacing) / 36.0


def integrate_2d(f: Field):
    """Composite Simpson approximation of the double integral of ``f``.

    Returns a float for real fields and a complex number for complex ones.
    """
    value = integrate_array(f.grid, f.values)
    if isinstance(f, ComplexField):
        return complex(value)
    return float(value)


# --- finite differences ---------------------------------------------------


@lru_cache(maxsize=None)
def fd_weights(offsets: tuple, order: int) -> np.ndarray:
    """Finite-difference weights at 0 for the given integer offsets.

    Fornberg's recursion (Math. Comp. 51, 1988), evaluated at z = 0.
    """
    x = [float(o) for o in offsets]
    n = len(x)
    c = np.zeros((n, order + 1))
    c1, c4 = 1.0, x[0]
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, order)
        c2, c5 = 1.0, c4
        c4 = x[i]
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    out = c[:, order].copy()
    out.flags.writeable = False
    return out


_CENTRAL = (-2, -1, 0, 1, 2)
# one-sided stencils for the two boundary layers, keyed by derivative order
_LEFT = {
    1: ((0, 1, 2, 3, 4), (-1, 0, 1, 2, 3)),
    2: ((0, 1, 2, 3, 4, 5), (-1, 0, 1, 2, 3, 4)),
}


def diff_array(values: np.ndarray, axis: int, spacing: float, order: int = 1, periodic: bool = False) -> np.ndarray:
    """Fourth-order accurate derivative of a raw array along ``axis``."""
    if order not in (1, 2):
        raise DomainError("derivative order must be 1 or 2")
    f = np.moveaxis(np.asarray(values), axis, 0)
    n = f.shape[0]
    if n < MIN_COUNT:
        raise DomainError(f"need at least {MIN_COUNT} points to differentiate, got {n}")
    scale = spacing**order
    wc = fd_weights(_CENTRAL, order)
    out = np.empty_like(f)
    if periodic:
        g = f[:-1]
        acc = np.zeros_like(g)
        for off, w in zip(_CENTRAL, wc):
            if w != 0.0:
                acc = acc + w * np.roll(g, -off, axis=0)
        out[:-1] = acc / scale
        out[-1] = out[0]
    else:
        acc = np.zeros_like(f[2:-2])
        for off, w in zip(_CENTRAL, wc):
            if w != 0.0:
                acc = acc + w * f[2 + off : n - 2 + off]
        out[2:-2] = acc / scale
        for i, offsets in enumerate(_LEFT[order]):
            w = fd_weights(offsets, order)
            left = sum(wk * f[i + o] for wk, o in zip(w, offsets))
            out[i] = left / scale
            # mirrored stencil: offsets negate, odd orders flip sign
            sign = -1.0 if order % 2 else 1.0
            right = sum(wk * f[n - 1 - i - o] for wk, o in zip(w, offsets))
            out[n - 1 - i] = sign * right / scale
    return np.moveaxis(out, 0, axis)


def partial_derivative(f: Field, axis: str, order: int = 1) -> Field:
    """Derivative of a field along axis ``'a'`` or ``'b'`` (4th order)."""
    if axis not in ("a", "b"):
        raise DomainError("axis must be 'a' or 'b'")
    g = f.grid.axis(axis)
    idx = 0 if axis == "a" else 1
    d = diff_array(f.values, idx, g.spacing, order, g.periodic)
    return type(f)(f.grid, d)


def truncation_estimate(values: np.ndarray, axis: int, spacing: float, order: int = 1) -> float:
    """Leading truncation-error estimate of ``diff_array`` in the interior.

    Uses the (4 + order)-th undivided difference as a proxy for the
    corresponding derivative in the h^4/30 (first) or h^4/90 (second)
    error term.
    """
    f = np.moveaxis(np.asarray(values), axis, 0)
    k = 4 + order
    if f.shape[0] <= k:
        return float("nan")
    dk = np.abs(np.diff(f, n=k, axis=0)).max()
    coef = 1.0 / 30.0 if order == 1 else 1.0 / 90.0
    return float(coef * dk / spacing**order)


# --- boundary handling ----------------------------------------------------


def boundary_layer_mask(grid: PhaseGrid, axes: str = "ab", layers: int = BOUNDARY_LAYERS) -> np.ndarray:
    """Boolean mask of the outer ``layers`` rows/columns along ``axes``."""
    mask = np.zeros(grid.shape, dtype=bool)
    if "a" in axes:
        mask[:layers, :] = True
        mask[-layers:, :] = True
    if "b" in axes:
        mask[:, :layers] = True
        mask[:, -layers:] = True
    return mask


def boundary_decay_ratio(grid: PhaseGrid, density: np.ndarray, axes: str = "ab") -> float:
    """max of ``density`` on the boundary layers relative to its global max."""
    peak = float(np.max(density))
    if peak <= 0.0:
        return float("inf")
    return float(np.max(density[boundary_layer_mask(grid, axes)]) / peak)


# --- root finding ---------------------------------------------------------


def find_root_bracketed(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    tol: float = 1e-12,
    maxiter: int = 200,
) -> float:
    """Root of ``f`` inside ``[lo, hi]`` by bisection with secant steps.

    Stops once ``|f(x)| <= tol`` or the bracket is narrower than
    ``tol * max(1, |x|)``. A secant (Illinois-weighted) step is taken when it
    lands strictly inside the bracket and shrinks it fast enough; otherwise
    the step is a plain bisection.

    Raises:
        DomainError: ``f(lo)`` and ``f(hi)`` have the same sign.
        NumericError: no convergence within ``maxiter`` iterations.
    """
    a, b = float(lo), float(hi)
    if a > b:
        a, b = b, a
    fa, fb = f(a), f(b)
    if not (math.isfinite(fa) and math.isfinite(fb)):
        raise DomainError("function is not finite at the bracket ends")
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if fa * fb > 0.0:
        raise DomainError(f"root not bracketed: f({a})={fa}, f({b})={fb}")

    side = 0
    width = b - a
    for _ in range(maxiter):
        x = (a * fb - b * fa) / (fb - fa)
        if not (a < x < b):
            x = 0.5 * (a + b)
        fx = f(x)
        if abs(fx) <= tol:
            return x
        if fx * fa < 0.0:
            b, fb = x, fx
            if side == -1:
                fa *= 0.5
            side = -1
        else:
            a, fa = x, fx
            if side == 1:
                fb *= 0.5
            side = 1
        if b - a <= tol * max(1.0, abs(x)):
            return 0.5 * (a + b)
        # force a bisection when the bracket fails to halve
        if b - a > 0.5 * width:
            m = 0.5 * (a + b)
            fm = f(m)
            if abs(fm) <= tol:
                return m
            if fm * fa < 0.0:
                b, fb = m, fm
            else:
                a, fa = m, fm
            side = 0
        width = b - a
    raise NumericError(f"root search did not converge in {maxiter} iterations (bracket [{a}, {b}])")
