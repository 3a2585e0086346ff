"""Action functions, quanta of action and Bohr-Sommerfeld levels.

The quantization condition solved here is the integer form
``I(E_n) = n h`` with ``h = 2 pi hbar`` and no half-integer offset, so the
harmonic oscillator levels come out as ``n hbar omega`` rather than the
textbook ``(n + 1/2) hbar omega``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.interpolate import CubicSpline

from .errors import DomainError, NumericError
from .numerics import find_root_bracketed, integrate_1d

# --- potentials -----------------------------------------------------------


@dataclass(frozen=True)
class Harmonic:
    omega: float

    def __post_init__(self):
        if not self.omega > 0:
            raise DomainError("harmonic omega must be positive")


@dataclass(frozen=True)
class Box:
    """Infinite square well on ``[0, length]``."""

    length: float

    def __post_init__(self):
        if not self.length > 0:
            raise DomainError("box length must be positive")


@dataclass(frozen=True)
class Polynomial:
    """``V(x) = sum_k coefficients[k] * x**k`` (ascending powers)."""

    coefficients: Tuple[float, ...]

    def __post_init__(self):
        c = tuple(float(v) for v in self.coefficients)
        if not c:
            raise DomainError("polynomial potential needs coefficients")
        object.__setattr__(self, "coefficients", c)


@dataclass(frozen=True)
class Tabulated:
    """Potential given on samples, interpolated by a natural cubic spline."""

    x: Tuple[float, ...]
    V: Tuple[float, ...]

    def __post_init__(self):
        x = tuple(float(v) for v in self.x)
        V = tuple(float(v) for v in self.V)
        if len(x) != len(V) or len(x) < 4:
            raise DomainError("tabulated potential needs >= 4 matching (x, V) samples")
        if np.any(np.diff(x) <= 0):
            raise DomainError("tabulated x must be strictly increasing")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "V", V)


Potential = Union[Harmonic, Box, Polynomial, Tabulated]


@dataclass(frozen=True)
class HamiltonianSpec:
    """Time-independent ``H = p^2 / 2m + V(x)``."""

    mass: float
    potential: Potential
    hbar: float = 1.0
    _spline: Optional[CubicSpline] = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        if not self.mass > 0:
            raise DomainError("mass must be positive")
        if not self.hbar > 0:
            raise DomainError("hbar must be positive")
        if isinstance(self.potential, Tabulated):
            spline = CubicSpline(self.potential.x, self.potential.V, bc_type="natural")
            object.__setattr__(self, "_spline", spline)

    @property
    def h(self) -> float:
        return 2.0 * math.pi * self.hbar

    def V(self, x):
        pot = self.potential
        x = np.asarray(x, dtype=float)
        if isinstance(pot, Harmonic):
            return 0.5 * self.mass * pot.omega**2 * x**2
        if isinstance(pot, Box):
            inside = (x >= 0.0) & (x <= pot.length)
            return np.where(inside, 0.0, np.inf)
        if isinstance(pot, Polynomial):
            return P.polyval(x, pot.coefficients)
        return self._spline(x)

    def dV(self, x):
        """Analytic dV/dx (zero inside the box, spline derivative for tables)."""
        pot = self.potential
        x = np.asarray(x, dtype=float)
        if isinstance(pot, Harmonic):
            return self.mass * pot.omega**2 * x
        if isinstance(pot, Box):
            return np.zeros_like(x)
        if isinstance(pot, Polynomial):
            return P.polyval(x, P.polyder(pot.coefficients))
        return self._spline(x, 1)

    def energy(self, q, p):
        return np.asarray(p) ** 2 / (2.0 * self.mass) + self.V(q)

    def dH_dq(self, q, p):
        return self.dV(q) + 0.0 * np.asarray(p)

    def dH_dp(self, q, p):
        return np.asarray(p) / self.mass + 0.0 * np.asarray(q)

    def to_dict(self) -> dict:
        pot = self.potential
        if isinstance(pot, Harmonic):
            pd = {"kind": "harmonic", "omega": pot.omega}
        elif isinstance(pot, Box):
            pd = {"kind": "box", "length": pot.length}
        elif isinstance(pot, Polynomial):
            pd = {"kind": "polynomial", "coefficients": list(pot.coefficients)}
        else:
            pd = {"kind": "tabulated", "x": list(pot.x), "V": list(pot.V)}
        return {"mass": self.mass, "hbar": self.hbar, "potential": pd}

    @classmethod
    def from_dict(cls, data: dict) -> "HamiltonianSpec":
        pd = dict(data["potential"])
        kind = pd.pop("kind")
        makers = {"harmonic": Harmonic, "box": Box, "polynomial": Polynomial, "tabulated": Tabulated}
        if kind not in makers:
            raise DomainError(f"unknown potential kind {kind!r}")
        try:
            pot = makers[kind](**pd)
        except TypeError as exc:
            raise DomainError(f"bad parameters for {kind} potential: {exc}") from None
        return cls(mass=float(data.get("mass", 1.0)), potential=pot, hbar=float(data.get("hbar", 1.0)))


# --- paths and profiles ---------------------------------------------------


@dataclass(frozen=True)
class Trajectory:
    """Phase-space path sampled at strictly increasing times."""

    t: np.ndarray
    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        t, q, p = (np.array(v, dtype=float) for v in (self.t, self.q, self.p))
        if not (t.ndim == q.ndim == p.ndim == 1) or not (len(t) == len(q) == len(p)):
            raise DomainError("trajectory arrays must be 1-D and of equal length")
        if len(t) < 2:
            raise DomainError("trajectory needs at least 2 samples")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
            raise DomainError("trajectory contains non-finite samples")
        if np.any(np.diff(t) <= 0):
            raise DomainError("trajectory times must be strictly increasing")
        for name, v in (("t", t), ("q", q), ("p", p)):
            v.flags.writeable = False
            object.__setattr__(self, name, v)

    @classmethod
    def from_samples(cls, samples: Sequence[Tuple[float, float, float]]) -> "Trajectory":
        arr = np.asarray(samples, dtype=float)
        return cls(arr[:, 0], arr[:, 1], arr[:, 2])


@dataclass(frozen=True)
class MomentumProfile:
    """p(x) on ``[x0, x1]``: either a callable or tabulated samples."""

    p_of_x: Optional[Callable[[np.ndarray], np.ndarray]] = None
    x: Optional[np.ndarray] = None
    p: Optional[np.ndarray] = None
    domain: Tuple[float, float] = (-math.inf, math.inf)

    def __post_init__(self):
        if (self.p_of_x is None) == (self.x is None):
            raise DomainError("give either p_of_x or tabulated (x, p)")
        if self.x is not None:
            x = np.array(self.x, dtype=float)
            p = np.array(self.p, dtype=float)
            if x.shape != p.shape or x.ndim != 1 or len(x) < 2:
                raise DomainError("tabulated profile needs matching 1-D x and p")
            if np.any(np.diff(x) <= 0):
                raise DomainError("tabulated x must be strictly increasing")
            object.__setattr__(self, "x", x)
            object.__setattr__(self, "p", p)
            object.__setattr__(self, "domain", (float(x[0]), float(x[-1])))

    @property
    def tabulated(self) -> bool:
        return self.x is not None

    def __call__(self, x):
        if self.tabulated:
            return np.interp(x, self.x, self.p)
        return np.asarray(self.p_of_x(np.asarray(x, dtype=float)), dtype=float) * np.ones_like(x, dtype=float)

    @classmethod
    def constant(cls, value: float) -> "MomentumProfile":
        return cls(p_of_x=lambda x: np.full_like(x, value, dtype=float))


SIMPSON_SAMPLES = 2049


def action_spatial(profile: MomentumProfile, x0: float, x1: float, samples: int = SIMPSON_SAMPLES) -> float:
    """Integral of p dx over ``[x0, x1]``.

    Callables use composite Simpson on ``samples`` points; tabulated profiles
    use the trapezoid rule over the table nodes inside the interval.
    """
    lo, hi = profile.domain
    if not x0 < x1:
        raise DomainError("action_spatial requires x0 < x1")
    if x0 < lo or x1 > hi:
        raise DomainError(f"interval [{x0}, {x1}] outside profile domain [{lo}, {hi}]")
    if profile.tabulated:
        inner = profile.x[(profile.x > x0) & (profile.x < x1)]
        xs = np.concatenate(([x0], inner, [x1]))
        return float(np.trapezoid(profile(xs), xs))
    xs = np.linspace(x0, x1, samples)
    return float(integrate_1d(profile(xs), (x1 - x0) / (samples - 1)))


def action_full(traj: Trajectory, H: HamiltonianSpec) -> float:
    """Integral of p dq minus integral of H dt along a sampled path.

    Both integrals use the trapezoid rule on the given samples.
    """
    dq = np.diff(traj.q)
    dt = np.diff(traj.t)
    p_mid = 0.5 * (traj.p[1:] + traj.p[:-1])
    energy = H.energy(traj.q, traj.p)
    e_mid = 0.5 * (energy[1:] + energy[:-1])
    return float(np.sum(p_mid * dq) - np.sum(e_mid * dt))


@dataclass(frozen=True)
class MeanValueDecomposition:
    delta_x: float
    p_bar: float
    xi: Optional[float]


SCAN_POINTS = 1024


def mean_value_decomposition(profile: MomentumProfile, x0: float, x1: float, tol: float = 1e-12) -> MeanValueDecomposition:
    """Split the spatial action into width times mean momentum.

    ``xi`` is a point where the profile equals its mean. It is the first sign
    change of ``p(x) - p_bar`` on a uniform scan, refined by bracketed search;
    for a constant profile every point qualifies and the midpoint is
    returned. ``xi`` is ``None`` when the scan finds no crossing.
    """
    S = action_spatial(profile, x0, x1)
    delta_x = x1 - x0
    p_bar = S / delta_x
    xs = np.linspace(x0, x1, SCAN_POINTS)
    g = profile(xs) - p_bar
    scale = max(1.0, abs(p_bar), float(np.max(np.abs(profile(xs)))))
    if np.max(np.abs(g)) <= 64 * np.finfo(float).eps * scale:
        return MeanValueDecomposition(delta_x, p_bar, 0.5 * (x0 + x1))
    hit = np.flatnonzero(g == 0.0)
    if hit.size:
        return MeanValueDecomposition(delta_x, p_bar, float(xs[hit[0]]))
    change = np.flatnonzero(np.sign(g[:-1]) * np.sign(g[1:]) < 0)
    if not change.size:
        return MeanValueDecomposition(delta_x, p_bar, None)
    i = change[0]
    xi = find_root_bracketed(lambda x: float(profile(x)) - p_bar, xs[i], xs[i + 1], tol)
    return MeanValueDecomposition(delta_x, p_bar, float(xi))


# --- Bohr-Sommerfeld ------------------------------------------------------


@dataclass(frozen=True)
class Level:
    n: int
    energy: float
    action: float
    residual: float


@dataclass(frozen=True)
class QuantizationResult:
    levels: List[Level]
    convention: str = "I(E_n) = n*h, n = 1, 2, ...; integer multiples of h, no half-integer (Maslov) offset"

    @property
    def energies(self) -> np.ndarray:
        return np.array([lv.energy for lv in self.levels])


QUAD_NODES = 256
_GL_CACHE: dict = {}


def _gauss_legendre(n: int):
    if n not in _GL_CACHE:
        _GL_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _GL_CACHE[n]


def _well_minimum(H: HamiltonianSpec) -> Tuple[float, float]:
    pot = H.potential
    if isinstance(pot, Harmonic):
        return 0.0, 0.0
    if isinstance(pot, Box):
        return 0.5 * pot.length, 0.0
    if isinstance(pot, Polynomial):
        c = pot.coefficients
        if len(c) < 3 or (len(c) - 1) % 2 == 1 or c[-1] <= 0:
            raise DomainError("polynomial potential is not confining (needs even degree >= 2 with positive leading coefficient)")
        crit = P.polyroots(P.polyder(c))
        crit = crit[np.abs(crit.imag) < 1e-12].real
        vals = P.polyval(crit, c)
        i = int(np.argmin(vals))
        return float(crit[i]), float(vals[i])
    xs = np.linspace(pot.x[0], pot.x[-1], 4097)
    vals = H.V(xs)
    i = int(np.argmin(vals))
    return float(xs[i]), float(vals[i])


def turning_points(H: HamiltonianSpec, energy: float) -> Tuple[float, float]:
    """Classical turning points a < b around the well minimum."""
    pot = H.potential
    if isinstance(pot, Box):
        if energy <= 0:
            raise DomainError("box energy must be positive")
        return 0.0, pot.length
    x_min, v_min = _well_minimum(H)
    if energy <= v_min:
        raise DomainError(f"energy {energy} is at or below the well minimum {v_min}")
    g = lambda x: energy - float(H.V(x))
    tol = 4 * np.finfo(float).eps * max(1.0, abs(energy))
    ends = []
    for direction in (-1.0, 1.0):
        if isinstance(pot, Tabulated):
            edge = pot.x[0] if direction < 0 else pot.x[-1]
            if g(edge) > 0:
                raise DomainError("energy exceeds the tabulated potential at the table edge; no turning point")
            far = edge
        else:
            step = 1.0
            far = x_min + direction * step
            for _ in range(200):
                if g(far) < 0:
                    break
                step *= 2.0
                far = x_min + direction * step
            else:
                raise DomainError("no turning point found; potential not confining")
        ends.append(find_root_bracketed(g, min(x_min, far), max(x_min, far), tol))
    return ends[0], ends[1]


def closed_orbit_action(H: HamiltonianSpec, energy: float, nodes: int = QUAD_NODES) -> float:
    """``I(E) = 2 * integral_a^b sqrt(2m (E - V)) dx``.

    The substitution ``x = a + (b - a) sin^2 theta`` removes the square-root
    endpoint behaviour, after which Gauss-Legendre quadrature in theta
    converges spectrally.
    """
    a, b = turning_points(H, energy)
    u, w = _gauss_legendre(nodes)
    theta = 0.25 * np.pi * (u + 1.0)
    s, c = np.sin(theta), np.cos(theta)
    x = a + (b - a) * s**2
    if isinstance(H.potential, Box):
        kin = np.full_like(x, energy)
    else:
        kin = np.maximum(energy - H.V(x), 0.0)
    integrand = np.sqrt(2.0 * H.mass * kin) * 2.0 * (b - a) * s * c
    return float(2.0 * 0.25 * np.pi * np.sum(w * integrand))


def bohr_sommerfeld_levels(H: HamiltonianSpec, n_max: int, rel_tol: float = 1e-10) -> QuantizationResult:
    """Solve ``I(E_n) = n h`` for ``n = 1 .. n_max``."""
    if int(n_max) != n_max or n_max < 1:
        raise DomainError("n_max must be a positive integer")
    _, v_min = _well_minimum(H)
    h = H.h
    levels = []
    lo = v_min
    for n in range(1, int(n_max) + 1):
        target = n * h
        f = lambda E: closed_orbit_action(H, E) - target
        gap = h
        hi = lo + gap
        for _ in range(200):
            if f(hi) > 0:
                break
            gap *= 2.0
            hi = lo + gap
        else:
            raise NumericError(f"could not bracket level n={n}")
        # below the well minimum there is no orbit; treat I(E) as 0 there
        E = find_root_bracketed(lambda E: f(E) if E > v_min else -target, lo, hi, tol=1e-3 * rel_tol * target)
        action = closed_orbit_action(H, E)
        residual = abs(action - target)
        if residual > rel_tol * target:
            raise NumericError(f"level n={n}: residual {residual:.3e} exceeds {rel_tol:g} * n h")
        if levels and not E > levels[-1].energy:
            raise NumericError("action is not monotone in energy; levels out of order")
        levels.append(Level(n, float(E), action, residual))
        lo = E
    return QuantizationResult(levels)


# --- phase and temporal quanta -------------------------------------------


def phase_from_action(S, hbar: float = 1.0):
    """Phase S / hbar, pointwise. Accepts a RealField or an array."""
    from .numerics import RealField

    if isinstance(S, RealField):
        return RealField(S.grid, S.values / hbar)
    return np.asarray(S, dtype=float) / hbar


def temporal_quantum(
    E_of_t: Callable[[np.ndarray], np.ndarray],
    t0: float = 0.0,
    hbar: float = 1.0,
    t_max: Optional[float] = None,
    samples: int = 1025,
) -> float:
    """Smallest ``t > t0`` with ``integral_{t0}^{t} E dt' = h``.

    Raises:
        DomainError: the running integral stays below ``h`` up to ``t_max``
            (default ``t0 + 1e12``).
    """
    h = 2.0 * math.pi * hbar
    t_limit = t0 + 1e12 if t_max is None else t_max

    def running(t):
        if t <= t0:
            return 0.0
        ts = np.linspace(t0, t, samples)
        vals = np.asarray(E_of_t(ts), dtype=float) * np.ones_like(ts)
        return float(integrate_1d(vals, (t - t0) / (samples - 1)))

    lo, hi, step = t0, min(t0 + 1.0, t_limit), 1.0
    while running(hi) < h:
        if hi >= t_limit:
            raise DomainError(f"running integral of E never reaches h before t = {t_limit}")
        lo = hi
        step *= 2.0
        hi = min(t0 + step, t_limit)
    return find_root_bracketed(lambda t: running(t) - h, lo, hi, tol=1e-13 * h)
