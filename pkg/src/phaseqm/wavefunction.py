"""Phase-space wave functions stored as amplitude and action fields.

A state is ``psi = phi * exp(i S / hbar)`` with a real, non-negative
amplitude ``phi`` and a real action ``S``. Keeping the two factors apart
means the fast phase never has to be unwrapped or differentiated through.
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Tuple

import numpy as np

from .errors import DomainError
from .numerics import (
    BOUNDARY_DECAY,
    PhaseGrid,
    RealField,
    boundary_decay_ratio,
    integrate_array,
)

NORM_TOL = 1e-8


@dataclass(frozen=True)
class TimeSlice:
    t: float
    amplitude: np.ndarray
    action: np.ndarray


@dataclass(frozen=True)
class PhaseWaveFunction:
    """``phi * exp(i S / hbar)`` sampled on a :class:`PhaseGrid`.

    On an ``'xp'`` grid the axes are (x, p); on ``'tE'`` they are (t, E) and
    on ``'phiL'`` (angle, angular momentum). ``time_slices`` holds an odd
    number (>= 5) of uniformly spaced snapshots around ``t``; the middle one
    coincides with ``amplitude``/``action``.
    """

    grid: PhaseGrid
    amplitude: RealField
    action: RealField
    hbar: float = 1.0
    t: float = 0.0
    time_slices: Tuple[TimeSlice, ...] = ()
    provenance: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.hbar > 0:
            raise DomainError("hbar must be positive")
        if self.amplitude.grid != self.grid or self.action.grid != self.grid:
            raise DomainError("amplitude and action must live on the wave function's grid")
        if np.any(self.amplitude.values < 0):
            raise DomainError("amplitude must be non-negative")
        if self.time_slices:
            n = len(self.time_slices)
            if n < 5 or n % 2 == 0:
                raise DomainError("time slices must be an odd count >= 5")
            times = np.array([s.t for s in self.time_slices])
            steps = np.diff(times)
            if np.any(steps <= 0) or np.ptp(steps) > 1e-9 * abs(steps[0]):
                raise DomainError("time slices must be uniformly spaced and increasing")
            for s in self.time_slices:
                if s.amplitude.shape != self.grid.shape or s.action.shape != self.grid.shape:
                    raise DomainError("time slice shape does not match grid")

    @classmethod
    def from_arrays(cls, grid, amplitude, action, hbar=1.0, **kw) -> "PhaseWaveFunction":
        return cls(grid, RealField(grid, amplitude), RealField(grid, action), hbar, **kw)

    @property
    def values(self) -> np.ndarray:
        return self.amplitude.values * np.exp(1j * self.action.values / self.hbar)

    @property
    def density(self) -> np.ndarray:
        return self.amplitude.values**2

    @property
    def dt(self) -> Optional[float]:
        if not self.time_slices:
            return None
        return self.time_slices[1].t - self.time_slices[0].t

    def norm(self) -> float:
        return float(integrate_array(self.grid, self.density))


EnergyTimeWaveFunction = PhaseWaveFunction


def is_normalized(psi: PhaseWaveFunction, tol: float = NORM_TOL) -> bool:
    return abs(psi.norm() - 1.0) <= tol


def boundary_decay(psi: PhaseWaveFunction, axes: str = "ab") -> float:
    """Boundary-layer maximum of |psi|^2 relative to its global maximum."""
    return boundary_decay_ratio(psi.grid, psi.density, axes)


def boundary_decay_check(psi: PhaseWaveFunction, axes: str = "ab", threshold: float = BOUNDARY_DECAY) -> bool:
    return boundary_decay(psi, axes) <= threshold


def normalize(psi: PhaseWaveFunction) -> PhaseWaveFunction:
    """Rescale the amplitude (and every time slice) to unit norm."""
    n = psi.norm()
    if not n > 0:
        raise DomainError("cannot normalize a zero wave function")
    k = 1.0 / math.sqrt(n)
    slices = tuple(TimeSlice(s.t, s.amplitude * k, s.action) for s in psi.time_slices)
    return replace(psi, amplitude=RealField(psi.grid, psi.amplitude.values * k), time_slices=slices)


def _conjugate_action(grid: PhaseGrid, mass: Optional[float], t: float) -> np.ndarray:
    a, b = grid.mesh()
    if grid.kind == "tE":
        # S = -E t on an energy-time grid
        return -b * a
    S = a * b
    if mass is not None:
        S = S - b**2 / (2.0 * mass) * t
    return S


def _require_decay(psi: PhaseWaveFunction, what: str) -> None:
    ratio = boundary_decay(psi)
    if ratio > BOUNDARY_DECAY:
        raise DomainError(
            f"{what}: boundary |psi|^2 ratio {ratio:.3e} exceeds {BOUNDARY_DECAY:g}; enlarge the grid"
        )


def make_gaussian_packet(
    grid: PhaseGrid,
    center_x: float,
    center_p: float,
    sigma_x: float,
    sigma_p: float,
    hbar: float = 1.0,
    *,
    mass: Optional[float] = None,
    t: float = 0.0,
) -> PhaseWaveFunction:
    """Normalized Gaussian amplitude with the free-particle action.

    ``|psi|^2`` is a product of normal densities with standard deviations
    ``sigma_x`` and ``sigma_p`` along the two axes. The action is ``p x``
    (minus ``p^2 t / 2m`` when ``mass`` is given); on an energy-time grid it
    is ``-E t``.
    """
    if not (sigma_x > 0 and sigma_p > 0):
        raise DomainError("Gaussian widths must be positive")
    for g, c, s in ((grid.axis_a, center_x, sigma_x), (grid.axis_b, center_p, sigma_p)):
        if c - 6 * s < g.lower or c + 6 * s > g.upper:
            raise DomainError(f"grid [{g.lower}, {g.upper}] must span 6 sigma on each side of {c}")
    a, b = grid.mesh()
    amp = np.exp(-((a - center_x) ** 2) / (4 * sigma_x**2) - (b - center_p) ** 2 / (4 * sigma_p**2))
    psi = PhaseWaveFunction.from_arrays(
        grid,
        amp,
        _conjugate_action(grid, mass, t),
        hbar,
        t=t,
        provenance={
            "generator": "gaussian",
            "center_x": center_x,
            "center_p": center_p,
            "sigma_x": sigma_x,
            "sigma_p": sigma_p,
        },
    )
    psi = normalize(psi)
    _require_decay(psi, "gaussian packet")
    return psi


TAPER = 0.15


def _raised_cosine(u: np.ndarray, flat: float) -> np.ndarray:
    r = np.abs(u)
    out = np.where(r <= flat, 1.0, 0.0)
    ramp = (r > flat) & (r < flat + TAPER)
    out[ramp] = 0.5 * (1.0 + np.cos(np.pi * (r[ramp] - flat) / TAPER))
    return out


def make_free_particle(
    grid: PhaseGrid,
    p0: float,
    mass: float,
    t: float = 0.0,
    hbar: float = 1.0,
    envelope_width: float = 0.5,
) -> PhaseWaveFunction:
    """Free particle with action ``p x - p^2 t / 2m`` and a flat-top envelope.

    The amplitude is a product of raised-cosine windows: flat for
    ``|u| <= envelope_width`` and tapering to zero over a further 0.15, in
    units of the axis half-width. Along p the window is centred on ``p0``.
    """
    if grid.kind != "xp":
        raise DomainError("free particle needs an (x, p) grid")
    if not mass > 0:
        raise DomainError("mass must be positive")
    if not 0 < envelope_width < 1 - TAPER:
        raise DomainError(f"envelope_width must lie in (0, {1 - TAPER})")
    a, b = grid.mesh()
    u = (a - grid.axis_a.center) / grid.axis_a.half_width
    v = (b - p0) / grid.axis_b.half_width
    amp = _raised_cosine(u, envelope_width) * _raised_cosine(v, envelope_width)
    psi = PhaseWaveFunction.from_arrays(
        grid,
        amp,
        _conjugate_action(grid, mass, t),
        hbar,
        t=t,
        provenance={"generator": "free_particle", "p0": p0, "mass": mass, "t": t, "envelope_width": envelope_width},
    )
    if not np.any(amp > 0):
        raise DomainError("envelope does not overlap the grid")
    psi = normalize(psi)
    _require_decay(psi, "free particle")
    return psi


def plateau_mask(psi: PhaseWaveFunction, margin: int = 2) -> np.ndarray:
    """Points whose whole ``margin``-wide neighbourhood sits on the amplitude maximum."""
    amp = psi.amplitude.values
    flat = amp >= amp.max() * (1 - 1e-12)
    out = flat.copy()
    for shift in range(1, margin + 1):
        for axis in (0, 1):
            out &= np.roll(flat, shift, axis) & np.roll(flat, -shift, axis)
    out[:margin, :] = out[-margin:, :] = False
    out[:, :margin] = out[:, -margin:] = False
    return out


def time_sliced(
    builder: Callable[[float], PhaseWaveFunction],
    t: float,
    dt: float,
    n_slices: int = 5,
) -> PhaseWaveFunction:
    """State at ``t`` carrying ``n_slices`` snapshots ``builder(t + k dt)``."""
    if n_slices < 5 or n_slices % 2 == 0:
        raise DomainError("n_slices must be odd and >= 5")
    if not dt > 0:
        raise DomainError("dt must be positive")
    half = n_slices // 2
    states = [builder(t + k * dt) for k in range(-half, half + 1)]
    centre = states[half]
    slices = tuple(
        TimeSlice(t + k * dt, s.amplitude.values, s.action.values) for k, s in zip(range(-half, half + 1), states)
    )
    return replace(centre, t=t, time_slices=slices)


def sample_random_state(
    grid: PhaseGrid,
    seed: int,
    smoothness: float = 1.0,
    hbar: float = 1.0,
) -> PhaseWaveFunction:
    """Smooth random state, deterministic in ``seed``.

    Amplitude: the square of a signed sum of three Gaussian bumps, times a
    super-Gaussian window that kills it at the domain edges. Action: a few
    low-frequency cosine modes with a phase range of a few radians per unit
    of grid extent. Widths scale with ``smoothness``.
    """
    if not smoothness > 0:
        raise DomainError("smoothness must be positive")
    rng = np.random.default_rng(seed)
    a, b = grid.mesh()
    u = (a - grid.axis_a.center) / grid.axis_a.half_width
    v = (b - grid.axis_b.center) / grid.axis_b.half_width
    bumps = np.zeros(grid.shape)
    for _ in range(3):
        cu, cv = rng.uniform(-0.2, 0.2, size=2)
        su, sv = smoothness * rng.uniform(0.2, 0.35, size=2)
        c = rng.uniform(0.3, 1.0) * rng.choice((-1.0, 1.0))
        bumps += c * np.exp(-((u - cu) ** 2) / (2 * su**2) - (v - cv) ** 2 / (2 * sv**2))
    window = np.exp(-(u**4 + v**4) / (2 * 0.45**4))
    amp = bumps**2 * window

    scale = 3.0 * max(grid.axis_a.half_width, grid.axis_b.half_width)
    phase = np.zeros(grid.shape)
    for _ in range(4):
        m, l = rng.integers(0, 3, size=2)
        if m == 0 and l == 0:
            m = 1
        b_j = rng.uniform(-1.0, 1.0) * scale
        theta = rng.uniform(0, 2 * np.pi)
        phase += b_j * np.cos(0.5 * np.pi * (m * u + l * v) / smoothness + theta)
    psi = PhaseWaveFunction.from_arrays(
        grid,
        amp,
        hbar * phase,
        hbar,
        provenance={"generator": "random", "seed": int(seed), "smoothness": smoothness},
    )
    psi = normalize(psi)
    _require_decay(psi, "random state")
    return psi


# --- snapshot export ------------------------------------------------------


def write_csv(psi: PhaseWaveFunction, path) -> None:
    """Rows of (coordinate, conjugate, amplitude, action), row-major."""
    a, b = psi.grid.mesh()
    la, lb = psi.grid.labels
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([la, lb, "amplitude", "action"])
        for row in zip(a.ravel(), b.ravel(), psi.amplitude.values.ravel(), psi.action.values.ravel()):
            w.writerow([repr(float(x)) for x in row])


def write_binary(psi: PhaseWaveFunction, path) -> None:
    """Little-endian dump: two uint64 counts, then amplitude, then action.

    Both arrays are row-major float64 (axis_a index varies slowest).
    """
    na, nb = psi.grid.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack("<QQ", na, nb))
        fh.write(np.ascontiguousarray(psi.amplitude.values, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(psi.action.values, dtype="<f8").tobytes())


def read_binary(path) -> Tuple[np.ndarray, np.ndarray]:
    data = Path(path).read_bytes()
    na, nb = struct.unpack_from("<QQ", data, 0)
    size = na * nb * 8
    if len(data) != 16 + 2 * size:
        raise DomainError(f"binary snapshot has {len(data)} bytes, expected {16 + 2 * size}")
    amp = np.frombuffer(data, dtype="<f8", count=na * nb, offset=16).reshape(na, nb)
    act = np.frombuffer(data, dtype="<f8", count=na * nb, offset=16 + size).reshape(na, nb)
    return amp.astype(float), act.astype(float)
