"""Finite-difference realisation of the phase-space operator system.

Operators act on a wave written as ``envelope * exp(i S / hbar)`` where the
envelope may be complex (after an operator has been applied) and ``S`` is
the state's action. Derivatives use the product rule

    d psi = exp(i S/hbar) * (d env + i env dS / hbar)

with fourth-order stencils on ``env`` and ``S``, so the rapidly turning
phase is never differenced directly. A plain :class:`ComplexField` is
treated as ``env`` with ``S = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Tuple, Union

import numpy as np

from .action import HamiltonianSpec
from .errors import DomainError
from .numerics import (
    BOUNDARY_LAYERS,
    ComplexField,
    PhaseGrid,
    RealField,
    diff_array,
    fd_weights,
    integrate_array,
    truncation_estimate,
)
from .wavefunction import NORM_TOL, PhaseWaveFunction

KINDS = (
    "energy",
    "momentum",
    "position",
    "potential",
    "kinetic",
    "angular_momentum",
    "time",
    "multiply_by_coordinate",
)
MASK_FLOOR = 1e-12


@dataclass(frozen=True)
class QuantumOperator:
    """Operator descriptor.

    ``power`` repeats the operator (``momentum`` with ``power=2`` is p^2) and
    ``scale`` multiplies the result, so ``scale=0`` gives the zero operator.
    ``axis`` ('a' or 'b') is only used by ``multiply_by_coordinate``.
    """

    kind: str
    hbar: float = 1.0
    hamiltonian: Optional[HamiltonianSpec] = None
    axis: Optional[str] = None
    power: int = 1
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown operator kind {self.kind!r}")
        if self.kind in ("potential", "kinetic") and self.hamiltonian is None:
            raise DomainError(f"{self.kind} operator needs a HamiltonianSpec")
        if self.kind == "multiply_by_coordinate" and self.axis not in ("a", "b"):
            raise DomainError("multiply_by_coordinate needs axis 'a' or 'b'")
        if int(self.power) != self.power or self.power < 1:
            raise DomainError("power must be a positive integer")


def momentum(hbar=1.0, power=1):
    return QuantumOperator("momentum", hbar, power=power)


def position(hbar=1.0, power=1):
    return QuantumOperator("position", hbar, power=power)


def energy(hbar=1.0):
    return QuantumOperator("energy", hbar)


def time_operator(hbar=1.0, power=1):
    return QuantumOperator("time", hbar, power=power)


def angular_momentum(hbar=1.0, power=1):
    return QuantumOperator("angular_momentum", hbar, power=power)


def kinetic(H: HamiltonianSpec):
    return QuantumOperator("kinetic", H.hbar, hamiltonian=H)


def potential(H: HamiltonianSpec):
    return QuantumOperator("potential", H.hbar, hamiltonian=H)


def coordinate(axis: str, scale: float = 1.0):
    return QuantumOperator("multiply_by_coordinate", axis=axis, scale=scale)


@dataclass(frozen=True)
class OperatorApplication:
    result: ComplexField
    fd_error_estimate: float


# --- internal wave representation ---------------------------------------


@dataclass(frozen=True)
class _Wave:
    grid: PhaseGrid
    env: np.ndarray
    action: np.ndarray
    hbar: float
    times: Optional[np.ndarray] = None
    env_stack: Optional[np.ndarray] = None
    action_stack: Optional[np.ndarray] = None

    @property
    def values(self) -> np.ndarray:
        return self.env * np.exp(1j * self.action / self.hbar)

    def with_env(self, env, env_stack=None) -> "_Wave":
        return replace(self, env=env, env_stack=env_stack)


def _as_wave(psi, hbar: Optional[float] = None) -> _Wave:
    if isinstance(psi, _Wave):
        return psi
    if isinstance(psi, PhaseWaveFunction):
        stack = act = times = None
        if psi.time_slices:
            times = np.array([s.t for s in psi.time_slices])
            stack = np.stack([s.amplitude for s in psi.time_slices]).astype(complex)
            act = np.stack([s.action for s in psi.time_slices])
        return _Wave(
            psi.grid,
            psi.amplitude.values.astype(complex),
            psi.action.values,
            psi.hbar,
            times,
            stack,
            act,
        )
    if isinstance(psi, ComplexField):
        return _Wave(psi.grid, np.array(psi.values), np.zeros(psi.grid.shape), 1.0 if hbar is None else hbar)
    raise DomainError(f"cannot apply an operator to {type(psi).__name__}")


def _d(w: _Wave, axis: str, order: int = 1) -> Tuple[np.ndarray, float]:
    """Envelope of d^order psi / d axis^order, plus a truncation estimate."""
    g = w.grid.axis(axis)
    idx = 0 if axis == "a" else 1
    h, per = g.spacing, g.periodic
    da = diff_array(w.env, idx, h, 1, per)
    err = truncation_estimate(w.env, idx, h, 1)
    if not np.any(w.action):
        if order == 1:
            return da, err
        return diff_array(w.env, idx, h, 2, per), truncation_estimate(w.env, idx, h, 2)
    k = diff_array(w.action, idx, h, 1, per) / w.hbar
    err += float(np.max(np.abs(w.env))) * truncation_estimate(w.action, idx, h, 1) / w.hbar
    if order == 1:
        return da + 1j * w.env * k, err
    daa = diff_array(w.env, idx, h, 2, per)
    kk = diff_array(w.action, idx, h, 2, per) / w.hbar
    err2 = truncation_estimate(w.env, idx, h, 2) + 2 * err * float(np.max(np.abs(k)))
    return daa + 2j * da * k + 1j * w.env * kk - w.env * k**2, err2


def _dt(w: _Wave) -> Tuple[np.ndarray, float]:
    """d psi / dt at the middle slice, 5-point central stencil."""
    if w.env_stack is None:
        raise DomainError("energy operator needs time slices (or a (t, E) grid)")
    n = len(w.times)
    m = n // 2
    dt = w.times[1] - w.times[0]
    wts = fd_weights((-2, -1, 0, 1, 2), 1)
    sl = slice(m - 2, m + 3)
    da = np.tensordot(wts, w.env_stack[sl], axes=1) / dt
    dS = np.tensordot(wts, w.action_stack[sl], axes=1) / dt
    env_m = w.env_stack[m]
    if n >= 7:
        err = float(np.max(np.abs(np.diff(w.env_stack, n=5, axis=0)))) / (30.0 * dt)
    else:
        err = float("nan")
    return da + 1j * env_m * dS / w.hbar, err


def _coefficients(H: HamiltonianSpec, grid: PhaseGrid) -> Tuple[np.ndarray, np.ndarray]:
    q, p = grid.mesh()
    return H.dH_dq(q, p), H.dH_dp(q, p)


def _apply_once(op: QuantumOperator, w: _Wave) -> Tuple[_Wave, float]:
    kind, hbar, grid = op.kind, op.hbar, w.grid
    if kind == "multiply_by_coordinate":
        c = grid.coordinate(op.axis)
        return w.with_env(c * w.env), 0.0
    if kind == "momentum":
        if grid.kind != "xp":
            raise DomainError("momentum operator needs an (x, p) grid")
        d, err = _d(w, "a")
        return w.with_env(-1j * hbar * d), hbar * err
    if kind == "position":
        if grid.kind != "xp":
            raise DomainError("position operator needs an (x, p) grid")
        d, err = _d(w, "b")
        return w.with_env(-1j * hbar * d), hbar * err
    if kind == "angular_momentum":
        if grid.kind != "phiL" or not grid.axis_a.periodic:
            raise DomainError("angular momentum operator needs a periodic (phi, L) grid")
        d, err = _d(w, "a")
        return w.with_env(-1j * hbar * d), hbar * err
    if kind == "time":
        if grid.kind != "tE":
            raise DomainError("time operator needs a (t, E) grid")
        d, err = _d(w, "b")
        return w.with_env(1j * hbar * d), hbar * err
    if kind == "energy":
        if grid.kind == "tE":
            d, err = _d(w, "a")
            return w.with_env(1j * hbar * d), hbar * err
        d, err = _dt(w)
        m = len(w.times) // 2
        out = replace(w, env=1j * hbar * d, action=w.action_stack[m], times=None, env_stack=None, action_stack=None)
        return out, hbar * err
    if grid.kind != "xp":
        raise DomainError(f"{kind} operator needs an (x, p) grid")
    dHdq, dHdp = _coefficients(op.hamiltonian, grid)
    if kind == "kinetic":
        d, err = _d(w, "a")
        return w.with_env(-0.5j * hbar * dHdp * d), 0.5 * hbar * err * float(np.max(np.abs(dHdp)))
    # potential: -(i hbar / 2) * (-dH/dq) * d/dp
    d, err = _d(w, "b")
    return w.with_env(0.5j * hbar * dHdq * d), 0.5 * hbar * err * float(np.max(np.abs(dHdq)))


def _apply_wave(op: QuantumOperator, w: _Wave) -> Tuple[_Wave, float]:
    total = 0.0
    for _ in range(op.power):
        w, err = _apply_once(op, w)
        total += err
    if op.scale != 1.0:
        w = w.with_env(op.scale * w.env, None if w.env_stack is None else op.scale * w.env_stack)
    return w, abs(op.scale) * total


def _multiply_slices(w: _Wave, factor: np.ndarray, per_slice=None) -> _Wave:
    """Multiply env (and slices) by ``factor``; ``per_slice`` overrides for slices."""
    stack = None
    if w.env_stack is not None:
        stack = w.env_stack * (factor if per_slice is None else per_slice)
    return w.with_env(w.env * factor, stack)


def apply(op: QuantumOperator, psi) -> OperatorApplication:
    """Apply ``op`` pointwise by finite differences.

    Raises:
        DomainError: the operator does not fit the state's grid (e.g. the
            time operator off a (t, E) grid, energy without time slices).
    """
    w = _as_wave(psi, op.hbar)
    out, err = _apply_wave(op, w)
    return OperatorApplication(ComplexField(w.grid, out.values), err)


def _interior(grid: PhaseGrid, amp: np.ndarray) -> np.ndarray:
    mask = np.abs(amp) >= MASK_FLOOR * np.max(np.abs(amp))
    L = BOUNDARY_LAYERS
    if not grid.axis_a.periodic:
        mask[:L, :] = mask[-L:, :] = False
    mask[:, :L] = mask[:, -L:] = False
    return mask


def observable_extract(op: QuantumOperator, psi) -> RealField:
    """``Re(op psi / psi)`` with points where ``|psi|`` is negligible masked.

    The returned field is zero at masked points; ``mask`` marks valid ones.
    """
    w = _as_wave(psi, op.hbar)
    out, _ = _apply_wave(op, w)
    mag = np.abs(w.env)
    mask = mag >= MASK_FLOOR * mag.max() if mag.max() > 0 else np.zeros(mag.shape, bool)
    if not mask.any():
        raise DomainError("every point is below the masking floor")
    # the common phase factor cancels in the ratio
    ratio = np.zeros(w.grid.shape)
    ratio[mask] = np.real(out.env[mask] / w.env[mask])
    return RealField(w.grid, ratio, mask)


@dataclass(frozen=True)
class MeanValue:
    value: float
    imag: float

    def __float__(self):
        return self.value


def _norm(w: _Wave) -> float:
    return float(np.real(integrate_array(w.grid, np.abs(w.env) ** 2)))


def mean_value(op: QuantumOperator, psi, norm_tol: float = NORM_TOL) -> MeanValue:
    """``Re`` and ``Im`` of the integral of ``conj(psi) * op psi``.

    Raises:
        DomainError: ``psi`` is not normalized within ``norm_tol``.
    """
    w = _as_wave(psi, op.hbar)
    n = _norm(w)
    if abs(n - 1.0) > norm_tol:
        raise DomainError(f"mean value needs a normalized state (norm = {n:.12g})")
    out, _ = _apply_wave(op, w)
    z = complex(integrate_array(w.grid, np.conj(w.env) * out.env))
    return MeanValue(z.real, z.imag)


# --- commutators -----------------------------------------------------------

# (coordinate, operator kind, grid kind) -> expected constant in units of i*hbar
_PAIRS = {
    ("x", "momentum", "xp"): 1.0,
    ("p", "position", "xp"): 1.0,
    ("phi", "angular_momentum", "phiL"): 1.0,
    ("t", "energy", "tE"): -1.0,
    ("t", "energy", "xp"): -1.0,
    ("E", "time", "tE"): -1.0,
}


def expected_commutator(coordinate: str, op: QuantumOperator, grid: PhaseGrid) -> float:
    key = (coordinate, op.kind, grid.kind)
    if key not in _PAIRS:
        raise DomainError(f"no canonical commutator for ({coordinate}, {op.kind}) on a {grid.kind} grid")
    return _PAIRS[key]


def _coordinate_multiply(coordinate: str, w: _Wave) -> _Wave:
    if coordinate == "t" and w.grid.kind != "tE":
        if w.times is None:
            raise DomainError("time coordinate needs a time-sliced state")
        stack = None if w.env_stack is None else w.times[:, None, None] * w.env_stack
        return w.with_env(w.times[len(w.times) // 2] * w.env, stack)
    la, lb = w.grid.labels
    if coordinate == la:
        return _multiply_slices(w, w.grid.coordinate("a"))
    if coordinate == lb:
        return _multiply_slices(w, w.grid.coordinate("b"))
    raise DomainError(f"coordinate {coordinate!r} does not exist on this state")


def commutator_wave(coordinate: str, op: QuantumOperator, psi) -> _Wave:
    """``(c op - op c) psi`` for a coordinate ``c``, as an internal wave."""
    w = _as_wave(psi, op.hbar)
    left, _ = _apply_wave(op, w)
    left = _coordinate_multiply(coordinate, replace(left, times=w.times))
    right, _ = _apply_wave(op, _coordinate_multiply(coordinate, w))
    return right.with_env(left.env - right.env)


def commutator_residual(coordinate: str, op: QuantumOperator, psi) -> Tuple[ComplexField, float]:
    """Residual ``(c op - op c) psi - (+-i hbar) psi`` and its interior max-norm.

    The norm skips non-periodic boundary layers and points where ``|psi|``
    is below the masking floor.
    """
    w = _as_wave(psi, op.hbar)
    sign = expected_commutator(coordinate, op, w.grid)
    comm = commutator_wave(coordinate, op, w)
    env0 = w.env if w.env_stack is None else w.env_stack[len(w.times) // 2]
    resid_env = comm.env - sign * 1j * op.hbar * env0
    field = ComplexField(w.grid, resid_env * np.exp(1j * comm.action / comm.hbar))
    mask = _interior(w.grid, env0)
    return field, float(np.max(np.abs(resid_env[mask])))


# --- fundamental equation ------------------------------------------------


def hamiltonian_apply(psi, H: HamiltonianSpec) -> np.ndarray:
    """``(T + U) psi`` as raw complex values."""
    w = _as_wave(psi, H.hbar)
    t, _ = _apply_wave(kinetic(H), w)
    u, _ = _apply_wave(potential(H), w)
    return (t.env + u.env) * np.exp(1j * w.action / w.hbar)


def fundamental_rhs(psi, H: HamiltonianSpec) -> np.ndarray:
    """``1/2 (dH/dp p_op - dH/dq q_op) psi`` composed from p and q operators."""
    w = _as_wave(psi, H.hbar)
    dHdq, dHdp = _coefficients(H, w.grid)
    p_psi, _ = _apply_wave(momentum(H.hbar), w)
    q_psi, _ = _apply_wave(position(H.hbar), w)
    return 0.5 * (dHdp * p_psi.env - dHdq * q_psi.env) * np.exp(1j * w.action / w.hbar)


def fundamental_equation_residual(
    psi: PhaseWaveFunction, H: HamiltonianSpec, region: Optional[np.ndarray] = None
) -> Tuple[ComplexField, float]:
    """``E_op psi - (T + U) psi`` and its max-norm over ``region``.

    ``region`` defaults to the grid interior (boundary layers dropped).

    Raises:
        DomainError: ``psi`` carries no time slices.
    """
    if not isinstance(psi, PhaseWaveFunction) or not psi.time_slices:
        raise DomainError("fundamental equation residual needs a time-sliced state")
    if psi.grid.kind != "xp":
        raise DomainError("fundamental equation residual needs an (x, p) grid")
    w = _as_wave(psi, H.hbar)
    e, _ = _apply_wave(energy(H.hbar), w)
    rhs = hamiltonian_apply(psi, H)
    resid = e.values - rhs
    if region is None:
        region = _interior(psi.grid, np.ones(psi.grid.shape))
    return ComplexField(psi.grid, resid), float(np.max(np.abs(resid[region])))
