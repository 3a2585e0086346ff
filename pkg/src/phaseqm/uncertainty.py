"""Quadratic-form uncertainty machinery for (x, p), (E, t) and (phi, L).

For a normalized state vanishing at the ends of the coordinate axis the
integral of ``|alpha c psi + d psi/dc|^2`` is the quadratic
``A alpha^2 + B alpha + C >= 0`` with

    A = <c^2>,   B = -1,   C = <conj^2> / hbar^2,

so ``B^2 - 4AC <= 0`` gives ``sqrt(<c^2>) sqrt(<conj^2>) >= hbar / 2``.
Moments are taken about the origin unless ``centered=True``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .errors import DomainError
from .numerics import BOUNDARY_DECAY, integrate_array
from .operators import _as_wave, _d, commutator_wave, QuantumOperator
from .wavefunction import NORM_TOL, PhaseWaveFunction, boundary_decay

PAIRS = {
    # pair label: (grid kind, conjugate operator kind, commutator coordinate, route sign)
    "x-p": ("xp", "momentum", "x", -1.0),
    "E-t": ("tE", "energy", "t", 1.0),
    "phi-L": ("phiL", "angular_momentum", "phi", -1.0),
}
SATISFIED_SLACK = 1e-9


@dataclass(frozen=True)
class Coefficients:
    """A, B, C of the quadratic form, each by two routes where available."""

    A: float
    B: float
    C: float
    B_commutator: float
    C_second_derivative: float


@dataclass(frozen=True)
class UncertaintyReport:
    pair: str
    A: float
    B: float
    C: float
    B_commutator: float
    C_second_derivative: float
    discriminant: float
    rms_coord: float
    rms_conj: float
    product: float
    bound: float
    satisfied: bool
    b_identity_residual: float
    centered: bool = False

    def to_dict(self, psi: Optional[PhaseWaveFunction] = None) -> dict:
        out = asdict(self)
        if psi is not None:
            out["grid"] = psi.grid.to_dict()
            out["hbar"] = psi.hbar
            out["provenance"] = dict(psi.provenance)
        return out


def _check(psi: PhaseWaveFunction, pair: str) -> tuple:
    if pair not in PAIRS:
        raise DomainError(f"unknown pair {pair!r}; expected one of {sorted(PAIRS)}")
    spec = PAIRS[pair]
    if psi.grid.kind != spec[0]:
        raise DomainError(f"pair {pair} needs a {spec[0]!r} grid, state is on {psi.grid.kind!r}")
    n = psi.norm()
    if abs(n - 1.0) > NORM_TOL:
        raise DomainError(f"state is not normalized (norm = {n:.12g})")
    ratio = boundary_decay(psi, "a")
    if ratio > BOUNDARY_DECAY:
        raise DomainError(
            f"state does not vanish at the ends of the {psi.grid.labels[0]} axis "
            f"(boundary |psi|^2 ratio {ratio:.3e} > {BOUNDARY_DECAY:g})"
        )
    return spec


def abc_coefficients(psi: PhaseWaveFunction, pair: str = "x-p", centered: bool = False) -> Coefficients:
    """Quadrature values of A, B and C for ``psi``.

    ``B`` is the direct integrand ``psi c d(conj psi) + conj(psi) c d psi``;
    ``B_commutator`` goes through the operator commutator instead. ``C`` is
    the gradient form and ``C_second_derivative`` the ``-conj(psi) psi''``
    form.

    Raises:
        DomainError: wrong grid for ``pair``, state not normalized, or not
            vanishing at the ends of the coordinate axis.
    """
    _, op_kind, coord, sign = _check(psi, pair)
    grid, hbar = psi.grid, psi.hbar
    w = _as_wave(psi)
    env = w.env
    dens = np.abs(env) ** 2
    c = grid.coordinate("a")
    shift = 0.0
    if centered:
        shift = float(np.real(integrate_array(grid, c * dens)))
    c = c - shift

    g, _ = _d(w, "a", 1)
    g2, _ = _d(w, "a", 2)
    if centered:
        # subtract the mean conjugate momentum: d -> d - i <k>
        k_mean = float(np.imag(integrate_array(grid, np.conj(env) * g)))
        g2 = g2 - 2j * k_mean * g - k_mean**2 * env
        g = g - 1j * k_mean * env

    A = float(np.real(integrate_array(grid, c**2 * dens)))
    B = float(np.real(integrate_array(grid, 2.0 * c * np.real(np.conj(env) * g))))
    C = float(np.real(integrate_array(grid, np.abs(g) ** 2)))
    C2 = -float(np.real(integrate_array(grid, np.conj(env) * g2)))

    op = QuantumOperator(op_kind, hbar)
    if centered:
        comm = _centered_commutator(w, op, c)
    else:
        comm = commutator_wave(coord, op, w).env
    B_comm = float(np.real(sign / (1j * hbar) * integrate_array(grid, np.conj(env) * comm)))
    return Coefficients(A, B, C, B_comm, C2)


def _centered_commutator(w, op, c):
    # (c - c0) commutes like c: rebuild (c op - op c) psi with the shifted coordinate
    from .operators import _apply_wave

    left, _ = _apply_wave(op, w)
    right, _ = _apply_wave(op, w.with_env(c * w.env))
    return c * left.env - right.env


def uncertainty_report(psi: PhaseWaveFunction, pair: str = "x-p", centered: bool = False) -> UncertaintyReport:
    """RMS product ``sqrt(A) * hbar sqrt(C)`` compared with ``hbar / 2``."""
    co = abc_coefficients(psi, pair, centered)
    hbar = psi.hbar
    rms_coord = math.sqrt(max(co.A, 0.0))
    rms_conj = hbar * math.sqrt(max(co.C, 0.0))
    product = rms_coord * rms_conj
    bound = 0.5 * hbar
    return UncertaintyReport(
        pair=pair,
        A=co.A,
        B=co.B,
        C=co.C,
        B_commutator=co.B_commutator,
        C_second_derivative=co.C_second_derivative,
        discriminant=co.B**2 - 4.0 * co.A * co.C,
        rms_coord=rms_coord,
        rms_conj=rms_conj,
        product=product,
        bound=bound,
        satisfied=bool(product >= bound * (1.0 - SATISFIED_SLACK)),
        b_identity_residual=abs(co.B + 1.0),
        centered=centered,
    )


def angle_uncertainty_report(psi: PhaseWaveFunction) -> UncertaintyReport:
    """Uncertainty report on a periodic (phi, L) grid.

    The integration by parts behind ``B = -1`` needs the state to vanish at
    the angular cut, so states with support there are rejected.
    """
    if psi.grid.kind != "phiL" or not psi.grid.axis_a.periodic:
        raise DomainError("angle report needs a periodic (phi, L) grid")
    return uncertainty_report(psi, "phi-L")


def gaussian_product(sigma_x: float, sigma_p: float, hbar: float = 1.0) -> float:
    """Closed form ``sqrt(hbar^2/4 + sigma_x^2 sigma_p^2)`` for the packet family."""
    return math.sqrt(0.25 * hbar**2 + (sigma_x * sigma_p) ** 2)
