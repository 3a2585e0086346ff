"""Quantized mean momenta/energies and path-ensemble action fluctuations.

An ensemble assigns probabilities ``W_n`` to paths whose action over a
fixed interval is ``n h``; the classical path has ``n0``. The mean action
deviation is ``Delta S = h * sum W_n |n - n0|``. Weights may be
:class:`fractions.Fraction` for exact integrality checks.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from fractions import Fraction
from itertools import combinations
from numbers import Real
from typing import Iterable, List, Sequence, Tuple

from .errors import DomainError

INTEGRAL_TOL = 1e-12


def _h(hbar: float) -> float:
    return 2.0 * math.pi * hbar


def quantized_momenta(delta_x: float, n_list: Iterable[int], hbar: float = 1.0) -> List[float]:
    """Mean momenta ``n h / delta_x``."""
    if not delta_x > 0:
        raise DomainError("delta_x must be positive")
    h = _h(hbar)
    return [n * h / delta_x for n in n_list]


def quantized_energies(delta_t: float, n_list: Iterable[int], hbar: float = 1.0) -> List[float]:
    """Mean energies ``n h / delta_t``."""
    if not delta_t > 0:
        raise DomainError("delta_t must be positive")
    h = _h(hbar)
    return [n * h / delta_t for n in n_list]


@dataclass(frozen=True)
class PathEnsemble:
    """Paths labelled by quantum number ``n`` with weights ``W_n``.

    ``delta`` is the spatial width (or the duration for the temporal
    variant) over which every path's action is accumulated.
    """

    n0: int
    members: Tuple[Tuple[int, Real], ...]
    delta: float
    hbar: float = 1.0

    def __post_init__(self):
        members = tuple((int(n), w) for n, w in self.members)
        if not members:
            raise DomainError("ensemble needs at least one member")
        if int(self.n0) != self.n0 or self.n0 < 0:
            raise DomainError("n0 must be a non-negative integer")
        if any(n < 0 for n, _ in members):
            raise DomainError("quantum numbers must be non-negative")
        if any(w < 0 for _, w in members):
            raise DomainError("weights must be non-negative")
        total = sum(w for _, w in members)
        if abs(total - 1) > 1e-12:
            raise DomainError(f"weights must sum to 1 (got {float(total)!r})")
        if not self.delta > 0:
            raise DomainError("delta must be positive")
        object.__setattr__(self, "members", members)
        object.__setattr__(self, "n0", int(self.n0))

    @classmethod
    def from_json(cls, text: str, n0: int, delta: float, hbar: float = 1.0) -> "PathEnsemble":
        """Parse ``[{"n": int, "weight": number-or-"p/q"}, ...]``."""
        data = json.loads(text)
        return cls.from_records(data, n0, delta, hbar)

    @classmethod
    def from_records(cls, records: Sequence[dict], n0: int, delta: float, hbar: float = 1.0) -> "PathEnsemble":
        members = []
        for rec in records:
            w = rec["weight"]
            if isinstance(w, str):
                w = Fraction(w)
            members.append((rec["n"], w))
        return cls(n0, tuple(members), delta, hbar)

    def shifted(self, k: int) -> "PathEnsemble":
        return PathEnsemble(self.n0 + k, tuple((n + k, w) for n, w in self.members), self.delta, self.hbar)


@dataclass(frozen=True)
class FluctuationReport:
    delta_S: float
    delta_conj: float
    k_real: float
    k_nearest: int
    integral_multiple: bool
    classicality_ratio: float
    variant: str = "spatial"

    def to_dict(self) -> dict:
        out = asdict(self)
        if math.isinf(out["classicality_ratio"]):
            out["classicality_ratio"] = "inf"
        return out


def _fluctuation(ens: PathEnsemble, variant: str) -> FluctuationReport:
    h = _h(ens.hbar)
    k = sum(w * abs(n - ens.n0) for n, w in ens.members)
    # mean deviation of the conjugate quantity, then Delta S = delta * that
    delta_conj = sum(float(w) * abs(n - ens.n0) * h / ens.delta for n, w in ens.members)
    delta_S = ens.delta * delta_conj
    k_nearest = int(round(k))
    if isinstance(k, Fraction):
        integral = k.denominator == 1
    else:
        integral = abs(float(k) - k_nearest) <= INTEGRAL_TOL
    mean_classical = ens.n0 * h / ens.delta
    ratio, _ = classicality_indicator(mean_classical, delta_conj)
    return FluctuationReport(delta_S, delta_conj, float(k), k_nearest, integral, ratio, variant)


def ensemble_fluctuation(ens: PathEnsemble) -> FluctuationReport:
    """Spatial variant: ``Delta S = delta_x * Delta p``."""
    return _fluctuation(ens, "spatial")


def temporal_fluctuation(ens: PathEnsemble) -> FluctuationReport:
    """Temporal variant: ``delta`` is a duration and ``delta_conj`` is Delta E."""
    return _fluctuation(ens, "temporal")


CLASSICAL_RATIO = 100.0
QUANTUM_RATIO = 10.0


def classicality_indicator(
    p_bar: float,
    delta_p: float,
    classical: float = CLASSICAL_RATIO,
    quantum: float = QUANTUM_RATIO,
) -> Tuple[float, str]:
    """Ratio ``p_bar / delta_p`` and a regime label.

    ``classical`` at or above ``classical``, ``quantum`` at or below
    ``quantum``, ``intermediate`` otherwise. A zero spread is classical.
    """
    if delta_p < 0:
        raise DomainError("delta_p must be non-negative")
    ratio = math.inf if delta_p == 0 else abs(p_bar) / delta_p
    if ratio >= classical:
        return ratio, "classical"
    if ratio <= quantum:
        return ratio, "quantum"
    return ratio, "intermediate"


def enumerate_ensembles(n0: int, max_offset: int = 3, denominator: int = 8):
    """All ensembles with ``|n - n0| <= max_offset`` and weights in ``k/denominator``.

    Yields ``members`` tuples with exact :class:`Fraction` weights; members of
    zero weight are dropped.
    """
    offsets = [d for d in range(-max_offset, max_offset + 1) if n0 + d >= 0]
    slots = len(offsets)
    # stars and bars: choose where the slot dividers go among denominator + slots - 1 positions
    for bars in combinations(range(denominator + slots - 1), slots - 1):
        counts, prev = [], -1
        for b in bars:
            counts.append(b - prev - 1)
            prev = b
        counts.append(denominator + slots - 1 - prev - 1)
        yield tuple((n0 + d, Fraction(c, denominator)) for d, c in zip(offsets, counts) if c)


@dataclass(frozen=True)
class MinimumSearch:
    count: int
    min_no_classical_weight: Fraction
    min_any_off_classical: Fraction


def minimum_fluctuation_search(n0: int = 5, max_offset: int = 3, denominator: int = 8) -> MinimumSearch:
    """Brute-force minimum of ``sum W |n - n0|`` (in units of h).

    Two notions of a non-degenerate ensemble are reported: no weight at all
    on the classical path, and merely some weight off it.
    """
    count = 0
    best_strict = best_loose = None
    for members in enumerate_ensembles(n0, max_offset, denominator):
        count += 1
        k = sum(w * abs(n - n0) for n, w in members)
        w0 = sum(w for n, w in members if n == n0)
        if w0 < 1 and (best_loose is None or k < best_loose):
            best_loose = k
        if w0 == 0 and (best_strict is None or k < best_strict):
            best_strict = k
    return MinimumSearch(count, best_strict, best_loose)
