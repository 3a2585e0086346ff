"""Built-in acceptance suite: ten named criteria, each a list of checks.

Shared by ``phaseqm selfcheck`` and the test suite. Each criterion
builds its own states from fixed seeds and grids, so results are
deterministic.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from importlib import resources
from typing import Callable, Dict, List

import numpy as np

from . import operators as ops
from .action import Box, Harmonic, HamiltonianSpec, Polynomial, bohr_sommerfeld_levels
from .config import parse_config
from .fluctuation import (
    PathEnsemble,
    ensemble_fluctuation,
    minimum_fluctuation_search,
    quantized_energies,
    quantized_momenta,
    temporal_fluctuation,
)
from .numerics import Grid1D, PhaseGrid
from .tasks import (
    DEFAULT_TOLERANCES,
    EPS,
    Check,
    CommutatorCase,
    analytic_levels,
    check_ge,
    check_le,
    coarsen,
    commutator_checks,
    conjugate_square_mean,
    fundamental_checks,
    map_ordered,
    report_only,
    run_tasks,
)
from .uncertainty import gaussian_product, uncertainty_report
from .wavefunction import make_free_particle, make_gaussian_packet, plateau_mask, sample_random_state, time_sliced


@dataclass
class CriterionResult:
    id: int
    name: str
    checks: List[Check]

    @property
    def passed(self) -> bool:
        return all(c.passed is not False for c in self.checks)

    def to_dict(self) -> dict:
        return {"id": self.id, "name": self.name, "passed": self.passed, "checks": [c.to_dict() for c in self.checks]}


def _tol(key: str) -> float:
    return DEFAULT_TOLERANCES[key]


# --- 1. Gaussian product law -------------------------------------------------

# (sigma_x, sigma_p, hbar)
GAUSSIAN_FAMILY = (
    (1.0, 1e-3, 1.0),
    (1.0, 1.0, 1.0),
    (0.3, 2.0, 1.0),
    (2.0, 0.1, 1.0),
    (0.5, 0.5, 0.5),
    (1.5, 3.0, 2.0),
)
GAUSSIAN_COUNT = 257


def gaussian_packet_on_span(sx: float, sp: float, hbar: float, count: int = GAUSSIAN_COUNT):
    grid = PhaseGrid(Grid1D(-8 * sx, 8 * sx, count), Grid1D(-8 * sp, 8 * sp, count))
    return make_gaussian_packet(grid, 0.0, 0.0, sx, sp, hbar)


def criterion_gaussian(perturb_B: float = 0.0) -> List[Check]:
    checks = []

    def one(params):
        sx, sp, hbar = params
        rep = uncertainty_report(gaussian_packet_on_span(sx, sp, hbar), "x-p")
        return params, rep

    for (sx, sp, hbar), rep in map_ordered(one, GAUSSIAN_FAMILY):
        exact = gaussian_product(sx, sp, hbar)
        tag = f"sigma_x={sx:g}, sigma_p={sp:g}, hbar={hbar:g}"
        checks.append(check_le(f"{tag}: relative error of product", abs(rep.product - exact) / exact, 1e-6))
        checks.append(check_ge(f"{tag}: product / (hbar/2)", rep.product / rep.bound, 1.0))
        if math.isclose(sx * sp, 1e-3 * hbar):
            checks.append(check_le(f"{tag}: |product - hbar/2| / (hbar/2)", abs(rep.product - rep.bound) / rep.bound, 2e-6))
    return checks


# --- 2-4. random-state suites ---------------------------------------------------

SUITE_SIZES = {"x-p": 100, "E-t": 25, "phi-L": 25}


def suite_grid(pair: str) -> PhaseGrid:
    if pair == "x-p":
        return PhaseGrid(Grid1D(-8.0, 8.0, 513), Grid1D(-8.0, 8.0, 129), "xp")
    if pair == "E-t":
        return PhaseGrid(Grid1D(0.0, 16.0, 513), Grid1D(0.0, 16.0, 129), "tE")
    return PhaseGrid(Grid1D(-math.pi, math.pi, 513, periodic=True), Grid1D(-8.0, 8.0, 129), "phiL")


def _suite_record(item) -> dict:
    pair, seed = item
    psi = sample_random_state(suite_grid(pair), seed)
    rep = uncertainty_report(psi, pair)
    conj2 = conjugate_square_mean(psi, pair)
    return {
        "pair": pair,
        "seed": seed,
        "A": rep.A,
        "B": rep.B,
        "C": rep.C,
        "B_commutator": rep.B_commutator,
        "product_ratio": rep.product / rep.bound,
        "c_rel": abs(psi.hbar**2 * rep.C - conj2) / abs(conj2),
    }


@lru_cache(maxsize=1)
def suite_records() -> tuple:
    items = [(pair, seed) for pair, n in SUITE_SIZES.items() for seed in range(n)]
    return tuple(map_ordered(_suite_record, items))


def _by_pair(records) -> Dict[str, list]:
    out: Dict[str, list] = {}
    for r in records:
        out.setdefault(r["pair"], []).append(r)
    return out


def criterion_discriminant(perturb_B: float = 0.0) -> List[Check]:
    checks = []
    for pair, recs in _by_pair(suite_records()).items():
        disc = max(r["B"] ** 2 - 4 * r["A"] * r["C"] for r in recs)
        ratio = min(r["product_ratio"] for r in recs)
        checks.append(check_le(f"{pair} ({len(recs)} states): max B^2 - 4AC", disc, _tol("discriminant")))
        checks.append(check_ge(f"{pair} ({len(recs)} states): min product / (hbar/2)", ratio, 1.0 - _tol("product_slack")))
    return checks


def criterion_b_identity(perturb_B: float = 0.0) -> List[Check]:
    checks = []
    for pair, recs in _by_pair(suite_records()).items():
        b = [r["B"] + perturb_B for r in recs]
        checks.append(check_le(f"{pair}: max |B + 1|", max(abs(x + 1.0) for x in b), _tol("b_identity")))
        checks.append(
            check_le(
                f"{pair}: max |B - B_commutator|",
                max(abs(x - r["B_commutator"]) for x, r in zip(b, recs)),
                _tol("b_routes"),
            )
        )
    return checks


def criterion_c_consistency(perturb_B: float = 0.0) -> List[Check]:
    return [
        check_le(f"{pair}: max |hbar^2 C - <conj^2>| / <conj^2>", max(r["c_rel"] for r in recs), _tol("c_consistency"))
        for pair, recs in _by_pair(suite_records()).items()
    ]


# --- 5. Bohr-Sommerfeld -----------------------------------------------------------


def criterion_bohr_sommerfeld(perturb_B: float = 0.0) -> List[Check]:
    checks = []
    closed = (
        ("harmonic omega=1", HamiltonianSpec(1.0, Harmonic(1.0))),
        ("harmonic omega=2.5, m=0.7, hbar=0.3", HamiltonianSpec(0.7, Harmonic(2.5), 0.3)),
        ("box L=1", HamiltonianSpec(1.0, Box(1.0))),
        ("box L=2.5, m=3", HamiltonianSpec(3.0, Box(2.5))),
    )
    for label, H in closed:
        E = bohr_sommerfeld_levels(H, 10).energies
        exact = analytic_levels(H, 10)
        checks.append(check_le(f"{label}: max relative error, n=1..10", float(np.max(np.abs(E - exact) / exact)), 1e-8))
    H = HamiltonianSpec(1.0, Polynomial((0.0, 0.0, 0.0, 0.0, 1.0)))
    res = bohr_sommerfeld_levels(H, 10)
    worst = max(lv.residual / (lv.n * H.h) for lv in res.levels)
    checks.append(check_le("quartic x^4: max |I(E_n) - n h| / (n h)", worst, 1e-10))
    return checks


# --- 6. commutators ------------------------------------------------------------------


def _moving_gaussian(dt: float):
    grid = PhaseGrid(Grid1D(-8.0, 8.0, 65), Grid1D(-8.0, 8.0, 65))
    return time_sliced(lambda t: make_gaussian_packet(grid, math.sin(t), 0.0, 1.0, 1.0), 0.3, dt)


def commutator_setups() -> list:
    """(case, make(coarsening factor)) pairs at their reference resolutions."""
    xp_a = PhaseGrid(Grid1D(-8.0, 8.0, 513), Grid1D(-8.0, 8.0, 33))
    xp_b = PhaseGrid(Grid1D(-8.0, 8.0, 33), Grid1D(-8.0, 8.0, 513))
    te_a = PhaseGrid(Grid1D(-8.0, 8.0, 513), Grid1D(-8.0, 8.0, 33), "tE")
    te_b = PhaseGrid(Grid1D(-8.0, 8.0, 33), Grid1D(-8.0, 8.0, 513), "tE")
    phi = PhaseGrid(Grid1D(-math.pi, math.pi, 1025, periodic=True), Grid1D(-8.0, 8.0, 33), "phiL")

    def gauss(grid, axis, sx=1.0):
        return lambda f: make_gaussian_packet(coarsen(grid, axis, f), 0.0, 0.0, sx, 1.0)

    return [
        (CommutatorCase("(x, p_op)", "x", "momentum", "a"), gauss(xp_a, "a")),
        (CommutatorCase("(p, x_op)", "p", "position", "b"), gauss(xp_b, "b")),
        (CommutatorCase("(E, t_op)", "E", "time", "b"), gauss(te_b, "b")),
        (CommutatorCase("(t, E_op) on a (t, E) grid", "t", "energy", "a"), gauss(te_a, "a")),
        (CommutatorCase("(t, E_op) time-sliced", "t", "energy", "dt"), lambda f: _moving_gaussian(0.025 * f)),
        (CommutatorCase("(phi, L_op)", "phi", "angular_momentum", "a"), gauss(phi, "a", 0.3)),
    ]


def criterion_commutators(perturb_B: float = 0.0) -> List[Check]:
    results = map_ordered(lambda cm: commutator_checks(cm[0], cm[1], _tol)[0], commutator_setups())
    return [c for checks in results for c in checks]


# --- 7-8. free particle -------------------------------------------------------------

FREE_P0 = 1.5
FREE_MASS = 1.0


@lru_cache(maxsize=1)
def free_particle_state():
    grid = PhaseGrid(Grid1D(-8.0, 8.0, 257), Grid1D(-8.0, 8.0, 257))
    return time_sliced(lambda t: make_free_particle(grid, FREE_P0, FREE_MASS, t), 0.0, 0.05)


def criterion_extraction(perturb_B: float = 0.0) -> List[Check]:
    psi = free_particle_state()
    plateau = plateau_mask(psi)
    x, p = psi.grid.mesh()
    expected = {
        "Re(p_op psi / psi) - p": (ops.momentum(), p),
        "Re(x_op psi / psi) - x": (ops.position(), x),
        "Re(E_op psi / psi) - p^2 / 2m": (ops.energy(), p**2 / (2 * FREE_MASS)),
    }
    checks = []
    for name, (op, target) in expected.items():
        field = ops.observable_extract(op, psi)
        region = plateau & field.mask
        checks.append(check_le(f"{name} on the flat envelope ({int(region.sum())} points)", np.max(np.abs(field.values - target)[region]), 1e-7))
    return checks


def criterion_fundamental(perturb_B: float = 0.0) -> List[Check]:
    free = HamiltonianSpec(FREE_MASS, Polynomial((0.0,)))
    checks, _ = fundamental_checks(free_particle_state(), free, _tol)
    harmonic = HamiltonianSpec(1.0, Harmonic(1.0))
    states = {
        "random seed 7": sample_random_state(PhaseGrid(Grid1D(-8.0, 8.0, 257), Grid1D(-8.0, 8.0, 257)), 7),
        "gaussian packet": gaussian_packet_on_span(1.0, 1.0, 1.0),
    }
    for label, psi in states.items():
        diff = ops.hamiltonian_apply(psi, harmonic) - ops.fundamental_rhs(psi, harmonic)
        checks.append(check_le(f"harmonic, {label}: (T + U) psi vs right-hand side", np.max(np.abs(diff)), _tol("operator_identity")))
    moving = time_sliced(
        lambda t: make_gaussian_packet(PhaseGrid(Grid1D(-8.0, 8.0, 129), Grid1D(-8.0, 8.0, 129)), 0.0, 0.0, 1.0, 1.0, mass=1.0, t=t),
        0.0,
        0.05,
    )
    _, resid = ops.fundamental_equation_residual(moving, harmonic)
    checks.append(report_only("harmonic, free-action Gaussian: E_op psi - (T + U) psi max-norm", resid))
    return checks


# --- 9. fluctuation identities -----------------------------------------------------


def fluctuation_ensembles() -> list:
    rng = np.random.default_rng(2024)
    ens = [
        PathEnsemble(5, ((4, 0.5), (6, 0.5)), 1.0),
        PathEnsemble(5, ((6, 0.3), (7, 0.7)), 2.0),
        PathEnsemble(3, ((1, Fraction(1, 3)), (3, Fraction(1, 3)), (6, Fraction(1, 3))), 0.7, hbar=0.5),
    ]
    for _ in range(20):
        n0 = int(rng.integers(0, 20))
        ns = sorted(set(int(v) for v in rng.integers(max(n0 - 5, 0), n0 + 6, size=4)))
        w = rng.uniform(0.1, 1.0, size=len(ns))
        w = w / w.sum()
        w[-1] = 1.0 - w[:-1].sum()
        ens.append(PathEnsemble(n0, tuple(zip(ns, w.tolist())), float(rng.uniform(0.1, 10.0)), float(rng.uniform(0.2, 3.0))))
    return ens


def criterion_fluctuation(perturb_B: float = 0.0) -> List[Check]:
    worst_id = worst_k = 0.0
    for ens in fluctuation_ensembles():
        for rep in (ensemble_fluctuation(ens), temporal_fluctuation(ens)):
            if rep.delta_S == 0:
                continue
            worst_id = max(worst_id, abs(rep.delta_S - ens.delta * rep.delta_conj) / rep.delta_S)
            worst_k = max(worst_k, abs(rep.delta_S - rep.k_real * 2 * math.pi * ens.hbar) / rep.delta_S)
    tol = _tol("fluctuation_identity")
    checks = [
        check_le("max |Delta S - delta * Delta conj| / Delta S", worst_id, tol),
        check_le("max |Delta S - k h| / Delta S", worst_k, tol),
    ]
    m = minimum_fluctuation_search(5, 3, 8)
    checks.append(check_le(f"minimum k over {m.count} ensembles with no classical weight, minus 1", abs(float(m.min_no_classical_weight) - 1.0), 0.0))
    checks.append(report_only("minimum k with any weight off the classical path", str(m.min_any_off_classical)))
    definite = ensemble_fluctuation(PathEnsemble(5, ((5, 1.0),), 1.0))
    checks.append(check_le("definite-momentum ensemble Delta x * Delta p", abs(definite.delta_S), 0.0))

    worst = 0.0
    ns = list(range(0, 13))
    for delta, hbar in ((0.5, 1.0), (1.0, 1.0), (3.7, 0.25), (12.0, 2.0)):
        h = 2 * math.pi * hbar
        for vals in (quantized_momenta(delta, ns, hbar), quantized_energies(delta, ns, hbar)):
            for n, v in zip(ns, vals):
                worst = max(worst, abs(v * delta / h - n) / max(n, 1))
            # spacing error relative to the largest operand: the subtraction itself rounds there
            steps = np.diff(vals)
            worst = max(worst, float(np.max(np.abs(steps - h / delta)) / max(vals)))
    checks.append(check_le("max relative deviation of n h / delta and its spacing", worst, tol))
    return checks


# --- 10. determinism ----------------------------------------------------------------

BUNDLED = ("harmonic_quantize.json", "uncertainty_random42.json", "fluctuation_pair.json")


def bundled_config(name: str) -> dict:
    return json.loads(resources.files("phaseqm").joinpath("configs", name).read_text(encoding="utf-8"))


def _report_digest() -> str:
    from .reporting import dumps, run_report

    h = hashlib.sha256()
    for name in BUNDLED:
        raw = bundled_config(name)
        h.update(dumps(run_report(raw, run_tasks(parse_config(raw)))).encode())
    return h.hexdigest()


def criterion_determinism(perturb_B: float = 0.0) -> List[Check]:
    first, second = _report_digest(), _report_digest()
    return [check_le("bundled reports differing between two runs", float(first != second), 0.0)]


CRITERIA = (
    (1, "Gaussian product law", criterion_gaussian),
    (2, "Discriminant property suite", criterion_discriminant),
    (3, "B-identity", criterion_b_identity),
    (4, "C-consistency", criterion_c_consistency),
    (5, "Bohr-Sommerfeld levels", criterion_bohr_sommerfeld),
    (6, "Commutators and convergence order", criterion_commutators),
    (7, "Operator extraction on a free particle", criterion_extraction),
    (8, "Fundamental equation", criterion_fundamental),
    (9, "Fluctuation identities", criterion_fluctuation),
    (10, "Determinism", criterion_determinism),
)


def criterion_names() -> List[str]:
    return [f"{i}. {name}" for i, name, _ in CRITERIA]


def run_criterion(cid: int, perturb_B: float = 0.0) -> CriterionResult:
    for i, name, fn in CRITERIA:
        if i == cid:
            return CriterionResult(i, name, fn(perturb_B))
    raise KeyError(cid)


def run_all(perturb_B: float = 0.0) -> List[CriterionResult]:
    return [run_criterion(i, perturb_B) for i, _, _ in CRITERIA]


def selfcheck_report(results: List[CriterionResult], perturb_B: float = 0.0) -> dict:
    from . import __version__
    from .config import SCHEMA_VERSION

    return {
        "schema_version": SCHEMA_VERSION,
        "toolkit_version": __version__,
        "perturb_B": perturb_B,
        "criteria": [r.to_dict() for r in results],
        "passed": all(r.passed for r in results),
    }
