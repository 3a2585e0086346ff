"""Verification tasks driven by a :class:`RunConfig`.

Every task returns a :class:`TaskResult`: named checks (value, bound,
pass) plus the data series behind them. Checks with ``passed=None`` are
report-only diagnostics and never fail a run.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from . import operators as ops
from .action import Box, Harmonic, HamiltonianSpec, Polynomial, bohr_sommerfeld_levels
from .config import ConfigError, RunConfig
from .errors import DomainError
from .fluctuation import PathEnsemble, classicality_indicator, ensemble_fluctuation, minimum_fluctuation_search, temporal_fluctuation
from .numerics import Grid1D, PhaseGrid
from .uncertainty import PAIRS, uncertainty_report
from .wavefunction import (
    PhaseWaveFunction,
    make_free_particle,
    make_gaussian_packet,
    plateau_mask,
    sample_random_state,
    time_sliced,
)

EPS = np.finfo(float).eps

DEFAULT_TOLERANCES = {
    "quantize_residual": 1e-10,
    "quantize_analytic": 1e-8,
    "discriminant": 1e-9,
    "product_slack": 1e-6,
    "b_identity": 1e-6,
    "b_routes": 1e-6,
    "c_consistency": 1e-6,
    "commutator": 1e-7,
    "order_low": 3.5,
    "order_high": 4.5,
    "fundamental": 1e-7,
    "operator_identity": 1e-12,
    "fluctuation_identity": 4 * EPS,
}


@dataclass(frozen=True)
class Check:
    """One named comparison ``value <relation> bound``."""

    name: str
    value: float
    bound: float
    passed: Optional[bool]
    relation: str = "<="

    def to_dict(self) -> dict:
        return {"name": self.name, "value": self.value, "bound": self.bound, "relation": self.relation, "pass": self.passed}


def check_le(name: str, value: float, bound: float) -> Check:
    value = float(value)
    return Check(name, value, float(bound), bool(value <= bound), "<=")


def check_ge(name: str, value: float, bound: float) -> Check:
    value = float(value)
    return Check(name, value, float(bound), bool(value >= bound), ">=")


def check_between(name: str, value: float, low: float, high: float) -> Check:
    value = float(value)
    return Check(name, value, [float(low), float(high)], bool(low <= value <= high), "in")


def report_only(name: str, value) -> Check:
    return Check(name, value, None, None, "report")


@dataclass
class TaskResult:
    task: str
    checks: List[Check] = field(default_factory=list)
    data: Dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed is not False for c in self.checks)

    def to_dict(self) -> dict:
        return {"task": self.task, "checks": [c.to_dict() for c in self.checks], "data": self.data, "passed": self.passed}


def worker_count() -> int:
    """Worker cap from ``PHASEQM_THREADS`` (or ``TOOL_THREADS``), else the CPU count."""
    for var in ("PHASEQM_THREADS", "TOOL_THREADS"):
        raw = os.environ.get(var)
        if raw:
            try:
                n = int(raw)
            except ValueError:
                raise ConfigError(f"{var} must be a positive integer (got {raw!r})") from None
            if n < 1:
                raise ConfigError(f"{var} must be a positive integer (got {raw!r})")
            return n
    return os.cpu_count() or 1


def map_ordered(fn: Callable, items: Sequence) -> list:
    """``[fn(x) for x in items]`` on a thread pool, results in input order."""
    items = list(items)
    workers = min(worker_count(), max(len(items), 1))
    if workers == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# --- builders ---------------------------------------------------------------


def build_grid(spec: dict) -> PhaseGrid:
    try:
        return PhaseGrid.from_dict(spec)
    except TypeError as exc:
        raise ConfigError(f"bad grid specification: {exc}") from None


def build_hamiltonian(spec: dict, hbar: float) -> HamiltonianSpec:
    if "potential" not in spec:
        raise ConfigError("hamiltonian needs a potential")
    return HamiltonianSpec.from_dict({**spec, "hbar": hbar})


def build_state(state: dict, grid: PhaseGrid, hbar: float, dt: Optional[float] = None) -> PhaseWaveFunction:
    """Construct the configured state; ``dt`` overrides ``state.slices.dt``."""
    gen = state.get("generator")
    t0 = float(state.get("t", 0.0))
    try:
        if gen == "gaussian":
            kw = dict(
                center_x=float(state.get("center_x", 0.0)),
                center_p=float(state.get("center_p", 0.0)),
                sigma_x=float(state["sigma_x"]),
                sigma_p=float(state["sigma_p"]),
                hbar=hbar,
                mass=state.get("mass"),
            )
            builder = lambda t: make_gaussian_packet(grid, t=t, **kw)
        elif gen == "free_particle":
            kw = dict(
                p0=float(state["p0"]),
                mass=float(state.get("mass", 1.0)),
                hbar=hbar,
                envelope_width=float(state.get("envelope_width", 0.5)),
            )
            builder = lambda t: make_free_particle(grid, t=t, **kw)
        elif gen == "random":
            psi = sample_random_state(grid, int(state["seed"]), float(state.get("smoothness", 1.0)), hbar)
            if "slices" in state:
                raise ConfigError("random states are stationary snapshots and cannot carry time slices")
            return psi
        else:
            raise ConfigError(f"unknown state generator {gen!r}")
    except KeyError as exc:
        raise ConfigError(f"state generator {gen!r} is missing parameter {exc.args[0]!r}") from None
    slices = state.get("slices")
    if slices is None:
        return builder(t0)
    step = float(slices["dt"]) if dt is None else dt
    return time_sliced(builder, t0, step, int(slices.get("count", 5)))


def _tol(cfg: RunConfig, key: str) -> float:
    return float(cfg.tolerances.get(key, DEFAULT_TOLERANCES[key]))


def _config_state(cfg: RunConfig, task: str, grid: Optional[PhaseGrid] = None, dt: Optional[float] = None) -> PhaseWaveFunction:
    grid = grid or build_grid(cfg.lookup(task, "grid"))
    return build_state(cfg.lookup(task, "state"), grid, cfg.hbar, dt)


# --- quantize -----------------------------------------------------------------


def analytic_levels(H: HamiltonianSpec, n_max: int) -> Optional[np.ndarray]:
    """Closed-form ``I(E) = n h`` levels where they exist."""
    n = np.arange(1, n_max + 1, dtype=float)
    pot = H.potential
    if isinstance(pot, Harmonic):
        return n * H.hbar * pot.omega
    if isinstance(pot, Box):
        return n**2 * H.h**2 / (8.0 * H.mass * pot.length**2)
    return None


def run_quantize(cfg: RunConfig) -> TaskResult:
    H = build_hamiltonian(cfg.lookup("quantize", "hamiltonian"), cfg.hbar)
    n_max = cfg.section("quantize").get("n_max", 10)
    rel_tol = _tol(cfg, "quantize_residual")
    res = bohr_sommerfeld_levels(H, n_max, rel_tol)
    checks = [
        check_le("max relative residual |I(E_n) - n h| / (n h)", max(lv.residual / (lv.n * H.h) for lv in res.levels), rel_tol),
    ]
    data = {
        "convention": res.convention,
        "hamiltonian": H.to_dict(),
        "levels": [{"n": lv.n, "energy": lv.energy, "action": lv.action, "residual": lv.residual} for lv in res.levels],
    }
    exact = analytic_levels(H, n_max)
    if exact is not None:
        rel = np.abs(res.energies - exact) / exact
        checks.append(check_le("max relative error vs closed form", rel.max(), _tol(cfg, "quantize_analytic")))
        data["closed_form"] = exact.tolist()
    if isinstance(H.potential, Harmonic):
        data["note"] = "I(E) = n h gives E_n = n hbar omega; textbook WKB with the Maslov index gives (n + 1/2) hbar omega"
    return TaskResult("quantize", checks, data)


# --- uncertainty ----------------------------------------------------------------

_DEFAULT_PAIR = {"xp": "x-p", "tE": "E-t", "phiL": "phi-L"}
_CONJ_SQUARED = {"x-p": "momentum", "E-t": "energy", "phi-L": "angular_momentum"}


def conjugate_square_mean(psi: PhaseWaveFunction, pair: str) -> float:
    """``<conj^2>`` from the operator applied twice."""
    op = ops.QuantumOperator(_CONJ_SQUARED[pair], psi.hbar, power=2)
    return ops.mean_value(op, psi).value


def uncertainty_checks(psi: PhaseWaveFunction, pair: str, tol: Callable[[str], float], perturb_B: float = 0.0):
    """Checks for one state; ``perturb_B`` shifts B for fault injection."""
    rep = uncertainty_report(psi, pair)
    hb = psi.hbar
    B = rep.B + perturb_B
    conj2 = conjugate_square_mean(psi, pair)
    c_rel = abs(hb**2 * rep.C - conj2) / abs(conj2)
    checks = [
        check_le("discriminant B^2 - 4AC", B**2 - 4 * rep.A * rep.C, tol("discriminant")),
        check_ge("product / (hbar/2)", rep.product / rep.bound, 1.0 - tol("product_slack")),
        check_le("|B + 1|", abs(B + 1.0), tol("b_identity")),
        check_le("|B - B_commutator|", abs(B - rep.B_commutator), tol("b_routes")),
        check_le("|hbar^2 C - <conj^2>| / <conj^2>", c_rel, tol("c_consistency")),
    ]
    return rep, checks


def run_uncertainty(cfg: RunConfig) -> TaskResult:
    psi = _config_state(cfg, "uncertainty")
    pair = cfg.section("uncertainty").get("pair", _DEFAULT_PAIR[psi.grid.kind])
    if pair not in PAIRS:
        raise ConfigError(f"uncertainty.pair must be one of {sorted(PAIRS)}")
    rep, checks = uncertainty_checks(psi, pair, lambda k: _tol(cfg, k))
    data = rep.to_dict(psi)
    # the h-cell view, kept apart from the hbar/2 comparison above
    data["h_cell_view"] = {"h": 2 * math.pi * psi.hbar, "product_over_h": rep.product / (2 * math.pi * psi.hbar)}
    return TaskResult("uncertainty", checks, data)


# --- commutators --------------------------------------------------------------


@dataclass(frozen=True)
class CommutatorCase:
    """A canonical pair and the resolution knob refined for convergence."""

    label: str
    coordinate: str
    operator: str
    refine: str  # 'a', 'b' or 'dt'


def commutator_cases(psi: PhaseWaveFunction) -> List[CommutatorCase]:
    kind = psi.grid.kind
    if kind == "xp":
        cases = [CommutatorCase("(x, p_op)", "x", "momentum", "a"), CommutatorCase("(p, x_op)", "p", "position", "b")]
        if psi.time_slices:
            cases.append(CommutatorCase("(t, E_op) time-sliced", "t", "energy", "dt"))
        return cases
    if kind == "tE":
        return [CommutatorCase("(t, E_op)", "t", "energy", "a"), CommutatorCase("(E, t_op)", "E", "time", "b")]
    if not psi.grid.axis_a.periodic:
        raise DomainError("angle commutator needs a periodic angle axis")
    return [CommutatorCase("(phi, L_op)", "phi", "angular_momentum", "a")]


def coarsen(grid: PhaseGrid, axis: str, factor: int) -> PhaseGrid:
    g = grid.axis(axis)
    if (g.count - 1) % factor:
        raise ConfigError(f"axis {axis} count {g.count} cannot be coarsened by {factor}")
    new = Grid1D(g.lower, g.upper, (g.count - 1) // factor + 1, g.periodic)
    return replace(grid, axis_a=new) if axis == "a" else replace(grid, axis_b=new)


def convergence_orders(residuals: Sequence[float]) -> List[float]:
    """``log2`` of successive residual ratios (coarse to fine)."""
    return [math.log2(residuals[i] / residuals[i + 1]) for i in range(len(residuals) - 1)]


def commutator_checks(
    case: CommutatorCase,
    make: Callable[[int], PhaseWaveFunction],
    tol: Callable[[str], float],
    convergence: bool = True,
) -> tuple:
    """Residual at the reference ``make(1)`` and orders over coarsenings 4, 2, 1."""
    factors = (4, 2, 1) if convergence else (1,)
    residuals = []
    for f in factors:
        psi = make(f)
        op = ops.QuantumOperator(case.operator, psi.hbar)
        residuals.append(ops.commutator_residual(case.coordinate, op, psi)[1])
    checks = [check_le(f"{case.label} residual max-norm", residuals[-1], tol("commutator"))]
    orders = convergence_orders(residuals) if convergence else []
    for i, p in enumerate(orders):
        checks.append(check_between(f"{case.label} observed order, refinement {i + 1}", p, tol("order_low"), tol("order_high")))
    return checks, {"label": case.label, "coarsening": list(factors), "residuals": residuals, "orders": orders}


def run_commutators(cfg: RunConfig) -> TaskResult:
    psi = _config_state(cfg, "commutators")
    grid = psi.grid
    convergence = bool(cfg.section("commutators").get("convergence", False))
    checks, series = [], []
    for case in commutator_cases(psi):
        if case.refine == "dt":
            make = lambda f: _config_state(cfg, "commutators", grid, dt=psi.dt * f)
        else:
            make = lambda f, ax=case.refine: psi if f == 1 else _config_state(cfg, "commutators", coarsen(grid, ax, f))
        c, s = commutator_checks(case, make, lambda k: _tol(cfg, k), convergence)
        checks += c
        series.append(s)
    return TaskResult("commutators", checks, {"grid": grid.to_dict(), "pairs": series})


# --- fundamental equation -------------------------------------------------


def _is_free(H: HamiltonianSpec) -> bool:
    return isinstance(H.potential, Polynomial) and not any(H.potential.coefficients)


def fundamental_checks(psi: PhaseWaveFunction, H: HamiltonianSpec, tol: Callable[[str], float]) -> tuple:
    free = _is_free(H)
    region = plateau_mask(psi) if psi.provenance.get("generator") == "free_particle" else None
    if region is not None and not region.any():
        raise DomainError("free-particle envelope has no flat interior on this grid")
    _, resid = ops.fundamental_equation_residual(psi, H, region)
    identity = float(np.max(np.abs(ops.hamiltonian_apply(psi, H) - ops.fundamental_rhs(psi, H))))
    name = "E_op psi - (T + U) psi max-norm" + (" on the flat envelope" if region is not None else "")
    checks = [
        check_le(name, resid, tol("fundamental")) if free else report_only(name, resid),
        check_le("(T + U) psi vs 1/2 (dH/dp p_op - dH/dq q_op) psi", identity, tol("operator_identity")),
    ]
    data = {
        "residual": resid,
        "identity": identity,
        "free_particle": free,
        "mean_T": ops.mean_value(ops.kinetic(H), psi).value,
        "mean_U": ops.mean_value(ops.potential(H), psi).value,
    }
    return checks, data


def run_fundamental(cfg: RunConfig) -> TaskResult:
    psi = _config_state(cfg, "fundamental-residual")
    spec = cfg.lookup("fundamental-residual", "hamiltonian")
    if spec is not None:
        H = build_hamiltonian(spec, cfg.hbar)
    else:
        mass = float(cfg.lookup("fundamental-residual", "state").get("mass", 1.0))
        H = HamiltonianSpec(mass, Polynomial((0.0,)), cfg.hbar)
    checks, data = fundamental_checks(psi, H, lambda k: _tol(cfg, k))
    data["hamiltonian"] = H.to_dict()
    return TaskResult("fundamental-residual", checks, data)


# --- fluctuation --------------------------------------------------------------


def fluctuation_checks(ens: PathEnsemble, variant: str, tol: Callable[[str], float]) -> tuple:
    rep = temporal_fluctuation(ens) if variant == "temporal" else ensemble_fluctuation(ens)
    h = 2 * math.pi * ens.hbar
    scale = max(abs(rep.delta_S), np.finfo(float).tiny)
    checks = [
        check_le("|Delta S - delta * Delta conj| / Delta S", abs(rep.delta_S - ens.delta * rep.delta_conj) / scale, tol("fluctuation_identity")),
        check_le("|Delta S - k h| / Delta S", abs(rep.delta_S - rep.k_real * h) / scale, tol("fluctuation_identity")),
        report_only("k (integral multiple of h)", {"k": rep.k_real, "integral": rep.integral_multiple}),
    ]
    return rep, checks


def run_fluctuation(cfg: RunConfig) -> TaskResult:
    sec = cfg.section("fluctuation")
    try:
        ens = PathEnsemble.from_records(sec["members"], sec["n0"], float(sec["delta"]), cfg.hbar)
    except KeyError as exc:
        raise ConfigError(f"fluctuation section is missing {exc.args[0]!r}") from None
    variant = sec.get("variant", "spatial")
    if variant not in ("spatial", "temporal"):
        raise ConfigError("fluctuation.variant must be spatial or temporal")
    rep, checks = fluctuation_checks(ens, variant, lambda k: _tol(cfg, k))
    data = rep.to_dict()
    h = 2 * math.pi * cfg.hbar
    thresholds = sec.get("classicality", {})
    _, regime = classicality_indicator(
        ens.n0 * h / ens.delta, rep.delta_conj, thresholds.get("classical", 100.0), thresholds.get("quantum", 10.0)
    )
    data["regime"] = regime
    if sec.get("minimum_search"):
        m = minimum_fluctuation_search(ens.n0)
        data["minimum_search"] = {
            "ensembles": m.count,
            "min_k_no_classical_weight": str(m.min_no_classical_weight),
            "min_k_any_off_classical": str(m.min_any_off_classical),
        }
    return TaskResult("fluctuation", checks, data)


RUNNERS = {
    "quantize": run_quantize,
    "uncertainty": run_uncertainty,
    "commutators": run_commutators,
    "fundamental-residual": run_fundamental,
    "fluctuation": run_fluctuation,
}


def run_tasks(cfg: RunConfig) -> List[TaskResult]:
    names = list(RUNNERS) if cfg.task == "all" else [cfg.task]
    return map_ordered(lambda name: RUNNERS[name](cfg), names)
