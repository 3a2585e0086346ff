import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phaseqm.errors import DomainError
from phaseqm.fluctuation import (
    PathEnsemble,
    classicality_indicator,
    ensemble_fluctuation,
    enumerate_ensembles,
    minimum_fluctuation_search,
    quantized_energies,
    quantized_momenta,
    temporal_fluctuation,
)

H = 2 * math.pi


# --- quantized means --------------------------------------------------------------


def test_quantized_momenta():
    assert quantized_momenta(1.0, [1]) == [H]
    assert quantized_momenta(1.0, [0]) == [0.0]
    assert quantized_momenta(2.0, [3]) == [3 * H / 2]


def test_momentum_inversely_proportional_to_width():
    widths = np.array([0.5, 1.0, 2.0, 4.0])
    p = np.array([quantized_momenta(w, [2])[0] for w in widths])
    assert np.all(p * widths == 2 * H)


def test_quantized_energies():
    assert quantized_energies(1.0, [1]) == [H]
    assert quantized_energies(0.5, [1, 2], hbar=0.5) == [2 * math.pi, 4 * math.pi]


@pytest.mark.parametrize("fn", [quantized_momenta, quantized_energies])
def test_quantized_means_need_positive_interval(fn):
    with pytest.raises(DomainError):
        fn(0.0, [1])


# --- ensembles ------------------------------------------------------------------


def test_definite_state_has_no_fluctuation():
    rep = ensemble_fluctuation(PathEnsemble(5, ((5, 1.0),), 1.0))
    assert rep.delta_S == 0.0 and rep.delta_conj == 0.0
    assert rep.integral_multiple and rep.k_nearest == 0
    assert math.isinf(rep.classicality_ratio)
    assert rep.to_dict()["classicality_ratio"] == "inf"


def test_symmetric_pair_gives_one_quantum():
    rep = ensemble_fluctuation(PathEnsemble(5, ((4, 0.5), (6, 0.5)), 1.0))
    assert rep.k_real == 1.0 and rep.integral_multiple
    assert rep.delta_S == pytest.approx(H, rel=1e-15)
    assert rep.delta_S == pytest.approx(1.0 * rep.delta_conj, rel=1e-15)


def test_asymmetric_ensemble_is_not_integral():
    rep = ensemble_fluctuation(PathEnsemble(5, ((6, 0.3), (7, 0.7)), 2.0))
    assert rep.k_real == pytest.approx(1.7, abs=1e-15)
    assert not rep.integral_multiple
    assert rep.k_nearest == 2


def test_fraction_weights_are_exact():
    ens = PathEnsemble(3, ((1, Fraction(1, 3)), (3, Fraction(1, 3)), (6, Fraction(1, 3))), 0.7)
    rep = ensemble_fluctuation(ens)
    assert rep.k_real == 5 / 3
    assert not rep.integral_multiple
    ok = ensemble_fluctuation(PathEnsemble(3, ((1, Fraction(1, 2)), (5, Fraction(1, 2))), 0.7))
    assert ok.integral_multiple and ok.k_nearest == 2


@settings(max_examples=100, deadline=None)
@given(
    st.integers(0, 30),
    st.lists(st.tuples(st.integers(0, 40), st.floats(0.01, 1.0)), min_size=1, max_size=8),
    st.floats(0.05, 20.0),
    st.floats(0.1, 3.0),
)
def test_delta_s_equals_width_times_spread(n0, raw, delta, hbar):
    total = sum(w for _, w in raw)
    ens = PathEnsemble(n0, tuple((n, w / total) for n, w in raw), delta, hbar)
    rep = ensemble_fluctuation(ens)
    scale = max(rep.delta_S, np.finfo(float).tiny)
    assert abs(rep.delta_S - delta * rep.delta_conj) <= 4 * np.finfo(float).eps * scale
    assert abs(rep.delta_S - rep.k_real * 2 * math.pi * hbar) <= 4 * np.finfo(float).eps * scale


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10), st.integers(0, 10), st.integers(1, 20))
def test_shift_invariance(n0, k, d):
    ens = PathEnsemble(n0, ((n0, 0.25), (n0 + d, 0.75)), 1.0)
    a, b = ensemble_fluctuation(ens), ensemble_fluctuation(ens.shifted(k))
    assert a.k_real == b.k_real and a.delta_S == b.delta_S


@pytest.mark.parametrize(
    "n0, members, delta",
    [
        (5, (), 1.0),
        (-1, ((1, 1.0),), 1.0),
        (1.5, ((1, 1.0),), 1.0),
        (1, ((-1, 1.0),), 1.0),
        (1, ((1, -0.5), (2, 1.5)), 1.0),
        (1, ((1, 0.5),), 1.0),
        (1, ((1, 1.0),), 0.0),
    ],
)
def test_invalid_ensembles(n0, members, delta):
    with pytest.raises(DomainError):
        PathEnsemble(n0, members, delta)


def test_from_json_accepts_fractions_and_floats():
    text = json.dumps([{"n": 4, "weight": "1/4"}, {"n": 6, "weight": "3/4"}])
    ens = PathEnsemble.from_json(text, 5, 1.0)
    assert ens.members == ((4, Fraction(1, 4)), (6, Fraction(3, 4)))
    assert ensemble_fluctuation(ens).integral_multiple
    floats = PathEnsemble.from_json('[{"n": 5, "weight": 1.0}]', 5, 1.0)
    assert ensemble_fluctuation(floats).delta_S == 0.0


# --- temporal variant -------------------------------------------------------------


def test_temporal_variant():
    definite = temporal_fluctuation(PathEnsemble(2, ((2, 1.0),), 1.0))
    assert definite.delta_S == 0.0 and definite.variant == "temporal"
    pair = temporal_fluctuation(PathEnsemble(2, ((1, 0.5), (3, 0.5)), 0.25))
    assert pair.delta_S == pytest.approx(H, rel=1e-15)
    assert pair.delta_conj == pytest.approx(H / 0.25, rel=1e-15)


# --- classicality -----------------------------------------------------------------------


def test_classicality_regimes():
    assert classicality_indicator(3.0, 0.0) == (math.inf, "classical")
    assert classicality_indicator(2.0, 2.0) == (1.0, "quantum")
    assert classicality_indicator(1e4, 1.0)[1] == "classical"
    assert classicality_indicator(50.0, 1.0)[1] == "intermediate"
    assert classicality_indicator(50.0, 1.0, classical=40.0)[1] == "classical"
    assert classicality_indicator(50.0, 1.0, quantum=60.0)[1] == "quantum"
    with pytest.raises(DomainError):
        classicality_indicator(1.0, -1.0)


# --- enumeration -----------------------------------------------------------------------


def test_enumeration_counts():
    # stars and bars: C(denominator + slots - 1, slots - 1)
    assert sum(1 for _ in enumerate_ensembles(5, 3, 8)) == math.comb(14, 6)
    assert sum(1 for _ in enumerate_ensembles(1, 3, 8)) == math.comb(12, 4)
    assert sum(1 for _ in enumerate_ensembles(0, 1, 2)) == 3


def test_enumerated_weights_sum_to_one():
    for members in enumerate_ensembles(2, 2, 4):
        assert sum(w for _, w in members) == 1
        assert all(w > 0 for _, w in members)


def test_minimum_search():
    m = minimum_fluctuation_search()
    assert m.count == 3003
    # with no weight on the classical path the minimum is exactly one quantum
    assert m.min_no_classical_weight == 1
    # with only some weight off the classical path it drops to 1/denominator
    assert m.min_any_off_classical == Fraction(1, 8)
