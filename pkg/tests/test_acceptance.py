"""Acceptance criteria at their pinned tolerances, one PASS/FAIL line each.

The checks themselves live in :mod:`phaseqm.acceptance` so that
``phaseqm selfcheck`` and this suite run the same code. Each test also
asserts that no check carries a bound looser than the pinned one.
"""

import subprocess
import sys

import numpy as np
import pytest

from phaseqm import acceptance

EPS = float(np.finfo(float).eps)

# criterion id -> allowed bounds per relation
PINNED = {
    1: {"<=": {1e-6, 2e-6}, ">=": {1.0}},
    2: {"<=": {1e-9}, ">=": {1.0 - 1e-6}},
    3: {"<=": {1e-6}},
    4: {"<=": {1e-6}},
    5: {"<=": {1e-8, 1e-10}},
    6: {"<=": {1e-7}, "in": {(3.5, 4.5)}},
    7: {"<=": {1e-7}},
    8: {"<=": {1e-7, 1e-12}},
    9: {"<=": {4 * EPS, 0.0}},
    10: {"<=": {0.0}},
}

IDS = [cid for cid, _, _ in acceptance.CRITERIA]


def _bound_key(check):
    return tuple(check.bound) if check.relation == "in" else check.bound


@pytest.mark.parametrize("cid", IDS)
def test_criterion(cid, capsys):
    result = acceptance.run_criterion(cid)
    failed = [c for c in result.checks if c.passed is False]
    with capsys.disabled():
        print(f"\n{'PASS' if result.passed else 'FAIL'} criterion {cid}: {result.name} ({len(result.checks)} checks)")
        for c in failed:
            print(f"    failed: {c.name}: {c.value!r} {c.relation} {c.bound!r}")
    graded = [c for c in result.checks if c.passed is not None]
    assert graded, "criterion has no graded checks"
    for c in graded:
        assert _bound_key(c) in PINNED[cid][c.relation], f"{c.name}: bound {c.bound!r} is not pinned"
    assert not failed


def test_criteria_registry():
    assert IDS == list(range(1, 11))
    assert len(acceptance.criterion_names()) == 10


def test_perturbation_breaks_b_identity():
    assert not acceptance.run_criterion(3, perturb_B=0.1).passed
    assert acceptance.run_criterion(3).passed


def test_selfcheck_reports_are_byte_identical(tmp_path):
    paths = [tmp_path / "first.json", tmp_path / "second.json"]
    for path in paths:
        proc = subprocess.run(
            [sys.executable, "-m", "phaseqm.cli", "selfcheck", "--output", str(path)],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0, proc.stdout + proc.stderr
    first, second = (p.read_bytes() for p in paths)
    assert first == second
    assert b'"passed": true' in first
