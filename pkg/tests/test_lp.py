from __future__ import annotations

import numpy as np
import pytest
from scipy.optimize import linprog

from ldpkit import lp


def scipy_max(c, G, h):
    res = linprog(-np.asarray(c), A_ub=G, b_ub=h, bounds=[(None, None)] * len(c), method="highs")
    if res.status == 2:
        return "infeasible", None
    if res.status == 3:
        return "unbounded", None
    assert res.status == 0
    return "optimal", -res.fun


def test_simple_bounded():
    res = lp.solve_max(np.array([1.0]), np.array([[1.0]]), np.array([0.5]))
    assert res.status == "optimal"
    assert res.value == pytest.approx(0.5, abs=1e-12)


def test_unbounded_detected():
    res = lp.solve_max(np.array([1.0]), np.array([[-1.0]]), np.array([0.0]))
    assert res.status == "unbounded"
    assert np.isinf(res.value)


def test_infeasible_detected():
    G = np.array([[1.0], [-1.0]])
    h = np.array([-1.0, -1.0])  # x <= -1 and x >= 1
    res = lp.solve_max(np.array([1.0]), G, h)
    assert res.status == "infeasible"


def test_no_constraints():
    assert lp.solve_max(np.zeros(2), np.zeros((0, 2)), np.zeros(0)).status == "optimal"
    assert lp.solve_max(np.array([1.0, 0.0]), np.zeros((0, 2)), np.zeros(0)).status == "unbounded"


def test_against_scipy_on_boxed_instances():
    rng = np.random.default_rng(5)
    for _ in range(200):
        n = rng.integers(1, 4)
        m = rng.integers(0, 5)
        G = np.round(rng.normal(size=(m, n)), 3)
        h = np.round(rng.uniform(-0.5, 2.0, size=m), 3)
        # Box keeps every instance bounded; feasibility varies.
        G = np.vstack([G, np.eye(n), -np.eye(n)])
        h = np.concatenate([h, np.full(2 * n, 5.0)])
        c = np.round(rng.normal(size=n), 3)
        mine = lp.solve_max(c, G, h)
        status, value = scipy_max(c, G, h)
        assert mine.status == status
        if status == "optimal":
            assert mine.value == pytest.approx(value, abs=1e-7)


def test_strictly_feasible_point():
    G = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, -1.0]])
    h = np.array([1.0, 1.0, 0.5])
    x = lp.strictly_feasible_point(G, h, 2)
    assert x is not None
    assert np.all(G @ x < h)


def test_strictly_feasible_none_for_degenerate():
    # x <= 0 and -x <= 0 pins x = 0: feasible but not strictly.
    G = np.array([[1.0], [-1.0]])
    h = np.array([0.0, 0.0])
    assert lp.strictly_feasible_point(G, h, 1) is None
    assert lp.feasible_point(G, h, 1) is not None
