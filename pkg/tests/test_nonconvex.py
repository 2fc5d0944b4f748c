from __future__ import annotations

import math

import numpy as np
import pytest

from ldpkit.convex import support_function
from ldpkit.laws import custom_law
from ldpkit.nonconvex import (
    NonConvexScenario,
    bulk_conjugate_closed,
    convex_counterpart_equal,
    dual_sup_agree,
    rate_nonconvex,
    rate_nonconvex_with_split,
    solve_system_I,
    solve_system_barI,
)


def random_law3(rng):
    terms = []
    for _ in range(rng.integers(2, 5)):
        direction = tuple(rng.normal(size=3))
        terms.append((rng.uniform(0.3, 2.0), direction, rng.uniform(0.5, 2.0)))
    return custom_law(3, terms)


class TestBulkConjugateClosed:
    def test_zero_at_mean(self):
        assert bulk_conjugate_closed([1, 1, 1, 1, 0]) == 0.0

    def test_linked_components_enforced(self):
        assert bulk_conjugate_closed([1, 1, 2, 1, 0]) == math.inf

    def test_determinant_boundary(self):
        assert bulk_conjugate_closed([1, 1, 1, 1, 1.0]) == math.inf
        assert np.isfinite(bulk_conjugate_closed([1, 1, 1, 1, 0.5]))

    def test_positivity(self):
        assert bulk_conjugate_closed([0, 1, 0, 1, 0]) == math.inf


class TestOneOutlierSystem:
    def test_blocked_when_gap_small(self):
        res = solve_system_barI(1.5, 1.4)
        assert not res.feasible
        assert "1/2" in res.infeasibility_reason

    def test_feasible_when_gap_large(self):
        res = solve_system_barI(3.0, 1.2)
        assert res.feasible
        assert res.witness["x0"] == pytest.approx(0.9, abs=1e-12)

    def test_boundary_case_infeasible(self):
        k2 = 1.7
        res = solve_system_barI(2 * k2 - 1, k2)
        assert not res.feasible

    def test_bad_kappas_rejected(self):
        with pytest.raises(ValueError):
            solve_system_barI(1.2, 1.5)

    def test_probe_point_pinned(self):
        with pytest.raises(ValueError):
            solve_system_barI(2.0, 1.5, zstar=[1, 1, 1.4, 1.5, 0])


class TestTwoOutlierSystem:
    def test_spot_witness(self):
        res = solve_system_I(1.5, 1.4)
        assert res.feasible
        assert res.witness["x0"] == pytest.approx(1 / 9, abs=1e-12)
        assert res.witness["x1"] == pytest.approx(4 / 9, abs=1e-12)

    def test_integer_case(self):
        res = solve_system_I(3.0, 2.0)
        assert res.witness["x0"] == pytest.approx(1 / 3, abs=1e-12)
        assert res.witness["x1"] == pytest.approx(1 / 3, abs=1e-12)

    def test_witness_satisfies_all_equations(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            k2 = rng.uniform(1.05, 3.0)
            k1 = rng.uniform(k2 + 1e-3, k2 + 2.0)
            w = solve_system_I(k1, k2).witness
            assert w["x0"] + w["x1"] + w["x2"] == pytest.approx(1.0, abs=1e-12)
            assert w["x0"] + k1 * w["x1"] + k2 * w["x2"] == pytest.approx(k2, abs=1e-12)
            assert w["r0"] ** 2 + w["eps1"] * w["x1"] * w["y1"] + w["eps2"] * w["x2"] * w[
                "y2"
            ] == pytest.approx(0.0, abs=1e-12)


class TestRate:
    def test_zero_at_limit(self):
        scn = NonConvexScenario(1.5, 1.4, retained=2)
        assert rate_nonconvex(scn, [1, 1, 1, 1, 0]) == pytest.approx(0.0, abs=1e-9)

    def test_probe_finite_iff_two_outliers(self):
        z = [1, 1, 1.4, 1.4, 0]
        assert np.isfinite(rate_nonconvex(NonConvexScenario(1.5, 1.4, retained=2), z))
        assert rate_nonconvex(NonConvexScenario(1.5, 1.4, retained=1), z) == math.inf

    def test_rate_not_above_witness_value(self):
        # Any feasibility witness induces a valid split, so the minimized
        # value can only be at or below the witness objective.
        k1, k2 = 1.5, 1.4
        w = solve_system_I(k1, k2).witness
        witness_value = -0.5 * math.log(w["x0"] * w["y0"])  # simplified objective at z*
        val = rate_nonconvex(NonConvexScenario(k1, k2, retained=2), [1, 1, k2, k2, 0])
        assert val <= witness_value + 1e-9

    def test_split_reconstructs_z(self):
        k1, k2 = 1.5, 1.4
        z = np.array([1, 1, k2, k2, 0.0])
        val, split = rate_nonconvex_with_split(NonConvexScenario(k1, k2), z)
        assert np.isfinite(val)
        u1, v1, u2, v2 = split["u1"], split["v1"], split["u2"], split["v2"]
        r1 = split["eps1"] * math.sqrt(u1 * v1)
        r2 = split["eps2"] * math.sqrt(u2 * v2)
        z0 = z - np.array([u1, v1, k1 * u1, k1 * v1, r1]) - np.array(
            [u2, v2, k2 * u2, k2 * v2, r2]
        )
        total = bulk_conjugate_closed(z0) + 0.5 * (u1 + v1 + u2 + v2)
        assert total == pytest.approx(val, abs=1e-9)

    def test_off_probe_infeasible_direction(self):
        scn = NonConvexScenario(2.0, 1.5, retained=2)
        # components 3-4 below components 1-2 cannot be reached with
        # nonnegative cone points
        assert rate_nonconvex(scn, [1, 1, 0.5, 0.5, 0]) == math.inf

    def test_bad_scenario_rejected(self):
        with pytest.raises(ValueError):
            NonConvexScenario(1.4, 1.5)
        with pytest.raises(ValueError):
            NonConvexScenario(1.5, 1.4, retained=3)


class TestSecondEigenvalueEffect:
    def test_window_property_sample(self):
        rng = np.random.default_rng(6)
        for _ in range(20):
            k2 = rng.uniform(1.1, 3.0)
            k1 = rng.uniform(k2 * 1.001, 2 * k2 - 1)
            assert k1 < 2 * k2 - 1
            assert solve_system_I(k1, k2).feasible
            assert not solve_system_barI(k1, k2).feasible


class TestConvexCounterpart:
    def test_containment_for_random_laws(self):
        rng = np.random.default_rng(10)
        for _ in range(10):
            law = random_law3(rng)
            k2 = rng.uniform(1.05, 2.5)
            k1 = rng.uniform(k2, k2 + 2.0)
            assert convex_counterpart_equal(k1, k2, law)

    def test_equal_kappas_trivially_true(self):
        rng = np.random.default_rng(11)
        assert convex_counterpart_equal(2.0, 2.0, random_law3(rng))

    def test_reversed_kappas_rejected(self):
        rng = np.random.default_rng(12)
        with pytest.raises(ValueError):
            convex_counterpart_equal(1.5, 2.0, random_law3(rng))

    def test_dual_sup_value_invariance(self):
        rng = np.random.default_rng(13)
        law = random_law3(rng)
        k2, k1 = 1.4, 2.2
        for _ in range(20):
            direction = rng.normal(size=5)
            assert dual_sup_agree(k1, k2, law, direction)
