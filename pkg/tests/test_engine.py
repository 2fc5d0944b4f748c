from __future__ import annotations

import math

import numpy as np
import pytest

from ldpkit.convex import support_function, verify_subgradient
from ldpkit.engine import (
    CertificateError,
    bulk_conjugate,
    bulk_cumulant,
    bulk_cumulant_grad,
    compute_rate,
    outlier_domain,
    partial_mean_rate,
    tilt_domain,
)
from ldpkit.laws import ChiSquare1, ChiSquarePair
from ldpkit.presets import (
    bulk_only_scenario,
    example1_spec,
    example2_spec,
    figure1_scenario,
    two_sided_scenario,
)
from ldpkit.weights import A4FailureError


@pytest.fixture(scope="module")
def fig1():
    return figure1_scenario()


@pytest.fixture(scope="module")
def sect4():
    return two_sided_scenario()


def fig1_expected(z: float) -> float:
    if z <= 0:
        return math.inf
    if z <= 1.5:
        return 0.5 * (z - 1 - math.log(z))
    return 0.5 * (0.5 - math.log(1.5)) + (z - 1.5) / 6.0


class TestTiltDomain:
    def test_scalar_weight_three(self):
        dom = tilt_domain(ChiSquare1(), [[3.0]], 1)
        assert support_function(dom, [1.0]) == pytest.approx(1 / 6, abs=1e-14)

    def test_pair_diag_at_four(self):
        dom = tilt_domain(ChiSquarePair(), [[1.0, 0.0], [0.0, 4.0]], 2)
        # {xi + 4 xi' < 1/2}
        assert dom.contains([0.0, 0.0])
        assert not dom.contains([0.5, 0.0])
        assert support_function(dom, [1.0, 4.0]) == pytest.approx(0.5, abs=1e-12)

    def test_zero_matrix_full_space(self):
        dom = tilt_domain(ChiSquare1(), np.zeros((2, 1)), 2)
        assert dom.k == 0


class TestOutlierDomain:
    def test_figure1(self, fig1):
        D = outlier_domain(fig1)
        assert support_function(D, [1.0]) == pytest.approx(1 / 6, abs=1e-14)

    def test_two_sided(self, sect4):
        D = outlier_domain(sect4)
        assert D.k == 2
        assert support_function(D, [1.0, 4.0]) == pytest.approx(0.5, abs=1e-12)
        assert support_function(D, [1.0, -4.0]) == pytest.approx(0.5, abs=1e-12)

    def test_alternating_raises_with_witness(self):
        with pytest.raises(A4FailureError) as exc:
            outlier_domain(example1_spec())
        assert 1 / 6 < exc.value.witness[0] < 1 / 2


class TestBulkTransform:
    def test_zero(self, sect4):
        assert bulk_cumulant(sect4, [0.0, 0.0]) == 0.0

    def test_two_atom_value(self, sect4):
        assert bulk_cumulant(sect4, [0.25, 0.0]) == pytest.approx(0.5 * math.log(2), abs=1e-14)

    def test_outside_bulk_domain(self, sect4):
        # 1 - 2 xi - 2 M xi' <= 0 at (0.4, 0.11) with M = 1
        assert bulk_cumulant(sect4, [0.4, 0.11]) == math.inf

    def test_gradient_and_subgradient_check(self, sect4):
        lam = np.array([-0.5, -0.25])
        z_star = bulk_cumulant_grad(sect4, lam)
        assert z_star == pytest.approx([8 / 15, -2 / 15], abs=1e-13)
        assert verify_subgradient(lambda l: bulk_cumulant(sect4, l), lam, z_star, tol=1e-6)
        assert not verify_subgradient(lambda l: bulk_cumulant(sect4, l), lam, [1.0, 0.0], tol=1e-6)


class TestBulkConjugate:
    def test_zero_at_mean(self):
        sc = bulk_only_scenario()
        val, lam = bulk_conjugate(sc, [1.0])
        assert val == pytest.approx(0.0, abs=1e-10)
        assert lam[0] == pytest.approx(0.0, abs=1e-8)

    def test_cramer_value(self):
        sc = bulk_only_scenario()
        val, lam = bulk_conjugate(sc, [2.0])
        assert val == pytest.approx(0.5 * (1 - math.log(2)), abs=1e-10)
        assert lam[0] == pytest.approx(0.25, abs=1e-8)

    def test_outside_domain_gives_inf(self, sect4):
        val, lam = bulk_conjugate(sect4, [-1.0, 0.0])
        assert val == math.inf and lam is None

    def test_closed_form_two_atoms(self, sect4):
        # With two symmetric atoms: x/2 - 1/2 - log(x^2 - y^2)/4 on x > |y|.
        rng = np.random.default_rng(7)
        for _ in range(20):
            x = rng.uniform(0.2, 4.0)
            y = rng.uniform(-0.95, 0.95) * x
            val, _ = bulk_conjugate(sect4, [x, y])
            expect = 0.5 * x - 0.5 - 0.25 * math.log(x * x - y * y)
            assert val == pytest.approx(expect, abs=1e-9)


class TestRates:
    def test_figure1_piecewise(self, fig1):
        for z in (0.2, 0.7, 1.0, 1.49, 1.51, 2.0, 4.0):
            rep = compute_rate(fig1, [z], "dual_sup")
            assert rep.value == pytest.approx(fig1_expected(z), abs=1e-9)

    def test_routes_agree_figure1(self, fig1):
        for z in (0.3, 1.0, 1.8, 3.5):
            a = compute_rate(fig1, [z], "dual_sup").value
            b = compute_rate(fig1, [z], "inf_conv").value
            assert a == pytest.approx(b, abs=1e-6)

    def test_sect4_spots(self, sect4):
        assert compute_rate(sect4, [1.0, 0.0], "dual_sup").value <= 1e-8
        rep = compute_rate(sect4, [1.0, -2.0], "dual_sup")
        assert rep.value == pytest.approx(0.25 * math.log(15 / 4), abs=1e-9)
        assert compute_rate(sect4, [-1.0, 0.0], "dual_sup").value == math.inf

    def test_unknown_route_rejected(self, fig1):
        with pytest.raises(ValueError):
            compute_rate(fig1, [1.0], "magic")

    def test_certificate_structure_linear_regime(self, fig1):
        rep = compute_rate(fig1, [2.0], "dual_sup")
        assert rep.certified
        assert rep.lambda_star[0] == pytest.approx(1 / 6, abs=1e-10)
        assert np.linalg.norm(rep.z_star + rep.z_n - np.array([2.0])) < 1e-8
        # value identity with an independently computed bulk conjugate
        g_star, _ = bulk_conjugate(fig1, rep.z_star)
        assert rep.value == pytest.approx(g_star + float(rep.lambda_star @ rep.z_n), abs=1e-9)
        assert rep.z_n[0] == pytest.approx(0.5, abs=1e-8)

    def test_certificate_interior_regime(self, fig1):
        rep = compute_rate(fig1, [1.2], "dual_sup")
        assert rep.certified
        assert np.linalg.norm(rep.z_n) == 0.0
        assert rep.value == pytest.approx(fig1_expected(1.2), abs=1e-10)

    def test_sect4_certificate_wedge(self, sect4):
        z = np.array([1.0, -2.0])
        rep = compute_rate(sect4, z, "dual_sup")
        assert rep.certified
        assert rep.lambda_star == pytest.approx([-0.5, -0.25], abs=1e-8)
        # outlier part along (1, x_min)
        t = rep.z_n[0]
        assert rep.z_n == pytest.approx([t, -4 * t], abs=1e-8)
        assert t == pytest.approx(7 / 15, abs=1e-8)
        D = outlier_domain(sect4)
        assert support_function(D, rep.z_n) == pytest.approx(
            float(rep.lambda_star @ rep.z_n), abs=1e-9
        )

    def test_ray_linearity_from_certificate(self, sect4):
        z = np.array([1.0, -2.0])
        rep = compute_rate(sect4, z, "dual_sup")
        base = compute_rate(sect4, rep.z_star, "dual_sup").value
        slope = float(rep.lambda_star @ rep.z_n)
        for t in (0.5, 1.0, 2.0, 4.0):
            v = compute_rate(sect4, rep.z_star + t * rep.z_n, "dual_sup").value
            assert v - base == pytest.approx(t * slope, abs=1e-6)

    def test_zero_at_limit_mean(self, fig1, sect4):
        for sc in (fig1, sect4):
            assert compute_rate(sc, sc.limit_mean(), "dual_sup").value <= 1e-8

    def test_midpoint_convexity(self, sect4):
        rng = np.random.default_rng(9)
        done = 0
        while done < 40:
            x1, x2 = rng.uniform(0.2, 3.0, 2)
            z1 = np.array([x1, rng.uniform(-3.8, 3.8) * x1])
            z2 = np.array([x2, rng.uniform(-3.8, 3.8) * x2])
            v1 = compute_rate(sect4, z1, "dual_sup").value
            v2 = compute_rate(sect4, z2, "dual_sup").value
            vm = compute_rate(sect4, (z1 + z2) / 2, "dual_sup").value
            assert vm <= 0.5 * (v1 + v2) + 1e-8
            done += 1


class TestPartialMeanRate:
    def test_common_domain_rate(self):
        sc = example2_spec()
        assert partial_mean_rate(sc, [1.0]) == pytest.approx(1 / 8, abs=1e-14)
        assert partial_mean_rate(sc, [-1.0]) == math.inf
        assert partial_mean_rate(sc, [0.0]) == 0.0

    def test_subsequence_rates(self):
        sc = example1_spec()
        assert partial_mean_rate(sc, [1.0], subsequence=0) == pytest.approx(1 / 6, abs=1e-14)
        assert partial_mean_rate(sc, [1.0], subsequence=1) == pytest.approx(1 / 2, abs=1e-14)

    def test_full_sequence_raises_on_instability(self):
        with pytest.raises(A4FailureError):
            partial_mean_rate(example1_spec(), [1.0])
