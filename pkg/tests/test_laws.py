from __future__ import annotations

import math

import numpy as np
import pytest

from ldpkit.convex import support_function
from ldpkit.laws import (
    ChiSquare1,
    ChiSquarePair,
    GaussCross,
    custom_law,
    law_by_name,
    log_laplace,
    rate_eval,
    sample,
)

ALL_LAWS = [
    ChiSquare1(),
    ChiSquarePair(),
    GaussCross(),
    custom_law(2, [(0.5, (1.0, 0.5), 0.5), (1.5, (-0.3, 1.0), 2.0)]),
]


@pytest.mark.parametrize("law", ALL_LAWS, ids=lambda l: l.name)
def test_transform_vanishes_at_zero(law):
    assert law.log_laplace(np.zeros(law.dim)) == pytest.approx(0.0, abs=1e-14)


def test_chisq1_closed_form():
    law = ChiSquare1()
    assert law.log_laplace([0.25]) == pytest.approx(0.5 * math.log(2), abs=1e-14)
    assert law.log_laplace([0.5]) == math.inf  # boundary is outside the open domain
    assert law.log_laplace([0.7]) == math.inf


def test_chisq_pair_closed_form():
    law = ChiSquarePair()
    assert law.log_laplace([0.1, 0.2]) == pytest.approx(-0.5 * math.log(1 - 0.6), abs=1e-14)
    assert law.log_laplace([0.3, 0.2]) == math.inf


def test_gauss_cross_domain_boundary():
    law = GaussCross()
    assert law.log_laplace([0.5, 0.0, 0.0]) == math.inf
    assert law.log_laplace([0.2, 0.2, 0.0]) == pytest.approx(
        -0.5 * math.log(0.6 * 0.6), abs=1e-14
    )
    # determinant boundary: (1-2a)(1-2b) = c^2
    assert law.log_laplace([0.0, 0.0, 1.0]) == math.inf


def test_dimension_mismatch_rejected():
    with pytest.raises(ValueError):
        log_laplace(ChiSquare1(), [0.1, 0.2])
    with pytest.raises(ValueError):
        rate_eval(GaussCross(), [1.0, 1.0])


def test_chisq1_rate_matches_hand_values():
    law = ChiSquare1()
    assert rate_eval(law, [1.0]) == pytest.approx(0.5, abs=1e-12)
    assert rate_eval(law, [-1.0]) == math.inf
    assert rate_eval(law, [0.0]) == pytest.approx(0.0, abs=1e-12)


def test_gauss_cross_rate_on_and_off_cone():
    law = GaussCross()
    assert rate_eval(law, [1.0, 1.0, 0.0]) == math.inf
    assert rate_eval(law, [1.0, 1.0, 1.0]) == pytest.approx(1.0, abs=1e-12)
    assert rate_eval(law, [1.0, 4.0, -2.0]) == pytest.approx(2.5, abs=1e-12)
    assert rate_eval(law, [0.0, 0.0, 0.0]) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize(
    "law,oracle",
    [
        (ChiSquare1(), lambda z: z[0] / 2 if z[0] >= 0 else math.inf),
        (
            ChiSquarePair(),
            lambda z: z[0] / 2 if (abs(z[0] - z[1]) < 1e-12 and z[0] >= 0) else math.inf,
        ),
    ],
    ids=["chisq1", "chisq_pair"],
)
def test_convex_rate_equals_hand_support_function(law, oracle):
    rng = np.random.default_rng(0)
    for _ in range(50):
        if law.dim == 1:
            z = np.array([rng.uniform(-1, 3)])
        else:
            base = rng.uniform(0, 3)
            z = np.array([base, base]) if rng.random() < 0.7 else rng.uniform(-1, 3, 2)
        got = law.rate_eval(z)
        want = oracle(z)
        if math.isinf(want):
            assert math.isinf(got)
        else:
            assert got == pytest.approx(want, abs=1e-10)


@pytest.mark.parametrize("law", ALL_LAWS, ids=lambda l: l.name)
def test_midpoint_convexity_on_random_segments(law):
    rng = np.random.default_rng(1)
    checked = 0
    while checked < 1000:
        a = rng.uniform(-1.5, 0.6, size=law.dim)
        b = rng.uniform(-1.5, 0.6, size=law.dim)
        fa, fb = law.log_laplace(a), law.log_laplace(b)
        if not (np.isfinite(fa) and np.isfinite(fb)):
            continue
        mid = law.log_laplace((a + b) / 2)
        assert mid <= 0.5 * (fa + fb) + 1e-10
        checked += 1


@pytest.mark.parametrize("law", ALL_LAWS, ids=lambda l: l.name)
def test_gradient_matches_finite_differences(law):
    rng = np.random.default_rng(2)
    for _ in range(10):
        theta = rng.uniform(-0.5, 0.1, size=law.dim)
        if not np.isfinite(law.log_laplace(theta)):
            continue
        g = law.log_laplace_grad(theta)
        h = 1e-6
        for i in range(law.dim):
            e = np.zeros(law.dim)
            e[i] = h
            fd = (law.log_laplace(theta + e) - law.log_laplace(theta - e)) / (2 * h)
            assert g[i] == pytest.approx(fd, rel=1e-5, abs=1e-7)


def test_sampler_basics():
    law = ChiSquare1()
    draws = sample(law, 123, 3)
    assert draws.shape == (3, 1)
    assert np.all(draws >= 0)
    big = sample(law, 99, 100_000)
    assert 0.98 <= big.mean() <= 1.02


def test_sample_determinism():
    law = ChiSquarePair()
    a = sample(law, 7, 10)
    b = sample(law, 7, 10)
    assert np.array_equal(a, b)


def test_gauss_cross_draws_sit_on_cone():
    law = GaussCross()
    draws = sample(law, 5, 1000)
    x, y, r = draws[:, 0], draws[:, 1], draws[:, 2]
    assert np.all(x >= 0) and np.all(y >= 0)
    assert np.max(np.abs(r * r - x * y) / np.maximum(1.0, x * y)) < 1e-12
    # every draw has zero rate up to the cone tolerance used by rate_eval
    assert all(np.isfinite(law.rate_eval(d)) for d in draws[:50])


def test_chisq1_tilted_mean_matches_gradient():
    law = ChiSquare1()
    theta = np.array([0.2])
    draws = law.tilted_sample(theta, 200_000, seed=11)
    expect = law.log_laplace_grad(theta)[0]  # 1/(1-2t) = 5/3
    sd = math.sqrt(law.log_laplace_hess(theta)[0, 0] / draws.size)
    assert abs(draws.mean() - expect) < 3 * sd
    with pytest.raises(ValueError):
        law.tilted_sample([0.6], 10)


def test_gauss_cross_tilted_mean_matches_gradient():
    law = GaussCross()
    theta = np.array([0.1, -0.2, 0.15])
    draws = law.tilted_sample(theta, 300_000, seed=4)
    expect = law.log_laplace_grad(theta)
    hess = law.log_laplace_hess(theta)
    sds = np.sqrt(np.diag(hess) / draws.shape[0])
    assert np.all(np.abs(draws.mean(axis=0) - expect) < 4 * sds)


def test_custom_law_transform_and_sampler():
    law = custom_law(1, [(0.5, (1.0,), 0.5)], name="square")  # same law as chisq1
    ref = ChiSquare1()
    for t in (-1.0, 0.0, 0.25, 0.49):
        assert law.log_laplace([t]) == pytest.approx(ref.log_laplace([t]), abs=1e-13)
    assert law.mean[0] == pytest.approx(1.0, abs=1e-13)
    draws = law.sample(100_000, seed=2)
    assert abs(draws.mean() - 1.0) < 0.02
    tilted = law.tilted_sample([0.25], 100_000, seed=3)
    assert abs(tilted.mean() - 2.0) < 0.05


def test_custom_law_rate_is_domain_support():
    law = custom_law(2, [(1.0, (1.0, 0.0), 1.0), (2.0, (0.5, 1.0), 2.0)])
    rng = np.random.default_rng(8)
    for _ in range(25):
        z = rng.normal(size=2)
        assert law.rate_eval(z) == support_function(law.domain, z)


def test_registry():
    assert law_by_name("chisq1").name == "chisq1"
    with pytest.raises(ValueError):
        law_by_name("cauchy")
