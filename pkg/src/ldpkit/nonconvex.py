"""Non-convex pipeline: cross-moment particles with two leading outlier
weights.

The particle is (X^2, Y^2, XY), whose scaled rate is (x + y)/2 plus the
indicator of the cone r = +-sqrt(xy).  With the 5x3 weight map and the
array (kappa1, kappa2, 1, 1, ...), the rate of the weighted mean is an
infimum over splits of z into a bulk part and one cone point per retained
outlier.  At the probe z* = (1, 1, kappa2, kappa2, 0) the split exists for
two retained outliers but not for one whenever kappa1 < 2 kappa2 - 1: the
second outlier weight visibly changes the rate, unlike in the convex case.

The bulk conjugate has the closed form (x + y)/2 - 1 - log(xy - r^2)/2 on
{x > 0, y > 0, x' = x, y' = y, r^2 < xy}; the additive constant makes it
vanish at the almost-sure limit (1, 1, 1, 1, 0), as any rate must.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .convex import domain_subset, pullback_domain, support_function
from .engine import second_eigen_weights
from .laws import ParticleLaw

EQ_TOL = 1e-10  # witness assignments must satisfy the systems this tightly
SIGN_BRANCHES = ((-1.0, 1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, -1.0))


@dataclass(frozen=True)
class NonConvexScenario:
    """Two retained outlier weights over a bulk of ones."""

    kappa1: float
    kappa2: float
    retained: int = 2

    def __post_init__(self):
        if not (1.0 < self.kappa2 < self.kappa1):
            raise ValueError("need 1 < kappa2 < kappa1")
        if self.retained not in (1, 2):
            raise ValueError("retained outlier count must be 1 or 2")


@dataclass(frozen=True, eq=False)
class FeasibilityResult:
    feasible: bool
    witness: dict[str, float] | None = None
    infeasibility_reason: str = ""


def bulk_conjugate_closed(z, tol: float = 1e-9) -> float:
    """Closed-form conjugate of the bulk cross-moment transform."""
    x, y, xp, yp, r = (float(v) for v in z)
    scale = max(1.0, abs(x), abs(y))
    if x <= 0.0 or y <= 0.0:
        return np.inf
    if abs(xp - x) > tol * scale or abs(yp - y) > tol * scale:
        return np.inf
    det = x * y - r * r
    if det <= 0.0:
        return np.inf
    return 0.5 * (x + y) - 1.0 - 0.5 * np.log(det)


def _outlier_image(kappa: float, u: float, v: float, r: float) -> np.ndarray:
    """f(kappa) applied to the cone point (u, v, r)."""
    return np.array([u, v, kappa * u, kappa * v, r])


def _minimize_two(z: np.ndarray, k1: float, k2: float, starts: int, seed: int):
    """Pattern-descent minimum over two-outlier splits; (value, split|None).

    The linked components pin (u2, v2) given (u1, v1); the remaining box is
    searched from ``starts`` random seeds plus a coarse grid, separately for
    each sign branch of the two cone points.  The result is an upper bound
    on the true infimum (certified exactly when it is +inf).
    """
    dx, dy = z[2] - z[0], z[3] - z[1]
    u1_max = dx / (k1 - 1.0)
    v1_max = dy / (k1 - 1.0)
    if u1_max < -1e-12 or v1_max < -1e-12:
        return np.inf, None
    u1_max, v1_max = max(u1_max, 0.0), max(v1_max, 0.0)

    def follower(u1: float, v1: float) -> tuple[float, float]:
        return (dx - (k1 - 1.0) * u1) / (k2 - 1.0), (dy - (k1 - 1.0) * v1) / (k2 - 1.0)

    def objective(u1: float, v1: float, s1: float, s2: float) -> float:
        if u1 < 0.0 or v1 < 0.0:
            return np.inf
        u2, v2 = follower(u1, v1)
        if u2 < 0.0 or v2 < 0.0:
            return np.inf
        r1 = s1 * np.sqrt(u1 * v1)
        r2 = s2 * np.sqrt(u2 * v2)
        z0 = z - _outlier_image(k1, u1, v1, r1) - _outlier_image(k2, u2, v2, r2)
        return bulk_conjugate_closed(z0) + 0.5 * (u1 + v1 + u2 + v2)

    rng = np.random.default_rng(seed)
    grid = np.linspace(0.0, 1.0, 9)
    best_val, best_split = np.inf, None
    for s1, s2 in SIGN_BRANCHES:
        seeds = [(a * u1_max, b * v1_max) for a in grid for b in grid]
        seeds += [
            (rng.uniform(0.0, u1_max) if u1_max else 0.0,
             rng.uniform(0.0, v1_max) if v1_max else 0.0)
            for _ in range(starts)
        ]
        pool = [(objective(u, v, s1, s2), u, v) for u, v in seeds]
        pool = [p for p in pool if np.isfinite(p[0])]
        if not pool:
            continue
        f0, u, v = min(pool)
        step = 0.25 * max(u1_max, v1_max, 1e-3)
        while step > 1e-10:
            moved = False
            for du, dv in ((step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step)):
                cand = objective(u + du, v + dv, s1, s2)
                if cand < f0 - 1e-15:
                    u, v, f0, moved = u + du, v + dv, cand, True
            if not moved:
                step *= 0.5
        if f0 < best_val:
            u2, v2 = follower(u, v)
            best_val = f0
            best_split = {
                "u1": u, "v1": v, "u2": u2, "v2": v2,
                "eps1": s1, "eps2": s2,
            }
    return best_val, best_split


def rate_nonconvex(scenario: NonConvexScenario, z, starts: int = 32, seed: int = 0) -> float:
    """Rate at z for the retained-outlier count of the scenario; +inf when
    no feasible split exists."""
    value, _ = rate_nonconvex_with_split(scenario, z, starts=starts, seed=seed)
    return value


def rate_nonconvex_with_split(
    scenario: NonConvexScenario, z, starts: int = 32, seed: int = 0
):
    z = np.asarray(z, dtype=float)
    if z.shape != (5,):
        raise ValueError("z must be a 5-vector")
    k1, k2 = scenario.kappa1, scenario.kappa2
    if scenario.retained == 2:
        return _minimize_two(z, k1, k2, starts, seed)
    dx, dy = z[2] - z[0], z[3] - z[1]
    u1 = dx / (k1 - 1.0)
    v1 = dy / (k1 - 1.0)
    if u1 < -1e-12 or v1 < -1e-12:
        return np.inf, None
    u1, v1 = max(u1, 0.0), max(v1, 0.0)
    best_val, best_split = np.inf, None
    for s1 in (-1.0, 1.0):
        r1 = s1 * np.sqrt(u1 * v1)
        z0 = z - _outlier_image(k1, u1, v1, r1)
        val = bulk_conjugate_closed(z0) + 0.5 * (u1 + v1)
        if val < best_val:
            best_val = val
            best_split = {"u1": u1, "v1": v1, "eps1": s1}
    return best_val, best_split


def solve_system_barI(kappa1: float, kappa2: float, zstar=None) -> FeasibilityResult:
    """Feasibility of the one-outlier split at the probe point.

    The linear equations force x0 = y0 = (kappa1 - kappa2)/(kappa1 - 1) and
    the strict cross-term constraint x1 y1 < x0 y0 then demands x0 > 1/2.
    """
    _check_kappas(kappa1, kappa2)
    z = _probe(kappa1, kappa2, zstar)
    x0 = (kappa1 - kappa2) / (kappa1 - 1.0)
    x1 = (kappa2 - 1.0) / (kappa1 - 1.0)
    if x0 <= 0.5:
        return FeasibilityResult(
            False,
            None,
            f"forced x0 = (k1-k2)/(k1-1) = {x0:.6g} <= 1/2, so x1 y1 < x0 y0 fails",
        )
    w = {"x0": x0, "y0": x0, "x1": x1, "y1": x1}
    _assert_close(w["x0"] + w["x1"], z[0])
    _assert_close(w["x0"] + kappa1 * w["x1"], z[2])
    return FeasibilityResult(True, w)


def solve_system_I(kappa1: float, kappa2: float, zstar=None) -> FeasibilityResult:
    """Closed-form witness of the two-outlier split at the probe point."""
    _check_kappas(kappa1, kappa2)
    z = _probe(kappa1, kappa2, zstar)
    den = kappa1 + kappa2 - 2.0
    x0 = (kappa1 - kappa2) / den
    x1 = (kappa2 - 1.0) / den
    w = {
        "x0": x0, "y0": x0, "r0": 0.0,
        "x1": x1, "y1": x1, "x2": x1, "y2": x1,
        "eps1": -1.0, "eps2": 1.0,
    }
    checks = [
        (w["x0"] + w["x1"] + w["x2"], z[0]),
        (w["y0"] + w["y1"] + w["y2"], z[1]),
        (w["x0"] + kappa1 * w["x1"] + kappa2 * w["x2"], z[2]),
        (w["y0"] + kappa1 * w["y1"] + kappa2 * w["y2"], z[3]),
        (w["r0"] ** 2 + w["eps1"] * w["x1"] * w["y1"] + w["eps2"] * w["x2"] * w["y2"], 0.0),
    ]
    for got, want in checks:
        _assert_close(got, want)
    positive = all(w[k] > 0.0 for k in ("x0", "y0", "x1", "y1", "x2", "y2"))
    if not positive or w["r0"] ** 2 > w["x0"] * w["y0"]:
        return FeasibilityResult(False, None, "closed-form assignment violates positivity")
    return FeasibilityResult(True, w)


def _probe(kappa1: float, kappa2: float, zstar) -> np.ndarray:
    z = (
        np.array([1.0, 1.0, kappa2, kappa2, 0.0])
        if zstar is None
        else np.asarray(zstar, dtype=float)
    )
    expected = np.array([1.0, 1.0, kappa2, kappa2, 0.0])
    if not np.allclose(z, expected, atol=1e-12):
        raise ValueError("the feasibility systems are specific to z* = (1,1,k2,k2,0)")
    return z


def _check_kappas(kappa1: float, kappa2: float) -> None:
    if not (1.0 < kappa2 < kappa1):
        raise ValueError("need 1 < kappa2 < kappa1")


def _assert_close(got: float, want: float) -> None:
    if abs(got - want) > EQ_TOL * max(1.0, abs(want)):
        raise AssertionError(f"witness equation failed: {got} vs {want}")


def convex_counterpart_equal(
    kappa1: float, kappa2: float, law: ParticleLaw, tol: float = 1e-9
) -> bool:
    """In the convex case the second outlier weight never matters.

    Checks D0 ∩ D1 ⊆ D2 by LP, where Di is the tilt domain pulled back
    through the weight map at kappa_i (kappa_0 = 1).  Containment makes the
    dual sup over D0 ∩ D1 ∩ D2 identical to the sup over D0 ∩ D1 for every
    objective, so the two rate functions coincide.
    """
    if not (1.0 < kappa2 <= kappa1):
        raise ValueError("need 1 < kappa2 <= kappa1")
    if law.domain is None:
        raise TypeError("convex counterpart check needs a polyhedral law domain")
    if law.dim != 3:
        raise ValueError("the second-eigenvalue weight map expects a 3-dimensional law")
    f = second_eigen_weights()
    d0 = pullback_domain(law.domain, f(1.0), 5)
    d1 = pullback_domain(law.domain, f(kappa1), 5)
    d2 = pullback_domain(law.domain, f(kappa2), 5)
    return domain_subset(d0.intersect(d1), d2, tol=tol)


def dual_sup_agree(
    kappa1: float, kappa2: float, law: ParticleLaw, direction, tol: float = 1e-9
) -> bool:
    """Support values over D0∩D1 and D0∩D1∩D2 agree for this direction."""
    f = second_eigen_weights()
    d0 = pullback_domain(law.domain, f(1.0), 5)
    d1 = pullback_domain(law.domain, f(kappa1), 5)
    d2 = pullback_domain(law.domain, f(kappa2), 5)
    a = support_function(d0.intersect(d1), direction)
    b = support_function(d0.intersect(d1, d2), direction)
    if np.isinf(a) and np.isinf(b):
        return True
    return abs(a - b) <= tol * max(1.0, abs(a))
