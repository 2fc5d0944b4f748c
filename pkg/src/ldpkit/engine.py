"""Rate functions for weighted empirical means in the convex case.

Two independent routes compute the same rate:

* ``dual_sup`` maximizes <lam, z> - G(lam) over the outlier tilt domain
  intersected with the domain of the bulk transform G (G is the
  measure-weighted log-Laplace transform of the weighted particle).  The
  maximizer, when attained, yields a certificate splitting z into a bulk
  part z* (the gradient of G at the maximizer) and an outlier part z_n
  lying in the normal cone of the tilt domain.

* ``inf_conv`` searches the splits z = z1 + z2 directly, with z2 ranging
  over the cone where the outlier support function is finite, and the bulk
  conjugate evaluated at z1.

Both are exact optimization problems at desk scale; agreement of the two
routes is the main internal cross-check and part of the acceptance suite.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import lp
from .convex import (
    HalfspaceDomain,
    halfspaces,
    normal_cone,
    pullback_domain,
    support_function,
)
from .laws import ParticleLaw
from .weights import A4FailureError, LimitSets, WeightArraySpec, check_a4, limit_sets

GRAD_TOL = 1e-10
CERT_VALUE_TOL = 1e-6
CERT_SPLIT_TOL = 1e-8


class CertificateError(RuntimeError):
    """A converged dual solution produced an inconsistent certificate."""


@dataclass(frozen=True, eq=False)
class AffineWeights:
    """Matrix weight map f(x) = base + x * slope with closed-form rows."""

    base: np.ndarray
    slope: np.ndarray
    name: str = "affine"

    def __post_init__(self):
        object.__setattr__(self, "base", np.atleast_2d(np.asarray(self.base, dtype=float)))
        object.__setattr__(self, "slope", np.atleast_2d(np.asarray(self.slope, dtype=float)))
        if self.base.shape != self.slope.shape:
            raise ValueError("base and slope shapes differ")

    @property
    def m(self) -> int:
        return self.base.shape[0]

    @property
    def d(self) -> int:
        return self.base.shape[1]

    def __call__(self, x: float) -> np.ndarray:
        return self.base + float(x) * self.slope


def scalar_weights() -> AffineWeights:
    return AffineWeights([[0.0]], [[1.0]], name="scalar")


def pair_diag_weights() -> AffineWeights:
    """f(x) = [[1, 0], [0, x]]: tracks the mean and the x-weighted mean."""
    return AffineWeights([[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.0, 1.0]], name="pair_diag")


def second_eigen_weights() -> AffineWeights:
    """5x3 map pairing plain and x-scaled squares with the cross term."""
    base = [
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0],
        [0.0, 0.0, 1.0],
    ]
    slope = [
        [0.0, 0.0, 0.0],
        [0.0, 0.0, 0.0],
        [1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, 0.0, 0.0],
    ]
    return AffineWeights(base, slope, name="second_eigen")


WEIGHT_BUILTINS = {
    "scalar": scalar_weights,
    "pair_diag": pair_diag_weights,
    "second_eigen": second_eigen_weights,
}


@dataclass(frozen=True, eq=False)
class Scenario:
    """A law, a weight array, and a weight map of matching dimensions."""

    law: ParticleLaw
    array: WeightArraySpec
    weights: AffineWeights
    horizon: int = 10_000
    _cache: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        if self.weights.d != self.law.dim:
            raise ValueError(
                f"weight map has d={self.weights.d} but law has dim {self.law.dim}"
            )
        self._continuity_check()

    @property
    def m(self) -> int:
        return self.weights.m

    def bulk_atoms(self) -> list[tuple[np.ndarray, np.ndarray, float]]:
        """Cached (f(x), f(x)^T, weight) triples over the bulk atoms."""
        if "atoms" not in self._cache:
            self._cache["atoms"] = [
                (self.weights(float(x)), self.weights(float(x)).T.copy(), float(w))
                for x, w in zip(self.array.bulk.atoms, self.array.bulk.weights)
                if w > 0.0
            ]
        return self._cache["atoms"]

    def _continuity_check(self, samples: int = 64) -> None:
        # Sampled modulus of continuity on a bracket holding the support and
        # all track limits; affine maps pass trivially, exotic maps fail loudly.
        vals = [float(a) for a in self.array.bulk.atoms]
        for t in self.array.tracks:
            vals.extend(t.limits)
        lo, hi = min(vals) - 1.0, max(vals) + 1.0
        xs = np.linspace(lo, hi, samples)
        h = (hi - lo) / (8 * samples)
        gap = max(
            float(np.max(np.abs(self.weights(x + h) - self.weights(x)))) for x in xs
        )
        if not np.isfinite(gap) or gap > 1e6 * h:
            raise ValueError("weight map looks discontinuous on the support bracket")

    def limit_sets(self) -> LimitSets:
        if "limit_sets" not in self._cache:
            self._cache["limit_sets"] = limit_sets(self.array, self.weights, self.horizon)
        return self._cache["limit_sets"]

    def bulk_domain(self) -> HalfspaceDomain:
        """Effective domain of the bulk transform, as a halfspace intersection."""
        if "bulk_domain" in self._cache:
            return self._cache["bulk_domain"]
        if self.law.domain is None:
            raise TypeError("bulk domain needs a law with a polyhedral domain")
        doms = [pullback_domain(self.law.domain, y, self.m) for y, _, _ in self.bulk_atoms()]
        normals = np.vstack([d.normals for d in doms]) if doms else np.zeros((0, self.m))
        bounds = np.concatenate([d.bounds for d in doms]) if doms else np.zeros(0)
        dom = halfspaces(normals, bounds, self.m)
        self._cache["bulk_domain"] = dom
        return dom

    def limit_mean(self) -> np.ndarray:
        """Almost-sure limit of the weighted mean: the bulk average of f(x) E[Z]."""
        mu = self.law.mean
        out = np.zeros(self.m)
        for y, _, w in self.bulk_atoms():
            out += w * (y @ mu)
        return out


def tilt_domain(law: ParticleLaw, y, m: int | None = None) -> HalfspaceDomain:
    """Tilts lam for which the y-weighted particle keeps exponential moments.

    This is the preimage of the law's effective domain under lam -> y^T lam.
    """
    y = np.atleast_2d(np.asarray(y, dtype=float))
    if law.domain is None:
        raise TypeError("tilt_domain needs a law with a polyhedral domain")
    return pullback_domain(law.domain, y, m if m is not None else y.shape[0])


def outlier_domain(scenario: Scenario) -> HalfspaceDomain:
    """Common tilt domain of the outlier limits; raises on instability."""
    if "outlier_domain" in scenario._cache:
        cached = scenario._cache["outlier_domain"]
        if isinstance(cached, A4FailureError):
            raise cached
        return cached
    res = check_a4(scenario.limit_sets(), scenario.law, scenario.m)
    if not res.equal:
        err = A4FailureError(res.witness)
        scenario._cache["outlier_domain"] = err
        raise err
    scenario._cache["outlier_domain"] = res.domain
    return res.domain


def class_domain(scenario: Scenario, residue: int) -> HalfspaceDomain:
    """Tilt domain intersected over one residue class of the track limits."""
    key = ("class_domain", residue)
    if key in scenario._cache:
        return scenario._cache[key]
    ls = scenario.limit_sets()
    vals = ls.by_class[residue % len(ls.by_class)]
    doms = [pullback_domain(scenario.law.domain, y, scenario.m) for y in vals]
    normals = np.vstack([d.normals for d in doms]) if doms else np.zeros((0, scenario.m))
    bounds = np.concatenate([d.bounds for d in doms]) if doms else np.zeros(0)
    dom = halfspaces(normals, bounds, scenario.m)
    scenario._cache[key] = dom
    return dom


# ---------------------------------------------------------------------------
# Bulk transform


def bulk_cumulant(scenario: Scenario, lam) -> float:
    """Measure-weighted log-Laplace transform of the weighted particle."""
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (scenario.m,):
        raise ValueError(f"tilt has shape {lam.shape}, expected ({scenario.m},)")
    total = 0.0
    for _, yt, w in scenario.bulk_atoms():
        v = scenario.law.log_laplace(yt @ lam)
        if not np.isfinite(v):
            return np.inf
        total += w * v
    return total


def bulk_cumulant_grad(scenario: Scenario, lam) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    out = np.zeros(scenario.m)
    for y, yt, w in scenario.bulk_atoms():
        out += w * (y @ scenario.law.log_laplace_grad(yt @ lam))
    return out


def bulk_cumulant_hess(scenario: Scenario, lam) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    out = np.zeros((scenario.m, scenario.m))
    for y, yt, w in scenario.bulk_atoms():
        out += w * (y @ scenario.law.log_laplace_hess(yt @ lam) @ yt)
    return out


def _ray_diverges(z: np.ndarray, normals: np.ndarray, open_rows: int) -> bool:
    """Whether sup <lam,z> - G(lam) over the constrained set is +inf.

    Tests the recession directions: a direction with positive alignment to z,
    or one that keeps <z, d> >= 0 while strictly growing the slack of some
    bulk-domain constraint (the transform then drops to -inf like a log).
    """
    m = z.size
    k = normals.shape[0]
    box = np.vstack([np.eye(m), -np.eye(m)])
    box_h = np.ones(2 * m)
    G = np.vstack([normals, box]) if k else box
    h = np.concatenate([np.zeros(k), box_h])
    res = lp.solve_max(z, G, h)
    if res.status == "optimal" and res.value > 1e-9:
        return True
    G2 = np.vstack([G, -z[None, :]])
    h2 = np.concatenate([h, [0.0]])
    for j in range(open_rows):
        res = lp.solve_max(-normals[j], G2, h2)
        if res.status == "optimal" and res.value > 1e-9:
            return True
    return False


def _newton_on_face(
    scenario: Scenario,
    z: np.ndarray,
    start: np.ndarray,
    basis: np.ndarray,
    max_iter: int = 80,
):
    """Maximize <lam,z> - G(lam) over {start + basis u} inside the bulk domain.

    Damped Newton with feasibility backtracking; the transform itself is the
    barrier (it blows up at the boundary).  Returns (value, lam, converged).
    """
    lam = start.copy()

    def val(l):
        g = bulk_cumulant(scenario, l)
        return -np.inf if not np.isfinite(g) else float(z @ l) - g

    f0 = val(lam)
    if not np.isfinite(f0):
        return -np.inf, lam, False
    for _ in range(max_iter):
        grad = z - bulk_cumulant_grad(scenario, lam)
        gu = basis.T @ grad
        if np.linalg.norm(gu) <= GRAD_TOL * (1.0 + np.linalg.norm(z)):
            return val(lam), lam, True
        H = basis.T @ bulk_cumulant_hess(scenario, lam) @ basis
        try:
            du = np.linalg.solve(H + 1e-14 * np.eye(H.shape[0]), gu)
        except np.linalg.LinAlgError:
            du = gu
        step = basis @ du
        t = 1.0
        improved = False
        for _ in range(70):
            cand = lam + t * step
            fc = val(cand)
            if np.isfinite(fc) and fc > f0 + 1e-4 * t * float(gu @ du):
                lam, f0, improved = cand, fc, True
                break
            t *= 0.5
        if not improved:
            grad_ok = np.linalg.norm(gu) <= 1e-7 * (1.0 + np.linalg.norm(z))
            return f0, lam, grad_ok
        if np.linalg.norm(lam) > 1e9:
            return f0, lam, False
    grad = z - bulk_cumulant_grad(scenario, lam)
    ok = np.linalg.norm(basis.T @ grad) <= 1e-7 * (1.0 + np.linalg.norm(z))
    return f0, lam, ok


def _face_start(
    open_dom: HalfspaceDomain,
    closed: HalfspaceDomain | None,
    eq_normals: np.ndarray,
    eq_bounds: np.ndarray,
    m: int,
) -> np.ndarray | None:
    """A point on the face (equalities) strictly inside the open domain and
    weakly inside the closed one, via a margin-maximizing LP."""
    rows, rhs = [], []
    norms = []
    for a, b in zip(open_dom.normals, open_dom.bounds):
        rows.append(a)
        rhs.append(b)
        norms.append(1.0)
    if closed is not None:
        for a, b in zip(closed.normals, closed.bounds):
            rows.append(a)
            rhs.append(b)
            norms.append(0.0)  # may sit on closed boundaries
    for a, b in zip(eq_normals, eq_bounds):
        rows.extend([a, -a])
        rhs.extend([b, -b])
        norms.extend([0.0, 0.0])
    G = np.array(rows) if rows else np.zeros((0, m))
    h = np.array(rhs)
    Gt = np.hstack([G, np.array(norms)[:, None]]) if rows else np.zeros((0, m + 1))
    Gt = np.vstack([Gt, np.concatenate([np.zeros(m), [1.0]])])
    ht = np.concatenate([h, [1.0]])
    c = np.zeros(m + 1)
    c[-1] = 1.0
    res = lp.solve_max(c, Gt, ht)
    if res.status != "optimal" or res.value <= 1e-9:
        return None
    return res.x[:m]


def _null_basis(eq_normals: np.ndarray, m: int) -> np.ndarray:
    if eq_normals.size == 0:
        return np.eye(m)
    _, s, vt = np.linalg.svd(eq_normals)
    rank = int(np.sum(s > 1e-12))
    return vt[rank:].T  # (m, m - rank)


def _maximize(scenario: Scenario, z: np.ndarray, closed: HalfspaceDomain | None):
    """Global max of <lam,z> - G(lam) over (open bulk domain) ∩ (closed set).

    Enumerates the faces of the closed polyhedron (there are at most a
    handful), solves a reduced Newton problem on each, and keeps the best
    feasible result.  Returns (value, lam or None, converged).
    """
    open_dom = scenario.bulk_domain()
    m = scenario.m
    all_normals = open_dom.normals
    if closed is not None and closed.k:
        all_normals = np.vstack([open_dom.normals, closed.normals])
    if _ray_diverges(z, all_normals, open_dom.k):
        return np.inf, None, True

    faces: list[tuple[int, ...]] = [()]
    if closed is not None and closed.k:
        idx = list(range(closed.k))
        faces += [(i,) for i in idx]
        if m >= 2:
            for i in idx:
                for j in idx:
                    if i < j:
                        pair = closed.normals[[i, j]]
                        if np.linalg.matrix_rank(pair, tol=1e-10) == 2:
                            faces.append((i, j))

    best = (-np.inf, None, False)
    for S in faces:
        if closed is not None and S:
            eq_n = closed.normals[list(S)]
            eq_b = closed.bounds[list(S)]
        else:
            eq_n = np.zeros((0, m))
            eq_b = np.zeros(0)
        basis = _null_basis(eq_n, m)
        # Skip faces whose own recession makes the reduced problem unbounded;
        # the constrained optimum then lives on a smaller face.
        if basis.shape[1] and _face_unbounded(z, open_dom, eq_n, m):
            continue
        start = _face_start(open_dom, closed, eq_n, eq_b, m)
        if start is None:
            continue
        start = _seed(scenario, z, start, basis, open_dom, closed)
        val, lam, conv = _newton_on_face(scenario, z, start, basis)
        if closed is not None and not closed.contains(lam, strict=False, tol=1e-9):
            continue
        if val > best[0] + 1e-14 or (val > best[0] - 1e-12 and not best[2] and conv):
            best = (val, lam, conv)
    return best


def _face_unbounded(z, open_dom: HalfspaceDomain, eq_n: np.ndarray, m: int) -> bool:
    rows = [open_dom.normals] if open_dom.k else []
    for a in eq_n:
        rows.extend([a[None, :], -a[None, :]])
    rows.append(np.eye(m))
    rows.append(-np.eye(m))
    G = np.vstack(rows)
    h = np.concatenate(
        [np.zeros(G.shape[0] - 2 * m), np.ones(2 * m)]
    )
    res = lp.solve_max(z, G, h)
    return res.status == "optimal" and res.value > 1e-9


def _seed(scenario, z, start, basis, open_dom, closed, nodes: int = 5):
    """Coarse grid seed around a feasible starting point (best objective node)."""
    if basis.shape[1] == 0:
        return start
    spans = []
    for i in range(basis.shape[1]):
        d = basis[:, i]
        spans.append(
            min(_exit_len(open_dom, closed, start, d), 25.0)
            + min(_exit_len(open_dom, closed, start, -d), 25.0)
        )
    best_v, best_p = -np.inf, start
    grids = [np.linspace(-0.45, 0.45, nodes) for _ in range(basis.shape[1])]
    mesh = np.meshgrid(*grids, indexing="ij")
    offsets = np.stack([g.ravel() for g in mesh], axis=-1)
    for off in offsets:
        p = start + basis @ (off * np.array(spans))
        if not open_dom.contains(p, strict=True):
            continue
        if closed is not None and not closed.contains(p, strict=False, tol=1e-9):
            continue
        g = bulk_cumulant(scenario, p)
        if not np.isfinite(g):
            continue
        v = float(z @ p) - g
        if v > best_v:
            best_v, best_p = v, p
    return best_p


def _exit_len(open_dom, closed, lam0, d) -> float:
    t = np.inf
    for dom in [open_dom] + ([closed] if closed is not None else []):
        for a, b in zip(dom.normals, dom.bounds):
            speed = float(a @ d)
            if speed > 1e-12:
                t = min(t, (b - float(a @ lam0)) / speed)
    return t if np.isfinite(t) else 25.0


def _nonneg(value: float) -> float:
    """Conjugates and rates are >= 0 (the zero tilt is admissible); snap the
    optimizer residue, but never mask a real violation."""
    if value < -1e-7:
        raise CertificateError(f"negative rate value {value}")
    return max(value, 0.0)


def bulk_conjugate(scenario: Scenario, z, warm: dict | None = None):
    """Convex conjugate of the bulk transform: sup <lam,z> - G(lam).

    Returns (value, maximizer); the maximizer is None when the sup is +inf
    (a valid answer for z outside the bulk domain of attraction).  Passing a
    ``warm`` dict across related calls reuses the previous maximizer as the
    Newton start and skips the full solve when it converges.
    """
    z = np.asarray(z, dtype=float)
    if z.shape != (scenario.m,):
        raise ValueError(f"point has shape {z.shape}, expected ({scenario.m},)")
    if warm is not None:
        if "center" not in scenario._cache:
            scenario._cache["center"] = scenario.bulk_domain().strictly_feasible_point()
        start = warm.get("lam")
        if start is None:
            start = scenario._cache["center"]
        val, lam, conv = _newton_on_face(scenario, z, start, np.eye(scenario.m), max_iter=40)
        if conv and np.isfinite(val):
            warm["lam"] = lam
            return _nonneg(val), lam
    val, lam, conv = _maximize(scenario, z, None)
    if np.isinf(val):
        return np.inf, None
    if not conv:
        # Not attained within budget: either the sup sits at infinity (value
        # still finite) or z is on the relative boundary.  Report the value.
        return _nonneg(val), None
    if warm is not None:
        warm["lam"] = lam
    return _nonneg(val), lam


# ---------------------------------------------------------------------------
# Rate reports


@dataclass(frozen=True, eq=False)
class RateReport:
    """Rate value plus, when available, the optimizing tilt and the split
    of z into a bulk part and a normal-cone outlier part."""

    value: float
    route: str
    lambda_star: np.ndarray | None = None
    z_star: np.ndarray | None = None
    z_n: np.ndarray | None = None
    certified: bool = False
    flag: str = ""


def _certify(scenario, D: HalfspaceDomain, z, value, lam) -> RateReport:
    z_star = bulk_cumulant_grad(scenario, lam)
    z_n = z - z_star
    scale = 1.0 + float(np.linalg.norm(z))
    cone = normal_cone(D, lam, tol=1e-8)
    if not cone.contains(z_n, tol=1e-6):
        raise CertificateError(
            f"outlier part {z_n.tolist()} not in the normal cone at {lam.tolist()}"
        )
    # Snap the outlier part onto the cone: the optimizer residual moves it a
    # hair off, where the support function would jump to +inf.
    z_n, _ = cone.project(z_n)
    z_star = z - z_n
    sup_zn = support_function(D, z_n)
    if abs(sup_zn - float(lam @ z_n)) > CERT_VALUE_TOL * scale:
        raise CertificateError("outlier support value disagrees with <lam, z_n>")
    gamma_star = float(lam @ z_star) - bulk_cumulant(scenario, lam)
    if abs(gamma_star + float(lam @ z_n) - value) > CERT_VALUE_TOL * scale:
        raise CertificateError("certificate value identity violated")
    if np.linalg.norm(z_star + z_n - z) > CERT_SPLIT_TOL * scale:
        raise CertificateError("certificate split does not sum to z")
    return RateReport(
        value=value,
        route="dual_sup",
        lambda_star=lam,
        z_star=z_star,
        z_n=z_n,
        certified=True,
    )


def rate_dual(scenario: Scenario, z) -> RateReport:
    z = np.asarray(z, dtype=float)
    D = outlier_domain(scenario)
    value, lam, conv = _maximize(scenario, z, D.closure())
    if np.isinf(value):
        return RateReport(np.inf, "dual_sup")
    value = _nonneg(value)
    if lam is None or not conv:
        return RateReport(
            value, "dual_sup", certified=False, flag="sup not attained; value only"
        )
    return _certify(scenario, D, z, value, lam)


def _cone_generators(D: HalfspaceDomain) -> np.ndarray:
    """Generators of the cone where the outlier support function is finite."""
    return D.normals.copy()


def rate_infconv(scenario: Scenario, z) -> RateReport:
    """Rate by direct split search z = z1 + z2 over the outlier cone."""
    z = np.asarray(z, dtype=float)
    D = outlier_domain(scenario)
    gens = _cone_generators(D)
    k = gens.shape[0]
    betas = np.array([support_function(D, g) for g in gens])
    # Support values add along the cone when one point of the closure is
    # active for every generator simultaneously; probe once, else LP per eval.
    additive = True
    if k:
        probe = gens.T @ np.full(k, 0.7)
        additive = abs(support_function(D, probe) - 0.7 * betas.sum()) <= 1e-9 * (
            1.0 + abs(betas.sum())
        )

    warm: dict = {}

    def inner(w: np.ndarray) -> tuple[float, np.ndarray | None]:
        # Warm-started: the outer search moves w smoothly, so the previous
        # maximizer is an excellent Newton start.
        return bulk_conjugate(scenario, w, warm=warm)

    def penalty(t: np.ndarray) -> float:
        if not k:
            return 0.0
        if additive:
            return float(betas @ t)
        return support_function(D, gens.T @ t)

    def phi(t: np.ndarray) -> float:
        v, _ = inner(z - gens.T @ t if k else z)
        return v + penalty(t) if np.isfinite(v) else np.inf

    if k == 0:
        v, lam = inner(z)
        if np.isinf(v):
            return RateReport(np.inf, "inf_conv")
        return RateReport(
            _nonneg(v), "inf_conv", lambda_star=lam, z_star=z.copy(), z_n=np.zeros_like(z)
        )

    t = np.zeros(k)
    if not np.isfinite(phi(t)):
        t = _feasible_split(scenario, phi, gens, z)
        if t is None:
            return RateReport(np.inf, "inf_conv")

    if additive:
        t, value = _projected_newton_split(scenario, z, gens, betas, penalty, inner, t)
    else:
        t, value = _compass_split(phi, t, k, z)
    if np.isinf(value):
        return RateReport(np.inf, "inf_conv")
    z2 = gens.T @ t
    z1 = z - z2
    _, lam = inner(z1)
    return RateReport(
        _nonneg(value),
        "inf_conv",
        lambda_star=lam,
        z_star=z1,
        z_n=z2,
        certified=False,
    )


def _compass_split(phi, t0: np.ndarray, k: int, z: np.ndarray):
    """Coordinate pattern search on t >= 0; slow fallback for the rare case
    where support values are not additive along the cone generators."""
    t = np.maximum(t0, 0.0)
    f0 = phi(t)
    step = 0.5 * (1.0 + float(np.linalg.norm(z)))
    while step > 1e-10:
        moved = False
        for j in range(k):
            for s in (step, -step):
                cand = t.copy()
                cand[j] = max(cand[j] + s, 0.0)
                fc = phi(cand)
                if fc < f0 - 1e-15:
                    t, f0, moved = cand, fc, True
        if not moved:
            step *= 0.5
    return t, f0


def _feasible_split(scenario, phi, gens: np.ndarray, z: np.ndarray) -> np.ndarray | None:
    """Find any split with finite cost to seed the descent.

    Anchors the bulk part on the almost-sure-limit direction: for each scale
    s, solve z - s*mu = gens^T t in least squares and keep the first
    nonnegative t whose cost is finite.  The feasible scales form an
    interval, so a two-pass linear scan suffices.
    """
    k = gens.shape[0]
    mu = scenario.limit_mean()
    mu_n = float(np.linalg.norm(mu))
    if mu_n > 1e-12:
        smax = 4.0 * (1.0 + float(np.linalg.norm(z))) / mu_n
        # Near the cone edge the feasible scales hug zero, so scan on a log
        # scale starting far below the natural magnitude.
        for s in np.geomspace(1e-9 * smax, smax, 60):
            t, *_ = np.linalg.lstsq(gens.T, z - s * mu, rcond=None)
            if np.any(t < -1e-10):
                continue
            t = np.maximum(t, 0.0)
            if np.isfinite(phi(t)):
                return t
    # Last resort: log-spaced rays along generator combinations.
    span = 4.0 * (1.0 + float(np.linalg.norm(z)))
    for mask in range(1, 2**k):
        direction = np.array([(mask >> j) & 1 for j in range(k)], dtype=float)
        for s in np.geomspace(1e-3, span, 25):
            t = s * direction
            if np.isfinite(phi(t)):
                return t
    return None


def _projected_newton_split(scenario, z, gens, betas, penalty, inner, t0):
    """Minimize phi(t) = G*(z - gens^T t) + penalty(t) over t >= 0."""
    k = gens.shape[0]
    t = np.maximum(t0, 0.0)

    def phi(tv):
        v, _ = inner(z - gens.T @ tv)
        return v + penalty(tv) if np.isfinite(v) else np.inf

    f0 = phi(t)
    for _ in range(60):
        w = z - gens.T @ t
        val, lam = inner(w)
        if not np.isfinite(val) or lam is None:
            break
        grad = betas - gens @ lam  # d phi / d t (additive penalty)
        free = [j for j in range(k) if t[j] > 1e-12 or grad[j] < -1e-12]
        if not free:
            break
        H = bulk_cumulant_hess(scenario, lam)
        Hinv_g = np.linalg.solve(H, gens[free].T)
        red_h = gens[free] @ Hinv_g
        try:
            step_free = np.linalg.solve(red_h + 1e-14 * np.eye(len(free)), grad[free])
        except np.linalg.LinAlgError:
            step_free = grad[free]
        step = np.zeros(k)
        for idx, j in enumerate(free):
            step[j] = -step_free[idx]
        # Clip the step so t stays nonnegative.
        alpha = 1.0
        for j in range(k):
            if step[j] < 0 and t[j] > 0:
                alpha = min(alpha, -t[j] / step[j] if step[j] < -1e-300 else 1.0)
        improved = False
        a = alpha
        for _ in range(60):
            cand = np.maximum(t + a * step, 0.0)
            fc = phi(cand)
            if fc < f0 - 1e-15:
                t, f0, improved = cand, fc, True
                break
            a *= 0.5
        if not improved:
            break
        if np.linalg.norm(grad[free]) <= 1e-10 * (1.0 + np.linalg.norm(z)):
            break
    return t, f0


def compute_rate(scenario: Scenario, z, route: str = "dual_sup") -> RateReport:
    """Rate of the weighted empirical mean at z, by the requested route."""
    if route == "dual_sup":
        return rate_dual(scenario, z)
    if route == "inf_conv":
        return rate_infconv(scenario, z)
    raise ValueError(f"unknown route {route!r}")


def partial_mean_rate(scenario: Scenario, z, subsequence: int | None = None) -> float:
    """Rate of the outlier partial mean: the outlier-domain support function.

    ``subsequence`` selects one residue class of the array period, which is
    meaningful even when the full-sequence check fails (the per-class rates
    are then the subsequential rates).
    """
    z = np.asarray(z, dtype=float)
    if subsequence is None:
        D = outlier_domain(scenario)
    else:
        D = class_domain(scenario, subsequence)
    return support_function(D, z)
