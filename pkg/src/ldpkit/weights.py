"""Triangular weight arrays: a bulk drawn from a limit measure plus finitely
many outlier tracks.

Tracks are eventually periodic: a track of period p declares one limit per
residue class of n mod p and approaches it like c/n.  This class of arrays
keeps the inner and outer limits of the weight sets exactly computable at a
finite horizon, which is what the domain-stability check below consumes.

The key check (`check_a4`, named after the CLI surface `domains check-a4`)
asks whether the tilt domains intersected over the inner limit set and over
the outer limit set coincide.  When they do not, the large-deviation rate of
the outlier part is not well defined along the full sequence, and the check
returns a witness tilt that is admissible along one subsequence class but
not along all of them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .convex import HalfspaceDomain, halfspaces, pullback_domain, support_function
from .laws import ParticleLaw

WEIGHT_SUM_TOL = 1e-12
TRACK_LIMIT_TOL = 1e-9  # declared limits must be reached at the horizon


class A4FailureError(RuntimeError):
    """Inner- and outer-limit tilt domains differ: no LDP guaranteed."""

    def __init__(self, witness: np.ndarray, message: str = ""):
        self.witness = np.asarray(witness, dtype=float)
        super().__init__(
            message or f"LDP not guaranteed: witness tilt {self.witness.tolist()}"
        )


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Finite atomic probability measure on the real line."""

    atoms: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "atoms", np.asarray(self.atoms, dtype=float).ravel())
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float).ravel())
        if self.atoms.size != self.weights.size or self.atoms.size == 0:
            raise ValueError("atoms and weights must be nonempty and aligned")
        if np.any(self.weights < 0):
            raise ValueError("weights must be nonnegative")
        if abs(self.weights.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError("weights must sum to 1")

    @staticmethod
    def from_pairs(pairs) -> "DiscreteMeasure":
        pairs = list(pairs)
        return DiscreteMeasure(
            np.array([p[0] for p in pairs]), np.array([p[1] for p in pairs])
        )

    @property
    def mean(self) -> float:
        return float(self.atoms @ self.weights)

    def quantile_points(self, count: int) -> np.ndarray:
        """The first `count` mid-quantile points, in sorted-atom order."""
        order = np.argsort(self.atoms)
        atoms, w = self.atoms[order], self.weights[order]
        cum = np.cumsum(w)
        u = (np.arange(count) + 0.5) / count
        idx = np.searchsorted(cum, u, side="left")
        idx = np.minimum(idx, atoms.size - 1)
        return atoms[idx]


@dataclass(frozen=True, eq=False)
class SupportSet:
    """Closed interval or finite atom set on the line."""

    interval: tuple[float, float] | None = None
    atoms: np.ndarray | None = None

    def __post_init__(self):
        if (self.interval is None) == (self.atoms is None):
            raise ValueError("give exactly one of interval or atoms")
        if self.atoms is not None:
            object.__setattr__(self, "atoms", np.asarray(self.atoms, dtype=float).ravel())
        elif self.interval[0] > self.interval[1]:
            raise ValueError("empty interval")

    def distance(self, x: float) -> float:
        if self.interval is not None:
            lo, hi = self.interval
            return max(lo - x, x - hi, 0.0)
        return float(np.min(np.abs(self.atoms - x)))

    def project(self, x: float) -> float:
        if self.interval is not None:
            lo, hi = self.interval
            return min(max(x, lo), hi)
        return float(self.atoms[np.argmin(np.abs(self.atoms - x))])


@dataclass(frozen=True)
class OutlierTrack:
    """One outlier index: per-residue-class limits approached like c/n."""

    limits: tuple[float, ...]
    approach: tuple[float, ...] = ()
    name: str = ""

    def __post_init__(self):
        if not self.limits:
            raise ValueError("track needs at least one class limit")
        if not self.approach:
            object.__setattr__(self, "approach", (0.0,) * len(self.limits))
        if len(self.approach) != len(self.limits):
            raise ValueError("approach coefficients must match class limits")

    @property
    def period(self) -> int:
        return len(self.limits)

    def value(self, n: int) -> float:
        r = n % self.period
        return self.limits[r] + self.approach[r] / n

    def class_limit(self, r: int) -> float:
        return self.limits[r % self.period]


@dataclass(frozen=True, eq=False)
class WeightArraySpec:
    """Bulk quantile points of a limit measure plus outlier tracks."""

    bulk: DiscreteMeasure
    support: SupportSet
    tracks: tuple[OutlierTrack, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "tracks", tuple(self.tracks))
        for a in self.bulk.atoms:
            if self.support.distance(float(a)) > 1e-9:
                raise ValueError(f"bulk atom {a} lies outside the declared support")

    @property
    def period(self) -> int:
        p = 1
        for t in self.tracks:
            p = math.lcm(p, t.period)
        return p

    def track_values(self, n: int) -> list[float]:
        return [t.value(n) for t in self.tracks]


def points(spec: WeightArraySpec, n: int) -> np.ndarray:
    """The n weight points at stage n: track values first, then bulk quantiles."""
    T = len(spec.tracks)
    if n < T:
        raise ValueError(f"n={n} smaller than the number of outlier tracks ({T})")
    vals = spec.track_values(n)
    bulk = spec.bulk.quantile_points(n - T)
    return np.concatenate([np.asarray(vals, dtype=float), bulk])


def default_schedule(m: int) -> int:
    """Stage at which the 1/m-blowup becomes the bulk test set."""
    return m**3


def decompose(spec: WeightArraySpec, n: int, schedule=default_schedule):
    """Split indices of points(spec, n) into bulk B_n and outlier C_n.

    B_n collects the points inside the 1/m-blowup of the support, where m is
    the largest stage with schedule(m) <= n.  Returns (B_n, C_n) as sorted
    0-based index lists.
    """
    if not (schedule(1) < schedule(2) < schedule(3)):
        raise ValueError("schedule must be strictly increasing")
    m = 1
    while schedule(m + 1) <= n:
        m += 1
    radius = 1.0 / m
    pts = points(spec, n)
    inside = [i for i, x in enumerate(pts) if spec.support.distance(float(x)) < radius]
    inside_set = set(inside)
    outside = [i for i in range(n) if i not in inside_set]
    return inside, outside


def project_to_support(spec: WeightArraySpec, x: float) -> float:
    return spec.support.project(float(x))


@dataclass(frozen=True, eq=False)
class LimitSets:
    """Inner/outer limits of the weight sets under the weight map.

    ``by_class`` keeps the per-residue-class limit values; they are what a
    failure witness is built from.
    """

    inner: tuple[np.ndarray, ...]
    outer: tuple[np.ndarray, ...]
    by_class: tuple[tuple[np.ndarray, ...], ...]
    converged: bool

    def __post_init__(self):
        outer_keys = {_key(y) for y in self.outer}
        if not {_key(y) for y in self.inner} <= outer_keys:
            raise ValueError("inner limit must be contained in the outer limit")


def _key(y: np.ndarray) -> bytes:
    return np.round(np.asarray(y, dtype=float), 12).tobytes()


def limit_sets(spec: WeightArraySpec, f, horizon: int) -> LimitSets:
    """Inner and outer limits of {f(track values)} along residue classes.

    Raises when some track has not reached its declared class limit by the
    horizon (to within 1e-9), naming the track.
    """
    period = spec.period
    if horizon < max(2 * period, len(spec.tracks)):
        raise ValueError("horizon too small for the track periods")
    for ti, t in enumerate(spec.tracks):
        for r in range(period):
            n_r = horizon - ((horizon - r) % period)
            if n_r <= 0:
                n_r = r + period
            err = abs(t.value(n_r) - t.class_limit(r))
            if err > TRACK_LIMIT_TOL:
                label = t.name or f"#{ti}"
                raise ValueError(
                    f"track {label} has not converged at horizon {horizon}: "
                    f"residual {err:.2e} in class {r}"
                )
    by_class = []
    for r in range(period):
        vals = [np.atleast_2d(np.asarray(f(t.class_limit(r)), dtype=float)) for t in spec.tracks]
        by_class.append(tuple(vals))
    outer: dict[bytes, np.ndarray] = {}
    for vals in by_class:
        for y in vals:
            outer.setdefault(_key(y), y)
    inner: dict[bytes, np.ndarray] = {}
    if by_class:
        common = set.intersection(*[{_key(y) for y in vals} for vals in by_class])
        for vals in by_class:
            for y in vals:
                if _key(y) in common:
                    inner.setdefault(_key(y), y)
    converged = set(outer) == set(inner)
    return LimitSets(
        inner=tuple(inner.values()),
        outer=tuple(outer.values()),
        by_class=tuple(by_class),
        converged=converged,
    )


@dataclass(frozen=True, eq=False)
class A4Result:
    equal: bool
    witness: np.ndarray | None = None
    domain: HalfspaceDomain | None = None


def _intersection_domain(law: ParticleLaw, ys, m: int) -> HalfspaceDomain:
    if law.domain is None:
        raise TypeError("check_a4 needs a law with a polyhedral effective domain")
    doms = [pullback_domain(law.domain, y, m) for y in ys]
    if not doms:
        return halfspaces(np.zeros((0, m)), np.zeros(0), m)
    normals = np.vstack([d.normals for d in doms])
    bounds = np.concatenate([d.bounds for d in doms])
    return halfspaces(normals, bounds, m)


def _exit_time(domain: HalfspaceDomain, lam0: np.ndarray, d: np.ndarray) -> float:
    t = np.inf
    for a, b in zip(domain.normals, domain.bounds):
        speed = float(a @ d)
        if speed > 1e-12:
            t = min(t, (b - float(a @ lam0)) / speed)
    return t


def _witness_from(larger: HalfspaceDomain, d_out: HalfspaceDomain) -> np.ndarray | None:
    """A point of ``larger`` strictly beyond the closure of ``d_out``."""
    lam0 = d_out.strictly_feasible_point()
    if lam0 is None:
        return None
    for a, b in zip(d_out.normals, d_out.bounds):
        if support_function(larger, a) <= b + 1e-9:
            continue
        t_out = _exit_time(d_out, lam0, a)
        t_big = _exit_time(larger, lam0, a)
        if t_big <= t_out + 1e-12:
            continue
        if np.isinf(t_big):
            t_big = t_out + 2.0 * (1.0 + abs(t_out))
        w = lam0 + 0.5 * (t_out + t_big) * a
        if larger.contains(w, strict=True) and not d_out.contains(w, strict=False, tol=1e-12):
            return w
    return None


def check_a4(limits: LimitSets, law: ParticleLaw, m: int | None = None) -> A4Result:
    """Compare the tilt-domain intersections over the inner and outer limits.

    The intersection over an empty index set is all of R^m; an empty inner
    limit therefore fails automatically unless the outer intersection is
    also all of R^m.  On failure the witness is a tilt admissible for one
    residue class (or for the inner intersection) but not for the full
    outer one.
    """
    if m is None:
        m = limits.outer[0].shape[0] if limits.outer else law.dim
    d_out = _intersection_domain(law, limits.outer, m)
    d_in = _intersection_domain(law, limits.inner, m)
    # The outer intersection is always contained in the inner one; equality
    # needs the reverse, checked one constraint at a time by LP.
    equal = True
    for a, b in zip(d_out.normals, d_out.bounds):
        if support_function(d_in, a) > b + 1e-9:
            equal = False
            break
    if equal:
        return A4Result(True, None, d_out)
    candidates = [
        _intersection_domain(law, vals, m) for vals in limits.by_class
    ] + [d_in]
    for larger in candidates:
        w = _witness_from(larger, d_out)
        if w is not None:
            return A4Result(False, w, None)
    raise RuntimeError("domain mismatch detected but no witness found")
