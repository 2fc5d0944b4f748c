"""Computational convex analysis on two carriers.

Open convex polyhedra (finite intersections of open halfspaces) carry
support functions and normal cones, evaluated exactly through linear
programming.  Extended-real functions tabulated on regular box grids carry
the discrete Legendre conjugate and the infimal convolution.  Both carriers
use IEEE ``inf`` for the extended value; NaN never propagates out of here.

Support functions are insensitive to whether a polyhedron is treated as
open or closed, and the LP evaluation reflects that: only the constraint
data enters.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from . import lp

ACTIVE_TOL = 1e-8  # default slack below which a constraint counts as active


class UnsupportedDomainError(TypeError):
    """Operation needs a polyhedral domain but got something else."""


@dataclass(frozen=True)
class HalfspaceDomain:
    """Open convex set {lam : <a_j, lam> < b_j, j = 1..k} in R^dim.

    Rows of ``normals`` are scaled to unit length so constraints can be
    compared and deduplicated; ``open_`` records the intended encoding but
    never changes any computed value (support functions agree on a set and
    its closure).
    """

    dim: int
    normals: np.ndarray
    bounds: np.ndarray
    open_: bool = field(default=True, compare=False)

    def __post_init__(self):
        if self.normals.shape != (self.bounds.size, self.dim):
            raise ValueError("inconsistent constraint shapes")
        if self.normals.size and self.strictly_feasible_point() is None:
            raise ValueError("empty halfspace domain")

    @property
    def k(self) -> int:
        return self.bounds.size

    def slack(self, lam: np.ndarray) -> np.ndarray:
        lam = np.asarray(lam, dtype=float)
        if lam.shape != (self.dim,):
            raise ValueError(f"point has shape {lam.shape}, expected ({self.dim},)")
        if self.k == 0:
            return np.zeros(0)
        return self.bounds - self.normals @ lam

    def contains(self, lam, strict: bool = True, tol: float = 0.0) -> bool:
        s = self.slack(lam)
        return bool(np.all(s > -tol) if strict else np.all(s >= -tol))

    def strictly_feasible_point(self) -> np.ndarray | None:
        return lp.strictly_feasible_point(self.normals, self.bounds, self.dim)

    def intersect(self, *others: "HalfspaceDomain") -> "HalfspaceDomain":
        doms = (self,) + others
        if any(d.dim != self.dim for d in doms):
            raise ValueError("dimension mismatch in intersection")
        normals = np.vstack([d.normals for d in doms]) if doms else self.normals
        bounds = np.concatenate([d.bounds for d in doms])
        return halfspaces(normals, bounds, self.dim)

    def closure(self) -> "HalfspaceDomain":
        return HalfspaceDomain(self.dim, self.normals, self.bounds, open_=False)


def halfspaces(normals, bounds, dim: int | None = None, open_: bool = True) -> HalfspaceDomain:
    """Build a HalfspaceDomain, normalizing rows and dropping duplicates.

    Zero normals with positive bound are vacuous and removed; a zero normal
    with bound <= 0 makes the set empty and raises.
    """
    normals = np.atleast_2d(np.asarray(normals, dtype=float))
    bounds = np.atleast_1d(np.asarray(bounds, dtype=float))
    if dim is None:
        dim = normals.shape[1]
    if normals.size == 0:
        return HalfspaceDomain(dim, np.zeros((0, dim)), np.zeros(0), open_=open_)
    rows, rhs = [], []
    for a, b in zip(normals, bounds):
        nrm = float(np.linalg.norm(a))
        if nrm == 0.0:
            if b <= 0.0:
                raise ValueError("constraint 0 < b with b <= 0: empty domain")
            continue
        rows.append(a / nrm)
        rhs.append(b / nrm)
    if not rows:
        return HalfspaceDomain(dim, np.zeros((0, dim)), np.zeros(0), open_=open_)
    A = np.array(rows)
    c = np.array(rhs)
    keep: list[int] = []
    for i in range(A.shape[0]):
        dup = False
        for j in keep:
            if np.allclose(A[i], A[j], atol=1e-12) and abs(c[i] - c[j]) <= 1e-12:
                dup = True
                break
            if np.allclose(A[i], A[j], atol=1e-12) and c[i] >= c[j]:
                dup = True  # dominated by a tighter copy
                break
        if not dup:
            # drop earlier rows this one dominates
            keep = [j for j in keep if not (np.allclose(A[i], A[j], atol=1e-12) and c[j] > c[i])]
            keep.append(i)
    return HalfspaceDomain(dim, A[keep], c[keep], open_=open_)


def pullback_domain(domain: HalfspaceDomain, y: np.ndarray, out_dim: int) -> HalfspaceDomain:
    """Preimage {lam in R^out_dim : y^T lam in domain} for an out_dim x d matrix y."""
    y = np.atleast_2d(np.asarray(y, dtype=float))
    normals = y @ domain.normals.T  # column j = y a_j
    return halfspaces(normals.T, domain.bounds, out_dim)


def support_function(domain: HalfspaceDomain, z, with_argmax: bool = False):
    """sup over the domain of <lam, z>; +inf when the LP is unbounded.

    The value is identical for the open set and its closure.
    """
    z = np.asarray(z, dtype=float)
    if z.shape != (domain.dim,):
        raise ValueError(f"direction has shape {z.shape}, expected ({domain.dim},)")
    res = lp.solve_max(z, domain.normals, domain.bounds)
    if res.status == "unbounded":
        return (np.inf, None) if with_argmax else np.inf
    if res.status == "infeasible":
        raise ValueError("infeasible domain reached support_function")
    return (res.value, res.x) if with_argmax else res.value


@dataclass(frozen=True)
class ConeCert:
    """Normal cone certificate: nonnegative span of ``generators`` at ``base``."""

    generators: tuple[tuple[float, ...], ...]
    base: tuple[float, ...]

    def project(self, z) -> tuple[np.ndarray, float]:
        """Nearest nonnegative combination of the generators and its distance."""
        z = np.asarray(z, dtype=float)
        if not self.generators:
            return np.zeros_like(z), float(np.linalg.norm(z))
        G = np.array(self.generators, dtype=float).T
        k = G.shape[1]
        best = (np.zeros_like(z), float(np.linalg.norm(z)))
        for mask in range(1, 2**k):
            cols = [j for j in range(k) if mask >> j & 1]
            sub = G[:, cols]
            t, *_ = np.linalg.lstsq(sub, z, rcond=None)
            t = np.maximum(t, 0.0)
            proj = sub @ t
            res = float(np.linalg.norm(proj - z))
            if res < best[1]:
                best = (proj, res)
        return best

    def contains(self, z, tol: float = 1e-8) -> bool:
        """Whether z lies in the nonnegative span of the generators."""
        z = np.asarray(z, dtype=float)
        scale = max(1.0, float(np.linalg.norm(z)))
        _, res = self.project(z)
        return res <= tol * scale


def normal_cone(domain: HalfspaceDomain, lam, tol: float = ACTIVE_TOL) -> ConeCert:
    """Outward normals of the constraints active at ``lam``.

    Interior points get the trivial cone {0} (no generators).  Each
    generator is rescaled so its first nonzero coordinate has unit size,
    which keeps certificates readable.
    """
    lam = np.asarray(lam, dtype=float)
    s = domain.slack(lam)
    if np.any(s < -tol):
        raise ValueError("point lies outside the closure of the domain")
    gens = []
    for i in range(domain.k):
        if abs(s[i]) <= tol:
            g = domain.normals[i]
            lead = g[np.nonzero(np.abs(g) > 1e-14)[0][0]]
            gens.append(tuple(g / abs(lead)))
    if not domain.closure().contains(lam, strict=False, tol=1e-10):
        raise ValueError("point violates domain closure beyond tolerance")
    return ConeCert(tuple(gens), tuple(lam))


def domain_subset(inner: HalfspaceDomain, outer: HalfspaceDomain, tol: float = 1e-9) -> bool:
    """Whether inner is contained in the closure of outer, by one LP per constraint."""
    if inner.dim != outer.dim:
        raise ValueError("dimension mismatch")
    for a, b in zip(outer.normals, outer.bounds):
        val = support_function(inner, a)
        if val > b + tol:
            return False
    return True


# ---------------------------------------------------------------------------
# Grid functions


@dataclass(frozen=True)
class GridFunction:
    """Extended-real values on a regular box grid (1-D or 2-D in practice)."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]
    values: np.ndarray

    def __post_init__(self):
        if len(self.lo) != len(self.hi) or self.values.ndim != len(self.lo):
            raise ValueError("box and values rank mismatch")
        if not all(np.isfinite(self.lo)) or not all(np.isfinite(self.hi)):
            raise ValueError("box bounds must be finite")
        if not np.any(np.isfinite(self.values)):
            raise ValueError("grid function must take a finite value somewhere")
        if np.any(np.isnan(self.values)):
            raise ValueError("NaN is not a grid value")

    @property
    def ndim(self) -> int:
        return self.values.ndim

    def axis(self, i: int) -> np.ndarray:
        return np.linspace(self.lo[i], self.hi[i], self.values.shape[i])

    def spacing(self, i: int) -> float:
        n = self.values.shape[i]
        return (self.hi[i] - self.lo[i]) / (n - 1) if n > 1 else 0.0

    def __call__(self, point) -> float:
        """Multilinear interpolation; +inf outside the box or next to +inf nodes.

        Query points within a whisker of a node snap to it, so exact-node
        lookups are exact.
        """
        pt = np.atleast_1d(np.asarray(point, dtype=float))
        idx = []
        for i in range(self.ndim):
            h = self.spacing(i)
            if h == 0.0:
                if abs(pt[i] - self.lo[i]) > 1e-12:
                    return np.inf
                idx.append((0, 0, 0.0))
                continue
            u = (pt[i] - self.lo[i]) / h
            if u < -1e-9 or u > self.values.shape[i] - 1 + 1e-9:
                return np.inf
            u = min(max(u, 0.0), self.values.shape[i] - 1.0)
            j = int(np.floor(u))
            frac = u - j
            if frac < 1e-9:
                idx.append((j, j, 0.0))
            elif frac > 1 - 1e-9:
                idx.append((j + 1, j + 1, 0.0))
            else:
                idx.append((j, j + 1, frac))
        total, corners = 0.0, [(1.0, ())]
        for j0, j1, frac in idx:
            corners = [
                (w * wf, ix + (jj,))
                for (w, ix) in corners
                for jj, wf in (((j0, 1.0 - frac),) if frac == 0.0 else ((j0, 1.0 - frac), (j1, frac)))
                if w * wf > 0.0
            ]
        for w, ix in corners:
            v = self.values[ix]
            if not np.isfinite(v):
                return np.inf
            total += w * v
        return float(total)

    def eval_many(self, pts: np.ndarray) -> np.ndarray:
        """Vectorized interpolation at an (N, ndim) array of points."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        n = pts.shape[0]
        out = np.zeros(n)
        inside = np.ones(n, dtype=bool)
        lo_idx = np.empty((n, self.ndim), dtype=int)
        hi_idx = np.empty((n, self.ndim), dtype=int)
        frac = np.empty((n, self.ndim))
        for i in range(self.ndim):
            h = self.spacing(i)
            if h == 0.0:
                inside &= np.abs(pts[:, i] - self.lo[i]) <= 1e-12
                lo_idx[:, i] = hi_idx[:, i] = 0
                frac[:, i] = 0.0
                continue
            u = (pts[:, i] - self.lo[i]) / h
            top = self.values.shape[i] - 1
            inside &= (u >= -1e-9) & (u <= top + 1e-9)
            u = np.clip(u, 0.0, top)
            j = np.floor(u).astype(int)
            fr = u - j
            snap_lo = fr < 1e-9
            snap_hi = fr > 1 - 1e-9
            j = np.where(snap_hi, np.minimum(j + 1, top), j)
            fr = np.where(snap_lo | snap_hi, 0.0, fr)
            lo_idx[:, i] = j
            hi_idx[:, i] = np.minimum(j + (fr > 0.0), top)
            frac[:, i] = fr
        for corner in np.ndindex(*(2,) * self.ndim):
            w = np.ones(n)
            ix = []
            for i, c in enumerate(corner):
                w = w * (frac[:, i] if c else 1.0 - frac[:, i])
                ix.append(hi_idx[:, i] if c else lo_idx[:, i])
            vals = self.values[tuple(ix)]
            hit = w > 0.0
            finite = np.isfinite(vals)
            inside &= ~(hit & ~finite)
            out = out + np.where(hit & finite, w, 0.0) * np.where(finite, vals, 0.0)
        return np.where(inside, out, np.inf)

    @staticmethod
    def from_callable(fn, lo, hi, nodes) -> "GridFunction":
        lo = tuple(float(v) for v in np.atleast_1d(lo))
        hi = tuple(float(v) for v in np.atleast_1d(hi))
        nodes = tuple(int(v) for v in np.atleast_1d(nodes))
        axes = [np.linspace(a, b, n) for a, b, n in zip(lo, hi, nodes)]
        if len(axes) == 1:
            vals = np.array([fn(x) for x in axes[0]], dtype=float)
        else:
            vals = np.array(
                [[fn(np.array([x, y])) for y in axes[1]] for x in axes[0]], dtype=float
            )
        return GridFunction(lo, hi, vals)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            _write_grid_csv(self, fh)

    def dumps(self) -> str:
        buf = io.StringIO()
        _write_grid_csv(self, buf)
        return buf.getvalue()

    @staticmethod
    def from_csv(path) -> "GridFunction":
        with open(path, newline="") as fh:
            return _read_grid_csv(fh)

    @staticmethod
    def loads(text: str) -> "GridFunction":
        return _read_grid_csv(io.StringIO(text))


def _write_grid_csv(g: GridFunction, fh) -> None:
    w = csv.writer(fh)
    w.writerow(["axes", g.ndim])
    for i in range(g.ndim):
        w.writerow(["axis", i, repr(g.lo[i]), repr(g.hi[i]), g.values.shape[i]])
    w.writerow([f"i{k}" for k in range(g.ndim)] + ["value"])
    for ix in np.ndindex(g.values.shape):
        v = g.values[ix]
        w.writerow(list(ix) + ["inf" if np.isinf(v) else repr(float(v))])


def _read_grid_csv(fh) -> GridFunction:
    rows = list(csv.reader(fh))
    ndim = int(rows[0][1])
    lo, hi, shape = [], [], []
    for i in range(ndim):
        _, _, a, b, n = rows[1 + i]
        lo.append(float(a))
        hi.append(float(b))
        shape.append(int(n))
    vals = np.empty(shape, dtype=float)
    for row in rows[2 + ndim :]:
        ix = tuple(int(v) for v in row[:ndim])
        vals[ix] = np.inf if row[ndim] == "inf" else float(row[ndim])
    return GridFunction(tuple(lo), tuple(hi), vals)


def _conj_1d(axis_vals: np.ndarray, g: np.ndarray, out: np.ndarray) -> np.ndarray:
    """sup_j (z * lam_j - g_j) for every z in ``out``; rows of g may be +inf."""
    prod = np.outer(out, axis_vals)
    masked = np.where(np.isfinite(g), g, np.inf)
    return np.max(prod - masked[None, :], axis=1)


def _slope_range(g: GridFunction, axis: int) -> tuple[float, float]:
    vals = g.values
    h = g.spacing(axis)
    if h == 0.0:
        return (-1.0, 1.0)
    d = np.diff(vals, axis=axis) / h
    d = d[np.isfinite(d)]
    if d.size == 0:
        return (-1.0 / h, 1.0 / h)
    pad = 0.05 * (d.max() - d.min()) + 1e-9
    return (float(d.min() - pad), float(d.max() + pad))


def legendre_conjugate(
    g: GridFunction,
    out_lo=None,
    out_hi=None,
    out_nodes=None,
) -> GridFunction:
    """Discrete Legendre conjugate g*(z) = sup over grid nodes of <lam,z> - g(lam).

    The output box defaults to the finite-difference slope range of ``g``
    (the subgradient range), so the sup is attained interior to the input
    box for interior output points.  Direct O(N^2) per axis with dimension
    splitting; grids here are desk scale.
    """
    box_lo = list(out_lo) if out_lo is not None else [_slope_range(g, i)[0] for i in range(g.ndim)]
    box_hi = list(out_hi) if out_hi is not None else [_slope_range(g, i)[1] for i in range(g.ndim)]
    nodes = (
        list(out_nodes)
        if out_nodes is not None
        else [max(g.values.shape[i], 2) for i in range(g.ndim)]
    )
    axes_out = [np.linspace(a, b, n) for a, b, n in zip(box_lo, box_hi, nodes)]
    if g.ndim == 1:
        vals = _conj_1d(g.axis(0), g.values, axes_out[0])
        return GridFunction((box_lo[0],), (box_hi[0],), vals)
    if g.ndim == 2:
        lam0, lam1 = g.axis(0), g.axis(1)
        # partial conjugate along axis 1: P[i, z1] = sup_j (z1*lam1_j - g[i, j])
        P = np.empty((lam0.size, axes_out[1].size))
        for i in range(lam0.size):
            P[i] = _conj_1d(lam1, g.values[i], axes_out[1])
        # then along axis 0: out[z0, z1] = sup_i (z0*lam0_i + P[i, z1])
        out = np.empty((axes_out[0].size, axes_out[1].size))
        for j in range(axes_out[1].size):
            out[:, j] = _conj_1d(lam0, -P[:, j], axes_out[0])
        return GridFunction(tuple(box_lo), tuple(box_hi), out)
    raise ValueError("legendre_conjugate supports 1-D and 2-D grids")


def inf_convolution(f: GridFunction, g: GridFunction, out_nodes=None) -> GridFunction:
    """(f # g)(z) = min over grid splits z = w + (z - w) of f(w) + g(z - w).

    The output box is the interval sum of the input boxes; g is evaluated at
    off-node points by interpolation (with +inf beyond its box), which keeps
    the result within grid tolerance for convex lsc inputs.
    """
    if f.ndim != g.ndim:
        raise ValueError("dimension mismatch")
    nd = f.ndim
    lo = tuple(f.lo[i] + g.lo[i] for i in range(nd))
    hi = tuple(f.hi[i] + g.hi[i] for i in range(nd))
    nodes = (
        tuple(out_nodes)
        if out_nodes is not None
        else tuple(max(f.values.shape[i], g.values.shape[i]) for i in range(nd))
    )
    axes = [np.linspace(lo[i], hi[i], nodes[i]) for i in range(nd)]
    mesh = np.meshgrid(*axes, indexing="ij")
    Z = np.stack([m.ravel() for m in mesh], axis=-1)
    fin = np.isfinite(f.values)
    w_index = np.argwhere(fin)
    w_points = np.stack([f.axis(i)[w_index[:, i]] for i in range(nd)], axis=-1)
    f_vals = f.values[fin]
    best = np.full(Z.shape[0], np.inf)
    for wp, fv in zip(w_points, f_vals):
        cand = fv + g.eval_many(Z - wp)
        np.minimum(best, cand, out=best)
    out = best.reshape(nodes)
    if not np.any(np.isfinite(out)):
        raise ValueError("inf-convolution is identically +inf on the output box")
    return GridFunction(lo, hi, out)


def verify_subgradient(fn, lam, z, tol: float = 1e-6) -> bool:
    """Check z = grad fn(lam) by central differences with Richardson refinement.

    ``fn`` must be finite and smooth near ``lam``; if the stencil keeps
    hitting +inf the point is too close to the domain boundary and a
    diagnostic error is raised.
    """
    lam = np.asarray(lam, dtype=float)
    z = np.asarray(z, dtype=float)
    if z.shape != lam.shape:
        raise ValueError("shape mismatch between point and candidate gradient")
    scale = 1.0 + float(np.linalg.norm(lam))
    h = 1e-4 * scale
    for _ in range(12):
        ok = True
        for i in range(lam.size):
            for s in (h, -h, h / 2, -h / 2):
                e = lam.copy()
                e[i] += s
                if not np.isfinite(fn(e)):
                    ok = False
                    break
            if not ok:
                break
        if ok:
            break
        h /= 4.0
    else:
        raise ValueError("point too close to the domain boundary for stable differencing")
    if h < 1e-10 * scale:
        raise ValueError("point too close to the domain boundary for stable differencing")

    def central(step: float) -> np.ndarray:
        out = np.empty_like(lam)
        for i in range(lam.size):
            ep, em = lam.copy(), lam.copy()
            ep[i] += step
            em[i] -= step
            out[i] = (fn(ep) - fn(em)) / (2 * step)
        return out

    d1 = central(h)
    d2 = central(h / 2)
    grad = (4.0 * d2 - d1) / 3.0
    return bool(np.linalg.norm(grad - z) <= tol)
