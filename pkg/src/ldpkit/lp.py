"""Dense two-phase simplex for the tiny linear programs used everywhere else.

All LPs in this package have a handful of variables and constraints, so a
plain tableau with Bland's rule is plenty fast and keeps the core free of
solver dependencies.  Problems are posed as

    maximize  <c, x>   subject to   G x <= h,   x free.

Unboundedness is detected from the tableau (no finite pivot ratio) and
reported as a status, never as a large finite value.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

PIVOT_TOL = 1e-10
FEAS_TOL = 1e-9


class LPResult(NamedTuple):
    status: str  # "optimal" | "unbounded" | "infeasible"
    x: np.ndarray | None
    value: float


def _pivot(T: np.ndarray, basis: list[int], row: int, col: int) -> None:
    T[row] /= T[row, col]
    for r in range(T.shape[0]):
        if r != row and abs(T[r, col]) > 0.0:
            T[r] -= T[r, col] * T[row]
    basis[row] = col


def _run_simplex(T: np.ndarray, basis: list[int], ncols: int) -> str:
    """Iterate on a tableau whose last row holds reduced costs (max problem)."""
    m = T.shape[0] - 1
    for _ in range(20000):
        # Bland's rule: smallest-index entering column with positive reduced cost.
        col = -1
        for j in range(ncols):
            if T[m, j] > PIVOT_TOL:
                col = j
                break
        if col < 0:
            return "optimal"
        row, best = -1, np.inf
        for r in range(m):
            if T[r, col] > PIVOT_TOL:
                ratio = T[r, -1] / T[r, col]
                if ratio < best - PIVOT_TOL or (
                    abs(ratio - best) <= PIVOT_TOL and (row < 0 or basis[r] < basis[row])
                ):
                    best, row = ratio, r
        if row < 0:
            return "unbounded"
        _pivot(T, basis, row, col)
    raise RuntimeError("simplex failed to terminate")


def solve_max(c: np.ndarray, G: np.ndarray, h: np.ndarray) -> LPResult:
    """Maximize <c, x> over {x : G x <= h} with x unrestricted in sign."""
    c = np.asarray(c, dtype=float)
    G = np.asarray(G, dtype=float)
    h = np.asarray(h, dtype=float)
    n = c.size
    if G.size == 0:
        G = G.reshape(0, n)
    m = G.shape[0]
    if G.shape[1] != n:
        raise ValueError(f"G has {G.shape[1]} columns, expected {n}")
    # Normalize the objective so pivot tolerances act relative to its scale;
    # the optimal point and status are scale-invariant.
    c_scale = float(np.max(np.abs(c))) if c.size else 0.0
    if c_scale > 0.0:
        c = c / c_scale

    if m == 0:
        # No constraints: bounded only if c == 0.
        if np.all(c == 0.0):
            return LPResult("optimal", np.zeros(n), 0.0)
        return LPResult("unbounded", None, np.inf)

    # Split free variables, add slacks, flip rows with negative rhs.
    A = np.hstack([G, -G, np.eye(m)])
    b = h.copy()
    flip = b < 0
    A[flip] *= -1.0
    b[flip] *= -1.0

    art_rows = np.where(flip)[0]
    n_core = 2 * n + m
    ncols = n_core + art_rows.size
    T = np.zeros((m + 1, ncols + 1))
    T[:m, :n_core] = A
    T[:m, -1] = b
    basis = [0] * m
    for i in range(m):
        basis[i] = 2 * n + i  # slack
    for k, r in enumerate(art_rows):
        T[r, n_core + k] = 1.0
        basis[r] = n_core + k

    # Phase 1: maximize -sum(artificials).
    if art_rows.size:
        obj = np.zeros(ncols + 1)
        obj[n_core:ncols] = -1.0
        T[m] = obj
        for r in range(m):
            if basis[r] >= n_core:
                T[m] += T[r]
        status = _run_simplex(T, basis, ncols)
        # The objective row carries the negated value: phase 1 maximizes
        # -sum(artificials), so a strictly positive entry means infeasible.
        if status != "optimal" or T[m, -1] > FEAS_TOL:
            return LPResult("infeasible", None, -np.inf)
        # Drive any artificial still in the basis out (it sits at zero level).
        for r in range(m):
            if basis[r] >= n_core:
                for j in range(n_core):
                    if abs(T[r, j]) > PIVOT_TOL:
                        _pivot(T, basis, r, j)
                        break
        T[:, n_core:ncols] = 0.0  # retire artificial columns

    # Phase 2: original objective on (u, v) columns.
    obj = np.zeros(ncols + 1)
    obj[:n] = c
    obj[n : 2 * n] = -c
    T[m] = obj
    for r in range(m):
        j = basis[r]
        if j < n_core and abs(T[m, j]) > 0.0:
            T[m] -= T[m, j] * T[r]
    status = _run_simplex(T, basis, n_core)
    if status == "unbounded":
        return LPResult("unbounded", None, np.inf)
    x = np.zeros(2 * n + m)
    for r in range(m):
        if basis[r] < n_core:
            x[basis[r]] = T[r, -1]
    sol = x[:n] - x[n : 2 * n]
    return LPResult("optimal", sol, float(c @ sol) * (c_scale if c_scale > 0.0 else 1.0))


def feasible_point(G: np.ndarray, h: np.ndarray, dim: int) -> np.ndarray | None:
    """A point of {G x <= h}, or None when the system is infeasible."""
    res = solve_max(np.zeros(dim), G, h)
    return None if res.status == "infeasible" else res.x


def strictly_feasible_point(G: np.ndarray, h: np.ndarray, dim: int) -> np.ndarray | None:
    """A point with G x < h strictly, found by maximizing the margin.

    Solves max t subject to G x + t * ||g_i|| <= h, t <= 1; a positive
    optimum certifies strict feasibility.  Returns None otherwise.
    """
    G = np.asarray(G, dtype=float)
    h = np.asarray(h, dtype=float)
    if G.size == 0:
        return np.zeros(dim)
    norms = np.linalg.norm(G, axis=1)
    Gt = np.hstack([G, norms[:, None]])
    Gt = np.vstack([Gt, np.concatenate([np.zeros(dim), [1.0]])])
    ht = np.concatenate([h, [1.0]])
    c = np.zeros(dim + 1)
    c[-1] = 1.0
    res = solve_max(c, Gt, ht)
    if res.status != "optimal" or res.value <= FEAS_TOL:
        return None
    return res.x[:dim]
