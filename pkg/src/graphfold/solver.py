"""In-repo convex solvers for the recovery objectives.

Two workhorses: an equality-constrained L1 minimizer (basis pursuit, via a
dense two-phase simplex on the positive/negative split) and an iterative
shrinkage solver for the L1 + quadratic-penalty objective. Systems here are
small and dense, so a tableau simplex with Bland's anti-cycling rule beats
anything asymptotically fancier: it is deterministic and hands back an
exact optimal basis from which the dual certificate is reconstructed.

A tiny exhaustive integer minimizer is included as the test oracle for the
integer-valued recoveries.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .errors import Infeasible, IterationLimit, NoFeasiblePoint, SearchSpaceTooLarge

PIVOT_TOL = 1e-9
FEAS_TOL = 1e-8
DEFAULT_MAX_PIVOTS = 100_000


@dataclass(frozen=True)
class LPSolution:
    x: np.ndarray
    objective: float
    dual: np.ndarray
    gap: float
    n_pivots: int


def simplex_min(
    c, A_eq, b_eq, *, max_pivots: int = DEFAULT_MAX_PIVOTS
) -> LPSolution:
    """min c.x subject to A_eq x = b_eq, x >= 0 (dense two-phase simplex).

    Entering and leaving variables follow Bland's rule (lowest index), which
    rules out cycling. The dual vector is recovered from the final basis;
    the reported gap is c.x - b.y, which certifies optimality when ~0.
    """
    A = np.array(A_eq, dtype=float)
    b = np.array(b_eq, dtype=float).ravel()
    c = np.array(c, dtype=float).ravel()
    m, n = A.shape

    # row equilibration keeps the pivot tolerances meaningful when rows
    # span many orders of magnitude; the solution set is unchanged
    row_scale = np.maximum(np.max(np.abs(A), axis=1), 1e-300) if n else np.ones(m)
    row_scale = np.where(row_scale > 0, row_scale, 1.0)
    A = A / row_scale[:, None]
    b = b / row_scale

    flip = b < 0
    A[flip] = -A[flip]
    b = np.abs(b)

    # tableau over original + artificial columns, artificials basic
    T = np.hstack([A, np.eye(m), b[:, None]])
    basis = list(range(n, n + m))
    basic_mask = np.zeros(n + m, dtype=bool)
    basic_mask[basis] = True

    def pivots(cost: np.ndarray, allowed: int, budget: int) -> int:
        """Run simplex pivots for the given cost vector; returns count.

        Entering variable: most negative reduced cost (fast in practice),
        switching permanently to Bland's lowest-index rule after a stretch
        of pivots without objective progress, which is what makes the
        method immune to cycling. The leaving row always follows Bland
        (lowest basic index among the ratio-test ties).
        """
        used = 0
        bland = False
        stall = 0
        last_obj = np.inf
        m_rows = T.shape[0]
        while True:
            cb = cost[basis]
            reduced = cost[:allowed] - cb @ T[:, :allowed]
            eligible = (reduced < -PIVOT_TOL) & ~basic_mask[:allowed]
            if not eligible.any():
                return used
            if bland:
                entering = int(np.argmax(eligible))
            else:
                masked = np.where(eligible, reduced, 0.0)
                entering = int(np.argmin(masked))
            col = T[:, entering]
            ok = col > PIVOT_TOL
            if not ok.any():
                raise Infeasible("objective unbounded below (malformed system)")
            ratios = np.full(m_rows, np.inf)
            ratios[ok] = T[ok, -1] / col[ok]
            best = float(np.min(ratios))
            ties = np.flatnonzero(ratios <= best + 1e-12)
            leave = int(min(ties, key=lambda r: basis[r]))
            piv = T[leave, entering]
            T[leave, :] /= piv
            factors = T[:, entering].copy()
            factors[leave] = 0.0
            T[:, :] -= np.outer(factors, T[leave, :])
            basic_mask[basis[leave]] = False
            basis[leave] = entering
            basic_mask[entering] = True
            used += 1
            if used > budget:
                raise IterationLimit(f"exceeded {budget} simplex pivots")
            if not bland:
                obj = float(cost[basis] @ T[:, -1])
                if obj < last_obj - 1e-12 * (1.0 + abs(last_obj)):
                    stall = 0
                else:
                    stall += 1
                    if stall >= 100:
                        bland = True
                last_obj = obj

    # phase 1: drive artificials to zero
    cost1 = np.concatenate([np.zeros(n), np.ones(m)])
    used = pivots(cost1, n + m, max_pivots)
    phase1 = float(cost1[basis] @ T[:, -1])
    if phase1 > FEAS_TOL * max(1.0, float(np.max(np.abs(b))) if m else 1.0):
        raise Infeasible(f"phase-1 objective {phase1:.3e} is nonzero")

    # expel zero-level artificials; drop rows that are purely redundant
    keep_rows = np.ones(m, dtype=bool)
    for r in range(m):
        if basis[r] >= n:
            sub = np.abs(T[r, :n])
            j = int(np.argmax(sub))
            if sub[j] > PIVOT_TOL:
                piv = T[r, j]
                T[r, :] /= piv
                factors = T[:, j].copy()
                factors[r] = 0.0
                T[:, :] -= np.outer(factors, T[r, :])
                basic_mask[basis[r]] = False
                basis[r] = j
                basic_mask[j] = True
            else:
                keep_rows[r] = False
    if not np.all(keep_rows):
        T = T[keep_rows, :]
        dropped = [basis[r] for r in range(m) if not keep_rows[r]]
        for j in dropped:
            basic_mask[j] = False
        basis = [basis[r] for r in range(m) if keep_rows[r]]
        m = T.shape[0]

    # phase 2 over original columns only
    cost2 = np.concatenate([c, np.zeros(n + m)])[: n + m]
    used += pivots(cost2, n, max_pivots - used)

    x = np.zeros(n)
    for r, j in enumerate(basis):
        if j < n:
            x[j] = T[r, -1]
    objective = float(c @ x)

    # dual from the final basis of the (row-kept, sign-flipped) system
    A_kept = A[keep_rows, :]
    flip_kept = flip[keep_rows]
    B = A_kept[:, basis]
    try:
        y_kept = np.linalg.solve(B.T, c[basis])
    except np.linalg.LinAlgError:
        y_kept, *_ = np.linalg.lstsq(B.T, c[basis], rcond=None)
    y = np.zeros(flip.shape[0])
    y[keep_rows] = y_kept
    y[flip] = -y[flip]
    y = y / row_scale  # undo the equilibration: dual of the original rows
    gap = objective - float(np.array(b_eq, dtype=float).ravel() @ y)
    return LPSolution(x=x, objective=objective, dual=y, gap=gap, n_pivots=used)


@dataclass(frozen=True)
class L1Solution:
    zeta: np.ndarray
    objective: float
    gap: float
    n_pivots: int


def solve_l1_eq(M, g, *, max_pivots: int = DEFAULT_MAX_PIVOTS) -> L1Solution:
    """min ||zeta||_1 subject to M zeta = g, via the nonnegative split."""
    M = np.asarray(M, dtype=float)
    g = np.asarray(g, dtype=float).ravel()
    m, n = M.shape
    sol = simplex_min(
        np.ones(2 * n), np.hstack([M, -M]), g, max_pivots=max_pivots
    )
    zeta = sol.x[:n] - sol.x[n:]
    resid = float(np.max(np.abs(M @ zeta - g))) if m else 0.0
    if resid > 1e-7 * max(1.0, float(np.max(np.abs(g))) if g.size else 1.0):
        raise Infeasible(f"constraint residual {resid:.3e} after solve")
    return L1Solution(
        zeta=zeta, objective=sol.objective, gap=sol.gap, n_pivots=sol.n_pivots
    )


def lasso_objective(M, g, alpha: float, zeta: np.ndarray) -> float:
    r = M @ zeta - g
    return float(np.sum(np.abs(zeta)) + alpha * (r @ r))


def lasso_stationarity_gap(M, g, alpha: float, zeta: np.ndarray) -> float:
    """Max violation of the coordinatewise subgradient optimality condition."""
    v = 2.0 * alpha * (M.T @ (M @ zeta - g))
    gap = np.where(
        np.abs(zeta) > 1e-12,
        np.abs(v + np.sign(zeta)),
        np.maximum(0.0, np.abs(v) - 1.0),
    )
    return float(np.max(gap)) if gap.size else 0.0


def solve_lasso(
    M,
    g,
    alpha: float,
    *,
    tol: float = 1e-6,
    max_iter: int = 100_000,
) -> np.ndarray:
    """min ||zeta||_1 + alpha * ||M zeta - g||_2^2 by iterative shrinkage.

    Monotone accelerated shrinkage (FISTA with a descent safeguard) at the
    fixed step 1 / (2 alpha ||M||_2^2). Plain unaccelerated shrinkage needs
    on the order of alpha iterations to traverse the constraint manifold
    when alpha is large, so the momentum step is required to make the
    penalty-limit regime reachable; the safeguard keeps the objective
    monotonically nonincreasing, which is asserted every 100 iterations.
    Terminates once every coordinate satisfies the subgradient optimality
    condition within tol.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    M = np.asarray(M, dtype=float)
    g = np.asarray(g, dtype=float).ravel()
    n = M.shape[1]
    if M.size == 0 or not np.any(M):
        return np.zeros(n)
    lip = float(np.linalg.norm(M, 2)) ** 2
    step = 1.0 / (2.0 * alpha * lip)
    MtM = M.T @ M
    Mtg = M.T @ g

    def shrink_step(z: np.ndarray) -> np.ndarray:
        z = z - step * (2.0 * alpha * (MtM @ z - Mtg))
        return np.sign(z) * np.maximum(np.abs(z) - step, 0.0)

    x = np.zeros(n)
    y = x.copy()
    t = 1.0
    fx = lasso_objective(M, g, alpha, x)
    checked = fx
    for it in range(1, max_iter + 1):
        z = shrink_step(y)
        fz = lasso_objective(M, g, alpha, z)
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        if fz <= fx:  # descent safeguard: never accept an increase
            x_next, f_next = z, fz
        else:
            x_next, f_next = x, fx
        y = x_next + (t / t_next) * (z - x_next) + ((t - 1.0) / t_next) * (
            x_next - x
        )
        x, fx, t = x_next, f_next, t_next
        if it % 100 == 0:
            if fx > checked + 1e-9 * (1.0 + abs(checked)):
                raise IterationLimit("lasso objective increased; step unstable")
            checked = fx
        if it % 25 == 0 and lasso_stationarity_gap(M, g, alpha, x) <= tol:
            return x
    if lasso_stationarity_gap(M, g, alpha, x) <= tol:
        return x
    raise IterationLimit(f"no stationary point within {max_iter} iterations")


def solve_lasso_eq(
    M,
    g,
    alpha: float,
    E,
    q,
    *,
    rho: float = 1.0,
    tol: float = 1e-8,
    max_iter: int = 100_000,
) -> np.ndarray:
    """Shrinkage objective with hard equality side constraints, via ADMM.

    min ||zeta||_1 + alpha ||M zeta - g||_2^2 subject to E zeta = q.
    Splits the L1 term onto a copy variable; the smooth update solves a
    fixed KKT system (factored once), the copy update is a soft threshold.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    M = np.asarray(M, dtype=float)
    E = np.asarray(E, dtype=float)
    g = np.asarray(g, dtype=float).ravel()
    q = np.asarray(q, dtype=float).ravel()
    n = M.shape[1]
    p = E.shape[0]
    kkt = np.zeros((n + p, n + p))
    kkt[:n, :n] = 2.0 * alpha * (M.T @ M) + rho * np.eye(n)
    kkt[:n, n:] = E.T
    kkt[n:, :n] = E
    with np.errstate(all="ignore"):
        lu_piv = lu_factor(kkt)
    target_head = 2.0 * alpha * (M.T @ g)
    w = np.zeros(n)
    u = np.zeros(n)
    zeta = np.zeros(n)
    for it in range(max_iter):
        rhs = np.concatenate([target_head + rho * (w - u), q])
        with np.errstate(all="ignore"):
            zeta = lu_solve(lu_piv, rhs)[:n]
        if it == 0:
            bad = not np.all(np.isfinite(zeta))
            if not bad and p:
                bad = float(np.max(np.abs(E @ zeta - q))) > 1e-6 * max(
                    1.0, float(np.max(np.abs(q)))
                )
            if bad:
                raise Infeasible("equality constraints degenerate or inconsistent")
        w_old = w
        w = np.sign(zeta + u) * np.maximum(np.abs(zeta + u) - 1.0 / rho, 0.0)
        u = u + zeta - w
        primal = float(np.max(np.abs(zeta - w), initial=0.0))
        dual = float(rho * np.max(np.abs(w - w_old), initial=0.0))
        if primal < tol and dual < tol:
            return zeta
    raise IterationLimit(f"ADMM did not converge in {max_iter} iterations")


def exhaustive_integer_l1(M, g, box: int, tol: float = 1e-9) -> np.ndarray:
    """Exhaustive min ||zeta||_1 over integer boxes with M zeta ~= g.

    Scans {-box..box}^n in lexicographic order; among feasible points
    (residual below tol in max norm) the smallest L1 norm wins, ties going
    to the lexicographically first point. Intended as a ground-truth oracle
    for small systems.
    """
    M = np.asarray(M, dtype=float)
    g = np.asarray(g, dtype=float).ravel()
    n = M.shape[1]
    base = 2 * box + 1
    n_points = base**n
    if n_points > 10**7:
        raise SearchSpaceTooLarge(f"{n_points} grid points exceeds 1e7")
    best_norm = np.inf
    best = None
    chunk = 1 << 16
    shape = (base,) * n
    for start in range(0, n_points, chunk):
        idx = np.arange(start, min(start + chunk, n_points))
        pts = np.stack(np.unravel_index(idx, shape), axis=1) - box
        resid = np.max(np.abs(pts @ M.T - g[None, :]), axis=1)
        feas = resid < tol
        if not np.any(feas):
            continue
        norms = np.abs(pts).sum(axis=1)
        norms[~feas] = np.iinfo(np.int64).max
        j = int(np.argmin(norms))  # first minimum = lexicographic tie-break
        if norms[j] < best_norm:
            best_norm = norms[j]
            best = pts[j].copy()
    if best is None:
        raise NoFeasiblePoint(f"no integer point within tol={tol}")
    return best.astype(np.int64)
