"""Recovery of folding numbers from folded samples.

Two routes:

* exact integer search: with K primary vertices (invertible basis
  submatrix) plus at least one auxiliary vertex at a different folding
  rate, the true folding numbers are the unique integer assignment whose
  predicted auxiliary values wrap consistently. Enumerating a bounded
  integer box and scoring the wrapped residual finds them.

* sparse reparameterization: vertices are partitioned around centers
  chosen so members rarely differ from their center by more than half the
  folding rate. Folding numbers are rewritten relative to the centers with
  a +-1 wrap correction; the rewritten unknowns are mostly zero, so an L1
  program (optionally with a noise-tolerant quadratic penalty) recovers
  them at scale.

Per-step results over a time window integrate back to absolute folding
numbers by telescoping, and recoveries at several partition radii can be
fused by per-entry majority vote.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    AmbiguousRecovery,
    BadBracket,
    BoundaryViolated,
    EmptyCandidates,
    Infeasible,
    IterationLimit,
    NoCandidate,
    SearchSpaceTooLarge,
    SingularWS,
    SolverDiverged,
)
from .partition import Partition
from .solver import solve_l1_eq, solve_lasso, solve_lasso_eq
from .spectral import EigenBasis, SampleDesign

RESIDUAL_TOL = 1e-6
AMBIGUITY_FACTOR = 10.0


def mixing_matrix(basis: EigenBasis, design: SampleDesign) -> np.ndarray:
    """Rows of auxiliary vertices expressed through the primary submatrix."""
    W = basis.vectors
    Wp = W[list(design.primary), :]
    try:
        sol = np.linalg.solve(Wp.T, W[list(design.auxiliary), :].T)
    except np.linalg.LinAlgError as exc:
        raise SingularWS("primary basis submatrix is singular") from exc
    return sol.T


@dataclass(frozen=True)
class ExactRecovery:
    snapshot: np.ndarray
    z_primary: np.ndarray
    z_aux: np.ndarray
    residual: float
    second_residual: float


def exact_recover(
    p_primary,
    p_aux,
    design: SampleDesign,
    basis: EigenBasis,
    z_bound: int,
    *,
    residual_tol: float = RESIDUAL_TOL,
) -> ExactRecovery:
    """Recover a graph-signal snapshot from folded samples by integer search.

    Enumerates candidate folding numbers at the primary vertices inside
    [-z_bound, z_bound]^K and scores each by how far the implied auxiliary
    values land from an exact multiple of the auxiliary folding rate.
    Requires a unique candidate below residual_tol; a second candidate
    within 10x of it raises AmbiguousRecovery.
    """
    p_primary = np.asarray(p_primary, dtype=float).ravel()
    p_aux = np.asarray(p_aux, dtype=float).ravel()
    K = design.k
    n_points = (2 * z_bound + 1) ** K
    if n_points > 10**7:
        raise SearchSpaceTooLarge(f"{n_points} candidates exceeds 1e7")
    A = mixing_matrix(basis, design)
    lam = design.folding_rate
    aux_rates = design.rate_vector()[K:]
    base = A @ p_primary - p_aux

    best_score = np.inf
    second_score = np.inf
    best_q: np.ndarray | None = None
    width = 2 * z_bound + 1
    shape = (width,) * K
    chunk = 1 << 16
    for start in range(0, n_points, chunk):
        idx = np.arange(start, min(start + chunk, n_points))
        qs = np.stack(np.unravel_index(idx, shape), axis=1) - z_bound
        lhs = base[None, :] + lam * (qs @ A.T)
        wrapped = lhs - aux_rates[None, :] * np.round(lhs / aux_rates[None, :])
        scores = np.max(np.abs(wrapped), axis=1)
        order = np.argsort(scores, kind="stable")[:2]
        for j in order:
            s = float(scores[j])
            if s < best_score:
                second_score = best_score
                best_score = s
                best_q = qs[j].copy()
            elif s < second_score:
                second_score = s
    if best_q is None or best_score >= residual_tol:
        raise NoCandidate(
            f"no candidate with wrapped residual below {residual_tol}"
        )
    if second_score < AMBIGUITY_FACTOR * residual_tol:
        raise AmbiguousRecovery(
            f"second-best residual {second_score:.3e} too close to "
            f"{best_score:.3e}"
        )
    y_primary = lam * best_q + p_primary
    z_aux = np.round((A @ y_primary - p_aux) / aux_rates).astype(np.int64)
    Wp = basis.vectors[list(design.primary), :]
    snapshot = basis.vectors @ np.linalg.solve(Wp, y_primary)
    return ExactRecovery(
        snapshot=snapshot,
        z_primary=best_q.astype(np.int64),
        z_aux=z_aux,
        residual=best_score,
        second_residual=float(second_score),
    )


@dataclass(frozen=True)
class AffineSubstitution:
    """Rewrite of folding numbers relative to partition centers.

    Position i of ``order`` maps to z[i] = zeta[i] + zeta[center_pos[i]]
    + offset[i] for members, and z[i] = zeta[i] for centers.
    """

    order: tuple[int, ...]
    center_pos: np.ndarray
    offsets: np.ndarray

    @property
    def size(self) -> int:
        return len(self.order)

    def is_center(self) -> np.ndarray:
        return self.center_pos == np.arange(self.size)

    def matrix(self) -> np.ndarray:
        U = np.eye(self.size)
        for i, ci in enumerate(self.center_pos):
            if ci != i:
                U[i, ci] += 1.0
        return U

    def apply(self, zeta: np.ndarray) -> np.ndarray:
        zeta = np.asarray(zeta)
        return self.matrix().astype(zeta.dtype) @ zeta + self.offsets.astype(
            zeta.dtype
        )


def substitute(
    p_bar: np.ndarray, partition: Partition, folding_rate: float, order
) -> AffineSubstitution:
    """Build the center substitution from folded difference values.

    p_bar is indexed by ``order``. The wrap-correction offset is -1 when
    the member's folded value leads its center's by at least half the rate,
    +1 for the symmetric case, else 0.
    """
    order = tuple(int(v) for v in order)
    pos = {v: i for i, v in enumerate(order)}
    p_bar = np.asarray(p_bar, dtype=float).ravel()
    center_of = partition.center_of()
    center_pos = np.zeros(len(order), dtype=int)
    offsets = np.zeros(len(order), dtype=np.int64)
    half = folding_rate / 2.0
    for i, v in enumerate(order):
        c = center_of[v]
        ci = pos[c]
        center_pos[i] = ci
        if ci == i:
            continue
        if p_bar[i] - p_bar[ci] >= half:
            offsets[i] = -1
        elif p_bar[ci] - p_bar[i] >= half:
            offsets[i] = 1
    return AffineSubstitution(order=order, center_pos=center_pos, offsets=offsets)


@dataclass(frozen=True)
class LinearSystem:
    """Equations M zeta = g; columns follow the design's vertex order."""

    matrix: np.ndarray
    rhs: np.ndarray
    columns: tuple[int, ...]


def assemble_system(
    design: SampleDesign,
    basis: EigenBasis,
    p_bar: np.ndarray,
    subst: AffineSubstitution,
) -> LinearSystem:
    """Express the folded-sample consistency equations in the zeta variables.

    One row per auxiliary vertex. The raw coefficients (-rate times the
    mixing weight on primary columns, +aux rate on the row's own column)
    pass through the substitution matrix; the wrap offsets move to the
    right-hand side.
    """
    order = design.vertices
    if tuple(subst.order) != tuple(order):
        raise ValueError("substitution order must match the design order")
    p_bar = np.asarray(p_bar, dtype=float).ravel()
    K, Ka = design.k, design.k_aux
    A = mixing_matrix(basis, design)
    C = np.zeros((Ka, K + Ka))
    C[:, :K] = -design.folding_rate * A
    C[np.arange(Ka), K + np.arange(Ka)] = design.rate_vector()[K:]
    g_raw = A @ p_bar[:K] - p_bar[K:]
    M = C @ subst.matrix()
    g = g_raw - C @ subst.offsets.astype(float)
    return LinearSystem(matrix=M, rhs=g, columns=tuple(order))


def known_folding_rows(
    subst: AffineSubstitution, known
) -> tuple[np.ndarray, np.ndarray]:
    """Equality rows pinning observed folding numbers.

    ``known`` is an iterable of (vertex, folding_number). Each contributes
    the row of the substitution matrix for that vertex with right side
    folding_number - offset.
    """
    pos = {v: i for i, v in enumerate(subst.order)}
    U = subst.matrix()
    rows = []
    rhs = []
    for v, z in known:
        i = pos[int(v)]
        rows.append(U[i, :])
        rhs.append(float(z) - float(subst.offsets[i]))
    if not rows:
        return np.zeros((0, subst.size)), np.zeros(0)
    return np.vstack(rows), np.array(rhs)


@dataclass(frozen=True)
class SparseRecovery:
    zeta_real: np.ndarray
    zeta: np.ndarray
    z_values: np.ndarray
    low_confidence: tuple[int, ...]
    residual: float


def _support_refit(
    M: np.ndarray, g: np.ndarray, support: np.ndarray, size: int
) -> np.ndarray | None:
    """Least squares restricted to a candidate support, rounded to integers."""
    if support.size == 0 or support.size > min(M.shape[0], M.shape[1]):
        return None
    sol, *_ = np.linalg.lstsq(M[:, support], g, rcond=None)
    zeta = np.zeros(size)
    zeta[support] = sol
    return np.round(zeta).astype(np.int64)


def _finalize(
    zeta_real: np.ndarray,
    system: LinearSystem,
    subst: AffineSubstitution,
    M_aug: np.ndarray,
    g_aug: np.ndarray,
) -> SparseRecovery:
    """Round to integers, polishing over a few candidate supports.

    The relaxation can smear one integer spike across several near-parallel
    columns; refitting least squares on the center columns (the rank
    condition of the partition bound) and on the relaxation's own active
    set repairs that. Candidates compete on the max-norm residual of the
    rounded vector, then on sparsity.
    """
    base = np.round(zeta_real).astype(np.int64)
    candidates = [base]
    centers = np.flatnonzero(subst.is_center())
    refit = _support_refit(M_aug, g_aug, centers, subst.size)
    if refit is not None:
        candidates.append(refit)
    active = np.flatnonzero(np.abs(zeta_real) > 0.1)
    refit = _support_refit(M_aug, g_aug, active, subst.size)
    if refit is not None:
        candidates.append(refit)
    # a whole-signal shift by multiples of the rate adds a constant to every
    # center variable; the relaxation sometimes lands on such a shifted copy,
    # so offer shifted variants and let the residual pick the true one
    center_ind = subst.is_center().astype(np.int64)
    for cand in list(candidates):
        for c in (-2, -1, 1, 2):
            candidates.append(cand + c * center_ind)

    row_scale = np.maximum(np.max(np.abs(M_aug), axis=1, initial=0.0), 1e-300)

    def resid_of(zeta):
        r = (M_aug @ zeta - g_aug) / row_scale
        return float(np.max(np.abs(r), initial=0.0))

    resids = [resid_of(z) for z in candidates]
    best = min(resids)
    zeta = min(
        (z for z, r in zip(candidates, resids) if r <= best + 1e-9),
        key=lambda z: (int(np.abs(z).sum()), tuple(z)),
    )
    frac = np.abs(zeta_real - np.round(zeta_real))
    low = tuple(
        int(system.columns[i]) for i in np.flatnonzero(np.abs(frac - 0.5) < 0.05)
    )
    z_values = subst.apply(zeta)
    resid = float(np.max(np.abs(system.matrix @ zeta - system.rhs), initial=0.0))
    return SparseRecovery(
        zeta_real=zeta_real,
        zeta=zeta.astype(np.int64),
        z_values=z_values,
        low_confidence=low,
        residual=resid,
    )


def sparse_recover(
    system: LinearSystem,
    subst: AffineSubstitution,
    known=None,
    *,
    prefer_center_support: bool = True,
) -> SparseRecovery:
    """Noiseless recovery: L1-minimal zeta under the assembled equations.

    Known folding numbers enter as hard equality rows. With
    prefer_center_support, a least-squares solve restricted to center
    columns short-circuits the L1 program whenever the augmented system has
    rank at least the component count and the refit reproduces the data
    exactly (the regime where the partition bound guarantees the support).
    """
    E, q = known_folding_rows(subst, known or [])
    M_aug = np.vstack([system.matrix, E])
    g_aug = np.concatenate([system.rhs, q])

    if prefer_center_support:
        centers = np.flatnonzero(subst.is_center())
        if centers.size <= min(M_aug.shape) and np.linalg.matrix_rank(
            M_aug
        ) >= centers.size:
            sol, *_ = np.linalg.lstsq(M_aug[:, centers], g_aug, rcond=None)
            zeta_real = np.zeros(subst.size)
            zeta_real[centers] = sol
            scale = max(1.0, float(np.max(np.abs(g_aug))) if g_aug.size else 1.0)
            if np.max(np.abs(M_aug @ zeta_real - g_aug), initial=0.0) < 1e-7 * scale:
                return _finalize(zeta_real, system, subst, M_aug, g_aug)

    try:
        sol = solve_l1_eq(M_aug, g_aug)
    except IterationLimit as exc:
        raise SolverDiverged(str(exc)) from exc
    return _finalize(sol.zeta, system, subst, M_aug, g_aug)


def sparse_recover_noisy(
    system: LinearSystem,
    alpha: float,
    subst: AffineSubstitution,
    known=None,
) -> SparseRecovery:
    """Noise-tolerant recovery: L1 plus quadratic data penalty.

    Known folding numbers stay hard constraints; with none present this is
    a plain shrinkage solve. Integer rounding reuses the same support
    polish as the noiseless path.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    E, q = known_folding_rows(subst, known or [])
    try:
        if E.shape[0] == 0:
            zeta_real = solve_lasso(system.matrix, system.rhs, alpha)
        else:
            zeta_real = solve_lasso_eq(system.matrix, system.rhs, alpha, E, q)
    except IterationLimit as exc:
        raise SolverDiverged(str(exc)) from exc
    M_aug = np.vstack([system.matrix, E])
    g_aug = np.concatenate([system.rhs, q])
    return _finalize(zeta_real, system, subst, M_aug, g_aug)


def center_folded(p_bar, rates) -> tuple[np.ndarray, np.ndarray]:
    """Move folded values to the centered representative range.

    Returns (p_tilde, shift) with p_tilde = p_bar - rate * shift in
    [-rate/2, rate/2). A value y = rate * z + p_bar then satisfies
    y = rate * (z + shift) + p_tilde, so folding numbers in the centered
    convention are z + shift. For one-step difference signals the centered
    folding numbers vanish wherever |difference| < rate/2, which is what
    makes the L1 relaxation of the recovery tight; the shift is a function
    of the observations alone, so the conversion is free.
    """
    p_bar = np.asarray(p_bar, dtype=float)
    rates = np.broadcast_to(np.asarray(rates, dtype=float), p_bar.shape)
    shift = (p_bar >= rates / 2.0).astype(np.int64)
    return p_bar - rates * shift, shift


def folding_increments(
    z_bar: np.ndarray, p_before: np.ndarray, p_after: np.ndarray
) -> np.ndarray:
    """Per-step increments of the absolute folding numbers.

    z_bar is the folding number of the one-step difference signal; the
    carry between the folded values converts it to z[n+1] - z[n]: the
    difference of two in-range folded values lies in (-rate, rate), so its
    own fold flips exactly one wrap when it is negative.
    """
    carry = np.where(np.asarray(p_after) - np.asarray(p_before) < 0, 1, 0)
    return np.asarray(z_bar, dtype=np.int64) + carry


def integrate_time(
    increments: np.ndarray,
    boundary="zero_ends",
    *,
    edge_check: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray] | None = None,
    tol: float = 1e-9,
) -> np.ndarray:
    """Cumulate per-step folding-number increments into absolute numbers.

    increments has shape (vertices, steps); the result has one more column.
    boundary is either "zero_ends" (the window edges are unfolded, so the
    first column is zero) or ("anchor", column_index, values) pinning one
    column. With edge_check = (y_first, p_first, y_last, p_last), ground
    truth at the edges is verified before trusting zero ends.
    """
    inc = np.asarray(increments, dtype=np.int64)
    nv, steps = inc.shape
    z = np.zeros((nv, steps + 1), dtype=np.int64)
    if boundary == "zero_ends":
        if edge_check is not None:
            y0, p0, y1, p1 = (np.asarray(a, dtype=float) for a in edge_check)
            if np.max(np.abs(y0 - p0), initial=0.0) > tol or np.max(
                np.abs(y1 - p1), initial=0.0
            ) > tol:
                raise BoundaryViolated("window edges are folded")
        z[:, 1:] = np.cumsum(inc, axis=1)
        return z
    if isinstance(boundary, tuple) and boundary[0] == "anchor":
        _, col, values = boundary
        col = int(col)
        if not (0 <= col <= steps):
            raise ValueError(f"anchor column {col} outside [0, {steps}]")
        values = np.asarray(values, dtype=np.int64)
        z[:, col] = values
        for j in range(col + 1, steps + 1):
            z[:, j] = z[:, j - 1] + inc[:, j - 1]
        for j in range(col - 1, -1, -1):
            z[:, j] = z[:, j + 1] - inc[:, j]
        return z
    raise ValueError(f"unknown boundary {boundary!r}")


def majority_vote(candidates) -> np.ndarray:
    """Entrywise mode across aligned folding-number maps.

    Candidates must share a shape and be ordered by ascending partition
    slack; ties are broken toward the earliest candidate holding one of the
    tied values.
    """
    cands = [np.asarray(c) for c in candidates]
    if not cands:
        raise EmptyCandidates("no candidates to fuse")
    shape = cands[0].shape
    if any(c.shape != shape for c in cands):
        raise ValueError("candidates must have equal domains")
    stack = np.stack([c.ravel() for c in cands], axis=0)
    fused = np.empty(stack.shape[1], dtype=stack.dtype)
    for j in range(stack.shape[1]):
        vals, counts = np.unique(stack[:, j], return_counts=True)
        top = vals[counts == counts.max()]
        if top.size == 1:
            fused[j] = top[0]
        else:
            tied = set(int(t) for t in top)
            for c in stack[:, j]:
                if int(c) in tied:
                    fused[j] = c
                    break
    return fused.reshape(shape)


def epsilon_search(
    component_count,
    eps_lo: float,
    eps_hi: float,
    target_components: int,
    *,
    max_iter: int = 30,
) -> float:
    """Binary search for the slack whose component count is nearest target.

    component_count(eps) must be nonincreasing in eps. Evaluates both
    endpoints plus up to max_iter midpoints and returns the best slack seen.
    """
    if not (eps_lo < eps_hi):
        raise BadBracket(f"need eps_lo < eps_hi, got ({eps_lo}, {eps_hi})")
    best_eps = None
    best_err = None

    def consider(eps: float) -> int:
        nonlocal best_eps, best_err
        c = int(component_count(eps))
        err = abs(c - target_components)
        if best_err is None or err < best_err:
            best_eps, best_err = eps, err
        return c

    consider(eps_lo)
    consider(eps_hi)
    lo, hi = eps_lo, eps_hi
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        c = consider(mid)
        if best_err == 0 and c == target_components:
            return mid
        if c > target_components:
            lo = mid
        else:
            hi = mid
    return float(best_eps)
