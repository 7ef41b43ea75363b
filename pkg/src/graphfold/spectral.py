"""Laplacian eigenbases, sample-set selection and integer-relation checks.

The recovery guarantees hinge on two spectral facts about the chosen sample
vertices: the basis submatrix restricted to them must be invertible, and the
row of mixing ratios at the extra probe vertex must admit no small integer
relation. Both are checked numerically here, the latter by bounded
exhaustive search (exact linear independence over the integers is not
decidable in floating point; a bounded search with a tight tolerance is the
practical surrogate).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import KOutOfRange, NoInvertibleSubset, NotSymmetric, SearchSpaceTooLarge
from .graphs import WeightedGraph, laplacian, random_weighted_model

DEFAULT_MAX_COEFF = 10
DEFAULT_RELATION_TOL = 1e-9


@dataclass(frozen=True)
class EigenBasis:
    """First K orthonormal Laplacian eigenvectors.

    vectors: (n, K) with columns ordered by ascending eigenvalue.
    """

    vectors: np.ndarray
    eigenvalues: np.ndarray

    @property
    def n(self) -> int:
        return self.vectors.shape[0]

    @property
    def k(self) -> int:
        return self.vectors.shape[1]


@dataclass(frozen=True)
class SampleDesign:
    """Vertices observed by the folding sensors.

    primary: K vertices whose basis submatrix is invertible, folding rate
    ``folding_rate``. auxiliary: K' >= 1 extra vertices; the ``probe`` is
    the auxiliary vertex whose mixing row carries the
    integer-independence requirement and which runs at the derated
    ``probe_folding_rate`` (every other vertex runs at ``folding_rate``).
    The distinct probe rate is what excludes whole-signal shifts by
    multiples of the rate, which are otherwise invisible to folding.
    """

    primary: tuple[int, ...]
    auxiliary: tuple[int, ...]
    probe: int
    folding_rate: float
    probe_folding_rate: float

    @property
    def k(self) -> int:
        return len(self.primary)

    @property
    def k_aux(self) -> int:
        return len(self.auxiliary)

    @property
    def vertices(self) -> tuple[int, ...]:
        return self.primary + self.auxiliary

    def rate_vector(self) -> np.ndarray:
        """Folding rate per vertex, in ``vertices`` order."""
        rates = np.full(self.k + self.k_aux, self.folding_rate)
        for i, v in enumerate(self.auxiliary):
            if v == self.probe:
                rates[self.k + i] = self.probe_folding_rate
        return rates


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive."""
    out = vectors.copy()
    for j in range(out.shape[1]):
        i = int(np.argmax(np.abs(out[:, j])))
        if out[i, j] < 0:
            out[:, j] = -out[:, j]
    return out


def eigenbasis(L: np.ndarray, K: int) -> EigenBasis:
    """First K eigenvectors of a symmetric Laplacian, ascending eigenvalues.

    Signs are fixed deterministically (largest-magnitude entry positive).
    Repeated eigenvalues keep the decomposition's output order; callers that
    care about degeneracy should inspect the eigenvalue gaps themselves.
    """
    L = np.asarray(L, dtype=float)
    n = L.shape[0]
    if L.ndim != 2 or L.shape[1] != n:
        raise NotSymmetric("Laplacian must be square")
    scale = max(1.0, float(np.max(np.abs(L))))
    if np.max(np.abs(L - L.T)) > 1e-10 * scale:
        raise NotSymmetric("Laplacian is not symmetric")
    if not (1 <= K <= n):
        raise KOutOfRange(f"K={K} outside [1, {n}]")
    vals, vecs = np.linalg.eigh(L)
    return EigenBasis(vectors=_fix_signs(vecs[:, :K]), eigenvalues=vals[:K].copy())


def all_eigenpairs(L: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Full spectrum (eigenvalues ascending, sign-fixed eigenvectors)."""
    vals, vecs = np.linalg.eigh(np.asarray(L, dtype=float))
    return vals, _fix_signs(vecs)


def select_invertible_sample(
    basis: EigenBasis, candidates, *, pivot_tol: float = 1e-10,
    min_pivot_ratio: float = 0.0
) -> list[int]:
    """Pick K candidate vertices whose basis rows form an invertible matrix.

    Greedy volume maximization: QR with column pivoting on the transposed
    candidate rows selects, at each step, the row with the largest component
    orthogonal to the rows already chosen, which maximizes the determinant
    of the growing submatrix. Returns vertices in selection order.

    min_pivot_ratio optionally rejects selections whose last pivot is tiny
    relative to the first (a conditioning floor rather than a bare
    invertibility test).
    """
    cand = list(candidates)
    K = basis.k
    if len(cand) < K:
        raise NoInvertibleSubset(f"need at least {K} candidates, got {len(cand)}")
    rows = basis.vectors[cand, :]
    _, R, piv = scipy.linalg.qr(rows.T, pivoting=True, mode="economic")
    diag = np.abs(np.diag(R))
    floor = max(pivot_tol, min_pivot_ratio * (diag[0] if diag.size else 0.0))
    if diag.shape[0] < K or diag[K - 1] < floor:
        raise NoInvertibleSubset("all remaining pivots below tolerance")
    return [cand[i] for i in piv[:K]]


def scaled_abs_det(rows: np.ndarray) -> float:
    """|det| after normalizing each row to unit length (scale-free test)."""
    norms = np.linalg.norm(rows, axis=1)
    if np.any(norms < 1e-300):
        return 0.0
    sign, logdet = np.linalg.slogdet(rows / norms[:, None])
    if sign == 0:
        return 0.0
    return float(np.exp(logdet))


def find_integer_relation(
    row,
    *,
    include_one: bool = False,
    max_coeff: int = DEFAULT_MAX_COEFF,
    tol: float = DEFAULT_RELATION_TOL,
) -> tuple[int, ...] | None:
    """Search for a small integer relation among the given reals.

    Looks for nonzero integer coefficients q in {-max_coeff..max_coeff}^K
    with |sum_j q_j row_j| < tol; with include_one an extra integer b is
    appended so the relation tested is sum_j q_j row_j + b. Returns the
    first relation in lexicographic order over (q_1..q_K[, b]) or None.

    A None result is evidence (not proof) that the numbers are linearly
    independent over the integers at this coefficient bound and tolerance.
    """
    row = np.asarray(row, dtype=float).ravel()
    if max_coeff < 1:
        raise ValueError("max_coeff must be >= 1")
    if tol <= 0:
        raise ValueError("tol must be positive")
    k = row.shape[0]
    dims = k + (1 if include_one else 0)
    n_points = (2 * max_coeff + 1) ** dims
    if n_points > 10**8:
        raise SearchSpaceTooLarge(f"grid of {n_points} points exceeds 1e8")

    coeffs = row if not include_one else np.concatenate([row, [1.0]])
    base = 2 * max_coeff + 1
    chunk = 1 << 18
    shape = (base,) * dims
    for start in range(0, n_points, chunk):
        idx = np.arange(start, min(start + chunk, n_points))
        digits = np.stack(np.unravel_index(idx, shape), axis=1) - max_coeff
        vals = np.abs(digits @ coeffs)
        nonzero = np.any(digits != 0, axis=1)
        hits = np.flatnonzero((vals < tol) & nonzero)
        if hits.size:
            return tuple(int(x) for x in digits[hits[0]])
    return None


# Empirical properties of random weighted models. Each predicate receives
# the full spectrum plus the (K, S, u) selection and returns a bool.
PROPERTY_NAMES = {
    "P0": "distinct-eigenvalues",
    "P1": "invertible-sample",
    "P2": "integer-independent-row",
    "P3": "row-has-irrational-entry",
    "P4": "integer-independent-row-with-one",
}


def _mixing_row(vecs: np.ndarray, K: int, S, u: int) -> np.ndarray:
    W = vecs[:, :K]
    WS = W[list(S), :]
    return np.linalg.solve(WS.T, W[u, :]).ravel()


def check_property(
    name: str,
    eigenvalues: np.ndarray,
    eigenvectors: np.ndarray,
    *,
    K: int | None = None,
    S=None,
    u: int | None = None,
    max_coeff: int = DEFAULT_MAX_COEFF,
    tol: float = DEFAULT_RELATION_TOL,
    gap_tol: float = 1e-8,
    det_tol: float = 1e-10,
) -> bool:
    """Evaluate one spectral property on a single weighted model."""
    name = name.upper()
    if name == "P0":
        gaps = np.diff(np.sort(eigenvalues))
        return bool(np.all(gaps > gap_tol))
    if K is None or S is None:
        raise ValueError(f"property {name} needs K and S")
    W = eigenvectors[:, :K]
    rows = W[list(S), :]
    if name == "P1":
        return scaled_abs_det(rows) > det_tol
    # P2..P4 implicitly require the submatrix to be invertible.
    if scaled_abs_det(rows) <= det_tol:
        return False
    if u is None:
        raise ValueError(f"property {name} needs the probe vertex u")
    mix = _mixing_row(eigenvectors, K, S, u)
    if name == "P2":
        return find_integer_relation(mix, max_coeff=max_coeff, tol=tol) is None
    if name == "P3":
        # An entry with no small rational relation q*x + b = 0 counts as
        # irrational at this tolerance; the property needs at least one.
        for x in mix:
            rel = find_integer_relation([x], include_one=True, max_coeff=max_coeff, tol=tol)
            if rel is None:
                return True
        return False
    if name == "P4":
        return (
            find_integer_relation(mix, include_one=True, max_coeff=max_coeff, tol=tol)
            is None
        )
    raise ValueError(f"unknown property {name!r}")


def property_harness(
    topology: WeightedGraph,
    name: str,
    *,
    K: int | None = None,
    S=None,
    u: int | None = None,
    trials: int = 100,
    seed: int = 0,
    lo: float = 0.5,
    hi: float = 1.5,
    max_coeff: int = DEFAULT_MAX_COEFF,
    tol: float = DEFAULT_RELATION_TOL,
) -> float:
    """Fraction of random weighted models of the topology satisfying a property.

    Trial t draws edge weights with seed ``seed + t``, so runs are
    reproducible and individual trials can be replayed.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    hits = 0
    for t in range(trials):
        model = random_weighted_model(topology, lo, hi, seed + t)
        vals, vecs = all_eigenpairs(laplacian(model))
        if check_property(
            name, vals, vecs, K=K, S=S, u=u, max_coeff=max_coeff, tol=tol
        ):
            hits += 1
    return hits / trials


def check_all_subsets_property(
    name: str,
    eigenvalues: np.ndarray,
    eigenvectors: np.ndarray,
    *,
    K: int,
    S,
    u: int | None = None,
    max_coeff: int = DEFAULT_MAX_COEFF,
    tol: float = DEFAULT_RELATION_TOL,
    max_subsets: int = 500,
) -> bool:
    """Strong variant: the P-check must pass for every K-subset of eigenvectors.

    Enumerates all K-subsets of the full spectrum (refused above
    ``max_subsets`` combinations) and applies the corresponding property
    check with that subset as the working basis.
    """
    n = eigenvectors.shape[0]
    import math

    if math.comb(n, K) > max_subsets:
        raise SearchSpaceTooLarge(
            f"C({n},{K}) = {math.comb(n, K)} subsets exceeds {max_subsets}"
        )
    for subset in itertools.combinations(range(n), K):
        sub_vecs = eigenvectors[:, list(subset)]
        ok = check_property(
            name,
            eigenvalues[list(subset)],
            sub_vecs,
            K=K,
            S=S,
            u=u,
            max_coeff=max_coeff,
            tol=tol,
        )
        if not ok:
            return False
    return True
