"""Vertex partitioning driven by a worst-case signal-variation metric.

The metric bounds how much the one-step difference of any admissible signal
can differ between two vertices: per eigenvector i the spectral bounds are
integrated against the one-step phase increment magnitude
sqrt(2 * (1 - cos(pi * f / B))), giving a coefficient gamma_i, and

    dist(u, v) = sum_i gamma_i * |w_i(u) - w_i(v)|,

a weighted L1 pseudo-metric on basis rows. Vertices within dist < rate/2 of
a common center are guaranteed to share their folding-number bookkeeping up
to one wrap, which is what makes the sparse recovery below work.

Covering vertices with metric balls is a max-cover problem; the ball-union
size is submodular, so the classic greedy gives the usual approximation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .errors import DimensionMismatch, TooLargeForExact, Uncoverable
from .signals import SpectralBounds
from .spectral import EigenBasis


def variation_matrix(
    basis: EigenBasis, bounds: SpectralBounds | None = None
) -> np.ndarray:
    """Pairwise worst-case one-step variation between vertices.

    With bounds given, per-eigenvector coefficients come from trapezoid
    quadrature of the bounds against the one-step phase increment. Without
    bounds (the pure image setting, where there is no time axis) the
    integral factor is dropped and all coefficients are 1.
    """
    W = basis.vectors
    if bounds is None:
        gamma = np.ones(basis.k)
    else:
        if bounds.k != basis.k:
            raise DimensionMismatch(
                f"basis K={basis.k} but bounds K={bounds.k}"
            )
        f = bounds.freqs
        step_gain = np.sqrt(2.0) * np.sqrt(
            np.maximum(0.0, 1.0 - np.cos(math.pi * f / bounds.bandlimit))
        )
        gamma = (bounds.a * (bounds.quad_weights * step_gain)[None, :]).sum(axis=1)
    scaled = W * gamma[None, :]
    dist = cdist(scaled, scaled, metric="cityblock")
    np.fill_diagonal(dist, 0.0)
    return np.minimum(dist, dist.T)  # symmetrize away rounding noise


def variation_coefficients(bounds: SpectralBounds) -> np.ndarray:
    """The per-eigenvector quadrature coefficients gamma_i."""
    f = bounds.freqs
    step_gain = np.sqrt(2.0) * np.sqrt(
        np.maximum(0.0, 1.0 - np.cos(math.pi * f / bounds.bandlimit))
    )
    return (bounds.a * (bounds.quad_weights * step_gain)[None, :]).sum(axis=1)


def ball(dist: np.ndarray, v: int, radius: float) -> np.ndarray:
    """Vertices strictly within radius of v (always includes v)."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    return np.flatnonzero(dist[v, :] < radius)


def greedy_cover(
    dist: np.ndarray, radius: float, min_covered: int
) -> tuple[list[int], np.ndarray]:
    """Greedily pick centers until their ball union covers min_covered vertices.

    Each step adds the vertex whose ball contributes the most uncovered
    vertices, ties to the lowest id. Returns (centers in selection order,
    covered vertex ids sorted ascending).
    """
    n = dist.shape[0]
    if not (1 <= min_covered <= n):
        raise ValueError(f"min_covered={min_covered} outside [1, {n}]")
    in_ball = dist < radius  # rows: centers
    covered = np.zeros(n, dtype=bool)
    centers: list[int] = []
    while covered.sum() < min_covered:
        gains = (in_ball & ~covered[None, :]).sum(axis=1)
        c = int(np.argmax(gains))  # argmax takes the first max: lowest id
        centers.append(c)
        covered |= in_ball[c, :]
    return centers, np.flatnonzero(covered)


@dataclass(frozen=True)
class Partition:
    """Disjoint components of a vertex set, each within radius of its center."""

    v_prime: tuple[int, ...]
    centers: tuple[int, ...]
    members: tuple[tuple[int, ...], ...]
    radius: float

    @property
    def n_components(self) -> int:
        return len(self.centers)

    def center_of(self) -> dict[int, int]:
        out = {}
        for c, mem in zip(self.centers, self.members):
            for v in mem:
                out[v] = c
        return out

    def to_json_dict(self) -> dict:
        return {
            "r": self.radius,
            "components": [
                {"center": int(c), "members": [int(v) for v in mem]}
                for c, mem in zip(self.centers, self.members)
            ],
        }


def admissible_partition(
    v_prime, centers, dist: np.ndarray, radius: float
) -> Partition:
    """Assign every vertex of v_prime to its nearest center within radius.

    Ties go to the earliest center in the list; centers always belong to
    their own component. Raises Uncoverable if some vertex is not strictly
    within radius of any center.
    """
    v_prime = [int(v) for v in v_prime]
    centers = [int(c) for c in centers]
    center_set = set(centers)
    buckets: dict[int, list[int]] = {c: [] for c in centers}
    for v in v_prime:
        if v in center_set:
            buckets[v].append(v)
            continue
        dists = np.array([dist[c, v] for c in centers])
        best = int(np.argmin(dists))
        if not (dists[best] < radius):
            raise Uncoverable(f"vertex {v} has no center within {radius}")
        buckets[centers[best]].append(v)
    kept = [(c, tuple(sorted(buckets[c]))) for c in centers if buckets[c]]
    return Partition(
        v_prime=tuple(sorted(v_prime)),
        centers=tuple(c for c, _ in kept),
        members=tuple(m for _, m in kept),
        radius=radius,
    )


def _balls_within(dist: np.ndarray, v_prime: list[int], radius: float) -> list[int]:
    """Bitmask (over v_prime positions) of each candidate center's ball."""
    masks = []
    for c in v_prime:
        m = 0
        for j, v in enumerate(v_prime):
            if dist[c, v] < radius:
                m |= 1 << j
        masks.append(m)
    return masks


def _greedy_cover_count(masks: list[int], full: int) -> int:
    covered = 0
    count = 0
    while covered != full:
        best_gain, best = -1, -1
        for i, m in enumerate(masks):
            gain = bin(m & ~covered).count("1")
            if gain > best_gain:
                best_gain, best = gain, i
        covered |= masks[best]
        count += 1
    return count


def partition_complexity(
    v_prime, radius: float, dist: np.ndarray, mode: str = "exact"
) -> int:
    """Minimum number of components in an admissible partition of v_prime.

    Exact mode solves the minimum ball cover (centers restricted to
    v_prime) by branch and bound, refused above 20 vertices. Greedy mode
    returns the greedy cover size, an upper bound.
    """
    v_prime = sorted(int(v) for v in v_prime)
    m = len(v_prime)
    if m == 0:
        return 0
    masks = _balls_within(dist, v_prime, radius)
    full = (1 << m) - 1
    for j, mask in enumerate(masks):
        if not (mask >> j) & 1:
            raise Uncoverable(f"vertex {v_prime[j]} not within radius of itself")
    if mode == "greedy":
        return _greedy_cover_count(masks, full)
    if mode != "exact":
        raise ValueError("mode must be 'exact' or 'greedy'")
    if m > 20:
        raise TooLargeForExact(f"|V'|={m} exceeds 20; use mode='greedy'")

    best = _greedy_cover_count(masks, full)
    max_ball = max(bin(x).count("1") for x in masks)
    order = sorted(range(m), key=lambda i: -bin(masks[i]).count("1"))

    def search(covered: int, used: int) -> None:
        nonlocal best
        if covered == full:
            best = min(best, used)
            return
        remaining = bin(full & ~covered).count("1")
        if used + math.ceil(remaining / max_ball) >= best:
            return
        # branch on the uncovered vertex with the fewest covering balls
        uncovered = full & ~covered
        pick, pick_count = -1, m + 1
        for j in range(m):
            if (uncovered >> j) & 1:
                cnt = sum(1 for mask in masks if (mask >> j) & 1)
                if cnt < pick_count:
                    pick, pick_count = j, cnt
        for i in order:
            if (masks[i] >> pick) & 1:
                search(covered | masks[i], used + 1)

    search(0, 0)
    return best


def folding_sparsity(values, folding_rate: float) -> int:
    """Degrees of freedom among folding numbers of a value vector.

    Two entries closer than rate/2 determine each other's folding numbers,
    and determination chains. The result is the number of connected
    components of the closeness graph: the minimum count of folding numbers
    that must be known for the rest to follow.
    """
    if folding_rate <= 0:
        raise ValueError("folding rate must be positive")
    values = np.asarray(values, dtype=float).ravel()
    n = values.shape[0]
    if n == 0:
        return 0
    order = np.argsort(values)
    # in sorted order, components are separated exactly at gaps >= rate/2
    comps = 1
    sv = values[order]
    comps += int(np.count_nonzero(np.diff(sv) >= folding_rate / 2.0))
    return comps
