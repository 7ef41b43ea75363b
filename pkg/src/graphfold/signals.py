"""Bandlimited continuous-time graph signals, sampling, folding and noise.

A signal assigns each vertex a real waveform. It is doubly bandlimited:
in the vertex domain it lies in the span of the first K Laplacian
eigenvectors, and in time every waveform has spectrum inside [-B, B] Hz.
The joint spectrum d[k, f] lives on a uniform frequency grid and is bounded
entrywise by a nonnegative profile a[k, f]; time integrals are evaluated by
trapezoidal quadrature on that same grid so that the variation bounds used
for sampling share the discretization exactly.

Folding models a self-reset ADC: a reading x is stored as x = rate * z + p
with integer z (the folding number) and p in [0, rate).
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyBounds, OutOfWindow, VertexOutOfRange
from .spectral import EigenBasis


@dataclass(frozen=True)
class SpectralBounds:
    """Entrywise bounds a[k, f] >= 0 on the joint spectrum.

    The frequency grid is linspace(-bandlimit, bandlimit, F), symmetric
    about zero.
    """

    bandlimit: float
    a: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float)
        if a.ndim != 2 or a.shape[1] < 2:
            raise EmptyBounds("bounds need shape (K, F) with F >= 2")
        if np.any(a < 0):
            raise EmptyBounds("bounds must be nonnegative")
        object.__setattr__(self, "a", a)

    @property
    def k(self) -> int:
        return self.a.shape[0]

    @property
    def n_freq(self) -> int:
        return self.a.shape[1]

    @property
    def freqs(self) -> np.ndarray:
        return np.linspace(-self.bandlimit, self.bandlimit, self.n_freq)

    @property
    def quad_weights(self) -> np.ndarray:
        """Trapezoid weights for integrating over [-B, B] on the grid."""
        df = 2.0 * self.bandlimit / (self.n_freq - 1)
        w = np.full(self.n_freq, df)
        w[0] = w[-1] = df / 2.0
        return w


def inverse_kf_bounds(
    K: int, bandlimit: float = 1.0, n_freq: int = 65, scale: float = 1.0
) -> SpectralBounds:
    """Bound profile a[k, f] = scale / ((k+1) * (1 + |f|))."""
    f = np.linspace(-bandlimit, bandlimit, n_freq)
    k = np.arange(1, K + 1)
    return SpectralBounds(bandlimit, scale / (k[:, None] * (1.0 + np.abs(f)[None, :])))


@dataclass(frozen=True)
class GraphTimeSignal:
    """Continuous-time graph signal with joint spectrum d[k, f].

    d is conjugate-symmetric across the frequency grid (d[k, -f] is the
    conjugate of d[k, f]) so evaluated values are real.
    """

    basis: EigenBasis
    bounds: SpectralBounds
    d: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.d, dtype=complex)
        if d.shape != self.bounds.a.shape:
            raise EmptyBounds("coefficient array must match the bounds grid")
        if np.any(np.abs(d) > self.bounds.a + 1e-12):
            raise EmptyBounds("coefficients exceed their bounds")
        if np.max(np.abs(d - np.conj(d[:, ::-1]))) > 1e-12:
            raise EmptyBounds("coefficients are not conjugate-symmetric")
        object.__setattr__(self, "d", d)

    @property
    def sample_interval(self) -> float:
        """Nyquist interval 1 / (2B)."""
        return 1.0 / (2.0 * self.bounds.bandlimit)


@dataclass(frozen=True)
class SampledSignal:
    """Uniform time samples y[v, n] on an inclusive window of sample indices."""

    values: np.ndarray
    vertices: np.ndarray
    n_min: int
    sample_interval: float

    @property
    def n_steps(self) -> int:
        return self.values.shape[1]

    @property
    def n_max(self) -> int:
        return self.n_min + self.n_steps - 1


@dataclass(frozen=True)
class FoldedObservation:
    """Folded samples p[v, n] in [0, rate_v) with per-vertex folding rates.

    folding_numbers carries the simulation ground truth and is None once
    noise has been injected (the sensor never reports it).
    """

    folded: np.ndarray
    folding_rates: np.ndarray
    vertices: np.ndarray
    n_min: int
    sample_interval: float
    folding_numbers: np.ndarray | None = None


def generate_signal(
    basis: EigenBasis, bounds: SpectralBounds, n_atoms: int, seed: int
) -> GraphTimeSignal:
    """Draw a random signal obeying the bounds.

    Picks n_atoms distinct grid positions (k, f) with f >= 0, gives each a
    magnitude uniform in [0, min(a[k,f], a[k,-f])] and a uniform phase, and
    mirrors conjugate-symmetrically. Zero-frequency atoms get a random sign
    instead of a phase so they stay real.
    """
    if basis.k != bounds.k:
        raise EmptyBounds("basis and bounds disagree on K")
    if n_atoms < 1:
        raise ValueError("n_atoms must be >= 1")
    K, F = bounds.a.shape
    half = [(k, j) for k in range(K) for j in range(F) if bounds.freqs[j] >= 0]
    rng = np.random.default_rng(seed)
    take = min(n_atoms, len(half))
    chosen = rng.choice(len(half), size=take, replace=False)
    d = np.zeros((K, F), dtype=complex)
    freqs = bounds.freqs
    for idx in chosen:
        k, j = half[idx]
        jm = F - 1 - j
        mag = rng.uniform(0.0, min(bounds.a[k, j], bounds.a[k, jm]))
        if freqs[j] == 0.0:
            d[k, j] = mag if rng.uniform() < 0.5 else -mag
        else:
            phase = rng.uniform(0.0, 2.0 * math.pi)
            d[k, j] = mag * np.exp(1j * phase)
            d[k, jm] = np.conj(d[k, j])
    return GraphTimeSignal(basis=basis, bounds=bounds, d=d)


def dense_atom_count(bounds: SpectralBounds) -> int:
    """Number of independent (k, f >= 0) grid atoms (a full draw)."""
    return bounds.k * int(np.count_nonzero(bounds.freqs >= 0))


def _time_coefficients(x: GraphTimeSignal, times: np.ndarray) -> np.ndarray:
    """Quadrature of the frequency integral: (K, len(times)) complex."""
    wd = x.d * x.bounds.quad_weights[None, :]
    phases = np.exp(2j * math.pi * np.outer(x.bounds.freqs, times))
    return wd @ phases


def evaluate(x: GraphTimeSignal, v: int, t: float) -> float:
    """Signal value at one vertex and time."""
    if not (0 <= v < x.basis.n):
        raise VertexOutOfRange(f"vertex {v} outside [0, {x.basis.n})")
    b = _time_coefficients(x, np.array([t]))[:, 0]
    return float(np.real(x.basis.vectors[v, :] @ b))


def evaluate_snapshot(x: GraphTimeSignal, t: float) -> np.ndarray:
    """Signal values at all vertices at time t."""
    b = _time_coefficients(x, np.array([t]))[:, 0]
    return np.real(x.basis.vectors @ b)


def sample_time(x: GraphTimeSignal, n_min: int, n_max: int) -> SampledSignal:
    """Samples at t = n * T0 for n in [n_min, n_max] (inclusive)."""
    if n_min > n_max:
        raise ValueError("empty window")
    T0 = x.sample_interval
    times = np.arange(n_min, n_max + 1) * T0
    b = _time_coefficients(x, times)
    values = np.real(x.basis.vectors @ b)
    return SampledSignal(
        values=values,
        vertices=np.arange(x.basis.n),
        n_min=n_min,
        sample_interval=T0,
    )


def sinc_interpolate(y: SampledSignal, v: int, t: float) -> float:
    """Truncated Whittaker-Shannon interpolation from the sampled window."""
    pos = np.flatnonzero(y.vertices == v)
    if pos.size == 0:
        raise VertexOutOfRange(f"vertex {v} not in the sampled set")
    T0 = y.sample_interval
    if not (y.n_min * T0 - 1e-12 <= t <= y.n_max * T0 + 1e-12):
        raise OutOfWindow(f"t={t} outside [{y.n_min * T0}, {y.n_max * T0}]")
    n = np.arange(y.n_min, y.n_max + 1)
    return float(y.values[pos[0], :] @ np.sinc(t / T0 - n))


def fold(value: float, rate: float) -> tuple[int, float]:
    """Decompose value = rate * z + p with p in [0, rate)."""
    if rate <= 0:
        raise ValueError("folding rate must be positive")
    z = math.floor(value / rate)
    p = value - rate * z
    if p >= rate:  # guards the rounding edge just below a multiple of rate
        p -= rate
        z += 1
    if p < 0.0:
        p = 0.0
    return z, p


def fold_array(values: np.ndarray, rates: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized fold; rates broadcasts against values."""
    values = np.asarray(values, dtype=float)
    rates = np.broadcast_to(np.asarray(rates, dtype=float), values.shape)
    z = np.floor(values / rates)
    p = values - rates * z
    over = p >= rates
    z[over] += 1.0
    p[over] -= rates[over]
    np.clip(p, 0.0, None, out=p)
    return z.astype(np.int64), p


def fold_signal(y: SampledSignal, folding_rates) -> FoldedObservation:
    """Fold every sample; rates may be scalar or per-vertex."""
    rates = np.broadcast_to(
        np.asarray(folding_rates, dtype=float), (y.values.shape[0],)
    ).copy()
    if np.any(rates <= 0):
        raise ValueError("folding rates must be positive")
    z, p = fold_array(y.values, rates[:, None])
    return FoldedObservation(
        folded=p,
        folding_rates=rates,
        vertices=y.vertices.copy(),
        n_min=y.n_min,
        sample_interval=y.sample_interval,
        folding_numbers=z,
    )


def unfold(obs: FoldedObservation) -> np.ndarray:
    """Reassemble values from folded samples and known folding numbers."""
    if obs.folding_numbers is None:
        raise ValueError("folding numbers unknown; cannot unfold")
    return obs.folding_rates[:, None] * obs.folding_numbers + obs.folded


def add_noise_refold(
    obs: FoldedObservation, snr_db: float, seed: int
) -> FoldedObservation:
    """White Gaussian noise on the folded readings, re-wrapped into range.

    Noise power is the mean square of the folded values times
    10^(-snr/10). The sensor digitizes the folded voltage, so the noisy
    reading wraps back into [0, rate). Ground-truth folding numbers are
    dropped (they no longer describe the perturbed readings). snr_db = inf
    is the no-noise sentinel and returns the observation unchanged.
    """
    if math.isinf(snr_db) and snr_db > 0:
        return obs
    if not math.isfinite(snr_db):
        raise ValueError("snr_db must be finite or +inf")
    rng = np.random.default_rng(seed)
    power = float(np.mean(obs.folded**2))
    sigma = math.sqrt(power * 10.0 ** (-snr_db / 10.0))
    noisy = obs.folded + rng.normal(0.0, sigma, size=obs.folded.shape)
    _, p = fold_array(noisy, obs.folding_rates[:, None])
    return FoldedObservation(
        folded=p,
        folding_rates=obs.folding_rates.copy(),
        vertices=obs.vertices.copy(),
        n_min=obs.n_min,
        sample_interval=obs.sample_interval,
        folding_numbers=None,
    )


def restrict(obs_or_signal, vertices) -> SampledSignal | FoldedObservation:
    """Restrict a sampled signal or folded observation to a vertex subset."""
    vertices = np.asarray(list(vertices), dtype=int)
    lookup = {int(v): i for i, v in enumerate(obs_or_signal.vertices)}
    rows = np.array([lookup[int(v)] for v in vertices])
    if isinstance(obs_or_signal, SampledSignal):
        return SampledSignal(
            values=obs_or_signal.values[rows, :].copy(),
            vertices=vertices,
            n_min=obs_or_signal.n_min,
            sample_interval=obs_or_signal.sample_interval,
        )
    z = obs_or_signal.folding_numbers
    return FoldedObservation(
        folded=obs_or_signal.folded[rows, :].copy(),
        folding_rates=obs_or_signal.folding_rates[rows].copy(),
        vertices=vertices,
        n_min=obs_or_signal.n_min,
        sample_interval=obs_or_signal.sample_interval,
        folding_numbers=None if z is None else z[rows, :].copy(),
    )


# ---------------------------------------------------------------------------
# serialization: CSV value tables plus a JSON metadata sidecar


def save_sampled_csv(y: SampledSignal, path, metadata: dict | None = None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["vertex", "n", "value"])
        for i, v in enumerate(y.vertices):
            for j in range(y.n_steps):
                writer.writerow([int(v), y.n_min + j, repr(float(y.values[i, j]))])
    _write_sidecar(path, {"n_min": y.n_min, "sample_interval": y.sample_interval},
                   metadata)


def load_sampled_csv(path) -> SampledSignal:
    meta = _read_sidecar(path)
    rows = _read_value_rows(path, ("vertex", "n", "value"))
    return SampledSignal(
        values=rows["table"],
        vertices=rows["vertices"],
        n_min=int(meta["n_min"]),
        sample_interval=float(meta["sample_interval"]),
    )


def save_folded_csv(obs: FoldedObservation, path, metadata: dict | None = None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["vertex", "n", "p", "lambda"])
        for i, v in enumerate(obs.vertices):
            for j in range(obs.folded.shape[1]):
                writer.writerow(
                    [
                        int(v),
                        obs.n_min + j,
                        repr(float(obs.folded[i, j])),
                        repr(float(obs.folding_rates[i])),
                    ]
                )
    _write_sidecar(
        path, {"n_min": obs.n_min, "sample_interval": obs.sample_interval}, metadata
    )


def load_folded_csv(path) -> FoldedObservation:
    meta = _read_sidecar(path)
    rows = _read_value_rows(path, ("vertex", "n", "p", "lambda"))
    return FoldedObservation(
        folded=rows["table"],
        folding_rates=rows["rates"],
        vertices=rows["vertices"],
        n_min=int(meta["n_min"]),
        sample_interval=float(meta["sample_interval"]),
        folding_numbers=None,
    )


def _write_sidecar(path, base: dict, metadata: dict | None) -> None:
    meta = dict(base)
    if metadata:
        meta.update(metadata)
    with open(f"{path}.meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _read_sidecar(path) -> dict:
    with open(f"{path}.meta.json", "r", encoding="utf-8") as fh:
        return json.load(fh)


def _read_value_rows(path, header) -> dict:
    per_vertex: dict[int, dict[int, tuple]] = {}
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        got = tuple(next(reader))
        if got != tuple(header):
            raise ValueError(f"expected header {header}, got {got}")
        for row in reader:
            v, n = int(row[0]), int(row[1])
            per_vertex.setdefault(v, {})[n] = tuple(float(x) for x in row[2:])
    vertices = np.array(sorted(per_vertex), dtype=int)
    ns = sorted({n for d in per_vertex.values() for n in d})
    table = np.zeros((len(vertices), len(ns)))
    rates = np.zeros(len(vertices))
    for i, v in enumerate(vertices):
        for j, n in enumerate(ns):
            vals = per_vertex[int(v)][n]
            table[i, j] = vals[0]
            if len(vals) > 1:
                rates[i] = vals[1]
    return {"table": table, "vertices": vertices, "rates": rates}
