"""Reproducible experiment driver: generate, fold, sample, recover, sweep.

One trial draws a weighted model of the configured topology, generates a
random doubly-bandlimited signal, folds the Nyquist samples, and recovers
the folding numbers of every one-step difference at a sweep of partition
radii and noise levels. Aggregates land in a CSV (with the config embedded
as a leading comment) plus a JSON summary; every artifact records its seed.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import ConfigInvalid, GraphFoldError, Uncoverable
from .partition import Partition
from .graphs import (
    WeightedGraph,
    laplacian,
    random_weighted_model,
    read_edge_list,
    standard_topology,
)
from .partition import admissible_partition, greedy_cover, variation_matrix
from .recovery import (
    assemble_system,
    center_folded,
    sparse_recover,
    sparse_recover_noisy,
    substitute,
)
from .signals import (
    SpectralBounds,
    dense_atom_count,
    fold_array,
    fold_signal,
    generate_signal,
    inverse_kf_bounds,
    restrict,
    sample_time,
)
from .spectral import EigenBasis, SampleDesign, eigenbasis, select_invertible_sample
from .image import trim_cover

NOISELESS = float("inf")


@dataclass
class ExperimentConfig:
    graph_kind: str = "powerplant47"
    graph_sizes: tuple[int, ...] = ()
    graph_path: str | None = None
    random_weights: tuple[float, float] | None = (0.5, 1.5)
    k: int = 20
    k_aux: int = 10
    bandlimit: float = 1.0
    n_freq: int = 33
    bounds_scale: float = 1.0
    n_atoms: int | None = None  # None: one atom per (k, f>=0) grid point
    window: tuple[int, int] = (0, 6)
    folding_fraction: float = 0.6
    aux_rate_range: tuple[float, float] = (0.5, 1.0)  # fraction of the rate
    snr_db: tuple[float, ...] = (NOISELESS,)
    eps_over_rate: tuple[float, ...] | None = None  # None: auto bracket
    n_eps: int = 7
    alpha_scale: float = 100.0  # alpha = scale / rate^2
    trials: int = 20
    seed: int = 0

    def validate(self) -> None:
        if self.trials < 1:
            raise ConfigInvalid("trials must be >= 1")
        if self.k < 1 or self.k_aux < 1:
            raise ConfigInvalid("k and k_aux must be >= 1")
        if self.window[0] >= self.window[1]:
            raise ConfigInvalid("window must span at least one step")
        if self.folding_fraction <= 0:
            raise ConfigInvalid("folding_fraction must be positive")
        lo, hi = self.aux_rate_range
        if not (0 < lo < hi <= 1):
            raise ConfigInvalid("aux_rate_range must satisfy 0 < lo < hi <= 1")

    def to_json_dict(self) -> dict:
        out = dict(self.__dict__)
        out["snr_db"] = [("inf" if math.isinf(s) else s) for s in self.snr_db]
        for key in ("graph_sizes", "window", "aux_rate_range"):
            out[key] = list(out[key])
        if out["random_weights"] is not None:
            out["random_weights"] = list(out["random_weights"])
        if out["eps_over_rate"] is not None:
            out["eps_over_rate"] = list(out["eps_over_rate"])
        return out


def config_from_dict(raw: dict) -> ExperimentConfig:
    cfg = ExperimentConfig()
    known = set(cfg.__dict__)
    for key, value in raw.items():
        if key not in known:
            raise ConfigInvalid(f"unknown config key {key!r}")
        if key == "snr_db":
            value = tuple(
                NOISELESS if v in ("inf", None) else float(v) for v in value
            )
        elif key in ("graph_sizes", "window"):
            value = tuple(int(v) for v in value)
        elif key in ("aux_rate_range", "random_weights", "eps_over_rate"):
            value = None if value is None else tuple(float(v) for v in value)
        setattr(cfg, key, value)
    cfg.validate()
    return cfg


def load_topology(cfg: ExperimentConfig) -> WeightedGraph:
    if cfg.graph_kind == "powerplant47":
        ref = resources.files("graphfold.data").joinpath("powerplant47.edges")
        with resources.as_file(ref) as path:
            return read_edge_list(path)
    if cfg.graph_kind == "file":
        if not cfg.graph_path:
            raise ConfigInvalid("graph_kind 'file' needs graph_path")
        return read_edge_list(cfg.graph_path)
    return standard_topology(cfg.graph_kind, *cfg.graph_sizes)


def auto_eps_grid(
    dist: np.ndarray, rate: float, n_eps: int, sample_size: int
) -> np.ndarray:
    """Geometric slack grid spanning fine to one-component partitions.

    The lower endpoint is half the rate (below that the partition is
    essentially all singletons); the upper endpoint doubles until a single
    ball covers ``sample_size`` vertices.
    """
    lo = 0.5
    hi = 1.0
    for _ in range(60):
        radius = rate / 2.0 + hi * rate
        if int((dist < radius).sum(axis=1).max()) >= sample_size:
            break
        hi *= 2.0
    return np.geomspace(lo, max(hi, 4 * lo), n_eps)


@dataclass
class SweepCell:
    eps_over_rate: float
    snr_db: float
    mean_error_total: float
    mean_error_per_vertex: float
    mean_components: float
    failures: int


@dataclass
class SweepResult:
    config: ExperimentConfig
    cells: list[SweepCell]
    per_seed_errors: dict  # (snr, trial) -> mean error over the sweep
    eps_grid: list[float]


def _plan_sample(
    basis: EigenBasis,
    dist: np.ndarray,
    radius: float,
    k: int,
    k_aux: int,
    rate: float,
    probe_rate: float,
):
    """Cover, trim, split into primary/auxiliary and partition.

    The probe runs at its own folding rate, so the wrap-correction logic of
    the substitution does not apply across it: the probe is carved out as a
    singleton component. Auxiliary vertices that are not cover centers are
    preferred as the probe so the rest of the partition survives intact.
    """
    centers, covered = greedy_cover(dist, radius, k + k_aux)
    v_prime = trim_cover(dist, centers, covered, k + k_aux)
    primary = select_invertible_sample(basis, v_prime)
    aux = sorted(set(v_prime) - set(primary))
    candidates = [v for v in aux if v not in centers] + [
        v for v in aux if v in centers
    ]
    last_err: Exception | None = None
    for probe in candidates:
        rest = [v for v in v_prime if v != probe]
        rest_centers = [c for c in centers if c != probe]
        try:
            part = admissible_partition(rest, rest_centers, dist, radius)
        except Uncoverable as exc:
            last_err = exc
            continue
        part = Partition(
            v_prime=tuple(sorted(v_prime)),
            centers=part.centers + (probe,),
            members=part.members + ((probe,),),
            radius=radius,
        )
        design = SampleDesign(
            primary=tuple(primary),
            auxiliary=tuple(aux),
            probe=probe,
            folding_rate=rate,
            probe_folding_rate=probe_rate,
        )
        return design, part
    raise GraphFoldError(f"no viable probe vertex: {last_err}")


def run_sweep(cfg: ExperimentConfig) -> SweepResult:
    cfg.validate()
    topology = load_topology(cfg)
    if cfg.k + cfg.k_aux > topology.n:
        raise ConfigInvalid("k + k_aux exceeds the vertex count")
    n0, n1 = cfg.window
    n_steps = n1 - n0

    eps_grid: np.ndarray | None = (
        np.asarray(cfg.eps_over_rate, dtype=float)
        if cfg.eps_over_rate is not None
        else None
    )
    totals: dict[tuple[float, float], list[float]] = {}
    comps: dict[float, list[int]] = {}
    fails: dict[tuple[float, float], int] = {}
    per_seed: dict[tuple[float, int], list[float]] = {}

    for trial in range(cfg.trials):
        seed = cfg.seed + trial
        rng = np.random.default_rng(seed)
        if cfg.random_weights is not None:
            graph = random_weighted_model(
                topology, cfg.random_weights[0], cfg.random_weights[1], seed
            )
        else:
            graph = topology
        basis = eigenbasis(laplacian(graph), cfg.k)
        bounds = inverse_kf_bounds(
            cfg.k, cfg.bandlimit, cfg.n_freq, cfg.bounds_scale
        )
        n_atoms = cfg.n_atoms or dense_atom_count(bounds)
        signal = generate_signal(basis, bounds, n_atoms, seed)
        sampled = sample_time(signal, n0, n1)
        rate = cfg.folding_fraction * float(np.max(np.abs(sampled.values)))
        probe_rate = rate * rng.uniform(*cfg.aux_rate_range)
        dist = variation_matrix(basis, bounds)
        if eps_grid is None:
            eps_grid = auto_eps_grid(dist, rate, cfg.n_eps, cfg.k + cfg.k_aux)

        for eps in eps_grid:
            radius = rate / 2.0 + float(eps) * rate
            try:
                design, part = _plan_sample(
                    basis, dist, radius, cfg.k, cfg.k_aux, rate, probe_rate
                )
            except GraphFoldError:
                for snr in cfg.snr_db:
                    fails[(float(eps), snr)] = fails.get((float(eps), snr), 0) + 1
                continue
            comps.setdefault(float(eps), []).append(part.n_components)
            order = design.vertices
            rates = design.rate_vector()
            obs_clean = restrict(fold_signal(sampled, _full_rates(
                topology.n, order, rates)), order)
            y_v = sampled.values[list(order), :]
            for snr in cfg.snr_db:
                if math.isinf(snr):
                    p_obs = obs_clean.folded
                else:
                    noisy = _noisy(obs_clean, snr, seed)
                    p_obs = noisy
                errors = 0
                for j in range(n_steps):
                    diff_true = y_v[:, j + 1] - y_v[:, j]
                    z_true, _ = fold_array(diff_true, rates)
                    p_bar = np.mod(p_obs[:, j + 1] - p_obs[:, j], rates)
                    p_tilde, shift = center_folded(p_bar, rates)
                    subst = substitute(p_tilde, part, rate, order)
                    system = assemble_system(design, basis, p_tilde, subst)
                    try:
                        if math.isinf(snr):
                            rec = sparse_recover(system, subst)
                        else:
                            alpha = cfg.alpha_scale / rate**2
                            rec = sparse_recover_noisy(system, alpha, subst)
                        z_hat = rec.z_values - shift
                        errors += int(np.sum(z_hat != z_true))
                    except GraphFoldError:
                        errors += len(order)
                totals.setdefault((float(eps), snr), []).append(errors / n_steps)
                per_seed.setdefault((snr, trial), []).append(errors / n_steps)

    assert eps_grid is not None
    cells = []
    for eps in eps_grid:
        for snr in cfg.snr_db:
            key = (float(eps), snr)
            errs = totals.get(key, [])
            cells.append(
                SweepCell(
                    eps_over_rate=float(eps),
                    snr_db=snr,
                    mean_error_total=float(np.mean(errs)) if errs else float("nan"),
                    mean_error_per_vertex=(
                        float(np.mean(errs)) / (cfg.k + cfg.k_aux)
                        if errs
                        else float("nan")
                    ),
                    mean_components=(
                        float(np.mean(comps[float(eps)]))
                        if comps.get(float(eps))
                        else float("nan")
                    ),
                    failures=fails.get(key, 0),
                )
            )
    per_seed_mean = {
        key: float(np.mean(vals)) for key, vals in per_seed.items()
    }
    return SweepResult(
        config=cfg,
        cells=cells,
        per_seed_errors=per_seed_mean,
        eps_grid=[float(e) for e in eps_grid],
    )


def _full_rates(n: int, order, rates) -> np.ndarray:
    full = np.ones(n)
    for v, r in zip(order, rates):
        full[v] = r
    return full


def _noisy(obs, snr: float, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed + 99991)
    power = float(np.mean(obs.folded**2))
    sigma = math.sqrt(power * 10.0 ** (-snr / 10.0))
    noisy = obs.folded + rng.normal(0.0, sigma, size=obs.folded.shape)
    _, p = fold_array(noisy, obs.folding_rates[:, None])
    return p


def write_sweep_csv(result: SweepResult, path) -> None:
    """CSV with the full config embedded as a leading comment line."""
    cfg_json = json.dumps(result.config.to_json_dict(), sort_keys=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(f"# config: {cfg_json}\n")
        writer = csv.writer(fh)
        writer.writerow(
            [
                "eps_over_rate",
                "snr_db",
                "mean_error_total",
                "mean_error_per_vertex",
                "mean_components",
                "failures",
            ]
        )
        for cell in result.cells:
            writer.writerow(
                [
                    f"{cell.eps_over_rate:.10g}",
                    "inf" if math.isinf(cell.snr_db) else f"{cell.snr_db:.10g}",
                    f"{cell.mean_error_total:.10g}",
                    f"{cell.mean_error_per_vertex:.10g}",
                    f"{cell.mean_components:.10g}",
                    cell.failures,
                ]
            )


def sweep_summary(result: SweepResult) -> dict:
    by_snr: dict[str, list] = {}
    for cell in result.cells:
        key = "inf" if math.isinf(cell.snr_db) else f"{cell.snr_db:g}"
        by_snr.setdefault(key, []).append(
            {
                "eps_over_rate": cell.eps_over_rate,
                "mean_error_total": cell.mean_error_total,
                "mean_components": cell.mean_components,
                "failures": cell.failures,
            }
        )
    return {
        "config": result.config.to_json_dict(),
        "eps_grid": result.eps_grid,
        "curves": by_snr,
    }
