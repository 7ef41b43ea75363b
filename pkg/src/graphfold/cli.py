"""Command-line entry points.

Each subcommand prints a single JSON summary to stdout and writes any file
artifacts under --out. Failures exit nonzero with a JSON error record on
stderr. All randomness flows from --seed, so identical invocations produce
identical delimited outputs.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import experiments, plots
from .errors import ConfigInvalid, GraphFoldError
from .graphs import laplacian, random_weighted_model
from .image import fold_image, read_ppm, recover_image, synthetic_lowpass, write_ppm
from .recovery import exact_recover
from .signals import (
    dense_atom_count,
    fold_signal,
    generate_signal,
    inverse_kf_bounds,
    load_sampled_csv,
    restrict,
    sample_time,
    save_folded_csv,
    save_sampled_csv,
)
from .spectral import (
    SampleDesign,
    eigenbasis,
    find_integer_relation,
    property_harness,
    select_invertible_sample,
)


def _emit(payload: dict) -> None:
    print(json.dumps(payload, sort_keys=True))


def _load_config(args) -> experiments.ExperimentConfig:
    raw = {}
    if args.config:
        with open(args.config, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    if args.seed is not None:
        raw["seed"] = args.seed
    if getattr(args, "trials", None) is not None:
        raw["trials"] = args.trials
    if getattr(args, "snr", None):
        raw["snr_db"] = [s for s in args.snr]
    if getattr(args, "eps", None):
        raw["eps_over_rate"] = args.eps
    if getattr(args, "folding_fraction", None) is not None:
        raw["folding_fraction"] = args.folding_fraction
    return experiments.config_from_dict(raw)


def cmd_run(args) -> dict:
    cfg = _load_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = experiments.run_sweep(cfg)
    csv_path = out / "sweep.csv"
    experiments.write_sweep_csv(result, csv_path)
    summary = experiments.sweep_summary(result)
    with open(out / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    err_fig = out / "error_vs_eps.png"
    comp_fig = out / "components_vs_eps.png"
    plots.save_sweep_figures(result, err_fig, comp_fig)
    return {
        "command": "run",
        "csv": str(csv_path),
        "summary": str(out / "summary.json"),
        "figures": [str(err_fig), str(comp_fig)],
        "eps_grid": result.eps_grid,
        "seed": cfg.seed,
    }


def cmd_props(args) -> dict:
    from .graphs import standard_topology

    topology = standard_topology(args.graph, *args.sizes)
    S = list(range(args.k)) if args.k else None
    u = args.k if args.k else None
    fraction = property_harness(
        topology,
        args.property,
        K=args.k,
        S=S,
        u=u,
        trials=args.trials,
        seed=args.seed or 0,
        max_coeff=args.max_coeff,
        tol=args.tol,
    )
    payload = {
        "command": "props",
        "property": args.property.upper(),
        "trials": args.trials,
        "fraction": fraction,
        "Q": args.max_coeff,
        "tol": args.tol,
        "seed": args.seed or 0,
    }
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        with open(Path(args.out) / "props.json", "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return payload


def _small_instance(seed: int, n: int, k: int):
    from .graphs import complete_graph

    graph = random_weighted_model(complete_graph(n), 0.5, 1.5, seed)
    basis = eigenbasis(laplacian(graph), k)
    rng = np.random.default_rng(seed)
    coeffs = rng.uniform(-1.0, 1.0, size=k)
    snapshot = basis.vectors @ coeffs
    rate = 0.4 * float(np.max(np.abs(snapshot)))
    primary = select_invertible_sample(basis, range(n))
    rest = sorted(set(range(n)) - set(primary))
    aux_rate = rate * rng.uniform(0.5, 1.0)
    design = SampleDesign(
        primary=tuple(primary),
        auxiliary=(rest[0],),
        probe=rest[0],
        folding_rate=rate,
        probe_folding_rate=aux_rate,
    )
    return basis, design, snapshot


def cmd_exact(args) -> dict:
    from .signals import fold

    seed = args.seed or 0
    basis, design, snapshot = _small_instance(seed, args.n, args.k)
    p_primary = np.array(
        [fold(snapshot[v], design.folding_rate)[1] for v in design.primary]
    )
    p_aux = np.array(
        [fold(snapshot[v], design.probe_folding_rate)[1] for v in design.auxiliary]
    )
    mix_ok = (
        find_integer_relation(
            np.linalg.solve(
                basis.vectors[list(design.primary), :].T,
                basis.vectors[design.probe, :],
            ),
            max_coeff=args.max_coeff,
            tol=1e-9,
        )
        is None
    )
    rec = exact_recover(p_primary, p_aux, design, basis, args.z_bound)
    err = float(np.max(np.abs(rec.snapshot - snapshot)))
    return {
        "command": "exact",
        "recovered": bool(err < 1e-6),
        "max_abs_error": err,
        "residual": rec.residual,
        "probe_integer_independent": mix_ok,
        "seed": seed,
    }


def cmd_gen(args) -> dict:
    cfg = _load_config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    topology = experiments.load_topology(cfg)
    seed = cfg.seed
    graph = (
        random_weighted_model(topology, *cfg.random_weights, seed)
        if cfg.random_weights
        else topology
    )
    basis = eigenbasis(laplacian(graph), cfg.k)
    bounds = inverse_kf_bounds(cfg.k, cfg.bandlimit, cfg.n_freq, cfg.bounds_scale)
    signal = generate_signal(
        basis, bounds, cfg.n_atoms or dense_atom_count(bounds), seed
    )
    sampled = sample_time(signal, cfg.window[0], cfg.window[1])
    path = out / "signal.csv"
    save_sampled_csv(
        sampled,
        path,
        metadata={
            "config": cfg.to_json_dict(),
            "seed": seed,
            "bandlimit": cfg.bandlimit,
            "k": cfg.k,
        },
    )
    return {
        "command": "gen",
        "csv": str(path),
        "vertices": int(sampled.values.shape[0]),
        "steps": int(sampled.values.shape[1]),
        "seed": seed,
    }


def cmd_fold(args) -> dict:
    sampled = load_sampled_csv(args.signal)
    rate = args.rate
    if rate is None:
        rate = args.folding_fraction * float(np.max(np.abs(sampled.values)))
    obs = fold_signal(sampled, rate)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "folded.csv"
    save_folded_csv(
        obs, path, metadata={"rate": rate, "source": str(args.signal)}
    )
    nonzero = int(np.count_nonzero(obs.folding_numbers))
    return {
        "command": "fold",
        "csv": str(path),
        "rate": rate,
        "nonzero_folds": nonzero,
        "seed": args.seed or 0,
    }


def cmd_image_fold(args) -> dict:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.synthetic:
        rows, cols = args.synthetic
        img = synthetic_lowpass(
            rows, cols, mode_fraction=args.k_frac, seed=args.seed or 0
        )
        truth_path = out / "truth.ppm"
        write_ppm(img, truth_path)
    else:
        if not args.image:
            raise ConfigInvalid("need --image or --synthetic")
        img = read_ppm(args.image, scale=args.scale)
        truth_path = None
    rate = args.rate if args.rate is not None else 0.7 * img.value_cap
    folded, z = fold_image(img, rate)
    folded_path = out / "folded.ppm"
    write_ppm(folded, folded_path)
    fractions = [
        float(np.mean(z[:, :, c] != 0)) for c in range(folded.channels)
    ]
    return {
        "command": "image-fold",
        "folded": str(folded_path),
        "truth": str(truth_path) if truth_path else None,
        "rate": rate,
        "nonzero_fold_fraction_per_channel": fractions,
        "seed": args.seed or 0,
    }


def cmd_image_recover(args) -> dict:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    folded = read_ppm(args.image, scale=args.scale)
    truth = read_ppm(args.truth, scale=args.scale) if args.truth else None
    rate = args.rate if args.rate is not None else 0.7 * folded.value_cap
    eps = args.eps or [14.0, 16.0, 18.0, 20.0, 22.0, 24.0, 26.0, 28.0, 30.0]
    rec = recover_image(
        folded,
        rate,
        k_fraction=args.k_frac,
        k_aux_fraction=args.kaux_frac,
        anchor_fraction=args.anchor_frac,
        epsilons=eps,
        seed=args.seed or 0,
        truth=truth,
    )
    written = []
    for e in rec.per_epsilon:
        path = out / f"recovered_eps{e:g}.ppm"
        write_ppm(rec.rasters[e], path)
        written.append(str(path))
    fused_path = out / "recovered_fused.ppm"
    write_ppm(rec.fused, fused_path)

    report_rows = []
    for e in rec.per_epsilon:
        for ch in range(folded.channels):
            frac = rec.error_fractions.get((e, ch))
            report_rows.append(
                {
                    "epsilon": e,
                    "channel": ch,
                    "partition_count": rec.partition_sizes[e],
                    "error_fraction": frac if frac is not None else float("nan"),
                }
            )
    report_path = out / "report.csv"
    with open(report_path, "w", encoding="utf-8") as fh:
        fh.write("epsilon,channel,partition_count,error_fraction\n")
        for row in report_rows:
            frac = row["error_fraction"]
            frac_s = "" if frac is None or math.isnan(frac) else f"{frac:.10g}"
            fh.write(
                f"{row['epsilon']:g},{row['channel']},"
                f"{row['partition_count']},{frac_s}\n"
            )
    panel_path = out / "image_report.png"
    plots.save_image_panel(
        folded.values,
        {e: rec.rasters[e].values for e in rec.per_epsilon},
        rec.fused.values,
        panel_path,
        truth_values=truth.values if truth else None,
    )
    curve_path = out / "error_vs_eps.png"
    plots.save_image_error_curve(report_rows, curve_path)
    return {
        "command": "image-recover",
        "recovered": written,
        "fused": str(fused_path),
        "report": str(report_path),
        "figures": [str(panel_path), str(curve_path)],
        "partition_sizes": {f"{k:g}": v for k, v in rec.partition_sizes.items()},
        "seed": args.seed or 0,
    }


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="graphfold",
        description="Fold and recover bandlimited continuous-time graph signals.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_default=None):
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--config", type=str, default=None)
        if out_default is not None:
            p.add_argument("--out", type=str, default=out_default)

    p = sub.add_parser("run", help="sweep slack and noise over an experiment config")
    common(p, out_default="out")
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--snr", type=float, nargs="*", default=None)
    p.add_argument("--eps", type=float, nargs="*", default=None)
    p.add_argument("--lambda", dest="folding_fraction", type=float, default=None,
                   help="folding rate as a fraction of the peak amplitude")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("props", help="empirical spectral property rates")
    common(p)
    p.add_argument("--out", type=str, default=None)
    p.add_argument("graph", choices=["complete", "path", "grid"])
    p.add_argument("sizes", type=int, nargs="+")
    p.add_argument("property", choices=["P0", "P1", "P2", "P3", "P4",
                                        "p0", "p1", "p2", "p3", "p4"])
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--max-coeff", type=int, default=10)
    p.add_argument("--tol", type=float, default=1e-9)
    p.set_defaults(func=cmd_props)

    p = sub.add_parser("exact", help="integer-search recovery on a small instance")
    common(p)
    p.add_argument("--out", type=str, default=None)
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--z-bound", type=int, default=4)
    p.add_argument("--max-coeff", type=int, default=10)
    p.set_defaults(func=cmd_exact)

    p = sub.add_parser("gen", help="generate and sample a random signal")
    common(p, out_default="out")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("fold", help="fold a sampled signal CSV")
    common(p, out_default="out")
    p.add_argument("signal", type=str)
    p.add_argument("--rate", type=float, default=None)
    p.add_argument("--lambda", dest="folding_fraction", type=float, default=0.6)
    p.set_defaults(func=cmd_fold)

    p = sub.add_parser("image-fold", help="fold an image (or a synthetic one)")
    common(p, out_default="out")
    p.add_argument("--image", type=str, default=None)
    p.add_argument("--synthetic", type=int, nargs=2, metavar=("ROWS", "COLS"))
    p.add_argument("--rate", type=float, default=None)
    p.add_argument("--k-frac", type=float, default=0.2)
    p.add_argument("--no-scale", dest="scale", action="store_false")
    p.set_defaults(func=cmd_image_fold, scale=True)

    p = sub.add_parser("image-recover", help="recover a folded image")
    common(p, out_default="out")
    p.add_argument("image", type=str)
    p.add_argument("--truth", type=str, default=None)
    p.add_argument("--rate", type=float, default=None)
    p.add_argument("--eps", type=float, nargs="*", default=None)
    p.add_argument("--k-frac", type=float, default=0.2)
    p.add_argument("--kaux-frac", type=float, default=0.05)
    p.add_argument("--anchor-frac", type=float, default=0.05)
    p.add_argument("--no-scale", dest="scale", action="store_false")
    p.set_defaults(func=cmd_image_recover, scale=True)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        payload = args.func(args)
    except GraphFoldError as exc:
        json.dump(
            {"error": type(exc).__name__, "message": str(exc)},
            sys.stderr,
            sort_keys=True,
        )
        sys.stderr.write("\n")
        return 1
    _emit(payload)
    return 0


if __name__ == "__main__":
    sys.exit(main())
