"""Figure rendering for the report paths.

Every report CSV gets a companion PNG so sweeps can be eyeballed without a
separate plotting step. Uses the Agg backend; nothing here opens a window.
"""
from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .experiments import SweepResult


def _snr_label(snr: float) -> str:
    return "noiseless" if math.isinf(snr) else f"{snr:g} dB"


def save_sweep_figures(result: SweepResult, error_path, components_path) -> None:
    """Error-vs-slack curves per noise level, plus the partition-size curve."""
    by_snr: dict[float, list] = {}
    for cell in result.cells:
        by_snr.setdefault(cell.snr_db, []).append(cell)

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for snr in sorted(by_snr, reverse=True):
        cells = sorted(by_snr[snr], key=lambda c: c.eps_over_rate)
        ax.plot(
            [c.eps_over_rate for c in cells],
            [c.mean_error_total for c in cells],
            marker="o",
            label=_snr_label(snr),
        )
    ax.set_xscale("log")
    ax.set_xlabel("slack / folding rate")
    ax.set_ylabel("mean folding-number errors per step")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(error_path, dpi=150)
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    any_snr = next(iter(by_snr))
    cells = sorted(by_snr[any_snr], key=lambda c: c.eps_over_rate)
    ax.plot(
        [c.eps_over_rate for c in cells],
        [c.mean_components for c in cells],
        marker="s",
        color="tab:green",
    )
    ax.set_xscale("log")
    ax.set_xlabel("slack / folding rate")
    ax.set_ylabel("partition components")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(components_path, dpi=150)
    plt.close(fig)


def save_image_panel(
    folded_values: np.ndarray,
    recovered: dict,
    fused_values: np.ndarray,
    path,
    truth_values: np.ndarray | None = None,
) -> None:
    """Side-by-side folded / per-slack recoveries / fused (and truth)."""
    eps_list = sorted(recovered)
    panels = [("folded", folded_values)]
    panels += [(f"eps={e:g}", recovered[e]) for e in eps_list]
    panels.append(("fused", fused_values))
    if truth_values is not None:
        panels.append(("truth", truth_values))
    cols = min(4, len(panels))
    rows = (len(panels) + cols - 1) // cols
    fig, axes = plt.subplots(rows, cols, figsize=(3.0 * cols, 3.0 * rows))
    axes = np.atleast_1d(axes).ravel()
    vmax = max(float(np.max(v)) for _, v in panels) or 1.0
    for ax, (title, vals) in zip(axes, panels):
        img = vals[:, :, 0] if vals.ndim == 3 and vals.shape[2] == 1 else vals
        ax.imshow(np.squeeze(img), cmap="gray", vmin=0.0, vmax=vmax)
        ax.set_title(title, fontsize=9)
        ax.axis("off")
    for ax in axes[len(panels) :]:
        ax.axis("off")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_image_error_curve(report_rows: list, path) -> None:
    """Per-channel error fraction and partition size against the slack."""
    fig, ax1 = plt.subplots(figsize=(6.0, 4.0))
    channels = sorted({row["channel"] for row in report_rows})
    for ch in channels:
        rows = sorted(
            (r for r in report_rows if r["channel"] == ch),
            key=lambda r: r["epsilon"],
        )
        xs = [r["epsilon"] for r in rows]
        errs = [r["error_fraction"] for r in rows]
        if any(e is not None and not math.isnan(e) for e in errs):
            ax1.plot(xs, errs, marker="o", label=f"channel {ch}")
    ax1.set_xlabel("slack / folding rate")
    ax1.set_ylabel("folding-number error fraction")
    ax1.grid(True, alpha=0.3)
    if ax1.lines:
        ax1.legend(loc="upper left")
    ax2 = ax1.twinx()
    rows0 = sorted(
        (r for r in report_rows if r["channel"] == channels[0]),
        key=lambda r: r["epsilon"],
    )
    ax2.plot(
        [r["epsilon"] for r in rows0],
        [r["partition_count"] for r in rows0],
        marker="s",
        color="tab:green",
        alpha=0.6,
    )
    ax2.set_ylabel("partition components", color="tab:green")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
