"""Figure rendering for the report path.

Each function writes one PNG next to the delimited output. Rendering is
optional (reports stay plot-ready CSV either way) and uses the Agg
backend so it works headless.
"""
from __future__ import annotations

from pathlib import Path
from typing import List

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .evaluation import AblationRow, GuaranteeReport, SweepRow

__all__ = ["plot_sweep", "plot_ablation", "plot_guarantee"]


def plot_sweep(rows: List[SweepRow], fig_dir) -> List[Path]:
    fig_dir = Path(fig_dir)
    fig_dir.mkdir(parents=True, exist_ok=True)
    feasible = [r for r in rows if r.feasible]
    alphas = [r.alpha for r in feasible]
    written = []

    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(alphas, [r.empirical_test_risk for r in feasible], "o-", label="empirical test risk")
    ax.plot([0, 1], [0, 1], "k--", linewidth=1, label=r"$y = \alpha$")
    ax.set_xlabel(r"risk level $\alpha$")
    ax.set_ylabel("empirical test risk")
    ax.set_xlim(0, 1)
    ax.legend()
    fig.tight_layout()
    path = fig_dir / "sweep_risk.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(alphas, [r.mean_predset_size for r in feasible], "s-", color="tab:orange")
    ax.set_xlabel(r"risk level $\alpha$")
    ax.set_ylabel("mean prediction set size (pixels)")
    fig.tight_layout()
    path = fig_dir / "sweep_predsize.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    written.append(path)
    return written


def plot_ablation(rows: List[AblationRow], fig_dir) -> List[Path]:
    fig_dir = Path(fig_dir)
    fig_dir.mkdir(parents=True, exist_ok=True)
    ratios = sorted({r.split_ratio for r in rows})
    fig, ax = plt.subplots(figsize=(5, 4))
    for ratio in ratios:
        cells = [r for r in rows if r.split_ratio == ratio and r.control_status != "infeasible"]
        ax.plot(
            [c.alpha for c in cells],
            [c.mean_empirical_risk for c in cells],
            "o-",
            label=f"split={ratio:g}",
        )
    lims = sorted({r.alpha for r in rows})
    ax.plot(lims, lims, "k--", linewidth=1)
    ax.set_xlabel(r"risk level $\alpha$")
    ax.set_ylabel("mean empirical risk")
    ax.legend()
    fig.tight_layout()
    path = fig_dir / "ablation_risk.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return [path]


def plot_guarantee(report: GuaranteeReport, fig_dir) -> List[Path]:
    fig_dir = Path(fig_dir)
    fig_dir.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.hist(report.per_trial_risks, bins=30, color="tab:blue", alpha=0.8)
    ax.axvline(report.alpha, color="k", linestyle="--", label=r"$\alpha$")
    ax.axvline(report.mean_test_risk, color="tab:red", label="mean over trials")
    ax.set_xlabel("per-trial mean test risk")
    ax.set_ylabel("trials")
    ax.legend()
    fig.tight_layout()
    path = fig_dir / "guarantee_hist.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return [path]
