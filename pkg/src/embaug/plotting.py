"""Line plots of sweep reports. Rendering only; the CSV is the record."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .evaluate import EvalReport  # noqa: E402

METRICS = (("macro_f1", "Macro F1"), ("micro_f1", "Micro F1"), ("avg_f1", "Average F1"))
STYLE = {"baseline": ("tab:gray", "o"), "interpolate": ("tab:blue", "s"),
         "duplicate": ("tab:orange", "^")}


def _load(report) -> EvalReport:
    return report if isinstance(report, EvalReport) else EvalReport.from_csv(report)


def _panel(ax, summary, x, label, metric):
    for cond, grp in summary.groupby("condition"):
        color, marker = STYLE.get(cond, (None, "x"))
        grp = grp.sort_values(x)
        mean, sd = grp[f"{metric}_mean"], grp[f"{metric}_std"].fillna(0.0)
        ax.plot(grp[x], mean, marker=marker, color=color, label=cond, lw=1.5, ms=4)
        ax.fill_between(grp[x], mean - sd, mean + sd, color=color, alpha=0.15, lw=0)
    ax.set_xlabel(label)
    ax.grid(alpha=0.3)


def plot_sweep(report, path, title: str | None = None) -> None:
    """Macro / Micro / average F1 against train size, mean +- sd band."""
    s = _load(report).summary("train_size")
    fig, axes = plt.subplots(1, 3, figsize=(13, 3.8))
    for ax, (metric, name) in zip(axes, METRICS):
        _panel(ax, s, "train_size", "training nodes", metric)
        ax.set_ylabel(name)
    axes[0].legend(frameon=False)
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_sensitivity(report, path, title: str | None = None) -> None:
    """Macro and Micro F1 against addcoeff at a fixed train size."""
    s = _load(report).summary("addcoeff")
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    for metric, name in METRICS[:2]:
        grp = s.sort_values("addcoeff")
        ax.errorbar(grp["addcoeff"], grp[f"{metric}_mean"], yerr=grp[f"{metric}_std"].fillna(0.0),
                    marker="o", ms=4, capsize=2, label=name)
    ax.set_xlabel("addcoeff")
    ax.set_ylabel("F1")
    ax.grid(alpha=0.3)
    ax.legend(frameon=False)
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
