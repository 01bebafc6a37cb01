"""Figure rendering for experiment reports and state-evolution curves.

Rendering is file-only (Agg backend): every CLI report path can drop a
PNG next to its CSV/JSON without a display.
"""

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["plot_report", "plot_se_trajectories", "plot_trace"]

_STYLE = {
    "tsr-dft": dict(color="tab:blue", marker="o"),
    "amp-iid": dict(color="tab:red", marker="s"),
    "amp-dft": dict(color="tab:green", marker="^"),
}


def _style(name):
    return _STYLE.get(name, dict(color="tab:gray", marker="."))


def plot_report(report, path):
    """Simulated mean-MSE curves with their SE overlays, one PNG."""
    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    for name, res in report.results.items():
        style = _style(name)
        ax.errorbar(
            res.iterations,
            res.mean_mse_db,
            yerr=res.stderr_db,
            label=f"{name} (sim)",
            mfc="none",
            ms=4.5,
            lw=1.0,
            capsize=2,
            **style,
        )
        if res.se_pred_mse_db is not None:
            ax.plot(
                res.iterations,
                res.se_pred_mse_db,
                ls="--",
                lw=1.4,
                color=style["color"],
                label=f"{name} (evolution)",
            )
    cfg = report.config
    ax.set_title(
        f"N={cfg['n']}, M={cfg['m']}, lambda={cfg['sparsity']}, "
        f"sigma2={cfg['sigma2']:.3g}, {cfg['trials']} trials"
    )
    _finish(ax, fig, path)
    return path


def plot_se_trajectories(trajectories, path, title=None):
    """Predicted MSE (dB) per iteration for each named trajectory."""
    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    for name, traj in trajectories.items():
        pred = np.asarray(traj.mse_pred)
        ax.plot(
            np.arange(1, pred.size + 1),
            10 * np.log10(pred),
            ls="--",
            lw=1.4,
            marker=_style(name)["marker"],
            ms=4,
            mfc="none",
            color=_style(name)["color"],
            label=name,
        )
    if title:
        ax.set_title(title)
    _finish(ax, fig, path)
    return path


def plot_trace(trace, path, title=None):
    """Single-run MSE trajectory plus the scalar variance trackers."""
    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    its = np.arange(1, len(trace.mse) + 1)
    ax.plot(its, 10 * np.log10(np.maximum(trace.mse, 1e-300)),
            marker="o", ms=4, mfc="none", color="tab:blue", label="mse")
    for key, values in trace.scalars.items():
        vals = np.maximum(np.asarray(values), 1e-300)
        ax.plot(its, 10 * np.log10(vals), lw=1.0, alpha=0.75, label=key)
    if title:
        ax.set_title(title)
    _finish(ax, fig, path)
    return path


def _finish(ax, fig, path):
    ax.set_xlabel("iteration")
    ax.set_ylabel("MSE (dB)")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
