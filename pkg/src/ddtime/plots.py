"""Figure rendering for the report paths.

Each CLI command that writes delimited output also drops a PNG next to it:
loss curves for distillation runs, per-seed bars for evaluations, line plots
of the synthetic samples, and teacher metric curves.
"""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def plot_run_log(rows, path: str) -> str:
    """Loss components per iteration plus validation MSE where logged."""
    fig, (ax_loss, ax_eval) = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
    its = [r.iteration for r in rows]
    for name in ("l_param", "l_val_tmp", "l_val_fre", "l_is", "total"):
        ax_loss.plot(its, [getattr(r, name) for r in rows], label=name, lw=1)
    ax_loss.set_yscale("log")
    ax_loss.set_ylabel("loss")
    ax_loss.legend(fontsize=8, ncol=3)
    ax_loss.grid(alpha=0.3)

    eval_pts = [(r.iteration, r.eval_mse) for r in rows if r.eval_mse is not None]
    if eval_pts:
        xs, ys = zip(*eval_pts)
        ax_eval.plot(xs, ys, "o-", color="tab:red", label="val MSE")
        ax_eval.legend(fontsize=8)
    ax_eval.set_xlabel("iteration")
    ax_eval.set_ylabel("val MSE")
    ax_eval.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_eval_report(report, path: str) -> str:
    """Per-seed test MSE/MAE bars with the mean drawn through them."""
    fig, axes = plt.subplots(1, 2, figsize=(8, 3.2))
    labels = [str(s) for s in report.seeds]
    for ax, vals, mean, name in (
        (axes[0], report.mse_per_seed, report.mse_mean, "MSE"),
        (axes[1], report.mae_per_seed, report.mae_mean, "MAE"),
    ):
        heights = [0.0 if not math.isfinite(v) else v for v in vals]
        ax.bar(labels, heights, color="tab:blue", alpha=0.8)
        if math.isfinite(mean):
            ax.axhline(mean, color="tab:red", lw=1, label=f"mean {mean:.4f}")
            ax.legend(fontsize=8)
        ax.set_xlabel("seed")
        ax.set_ylabel(f"test {name}")
        ax.grid(alpha=0.3, axis="y")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_synthetic_samples(synthetic, path: str) -> str:
    """One panel per synthetic sample; the input/target boundary is dashed."""
    s = synthetic.n_samples
    fig, axes = plt.subplots(s, 1, figsize=(8, 1.8 * s), sharex=True, squeeze=False)
    t = np.arange(synthetic.data.shape[2])
    for i in range(s):
        ax = axes[i, 0]
        for c in range(synthetic.n_vars):
            ax.plot(t, synthetic.data[i, c], lw=1, label=f"var {c}" if i == 0 else None)
        ax.axvline(synthetic.t_in - 0.5, color="k", ls="--", lw=0.8)
        ax.set_ylabel(f"sample {i}")
        ax.grid(alpha=0.3)
    if synthetic.n_vars <= 8:
        axes[0, 0].legend(fontsize=8, ncol=4)
    axes[-1, 0].set_xlabel("timestep (input | target)")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_teacher_curves(trajectories, path: str) -> str:
    """Train/test MSE per epoch for every teacher in the buffer set."""
    fig, (ax_tr, ax_te) = plt.subplots(1, 2, figsize=(9, 3.2), sharey=True)
    for i, traj in enumerate(trajectories):
        epochs = np.arange(1, traj.epochs + 1)
        ax_tr.plot(epochs, traj.train_mse_per_epoch, lw=1, label=f"teacher {i}")
        ax_te.plot(epochs, traj.test_mse_per_epoch, lw=1)
    ax_tr.set_title("train MSE")
    ax_te.set_title("test MSE")
    for ax in (ax_tr, ax_te):
        ax.set_xlabel("epoch")
        ax.grid(alpha=0.3)
    if len(trajectories) <= 10:
        ax_tr.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
