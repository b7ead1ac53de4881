"""Student retraining on synthetic data, forecast metrics, and diversity.

Evaluation trains a fresh student per seed with full-batch gradient descent
on the synthetic windows, then scores it on held-out windows. Diverged seeds
are recorded and excluded from the aggregates rather than poisoning them.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .data import WindowedDataset
from .errors import ShapeMismatchError
from .losses import IsibConfig, mean_sym_kl
from .models import ModelSpec, forward_rows, init_params, mse_loss_and_grad_arrays
from .synthetic import SyntheticDataset


@dataclass(frozen=True)
class StudentTrainConfig:
    """How evaluation students are trained: plain GD, full batch."""

    lr: float = 3e-4
    steps: int = 500


@dataclass
class EvalReport:
    """Per-seed test metrics plus aggregates, condensation ratio, diversity."""

    seeds: list[int]
    mse_per_seed: list[float]
    mae_per_seed: list[float]
    diverged_seeds: list[int] = field(default_factory=list)
    mse_mean: float = math.nan
    mse_std: float = math.nan
    mae_mean: float = math.nan
    mae_std: float = math.nan
    ratio: float = math.nan
    diversity: float = math.nan


def mse(actual: np.ndarray, predicted: np.ndarray) -> float:
    """Mean squared error between two equal-length vectors."""
    actual = np.asarray(actual, dtype=np.float64).ravel()
    predicted = np.asarray(predicted, dtype=np.float64).ravel()
    if actual.shape != predicted.shape:
        raise ShapeMismatchError(f"length mismatch: {actual.shape} vs {predicted.shape}")
    if actual.size == 0:
        raise ValueError("empty input")
    return float(((actual - predicted) ** 2).mean())


def mae(actual: np.ndarray, predicted: np.ndarray) -> float:
    """Mean absolute error between two equal-length vectors."""
    actual = np.asarray(actual, dtype=np.float64).ravel()
    predicted = np.asarray(predicted, dtype=np.float64).ravel()
    if actual.shape != predicted.shape:
        raise ShapeMismatchError(f"length mismatch: {actual.shape} vs {predicted.shape}")
    if actual.size == 0:
        raise ValueError("empty input")
    return float(np.abs(actual - predicted).mean())


def train_student(
    spec: ModelSpec,
    inputs: np.ndarray,
    targets: np.ndarray,
    seed: int,
    cfg: StudentTrainConfig,
) -> np.ndarray:
    """Full-batch GD from a seeded init; returns the final parameter vector.

    Raises ``FloatingPointError`` never; divergence is signalled by returning
    a vector containing non-finite entries, which callers must check.
    """
    theta = init_params(spec, seed)
    for _ in range(cfg.steps):
        loss, grad = mse_loss_and_grad_arrays(spec, theta, inputs, targets)
        if not np.isfinite(loss):
            return theta * np.nan
        theta = theta - cfg.lr * grad
    return theta


def forecast_metrics(
    spec: ModelSpec, theta: np.ndarray, windows: WindowedDataset
) -> tuple[float, float]:
    """Test MSE and MAE of one parameter vector over all windows."""
    x = windows.inputs()
    y = windows.targets()
    batch, d, t_in = x.shape
    preds, _ = forward_rows(spec, theta, x.reshape(batch * d, t_in))
    resid = preds - y.reshape(batch * d, spec.t_out)
    return float((resid**2).mean()), float(np.abs(resid).mean())


def train_and_eval(
    synthetic: SyntheticDataset,
    test_set: WindowedDataset,
    spec: ModelSpec,
    seeds: list[int],
    train_config: StudentTrainConfig | None = None,
    n_real_windows: int | None = None,
    isib_cfg: IsibConfig | None = None,
    threads: int = 1,
) -> EvalReport:
    """Train one student per seed on the synthetic set and score on ``test_set``."""
    if not test_set.pairs:
        raise ValueError("empty test set")
    if not seeds:
        raise ValueError("need at least one seed")
    cfg = train_config or StudentTrainConfig()
    inputs = synthetic.inputs
    targets = synthetic.targets

    def one(seed: int) -> tuple[float, float]:
        theta = train_student(spec, inputs, targets, seed, cfg)
        if not np.isfinite(theta).all():
            return math.nan, math.nan
        return forecast_metrics(spec, theta, test_set)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, seeds))
    else:
        results = [one(seed) for seed in seeds]

    mse_per_seed = [r[0] for r in results]
    mae_per_seed = [r[1] for r in results]
    diverged = [seed for seed, m in zip(seeds, mse_per_seed) if not math.isfinite(m)]
    ok_mse = np.array([m for m in mse_per_seed if math.isfinite(m)])
    ok_mae = np.array([m for m in mae_per_seed if math.isfinite(m)])

    report = EvalReport(
        seeds=list(seeds),
        mse_per_seed=mse_per_seed,
        mae_per_seed=mae_per_seed,
        diverged_seeds=diverged,
    )
    if ok_mse.size:
        report.mse_mean = float(ok_mse.mean())
        report.mse_std = float(ok_mse.std())
        report.mae_mean = float(ok_mae.mean())
        report.mae_std = float(ok_mae.std())
    if n_real_windows:
        report.ratio = synthetic.n_samples / n_real_windows
    if synthetic.n_samples >= 2:
        report.diversity = diversity(synthetic, isib_cfg or IsibConfig())
    return report


def diversity(synthetic: SyntheticDataset, cfg: IsibConfig) -> float:
    """Average pairwise symmetric KL across synthetic samples."""
    if synthetic.n_samples < 2:
        raise ValueError("diversity needs at least two samples")
    return mean_sym_kl(synthetic.data, cfg)


def write_report_csv(report: EvalReport, path: str) -> None:
    """Machine-readable per-seed rows followed by aggregate rows."""
    lines = ["seed,mse,mae,diverged"]
    for seed, m, a in zip(report.seeds, report.mse_per_seed, report.mae_per_seed):
        flag = int(seed in report.diverged_seeds)
        lines.append(f"{seed},{_fmt(m)},{_fmt(a)},{flag}")
    lines.append(f"mean,{_fmt(report.mse_mean)},{_fmt(report.mae_mean)},")
    lines.append(f"std,{_fmt(report.mse_std)},{_fmt(report.mae_std)},")
    lines.append(f"ratio,{_fmt(report.ratio)},,")
    lines.append(f"diversity,{_fmt(report.diversity)},,")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _fmt(x: float) -> str:
    return "" if not math.isfinite(x) else repr(x)


def format_summary(report: EvalReport) -> str:
    """Human-readable block for terminals and log files."""
    lines = [
        "evaluation summary",
        f"  seeds          : {', '.join(str(s) for s in report.seeds)}",
        f"  test MSE       : {report.mse_mean:.6f} +/- {report.mse_std:.6f}",
        f"  test MAE       : {report.mae_mean:.6f} +/- {report.mae_std:.6f}",
        f"  condensation r : {report.ratio:.6f}" if math.isfinite(report.ratio) else "  condensation r : n/a",
        f"  diversity      : {report.diversity:.6f}" if math.isfinite(report.diversity) else "  diversity      : n/a",
    ]
    if report.diverged_seeds:
        lines.append(f"  diverged seeds : {report.diverged_seeds}")
    return "\n".join(lines)
