"""The outer distillation loop.

Each iteration samples an expert trajectory segment, unrolls a student on
the current synthetic data, scores the unrolled parameters against the
segment (plus the prediction-consistency and diversity terms), pushes the
exact meta-gradient back onto the synthetic tensor, and applies one Adam
step. Teacher predictions are periodically blended into the synthetic
targets with a small coefficient, and the loop keeps whichever synthetic
snapshot scores the best validation MSE.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .data import WindowedDataset, sample_windows
from .errors import DivergenceError
from .evaluate import StudentTrainConfig, forecast_metrics, train_student
from .experts import ExpertTrajectory, SegmentSample, sample_segment
from .losses import (
    IsibConfig,
    LossBreakdown,
    _isib_loss_and_grad,
    isib_loss,
    param_match_loss,
    total_loss,
)
from .metagrad import SyntheticGradient, backprop_to_synthetic, unroll_student
from .models import AdamState, ModelSpec, adam_step, backward_rows, forward_rows
from .seeds import derive_seed
from .spectral import spectral_l1_rows_grad
from .synthetic import SyntheticDataset

log = logging.getLogger(__name__)

VALUE_INPUT_SOURCES = ("synthetic", "real")
VALUE_TEACHERS = ("segment_target", "expert_final")
PARAM_NORMS = ("segment", "global")


@dataclass(frozen=True)
class DistillConfig:
    """All hyperparameters of a distillation run."""

    alpha: float = 0.8
    lambda_is: float = 0.6
    lambda_div: float = 0.5
    tau: float = 1.0
    epsilon: float = 1e-8
    synthetic_lr: float = 0.1
    student_lr: float = 3e-4
    unroll_steps: int = 20
    segment_span: int = 1
    interval: int = 5
    cond_coef: float = 0.01
    iterations: int = 1000
    eval_every: int = 50
    eval_steps: int = 500
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    synthetic_count: int = 3
    value_input_source: str = "synthetic"
    value_teacher: str = "segment_target"
    value_batch_size: int = 32
    param_norm: str = "segment"
    meta_grad_max_norm: float = 0.0  # 0 disables the norm guard

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.lambda_is < 0 or self.lambda_div <= 0 or self.tau <= 0:
            raise ValueError("lambda_is must be >= 0; lambda_div and tau > 0")
        if self.synthetic_lr < 0 or self.student_lr < 0:
            raise ValueError("learning rates must be >= 0")
        if self.unroll_steps < 0 or self.segment_span < 1 or self.interval < 1:
            raise ValueError("bad unroll_steps / segment_span / interval")
        if not 0.0 <= self.cond_coef <= 1.0:
            raise ValueError(f"cond_coef must lie in [0, 1], got {self.cond_coef}")
        if self.iterations < 0 or self.eval_every < 1 or self.eval_steps < 1:
            raise ValueError("bad iterations / eval_every / eval_steps")
        if self.synthetic_count < 1 or self.value_batch_size < 1 or not self.seeds:
            raise ValueError("bad synthetic_count / value_batch_size / seeds")
        if self.value_input_source not in VALUE_INPUT_SOURCES:
            raise ValueError(f"value_input_source must be one of {VALUE_INPUT_SOURCES}")
        if self.value_teacher not in VALUE_TEACHERS:
            raise ValueError(f"value_teacher must be one of {VALUE_TEACHERS}")
        if self.param_norm not in PARAM_NORMS:
            raise ValueError(f"param_norm must be one of {PARAM_NORMS}")
        if self.meta_grad_max_norm < 0:
            raise ValueError("meta_grad_max_norm must be >= 0")

    def isib(self) -> IsibConfig:
        return IsibConfig(tau=self.tau, epsilon=self.epsilon, lambda_div=self.lambda_div)


@dataclass(eq=False)
class StepContext:
    """Frozen per-iteration quantities the objective is evaluated against."""

    theta_start: np.ndarray
    theta_target: np.ndarray
    denom_start: np.ndarray
    denom_target: np.ndarray
    theta_value_teacher: np.ndarray
    value_inputs: np.ndarray | None  # None -> evaluate on the synthetic inputs


@dataclass(eq=False)
class LogRow:
    iteration: int
    l_param: float
    l_val_tmp: float
    l_val_fre: float
    l_is: float
    total: float
    eval_mse: float | None = None
    eval_mae: float | None = None


@dataclass(eq=False)
class DistillState:
    """Mutable loop state; owned by a single thread."""

    config: DistillConfig
    spec: ModelSpec
    trajectories: list[ExpertTrajectory]
    train_windows: WindowedDataset
    synthetic: SyntheticDataset
    adam: AdamState
    segment_rng: np.random.Generator
    value_rng: np.random.Generator
    cond_rng: np.random.Generator
    iteration: int = 0


def init_synthetic(real_windows: WindowedDataset, s: int, seed: int) -> SyntheticDataset:
    """Seed the synthetic tensor with real windows (input ++ target along time)."""
    pairs = sample_windows(real_windows, s, seed)
    data = np.stack([np.concatenate([p.input, p.target], axis=1) for p in pairs])
    return SyntheticDataset(data=data, t_in=real_windows.t_in, t_out=real_windows.t_out)


def conditional_update(
    synthetic: SyntheticDataset,
    teacher_spec: ModelSpec,
    theta_teacher: np.ndarray,
    coef: float,
) -> SyntheticDataset:
    """Blend teacher predictions into the synthetic targets; inputs untouched."""
    if not 0.0 <= coef <= 1.0:
        raise ValueError(f"coef must lie in [0, 1], got {coef}")
    s, d, t_in = synthetic.inputs.shape
    preds, _ = forward_rows(
        teacher_spec, theta_teacher, synthetic.inputs.reshape(s * d, t_in)
    )
    preds = preds.reshape(s, d, teacher_spec.t_out)
    data = synthetic.data.copy()
    data[:, :, t_in:] = (1.0 - coef) * synthetic.targets + coef * preds
    return SyntheticDataset(data=data, t_in=synthetic.t_in, t_out=synthetic.t_out)


def _value_forward(
    spec: ModelSpec,
    theta_student: np.ndarray,
    theta_teacher: np.ndarray,
    x: np.ndarray,
    alpha: float,
):
    """Temporal and spectral consistency terms plus what their backward needs."""
    batch, d, t_in = x.shape
    rows = x.reshape(batch * d, t_in)
    y_s, cache_s = forward_rows(spec, theta_student, rows)
    y_t, cache_t = forward_rows(spec, theta_teacher, rows)
    diff = y_s - y_t
    l_tmp = float((diff**2).mean())
    per_row, grad_fre_rows = spectral_l1_rows_grad(diff)
    l_fre = float(per_row.mean())
    n_rows = rows.shape[0]
    g_student = (1.0 - alpha) * (2.0 / diff.size) * diff + (alpha / n_rows) * grad_fre_rows
    return l_tmp, l_fre, g_student, cache_s, cache_t


def distill_objective(
    synthetic: SyntheticDataset,
    spec: ModelSpec,
    ctx: StepContext,
    config: DistillConfig,
) -> LossBreakdown:
    """Scalar objective only — no reverse passes. Used by the FD oracle."""
    theta_final, _ = unroll_student(
        ctx.theta_start, synthetic, spec, config.unroll_steps, config.student_lr
    )
    num = float((theta_final - ctx.theta_target) @ (theta_final - ctx.theta_target))
    den = float((ctx.denom_target - ctx.denom_start) @ (ctx.denom_target - ctx.denom_start))
    l_param = num / den
    x_val = ctx.value_inputs if ctx.value_inputs is not None else synthetic.inputs
    l_tmp, l_fre, _, _, _ = _value_forward(
        spec, theta_final, ctx.theta_value_teacher, x_val, config.alpha
    )
    l_is = isib_loss(synthetic.data, config.isib())
    return total_loss(l_param, l_tmp, l_fre, l_is, config.alpha, config.lambda_is)


def distill_objective_grad(
    synthetic: SyntheticDataset,
    spec: ModelSpec,
    ctx: StepContext,
    config: DistillConfig,
) -> tuple[LossBreakdown, SyntheticGradient, np.ndarray]:
    """Objective plus its exact gradient w.r.t. the synthetic tensor.

    Returns the loss breakdown, the meta-gradient, and the unrolled student
    parameters (used downstream for logging/teacher bookkeeping).
    """
    theta_final, trace = unroll_student(
        ctx.theta_start, synthetic, spec, config.unroll_steps, config.student_lr
    )

    den = float((ctx.denom_target - ctx.denom_start) @ (ctx.denom_target - ctx.denom_start))
    gap = theta_final - ctx.theta_target
    l_param = float(gap @ gap) / den
    d_theta_final = (2.0 / den) * gap

    on_synthetic = ctx.value_inputs is None
    x_val = synthetic.inputs if on_synthetic else ctx.value_inputs
    l_tmp, l_fre, g_student, cache_s, cache_t = _value_forward(
        spec, theta_final, ctx.theta_value_teacher, x_val, config.alpha
    )
    d_theta_val, d_x_student = backward_rows(spec, theta_final, cache_s, g_student)
    d_theta_final += d_theta_val

    direct = SyntheticGradient.zeros_like(synthetic)
    if on_synthetic:
        # the teacher's forward also depends on the synthetic inputs
        _, d_x_teacher = backward_rows(
            spec, ctx.theta_value_teacher, cache_t, -g_student
        )
        s, d, t_in = synthetic.inputs.shape
        direct.d_inputs += (d_x_student + d_x_teacher).reshape(s, d, t_in)

    l_is, d_data_isib = _isib_loss_and_grad(synthetic.data, config.isib())
    direct.d_inputs += config.lambda_is * d_data_isib[:, :, : synthetic.t_in]
    direct.d_targets += config.lambda_is * d_data_isib[:, :, synthetic.t_in :]

    meta = backprop_to_synthetic(trace, d_theta_final, direct)
    breakdown = total_loss(l_param, l_tmp, l_fre, l_is, config.alpha, config.lambda_is)
    return breakdown, meta, theta_final


def _build_context(state: DistillState, segment: SegmentSample) -> StepContext:
    cfg = state.config
    traj = state.trajectories[segment.expert_index]
    if cfg.param_norm == "global":
        theta_target = traj.checkpoints[-1].astype(np.float64)
        denom_start = traj.checkpoints[0].astype(np.float64)
        denom_target = theta_target
    else:
        theta_target = segment.theta_target
        denom_start = segment.theta_start
        denom_target = segment.theta_target
    if cfg.value_teacher == "expert_final":
        theta_value_teacher = traj.checkpoints[-1].astype(np.float64)
    else:
        theta_value_teacher = theta_target
    value_inputs = None
    if cfg.value_input_source == "real":
        n = len(state.train_windows)
        idx = state.value_rng.integers(0, n, size=min(cfg.value_batch_size, n))
        value_inputs = np.stack([state.train_windows.pairs[i].input for i in idx])
    return StepContext(
        theta_start=segment.theta_start,
        theta_target=theta_target,
        denom_start=denom_start,
        denom_target=denom_target,
        theta_value_teacher=theta_value_teacher,
        value_inputs=value_inputs,
    )


def distill_step(state: DistillState) -> LossBreakdown:
    """One outer iteration: sample, unroll, meta-backprop, Adam update."""
    cfg = state.config
    segment = sample_segment(state.trajectories, cfg.segment_span, state.segment_rng)
    ctx = _build_context(state, segment)
    breakdown, meta, _ = distill_objective_grad(state.synthetic, state.spec, ctx, cfg)
    if not math.isfinite(breakdown.total):
        raise DivergenceError(f"non-finite total loss at iteration {state.iteration}")

    grad = meta.as_tensor()
    if cfg.meta_grad_max_norm > 0.0:
        norm = float(np.sqrt((grad**2).sum()))
        if norm > cfg.meta_grad_max_norm:
            grad = grad * (cfg.meta_grad_max_norm / norm)

    new_data, _ = adam_step(
        state.synthetic.data, grad, cfg.synthetic_lr, state=state.adam
    )
    state.synthetic = SyntheticDataset(
        data=new_data, t_in=state.synthetic.t_in, t_out=state.synthetic.t_out
    )
    state.iteration += 1
    return breakdown


def _validation_mse(
    synthetic: SyntheticDataset,
    spec: ModelSpec,
    val_windows: WindowedDataset,
    cfg: DistillConfig,
) -> tuple[float, float]:
    """Mean val MSE/MAE of fresh students across the configured seeds."""
    train_cfg = StudentTrainConfig(lr=cfg.student_lr, steps=cfg.eval_steps)
    mses, maes = [], []
    for seed in cfg.seeds:
        theta = train_student(spec, synthetic.inputs, synthetic.targets, seed, train_cfg)
        if not np.isfinite(theta).all():
            continue
        m, a = forecast_metrics(spec, theta, val_windows)
        mses.append(m)
        maes.append(a)
    if not mses:
        return math.nan, math.nan
    return float(np.mean(mses)), float(np.mean(maes))


def run_distillation(
    config: DistillConfig,
    spec: ModelSpec,
    trajectories: list[ExpertTrajectory],
    train_windows: WindowedDataset,
    val_windows: WindowedDataset,
    seed: int,
) -> tuple[SyntheticDataset, list[LogRow]]:
    """Full outer loop; returns the best-validation synthetic set and the log."""
    synthetic = init_synthetic(train_windows, config.synthetic_count, derive_seed(seed, 1))
    if config.iterations == 0:
        return synthetic, []

    state = DistillState(
        config=config,
        spec=spec,
        trajectories=trajectories,
        train_windows=train_windows,
        synthetic=synthetic,
        adam=AdamState(
            first_moment=np.zeros_like(synthetic.data),
            second_moment=np.zeros_like(synthetic.data),
        ),
        segment_rng=np.random.default_rng(derive_seed(seed, 2)),
        value_rng=np.random.default_rng(derive_seed(seed, 3)),
        cond_rng=np.random.default_rng(derive_seed(seed, 4)),
    )

    rows: list[LogRow] = []
    best: tuple[float, SyntheticDataset] | None = None
    for it in range(1, config.iterations + 1):
        breakdown = distill_step(state)
        row = LogRow(
            iteration=it,
            l_param=breakdown.l_param,
            l_val_tmp=breakdown.l_val_tmp,
            l_val_fre=breakdown.l_val_fre,
            l_is=breakdown.l_is,
            total=breakdown.total,
        )
        if config.cond_coef > 0.0 and it % config.interval == 0:
            expert = int(state.cond_rng.integers(0, len(trajectories)))
            theta_final = trajectories[expert].checkpoints[-1].astype(np.float64)
            state.synthetic = conditional_update(
                state.synthetic, spec, theta_final, config.cond_coef
            )
        if it % config.eval_every == 0:
            val_mse, val_mae = _validation_mse(state.synthetic, spec, val_windows, config)
            row.eval_mse = val_mse
            row.eval_mae = val_mae
            if math.isfinite(val_mse) and (best is None or val_mse < best[0]):
                best = (val_mse, state.synthetic.copy())
            log.info("iter %d: total=%.6f val_mse=%.6f", it, breakdown.total, val_mse)
        rows.append(row)

    if config.iterations % config.eval_every != 0:
        val_mse, _ = _validation_mse(state.synthetic, spec, val_windows, config)
        if math.isfinite(val_mse) and (best is None or val_mse < best[0]):
            best = (val_mse, state.synthetic.copy())

    final = best[1] if best is not None else state.synthetic
    return final, rows


def write_run_log(rows: list[LogRow], path: str) -> None:
    """Delimited text: one row per iteration, eval columns only when present."""
    lines = ["iteration,l_param,l_val_tmp,l_val_fre,l_is,total,eval_mse,eval_mae"]
    for r in rows:
        evals = (
            f"{r.eval_mse!r},{r.eval_mae!r}" if r.eval_mse is not None else ","
        )
        lines.append(
            f"{r.iteration},{r.l_param!r},{r.l_val_tmp!r},{r.l_val_fre!r},"
            f"{r.l_is!r},{r.total!r},{evals}"
        )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
