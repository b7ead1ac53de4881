"""Teacher training, per-epoch checkpoint trajectories, and replay buffers.

Teachers are trained on the real windows with seeded shuffled mini-batch
SGD-momentum; the parameter vector is checkpointed after initialization and
after every epoch, and train/test MSE and MAE curves are recorded per epoch.
Checkpoints are held (and stored) as float32 while all arithmetic runs in
float64.

Replay-buffer files use the ``DDTB`` framing::

    magic "DDTB" | u16 version=1 | u16 model-kind code | u32 t_in | u32 t_out
    | u32 n_vars | u32 hidden-count | u32 * hidden dims | u32 trajectories
    | u32 checkpoints-per-trajectory | u64 param_dim
    | per trajectory: u64 seed, checkpoints as LE float32,
      four metric curves (train MSE, train MAE, test MSE, test MAE) as LE float64
    | u32 CRC32 of the payload

A human-readable ``.meta`` sidecar mirrors the header fields.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .data import WindowedDataset
from .errors import (
    DegenerateSegmentError,
    DivergenceError,
    ShapeMismatchError,
    VersionMismatchError,
)
from .models import (
    MODEL_KIND_CODES,
    MODEL_KIND_NAMES,
    ModelSpec,
    SgdMomentumState,
    forward_rows,
    mse_loss_and_grad_arrays,
    init_params,
    parameter_count,
    sgd_momentum_step,
)
from .serial import Cursor, read_framed, write_framed

MAGIC = b"DDTB"
VERSION = 1
SEGMENT_RESAMPLE_LIMIT = 16
_DEGENERATE_SQ_NORM = 1e-20


@dataclass(eq=False)
class ExpertTrajectory:
    """One teacher's parameter path: init plus one float32 checkpoint per epoch."""

    spec: ModelSpec
    seed: int
    checkpoints: list[np.ndarray]
    train_mse_per_epoch: np.ndarray
    train_mae_per_epoch: np.ndarray
    test_mse_per_epoch: np.ndarray
    test_mae_per_epoch: np.ndarray

    @property
    def epochs(self) -> int:
        return len(self.checkpoints) - 1


@dataclass(eq=False)
class SegmentSample:
    """A start/target checkpoint pair cut from one trajectory."""

    theta_start: np.ndarray
    theta_target: np.ndarray
    expert_index: int
    start_epoch: int
    span: int


def _metrics(spec: ModelSpec, theta: np.ndarray, x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    batch, d, t_in = x.shape
    preds, _ = forward_rows(spec, theta, x.reshape(batch * d, t_in))
    resid = preds - y.reshape(batch * d, spec.t_out)
    return float((resid**2).mean()), float(np.abs(resid).mean())


def train_teacher(
    dataset: WindowedDataset,
    spec: ModelSpec,
    epochs: int,
    batch_size: int,
    lr: float,
    momentum: float,
    seed: int,
    eval_dataset: WindowedDataset | None = None,
) -> ExpertTrajectory:
    """Train one teacher and record its checkpoint trajectory.

    ``eval_dataset`` supplies the test-metric curves; it falls back to the
    training windows when absent.
    """
    if not dataset.pairs:
        raise ValueError("empty training dataset")
    x_train = dataset.inputs()
    y_train = dataset.targets()
    held_out = eval_dataset if eval_dataset is not None else dataset
    x_test = held_out.inputs()
    y_test = held_out.targets()

    rng = np.random.default_rng(seed)
    theta = init_params(spec, seed)
    state = SgdMomentumState.zeros(theta.size)
    checkpoints = [theta.astype(np.float32)]
    train_mse, train_mae, test_mse, test_mae = [], [], [], []
    n = len(dataset.pairs)
    for epoch in range(epochs):
        order = rng.permutation(n)
        for lo in range(0, n, batch_size):
            idx = order[lo : lo + batch_size]
            loss, grad = mse_loss_and_grad_arrays(spec, theta, x_train[idx], y_train[idx])
            if not np.isfinite(loss):
                raise DivergenceError(f"teacher diverged at epoch {epoch}")
            theta, state = sgd_momentum_step(theta, grad, lr, momentum, state)
        checkpoints.append(theta.astype(np.float32))
        mse_tr, mae_tr = _metrics(spec, theta, x_train, y_train)
        mse_te, mae_te = _metrics(spec, theta, x_test, y_test)
        train_mse.append(mse_tr)
        train_mae.append(mae_tr)
        test_mse.append(mse_te)
        test_mae.append(mae_te)

    return ExpertTrajectory(
        spec=spec,
        seed=seed,
        checkpoints=checkpoints,
        train_mse_per_epoch=np.array(train_mse),
        train_mae_per_epoch=np.array(train_mae),
        test_mse_per_epoch=np.array(test_mse),
        test_mae_per_epoch=np.array(test_mae),
    )


def save_buffer(trajectories: list[ExpertTrajectory], path: str) -> None:
    """Write one ``DDTB`` file plus its ``.meta`` sidecar."""
    if not trajectories:
        raise ValueError("refusing to write an empty buffer")
    spec = trajectories[0].spec
    n_checkpoints = len(trajectories[0].checkpoints)
    for traj in trajectories:
        if traj.spec != spec or len(traj.checkpoints) != n_checkpoints:
            raise ShapeMismatchError("buffer requires homogeneous trajectories")

    dim = parameter_count(spec)
    parts = [
        struct.pack(
            "<HHIIII",
            VERSION,
            MODEL_KIND_CODES[spec.kind],
            spec.t_in,
            spec.t_out,
            spec.n_vars,
            len(spec.hidden_dims),
        )
    ]
    for h in spec.hidden_dims:
        parts.append(struct.pack("<I", h))
    parts.append(struct.pack("<IIQ", len(trajectories), n_checkpoints, dim))
    for traj in trajectories:
        parts.append(struct.pack("<Q", traj.seed))
        for cp in traj.checkpoints:
            parts.append(np.ascontiguousarray(cp, dtype="<f4").tobytes())
        for curve in (
            traj.train_mse_per_epoch,
            traj.train_mae_per_epoch,
            traj.test_mse_per_epoch,
            traj.test_mae_per_epoch,
        ):
            parts.append(np.ascontiguousarray(curve, dtype="<f8").tobytes())
    write_framed(path, MAGIC, b"".join(parts))
    _write_sidecar(path, spec, len(trajectories), n_checkpoints, dim)


def _write_sidecar(path: str, spec: ModelSpec, n_traj: int, n_checkpoints: int, dim: int) -> None:
    lines = [
        "format=DDTB",
        f"version={VERSION}",
        f"model_kind={spec.kind}",
        f"t_in={spec.t_in}",
        f"t_out={spec.t_out}",
        f"n_vars={spec.n_vars}",
        f"hidden_dims={','.join(str(h) for h in spec.hidden_dims)}",
        f"trajectories={n_traj}",
        f"checkpoints_per_trajectory={n_checkpoints}",
        f"param_dim={dim}",
    ]
    with open(f"{path}.meta", "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_buffer(path: str) -> list[ExpertTrajectory]:
    """Read one ``DDTB`` file back; bit-exact inverse of ``save_buffer``."""
    cur = Cursor(read_framed(path, MAGIC), str(path))
    version, kind_code, t_in, t_out, n_vars, n_hidden = cur.unpack("<HHIIII")
    if version != VERSION:
        raise VersionMismatchError(f"{path}: DDTB version {version}, expected {VERSION}")
    if kind_code not in MODEL_KIND_NAMES:
        raise VersionMismatchError(f"{path}: unknown model-kind code {kind_code}")
    hidden = tuple(cur.unpack("<I")[0] for _ in range(n_hidden))
    n_traj, n_checkpoints, dim = cur.unpack("<IIQ")
    spec = ModelSpec(
        kind=MODEL_KIND_NAMES[kind_code],
        t_in=t_in,
        t_out=t_out,
        n_vars=n_vars,
        hidden_dims=hidden,
    )
    if parameter_count(spec) != dim:
        raise ShapeMismatchError(
            f"{path}: header param_dim {dim} != {parameter_count(spec)} from the spec"
        )
    epochs = n_checkpoints - 1
    out = []
    for _ in range(n_traj):
        (seed,) = cur.unpack("<Q")
        checkpoints = [
            np.frombuffer(cur.take(dim * 4), dtype="<f4").astype(np.float32)
            for _ in range(n_checkpoints)
        ]
        curves = [
            np.frombuffer(cur.take(epochs * 8), dtype="<f8").astype(np.float64)
            for _ in range(4)
        ]
        out.append(
            ExpertTrajectory(
                spec=spec,
                seed=int(seed),
                checkpoints=checkpoints,
                train_mse_per_epoch=curves[0],
                train_mae_per_epoch=curves[1],
                test_mse_per_epoch=curves[2],
                test_mae_per_epoch=curves[3],
            )
        )
    return out


def save_buffers(
    trajectories: list[ExpertTrajectory],
    directory: str,
    group_size: int = 5,
    stem: str = "buffer",
) -> list[str]:
    """Split trajectories into files of ``group_size`` and write them all."""
    paths = []
    for i in range(0, len(trajectories), group_size):
        path = f"{directory}/{stem}_{i // group_size:03d}.ddtb"
        save_buffer(trajectories[i : i + group_size], path)
        paths.append(path)
    return paths


def load_buffers(paths: list[str]) -> list[ExpertTrajectory]:
    out = []
    for path in paths:
        out.extend(load_buffer(path))
    return out


def sample_segment(
    trajectories: list[ExpertTrajectory],
    span: int,
    rng: np.random.Generator,
) -> SegmentSample:
    """Uniformly pick an expert, then a start epoch, and cut a span.

    Numerically zero segments are skipped and resampled a bounded number of
    times before giving up.
    """
    if span < 1:
        raise ValueError(f"span must be >= 1, got {span}")
    eligible = [i for i, t in enumerate(trajectories) if t.epochs >= span]
    if not eligible:
        raise ValueError(f"no trajectory has >= {span} epochs")
    for _ in range(SEGMENT_RESAMPLE_LIMIT):
        expert = eligible[int(rng.integers(0, len(eligible)))]
        traj = trajectories[expert]
        start = int(rng.integers(0, traj.epochs - span + 1))
        theta_start = traj.checkpoints[start].astype(np.float64)
        theta_target = traj.checkpoints[start + span].astype(np.float64)
        gap = theta_target - theta_start
        if float(gap @ gap) > _DEGENERATE_SQ_NORM:
            return SegmentSample(
                theta_start=theta_start,
                theta_target=theta_target,
                expert_index=expert,
                start_epoch=start,
                span=span,
            )
    raise DegenerateSegmentError(
        f"no non-degenerate segment found in {SEGMENT_RESAMPLE_LIMIT} draws"
    )
