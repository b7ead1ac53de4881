"""Command-line entry point.

Four subcommands cover the pipeline stages::

    ddtime teachers  --config run.cfg          # train teachers, write DDTB buffers
    ddtime distill   --config run.cfg          # optimize the synthetic set, write DDTS
    ddtime eval      --config run.cfg --synthetic out/synthetic.ddts
    ddtime diversity --synthetic out/synthetic.ddts [--tau 1.0]

Shared flags: ``--config PATH``, ``--seed N`` (overrides the config seed),
``--threads N`` (evaluation parallelism; 1 is the determinism-guaranteed
mode), ``--out DIR`` (overrides ``output.dir``). ``DDTIME_LOG_LEVEL``
selects error/warn/info/debug logging on stderr.
"""

from __future__ import annotations

import argparse
import glob
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import config as configmod
from . import plots
from .data import (
    DelimitedFormat,
    RawSeries,
    WindowedDataset,
    apply_standardization,
    load_series,
    slide_windows,
    split,
    standardize,
)
from .distill import run_distillation, write_run_log
from .errors import DDTimeError
from .evaluate import (
    StudentTrainConfig,
    diversity,
    format_summary,
    train_and_eval,
    write_report_csv,
)
from .experts import load_buffer, save_buffer, train_teacher
from .losses import IsibConfig
from .seeds import STAGE_TEACHERS, derive_seed
from .synthetic import load_synthetic, save_synthetic

log = logging.getLogger("ddtime")

_LOG_LEVELS = {
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}


def _configure_logging() -> None:
    name = os.environ.get("DDTIME_LOG_LEVEL", "info").lower()
    level = _LOG_LEVELS.get(name)
    if level is None:
        print(
            f"ddtime: DDTIME_LOG_LEVEL must be one of {sorted(_LOG_LEVELS)}",
            file=sys.stderr,
        )
        level = logging.INFO
    logging.basicConfig(
        level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s"
    )


def _delimited_format(cfg: configmod.DataConfig) -> DelimitedFormat:
    delim = {"auto": None, "comma": ",", "tab": "\t"}.get(cfg.delimiter)
    if delim is None and cfg.delimiter != "auto":
        delim = cfg.delimiter  # allow a literal delimiter character
    return DelimitedFormat(delimiter=delim, header=cfg.header)


def prepare_windows(
    run: configmod.RunConfig,
) -> tuple[WindowedDataset, WindowedDataset, WindowedDataset, RawSeries]:
    """Load, split, standardize, and window the configured series."""
    d = run.data
    series = load_series(d.path, _delimited_format(d))
    if d.standardize_scope == "global":
        series, stats = standardize(series, d.epsilon)
        train, val, test = split(series, (d.train_ratio, d.val_ratio, d.test_ratio))
    else:
        train, val, test = split(series, (d.train_ratio, d.val_ratio, d.test_ratio))
        train, stats = standardize(train, d.epsilon)
        val = apply_standardization(val, stats)
        test = apply_standardization(test, stats)
    win = lambda s: slide_windows(s, d.t_in, d.t_out, d.stride)
    return win(train), win(val), win(test), series


def _require_config(args) -> configmod.RunConfig:
    if not args.config:
        raise DDTimeError("this command requires --config PATH")
    run = configmod.load_config(args.config)
    return configmod.with_overrides(run, seed=args.seed, out_dir=args.out)


def cmd_teachers(args) -> int:
    run = _require_config(args)
    train, _val, test, _ = prepare_windows(run)
    spec = configmod.make_model_spec(run, train.n_vars)
    tc = run.teacher
    os.makedirs(run.out_dir, exist_ok=True)

    def one(i: int):
        seed = derive_seed(run.seed, STAGE_TEACHERS, i)
        log.info("training teacher %d/%d (seed %d)", i + 1, tc.count, seed)
        return train_teacher(
            train, spec, tc.epochs, tc.batch_size, tc.lr, tc.momentum, seed, test
        )

    if args.threads > 1:
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            trajectories = list(pool.map(one, range(tc.count)))
    else:
        trajectories = [one(i) for i in range(tc.count)]

    written: list[str] = []
    try:
        for i in range(0, len(trajectories), tc.buffer_group):
            path = os.path.join(run.out_dir, f"buffer_{i // tc.buffer_group:03d}.ddtb")
            save_buffer(trajectories[i : i + tc.buffer_group], path)
            written.extend([path, path + ".meta"])
        metrics_path = os.path.join(run.out_dir, "teacher_metrics.csv")
        with open(metrics_path, "w") as fh:
            fh.write("teacher,epoch,train_mse,train_mae,test_mse,test_mae\n")
            for t_idx, traj in enumerate(trajectories):
                for e in range(traj.epochs):
                    fh.write(
                        f"{t_idx},{e + 1},{traj.train_mse_per_epoch[e]!r},"
                        f"{traj.train_mae_per_epoch[e]!r},{traj.test_mse_per_epoch[e]!r},"
                        f"{traj.test_mae_per_epoch[e]!r}\n"
                    )
        written.append(metrics_path)
        fig = plots.plot_teacher_curves(
            trajectories, os.path.join(run.out_dir, "teacher_curves.png")
        )
        written.append(fig)
    except BaseException:
        for path in written:
            if os.path.exists(path):
                os.remove(path)
        raise
    n_buffers = (len(trajectories) + tc.buffer_group - 1) // tc.buffer_group
    print(f"wrote {n_buffers} buffer file(s) for {tc.count} teachers to {run.out_dir}")
    return 0


def _load_all_buffers(out_dir: str):
    paths = sorted(glob.glob(os.path.join(out_dir, "buffer_*.ddtb")))
    if not paths:
        raise DDTimeError(f"no buffer_*.ddtb files in {out_dir}; run `ddtime teachers`")
    trajectories = []
    for path in paths:
        trajectories.extend(load_buffer(path))
    return trajectories


def cmd_distill(args) -> int:
    run = _require_config(args)
    train, val, _test, _ = prepare_windows(run)
    spec = configmod.make_model_spec(run, train.n_vars)
    trajectories = _load_all_buffers(run.out_dir)
    synthetic, rows = run_distillation(
        run.distill, spec, trajectories, train, val, run.seed
    )
    os.makedirs(run.out_dir, exist_ok=True)
    ddts_path = os.path.join(run.out_dir, "synthetic.ddts")
    save_synthetic(synthetic, ddts_path)
    log_path = os.path.join(run.out_dir, "run_log.csv")
    write_run_log(rows, log_path)
    if rows:
        plots.plot_run_log(rows, os.path.join(run.out_dir, "run_log.png"))
    plots.plot_synthetic_samples(
        synthetic, os.path.join(run.out_dir, "synthetic_samples.png")
    )
    print(f"wrote {ddts_path} ({synthetic.n_samples} samples) and {log_path}")
    return 0


def cmd_eval(args) -> int:
    run = _require_config(args)
    train, _val, test, _ = prepare_windows(run)
    spec = configmod.make_model_spec(run, train.n_vars)
    synthetic = load_synthetic(args.synthetic)
    if (synthetic.n_vars, synthetic.t_in, synthetic.t_out) != (
        spec.n_vars,
        spec.t_in,
        spec.t_out,
    ):
        raise DDTimeError(
            f"synthetic file shape {(synthetic.n_vars, synthetic.t_in, synthetic.t_out)} "
            f"does not match the configured {(spec.n_vars, spec.t_in, spec.t_out)}"
        )
    report = train_and_eval(
        synthetic,
        test,
        spec,
        list(run.eval.seeds),
        StudentTrainConfig(lr=run.eval.lr, steps=run.eval.steps),
        n_real_windows=len(train),
        isib_cfg=IsibConfig(
            tau=run.distill.tau,
            epsilon=run.distill.epsilon,
            lambda_div=run.distill.lambda_div,
        ),
        threads=args.threads,
    )
    os.makedirs(run.out_dir, exist_ok=True)
    write_report_csv(report, os.path.join(run.out_dir, "eval_report.csv"))
    summary = format_summary(report)
    with open(os.path.join(run.out_dir, "eval_summary.txt"), "w") as fh:
        fh.write(summary + "\n")
    plots.plot_eval_report(report, os.path.join(run.out_dir, "eval_metrics.png"))
    print(summary)
    return 0


def cmd_diversity(args) -> int:
    synthetic = load_synthetic(args.synthetic)
    cfg = IsibConfig(tau=args.tau)
    score = diversity(synthetic, cfg)
    out_dir = args.out or os.path.dirname(os.path.abspath(args.synthetic))
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, "diversity.txt")
    with open(path, "w") as fh:
        fh.write(f"{score!r}\n")
    print(f"{score!r}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ddtime", description="time-series dataset distillation pipeline"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="run configuration file")
        p.add_argument("--seed", type=int, default=None, help="override the master seed")
        p.add_argument("--threads", type=int, default=1, help="evaluation parallelism")
        p.add_argument("--out", default=None, help="override output.dir")

    p = sub.add_parser("teachers", help="train teachers and write replay buffers")
    common(p)
    p.set_defaults(func=cmd_teachers)

    p = sub.add_parser("distill", help="optimize the synthetic dataset")
    common(p)
    p.set_defaults(func=cmd_distill)

    p = sub.add_parser("eval", help="train students on a synthetic set and score them")
    common(p)
    p.add_argument("--synthetic", required=True, help="path to a .ddts file")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("diversity", help="average pairwise symmetric KL of a synthetic set")
    common(p)
    p.add_argument("--synthetic", required=True, help="path to a .ddts file")
    p.add_argument("--tau", type=float, default=1.0, help="softmax temperature")
    p.set_defaults(func=cmd_diversity)
    return parser


def main(argv=None) -> int:
    _configure_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (DDTimeError, FileNotFoundError, OSError) as exc:
        print(f"ddtime: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
