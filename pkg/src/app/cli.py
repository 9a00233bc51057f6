from __future__ import annotations

import argparse
import logging
from pathlib import Path
from typing import List, Optional

import numpy as np
import pandas as pd

from src.analysis.ensemble import SnapshotSet, gap_report, loglog_slope, random_directions, scaling_law_check
from src.analysis.evaluation import ModelEvaluator
from src.analysis.landscape import (
    default_grid,
    evaluate_grid,
    plane_from_points,
    project_trajectory,
    ray_offsets,
    ray_profile,
    segment_minimizers,
    segment_profile,
    width_metric,
)
from src.errors import NumericError, SwaLabError
from src.model.batch import SplitData
from src.model.gradcheck import check_all
from src.model.network import evaluate
from src.model.spec import MlpState, init_state
from src.orchestration.artifacts import write_csv, write_gnuplot
from src.orchestration.checkpoint import load_checkpoint, save_checkpoint
from src.orchestration.config import ExperimentConfig, load_config
from src.orchestration.experiment import check_model_fits, metric_row, run_experiment, with_fresh_bn
from src.sandbox.quadratic import QuadraticProblem, averaging_convergence, ellipsoid_check, simulate_sgd
from src.sources.repository import make_dataset
from src.training.trainer import pretrain, run_swa
from src.utils.logging import configure_logging

from .settings import AppSettings

logger = logging.getLogger(__name__)


def _add_global_args(p: argparse.ArgumentParser, suppress: bool = False) -> None:
    # Subcommands repeat the global flags with SUPPRESS so they can go on either side of the command.
    def default(value):
        return argparse.SUPPRESS if suppress else value

    p.add_argument("--config", type=str, default=default(None), help="Experiment YAML (default: SWALAB_CONFIG or src/config/experiment.yaml).")
    p.add_argument("--seed", type=int, default=default(None), help="Run a single seed instead of the configured list.")
    p.add_argument("--out", type=str, default=default(None), help="Output directory.")
    p.add_argument("--quiet", action="store_true", default=default(False), help="Warnings and errors only; no progress bars.")
    p.add_argument("--dotenv", type=str, default=default(".env"), help="Path to .env file (default: .env)")


class _Context:
    def __init__(self, args: argparse.Namespace, settings: AppSettings) -> None:
        self.args = args
        self.settings = settings
        self._cfg: Optional[ExperimentConfig] = None
        self._data: Optional[SplitData] = None

    @property
    def cfg(self) -> ExperimentConfig:
        if self._cfg is None:
            self._cfg = load_config(self.args.config or self.settings.default_config)
        return self._cfg

    @property
    def data(self) -> SplitData:
        if self._data is None:
            self._data = make_dataset(self.cfg.data)
        return self._data

    @property
    def seed(self) -> int:
        return self.args.seed if self.args.seed is not None else self.cfg.experiment.seeds[0]

    @property
    def progress(self) -> bool:
        return self.settings.progress and not self.args.quiet

    def out_dir(self, default_name: str) -> Path:
        d = Path(self.args.out) if self.args.out else self.settings.out_root / default_name
        d.mkdir(parents=True, exist_ok=True)
        return d

    def load(self, path: str) -> MlpState:
        state = load_checkpoint(path)
        check_model_fits(state.spec, self.data)
        return state


def _print_table(df: pd.DataFrame) -> None:
    print(df.to_string(index=False))


def _cmd_train(ctx: _Context) -> int:
    cfg = ctx.cfg
    spec = cfg.model.to_spec()
    check_model_fits(spec, ctx.data)
    iters = ctx.args.iters or cfg.trainer.budget
    init = ctx.load(ctx.args.init) if ctx.args.init else init_state(spec, ctx.seed)
    tcfg = cfg.trainer_config(cfg.pretrain.schedule.build(cfg.trainer.budget), iters, ctx.seed, swa_enabled=False)
    run = run_swa(init, ctx.data.train, tcfg, test=ctx.data.test, progress=ctx.progress)

    out = ctx.out_dir("train")
    path = save_checkpoint(run.final_sgd_model, out / f"{ctx.args.name}.swac")
    if not run.curve.empty:
        write_gnuplot("curve", write_csv(run.curve, out, f"curve-{ctx.args.name}", "SGD training curve"))
    _print_table(pd.DataFrame([metric_row(ctx.args.name, run.final_sgd_model, ctx.data, iters=iters)]))
    logger.info("Model trained | iters=%d | checkpoint=%s", iters, path)
    return 0


def _cmd_swa(ctx: _Context) -> int:
    cfg = ctx.cfg
    spec = cfg.model.to_spec()
    check_model_fits(spec, ctx.data)
    B = cfg.trainer.budget
    frac = cfg.experiment.pretrain_fraction
    if ctx.args.init:
        start = ctx.load(ctx.args.init)
    else:
        pre_cfg = cfg.trainer_config(cfg.pretrain.schedule.build(B), int(round(frac * B)), ctx.seed, swa_enabled=False)
        start = pretrain(spec, ctx.data.train, pre_cfg, test=ctx.data.test, progress=ctx.progress)
    iters = ctx.args.iters or int(round((max(cfg.experiment.budgets) - frac) * B))
    tcfg = cfg.trainer_config(
        cfg.swa.schedule.build(B), iters, ctx.seed, log_snapshots=ctx.args.snapshots
    )
    run = run_swa(start, ctx.data.train, tcfg, test=ctx.data.test, progress=ctx.progress)

    out = ctx.out_dir("swa")
    save_checkpoint(run.swa_model, out / "swa.swac")
    save_checkpoint(run.final_sgd_model, out / "sgd.swac")
    for snap in run.log.captures():
        state = with_fresh_bn(spec, snap.params, ctx.data.train, cfg.trainer.bn_batch_size)
        save_checkpoint(state, out / f"snapshot-{snap.iteration:07d}.swac")
    if not run.curve.empty:
        write_gnuplot("curve", write_csv(run.curve, out, "curve-swa", "SWA training curve"))
    rows = [
        metric_row("swa", run.swa_model, ctx.data, iters=iters),
        metric_row("sgd", run.final_sgd_model, ctx.data, iters=iters),
    ]
    _print_table(pd.DataFrame(rows))
    n_models = run.swa_state.n_models if run.swa_state else 0
    logger.info("SWA finished | iters=%d | n_models=%d | snapshots=%d | out=%s", iters, n_models, len(run.log.captures()), out)
    return 0


def _cmd_eval(ctx: _Context) -> int:
    rows = []
    for path in ctx.args.checkpoint:
        state = ctx.load(path)
        rows.append(metric_row(Path(path).stem, state, ctx.data))
    df = pd.DataFrame(rows)
    if ctx.args.out:
        write_csv(df, ctx.out_dir("eval"), "eval", "checkpoint metrics")
    _print_table(df)
    return 0


def _evaluator(ctx: _Context, spec) -> ModelEvaluator:
    return ModelEvaluator(spec, ctx.data, bn_batch_size=ctx.cfg.trainer.bn_batch_size)


def _cmd_landscape(ctx: _Context) -> int:
    a = ctx.args
    out = ctx.out_dir("landscape")
    if a.kind == "plane":
        states = [ctx.load(p) for p in a.checkpoints]
        ev = _evaluator(ctx, states[0].spec)
        basis = plane_from_points(*(s.params for s in states))
        xs, ys = default_grid(basis, a.resolution, a.pad)
        surface = evaluate_grid(basis, ev, xs, ys, progress=ctx.progress)
        write_gnuplot("plane", write_csv(surface.to_frame(), out, "landscape-plane", "train loss / test error over the plane"))
        traj = project_trajectory(basis, ev, [(k, s.params) for k, s in enumerate(states)])
        write_csv(traj, out, "landscape-anchors", "anchor checkpoints in plane coordinates")
        _print_table(traj)
    elif a.kind == "ray":
        state = ctx.load(a.checkpoint)
        ev = _evaluator(ctx, state.spec)
        ts = ray_offsets(a.t_max, a.n_ts)
        profiles = ray_profile(state.params, ev, a.n_rays, ts, ctx.seed)
        frames = []
        for k, prof in enumerate(profiles):
            f = prof.to_frame()
            f.insert(0, "ray", k)
            frames.append(f)
        write_gnuplot("ray", write_csv(pd.concat(frames, ignore_index=True), out, "landscape-rays", "random-ray profiles"))
        widths = []
        for delta in a.delta:
            est = width_metric(profiles, delta)
            widths.append({"delta": delta, "width": est.value, "capped_rays": est.capped_rays})
        df = pd.DataFrame(widths)
        write_csv(df, out, "landscape-width", "width along random rays")
        _print_table(df)
    else:
        w_a, w_b = ctx.load(a.start), ctx.load(a.end)
        ev = _evaluator(ctx, w_a.spec)
        prof = segment_profile(w_a.params, w_b.params, ev, np.linspace(a.t_min, a.t_max, a.points))
        write_gnuplot("segment", write_csv(prof.to_frame(), out, "landscape-segment", "segment profile"))
        t_loss, t_err = segment_minimizers(prof)
        print(f"train-loss minimum at t={t_loss:.4f}; test-error minimum at t={t_err:.4f}")
    logger.info("Landscape written | kind=%s | out=%s", a.kind, out)
    return 0


def _cmd_ensemble(ctx: _Context) -> int:
    a = ctx.args
    states = [ctx.load(p) for p in a.checkpoints]
    spec = states[0].spec
    snaps = SnapshotSet.from_params(spec, [s.params for s in states], bn_data=ctx.data.train)
    report = gap_report(snaps, ctx.data.test)
    out = ctx.out_dir("ensemble")
    write_gnuplot("ensemble", write_csv(report.to_frame(), out, "ensemble", "prediction gaps"))
    print(report.model_dump_json(indent=2))

    if a.scaling:
        center = snaps.center_state
        dirs = random_directions(center.params.size, a.n_directions, ctx.seed)
        table = scaling_law_check(center, dirs, a.eps, ctx.data.test.as_batch())
        write_csv(table, out, "scaling", "prediction gaps against perturbation size")
        _print_table(table)
        print(
            f"first-order slope {loglog_slope(table['eps'], table['first_order_gap']):.3f}; "
            f"second-order slope {loglog_slope(table['eps'], table['second_order_gap']):.3f}"
        )
    return 0


def _cmd_quad(ctx: _Context) -> int:
    a = ctx.args
    seed = a.seed if a.seed is not None else 0
    problem = QuadraticProblem.random(a.dim, curvature=(a.curvature[0], a.curvature[1]), noise=a.noise, seed=seed)
    _, stats = simulate_sgd(problem, a.alpha, a.iters, burn_in=a.burn_in, seed=seed)
    ratio = ellipsoid_check(stats, problem.dim)
    curve = averaging_convergence(problem, a.alpha, a.iters, seed, burn_in=a.burn_in, replicas=a.replicas)
    curve["mahalanobis_ratio"] = ratio

    out = ctx.out_dir("quad")
    write_gnuplot("quad", write_csv(curve, out, "quad-convergence", "running-average error against k"))
    tail = curve[curve["k"] >= a.fit_from]
    slope = loglog_slope(tail["k"], tail["mean_err"]) if len(tail) >= 2 else float("nan")
    last = curve.iloc[-1]
    print(f"ellipsoid ratio {ratio:.4f} (1 for Gaussian iterates)")
    print(f"k={int(last['k'])}: average error {last['mean_err']:.4g}, raw iterate rms {last['raw_iterate_rms']:.4g}")
    print(f"error-vs-k log-log slope {slope:.3f}")
    return 0


def _cmd_gradcheck(ctx: _Context) -> int:
    seed = ctx.args.seed if ctx.args.seed is not None else 0
    results = check_all(seed)
    df = pd.DataFrame(
        [
            {
                "layers": "-".join(map(str, r.spec.layer_dims)),
                "activation": r.spec.activation,
                "batchnorm": "".join("1" if b else "0" for b in r.spec.batchnorm) or "-",
                "n_params": r.n_params,
                "max_rel_error": r.max_rel_error,
                "passed": r.passed,
            }
            for r in results
        ]
    )
    _print_table(df)
    failed = [r for r in results if not r.passed]
    if failed:
        raise NumericError(f"{len(failed)} of {len(results)} gradient checks failed")
    return 0


def _cmd_experiment(ctx: _Context) -> int:
    seeds = [ctx.args.seed] if ctx.args.seed is not None else None
    report = run_experiment(ctx.cfg, ctx.args.out, seeds=seeds, progress=ctx.progress)
    _print_table(pd.DataFrame([r.model_dump() for r in report.summary]))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="swa-lab",
        description="Stochastic weight averaging lab: training, landscape probes, ensembles and a quadratic sandbox.",
    )
    _add_global_args(parser)
    common = argparse.ArgumentParser(add_help=False)
    _add_global_args(common, suppress=True)

    sub = parser.add_subparsers(dest="cmd", required=True)

    p_train = sub.add_parser("train", parents=[common], help="Conventional SGD training with the pretrain schedule.")
    p_train.add_argument("--iters", type=int, default=None, help="Iterations (default: one budget).")
    p_train.add_argument("--init", type=str, default=None, help="Start from this checkpoint.")
    p_train.add_argument("--name", type=str, default="sgd", help="Checkpoint name (default: sgd).")

    p_swa = sub.add_parser("swa", parents=[common], help="SWA from a checkpoint (or a fresh pretrain).")
    p_swa.add_argument("--init", type=str, default=None, help="Pretrained checkpoint; pretrains when omitted.")
    p_swa.add_argument("--iters", type=int, default=None, help="SWA iterations (default: up to the largest budget).")
    p_swa.add_argument("--snapshots", action="store_true", help="Also write every captured model as a checkpoint.")

    p_eval = sub.add_parser("eval", parents=[common], help="Train/test metrics of checkpoints.")
    p_eval.add_argument("checkpoint", nargs="+")

    p_land = sub.add_parser("landscape", parents=[common], help="Loss-landscape probes.")
    land = p_land.add_subparsers(dest="kind", required=True)
    p_plane = land.add_parser("plane", parents=[common], help="Grid over the plane through three checkpoints.")
    p_plane.add_argument("checkpoints", nargs=3)
    p_plane.add_argument("--resolution", type=int, default=25)
    p_plane.add_argument("--pad", type=float, default=0.2)
    p_ray = land.add_parser("ray", parents=[common], help="Random rays around a checkpoint and the width metric.")
    p_ray.add_argument("checkpoint")
    p_ray.add_argument("--n-rays", type=int, default=10)
    p_ray.add_argument("--t-max", type=float, default=20.0)
    p_ray.add_argument("--n-ts", type=int, default=41)
    p_ray.add_argument("--delta", type=float, nargs="+", default=[0.1, 0.3, 1.0])
    p_seg = land.add_parser("segment", parents=[common], help="Profile along the line through two checkpoints.")
    p_seg.add_argument("start", help="Checkpoint at t=0, usually the SWA model.")
    p_seg.add_argument("end", help="Checkpoint at t=1, usually the SGD model.")
    p_seg.add_argument("--t-min", type=float, default=-0.5)
    p_seg.add_argument("--t-max", type=float, default=1.5)
    p_seg.add_argument("--points", type=int, default=41)

    p_ens = sub.add_parser("ensemble-compare", parents=[common], help="Snapshot ensemble against its weight average.")
    p_ens.add_argument("checkpoints", nargs="+")
    p_ens.add_argument("--scaling", action="store_true", help="Also run the perturbation-size scaling check.")
    p_ens.add_argument("--n-directions", type=int, default=5)
    p_ens.add_argument("--eps", type=float, nargs="+", default=[1e-1, 3e-2, 1e-2, 3e-3, 1e-3])

    p_quad = sub.add_parser("quad-sim", parents=[common], help="Constant-LR SGD on a noisy quadratic.")
    p_quad.add_argument("--dim", type=int, default=20)
    p_quad.add_argument("--alpha", type=float, default=0.5)
    p_quad.add_argument("--iters", type=int, default=12500)
    p_quad.add_argument("--burn-in", type=int, default=None, help="Default: 20%% of iters.")
    p_quad.add_argument("--noise", type=float, default=1.0)
    p_quad.add_argument("--curvature", type=float, nargs=2, default=[0.5, 2.0], metavar=("LO", "HI"))
    p_quad.add_argument("--replicas", type=int, default=1)
    p_quad.add_argument("--fit-from", type=int, default=100, help="Smallest k used for the slope fit.")

    sub.add_parser("gradcheck", parents=[common], help="Analytic vs finite-difference gradients on six architectures.")
    sub.add_parser("experiment", parents=[common], help="Run the configured multi-seed recipe.")

    return parser


COMMANDS = {
    "train": _cmd_train,
    "swa": _cmd_swa,
    "eval": _cmd_eval,
    "landscape": _cmd_landscape,
    "ensemble-compare": _cmd_ensemble,
    "quad-sim": _cmd_quad,
    "gradcheck": _cmd_gradcheck,
    "experiment": _cmd_experiment,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    settings = AppSettings.load(args.dotenv)
    configure_logging(settings.log_level, quiet=args.quiet)

    try:
        return COMMANDS[args.cmd](_Context(args, settings))
    except SwaLabError as exc:
        logger.error("Command failed | cmd=%s | error=%s", args.cmd, exc)
        return exc.exit_code
    except OSError as exc:
        logger.error("I/O failure | cmd=%s | error=%s", args.cmd, exc)
        return 4


if __name__ == "__main__":
    raise SystemExit(main())
