"""Multi-seed experiment recipes.

Each seed writes into `<out>/seed_<s>/`; the top level gets `summary.csv`,
`report.json` and `resolved_config.yaml`. A failure inside a phase aborts the
run with a `PhaseError` and leaves everything written so far in place.
"""

from __future__ import annotations

import hashlib
import logging
import re
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Callable, Dict, Iterator, List, Optional, Sequence

import numpy as np
import pandas as pd
from tqdm import tqdm

from src.analysis.ensemble import SnapshotSet, gap_report
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
from src.errors import ConfigError, PhaseError
from src.model.batch import Dataset, SplitData
from src.model.network import evaluate, recompute_bn_stats
from src.model.spec import MlpSpec, MlpState, ParamVector, default_bn_stats, init_state
from src.schedules.lr import default_capture_every, iters_per_epoch
from src.sources.repository import make_dataset
from src.training.swa import fold_
from src.training.trainer import SwaRun, TrajectoryLog, pretrain, run_swa

from .artifacts import write_csv, write_gnuplot, write_json
from .checkpoint import save_checkpoint
from .config import ExperimentConfig, OutputsSection, dump_config
from .schemas import ArtifactRef, ExperimentReport, SeedResult, SummaryRow

logger = logging.getLogger(__name__)

METRIC_COLUMNS = ["method", "budget", "iters", "train_loss", "train_err", "test_loss", "test_err", "test_acc"]
SUMMARY_COLUMNS = ["method", "mean", "std", "n_seeds"]


@contextmanager
def phase(name: str, seed: Optional[int] = None) -> Iterator[None]:
    tag = name if seed is None else f"seed {seed}: {name}"
    try:
        yield
    except PhaseError:
        raise
    except Exception as exc:
        logger.error("Phase failed | phase=%s | error=%s", tag, exc)
        raise PhaseError(tag, exc) from exc


def config_hash(cfg: ExperimentConfig) -> str:
    return hashlib.sha256(cfg.model_dump_json().encode("utf-8")).hexdigest()[:16]


def check_model_fits(spec: MlpSpec, data: SplitData) -> None:
    if spec.input_dim != data.train.input_dim:
        raise ConfigError(
            f"model input size {spec.input_dim} != data features {data.train.input_dim}", key="model.layer_dims"
        )
    n_classes = int(max(data.train.labels.max(), data.test.labels.max())) + 1
    if spec.output_dim < n_classes:
        raise ConfigError(f"model output size {spec.output_dim} < {n_classes} classes", key="model.layer_dims")


def with_fresh_bn(spec: MlpSpec, params: ParamVector, train: Dataset, bn_batch_size: Optional[int] = None) -> MlpState:
    state = MlpState(spec, np.asarray(params, dtype=np.float64), default_bn_stats(spec))
    return recompute_bn_stats(state, train.batches(bn_batch_size))


def replay_average(log: TrajectoryLog, upto: int) -> Optional[ParamVector]:
    """The running average as it stood after iteration `upto`, rebuilt from the
    logged snapshots with the trainer's own update."""
    avg: Optional[ParamVector] = None
    count = 0
    for snap in log.snapshots:
        if snap.iteration > upto:
            break
        if avg is None:
            avg = snap.params.copy()
        else:
            fold_(avg, snap.params, count)
        count += 1
    return avg


def metric_row(method: str, state: MlpState, data: SplitData, budget: Optional[float] = None, iters: Optional[int] = None) -> Dict[str, Any]:
    tr = evaluate(state, data.train)
    te = evaluate(state, data.test)
    return {
        "method": method,
        "budget": budget,
        "iters": iters,
        "train_loss": tr.loss,
        "train_err": tr.error,
        "test_loss": te.loss,
        "test_err": te.error,
        "test_acc": te.accuracy,
    }


def _safe_name(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]", "_", name)


class _SeedContext:
    def __init__(self, cfg: ExperimentConfig, spec: MlpSpec, data: SplitData, seed: int, out_dir: Path, progress: bool) -> None:
        self.cfg = cfg
        self.spec = spec
        self.data = data
        self.seed = seed
        self.out_dir = out_dir
        self.progress = progress
        self.rows: List[Dict[str, Any]] = []
        self.artifacts: List[ArtifactRef] = []
        self.extras: Dict[str, float] = {}

    @property
    def budget(self) -> int:
        return self.cfg.trainer.budget

    def save(self, state: MlpState, name: str) -> None:
        p = save_checkpoint(state, self.out_dir / f"{name}.swac")
        self.artifacts.append(ArtifactRef(path=str(p), format="swac", description=f"{name} checkpoint"))

    def table(self, df: pd.DataFrame, name: str, description: str, plot: Optional[str] = None) -> None:
        ref = write_csv(df, self.out_dir, name, description)
        self.artifacts.append(ref)
        if plot:
            self.artifacts.append(write_gnuplot(plot, ref, title=f"{name} (seed {self.seed})"))

    def curve(self, run: SwaRun, name: str) -> None:
        if not run.curve.empty:
            self.table(run.curve, f"curve-{name}", f"{name} training curve", plot="curve")

    def pretrained(self) -> MlpState:
        with phase("pretrain", self.seed):
            frac = self.cfg.experiment.pretrain_fraction
            iters = int(round(frac * self.budget))
            sched = self.cfg.pretrain.schedule.build(self.budget)
            tcfg = self.cfg.trainer_config(sched, iters, self.seed, swa_enabled=False)
            model = pretrain(
                self.spec, self.data.train, tcfg,
                init=init_state(self.spec, self.seed), test=self.data.test, progress=self.progress,
            )
            self.save(model, "pretrained")
            self.rows.append(metric_row("pretrained", model, self.data, frac, iters))
        return model

    def result(self) -> SeedResult:
        metrics = pd.DataFrame(self.rows, columns=METRIC_COLUMNS)
        self.table(metrics, "metrics", "per-method train/test metrics")
        acc = {str(r["method"]): float(r["test_acc"]) for r in self.rows}
        return SeedResult(
            seed=self.seed,
            out_dir=str(self.out_dir),
            test_accuracy=acc,
            extras=self.extras,
            artifacts=self.artifacts,
        )


def _landscape(ctx: _SeedContext, sgd: MlpState, swa: MlpState, run: SwaRun) -> None:
    ls = ctx.cfg.experiment.landscape
    evaluator = ModelEvaluator(ctx.spec, ctx.data, bn_batch_size=ctx.cfg.trainer.bn_batch_size)
    ts = ray_offsets(ls.t_max, ls.n_ts)

    widths = []
    for name, model in (("sgd", sgd), ("swa", swa)):
        profiles = ray_profile(model.params, evaluator, ls.n_rays, ts, ctx.seed)
        frames = []
        for k, prof in enumerate(profiles):
            f = prof.to_frame()
            f.insert(0, "ray", k)
            frames.append(f)
        ctx.table(pd.concat(frames, ignore_index=True), f"landscape-rays-{name}", f"random-ray profiles around {name}", plot="ray")
        for delta in ls.deltas:
            est = width_metric(profiles, delta)
            widths.append({"model": name, "delta": delta, "width": est.value, "capped_rays": est.capped_rays})
            ctx.extras[f"width_{name}_{delta:g}"] = est.value
    ctx.table(pd.DataFrame(widths, columns=["model", "delta", "width", "capped_rays"]), "landscape-width", "width along random rays")

    seg_ts = np.linspace(ls.segment_range[0], ls.segment_range[1], ls.segment_points)
    seg = segment_profile(swa.params, sgd.params, evaluator, seg_ts)
    ctx.table(seg.to_frame(), "landscape-segment", "segment from SWA (t=0) to SGD (t=1)", plot="segment")
    t_loss, t_err = segment_minimizers(seg)
    ctx.extras["segment_t_train_min"] = t_loss
    ctx.extras["segment_t_test_min"] = t_err

    captures = run.log.captures()
    if ls.plane and len(captures) >= 3:
        anchors = [captures[0], captures[len(captures) // 2], captures[-1]]
        basis = plane_from_points(*(a.params for a in anchors))
        xs, ys = default_grid(basis, ls.grid_resolution, ls.grid_pad)
        surface = evaluate_grid(basis, evaluator, xs, ys, progress=ctx.progress)
        ctx.table(surface.to_frame(), "landscape-plane", "plane through three captured snapshots", plot="plane")
        traj = project_trajectory(basis, evaluator, [(s.iteration, s.params) for s in run.log.snapshots])
        ctx.table(traj, "landscape-trajectory", "captured snapshots projected onto the plane")
    elif ls.plane:
        logger.warning("Plane skipped | seed=%d | captures=%d | need=3", ctx.seed, len(captures))
    logger.info("Landscape done | seed=%d | evaluations=%d", ctx.seed, evaluator.n_evaluations)


def _ensemble(ctx: _SeedContext, run: SwaRun) -> None:
    captures = run.log.captures()[-ctx.cfg.experiment.ensemble.n_snapshots:]
    if len(captures) < 2:
        logger.warning("Ensemble skipped | seed=%d | captures=%d", ctx.seed, len(captures))
        return
    snaps = SnapshotSet.from_params(ctx.spec, [c.params for c in captures], bn_data=ctx.data.train)
    report = gap_report(snaps, ctx.data.test)
    ctx.table(report.to_frame(), "ensemble", "prediction gaps of the captured snapshots", plot="ensemble")
    ctx.extras["ens_vs_center"] = report.ens_vs_center
    ctx.extras["min_consecutive_gap"] = min(report.consecutive_gaps)
    if report.ensemble_error is not None:
        ctx.extras["ensemble_error"] = report.ensemble_error
        ctx.extras["center_error"] = float(report.center_error)


def run_budget_seed(ctx: _SeedContext) -> None:
    cfg = ctx.cfg
    B = ctx.budget
    frac = cfg.experiment.pretrain_fraction
    pretrained = ctx.pretrained() if cfg.swa.enabled else None

    with phase("sgd", ctx.seed):
        sched = cfg.pretrain.schedule.build(B)
        sgd_run = run_swa(
            init_state(ctx.spec, ctx.seed), ctx.data.train,
            cfg.trainer_config(sched, B, ctx.seed, swa_enabled=False),
            test=ctx.data.test, progress=ctx.progress,
        )
        sgd = sgd_run.final_sgd_model
        ctx.save(sgd, "sgd-full")
        ctx.curve(sgd_run, "sgd")
        ctx.rows.append(metric_row("sgd", sgd, ctx.data, 1.0, B))

    if not cfg.swa.enabled:
        return

    with phase("swa", ctx.seed):
        swa_iters = int(round((max(cfg.experiment.budgets) - frac) * B))
        run = run_swa(
            pretrained, ctx.data.train,
            cfg.trainer_config(cfg.swa.schedule.build(B), swa_iters, ctx.seed, log_snapshots=True),
            test=ctx.data.test, progress=ctx.progress,
        )
        ctx.curve(run, "swa")
        final: Optional[MlpState] = None
        for b in cfg.experiment.budgets:
            upto = int(round((b - frac) * B))
            avg = replay_average(run.log, upto)
            if avg is None:
                raise ConfigError(f"budget {b:g} ends before the first capture", key="experiment.budgets")
            final = with_fresh_bn(ctx.spec, avg, ctx.data.train, cfg.trainer.bn_batch_size)
            ctx.save(final, f"swa-{b:g}")
            ctx.rows.append(metric_row(f"swa-{b:g}", final, ctx.data, b, upto))

    if cfg.experiment.landscape.enabled:
        with phase("landscape", ctx.seed):
            _landscape(ctx, sgd, final, run)
    if cfg.experiment.ensemble.enabled:
        with phase("ensemble", ctx.seed):
            _ensemble(ctx, run)


def run_fixed_lr_seed(ctx: _SeedContext) -> None:
    """Constant-LR training from scratch with averaging over the second part of the run."""
    cfg = ctx.cfg
    B = ctx.budget
    with phase("fixed-lr", ctx.seed):
        sched = cfg.swa.schedule.build(B)
        ipe = iters_per_epoch(len(ctx.data.train), cfg.trainer.batch_size)
        every = cfg.swa.capture_every or default_capture_every(sched, ipe)
        start = int(cfg.experiment.swa_start_fraction * B) // every * every
        run = run_swa(
            init_state(ctx.spec, ctx.seed), ctx.data.train,
            cfg.trainer_config(sched, B, ctx.seed, swa_enabled=cfg.swa.enabled, swa_start=start, log_snapshots=True),
            test=ctx.data.test, progress=ctx.progress,
        )
        ctx.curve(run, "fixed-lr")
        ctx.save(run.final_sgd_model, "sgd-full")
        ctx.rows.append(metric_row("sgd-final", run.final_sgd_model, ctx.data, 1.0, B))
        if not cfg.swa.enabled:
            return
        ctx.save(run.swa_model, "swa")
        ctx.rows.append(metric_row("swa", run.swa_model, ctx.data, 1.0, B))

    with phase("iterates", ctx.seed):
        per_iterate = []
        for snap in run.log.snapshots:
            state = with_fresh_bn(ctx.spec, snap.params, ctx.data.train, cfg.trainer.bn_batch_size)
            row = metric_row("iterate", state, ctx.data, iters=snap.iteration)
            per_iterate.append(row)
        iterates = pd.DataFrame(per_iterate, columns=METRIC_COLUMNS).drop(columns=["method", "budget"])
        iterates = iterates.rename(columns={"iters": "iteration"})
        ctx.table(iterates, "iterates", "metrics of every averaged iterate")
        means = iterates.drop(columns=["iteration"]).mean()
        ctx.rows.append({"method": "iterate-mean", "budget": 1.0, "iters": B, **{k: float(v) for k, v in means.items()}})


def run_lr_sweep_seed(ctx: _SeedContext) -> None:
    cfg = ctx.cfg
    B = ctx.budget
    frac = cfg.experiment.pretrain_fraction
    pretrained = ctx.pretrained()
    iters = int(round((max(cfg.experiment.budgets) - frac) * B))
    eval_every = cfg.trainer.eval_every or max(1, iters // 20)
    for name, sched_cfg in cfg.experiment.sweep.items():
        with phase(f"sweep:{name}", ctx.seed):
            run = run_swa(
                pretrained, ctx.data.train,
                cfg.trainer_config(sched_cfg.build(B), iters, ctx.seed, eval_every=eval_every),
                test=ctx.data.test, progress=ctx.progress,
            )
            safe = _safe_name(name)
            ctx.curve(run, safe)
            ctx.save(run.swa_model, f"swa-{safe}")
            ctx.rows.append(metric_row(f"swa-{name}", run.swa_model, ctx.data, max(cfg.experiment.budgets), iters))


RECIPES: Dict[str, Callable[[_SeedContext], None]] = {
    "budget": run_budget_seed,
    "fixed-lr": run_fixed_lr_seed,
    "lr-sweep": run_lr_sweep_seed,
}


def summary_rows(results: Sequence[SeedResult]) -> List[SummaryRow]:
    """Mean and sample std (ddof=1) of test accuracy per method over seeds."""
    methods: List[str] = []
    for r in results:
        methods.extend(m for m in r.test_accuracy if m not in methods)
    rows = []
    for m in methods:
        vals = np.array([r.test_accuracy[m] for r in results if m in r.test_accuracy])
        rows.append(
            SummaryRow(
                method=m,
                mean=float(vals.mean()),
                std=float(vals.std(ddof=1)) if vals.size > 1 else None,
                n_seeds=int(vals.size),
            )
        )
    return rows


def run_experiment(
    cfg: ExperimentConfig,
    out_dir: Optional[str | Path] = None,
    *,
    seeds: Optional[Sequence[int]] = None,
    progress: bool = False,
) -> ExperimentReport:
    out = Path(out_dir or cfg.outputs.dir)
    seeds = list(seeds) if seeds is not None else list(cfg.experiment.seeds)
    resolved = cfg.model_copy(
        update={
            "experiment": cfg.experiment.model_copy(update={"seeds": seeds}),
            "outputs": OutputsSection(dir=str(out)),
        }
    )
    out.mkdir(parents=True, exist_ok=True)
    top: List[ArtifactRef] = [
        ArtifactRef(path=str(dump_config(resolved, out / "resolved_config.yaml")), format="yaml")
    ]

    with phase("data"):
        spec = cfg.model.to_spec()
        data = make_dataset(cfg.data)
        check_model_fits(spec, data)

    recipe = RECIPES[cfg.experiment.recipe]
    logger.info(
        "Experiment started | name=%s | recipe=%s | seeds=%s | budget=%d | out=%s",
        cfg.experiment.name, cfg.experiment.recipe, seeds, cfg.trainer.budget, out,
    )
    results: List[SeedResult] = []
    for seed in tqdm(seeds, desc="seeds", disable=not progress):
        ctx = _SeedContext(resolved, spec, data, seed, out / f"seed_{seed}", progress)
        ctx.out_dir.mkdir(parents=True, exist_ok=True)
        recipe(ctx)
        results.append(ctx.result())
        logger.info("Seed finished | seed=%d | accuracy=%s", seed, {k: round(v, 4) for k, v in results[-1].test_accuracy.items()})

    rows = summary_rows(results)
    summary = pd.DataFrame([r.model_dump() for r in rows], columns=SUMMARY_COLUMNS)
    top.append(write_csv(summary, out, "summary", "test accuracy per method, mean and sample std over seeds"))
    report = ExperimentReport(
        name=cfg.experiment.name,
        recipe=cfg.experiment.recipe,
        config_hash=config_hash(resolved),
        budget_iters=cfg.trainer.budget,
        seeds=seeds,
        results=results,
        summary=rows,
        artifacts=top,
    )
    report.artifacts.append(write_json(report, out / "report.json"))
    logger.info("Experiment finished | out=%s | methods=%d", out, len(summary))
    return report
