"""Whole-sequence mini-batch training with validation early stopping, and multi-seed runs."""

from __future__ import annotations

import copy
import csv
import io
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .cmapss_io import DatasetBundle
from .evaluation import EvalReport, evaluate, evaluate_per_cycle
from .network import Model, ModelArchitecture, backward_from_output, forward, init_params
from .numerics import AdamState, Params, adam_step, check_finite, seeded_rng
from .preprocess import DEFAULT_CAP, LabeledTrajectory, fit_normalizer, prepare, split_by_engine

log = logging.getLogger(__name__)


class TrainingDiverged(FloatingPointError):
    def __init__(self, epoch: int, batch: int, detail: str = ""):
        super().__init__(f"non-finite loss at epoch {epoch}, batch {batch}{': ' + detail if detail else ''}")
        self.epoch = epoch
        self.batch = batch


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    batch_size: int = 5
    cap: int = DEFAULT_CAP
    train_fraction: float = 0.75
    max_epochs: int = 200
    patience: int = 20
    grad_clip: float | None = None
    seed: int = 0
    arch: ModelArchitecture = field(default_factory=ModelArchitecture)

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must be in (0, 1)")
        if self.max_epochs < 1 or self.patience < 0:
            raise ValueError("max_epochs must be >= 1 and patience >= 0")
        if self.grad_clip is not None and self.grad_clip <= 0:
            raise ValueError("grad_clip must be positive")
        if self.cap < 1:
            raise ValueError("cap must be >= 1")


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_rmse: list[float] = field(default_factory=list)
    val_score: list[float] = field(default_factory=list)
    best_epoch: int = 0   # 1-based; 0 until the first epoch finishes

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epoch", "train_loss", "val_rmse", "val_score"])
        for k, row in enumerate(zip(self.train_loss, self.val_rmse, self.val_score), start=1):
            w.writerow([k] + [repr(float(v)) for v in row])
        return buf.getvalue()


def sequence_loss(predictions, targets) -> float:
    """RMSE over the cycles of one sequence (normalized units)."""
    p = np.asarray(predictions, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if p.shape != y.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {y.shape}")
    if p.size == 0:
        raise ValueError("empty sequence")
    return float(np.sqrt(np.mean((p - y) ** 2)))


def batch_loss(predictions: list, targets: list) -> float:
    """sqrt of the mean over sequences of per-sequence MSE."""
    return math.sqrt(sum(sequence_loss(p, y) ** 2 for p, y in zip(predictions, targets)) / len(predictions))


def batch_gradient(params: Params, arch: ModelArchitecture, batch: list[LabeledTrajectory],
                   dropout_rng: np.random.Generator | None = None) -> tuple[float, Params]:
    """Batch loss and its gradient, accumulated sequentially over the batch."""
    traces = [forward(params, arch, lt.frames, dropout_rng) for lt in batch]
    loss = batch_loss([tr.output for tr in traces], [lt.target for lt in batch])
    grads = {name: np.zeros_like(p) for name, p in params.items()}
    if not math.isfinite(loss) or loss == 0.0:
        return loss, grads
    scale = 1.0 / (len(batch) * loss)
    for tr, lt in zip(traces, batch):
        g = backward_from_output(params, arch, tr, (tr.output - lt.target) * (scale / len(lt)))
        for name in grads:
            grads[name] += g[name]
    return loss, grads


def clip_by_global_norm(grads: Params, max_norm: float) -> Params:
    norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if norm > max_norm:
        factor = max_norm / norm
        return {k: g * factor for k, g in grads.items()}
    return grads


def dataset_rmse(model: Model, labeled: list[LabeledTrajectory]) -> float:
    """Normalized per-trajectory-averaged RMSE against the [0, 1] targets."""
    mses = [np.mean((model.predict(lt.frames) - lt.target) ** 2) for lt in labeled]
    return float(np.sqrt(np.mean(mses)))


def train_one(config: TrainConfig, train_set: list[LabeledTrajectory],
              val_set: list[LabeledTrajectory]) -> tuple[Params, TrainHistory]:
    """Train from scratch; return the parameters of the best validation epoch."""
    if not train_set or not val_set:
        raise ValueError("train and validation sets must be non-empty")
    arch = config.arch
    params = init_params(arch, seeded_rng(config.seed))
    shuffle_rng = seeded_rng([config.seed, 1])
    dropout_rng = seeded_rng([config.seed, 2]) if arch.dropout > 0 else None
    state = AdamState.for_params(params)
    history = TrainHistory()
    best_rmse = math.inf
    best_params = copy.deepcopy(params)
    stale = 0

    for epoch in range(1, config.max_epochs + 1):
        order = shuffle_rng.permutation(len(train_set))
        losses = []
        for b, start in enumerate(range(0, len(order), config.batch_size), start=1):
            batch = [train_set[i] for i in order[start:start + config.batch_size]]
            try:
                loss, grads = batch_gradient(params, arch, batch, dropout_rng)
            except FloatingPointError as exc:
                raise TrainingDiverged(epoch, b, str(exc)) from exc
            if not math.isfinite(loss):
                raise TrainingDiverged(epoch, b)
            if config.grad_clip is not None:
                grads = clip_by_global_norm(grads, config.grad_clip)
            try:
                adam_step(params, grads, state, config.learning_rate)
                for name, p in params.items():
                    check_finite(f"parameter {name}", p)
            except FloatingPointError as exc:
                raise TrainingDiverged(epoch, b, str(exc)) from exc
            losses.append(loss)

        model = Model(arch, params)
        val_rmse, val_score = evaluate_per_cycle(model, val_set, config.cap)
        history.train_loss.append(float(np.mean(losses)))
        history.val_rmse.append(val_rmse)
        history.val_score.append(val_score)
        if val_rmse < best_rmse:
            best_rmse = val_rmse
            best_params = copy.deepcopy(params)
            history.best_epoch = epoch
            stale = 0
        else:
            stale += 1
        log.debug("epoch %d train %.5f val_rmse %.3f", epoch, history.train_loss[-1], val_rmse)
        if stale >= config.patience:
            break

    return best_params, history


@dataclass
class RunResult:
    seed: int
    report: EvalReport
    history: TrainHistory
    params: Params


@dataclass
class MultiRunResult:
    dataset: str
    ablated: bool
    runs: list[RunResult]
    summary: dict[str, tuple[float, float]]   # metric -> (mean, sample std)


def mean_std(values) -> tuple[float, float]:
    """Mean and sample (n-1) standard deviation; std is 0 for a single value."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        raise ValueError("no values")
    return float(v.mean()), float(v.std(ddof=1)) if v.size > 1 else 0.0


def prepare_splits(config: TrainConfig, bundle: DatasetBundle):
    """Normalize with stats over every training engine, label, split by engine."""
    stats = fit_normalizer(bundle.train)
    labeled = prepare(bundle.train, stats, config.cap)
    train_set, val_set = split_by_engine(labeled, config.train_fraction, config.seed)
    return stats, train_set, val_set


def run_seed(config: TrainConfig, bundle: DatasetBundle, seed: int) -> RunResult:
    config = replace(config, seed=seed)
    stats, train_set, val_set = prepare_splits(config, bundle)
    params, history = train_one(config, train_set, val_set)
    report = evaluate(Model(config.arch, params), bundle.name, bundle.test, bundle.test_rul,
                      stats, config.cap)
    return RunResult(seed, report, history, params)


class SeedFailed(RuntimeError):
    def __init__(self, seed: int, cause: BaseException):
        super().__init__(f"run with seed {seed} failed: {cause}")
        self.seed = seed


def _run_seed_safe(args):
    config, bundle, seed = args
    try:
        return run_seed(config, bundle, seed)
    except Exception as exc:
        raise SeedFailed(seed, exc) from exc


def multi_run(config: TrainConfig, bundle: DatasetBundle, seeds: list[int],
              jobs: int = 1) -> MultiRunResult:
    """One independent training run per seed, evaluated on the bundle's test set."""
    if not seeds:
        raise ValueError("at least one seed is required")
    tasks = [(config, bundle, s) for s in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            runs = list(pool.map(_run_seed_safe, tasks))
    else:
        runs = [_run_seed_safe(t) for t in tasks]
    summary = {
        key: mean_std([r.report.metrics()[key] for r in runs])
        for key in runs[0].report.metrics()
    }
    return MultiRunResult(bundle.name, config.arch.ablate_feature_mlp, runs, summary)
