"""PHM challenge score, RMSE and report assembly.

Residuals are ``predicted - gold`` in cycles, so positive means a late
prediction, which the score punishes harder (time constant 10 vs 13).
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .cmapss_io import Trajectory
from .network import Model
from .preprocess import (DEFAULT_CAP, LabeledTrajectory, NormalizationStats, apply_normalizer,
                         gold_rul_test)

# Published results, kept only as context for reports.
PAPER_TABLE3 = {
    "FD001": {"rmse": (13.26, 0.57), "score": (284.88, 42.32)},
    "FD002": {"rmse": (12.49, 0.28), "score": (571.4, 37.45)},
    "FD003": {"rmse": (13.11, 1.28), "score": (352.39, 179.96)},
    "FD004": {"rmse": (13.97, 0.48), "score": (1252.32, 104.97)},
}
PAPER_ABLATION = {
    "FD001": {"rmse": 14.31, "score": 337.86},
    "FD002": {"rmse": 17.44, "score": 1716.11},
    "FD003": {"rmse": 15.53, "score": 1356.36},
    "FD004": {"rmse": 18.86, "score": 2111.05},
}


def score_term(d):
    """Asymmetric exponential penalty; works on scalars and arrays."""
    d = np.asarray(d, dtype=np.float64)
    out = np.where(d < 0, np.expm1(-d / 13.0), np.expm1(d / 10.0))
    return float(out) if out.ndim == 0 else out


def denormalize_prediction(y_hat, cap: int = DEFAULT_CAP):
    out = np.clip(np.asarray(y_hat, dtype=np.float64), 0.0, 1.0) * cap
    return float(out) if out.ndim == 0 else out


def rmse(residuals) -> float:
    r = np.asarray(residuals, dtype=np.float64)
    return float(np.sqrt(np.mean(r * r))) if r.size else 0.0


def score(residuals) -> float:
    r = np.asarray(residuals, dtype=np.float64)
    return float(np.sum(score_term(r))) if r.size else 0.0


def per_trajectory_rmse(residuals: list[np.ndarray]) -> float:
    """sqrt of the mean over trajectories of each trajectory's mean squared residual."""
    if not residuals:
        return 0.0
    return float(np.sqrt(np.mean([np.mean(r * r) for r in residuals])))


@dataclass
class EvalReport:
    dataset: str
    rmse_last_cycle: float
    score_last_cycle: float
    rmse_per_cycle: float
    score_per_cycle: float
    residuals_last_cycle: list[float] = field(default_factory=list)
    residuals_per_cycle: list[list[float]] = field(default_factory=list)
    unit_ids: list[int] = field(default_factory=list)

    def metrics(self) -> dict[str, float]:
        return {
            "rmse_last_cycle": self.rmse_last_cycle,
            "score_last_cycle": self.score_last_cycle,
            "rmse_per_cycle": self.rmse_per_cycle,
            "score_per_cycle": self.score_per_cycle,
        }

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    def residuals_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["unit_id", "cycle", "residual"])
        for unit, res in zip(self.unit_ids, self.residuals_per_cycle):
            for cycle, d in enumerate(res, start=1):
                w.writerow([unit, cycle, repr(float(d))])
        return buf.getvalue()


def last_cycle_residuals(model: Model, test: list[Trajectory], test_rul: list[int],
                         stats: NormalizationStats, cap: int = DEFAULT_CAP,
                         cap_targets: bool = True) -> np.ndarray:
    if len(test) != len(test_rul):
        raise ValueError(f"{len(test_rul)} RUL values for {len(test)} test trajectories")
    out = np.empty(len(test))
    for j, (traj, true_rul) in enumerate(zip(test, test_rul)):
        y_hat = model.predict(apply_normalizer(stats, traj).frames)[-1]
        gold = min(true_rul, cap) if cap_targets else true_rul
        out[j] = denormalize_prediction(y_hat, cap) - gold
    return out


def evaluate_last_cycle(model: Model, test: list[Trajectory], test_rul: list[int],
                        stats: NormalizationStats, cap: int = DEFAULT_CAP,
                        cap_targets: bool = True) -> tuple[float, float]:
    """One residual per engine, taken at its last observed cycle -> (RMSE, score)."""
    d = last_cycle_residuals(model, test, test_rul, stats, cap, cap_targets)
    return rmse(d), score(d)


def per_cycle_residuals(model: Model, labeled: list[LabeledTrajectory],
                        cap: int = DEFAULT_CAP) -> list[np.ndarray]:
    return [denormalize_prediction(model.predict(lt.frames), cap) - lt.gold_rul for lt in labeled]


def evaluate_per_cycle(model: Model, labeled: list[LabeledTrajectory],
                       cap: int = DEFAULT_CAP) -> tuple[float, float]:
    """Score summed over all engines and cycles; RMSE averaged per trajectory first."""
    res = per_cycle_residuals(model, labeled, cap)
    total = sum(score(r) for r in res)
    return per_trajectory_rmse(res), float(total)


def evaluate(model: Model, dataset: str, test: list[Trajectory], test_rul: list[int],
             stats: NormalizationStats, cap: int = DEFAULT_CAP,
             cap_targets: bool = True) -> EvalReport:
    last = last_cycle_residuals(model, test, test_rul, stats, cap, cap_targets)
    labeled = []
    for traj, true_rul in zip(test, test_rul):
        norm = apply_normalizer(stats, traj)
        gold = gold_rul_test(true_rul, len(traj), cap if cap_targets else np.iinfo(np.int64).max)
        labeled.append(LabeledTrajectory(norm, gold, gold / cap, cap))
    per = per_cycle_residuals(model, labeled, cap)
    return EvalReport(
        dataset=dataset,
        rmse_last_cycle=rmse(last),
        score_last_cycle=score(last),
        rmse_per_cycle=per_trajectory_rmse(per),
        score_per_cycle=float(sum(score(r) for r in per)),
        residuals_last_cycle=last.tolist(),
        residuals_per_cycle=[r.tolist() for r in per],
        unit_ids=[t.unit_id for t in test],
    )


@dataclass
class Activations:
    inputs: np.ndarray              # (T, n) normalized inputs
    features: np.ndarray | None     # (T, last feature width), None when ablated
    hidden: np.ndarray              # (T, lstm cells)
    prediction: np.ndarray          # (T, 1) normalized

    def mean_abs_step(self, which: str) -> float:
        m = getattr(self, which)
        return float(np.mean(np.abs(np.diff(m, axis=0)))) if m is not None and len(m) > 1 else 0.0


def export_activations(model: Model, trajectory: Trajectory,
                       stats: NormalizationStats | None = None) -> Activations:
    """Per-cycle layer outputs; pass ``stats`` when the trajectory is still raw."""
    traj = apply_normalizer(stats, trajectory) if stats is not None else trajectory
    trace = model.trace(traj.frames)
    feats = trace.features.copy() if trace.features is not None else None
    return Activations(traj.frames.copy(), feats, trace.hidden.copy(), trace.output[:, None].copy())


def matrix_csv(matrix: np.ndarray, prefix: str) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["cycle"] + [f"{prefix}_{k}" for k in range(matrix.shape[1])])
    for t, row in enumerate(matrix, start=1):
        w.writerow([t] + [repr(float(v)) for v in row])
    return buf.getvalue()
