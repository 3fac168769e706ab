"""Min-max normalization, piece-wise linear gold RUL labels and engine-level splits."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .cmapss_io import Trajectory
from .numerics import seeded_rng

DEFAULT_CAP = 130


@dataclass(frozen=True)
class NormalizationStats:
    per_feature_min: np.ndarray
    per_feature_max: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.per_feature_min, dtype=np.float64)
        hi = np.asarray(self.per_feature_max, dtype=np.float64)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("min and max must be 1-D vectors of equal length")
        if np.any(lo > hi):
            raise ValueError("per-feature min exceeds max")
        object.__setattr__(self, "per_feature_min", lo)
        object.__setattr__(self, "per_feature_max", hi)

    @property
    def dim(self) -> int:
        return self.per_feature_min.shape[0]

    def to_json(self) -> str:
        return json.dumps({"min": self.per_feature_min.tolist(),
                           "max": self.per_feature_max.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "NormalizationStats":
        doc = json.loads(text)
        return cls(np.array(doc["min"], dtype=np.float64), np.array(doc["max"], dtype=np.float64))

    def __eq__(self, other):
        if not isinstance(other, NormalizationStats):
            return NotImplemented
        return (np.array_equal(self.per_feature_min, other.per_feature_min)
                and np.array_equal(self.per_feature_max, other.per_feature_max))


@dataclass
class LabeledTrajectory:
    trajectory: Trajectory
    gold_rul: np.ndarray
    target: np.ndarray
    cap: int = DEFAULT_CAP

    @property
    def unit_id(self) -> int:
        return self.trajectory.unit_id

    @property
    def frames(self) -> np.ndarray:
        return self.trajectory.frames

    def __len__(self) -> int:
        return len(self.trajectory)


def fit_normalizer(trajectories: list[Trajectory]) -> NormalizationStats:
    """Per-feature min/max over every frame of every trajectory."""
    if not trajectories:
        raise ValueError("cannot fit normalization statistics on zero trajectories")
    stacked = np.vstack([t.frames for t in trajectories])
    return NormalizationStats(stacked.min(axis=0), stacked.max(axis=0))


def apply_normalizer(stats: NormalizationStats, trajectory: Trajectory) -> Trajectory:
    """Scale to [0, 1] with the fitted range; constant features become 0."""
    frames = trajectory.frames
    if frames.shape[1] != stats.dim:
        raise ValueError(f"unit {trajectory.unit_id}: {frames.shape[1]} features, stats have {stats.dim}")
    span = stats.per_feature_max - stats.per_feature_min
    safe = np.where(span > 0, span, 1.0)
    scaled = (frames - stats.per_feature_min) / safe
    scaled[:, span <= 0] = 0.0
    return Trajectory(trajectory.unit_id, scaled, trajectory.true_rul_at_end)


def gold_rul_train(length: int, cap: int = DEFAULT_CAP) -> np.ndarray:
    """Capped RUL for a run-to-failure trajectory; RUL is 0 at the last cycle."""
    if cap < 1:
        raise ValueError("cap must be >= 1")
    true_rul = np.arange(length - 1, -1, -1, dtype=np.int64)
    return np.minimum(true_rul, cap)


def gold_rul_test(rul_at_end: int, length: int, cap: int = DEFAULT_CAP) -> np.ndarray:
    if cap < 1:
        raise ValueError("cap must be >= 1")
    true_rul = rul_at_end + np.arange(length - 1, -1, -1, dtype=np.int64)
    return np.minimum(true_rul, cap)


def label(trajectory: Trajectory, cap: int = DEFAULT_CAP) -> LabeledTrajectory:
    """Attach gold RUL and normalized targets.

    Training runs (no ``true_rul_at_end``) end at failure; truncated test runs
    are extended linearly from their known end-of-record RUL.
    """
    if trajectory.true_rul_at_end is None:
        gold = gold_rul_train(len(trajectory), cap)
    else:
        gold = gold_rul_test(trajectory.true_rul_at_end, len(trajectory), cap)
    return LabeledTrajectory(trajectory, gold, gold / cap, cap)


def prepare(trajectories: list[Trajectory], stats: NormalizationStats,
            cap: int = DEFAULT_CAP) -> list[LabeledTrajectory]:
    return [label(apply_normalizer(stats, t), cap) for t in trajectories]


def split_by_engine(trajectories: list, train_fraction: float, seed: int) -> tuple[list, list]:
    """Shuffle whole engines by unit id and cut at round(fraction * N)."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must be in (0, 1)")
    if len(trajectories) < 2:
        raise ValueError("need at least 2 trajectories to split")
    ordered = sorted(trajectories, key=lambda t: t.unit_id)
    perm = seeded_rng(seed).permutation(len(ordered))
    n_train = int(math.floor(train_fraction * len(ordered) + 0.5))
    n_train = min(max(n_train, 1), len(ordered) - 1)
    train = [ordered[i] for i in sorted(perm[:n_train])]
    val = [ordered[i] for i in sorted(perm[n_train:])]
    return train, val
