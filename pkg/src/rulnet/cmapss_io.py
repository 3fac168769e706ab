"""C-MAPSS text parsing and a synthetic run-to-failure generator."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .numerics import seeded_rng

N_FEATURES = 24
N_FIELDS = N_FEATURES + 2
DATASET_NAMES = ("FD001", "FD002", "FD003", "FD004", "SYNTH")


class CMAPSSFormatError(ValueError):
    pass


@dataclass(frozen=True)
class RawRecord:
    unit_id: int
    cycle: int
    features: tuple[float, ...]

    def __post_init__(self):
        if len(self.features) != N_FEATURES:
            raise ValueError(f"expected {N_FEATURES} features, got {len(self.features)}")


@dataclass
class Trajectory:
    """One engine run.  ``frames`` is a (T, 24) float64 array, one row per cycle."""

    unit_id: int
    frames: np.ndarray
    true_rul_at_end: int | None = None

    def __post_init__(self):
        self.frames = np.ascontiguousarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 2 or self.frames.shape[0] == 0:
            raise ValueError(f"unit {self.unit_id}: frames must be a non-empty 2-D array")

    def __len__(self) -> int:
        return self.frames.shape[0]

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (self.unit_id == other.unit_id
                and self.true_rul_at_end == other.true_rul_at_end
                and self.frames.shape == other.frames.shape
                and np.array_equal(self.frames, other.frames))


@dataclass
class DatasetBundle:
    name: str
    train: list[Trajectory]
    test: list[Trajectory]
    test_rul: list[int]
    # hidden health index per trajectory, only filled by the synthetic generator
    health: dict[str, list[np.ndarray]] = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in DATASET_NAMES:
            raise ValueError(f"unknown dataset name {self.name!r}")
        if len(self.test_rul) != len(self.test):
            raise ValueError(f"{len(self.test_rul)} RUL values for {len(self.test)} test trajectories")


def parse_trajectory_file(text: str) -> list[Trajectory]:
    """Parse a train_*/test_* file into trajectories sorted by unit id.

    Each non-empty line holds unit, cycle, 3 settings and 21 sensors.  The 24
    non-index columns become the frame features in file order.
    """
    rows: dict[int, dict[int, list[float]]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        tokens = line.split()
        if not tokens:
            continue
        if len(tokens) != N_FIELDS:
            raise CMAPSSFormatError(f"line {lineno}: expected {N_FIELDS} fields, got {len(tokens)}")
        try:
            values = [float(tok) for tok in tokens]
        except ValueError as exc:
            raise CMAPSSFormatError(f"line {lineno}: non-numeric token ({exc})") from None
        unit, cycle = values[0], values[1]
        if unit != int(unit) or cycle != int(cycle) or unit < 1 or cycle < 1:
            raise CMAPSSFormatError(f"line {lineno}: unit and cycle must be positive integers")
        unit, cycle = int(unit), int(cycle)
        per_unit = rows.setdefault(unit, {})
        if cycle in per_unit:
            raise CMAPSSFormatError(f"line {lineno}: duplicate (unit {unit}, cycle {cycle})")
        if cycle != len(per_unit) + 1:
            raise CMAPSSFormatError(
                f"line {lineno}: unit {unit} cycle {cycle} is not consecutive "
                f"(expected {len(per_unit) + 1})")
        per_unit[cycle] = values[2:]

    return [
        Trajectory(unit, np.array([rows[unit][c] for c in sorted(rows[unit])]))
        for unit in sorted(rows)
    ]


def parse_rul_file(text: str) -> list[int]:
    out = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        token = line.strip()
        if not token:
            continue
        try:
            value = int(token)
        except ValueError:
            raise CMAPSSFormatError(f"line {lineno}: {token!r} is not an integer") from None
        if value < 0:
            raise CMAPSSFormatError(f"line {lineno}: negative RUL {value}")
        out.append(value)
    return out


def format_trajectory_file(trajectories: list[Trajectory]) -> str:
    """Serialize to the C-MAPSS text layout (repr floats, so parsing round-trips)."""
    lines = []
    for traj in trajectories:
        for cycle, frame in enumerate(traj.frames, start=1):
            lines.append(" ".join([str(traj.unit_id), str(cycle)] + [repr(float(v)) for v in frame]))
    return "\n".join(lines) + ("\n" if lines else "")


def dataset_paths(data_root: str | Path, dataset_id: str) -> dict[str, Path]:
    root = Path(data_root)
    return {kind: root / f"{kind}_{dataset_id}.txt" for kind in ("train", "test", "RUL")}


def load_dataset(data_root: str | Path, dataset_id: str) -> DatasetBundle:
    paths = dataset_paths(data_root, dataset_id)
    for path in paths.values():
        if not path.is_file():
            raise FileNotFoundError(f"missing C-MAPSS file: {path}")
    train = parse_trajectory_file(paths["train"].read_text(encoding="utf-8"))
    test = parse_trajectory_file(paths["test"].read_text(encoding="utf-8"))
    rul = parse_rul_file(paths["RUL"].read_text(encoding="utf-8"))
    if len(rul) != len(test):
        raise CMAPSSFormatError(f"{paths['RUL']}: {len(rul)} values for {len(test)} test units")
    for traj, r in zip(test, rul):
        traj.true_rul_at_end = r
    return DatasetBundle(dataset_id, train, test, rul)


def length_summary(trajectories: list[Trajectory]) -> dict[str, float]:
    lengths = [len(t) for t in trajectories]
    return {
        "count": len(lengths),
        "min": min(lengths) if lengths else 0,
        "mean": float(np.mean(lengths)) if lengths else 0.0,
        "max": max(lengths) if lengths else 0,
    }


# --- synthetic data -------------------------------------------------------

_SYNTH_HORIZON = 150.0   # RUL at which degradation starts to show
_N_SETTINGS = 3
_CONSTANT_SENSORS = (0, 9)   # sensor slots held fixed, like the flat channels in the real files


def _health_index(rul: np.ndarray, onset: float, shape: float) -> np.ndarray:
    """Monotone hidden degradation in [0, 1]: 0 while healthy, 1 at failure."""
    return np.clip(1.0 - rul / onset, 0.0, 1.0) ** shape


def generate_synthetic(num_train: int, num_test: int, min_len: int, max_len: int,
                       num_conditions: int, seed: int) -> DatasetBundle:
    """Deterministic C-MAPSS-like bundle.

    Each frame is a hidden health index pushed through an affine map chosen by
    the cycle's operating condition, plus bounded uniform noise.  Test runs are
    full runs truncated at a uniformly random cycle, and ``test_rul`` holds the
    cycles cut off.
    """
    if not 0 < min_len <= max_len:
        raise ValueError("need 0 < min_len <= max_len")
    if num_conditions < 1:
        raise ValueError("num_conditions must be >= 1")
    if num_train < 0 or num_test < 0:
        raise ValueError("trajectory counts must be nonnegative")

    rng = seeded_rng(seed)
    n_sensors = N_FEATURES - _N_SETTINGS
    settings = rng.uniform(0.0, 1.0, size=(num_conditions, _N_SETTINGS)) * [40.0, 0.8, 100.0]
    offsets = rng.uniform(-1.0, 1.0, size=(num_conditions, n_sensors)) * 50.0 + 500.0
    scales = rng.uniform(0.8, 1.2, size=(num_conditions, n_sensors))
    gains = rng.uniform(2.0, 8.0, size=n_sensors) * rng.choice([-1.0, 1.0], size=n_sensors)
    gains[list(_CONSTANT_SENSORS)] = 0.0
    noise_amp = 0.05

    def run(unit_id: int, length: int) -> tuple[np.ndarray, np.ndarray]:
        rul = np.arange(length - 1, -1, -1, dtype=np.float64)
        onset = _SYNTH_HORIZON * rng.uniform(0.98, 1.02)
        health = _health_index(rul, onset, rng.uniform(1.0, 1.1))
        cond = rng.integers(0, num_conditions, size=length)
        sensors = offsets[cond] + scales[cond] * (health[:, None] * gains)
        sensors += rng.uniform(-noise_amp, noise_amp, size=sensors.shape)
        sensors[:, list(_CONSTANT_SENSORS)] = offsets[0, list(_CONSTANT_SENSORS)]
        sett = settings[cond] + rng.uniform(-1e-3, 1e-3, size=(length, _N_SETTINGS))
        return np.hstack([sett, sensors]), health

    train, train_health = [], []
    for unit in range(1, num_train + 1):
        frames, health = run(unit, int(rng.integers(min_len, max_len + 1)))
        train.append(Trajectory(unit, frames))
        train_health.append(health)

    test, test_rul, test_health = [], [], []
    for unit in range(1, num_test + 1):
        full_len = int(rng.integers(min_len, max_len + 1))
        frames, health = run(unit, full_len)
        keep = int(rng.integers(1, full_len + 1))
        rul_end = full_len - keep
        test.append(Trajectory(unit, frames[:keep], true_rul_at_end=rul_end))
        test_rul.append(rul_end)
        test_health.append(health[:keep])

    return DatasetBundle("SYNTH", train, test, test_rul,
                         health={"train": train_health, "test": test_health})
