"""End-to-end MLP-LSTM-MLP remaining-useful-life estimation on C-MAPSS trajectories."""

from .cmapss_io import DatasetBundle, Trajectory, generate_synthetic, load_dataset
from .network import Model, ModelArchitecture, forward, init_params
from .preprocess import NormalizationStats, fit_normalizer, prepare
from .training import TrainConfig, multi_run, train_one

__all__ = [
    "DatasetBundle", "Trajectory", "generate_synthetic", "load_dataset",
    "Model", "ModelArchitecture", "forward", "init_params",
    "NormalizationStats", "fit_normalizer", "prepare",
    "TrainConfig", "multi_run", "train_one",
]
