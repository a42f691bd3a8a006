"""Movement classifier: dataset assembly, boosted trees, persistence."""

from .dataset import Dataset, Normalizer, apply_normalizer, assemble, fit_normalizer
from .gbdt import GbdtModel, GbdtParams, SoftmaxOutput, predict, train_gbdt
from .linear import LinearRegressor, train_linear_regressor
from .persist import load_model, save_model

__all__ = [
    "Dataset", "Normalizer", "assemble", "fit_normalizer", "apply_normalizer",
    "GbdtModel", "GbdtParams", "SoftmaxOutput", "train_gbdt", "predict",
    "LinearRegressor", "train_linear_regressor",
    "save_model", "load_model",
]
