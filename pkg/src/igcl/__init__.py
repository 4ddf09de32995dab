"""Unsupervised multivariate time-series anomaly prediction with generated precursors."""

from .config import TrainConfig
from .series import SeriesFrame, load_series_csv

__version__ = "0.1.0"

__all__ = ["SeriesFrame", "TrainConfig", "load_series_csv", "__version__"]
