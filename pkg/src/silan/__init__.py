"""Source-informed latent augmentation for source-free domain adaptation on toy data."""

from .adapt import EpochMetrics, adapt_target, evaluate, pretrain_source
from .config import AdaptConfig, RunConfig
from .data import LabeledDataset, gen_moons, make_shift_pair
from .nn import MlpModel, MlpSpec, init_model, load_model, save_model

__version__ = "0.1.0"

__all__ = [
    "AdaptConfig", "EpochMetrics", "LabeledDataset", "MlpModel", "MlpSpec", "RunConfig",
    "adapt_target", "evaluate", "gen_moons", "init_model", "load_model", "make_shift_pair",
    "pretrain_source", "save_model",
]
