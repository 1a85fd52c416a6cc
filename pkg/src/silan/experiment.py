"""End-to-end toy runs: generate the shifted pair, pretrain, adapt, score."""

from __future__ import annotations

from dataclasses import dataclass, replace

from .adapt import EpochMetrics, adapt_target, evaluate, pretrain_source
from .config import RunConfig
from .data import LabeledDataset, make_shift_pair
from .nn import MlpModel


@dataclass
class ToyResult:
    source_accuracy: float
    source_only_accuracy: float
    adapted_accuracy: float
    model_s: MlpModel
    model_t: MlpModel
    history: list[EpochMetrics]

    @property
    def gain(self) -> float:
        return self.adapted_accuracy - self.source_only_accuracy


def seeded(cfg: RunConfig, seed: int) -> RunConfig:
    """Replica ``seed`` of ``cfg``: data seeds ``2s+1``/``2s+2``, network and adaptation seed ``s``."""
    return replace(cfg, seed=seed, seed_s=2 * seed + 1, seed_t=2 * seed + 2, adapt=replace(cfg.adapt, seed=seed))


def make_domains(cfg: RunConfig) -> tuple[LabeledDataset, LabeledDataset]:
    return make_shift_pair(cfg.n, cfg.noise_std, cfg.rotation_deg, cfg.seed_s, cfg.seed_t)


def pretrain(cfg: RunConfig, ds_s: LabeledDataset) -> MlpModel:
    return pretrain_source(cfg.mlp_spec(), ds_s, cfg.pretrain_epochs, cfg.pretrain_lr, cfg.pretrain_momentum,
                           cfg.seed, cfg.pretrain_batch_size)


def run_toy(cfg: RunConfig) -> ToyResult:
    ds_s, ds_t = make_domains(cfg)
    model_s = pretrain(cfg, ds_s)
    model_t, history = adapt_target(model_s, ds_t, cfg.adapt)
    return ToyResult(evaluate(model_s, ds_s), evaluate(model_s, ds_t), evaluate(model_t, ds_t),
                     model_s, model_t, history)
