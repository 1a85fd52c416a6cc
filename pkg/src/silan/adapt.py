"""Source pretraining and source-free target adaptation."""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass, fields

import numpy as np

from .augment import build_key_batch
from .config import AdaptConfig
from .contrastive import silan_objective
from .data import LabeledDataset
from .neighborhood import FeatureBank, batch_neighborhood_stats, build_bank, knn_batch
from .nn import (MlpModel, MlpSpec, OptimizerState, backprop_from_logits, cross_entropy, forward,
                 init_model, run_layers, sgd_step)


@dataclass
class EpochMetrics:
    epoch: int
    mean_loss: float
    target_accuracy: float
    mean_noise_std: float
    pos_mislabel_rate: float
    neg_collision_rate: float


METRIC_FIELDS = [f.name for f in fields(EpochMetrics)]


def predict(model: MlpModel, X) -> np.ndarray:
    logits, _ = run_layers(model, X, 0, model.spec.n_layers)
    return np.argmax(logits, axis=1)


def evaluate(model: MlpModel, ds: LabeledDataset) -> float:
    """Fraction of samples whose argmax logit (lowest index on ties) equals the label."""
    if ds.dim != model.spec.input_dim:
        raise ValueError(f"model expects {model.spec.input_dim} inputs, dataset has {ds.dim}")
    if len(ds) == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    return float(np.mean(predict(model, ds.X) == ds.labels))


def pretrain_source(spec: MlpSpec, ds_s: LabeledDataset, epochs: int = 200, lr: float = 0.05,
                    momentum: float = 0.9, seed: int = 0, batch_size: int = 32) -> MlpModel:
    """Mini-batch momentum SGD on softmax cross-entropy."""
    if ds_s.dim != spec.input_dim:
        raise ValueError(f"spec expects {spec.input_dim} inputs, dataset has {ds_s.dim}")
    if spec.n_classes < ds_s.n_classes:
        raise ValueError("model has fewer logits than the dataset has classes")
    if epochs < 0 or batch_size < 1:
        raise ValueError("epochs must be >= 0 and batch_size >= 1")
    model = init_model(spec)
    state = OptimizerState(lr, momentum)
    rng = np.random.default_rng(seed)
    n = len(ds_s)
    for _ in range(epochs):
        order = rng.permutation(n)
        for start in range(0, n, batch_size):
            idx = order[start:start + batch_size]
            _, logits, cache = forward(model, ds_s.X[idx])
            _, d = cross_entropy(logits, ds_s.labels[idx])
            sgd_step(model, backprop_from_logits(model, cache, d), state)
    return model


def source_noise_std(model_s: MlpModel, ds_t: LabeledDataset, k_s: int, exclude_self: bool = True) -> float:
    """Mean over target samples of the mean per-dimension source-informed noise std."""
    bank_s = build_bank(model_s, ds_t, frozen=True)
    q = np.arange(len(ds_t))
    members = knn_batch(bank_s, bank_s.features, q if exclude_self else None, k_s)
    _, _, var = batch_neighborhood_stats(bank_s, ds_t, members)
    return float(np.sqrt(var).mean())


def _batches(order, batch_size):
    # a trailing batch with fewer than 2 queries has no negatives and is dropped
    for start in range(0, len(order), batch_size):
        idx = order[start:start + batch_size]
        if len(idx) >= 2:
            yield idx


def adapt_target(model_s: MlpModel, ds_t: LabeledDataset, cfg: AdaptConfig, on_epoch=None):
    """Latent-augmented InfoNCE adaptation of a copy of ``model_s`` to ``ds_t``.

    Target labels are read only to fill the reported metrics.  ``on_epoch``,
    when given, is called as ``on_epoch(epoch, model_t, bank_t, bank_s)``
    after every epoch.

    Returns ``(model_t, [EpochMetrics, ...])``.
    """
    if ds_t.dim != model_s.spec.input_dim:
        raise ValueError(f"source model expects {model_s.spec.input_dim} inputs, target has {ds_t.dim}")
    M = len(ds_t)
    limit = M - 1 if cfg.exclude_self else M
    if max(cfg.k_t, cfg.k_s) > limit:
        raise ValueError(f"k_t and k_s must not exceed {limit} for {M} target samples")

    model_t = model_s.copy()
    state = OptimizerState(cfg.learning_rate, cfg.momentum)
    bank_s = build_bank(model_s, ds_t, frozen=True)
    labels = ds_t.labels
    history = []

    for epoch in range(cfg.epochs):
        bank_t = build_bank(model_t, ds_t)
        order = np.random.default_rng([cfg.seed, epoch]).permutation(M)
        losses, noise_std = [], []
        pos_wrong = pos_total = neg_hits = neg_total = 0
        for step, idx in enumerate(_batches(order, cfg.batch_size)):
            if cfg.bank_refresh == "per_step" and step > 0:
                bank_t = build_bank(model_t, ds_t)
            rng = np.random.default_rng([cfg.seed, epoch, step])
            kb = build_key_batch(model_t, bank_t, bank_s, ds_t, idx, cfg, rng)
            loss, grads, _, k_logits = silan_objective(
                model_t, ds_t.X[idx], kb.base(cfg.centroid_space), kb.noise, cfg.tau, cfg.centroid_space,
                cfg.space, cfg.key_gradient, cfg.loss_reduction)
            sgd_step(model_t, grads, state)

            m = len(idx)
            losses.append(loss if cfg.loss_reduction == "mean" else loss / m)
            noise_std.extend(np.sqrt(kb.variance_s).mean(axis=1))
            key_pred = np.argmax(k_logits, axis=1)
            y = labels[idx]
            pos_wrong += int(np.sum(key_pred != y))
            pos_total += m
            same = key_pred[None, :] == y[:, None]
            neg_hits += int(same.sum() - np.trace(same))
            neg_total += m * (m - 1)

        history.append(EpochMetrics(
            epoch=epoch + 1,
            mean_loss=float(np.mean(losses)) if losses else 0.0,
            target_accuracy=evaluate(model_t, ds_t),
            mean_noise_std=float(np.mean(noise_std)) if noise_std else 0.0,
            pos_mislabel_rate=pos_wrong / pos_total if pos_total else 0.0,
            neg_collision_rate=neg_hits / neg_total if neg_total else 0.0,
        ))
        if on_epoch is not None:
            on_epoch(epoch + 1, model_t, bank_t, bank_s)
    return model_t, history


def write_metrics_csv(history, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(METRIC_FIELDS)
        for row in history:
            d = asdict(row)
            writer.writerow([d["epoch"]] + [repr(float(d[k])) for k in METRIC_FIELDS[1:]])


def read_metrics_csv(path) -> list[EpochMetrics]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return [EpochMetrics(int(r["epoch"]), *(float(r[k]) for k in METRIC_FIELDS[1:])) for r in rows]


__all__ = [
    "EpochMetrics", "adapt_target", "evaluate", "predict", "pretrain_source",
    "read_metrics_csv", "source_noise_std", "write_metrics_csv",
]
