"""Source-informed latent augmentation.

A positive key for target query ``x`` is built from two neighborhoods of
``x``: one searched in the live target bank (its centroid is the base point)
and one searched in the frozen source bank (the per-dimension variance of
its source features sets the noise scale).  The key is
``h = G_t(centroid) + xi`` with ``xi ~ N(0, diag(variance_s))`` and its
logits are ``F_t(h)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import AdaptConfig
from .data import LabeledDataset
from .neighborhood import FeatureBank, batch_neighborhood_stats, knn_batch
from .nn import MlpModel, classify_features, extract_features


@dataclass
class PositiveKey:
    augmented_features: np.ndarray
    key_logits: np.ndarray
    noise_used: np.ndarray


@dataclass
class KeyBatch:
    """Everything needed to rebuild (and differentiate) a batch of keys."""

    query_indices: np.ndarray
    target_members: np.ndarray
    source_members: np.ndarray
    centroid_input: np.ndarray
    centroid_feature: np.ndarray
    variance_s: np.ndarray
    noise: np.ndarray
    augmented_features: np.ndarray
    key_logits: np.ndarray

    def keys(self) -> list[PositiveKey]:
        return [PositiveKey(h, z, xi) for h, z, xi in
                zip(self.augmented_features, self.key_logits, self.noise)]

    def base(self, centroid_space: str) -> np.ndarray:
        return self.centroid_input if centroid_space == "input" else self.centroid_feature


def sample_noise(variance, rng: np.random.Generator) -> np.ndarray:
    """Independent zero-mean Gaussian per coordinate with the given variances.

    Accepts a vector or a stack of vectors; one standard normal is drawn per
    entry, so a zero variance yields an exactly zero coordinate.
    """
    variance = np.asarray(variance, dtype=np.float64)
    if np.any(variance < 0) or not np.all(np.isfinite(variance)):
        raise ValueError("variance must be finite and non-negative")
    return rng.standard_normal(variance.shape) * np.sqrt(variance)


def make_positive_key(model_t: MlpModel, centroid_input, centroid_feature, variance_s,
                      centroid_space: str = "input", rng: np.random.Generator | None = None) -> PositiveKey:
    if rng is None:
        rng = np.random.default_rng()
    variance_s = np.asarray(variance_s, dtype=np.float64)
    if centroid_space == "input":
        base = extract_features(model_t, np.asarray(centroid_input, dtype=np.float64)[None, :])[0]
    elif centroid_space == "feature":
        base = np.asarray(centroid_feature, dtype=np.float64)
    else:
        raise ValueError(f"centroid_space must be 'input' or 'feature', got {centroid_space!r}")
    if variance_s.shape != base.shape:
        raise ValueError(f"variance has shape {variance_s.shape}, features have {base.shape}")
    xi = sample_noise(variance_s, rng)
    h = base + xi
    return PositiveKey(h, classify_features(model_t, h[None, :])[0], xi)


def source_neighbors(bank_s: FeatureBank, query_indices, k_s: int, exclude_self: bool = True):
    q = np.asarray(query_indices, dtype=np.int64)
    return knn_batch(bank_s, bank_s.features[q], q if exclude_self else None, k_s)


def build_key_batch(model_t: MlpModel, bank_t: FeatureBank, bank_s: FeatureBank, ds: LabeledDataset,
                    query_indices, cfg: AdaptConfig, rng: np.random.Generator) -> KeyBatch:
    """Vectorised construction of one positive key per query.

    Noise is drawn as a single ``(m, H)`` block from ``rng`` so that every
    batch slot gets an independent draw.
    """
    if not bank_s.source_frozen:
        raise ValueError("the source-informed bank must be built from the frozen source extractor")
    if len(bank_t) != len(ds) or len(bank_s) != len(ds):
        raise ValueError("banks must hold one row per target sample")
    q = np.asarray(query_indices, dtype=np.int64)
    exclude = q if cfg.exclude_self else None
    t_members = knn_batch(bank_t, bank_t.features[q], exclude, cfg.k_t)
    s_members = knn_batch(bank_s, bank_s.features[q], exclude, cfg.k_s)
    centroid_input, centroid_feature, _ = batch_neighborhood_stats(bank_t, ds, t_members)
    _, _, variance_s = batch_neighborhood_stats(bank_s, ds, s_members)

    if cfg.centroid_space == "input":
        base = extract_features(model_t, centroid_input)
    else:
        base = centroid_feature
    if variance_s.shape != base.shape:
        raise ValueError(
            f"source features have dimension {variance_s.shape[1]}, target features {base.shape[1]}"
        )
    noise = sample_noise(variance_s, rng)
    h = base + noise
    return KeyBatch(q, t_members, s_members, centroid_input, centroid_feature, variance_s,
                    noise, h, classify_features(model_t, h))


def batch_positive_keys(model_t: MlpModel, model_s: MlpModel, bank_t: FeatureBank, bank_s: FeatureBank,
                        ds: LabeledDataset, query_indices, cfg: AdaptConfig,
                        rng: np.random.Generator) -> list[PositiveKey]:
    if model_s.spec.input_dim != ds.dim:
        raise ValueError("source model does not match the target data dimension")
    return build_key_batch(model_t, bank_t, bank_s, ds, query_indices, cfg, rng).keys()
