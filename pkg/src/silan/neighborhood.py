"""Feature banks and cosine-similarity neighborhoods."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import LabeledDataset
from .nn import MlpModel, extract_features


@dataclass(frozen=True)
class FeatureBank:
    features: np.ndarray
    source_frozen: bool = False

    def __post_init__(self):
        f = np.array(self.features, dtype=np.float64)
        if f.ndim != 2:
            raise ValueError(f"bank must be a 2-D matrix, got shape {f.shape}")
        if not np.all(np.isfinite(f)):
            raise ValueError("bank contains non-finite features")
        f.setflags(write=False)
        object.__setattr__(self, "features", f)

    def __len__(self):
        return self.features.shape[0]


@dataclass
class Neighborhood:
    query_index: int | None
    member_indices: np.ndarray
    centroid_input: np.ndarray
    centroid_feature: np.ndarray
    variance: np.ndarray


def build_bank(model: MlpModel, ds: LabeledDataset, frozen: bool = False) -> FeatureBank:
    if ds.dim != model.spec.input_dim:
        raise ValueError(f"model expects {model.spec.input_dim} inputs, dataset has {ds.dim}")
    return FeatureBank(extract_features(model, ds.X), source_frozen=frozen)


def cosine_sim(u, v) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise ValueError("cosine similarity is undefined for a zero-norm vector")
    return float(np.clip(u @ v / (nu * nv), -1.0, 1.0))


def _row_norms(M):
    norms = np.linalg.norm(M, axis=1)
    bad = np.flatnonzero(norms == 0)
    if bad.size:
        raise ValueError(f"zero-norm feature rows at indices {bad[:10].tolist()}")
    return norms


def knn_batch(bank: FeatureBank, queries, query_indices=None, k: int = 1) -> np.ndarray:
    """Top-``k`` cosine neighbors for each row of ``queries``.

    Returns an ``(m, k)`` index array, most similar first, ties to the lower
    index.  ``query_indices[i]`` (when given and not negative) is excluded
    from row ``i``'s candidates.
    """
    B = bank.features
    Q = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    M = B.shape[0]
    exclude = query_indices is not None
    limit = M - 1 if exclude else M
    if not 1 <= k <= limit:
        raise ValueError(f"K must lie in [1, {limit}], got {k}")
    if Q.shape[1] != B.shape[1]:
        raise ValueError(f"query dimension {Q.shape[1]} does not match bank dimension {B.shape[1]}")

    sims = (Q @ B.T) / np.outer(_row_norms(Q), _row_norms(B))
    if exclude:
        idx = np.asarray(query_indices).reshape(-1)
        rows = np.flatnonzero(idx >= 0)
        sims[rows, idx[rows]] = -np.inf
    # stable sort on the negated similarity keeps lower indices first among ties
    return np.argsort(-sims, axis=1, kind="stable")[:, :k]


def knn(bank: FeatureBank, query_features, query_index: int | None = None, k: int = 1) -> np.ndarray:
    idx = None if query_index is None else [query_index]
    return knn_batch(bank, np.asarray(query_features)[None, :], idx, k)[0]


def neighborhood_stats(bank_for_members: FeatureBank, ds: LabeledDataset, member_indices):
    """Centroid of the raw inputs, centroid of the bank features, and the
    per-dimension population variance (1/K) of the bank features."""
    members = np.asarray(member_indices, dtype=np.int64)
    if members.size == 0:
        raise ValueError("neighborhood has no members")
    feats = bank_for_members.features[members]
    centroid_feature = feats.mean(axis=0)
    variance = ((feats - centroid_feature) ** 2).mean(axis=0)
    return ds.X[members].mean(axis=0), centroid_feature, variance


def batch_neighborhood_stats(bank: FeatureBank, ds: LabeledDataset, members: np.ndarray):
    """Vectorised :func:`neighborhood_stats` over an ``(m, K)`` member array."""
    feats = bank.features[members]
    centroid_feature = feats.mean(axis=1)
    variance = ((feats - centroid_feature[:, None, :]) ** 2).mean(axis=1)
    return ds.X[members].mean(axis=1), centroid_feature, variance


def find_neighborhood(bank: FeatureBank, ds: LabeledDataset, query_index: int, k: int,
                      exclude_self: bool = True) -> Neighborhood:
    members = knn(bank, bank.features[query_index], query_index if exclude_self else None, k)
    ci, cf, var = neighborhood_stats(bank, ds, members)
    return Neighborhood(query_index, members, ci, cf, var)
