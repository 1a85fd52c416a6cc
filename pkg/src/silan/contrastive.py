"""Logit-space InfoNCE and its Jensen lower bound.

For queries ``q_i`` and keys ``k_j`` (rows of ``m x Z`` logit matrices) and
temperature ``tau`` the loss is::

    L = -sum_i [ q_i.k_i / tau - log sum_{j != i} exp(q_i.k_j / tau) ]

The positive pair is *not* part of the denominator.  The loss is summed over
the batch, not averaged.

``space`` picks what the rows are compared as:

* ``"logit"``: raw logits.  The loss is unbounded below (scaling the logits up
  keeps lowering it), so training on it diverges at practical step sizes.
* ``"cosine"``: logits scaled to unit length.
* ``"probability"``: softmax of the logits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn import MlpModel, backprop, run_layers, softmax

SPACES = ("logit", "cosine", "probability")


@dataclass
class ContrastiveBatch:
    query_logits: np.ndarray
    key_logits: np.ndarray
    tau: float
    space: str = "logit"

    def __post_init__(self):
        self.query_logits = np.asarray(self.query_logits, dtype=np.float64)
        self.key_logits = np.asarray(self.key_logits, dtype=np.float64)
        if self.query_logits.shape != self.key_logits.shape or self.query_logits.ndim != 2:
            raise ValueError(
                f"query/key logits must be equal-shape matrices, got "
                f"{self.query_logits.shape} and {self.key_logits.shape}"
            )
        if self.query_logits.shape[0] < 2:
            raise ValueError("InfoNCE needs a batch of at least m=2 (the denominator sums over j != i)")
        if not self.tau > 0:
            raise ValueError(f"temperature tau must be > 0, got {self.tau}")
        if self.space not in SPACES:
            raise ValueError(f"space must be one of {SPACES}, got {self.space!r}")

    @property
    def m(self) -> int:
        return self.query_logits.shape[0]


def _embed(A, space):
    """Map logit rows into the comparison space; returns (rows, backward)."""
    if space == "logit":
        return A, lambda dU: dU
    if space == "cosine":
        norms = _norms(A)
        U = A / norms
        return U, lambda dU: (dU - U * np.sum(U * dU, axis=1, keepdims=True)) / norms
    P = softmax(A)
    return P, lambda dP: P * (dP - np.sum(P * dP, axis=1, keepdims=True))


def infonce_loss(batch: ContrastiveBatch):
    """Returns ``(loss, dQuery, dKeys)``; gradients are w.r.t. the logits."""
    q, q_back = _embed(batch.query_logits, batch.space)
    k, k_back = _embed(batch.key_logits, batch.space)
    loss, dq, dk = _infonce(q, k, batch.tau)
    return loss, q_back(dq), k_back(dk)


def _infonce(q, k, tau):
    m = q.shape[0]
    S = (q @ k.T) / tau
    neg = S.copy()
    np.fill_diagonal(neg, -np.inf)
    row_max = neg.max(axis=1, keepdims=True)
    e = np.exp(neg - row_max)
    denom = e.sum(axis=1, keepdims=True)
    lse = np.log(denom[:, 0]) + row_max[:, 0]
    loss = float(np.sum(lse - np.diag(S)))

    # dL/dS: softmax over j != i, minus 1 on the diagonal
    P = e / denom
    P[np.arange(m), np.arange(m)] = -1.0
    dQ = P @ k / tau
    dK = P.T @ q / tau
    return loss, dQ, dK


def _norms(A):
    norms = np.linalg.norm(A, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise ValueError("cannot normalise a zero-norm logit row")
    return norms


def _unit_rows(A):
    return A / _norms(A)


def prop1_lower_bound(batch: ContrastiveBatch, normalize: bool = True) -> float:
    """Distance form of the Jensen bound on :func:`infonce_loss`.

    ``sum_i [log(m-1) + |q_i - k_i|^2 / 2tau - mean_{j != i} |q_i - k_j|^2 / 2tau]``.
    Equal to the dot-product form only for unit rows, hence ``normalize``.
    """
    q, k = batch.query_logits, batch.key_logits
    if normalize:
        q, k = _unit_rows(q), _unit_rows(k)
    m, tau = batch.m, batch.tau
    D = ((q[:, None, :] - k[None, :, :]) ** 2).sum(axis=2) / (2 * tau)
    pos = np.diag(D)
    neg_mean = (D.sum(axis=1) - pos) / (m - 1)
    return float(np.sum(np.log(m - 1) + pos - neg_mean))


def normalized_batch(batch: ContrastiveBatch) -> ContrastiveBatch:
    return ContrastiveBatch(_unit_rows(batch.query_logits), _unit_rows(batch.key_logits), batch.tau)


def silan_objective(model: MlpModel, X, base, noise, tau: float, centroid_space: str = "input",
                    space: str = "logit", key_gradient: str = "full", reduction: str = "sum"):
    """Latent-augmented InfoNCE on one mini-batch, with gradients.

    Query logits are ``F(G(X))``.  Key logits are ``F(h)`` with
    ``h = G(base) + noise`` when ``centroid_space == "input"`` (``base`` holds
    neighborhood centroids in input space) or ``h = base + noise`` when
    ``centroid_space == "feature"`` (``base`` holds feature-space centroids,
    treated as constants).  Gradients flow through both the query and the key
    branch unless ``key_gradient == "stop"``, in which case the keys are
    constants.  ``reduction == "mean"`` divides the batch sum by ``m``.

    Returns ``(loss, grads, query_logits, key_logits)``.
    """
    spec = model.spec
    fd, L = spec.feature_depth, spec.n_layers
    q_logits, q_cache = run_layers(model, X, 0, L)
    if centroid_space == "input":
        centre, g_cache = run_layers(model, base, 0, fd)
    elif centroid_space == "feature":
        centre, g_cache = np.asarray(base, dtype=np.float64), None
    else:
        raise ValueError(f"centroid_space must be 'input' or 'feature', got {centroid_space!r}")
    noise = np.asarray(noise, dtype=np.float64)
    if noise.shape != centre.shape:
        raise ValueError(f"noise shape {noise.shape} does not match features {centre.shape}")
    k_logits, f_cache = run_layers(model, centre + noise, fd, L)

    loss, dQ, dK = infonce_loss(ContrastiveBatch(q_logits, k_logits, tau, space))
    if reduction == "mean":
        m = q_logits.shape[0]
        loss, dQ, dK = loss / m, dQ / m, dK / m
    grads, _ = backprop(model, q_cache, dQ)
    if key_gradient == "full":
        grads, dH = backprop(model, f_cache, dK, grads)
        if g_cache is not None:
            backprop(model, g_cache, dH, grads)
    return loss, grads, q_logits, k_logits
