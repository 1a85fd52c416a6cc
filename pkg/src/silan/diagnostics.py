"""Measurable versions of the theoretical quantities behind the method.

* transformation-to-noise ratio of a 2-D Gaussian profile seen through a
  circular aperture of radius ``R``, and its maximiser;
* the stationarity equation ``e^u = 2u + 1`` whose root gives the optimal
  radius ``sqrt(2 u*) * sigma ~= 1.5852 sigma`` in the noise-dominated regime;
* logit-group overlap and transformation mislabel rates on labelled toy data;
* the latent-gap to logit-gap bound through the smallest singular value of the
  linear classifier head.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import bisect
from scipy.spatial.distance import cdist

from .adapt import predict
from .data import LabeledDataset
from .nn import MlpModel, run_layers

INV_PHI = (math.sqrt(5) - 1) / 2
# twice the optimal radius ratio, i.e. the separation of two tangent profiles
GAP_FACTOR = 3.1704


class _Report:
    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_text(self) -> str:
        return "\n".join(f"{k}: {v}" for k, v in self.to_dict().items())


@dataclass(frozen=True)
class BeamParams:
    sigma: float
    sigma_ext: float
    R: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")
        if not self.sigma_ext >= 0:
            raise ValueError(f"sigma_ext must be >= 0, got {self.sigma_ext}")
        if not self.R >= 0:
            raise ValueError(f"R must be >= 0, got {self.R}")


def tn_ratio(p: BeamParams) -> float:
    """``(1 - e^{-R^2/2s^2}) / sqrt(1 - e^{-R^2/2s^2} + pi R^2 s_ext^2)``; 0 at R = 0."""
    if p.R == 0:
        return 0.0
    enclosed = -math.expm1(-p.R ** 2 / (2 * p.sigma ** 2))
    return enclosed / math.sqrt(enclosed + math.pi * p.R ** 2 * p.sigma_ext ** 2)


def golden_section_max(f, a: float, b: float, tol: float = 1e-8) -> float:
    """Maximiser of a unimodal ``f`` on ``[a, b]``, located to within ``tol``."""
    a, b = min(a, b), max(a, b)
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = f(d)
    return (a + b) / 2


def optimal_radius(sigma: float, sigma_ext: float, r_max: float | None = None) -> float:
    """Radius maximising :func:`tn_ratio` over ``[0, r_max]`` (default ``10 sigma``).

    Without extraneous noise the ratio grows monotonically with ``R``, so
    there is no interior optimum and this raises.
    """
    if sigma_ext <= 0:
        raise ValueError(
            "with sigma_ext = 0 the ratio increases monotonically in R; "
            "the maximiser is the search boundary r_max, not an interior optimum"
        )
    if r_max is None:
        r_max = 10.0 * sigma
    return golden_section_max(lambda r: tn_ratio(BeamParams(sigma, sigma_ext, r)), 0.0, r_max)


def beam_condition(u: float) -> float:
    return math.exp(u) - 2 * u - 1


def solve_beam_condition(lo: float = 0.5, hi: float = 3.0, xtol: float = 1e-10):
    """Non-trivial root of ``e^u = 2u + 1`` and the radius ratio ``sqrt(2 u*)``.

    The equation is the stationarity condition of ``(1 - e^{-u}) / sqrt(u)``,
    the noise-dominated limit of :func:`tn_ratio` with ``u = R^2 / 2 sigma^2``.
    """
    u = bisect(beam_condition, lo, hi, xtol=xtol, maxiter=200)
    return u, math.sqrt(2 * u)


@dataclass
class Lemma2Report(_Report):
    delta: float
    r_delta: float
    pos_mislabel_rate: float
    neg_collision_rate: float


@dataclass
class Lemma4Report(_Report):
    sigma: float
    lipschitz_L: float
    min_interclass_logit_gap: float
    bound: float
    satisfied: bool


def overlap_fraction(logits, labels, delta: float) -> float:
    """Fraction of samples whose logit vector lies within L2 distance ``delta``
    (inclusive) of some sample with a different label."""
    if not delta > 0:
        raise ValueError(f"delta must be > 0, got {delta}")
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    near = np.zeros(len(labels), dtype=bool)
    for z in np.unique(labels):
        inside, outside = labels == z, labels != z
        if not outside.any():
            continue
        d = cdist(logits[inside], logits[outside])
        near[inside] = d.min(axis=1) <= delta
    return float(near.mean()) if len(near) else 0.0


def transformation_rates(query_labels, key_logits):
    """Positive-key mislabel rate and negative-key collision rate for one batch.

    Row ``i`` of ``key_logits`` is the positive key of query ``i``; every other
    row is one of its negatives.  Returns ``(pos_wrong, pos_total, neg_hits, neg_total)``.
    """
    y = np.asarray(query_labels)
    pred = np.argmax(np.asarray(key_logits), axis=1)
    m = len(y)
    same = pred[None, :] == y[:, None]
    return int(np.sum(pred != y)), m, int(same.sum() - np.trace(same)), m * (m - 1)


def lemma2_report(model_t: MlpModel, ds_t: LabeledDataset, keys, delta: float) -> Lemma2Report:
    """``keys`` is an iterable of ``(query_indices, key_logits)`` batches."""
    if not delta > 0:
        raise ValueError(f"delta must be > 0, got {delta}")
    logits, _ = run_layers(model_t, ds_t.X, 0, model_t.spec.n_layers)
    r_delta = overlap_fraction(logits, ds_t.labels, delta)
    totals = np.zeros(4, dtype=np.int64)
    for idx, key_logits in keys:
        totals += transformation_rates(ds_t.labels[np.asarray(idx)], key_logits)
    pos_wrong, pos_total, neg_hits, neg_total = totals
    return Lemma2Report(
        delta=float(delta),
        r_delta=r_delta,
        pos_mislabel_rate=float(pos_wrong / pos_total) if pos_total else 0.0,
        neg_collision_rate=float(neg_hits / neg_total) if neg_total else 0.0,
    )


def jacobi_singular_values(A, tol: float = 1e-15, max_sweeps: int = 100) -> np.ndarray:
    """Singular values (descending) by one-sided cyclic Jacobi rotations."""
    U = np.array(A, dtype=np.float64)
    if U.shape[0] < U.shape[1]:
        U = U.T.copy()
    n = U.shape[1]
    for _ in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                alpha = U[:, p] @ U[:, p]
                beta = U[:, q] @ U[:, q]
                gamma = U[:, p] @ U[:, q]
                if abs(gamma) <= tol * math.sqrt(alpha * beta) or gamma == 0:
                    continue
                rotated = True
                zeta = (beta - alpha) / (2 * gamma)
                t = math.copysign(1.0, zeta) / (abs(zeta) + math.sqrt(1 + zeta * zeta))
                c = 1 / math.sqrt(1 + t * t)
                s = c * t
                up, uq = U[:, p].copy(), U[:, q]
                U[:, p] = c * up - s * uq
                U[:, q] = s * up + c * uq
        if not rotated:
            break
    return np.sort(np.linalg.norm(U, axis=0))[::-1]


def min_interclass_gap(logits, groups) -> float:
    """Smallest L2 distance between logit rows of different groups (inf if one group)."""
    logits = np.asarray(logits, dtype=np.float64)
    groups = np.asarray(groups)
    present = np.unique(groups)
    best = math.inf
    for i, a in enumerate(present):
        for b in present[i + 1:]:
            best = min(best, float(cdist(logits[groups == a], logits[groups == b]).min()))
    return best


def lemma4_report(model_t: MlpModel, ds_t: LabeledDataset, sigma: float) -> Lemma4Report:
    """Compare the smallest logit gap between predicted groups with ``3.1704 sigma / L``.

    ``L = 1 / sigma_min`` of the final weight matrix.  Advisory only: the
    bound presumes a converged, perfectly aligned model.
    """
    spec = model_t.spec
    if spec.feature_depth != spec.n_layers - 1:
        raise ValueError("the gap bound needs a single linear classifier layer (feature_depth = n_layers - 1)")
    s_min = jacobi_singular_values(model_t.weights[-1])[-1]
    if s_min < 1e-12:
        raise ValueError(f"classifier weight matrix is singular (sigma_min = {s_min:.3g})")
    L = 1.0 / s_min
    logits, _ = run_layers(model_t, ds_t.X, 0, spec.n_layers)
    gap = min_interclass_gap(logits, np.argmax(logits, axis=1))
    bound = GAP_FACTOR * sigma / L
    return Lemma4Report(float(sigma), float(L), gap, float(bound), bool(gap >= bound))


def error_decomposition(model: MlpModel, ds: LabeledDataset):
    """Two-term target error with logit groups taken to be the ground-truth classes.

    The first term is the class-mass weighted misclassification probability;
    the second (group label disagreeing with ground truth) is zero under this
    grouping.
    """
    pred = predict(model, ds.X)
    first = 0.0
    for z in range(ds.n_classes):
        members = ds.labels == z
        if members.any():
            first += members.mean() * float(np.mean(pred[members] != z))
    return first, 0.0
