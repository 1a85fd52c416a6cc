"""Dense feed-forward network with hand-written backpropagation.

The network is split at ``feature_depth`` into a feature extractor G (the
first ``feature_depth`` weight layers, each followed by the hidden
activation) and a classifier head F (the remaining layers, the last of which
is a plain linear map producing logits).

Layer ``l`` computes ``A @ W[l] + b[l]`` with ``W[l]`` of shape
``(fan_in, fan_out)``.  Everything is float64.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

ACTIVATIONS = ("relu", "tanh")


@dataclass(frozen=True)
class MlpSpec:
    layer_widths: tuple[int, ...]
    activation: str = "relu"
    feature_depth: int | None = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "layer_widths", tuple(int(w) for w in self.layer_widths))
        if self.feature_depth is None:
            object.__setattr__(self, "feature_depth", self.n_layers - 1)
        self.validate()

    @property
    def n_layers(self) -> int:
        return len(self.layer_widths) - 1

    def validate(self):
        widths = self.layer_widths
        if len(widths) < 3:
            raise ValueError(f"layer_widths needs at least 3 entries, got {list(widths)}")
        if any(w < 1 for w in widths):
            raise ValueError(f"layer widths must be positive, got {list(widths)}")
        if widths[-1] < 2:
            raise ValueError("the logit dimension (last width) must be >= 2")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}, got {self.activation!r}")
        if not 1 <= self.feature_depth < self.n_layers:
            raise ValueError(
                f"feature_depth must satisfy 1 <= feature_depth < {self.n_layers}, "
                f"got {self.feature_depth}"
            )

    @property
    def input_dim(self) -> int:
        return self.layer_widths[0]

    @property
    def feature_dim(self) -> int:
        return self.layer_widths[self.feature_depth]

    @property
    def n_classes(self) -> int:
        return self.layer_widths[-1]

    def to_dict(self) -> dict:
        return {
            "layer_widths": list(self.layer_widths),
            "activation": self.activation,
            "feature_depth": self.feature_depth,
            "seed": self.seed,
        }


@dataclass
class MlpModel:
    spec: MlpSpec
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        widths = self.spec.layer_widths
        if len(self.weights) != self.spec.n_layers or len(self.biases) != self.spec.n_layers:
            raise ValueError("parameter count does not match spec")
        for l, (W, b) in enumerate(zip(self.weights, self.biases)):
            if W.shape != (widths[l], widths[l + 1]) or b.shape != (widths[l + 1],):
                raise ValueError(f"layer {l} has shapes {W.shape}/{b.shape}, spec wants "
                                 f"{(widths[l], widths[l + 1])}")
            if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {l} holds non-finite parameters")

    def copy(self) -> "MlpModel":
        return MlpModel(self.spec, [W.copy() for W in self.weights], [b.copy() for b in self.biases])

    def params(self) -> list[np.ndarray]:
        """Flat list of parameter arrays, weights and biases interleaved per layer."""
        out = []
        for W, b in zip(self.weights, self.biases):
            out += [W, b]
        return out

    def equals(self, other: "MlpModel") -> bool:
        """Bitwise parameter equality."""
        if self.spec != other.spec:
            return False
        return all(np.array_equal(p, q) for p, q in zip(self.params(), other.params()))


@dataclass
class ParamGrads:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @classmethod
    def zeros_like(cls, model: MlpModel) -> "ParamGrads":
        return cls([np.zeros_like(W) for W in model.weights], [np.zeros_like(b) for b in model.biases])

    def params(self) -> list[np.ndarray]:
        out = []
        for W, b in zip(self.weights, self.biases):
            out += [W, b]
        return out


@dataclass
class OptimizerState:
    learning_rate: float
    momentum: float = 0.9
    velocity: ParamGrads | None = None

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise ValueError(f"learning_rate must be non-negative, got {self.learning_rate}")
        if not 0 <= self.momentum < 1:
            raise ValueError(f"momentum must lie in [0, 1), got {self.momentum}")


@dataclass
class ForwardCache:
    """Per-layer inputs and pre-activations for layers ``start .. start+len-1``."""

    start: int
    inputs: list[np.ndarray] = field(default_factory=list)
    pre: list[np.ndarray] = field(default_factory=list)

    @property
    def stop(self) -> int:
        return self.start + len(self.inputs)


def init_model(spec: MlpSpec) -> MlpModel:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights, zero biases."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(spec.layer_widths[:-1], spec.layer_widths[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpModel(spec, weights, biases)


def _activate(kind, Z):
    if kind == "relu":
        return np.maximum(Z, 0.0)
    return np.tanh(Z)


def _activate_backward(kind, Z, dA):
    if kind == "relu":
        return dA * (Z > 0)
    t = np.tanh(Z)
    return dA * (1.0 - t * t)


def run_layers(model: MlpModel, A: np.ndarray, start: int, stop: int):
    """Push activations ``A`` through layers ``start .. stop-1``.

    Returns the output and a cache usable by :func:`backprop`.  Every layer
    except the very last one of the network is followed by the activation.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[1] != model.spec.layer_widths[start]:
        raise ValueError(
            f"expected input with {model.spec.layer_widths[start]} columns at layer {start}, "
            f"got shape {A.shape}"
        )
    cache = ForwardCache(start)
    last = model.spec.n_layers - 1
    for l in range(start, stop):
        cache.inputs.append(A)
        Z = A @ model.weights[l] + model.biases[l]
        cache.pre.append(Z)
        A = Z if l == last else _activate(model.spec.activation, Z)
    return A, cache


def backprop(model: MlpModel, cache: ForwardCache, dOut: np.ndarray, grads: ParamGrads | None = None):
    """Reverse pass over the layers recorded in ``cache``.

    Gradients are accumulated into ``grads`` (a fresh zero buffer if None).
    Returns ``(grads, dInput)``.
    """
    if grads is None:
        grads = ParamGrads.zeros_like(model)
    if cache.stop > model.spec.n_layers:
        raise ValueError("cache does not belong to this model")
    dA = np.asarray(dOut, dtype=np.float64)
    last = model.spec.n_layers - 1
    for offset in range(len(cache.inputs) - 1, -1, -1):
        l = cache.start + offset
        Z = cache.pre[offset]
        if dA.shape != Z.shape:
            raise ValueError(f"gradient shape {dA.shape} does not match layer {l} output {Z.shape}")
        dZ = dA if l == last else _activate_backward(model.spec.activation, Z, dA)
        grads.weights[l] += cache.inputs[offset].T @ dZ
        grads.biases[l] += dZ.sum(axis=0)
        dA = dZ @ model.weights[l].T
    return grads, dA


def extract_features(model: MlpModel, X):
    """G(X): activations at the feature boundary."""
    return run_layers(model, X, 0, model.spec.feature_depth)[0]


def classify_features(model: MlpModel, H):
    """F(H): logits computed from latent features."""
    return run_layers(model, H, model.spec.feature_depth, model.spec.n_layers)[0]


def forward(model: MlpModel, X):
    """Full pass returning ``(features, logits, cache)``."""
    logits, cache = run_layers(model, X, 0, model.spec.n_layers)
    features = cache.inputs[model.spec.feature_depth]
    return features, logits, cache


def backprop_from_logits(model: MlpModel, cache: ForwardCache, dLogits) -> ParamGrads:
    if cache.start != 0 or cache.stop != model.spec.n_layers:
        raise ValueError("cache must come from a full forward pass of this model")
    return backprop(model, cache, dLogits)[0]


def softmax(logits):
    """Row-wise softmax with max subtraction; accepts a vector or a matrix."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def log_softmax(logits):
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def cross_entropy(logits, labels):
    """Mean negative log-likelihood and its gradient ``(softmax - onehot) / n``."""
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    n, n_classes = logits.shape
    if labels.shape != (n,):
        raise ValueError(f"expected {n} labels, got shape {labels.shape}")
    if n and (labels.min() < 0 or labels.max() >= n_classes):
        raise ValueError(f"labels must lie in [0, {n_classes})")
    if n == 0:
        return 0.0, np.zeros_like(logits)
    rows = np.arange(n)
    logp = log_softmax(logits)
    loss = -logp[rows, labels].mean()
    d = np.exp(logp)
    d[rows, labels] -= 1.0
    return float(loss), d / n


def sgd_step(model: MlpModel, grads: ParamGrads, state: OptimizerState):
    """In-place momentum SGD: ``v <- mu*v + g; w <- w - lr*v``."""
    if state.velocity is None:
        state.velocity = ParamGrads.zeros_like(model)
    for p, g, v in zip(model.params(), grads.params(), state.velocity.params()):
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {p.shape}")
        v *= state.momentum
        v += g
        p -= state.learning_rate * v
    return model, state


def grad_check(spec: MlpSpec, loss_kind: str = "cross_entropy", eps: float = 1e-5,
               seed: int = 0, n: int = 6, tau: float = 0.5, space: str = "logit") -> float:
    """Max relative error between analytic and central-difference gradients.

    The relative error of one coordinate is ``|a - d| / max(|a| + |d|, 1e-6)``;
    the floor keeps coordinates whose true gradient is ~0 from amplifying
    round-off in the difference quotient.

    ``loss_kind`` is ``"cross_entropy"`` or ``"infonce"``.  The InfoNCE case
    runs the full latent-augmented objective: queries through F(G(x)), keys
    through F(G(centroid) + noise), with the noise held fixed, compared in
    ``space`` (logit, cosine or probability).
    """
    if not 0 < eps <= 1e-2:
        raise ValueError(f"eps must lie in (0, 1e-2], got {eps}")
    from .contrastive import silan_objective

    model = init_model(spec)
    rng = np.random.default_rng(seed)
    # non-zero biases so that every parameter is exercised off the init point
    for b in model.biases:
        b += rng.normal(scale=0.1, size=b.shape)
    X = rng.normal(size=(n, spec.input_dim))

    if loss_kind == "cross_entropy":
        labels = rng.integers(0, spec.n_classes, size=n)

        def loss_and_grads(m):
            _, logits, cache = forward(m, X)
            loss, d = cross_entropy(logits, labels)
            return loss, backprop_from_logits(m, cache, d)
    elif loss_kind == "infonce":
        centroids = rng.normal(size=(n, spec.input_dim))
        noise = rng.normal(scale=0.1, size=(n, spec.feature_dim))

        def loss_and_grads(m):
            return silan_objective(m, X, centroids, noise, tau, space=space)[:2]
    else:
        raise ValueError(f"unknown loss_kind {loss_kind!r}")

    _, analytic = loss_and_grads(model)
    worst = 0.0
    for p, g in zip(model.params(), analytic.params()):
        for idx in np.ndindex(p.shape):
            saved = p[idx]
            p[idx] = saved + eps
            up = loss_and_grads(model)[0]
            p[idx] = saved - eps
            down = loss_and_grads(model)[0]
            p[idx] = saved
            numeric = (up - down) / (2 * eps)
            err = abs(g[idx] - numeric) / max(abs(g[idx]) + abs(numeric), 1e-6)
            worst = max(worst, err)
    return worst


def model_to_dict(model: MlpModel) -> dict:
    return {
        "format": "silan-mlp",
        "version": 1,
        "spec": model.spec.to_dict(),
        "weights": [W.tolist() for W in model.weights],
        "biases": [b.tolist() for b in model.biases],
    }


def model_from_dict(doc: dict) -> MlpModel:
    try:
        spec = MlpSpec(**doc["spec"])
        weights = [np.array(W, dtype=np.float64).reshape(a, b)
                   for W, a, b in zip(doc["weights"], spec.layer_widths[:-1], spec.layer_widths[1:])]
        biases = [np.array(b, dtype=np.float64) for b in doc["biases"]]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed model document: {exc}") from exc
    return MlpModel(spec, weights, biases)


def save_model(model: MlpModel, path) -> None:
    # json writes floats with repr(), which round-trips float64 exactly
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh)
        fh.write("\n")


def load_model(path) -> MlpModel:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: not a JSON document ({exc})") from exc
    return model_from_dict(doc)


__all__ = [
    "MlpSpec", "MlpModel", "ParamGrads", "OptimizerState", "ForwardCache",
    "init_model", "run_layers", "backprop", "forward", "backprop_from_logits",
    "extract_features", "classify_features", "softmax", "log_softmax", "cross_entropy",
    "sgd_step", "grad_check", "save_model", "load_model", "model_to_dict", "model_from_dict",
]
