"""Adaptation hyperparameters."""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

CENTROID_SPACES = ("input", "feature")
BANK_REFRESH = ("per_epoch", "per_step")
SPACES = ("logit", "cosine", "probability")
KEY_GRADIENTS = ("full", "stop")
REDUCTIONS = ("sum", "mean")


@dataclass(frozen=True)
class AdaptConfig:
    k_t: int = 3
    k_s: int = 3
    tau: float = 0.11
    batch_size: int = 32
    epochs: int = 20
    learning_rate: float = 1e-3
    momentum: float = 0.9
    seed: int = 0
    centroid_space: str = "feature"
    bank_refresh: str = "per_epoch"
    exclude_self: bool = True
    space: str = "probability"
    key_gradient: str = "stop"
    loss_reduction: str = "mean"

    def __post_init__(self):
        checks = [
            (self.k_t >= 1, f"k_t must be >= 1, got {self.k_t}"),
            (self.k_s >= 1, f"k_s must be >= 1, got {self.k_s}"),
            (self.tau > 0, f"tau must be > 0, got {self.tau}"),
            (self.batch_size >= 2, f"batch_size must be >= 2, got {self.batch_size}"),
            (self.epochs >= 0, f"epochs must be >= 0, got {self.epochs}"),
            (self.learning_rate >= 0, f"learning_rate must be >= 0, got {self.learning_rate}"),
            (0 <= self.momentum < 1, f"momentum must lie in [0, 1), got {self.momentum}"),
            (self.centroid_space in CENTROID_SPACES,
             f"centroid_space must be one of {CENTROID_SPACES}, got {self.centroid_space!r}"),
            (self.space in SPACES, f"space must be one of {SPACES}, got {self.space!r}"),
            (self.key_gradient in KEY_GRADIENTS,
             f"key_gradient must be one of {KEY_GRADIENTS}, got {self.key_gradient!r}"),
            (self.loss_reduction in REDUCTIONS,
             f"loss_reduction must be one of {REDUCTIONS}, got {self.loss_reduction!r}"),
            (self.bank_refresh in BANK_REFRESH,
             f"bank_refresh must be one of {BANK_REFRESH}, got {self.bank_refresh!r}"),
        ]
        for ok, message in checks:
            if not ok:
                raise ValueError(message)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: dict) -> "AdaptConfig":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in doc.items() if k in names})


DATA_KEYS = ("n", "noise_std", "rotation_deg", "seed_s", "seed_t")
MODEL_KEYS = ("layers", "activation", "feature_depth")
PRETRAIN_KEYS = ("pretrain_epochs", "pretrain_lr", "pretrain_momentum", "pretrain_batch_size")


@dataclass(frozen=True)
class RunConfig:
    """Everything one end-to-end run needs: data, network, pretraining and adaptation."""

    seed: int = 0
    n: int = 1000
    noise_std: float = 0.1
    rotation_deg: float = 30.0
    seed_s: int = 1
    seed_t: int = 2
    layers: tuple = (2, 64, 64, 64, 64, 2)
    activation: str = "relu"
    feature_depth: int | None = None
    pretrain_epochs: int = 200
    pretrain_lr: float = 0.05
    pretrain_momentum: float = 0.9
    pretrain_batch_size: int = 32
    adapt: AdaptConfig = AdaptConfig()

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(int(w) for w in self.layers))
        checks = [
            (self.n >= 2, f"n must be >= 2, got {self.n}"),
            (self.noise_std >= 0, f"noise_std must be >= 0, got {self.noise_std}"),
            (self.seed_s != self.seed_t, f"seed_s and seed_t must differ, both are {self.seed_s}"),
            (self.pretrain_epochs >= 0, f"pretrain_epochs must be >= 0, got {self.pretrain_epochs}"),
            (self.pretrain_lr >= 0, f"pretrain_lr must be >= 0, got {self.pretrain_lr}"),
            (0 <= self.pretrain_momentum < 1,
             f"pretrain_momentum must lie in [0, 1), got {self.pretrain_momentum}"),
            (self.pretrain_batch_size >= 1, f"pretrain_batch_size must be >= 1, got {self.pretrain_batch_size}"),
        ]
        for ok, message in checks:
            if not ok:
                raise ValueError(message)
        self.mlp_spec()

    def mlp_spec(self):
        from .nn import MlpSpec
        return MlpSpec(self.layers, self.activation, self.feature_depth, self.seed)

    def to_dict(self) -> dict:
        doc = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "adapt"}
        doc["layers"] = list(self.layers)
        doc.update({k: v for k, v in self.adapt.to_dict().items() if k != "seed"})
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "RunConfig":
        """Build from a flat document; unknown keys are an error."""
        own = {f.name for f in fields(cls)} - {"adapt"}
        adapt_keys = {f.name for f in fields(AdaptConfig)} - {"seed"}
        unknown = sorted(set(doc) - own - adapt_keys)
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        seed = doc.get("seed", 0)
        adapt = AdaptConfig(seed=seed, **{k: v for k, v in doc.items() if k in adapt_keys})
        return cls(adapt=adapt, **{k: v for k, v in doc.items() if k in own})
