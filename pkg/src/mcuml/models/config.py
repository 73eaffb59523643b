"""Hyperparameter descriptions for the four supported model families."""

from __future__ import annotations

from dataclasses import dataclass, fields


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class AnnConfig:
    """Fully connected feed-forward network.

    hidden_layers stacked layers of `neurons` units each, sigmoid hidden
    activation by default, linear output. Trained with mini-batch gradient
    descent at a constant learning rate.
    """

    hidden_layers: int = 2
    neurons: int = 8
    epochs: int = 300
    learning_rate: float = 0.1
    seed: int = 0
    batch_size: int = 32
    hidden_activation: str = "sigmoid"
    family = "ann"

    def validate(self):
        if self.hidden_layers < 1 or self.neurons < 1:
            raise ConfigError("hidden_layers and neurons must be positive")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("epochs and batch_size must be positive")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ConfigError("learning_rate must lie in (0, 1]")
        if self.hidden_activation not in ("sigmoid", "identity"):
            raise ConfigError(f"unknown activation {self.hidden_activation!r}")


@dataclass(frozen=True)
class RfConfig:
    """Forest of randomized CART trees on bootstrap samples.

    feature_subsample None picks the conventional default: ceil(sqrt(d))
    candidate features per split for classification, ceil(d/3) for
    regression.
    """

    trees: int = 10
    max_depth: int = 8
    feature_subsample: int | None = None
    bootstrap_fraction: float = 1.0
    seed: int = 0
    family = "rf"

    def validate(self):
        if self.trees < 1:
            raise ConfigError("trees must be positive")
        if self.max_depth < 1:
            raise ConfigError("max_depth must be positive")
        if self.feature_subsample is not None and self.feature_subsample < 1:
            raise ConfigError("feature_subsample must be positive")
        if not 0.0 < self.bootstrap_fraction <= 1.0:
            raise ConfigError("bootstrap_fraction must lie in (0, 1]")


@dataclass(frozen=True)
class M5Config:
    """Variance-reduction tree with a linear regression model in each leaf.

    Regression only. Pruning collapses subtrees whose single leaf model
    would match the subtree's training RMSE.
    """

    min_leaf_size: int = 4
    prune: bool = True
    family = "m5"

    def validate(self):
        if self.min_leaf_size < 1:
            raise ConfigError("min_leaf_size must be positive")


@dataclass(frozen=True)
class SvmConfig:
    """Linear soft-margin SVM trained by sequential minimal optimization.

    Multi-class problems use one binary classifier per class pair with
    pairwise voting. On regression tasks a single least-squares linear
    model is substituted (flagged on the trained model).
    """

    regularization: float = 1.0
    tolerance: float = 1e-3
    max_passes: int = 8
    seed: int = 0
    family = "svm"

    def validate(self):
        if self.regularization <= 0:
            raise ConfigError("regularization must be positive")
        if self.tolerance <= 0:
            raise ConfigError("tolerance must be positive")
        if self.max_passes < 1:
            raise ConfigError("max_passes must be positive")


ModelConfig = AnnConfig | RfConfig | M5Config | SvmConfig

FAMILIES = ("ann", "rf", "m5", "svm")

_BY_FAMILY = {"ann": AnnConfig, "rf": RfConfig, "m5": M5Config, "svm": SvmConfig}


def default_config(family: str) -> ModelConfig:
    if family not in _BY_FAMILY:
        raise ConfigError(f"unknown model family {family!r} (known: {', '.join(FAMILIES)})")
    return _BY_FAMILY[family]()


def make_config(family: str, **overrides) -> ModelConfig:
    """Build a validated config for `family` with field overrides."""
    if family not in _BY_FAMILY:
        raise ConfigError(f"unknown model family {family!r} (known: {', '.join(FAMILIES)})")
    cls = _BY_FAMILY[family]
    valid = {f.name for f in fields(cls)}
    unknown = set(overrides) - valid
    if unknown:
        raise ConfigError(f"unknown {family} parameters: {sorted(unknown)}")
    cfg = cls(**overrides)
    cfg.validate()
    return cfg


def config_label(cfg: ModelConfig) -> str:
    """Compact human-readable rendering used in report tables."""
    if isinstance(cfg, AnnConfig):
        return f"ann{{H={cfg.hidden_layers},N={cfg.neurons}}}"
    if isinstance(cfg, RfConfig):
        return f"rf{{T={cfg.trees},D={cfg.max_depth}}}"
    if isinstance(cfg, M5Config):
        return f"m5{{leaf={cfg.min_leaf_size},prune={int(cfg.prune)}}}"
    return f"svm{{C={cfg.regularization:g}}}"
