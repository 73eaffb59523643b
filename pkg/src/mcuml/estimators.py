"""Closed-form and structural memory estimates for trained models.

Networks and linear classifiers admit exact parameter counts from their
shape alone. Tree models do not: their size is a byproduct of training,
so they are counted by walking the realized structure, with a coarse
full-binary-tree worst case available for comparison.

Counting conventions (declared, tested):
  - one parameter per stored scalar (weight, bias, threshold, leaf value,
    leaf coefficient);
  - per internal tree node, 2 extra parameter-equivalents for the feature
    selector and the two child references (one per child);
  - bytes = parameter_count * scalar_width with scalar_width defaulting
    to 4 (32-bit reals in the generated code).

Linear-classifier bias terms are tracked separately from the weight count
because the classic shape-only estimate omits them; total_bytes includes
them.
"""

from __future__ import annotations

from dataclasses import dataclass

from .models import ForestModel, Leaf, TrainedModelIR, TreeNode
from .models.config import RfConfig

ANALYTICAL = "analytical"
WORST_CASE = "worst_case"
EXACT_IR = "exact_ir"

DEFAULT_SCALAR_WIDTH = 4


class EstimateError(ValueError):
    pass


@dataclass(frozen=True)
class MemoryEstimate:
    """Parameter count and byte size of one model's stored constants."""

    parameter_count: int
    scalar_width: int = DEFAULT_SCALAR_WIDTH
    kind: str = ANALYTICAL
    bias_count: int = 0

    def __post_init__(self):
        if self.parameter_count < 0 or self.bias_count < 0:
            raise EstimateError("parameter counts must be nonnegative")
        if self.scalar_width <= 0:
            raise EstimateError("scalar_width must be positive")

    @property
    def bytes(self) -> int:
        return self.parameter_count * self.scalar_width

    @property
    def total_parameters(self) -> int:
        return self.parameter_count + self.bias_count

    @property
    def total_bytes(self) -> int:
        return self.total_parameters * self.scalar_width


def estimate_ann(layer_sizes, scalar_width: int = DEFAULT_SCALAR_WIDTH) -> MemoryEstimate:
    """Parameter count of a fully connected network from its layer sizes.

    layer_sizes[0] is the input width; every later layer i contributes
    layer_sizes[i] * (1 + layer_sizes[i-1]) scalars (weights plus biases).
    """
    sizes = list(layer_sizes)
    if len(sizes) < 2:
        raise EstimateError("need at least input and output layers")
    if any(s < 1 for s in sizes):
        raise EstimateError("layer sizes must be positive")
    count = sum(sizes[i] * (1 + sizes[i - 1]) for i in range(1, len(sizes)))
    return MemoryEstimate(count, scalar_width, ANALYTICAL)


def estimate_svm(n_classes: int, n_features: int,
                 scalar_width: int = DEFAULT_SCALAR_WIDTH) -> MemoryEstimate:
    """Weight count of a one-vs-one linear classifier bank.

    parameter_count is the shape-only value n(n-1)/2 * d; the n(n-1)/2
    bias terms the deployed code also stores are reported in bias_count.
    """
    if n_classes < 2:
        raise EstimateError("need at least 2 classes")
    if n_features < 1:
        raise EstimateError("need at least 1 feature")
    pairs = n_classes * (n_classes - 1) // 2
    return MemoryEstimate(pairs * n_features, scalar_width, ANALYTICAL,
                          bias_count=pairs)


def _count_tree(node: TreeNode, leaf_scalars: int) -> int:
    if isinstance(node, Leaf):
        return leaf_scalars
    # feature id + threshold + two child references
    return 4 + _count_tree(node.left, leaf_scalars) + _count_tree(node.right, leaf_scalars)


def estimate_tree_exact(model: ForestModel,
                        scalar_width: int = DEFAULT_SCALAR_WIDTH) -> MemoryEstimate:
    """Exact parameter-equivalent count of a realized tree model."""
    if not isinstance(model, ForestModel):
        raise EstimateError("exact tree estimate needs a trained tree model")
    leaf_scalars = model.n_features + 1 if model.leaf_kind == "linear" else 1
    count = sum(_count_tree(t, leaf_scalars) for t in model.trees)
    return MemoryEstimate(count, scalar_width, EXACT_IR)


def estimate_tree_worst_case(cfg: RfConfig,
                             n_features: int | None = None,
                             leaf_scalars: int = 1,
                             scalar_width: int = DEFAULT_SCALAR_WIDTH) -> MemoryEstimate:
    """Full-binary-tree bound for a forest config: every tree reaches
    max_depth everywhere. Deliberately coarse; real trained sizes come
    from estimate_tree_exact."""
    cfg.validate()
    internal = (1 << cfg.max_depth) - 1
    leaves = 1 << cfg.max_depth
    count = cfg.trees * (internal * 4 + leaves * leaf_scalars)
    return MemoryEstimate(count, scalar_width, WORST_CASE)


def estimate_model(model: TrainedModelIR,
                   scalar_width: int = DEFAULT_SCALAR_WIDTH) -> MemoryEstimate:
    """Analytical (shape-based) estimate for networks and linear models,
    exact structural count for tree models."""
    if isinstance(model, ForestModel):
        return estimate_tree_exact(model, scalar_width)
    if model.family == "ann":
        return estimate_ann(model.layer_sizes, scalar_width)
    if model.task == "classification":
        return estimate_svm(model.n_classes, model.n_features, scalar_width)
    # single regression hyperplane: d weights + 1 bias
    return MemoryEstimate(model.n_features, scalar_width, ANALYTICAL, bias_count=1)
