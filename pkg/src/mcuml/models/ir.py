"""Backend-independent representation of trained models.

Every trainer produces one of the model types below. The representation
stores 64-bit parameters; consumers that target 32-bit deployment narrow
at their own boundary. All types serialize to a documented JSON form
for inspection and golden tests, and round-trip through it losslessly
(floats are encoded with repr's shortest round-trip form).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..dataset import Normalization

SIGMOID = "sigmoid"
IDENTITY = "identity"

MEAN = "mean"
MAJORITY_VOTE = "majority_vote"


class IrError(ValueError):
    pass


@dataclass(frozen=True)
class SplitNode:
    """Internal decision node: rows with x[feature] <= threshold go left.

    n_samples and impurity_decrease record training statistics used for
    impurity-based feature importance; they do not affect prediction.
    """

    feature: int
    threshold: float
    left: "SplitNode | Leaf"
    right: "SplitNode | Leaf"
    n_samples: int = 0
    impurity_decrease: float = 0.0


@dataclass(frozen=True)
class Leaf:
    """Terminal node.

    value: constant prediction for regression forest leaves, class index
    for classification forest leaves. For model-tree leaves, coefficients
    holds a length-d linear model evaluated as coefficients . x + value.
    """

    value: float
    coefficients: np.ndarray | None = None


TreeNode = SplitNode | Leaf


@dataclass(frozen=True)
class ForestModel:
    """One or more decision trees plus an aggregation rule.

    aggregation 'mean' averages tree outputs (regression); 'majority_vote'
    picks the most voted class, ties broken toward the lowest class index.
    """

    task: str
    n_features: int
    trees: tuple[TreeNode, ...]
    aggregation: str
    n_classes: int | None = None
    leaf_kind: str = "constant"  # 'constant' or 'linear' (model trees)
    warnings: tuple[str, ...] = ()
    family: str = "rf"

    def __post_init__(self):
        if not self.trees:
            raise IrError("forest must contain at least one tree")
        if self.aggregation not in (MEAN, MAJORITY_VOTE):
            raise IrError(f"unknown aggregation {self.aggregation!r}")
        for tree in self.trees:
            _check_tree(tree, self.n_features, self.leaf_kind)


@dataclass(frozen=True)
class AnnModel:
    """Fully connected network: layer_sizes[0] is the input width.

    weights[i] has shape (layer_sizes[i+1], layer_sizes[i]); biases[i] has
    length layer_sizes[i+1]. activations[i] tags the layer's output
    transfer function. Normalization of inputs (and de-normalization of
    the regression output) is stored explicitly rather than folded so the
    downstream code generator can choose either representation.
    """

    task: str
    layer_sizes: tuple[int, ...]
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    activations: tuple[str, ...]
    normalization: Normalization
    output_mean: float = 0.0
    output_std: float = 1.0
    n_classes: int | None = None
    warnings: tuple[str, ...] = ()
    family: str = "ann"

    def __post_init__(self):
        sizes = self.layer_sizes
        if len(sizes) < 2:
            raise IrError("network needs at least input and output layers")
        if len(self.weights) != len(sizes) - 1 or len(self.biases) != len(sizes) - 1:
            raise IrError("one weight matrix and bias vector per non-input layer")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (sizes[i + 1], sizes[i]):
                raise IrError(
                    f"layer {i + 1} weight shape {w.shape} != ({sizes[i + 1]}, {sizes[i]})"
                )
            if b.shape != (sizes[i + 1],):
                raise IrError(f"layer {i + 1} bias shape {b.shape} != ({sizes[i + 1]},)")
        for act in self.activations:
            if act not in (SIGMOID, IDENTITY):
                raise IrError(f"unknown activation {act!r}")
        if len(self.activations) != len(sizes) - 1:
            raise IrError("one activation tag per non-input layer")

    @property
    def n_features(self) -> int:
        return self.layer_sizes[0]


@dataclass(frozen=True)
class Hyperplane:
    """One linear decision function w . x + bias over raw feature space."""

    weights: np.ndarray
    bias: float
    class_a: int = 0
    class_b: int = 1
    degenerate: bool = False


@dataclass(frozen=True)
class SvmModel:
    """Pairwise linear classifiers, or a single hyperplane for regression.

    Classification stores n(n-1)/2 hyperplanes ordered (0,1), (0,2), ...,
    (n-2,n-1). A nonnegative decision value votes for class_a (the lower
    index); prediction is the most voted class, ties toward the lowest
    index. Regression stores exactly one hyperplane evaluated directly.
    """

    task: str
    n_features: int
    hyperplanes: tuple[Hyperplane, ...]
    n_classes: int | None = None
    warnings: tuple[str, ...] = ()
    family: str = "svm"

    def __post_init__(self):
        if self.task == "classification":
            n = self.n_classes
            if n is None or n < 2:
                raise IrError("classification needs n_classes >= 2")
            if len(self.hyperplanes) != n * (n - 1) // 2:
                raise IrError(
                    f"expected {n * (n - 1) // 2} hyperplanes, got {len(self.hyperplanes)}"
                )
        elif len(self.hyperplanes) != 1:
            raise IrError("regression uses a single hyperplane")
        for hp in self.hyperplanes:
            if hp.weights.shape != (self.n_features,):
                raise IrError("hyperplane weight length != feature count")


TrainedModelIR = AnnModel | ForestModel | SvmModel


def _check_tree(node: TreeNode, n_features: int, leaf_kind: str, depth: int = 0):
    if isinstance(node, Leaf):
        if leaf_kind == "linear":
            if node.coefficients is None or node.coefficients.shape != (n_features,):
                raise IrError("model-tree leaf needs a length-d coefficient vector")
        return
    if not 0 <= node.feature < n_features:
        raise IrError(f"split feature {node.feature} out of range")
    _check_tree(node.left, n_features, leaf_kind, depth + 1)
    _check_tree(node.right, n_features, leaf_kind, depth + 1)


def tree_depth(node: TreeNode) -> int:
    """Longest root-to-leaf path length in edges."""
    if isinstance(node, Leaf):
        return 0
    return 1 + max(tree_depth(node.left), tree_depth(node.right))


def count_nodes(node: TreeNode) -> tuple[int, int]:
    """(internal node count, leaf count) of one tree."""
    if isinstance(node, Leaf):
        return 0, 1
    li, ll = count_nodes(node.left)
    ri, rl = count_nodes(node.right)
    return li + ri + 1, ll + rl


# --- serialization -----------------------------------------------------------

def _tree_to_obj(node: TreeNode):
    if isinstance(node, Leaf):
        obj = {"leaf": node.value}
        if node.coefficients is not None:
            obj["coefficients"] = [float(c) for c in node.coefficients]
        return obj
    return {
        "feature": node.feature,
        "threshold": node.threshold,
        "n_samples": node.n_samples,
        "impurity_decrease": node.impurity_decrease,
        "left": _tree_to_obj(node.left),
        "right": _tree_to_obj(node.right),
    }


def _tree_from_obj(obj) -> TreeNode:
    if "leaf" in obj:
        coeffs = obj.get("coefficients")
        return Leaf(float(obj["leaf"]),
                    None if coeffs is None else np.array(coeffs, dtype=np.float64))
    return SplitNode(
        int(obj["feature"]), float(obj["threshold"]),
        _tree_from_obj(obj["left"]), _tree_from_obj(obj["right"]),
        int(obj.get("n_samples", 0)), float(obj.get("impurity_decrease", 0.0)),
    )


def model_to_json(model: TrainedModelIR, indent: int | None = 2) -> str:
    """Serialize any trained model to its documented JSON text form."""
    if isinstance(model, AnnModel):
        obj = {
            "family": "ann",
            "task": model.task,
            "layer_sizes": list(model.layer_sizes),
            "weights": [w.tolist() for w in model.weights],
            "biases": [b.tolist() for b in model.biases],
            "activations": list(model.activations),
            "input_mean": model.normalization.mean.tolist(),
            "input_std": model.normalization.std.tolist(),
            "output_mean": model.output_mean,
            "output_std": model.output_std,
            "n_classes": model.n_classes,
            "warnings": list(model.warnings),
        }
    elif isinstance(model, ForestModel):
        obj = {
            "family": model.family,
            "task": model.task,
            "n_features": model.n_features,
            "aggregation": model.aggregation,
            "leaf_kind": model.leaf_kind,
            "n_classes": model.n_classes,
            "trees": [_tree_to_obj(t) for t in model.trees],
            "warnings": list(model.warnings),
        }
    elif isinstance(model, SvmModel):
        obj = {
            "family": "svm",
            "task": model.task,
            "n_features": model.n_features,
            "n_classes": model.n_classes,
            "hyperplanes": [
                {"class_a": hp.class_a, "class_b": hp.class_b,
                 "weights": hp.weights.tolist(), "bias": hp.bias,
                 "degenerate": hp.degenerate}
                for hp in model.hyperplanes
            ],
            "warnings": list(model.warnings),
        }
    else:
        raise IrError(f"cannot serialize {type(model).__name__}")
    return json.dumps(obj, indent=indent)


def model_from_json(text: str) -> TrainedModelIR:
    obj = json.loads(text)
    family = obj["family"]
    if family == "ann":
        norm = Normalization(
            np.array(obj["input_mean"], dtype=np.float64),
            np.array(obj["input_std"], dtype=np.float64),
            np.zeros(len(obj["input_mean"]), dtype=bool),
        )
        return AnnModel(
            task=obj["task"],
            layer_sizes=tuple(obj["layer_sizes"]),
            weights=tuple(np.array(w, dtype=np.float64) for w in obj["weights"]),
            biases=tuple(np.array(b, dtype=np.float64) for b in obj["biases"]),
            activations=tuple(obj["activations"]),
            normalization=norm,
            output_mean=float(obj["output_mean"]),
            output_std=float(obj["output_std"]),
            n_classes=obj["n_classes"],
            warnings=tuple(obj.get("warnings", ())),
        )
    if family in ("rf", "m5"):
        return ForestModel(
            task=obj["task"],
            n_features=int(obj["n_features"]),
            trees=tuple(_tree_from_obj(t) for t in obj["trees"]),
            aggregation=obj["aggregation"],
            n_classes=obj["n_classes"],
            leaf_kind=obj["leaf_kind"],
            warnings=tuple(obj.get("warnings", ())),
            family=family,
        )
    if family == "svm":
        return SvmModel(
            task=obj["task"],
            n_features=int(obj["n_features"]),
            hyperplanes=tuple(
                Hyperplane(np.array(h["weights"], dtype=np.float64), float(h["bias"]),
                           int(h["class_a"]), int(h["class_b"]), bool(h["degenerate"]))
                for h in obj["hyperplanes"]
            ),
            n_classes=obj["n_classes"],
            warnings=tuple(obj.get("warnings", ())),
        )
    raise IrError(f"unknown model family {family!r}")
