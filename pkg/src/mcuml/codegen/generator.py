"""Lowering of trained models to standalone C prediction code.

The emitted pair (model.c, model.h) declares exactly one entry point:

    float predict(const float features[MODEL_NUM_FEATURES]);   /* regression */
    int   predict(const float features[MODEL_NUM_FEATURES]);   /* classification */

Networks become constant weight arrays plus a loop nest of matrix-vector
products; trees become nested conditionals; pairwise linear classifiers
become dot-product votes. There is no dynamic allocation, no mutable
global state, and no dependency beyond the exponential for the sigmoid.
Every stored scalar is narrowed to the configured width and printed in
its shortest round-trip decimal form, so compiling the text loses no
precision beyond the narrowing itself.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from ..dataset import CLASSIFICATION
from ..models import (AnnModel, ForestModel, Leaf, SvmModel, TrainedModelIR,
                      TreeNode)
from ..models.ir import SIGMOID
from .narrowed import narrow_ann, narrow_svm, narrow_tree, scalar_dtype

REPLAY = "replay"
TIMING = "timing"


class CodegenError(ValueError):
    pass


@dataclass(frozen=True)
class GeneratedSource:
    """Emitted model source, header and manifest for one trained model."""

    model_c: str
    model_h: str
    manifest: dict

    @property
    def n_features(self) -> int:
        return self.manifest["n_features"]

    def manifest_text(self) -> str:
        return json.dumps(self.manifest, indent=2) + "\n"


def float_literal(value, scalar_width: int) -> str:
    """Shortest decimal that round-trips to the narrowed value in C."""
    if scalar_width == 8:
        v = float(value)
        if not np.isfinite(v):
            raise CodegenError("non-finite constant")
        return repr(v)
    with np.errstate(over="ignore"):  # overflow is reported as an error below
        v = np.float32(value)
    if not np.isfinite(v):
        raise CodegenError("constant overflows 32-bit range")
    if v == 0:
        return "-0.0f" if np.signbit(v) else "0.0f"
    magnitude = abs(float(v))
    if 1e-4 <= magnitude < 1e16:
        text = np.format_float_positional(v, unique=True, trim="0")
    else:
        text = np.format_float_scientific(v, unique=True, trim="0")
    return text + "f"


class _Emitter:
    """Builds source text while counting emitted parameter constants."""

    def __init__(self, scalar_width: int):
        self.scalar_width = scalar_width
        self.ctype = "float" if scalar_width == 4 else "double"
        self.count = 0

    def lit(self, value) -> str:
        self.count += 1
        return float_literal(value, self.scalar_width)

    def raw(self, value) -> str:
        # structural constant (accumulator init, divisor): not a parameter
        return float_literal(value, self.scalar_width)

    def const_vector(self, name: str, values) -> str:
        body = ", ".join(self.lit(v) for v in values)
        return f"static const {self.ctype} {name}[{len(values)}] = {{{body}}};\n"

    def const_matrix(self, name: str, matrix) -> str:
        rows = ",\n    ".join(
            "{" + ", ".join(self.lit(v) for v in row) + "}" for row in matrix
        )
        r, c = np.asarray(matrix).shape
        return (f"static const {self.ctype} {name}[{r}][{c}] = {{\n    {rows}\n}};\n")

    def const_scalar(self, name: str, value) -> str:
        return f"static const {self.ctype} {name} = {self.lit(value)};\n"


def _exp_call(emit: _Emitter, arg: str) -> str:
    fn = "expf" if emit.scalar_width == 4 else "exp"
    one = emit.raw(1.0)
    return f"{one} / ({one} + {fn}(-{arg}))"


def _header(model: TrainedModelIR, scalar_width: int) -> str:
    d = model.n_features
    classification = model.task == CLASSIFICATION
    lines = [
        "/* Generated model interface. Do not edit. */",
        "#ifndef MCUML_MODEL_H",
        "#define MCUML_MODEL_H",
        "",
        f"#define MODEL_NUM_FEATURES {d}",
    ]
    if classification:
        lines.append(f"#define MODEL_NUM_CLASSES {model.n_classes}")
        lines.append("")
        lines.append("int predict(const float features[MODEL_NUM_FEATURES]);")
    else:
        lines.append("#define MODEL_REGRESSION 1")
        lines.append("")
        lines.append("float predict(const float features[MODEL_NUM_FEATURES]);")
    lines += ["", "#endif /* MCUML_MODEL_H */", ""]
    return "\n".join(lines)


# --- network -----------------------------------------------------------------

def _generate_ann(model: AnnModel, emit: _Emitter, inline_normalization: bool):
    p = narrow_ann(model, emit.scalar_width, inline_normalization)
    classification = model.task == CLASSIFICATION
    sizes = model.layer_sizes
    buf = max(sizes[1:] + ((sizes[0],) if inline_normalization else ()))
    parts = ["#include \"model.h\"\n"]
    if any(act == SIGMOID for act in p.activations):
        parts.append("#include <math.h>\n")
    parts.append("\n")
    norm_constants = 0
    if inline_normalization:
        parts.append(emit.const_vector("input_mean", p.input_mean))
        parts.append(emit.const_vector("input_std", p.input_std))
        norm_constants += 2 * sizes[0]
    for i, (W, b) in enumerate(zip(p.weights, p.biases), start=1):
        parts.append(emit.const_matrix(f"layer{i}_weights", W))
        parts.append(emit.const_vector(f"layer{i}_bias", b))
    if inline_normalization and not classification:
        parts.append(emit.const_scalar("output_mean", p.output_mean))
        parts.append(emit.const_scalar("output_std", p.output_std))
        norm_constants += 2
    ret = "int" if classification else "float"
    parts.append(f"\n{ret} predict(const float features[MODEL_NUM_FEATURES])\n{{\n")
    parts.append(f"    {emit.ctype} buf_a[{buf}];\n")
    parts.append(f"    {emit.ctype} buf_b[{buf}];\n")
    if inline_normalization:
        parts.append(
            f"    for (int i = 0; i < {sizes[0]}; ++i) {{\n"
            "        buf_a[i] = (features[i] - input_mean[i]) / input_std[i];\n"
            "    }\n"
        )
        src = "buf_a"
        dst = "buf_b"
    else:
        src = "features"
        dst = "buf_a"
    for i, act in enumerate(p.activations, start=1):
        n_out, n_in = sizes[i], sizes[i - 1]
        value = _exp_call(emit, "acc") if act == SIGMOID else "acc"
        parts.append(
            f"    /* layer {i}: {n_out} x {n_in}, {act} */\n"
            f"    for (int r = 0; r < {n_out}; ++r) {{\n"
            f"        {emit.ctype} acc = layer{i}_bias[r];\n"
            f"        for (int c = 0; c < {n_in}; ++c) {{\n"
            f"            acc += layer{i}_weights[r][c] * {src}[c];\n"
            "        }\n"
            f"        {dst}[r] = {value};\n"
            "    }\n"
        )
        src = dst
        dst = "buf_b" if dst == "buf_a" else "buf_a"
    if classification:
        parts.append(
            "    int best = 0;\n"
            f"    for (int i = 1; i < {model.n_classes}; ++i) {{\n"
            f"        if ({src}[i] > {src}[best]) {{\n"
            "            best = i;\n"
            "        }\n"
            "    }\n"
            "    return best;\n"
        )
    elif inline_normalization:
        parts.append(f"    return {src}[0] * output_std + output_mean;\n")
    else:
        parts.append(f"    return {src}[0];\n")
    parts.append("}\n")
    extras = {
        "normalization_inlined": inline_normalization,
        "normalization_constants": norm_constants,
    }
    return "".join(parts), extras


# --- trees -------------------------------------------------------------------

def _emit_tree_node(node: TreeNode, emit: _Emitter, classification: bool,
                    depth: int) -> str:
    ind = "    " * depth
    if isinstance(node, Leaf):
        if node.coefficients is not None:
            lines = [f"{ind}{{", f"{ind}    {emit.ctype} acc = {emit.lit(node.value)};"]
            for k, coef in enumerate(node.coefficients):
                lines.append(f"{ind}    acc += {emit.lit(coef)} * x[{k}];")
            lines.append(f"{ind}    return acc;")
            lines.append(f"{ind}}}")
            return "\n".join(lines) + "\n"
        if classification:
            return f"{ind}return {int(node.value)};\n"
        return f"{ind}return {emit.lit(node.value)};\n"
    return (
        f"{ind}if (x[{node.feature}] <= {emit.lit(node.threshold)}) {{\n"
        + _emit_tree_node(node.left, emit, classification, depth + 1)
        + f"{ind}}} else {{\n"
        + _emit_tree_node(node.right, emit, classification, depth + 1)
        + f"{ind}}}\n"
    )


def _generate_forest(model: ForestModel, emit: _Emitter):
    classification = model.task == CLASSIFICATION
    dt = scalar_dtype(emit.scalar_width)
    trees = [narrow_tree(t, dt) for t in model.trees]
    tree_ret = "int" if classification else emit.ctype
    parts = ["#include \"model.h\"\n\n"]
    for t, tree in enumerate(trees):
        body = _emit_tree_node(tree, emit, classification, 1)
        silence = "    (void)x;\n" if "x[" not in body else ""
        parts.append(
            f"static {tree_ret} tree_{t}(const float x[MODEL_NUM_FEATURES])\n{{\n"
            f"{silence}{body}}}\n\n"
        )
    if classification:
        parts.append("int predict(const float features[MODEL_NUM_FEATURES])\n{\n")
        parts.append(f"    int votes[{model.n_classes}] = {{0}};\n")
        for t in range(len(trees)):
            parts.append(f"    votes[tree_{t}(features)] += 1;\n")
        parts.append(
            "    int best = 0;\n"
            f"    for (int i = 1; i < {model.n_classes}; ++i) {{\n"
            "        if (votes[i] > votes[best]) {\n"
            "            best = i;\n"
            "        }\n"
            "    }\n"
            "    return best;\n}\n"
        )
    elif len(trees) == 1:
        parts.append(
            "float predict(const float features[MODEL_NUM_FEATURES])\n{\n"
            "    return tree_0(features);\n}\n"
        )
    else:
        parts.append("float predict(const float features[MODEL_NUM_FEATURES])\n{\n")
        parts.append(f"    {emit.ctype} acc = {emit.raw(0.0)};\n")
        for t in range(len(trees)):
            parts.append(f"    acc += tree_{t}(features);\n")
        parts.append(f"    return acc / {emit.raw(float(len(trees)))};\n}}\n")
    return "".join(parts), {}


# --- pairwise linear classifiers ---------------------------------------------

def _generate_svm(model: SvmModel, emit: _Emitter):
    p = narrow_svm(model, emit.scalar_width)
    d = model.n_features
    parts = ["#include \"model.h\"\n\n"]
    if model.task != CLASSIFICATION:
        parts.append(emit.const_vector("plane_weights", p.weights[0]))
        parts.append(emit.const_scalar("plane_bias", p.biases[0]))
        parts.append(
            "\nfloat predict(const float features[MODEL_NUM_FEATURES])\n{\n"
            f"    {emit.ctype} acc = plane_bias;\n"
            f"    for (int k = 0; k < {d}; ++k) {{\n"
            "        acc += plane_weights[k] * features[k];\n"
            "    }\n"
            "    return acc;\n}\n"
        )
        return "".join(parts), {"weight_constants": d, "bias_constants": 1}
    n = model.n_classes
    n_pairs = len(p.pairs)
    parts.append(emit.const_matrix("plane_weights", p.weights))
    parts.append(emit.const_vector("plane_bias", p.biases))
    parts.append(
        "\nint predict(const float features[MODEL_NUM_FEATURES])\n{\n"
        f"    int votes[{n}] = {{0}};\n"
        "    int pair = 0;\n"
        f"    for (int a = 0; a < {n - 1}; ++a) {{\n"
        f"        for (int b = a + 1; b < {n}; ++b) {{\n"
        f"            {emit.ctype} acc = plane_bias[pair];\n"
        f"            for (int k = 0; k < {d}; ++k) {{\n"
        "                acc += plane_weights[pair][k] * features[k];\n"
        "            }\n"
        f"            votes[acc >= {emit.raw(0.0)} ? a : b] += 1;\n"
        "            pair += 1;\n"
        "        }\n"
        "    }\n"
        "    int best = 0;\n"
        f"    for (int i = 1; i < {n}; ++i) {{\n"
        "        if (votes[i] > votes[best]) {\n"
        "            best = i;\n"
        "        }\n"
        "    }\n"
        "    return best;\n}\n"
    )
    return "".join(parts), {"weight_constants": n_pairs * d,
                            "bias_constants": n_pairs}


def generate(model: TrainedModelIR, scalar_width: int = 4,
             inline_normalization: bool = True,
             feature_names=None) -> GeneratedSource:
    """Lower a trained model to C source plus a manifest.

    Generation is a pure function of its arguments: the same model and
    options produce byte-identical text.
    """
    if model.n_features < 1:
        raise CodegenError("model has no input features")
    scalar_dtype(scalar_width)  # validates the width
    emit = _Emitter(scalar_width)
    banner = "/* Generated model implementation. Do not edit. */\n"
    if isinstance(model, AnnModel):
        body, extras = _generate_ann(model, emit, inline_normalization)
    elif isinstance(model, ForestModel):
        body, extras = _generate_forest(model, emit)
    elif isinstance(model, SvmModel):
        body, extras = _generate_svm(model, emit)
    else:
        raise CodegenError(f"cannot generate code for {type(model).__name__}")
    classification = model.task == CLASSIFICATION
    if feature_names is None:
        feature_names = [f"f{i}" for i in range(model.n_features)]
    manifest = {
        "family": model.family,
        "task": model.task,
        "n_features": model.n_features,
        "n_classes": model.n_classes if classification else None,
        "entry_point": "predict",
        "returns": "int" if classification else "float",
        "scalar_width": scalar_width,
        "scalar_type": emit.ctype,
        "scalar_constants": emit.count,
        "normalization_inlined": extras.get("normalization_inlined", False),
        "normalization_constants": extras.get("normalization_constants", 0),
        "feature_order": list(feature_names),
    }
    if "weight_constants" in extras:
        manifest["weight_constants"] = extras["weight_constants"]
        manifest["bias_constants"] = extras["bias_constants"]
    return GeneratedSource(banner + body, _header(model, scalar_width), manifest)


# --- harness and probe -------------------------------------------------------

def _load_template() -> str:
    return (resources.files("mcuml.codegen") / "templates" / "harness.c").read_text()


def generate_replay_harness(gs: GeneratedSource, mode: str = REPLAY) -> str:
    """Splice the static harness template for the given generated model.

    Replay mode reads feature rows from stdin and prints one prediction
    per line; timing mode runs a fixed number of predictions over
    deterministic in-source inputs and prints nanoseconds per prediction.
    """
    if mode not in (REPLAY, TIMING):
        raise CodegenError(f"unknown harness mode {mode!r}")
    classification = gs.manifest["returns"] == "int"
    decl = "\n".join([
        f"typedef {'int' if classification else 'float'} pred_t;",
        f"#define PREDICT_CLASSIFICATION {1 if classification else 0}",
        f"{'int' if classification else 'float'} predict(const float features[NUM_FEATURES]);",
    ])
    text = _load_template()
    for marker, value in (
        ("{{NUM_FEATURES}}", str(gs.n_features)),
        ("{{MODE}}", mode.upper()),
        ("{{PREDICT_DECL}}", decl),
    ):
        if marker not in text:
            raise CodegenError(f"harness template is missing splice point {marker}")
        text = text.replace(marker, value)
    return text


def emit_size_probe(gs: GeneratedSource) -> str:
    """Minimal main() that links the model, for footprint measurement.

    Avoids stdio so the measured image is dominated by the model itself.
    """
    classification = gs.manifest["returns"] == "int"
    result = "(float)predict(features)" if classification else "predict(features)"
    return (
        "/* Size probe: links the generated model without I/O. */\n"
        "#include \"model.h\"\n\n"
        "static volatile float sink;\n\n"
        "int main(void)\n{\n"
        "    float features[MODEL_NUM_FEATURES];\n"
        "    for (int i = 0; i < MODEL_NUM_FEATURES; ++i) {\n"
        "        features[i] = (float)i;\n"
        "    }\n"
        f"    sink = {result};\n"
        "    return sink > 0.0f ? 0 : 1;\n"
        "}\n"
    )
