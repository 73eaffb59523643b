"""C code generation for trained models plus the narrowed evaluator."""

from .generator import (CodegenError, GeneratedSource, REPLAY, TIMING,
                        emit_size_probe, float_literal, generate,
                        generate_replay_harness)
from .narrowed import (NarrowingError, narrow_ann, narrow_svm, narrow_tree,
                       predict_narrowed, scalar_dtype)

__all__ = [
    "CodegenError", "GeneratedSource", "REPLAY", "TIMING",
    "emit_size_probe", "float_literal", "generate", "generate_replay_harness",
    "NarrowingError", "narrow_ann", "narrow_svm", "narrow_tree",
    "predict_narrowed", "scalar_dtype",
]
