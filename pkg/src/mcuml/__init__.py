"""mcuml: train small models, compile them for small targets, keep what fits.

The pipeline: load or synthesize a tabular dataset, cross-validate
candidate model configurations, lower each trained model to portable C,
measure the real compiled footprint with the target platform's own
toolchain, and select the best model that fits the platform's memory
budgets.
"""

from .dataset import (CLASSIFICATION, Dataset, DatasetError, FoldPlan,
                      Normalization, REGRESSION, SynthSpec, fit_normalization,
                      load_csv, make_folds, synth_dataset)
from .metrics import (MetricReport, accuracy, compute_metrics, cross_validate,
                      mae, precision_recall_f1, r_squared, rmse)
from .models import (AnnConfig, M5Config, ModelConfig, RfConfig, SvmConfig,
                     TrainedModelIR, default_config, make_config,
                     model_from_json, model_to_json, predict, predict_batch,
                     train_model)
from .estimators import (MemoryEstimate, estimate_ann, estimate_model,
                         estimate_svm, estimate_tree_exact,
                         estimate_tree_worst_case)
from .codegen import (GeneratedSource, generate, generate_replay_harness,
                      predict_narrowed)
from .analysis import (CorrelationMatrix, correlation_matrix,
                       feature_importance, run_experiment,
                       run_multi_experiment)
from .toolchain import (FootprintMeasurement, HostToolchain, MockToolchain,
                        PlatformDescriptor, builtin_platform, check_budget,
                        compile_sources, load_platform, measure_footprint,
                        run_replay)
from .sweetspot import (CandidateGrid, CandidateReport, NoSweetSpot, SweetSpot,
                        enumerate_candidates, evaluate_candidate,
                        select_sweet_spot, sweep)
from .validation import (ValidationReport, cross_validated_comparison,
                         validate_generated)

__version__ = "0.1.0"
