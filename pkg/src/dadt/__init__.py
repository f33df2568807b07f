"""Domain-adaptive decision trees for tabular data under covariate shift.

Grows information-gain trees whose split and leaf probabilities blend source
frequency counts with target-domain attribute-distribution knowledge, and
ships the evaluation harness (accuracy/fairness recovery, Wasserstein shift
diagnostics, synthetic shifted populations).
"""

from .data import (
    Attribute,
    Dataset,
    Path,
    Schema,
    SplitCondition,
    load_dataset,
    schema_from_json,
    split_train_test,
)
from .errors import DadtError
from .knowledge import (
    KnowledgeRegime,
    KnowledgeStore,
    build_from_target_sample,
    load_from_crosstabs,
)
from .metrics import (
    EvalReport,
    RelativeGains,
    accuracy,
    demographic_parity,
    equal_opportunity,
    evaluate_model,
    postprocess_thresholds,
    relative_gain_acc,
    relative_gain_fairness,
    tree_shift_distance,
)
from .stats import Distribution, entropy, information_gain, wasserstein
from .tree import DecisionTree, TreeConfig, grow, predict, tree_from_json, tree_to_json

__version__ = "0.1.0"

__all__ = [
    "Attribute", "Dataset", "Path", "Schema", "SplitCondition",
    "load_dataset", "schema_from_json", "split_train_test",
    "DadtError",
    "KnowledgeRegime", "KnowledgeStore", "build_from_target_sample",
    "load_from_crosstabs",
    "EvalReport", "RelativeGains", "accuracy", "demographic_parity",
    "equal_opportunity", "evaluate_model", "postprocess_thresholds",
    "relative_gain_acc", "relative_gain_fairness", "tree_shift_distance",
    "Distribution", "entropy", "information_gain", "wasserstein",
    "DecisionTree", "TreeConfig", "grow", "predict",
    "tree_from_json", "tree_to_json",
    "__version__",
]
