"""Two-stage feature selection (information-gain and random-forest filtering,
then MLP-scored recursive elimination) with preprocessing and evaluation for
flow-based intrusion detection such as UNSW-NB15."""

__version__ = "0.1.0"

from .ensemble import FeatureSubset, apply_threshold, igrf_filter, union_with_categoricals
from .forest import Forest, ForestConfig, fit_forest, rank_rf
from .info_gain import Discretizer, entropy, information_gain, rank_ig
from .metrics import EvalReport, confusion, evaluate, roc_auc, weighted_report
from .mlp import MlpConfig, MlpModel
from .rfe import MlpEvaluator, evaluate_elimination, rfe
from .tabular import EncodedMatrix, Schema, Table, load_csv, unsw_nb15_schema

__all__ = [
    "Discretizer", "EncodedMatrix", "EvalReport", "FeatureSubset", "Forest", "ForestConfig",
    "MlpConfig", "MlpEvaluator", "MlpModel", "Schema", "Table", "apply_threshold", "confusion",
    "entropy", "evaluate", "evaluate_elimination", "fit_forest", "igrf_filter",
    "information_gain", "load_csv", "rank_ig", "rank_rf", "rfe", "roc_auc",
    "union_with_categoricals", "unsw_nb15_schema", "weighted_report",
]
