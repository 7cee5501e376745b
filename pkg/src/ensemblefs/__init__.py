"""Two-round ensemble feature selection for network anomaly detection.

Round 1 drops highly correlated numeric features; round 2 runs four
elimination selectors (RFE, SBS, chi-square univariate, forest Gini
importance) down to a single feature each, and Union / Intersection /
Quorum combine their surviving sets at every iteration.
"""

__version__ = "0.1.0"

from .dataset import (Dataset, FeatureDescriptor, FoldPlan, load_csv, normalize_minmax,  # noqa: F401
                      one_hot_encode, read_schema, stratified_kfold, synth_generate)
from .ensemble import (EnsembleTrajectory, Heuristic, augment_with_onehot, build_trajectory,  # noqa: F401
                       combine)
from .errors import ConfigError, DataError, EnsembleFSError, StageError  # noqa: F401
from .learners import (ConfusionMatrix, ForestConfig, LogRegConfig, confusion, gini_impurity,  # noqa: F401
                       predict, train_logreg, train_random_forest)
from .scoring import Metrics, cross_val_score, evaluate_candidate, f1_score  # noqa: F401
from .selectors import (CorrelationReport, EliminationTrace, chi_square_score,  # noqa: F401
                        correlation_prefilter, importance_trace, pearson_corr, rfe_trace, sbs_trace,
                        univariate_trace)
