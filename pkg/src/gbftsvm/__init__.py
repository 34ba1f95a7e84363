"""Granular-ball twin support vector machines with Pythagorean fuzzy ball scores.

Three linear twin classifiers share one dual solver:

* ``twsvm``   - point-input twin SVM (baseline)
* ``gbtwsvm`` - twin SVM trained on granular balls (center, radius) instead of points
* ``gbftsvm`` - ``gbtwsvm`` with each ball's dual bound scaled by its Pythagorean score

plus a cross-validation / grid-search / noise-sweep harness and Friedman-Nemenyi
rank statistics.
"""

from .box_qp import BoxQP, QPSolution, assemble_dual, solve
from .classifiers import (METHODS, TrainConfig, TwinModel, load_model, predict, predict_batch,
                          save_model, train, train_gbftsvm, train_gbtwsvm, train_twsvm)
from .dataset_io import (BUNDLED, Dataset, FoldPlan, NoiseSpec, inject_label_noise, load_bundled,
                         load_dataset, make_folds, normalize_min_max)
from .errors import (GBTSVMError, ParseError, LabelError, EmptyDataset, InvalidFoldCount,
                     SingleClassDataset, SingleClassFamily, ScoreMisalignment, NumericalFailure,
                     DegenerateModel, LengthMismatch, EmptyInput, ShapeError, ModelFormatError,
                     QPNotConverged)
from .evaluation import (GridResult, MetricReport, SignificanceReport, compute_metrics,
                         cross_validate, friedman_test, grid_search, nemenyi_cd, noise_sweep)
from .granular_ball import (BallFamily, GenerationConfig, GranularBall, Region, assign_region,
                            ball_stats, generate_balls, split_by_class)
from .scoring import PythagoreanScore, score_ball, score_family

__version__ = "0.1.0"

__all__ = [
    "GBTSVMError", "ParseError", "LabelError", "EmptyDataset", "InvalidFoldCount",
    "SingleClassDataset", "SingleClassFamily", "ScoreMisalignment", "NumericalFailure",
    "DegenerateModel", "LengthMismatch", "EmptyInput", "ShapeError", "ModelFormatError",
    "QPNotConverged",
    "BUNDLED", "BallFamily", "BoxQP", "Dataset", "FoldPlan", "GenerationConfig", "GranularBall",
    "GridResult", "METHODS", "MetricReport", "NoiseSpec", "PythagoreanScore", "QPSolution",
    "Region", "SignificanceReport", "TrainConfig", "TwinModel", "assemble_dual", "assign_region",
    "ball_stats", "compute_metrics", "cross_validate", "friedman_test", "generate_balls",
    "grid_search", "inject_label_noise", "load_bundled", "load_dataset", "load_model",
    "make_folds", "nemenyi_cd", "noise_sweep", "normalize_min_max", "predict", "predict_batch",
    "save_model", "score_ball", "score_family", "solve", "split_by_class", "train",
    "train_gbftsvm", "train_gbtwsvm", "train_twsvm",
]
