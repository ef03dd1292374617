"""relusurv: interpretable survival analysis with ReLU networks.

A ReLU network whose hard activation patterns define an oblique survival
tree. Training couples a survival loss (Cox partial likelihood or a
discrete likelihood-plus-ranking objective) with log-rank-test pruning of
the induced tree, yielding a model that is simultaneously a network and a
compact, statistically validated tree.
"""

from .config import (DataConfig, EvalConfig, ModelConfig, OptimConfig,
                     PruneConfig, RunConfig)
from .data import (DataError, Dataset, PreprocessSpec, RowError, SchemaError,
                   apply_preprocess, fit_preprocess, kfold, load_csv, split,
                   write_csv)
from .losses import (BaselineHazard, LossValue, TimeGrid, breslow_baseline,
                     cox_nll, deephit_loss, make_time_grid, predict_survival,
                     survival_matrix_continuous, survival_matrix_discrete)
from .network import (CompositeHead, ForwardTrace, Gradients, MomentumSgd,
                      NumericalError, ReluNetwork, backward, forward,
                      init_network, network_from_dict, network_to_dict,
                      soft_threshold_prox, sparsity)
from .simulate import SimConfig, risk_gaussian, risk_linear, simulate
from .stats import (BootstrapError, ConcordanceResult, KMCurve, LogRankResult,
                    antolini_ctd, antolini_ctd_from_matrix, bootstrap_ci,
                    chi2_sf, harrell_c, kaplan_meier, log_rank_test)
from .train import (Checkpoint, LinearCoxModel, TrainResult, ablate,
                    cross_validate, derive_seeds, evaluate_predictions,
                    fit_linear_cox, load_checkpoint, risk_scores,
                    run_evaluate, run_training, save_checkpoint, train_model)
from .tree import (PruneMask, RankTrace, ScanDecision, TreeNode, apply_prune,
                   build_pattern_matrix, covariate_importance, export_tree,
                   leaves, logrank_scan, matrix_rank, rank_trigger,
                   read_tree_json, reconstruct_tree, tree_depth)

__version__ = "0.1.0"
