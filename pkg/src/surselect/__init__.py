"""Posterior summary variable selection for seemingly unrelated regressions
with random predictors."""

__version__ = "0.1.0"

from .model_core import Dataset, JointParams, PosteriorDraw, block_covariance, sample_predictive
from .gibbs_ssvs import SsvsConfig, run_chain
from .factor_x import FactorConfig
from .dss_summary import MomentSet, LassoProblem, compute_moments, build_lasso_problem, unpenalized_summary
from .path_solver import SummaryPath, lambda_grid, solve_lasso, solve_path
from .loss_gap import LossGapResult, delta_samples, loss_at, select_model
from .synthetic import generate_synthetic
