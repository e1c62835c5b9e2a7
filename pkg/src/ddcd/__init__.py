"""Causal structure learning with a denoising objective and a k-hop acyclicity constraint."""
from .acyclicity import AcyclicityResult, KHopSchedule, h_exponential, h_khop, k_at_iteration
from .diffusion import DiffusionBatch, NoiseSchedule, build_schedule, perturb, sample_timesteps
from .evaluation import (BenchCell, EvalReport, compute_metrics, grid_from_dict, run_benchmark, skeleton_tpr,
                         threshold_edges)
from .exceptions import NumericalError, ValidationError
from .graph_synth import (Dataset, GraphSpec, GroundTruth, SemSpec, break_cycles, gen_dag, is_dag, simulate_sem,
                          topological_sort)
from .linear_model import denoising_loss_linear, fit_linear, theorem1_identity
from .neural_models import (NonlinearModel, ScalarMLP, SmoothModel, fit_nonlinear, fit_smooth, nonlinear_loss,
                            smooth_loss, theorem2_noise_check)
from .optimizer import AdamState, TrainConfig, adam_step, bootstrap_batch, dag_penalty, default_config

__version__ = "0.1.0"

__all__ = [
    "AcyclicityResult", "KHopSchedule", "h_exponential", "h_khop", "k_at_iteration",
    "DiffusionBatch", "NoiseSchedule", "build_schedule", "perturb", "sample_timesteps",
    "BenchCell", "EvalReport", "compute_metrics", "grid_from_dict", "run_benchmark", "skeleton_tpr",
    "threshold_edges",
    "NumericalError", "ValidationError",
    "Dataset", "GraphSpec", "GroundTruth", "SemSpec", "break_cycles", "gen_dag", "is_dag", "simulate_sem",
    "topological_sort",
    "denoising_loss_linear", "fit_linear", "theorem1_identity",
    "NonlinearModel", "ScalarMLP", "SmoothModel", "fit_nonlinear", "fit_smooth", "nonlinear_loss", "smooth_loss",
    "theorem2_noise_check",
    "AdamState", "TrainConfig", "adam_step", "bootstrap_batch", "dag_penalty", "default_config",
]
