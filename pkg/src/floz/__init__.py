"""floz: Bayesian evidence estimation from posterior samples.

Train a masked autoregressive flow on existing posterior samples (with
their unnormalized log-posterior values) under a four-term cyclic loss,
then read the evidence off the per-sample density ratios inside the
latent trust ball.
"""

from .autodiff import AdamState, Parameter, Tensor, adam_step, evaluate_with_gradients
from .benchmarks import (BenchmarkSpec, GroundTruth, analytic_log_evidence,
                         draw_samples, log_p_hat, mc_oracle_log_evidence)
from .evidence import EvidenceEstimate, estimate_evidence
from .flow import (FlowConfig, FlowModel, default_config, high_dim_config,
                   init_flow)
from .losses import (LossSchedule, ZetaBatch, compute_log_zeta, loss_l1,
                     loss_l2, loss_l3a, loss_l3b, schedule_weights)
from .pipeline import RunConfig, run_estimate
from .preprocess import (TransformLedger, center_and_whiten,
                         reflect_sharp_edges, split_train_validation,
                         wrap_periodic)
from .sampleio import PriorMetadata, SampleSet, load_sample_set, write_sample_set
from .trainer import TrainerConfig, TrainingHistory, train

__version__ = "0.1.0"

__all__ = [
    "AdamState", "Parameter", "Tensor", "adam_step", "evaluate_with_gradients",
    "BenchmarkSpec", "GroundTruth", "analytic_log_evidence", "draw_samples",
    "log_p_hat", "mc_oracle_log_evidence",
    "EvidenceEstimate", "estimate_evidence",
    "FlowConfig", "FlowModel", "default_config", "high_dim_config", "init_flow",
    "LossSchedule", "ZetaBatch", "compute_log_zeta", "loss_l1", "loss_l2",
    "loss_l3a", "loss_l3b", "schedule_weights",
    "RunConfig", "run_estimate",
    "TransformLedger", "center_and_whiten", "reflect_sharp_edges",
    "split_train_validation", "wrap_periodic",
    "PriorMetadata", "SampleSet", "load_sample_set", "write_sample_set",
    "TrainerConfig", "TrainingHistory", "train",
]
