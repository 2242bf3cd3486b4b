"""End-to-end estimation pipeline: preprocess -> train -> extract.

The run configuration is a flat, JSON-serializable record; its canonical
digest is embedded in every output so a result can be reproduced from the
config alone.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass

from .errors import FlozError, SchemaError
from .evidence import estimate_evidence
from .flow import FlowConfig, default_config, high_dim_config, init_flow
from .losses import LossSchedule
from .preprocess import (center_and_whiten, reflect_sharp_edges,
                         split_train_validation, wrap_periodic)
from .sampleio import PriorMetadata, SampleSet
from .trainer import TrainerConfig, train

VERSION = "0.1.0"


@dataclass
class RunConfig:
    seed: int = 0
    preset: str = "default"  # default | high_dim
    n_blocks: int | None = None
    hidden_layers_per_block: int | None = None
    hidden_width: int | None = None
    max_epochs: int = 500
    patience: int = 200
    tolerance: float | None = None
    batch_size: int = 1000
    learning_rate: float = 1e-3
    cycle_period: int = 100
    transition: float = 0.05
    train_fraction: float = 0.8
    reflect_edges: bool = True
    wrap_periodic_dims: bool = True
    delta: float | None = None

    def __post_init__(self):
        if self.preset not in ("default", "high_dim"):
            raise SchemaError(f"unknown preset {self.preset!r}")

    @classmethod
    def from_dict(cls, obj: dict) -> "RunConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(obj) - known
        if unknown:
            raise SchemaError(f"unknown config keys: {sorted(unknown)}")
        return cls(**obj)

    def digest(self) -> str:
        canon = json.dumps(asdict(self), sort_keys=True)
        return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]

    def flow_config(self, d: int) -> FlowConfig:
        cfg = high_dim_config(d, seed=self.seed) if self.preset == "high_dim" \
            else default_config(d, seed=self.seed)
        if self.n_blocks is not None:
            cfg.n_blocks = self.n_blocks
        if self.hidden_layers_per_block is not None:
            cfg.hidden_layers_per_block = self.hidden_layers_per_block
        if self.hidden_width is not None:
            cfg.hidden_width = self.hidden_width
        return cfg

    def trainer_config(self) -> TrainerConfig:
        return TrainerConfig(max_epochs=self.max_epochs, patience=self.patience,
                             tolerance=self.tolerance, batch_size=self.batch_size,
                             learning_rate=self.learning_rate, seed=self.seed)

    def schedule(self) -> LossSchedule:
        return LossSchedule(cycle_period=self.cycle_period,
                            transition=self.transition)


def run_estimate(sample_set: SampleSet, meta: PriorMetadata,
                 config: RunConfig):
    """Full pipeline; returns (result dict, TrainingHistory)."""
    n_edges = 0
    if config.reflect_edges and meta.sharp_edges:
        n_edges = len(meta.sharp_edges)
        sample_set, meta = reflect_sharp_edges(sample_set, meta, seed=config.seed)
    if config.wrap_periodic_dims and meta.periodic:
        sample_set = wrap_periodic(sample_set, meta)
    white, ledger = center_and_whiten(sample_set, n_reflected_edges=n_edges)
    train_set, val_set = split_train_validation(
        white, config.train_fraction, seed=config.seed)

    model = init_flow(white.dim, config.flow_config(white.dim))
    model, history = train(model, train_set, val_set,
                           config.trainer_config(), config.schedule())

    estimate = estimate_evidence(model, train_set, delta=config.delta)
    result = estimate.to_dict()

    # parallel estimate on validation samples to flag overfitting
    try:
        val_est = estimate_evidence(model, val_set, delta=config.delta)
        combined = max((estimate.uncertainty ** 2 + val_est.uncertainty ** 2) ** 0.5,
                       1e-12)
        result["diagnostics"]["validation_log_evidence"] = val_est.log_z
        result["diagnostics"]["validation_uncertainty"] = val_est.uncertainty
        result["diagnostics"]["overfit_flag"] = bool(
            abs(estimate.log_z - val_est.log_z) > 2.0 * combined)
    except FlozError:
        result["diagnostics"]["validation_log_evidence"] = None

    result["ledger"] = ledger.to_dict()
    result["seed"] = config.seed
    result["config_digest"] = config.digest()
    result["config"] = asdict(config)
    result["version"] = VERSION
    result["n_epochs"] = len(history)
    result["best_epoch"] = history.best_epoch
    result["stop_reason"] = history.stop_reason
    return result, history
