"""The four training losses and the cyclic schedule mixing them.

Loss terms, in schedule order:
    l1  : cross entropy, -mean log q(x)
    l2  : log of the spread of the per-sample evidence estimates zeta
    l3a : |log mean| of pairwise zeta ratios rho
    l3b : log of the spread of the pairwise ratios

Moments of zeta and rho are formed in log space (max-shifted before
exponentiation) and standard deviations use the divisor-N convention.
Spreads are floored at SIGMA_FLOOR inside the logs, since l2/l3b are
unbounded below at the perfect-flow point where zeta is constant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import Tensor
from .errors import SchemaError
from .flow import FlowModel
from .sampleio import SampleSet

SIGMA_FLOOR = 1e-12
PAIR_LOG_CLAMP = 30.0


@dataclass
class LossSchedule:
    """Cyclic mixing rule: period in epochs and fractional transition width."""

    cycle_period: int = 100
    transition: float = 0.05

    def __post_init__(self):
        if self.cycle_period < 1:
            raise SchemaError("cycle_period must be >= 1")
        if not 0.0 < self.transition < 0.25:
            raise SchemaError("transition must lie in (0, 0.25)")


def schedule_weights(epoch: int, sched: LossSchedule) -> tuple[float, float, float, float]:
    """Weights (w1, w2, w3a, w3b) for the scheduled mixed loss at an epoch.

    The cycle visits l1 -> l2 -> l3a -> l3b, each holding sole weight for a
    fraction 0.25 - t_e of the cycle, with linear crossfades of width t_e.
    """
    if epoch < 0:
        raise SchemaError("epoch must be >= 0")
    t_e = sched.transition
    e = (epoch % sched.cycle_period) / sched.cycle_period
    alpha = min(1.0, max(0.0, (0.25 - (e % 0.25)) / t_e))
    quarter = int(e / 0.25)  # 0..3: active term l1, l2, l3a, l3b
    w = [0.0, 0.0, 0.0, 0.0]
    w[quarter] = alpha
    w[(quarter + 1) % 4] = 1.0 - alpha
    return tuple(w)


@dataclass
class ZetaBatch:
    """Per-sample log evidence estimates, kept differentiable."""

    log_zeta: Tensor

    @property
    def size(self) -> int:
        return self.log_zeta.value.shape[0]


def loss_l1(model: FlowModel, batch: SampleSet) -> Tensor:
    """Monte Carlo cross entropy between the target and the flow."""
    if batch.n < 1:
        raise SchemaError("loss_l1 needs a non-empty batch")
    return -model.log_density_t(batch.params).mean()


def compute_log_zeta(model: FlowModel, batch: SampleSet) -> ZetaBatch:
    """log zeta_i = log p_hat(x_i) - log q(x_i); constant for a perfect flow."""
    return ZetaBatch(Tensor(batch.log_p_hat) - model.log_density_t(batch.params))


def _log_std(values: Tensor, log_shift: float) -> Tensor:
    """log of the divisor-N standard deviation of exp(log-shift)-scaled
    values, floored so the result is never below log(SIGMA_FLOOR)."""
    mean = values.mean()
    second = (values * values).mean()
    var = second - mean * mean
    log_sigma = 0.5 * var.clamp_min(1e-300).log() + log_shift
    return log_sigma.clamp_min(np.log(SIGMA_FLOOR))


def loss_l2(zeta: ZetaBatch) -> Tensor:
    """log sigma of the zeta distribution over the batch."""
    if zeta.size < 2:
        raise SchemaError("loss_l2 needs a batch of size >= 2")
    shift = float(np.max(zeta.log_zeta.value))
    z = (zeta.log_zeta - shift).exp()
    return _log_std(z, shift)


def _pair_ratio_moments(zeta: ZetaBatch) -> tuple[Tensor, Tensor]:
    """Mean and mean-square of rho over all ordered pairs i != j."""
    n = zeta.size
    lz = zeta.log_zeta
    diff = lz.reshape(n, 1) + (-1.0) * lz.reshape(1, n)
    diff = diff.clamp_min(-PAIR_LOG_CLAMP).clamp_max(PAIR_LOG_CLAMP)
    rho = diff.exp()
    off = 1.0 - np.eye(n)
    n_pairs = n * (n - 1)
    mean = (rho * off).sum() * (1.0 / n_pairs)
    second = (rho * rho * off).sum() * (1.0 / n_pairs)
    return mean, second


def loss_l3a(zeta: ZetaBatch) -> Tensor:
    """|log mean rho| over ordered pairs; zero iff the pair ratios balance."""
    if zeta.size < 2:
        raise SchemaError("loss_l3a needs a batch of size >= 2")
    mean, _ = _pair_ratio_moments(zeta)
    return mean.log().abs()


def loss_l3b(zeta: ZetaBatch) -> Tensor:
    """log sigma of rho over ordered pairs."""
    if zeta.size < 2:
        raise SchemaError("loss_l3b needs a batch of size >= 2")
    mean, second = _pair_ratio_moments(zeta)
    var = second - mean * mean
    return 0.5 * var.clamp_min(SIGMA_FLOOR ** 2).log()
