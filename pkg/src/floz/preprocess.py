"""Sample preprocessing that preserves the evidence integral exactly.

Order used by the pipeline: reflect sharp edges -> wrap periodic dims ->
center and whiten.  Each step adjusts log_p_hat in place by a known
constant so the downstream estimator targets the original evidence with
no final correction; the TransformLedger records the bookkeeping.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, DegenerateGeometryError, SchemaError
from .sampleio import PriorMetadata, SampleSet

RANK_TOLERANCE = 1e-12


@dataclass
class TransformLedger:
    """Whitening transform plus the accumulated log-Jacobian correction."""

    mean: np.ndarray
    eigvecs: np.ndarray
    eigvals: np.ndarray
    n_reflected_edges: int = 0

    @property
    def log_jacobian_total(self) -> float:
        return 0.5 * float(np.sum(np.log(self.eigvals))) \
            - self.n_reflected_edges * np.log(2.0)

    def unwhiten(self, white: np.ndarray) -> np.ndarray:
        """Map whitened coordinates back to pre-whitening coordinates."""
        return white * np.sqrt(self.eigvals) @ self.eigvecs.T + self.mean

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "eigvals": self.eigvals.tolist(),
            "n_reflected_edges": self.n_reflected_edges,
            "log_jacobian_total": self.log_jacobian_total,
        }


def center_and_whiten(sample_set: SampleSet,
                      n_reflected_edges: int = 0) -> tuple[SampleSet, TransformLedger]:
    """Rotate onto covariance eigenvectors, rescale to unit variance.

    The volume element picks up a factor prod(sqrt(eigvals)), so every
    log_p_hat is shifted by +0.5*sum(log eigvals) to keep Z unchanged.
    """
    x = sample_set.params
    mean = x.mean(axis=0)
    cov = np.cov(x, rowvar=False, ddof=1)
    cov = np.atleast_2d(cov)
    eigvals, eigvecs = np.linalg.eigh(cov)
    if eigvals[-1] <= 0 or eigvals[0] < RANK_TOLERANCE * eigvals[-1]:
        raise DegenerateGeometryError(
            "sample covariance is rank deficient (min eigenvalue "
            f"{eigvals[0]:.3e} vs max {eigvals[-1]:.3e}); drop the constant "
            "direction before estimating")
    white = (x - mean) @ eigvecs / np.sqrt(eigvals)
    shift = 0.5 * float(np.sum(np.log(eigvals)))
    out = SampleSet(white, sample_set.log_p_hat + shift, list(sample_set.names))
    ledger = TransformLedger(mean=mean, eigvecs=eigvecs, eigvals=eigvals,
                             n_reflected_edges=n_reflected_edges)
    return out, ledger


def reflect_sharp_edges(sample_set: SampleSet, meta: PriorMetadata,
                        seed: int) -> tuple[SampleSet, PriorMetadata]:
    """Mirror a random half of the samples across each declared sharp edge.

    Each edge doubles the prior volume, so every log_p_hat drops by log 2
    per edge; the box is extended across the edge and the edge declaration
    is consumed.
    """
    periodic_dims = {d for d, _ in meta.periodic}
    for dim, _ in meta.sharp_edges:
        if dim in periodic_dims:
            raise ConfigurationError(f"sharp edge on periodic dim {dim}")
    if not meta.sharp_edges:
        return sample_set, meta

    rng = np.random.default_rng(seed)
    x = sample_set.params.copy()
    lower = meta.lower.copy()
    upper = meta.upper.copy()
    n_edges = 0
    for dim, side in meta.sharp_edges:
        b = lower[dim] if side == "lower" else upper[dim]
        half = rng.random(x.shape[0]) < 0.5
        x[half, dim] = 2.0 * b - x[half, dim]
        if side == "lower":
            lower[dim] = 2.0 * b - upper[dim]
        else:
            upper[dim] = 2.0 * b - lower[dim]
        n_edges += 1
    out = SampleSet(x, sample_set.log_p_hat - n_edges * np.log(2.0),
                    list(sample_set.names))
    new_meta = PriorMetadata(lower=lower, upper=upper, names=list(meta.names),
                             periodic=list(meta.periodic), sharp_edges=[])
    return out, new_meta


def wrap_periodic(sample_set: SampleSet, meta: PriorMetadata) -> SampleSet:
    """Shift periodic dims by whole periods so each marginal is unimodal.

    The branch cut is placed in the middle of the largest empty arc on the
    circle; the Jacobian is unity so log_p_hat is untouched.
    """
    if not meta.periodic:
        return sample_set
    x = sample_set.params.copy()
    for dim, period in meta.periodic:
        if not period > 0:
            raise SchemaError(f"period for dim {dim} must be positive")
        theta = np.mod(x[:, dim], period)
        order = np.argsort(theta)
        sorted_t = theta[order]
        gaps = np.diff(sorted_t)
        wrap_gap = sorted_t[0] + period - sorted_t[-1]
        if gaps.size and gaps.max() > wrap_gap:
            k = int(np.argmax(gaps))
            cut = 0.5 * (sorted_t[k] + sorted_t[k + 1])
        else:
            cut = np.mod(0.5 * (sorted_t[-1] + sorted_t[0] + period), period)
        # branch (cut - period, cut]: every sample sits below the cut
        x[:, dim] = np.mod(theta - cut, period) + cut - period
    return SampleSet(x, sample_set.log_p_hat.copy(), list(sample_set.names))


def split_train_validation(sample_set: SampleSet, fraction: float,
                           seed: int) -> tuple[SampleSet, SampleSet]:
    """Disjoint seeded partition into (train, validation)."""
    if not 0.0 < fraction < 1.0:
        raise SchemaError(f"fraction must lie in (0,1), got {fraction}")
    n = sample_set.n
    n_train = int(np.floor(fraction * n))
    if min(n_train, n - n_train) < 2:
        raise SchemaError(
            f"split of N={n} at fraction={fraction} leaves a side with < 2 samples")
    perm = np.random.default_rng(seed).permutation(n)
    return sample_set.subset(perm[:n_train]), sample_set.subset(perm[n_train:])
