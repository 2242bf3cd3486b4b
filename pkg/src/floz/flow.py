"""Masked autoregressive flow over a standard-normal base.

Each block is a MADE-style conditioner emitting a per-dimension shift and
log-scale, where the outputs for coordinate i depend only on coordinates
with index < i.  The inverse direction (data -> latent) is a single
vectorized pass, so density evaluation and training are batch-parallel;
generation is sequential in the dimension.  Blocks are separated by a
fixed order-reversing permutation.

Log-scales are soft-clamped to [-ALPHA_CAP, ALPHA_CAP] through a scaled
tanh to keep determinants bounded early in training.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .autodiff import Parameter, Tensor
from .errors import NumericalError, SchemaError

ALPHA_CAP = 7.0
LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass
class FlowConfig:
    n_blocks: int = 8
    hidden_layers_per_block: int = 2
    hidden_width: int = 32
    seed: int = 0

    def __post_init__(self):
        if min(self.n_blocks, self.hidden_layers_per_block, self.hidden_width) < 1:
            raise SchemaError("flow config counts must all be >= 1")


def default_config(d: int, seed: int = 0) -> FlowConfig:
    return FlowConfig(n_blocks=8, hidden_layers_per_block=2,
                      hidden_width=max(32, 2 * d), seed=seed)


def high_dim_config(d: int, seed: int = 0) -> FlowConfig:
    """Preset for d >= 10: shallow blocks, 11 hidden layers in total for
    d = 10 and 20 for larger d."""
    n_blocks = 11 if d <= 10 else 20
    return FlowConfig(n_blocks=n_blocks, hidden_layers_per_block=1,
                      hidden_width=max(32, 2 * d), seed=seed)


class MaskedBlock:
    """One autoregressive block: masked hidden stack + shift/log-scale heads."""

    def __init__(self, d: int, n_hidden: int, width: int, rng: np.random.Generator):
        self.d = d
        degrees_in = np.arange(1, d + 1)
        if d > 1:
            degrees_h = (np.arange(width) % (d - 1)) + 1
        else:
            degrees_h = np.zeros(width, dtype=int)

        self.masks: list[np.ndarray] = []
        self.weights: list[Parameter] = []
        self.biases: list[Parameter] = []
        prev = degrees_in
        n_in = d
        for _ in range(n_hidden):
            mask = (degrees_h[None, :] >= prev[:, None]).astype(np.float64)
            w = rng.normal(size=(n_in, width)) / np.sqrt(max(n_in, 1))
            self.weights.append(Parameter(w))
            self.biases.append(Parameter(np.zeros(width)))
            self.masks.append(mask)
            prev = degrees_h
            n_in = width
        # output heads start at zero so the block is the identity map
        self.out_mask = (degrees_in[None, :] > prev[:, None]).astype(np.float64)
        self.w_shift = Parameter(np.zeros((n_in, d)))
        self.b_shift = Parameter(np.zeros(d))
        self.w_logscale = Parameter(np.zeros((n_in, d)))
        self.b_logscale = Parameter(np.zeros(d))

    def parameters(self) -> list[Parameter]:
        params = []
        for w, b in zip(self.weights, self.biases):
            params.extend([w, b])
        params.extend([self.w_shift, self.b_shift,
                       self.w_logscale, self.b_logscale])
        return params

    def conditioner(self, x: Tensor) -> tuple[Tensor, Tensor]:
        h = x
        for w, b, mask in zip(self.weights, self.biases, self.masks):
            h = (h.masked_matmul(w, mask) + b).tanh()
        shift = h.masked_matmul(self.w_shift, self.out_mask) + self.b_shift
        raw = h.masked_matmul(self.w_logscale, self.out_mask) + self.b_logscale
        logscale = (raw * (1.0 / ALPHA_CAP)).tanh() * ALPHA_CAP
        return shift, logscale

    def conditioner_np(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        h = x
        for w, b, mask in zip(self.weights, self.biases, self.masks):
            h = np.tanh(h @ (w.value * mask) + b.value)
        shift = h @ (self.w_shift.value * self.out_mask) + self.b_shift.value
        raw = h @ (self.w_logscale.value * self.out_mask) + self.b_logscale.value
        return shift, np.tanh(raw / ALPHA_CAP) * ALPHA_CAP

    def inverse(self, x: Tensor) -> tuple[Tensor, Tensor]:
        """Data -> latent in one pass; returns (y, per-sample log-det)."""
        shift, logscale = self.conditioner(x)
        y = (x - shift) * (-logscale).exp()
        return y, -logscale.sum(axis=1)

    def forward_np(self, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Latent -> data, one dimension per pass; returns (x, log-det)."""
        x = np.zeros_like(y)
        logscale = np.zeros_like(y)
        for i in range(self.d):
            shift, logscale = self.conditioner_np(x)
            x[:, i] = y[:, i] * np.exp(logscale[:, i]) + shift[:, i]
        return x, logscale.sum(axis=1)


class FlowModel:
    """Stack of masked autoregressive blocks with reversals in between."""

    def __init__(self, d: int, config: FlowConfig):
        if d < 1:
            raise SchemaError(f"flow dimension must be >= 1, got {d}")
        self.d = d
        self.config = config
        rng = np.random.default_rng(config.seed)
        self.blocks = [
            MaskedBlock(d, config.hidden_layers_per_block, config.hidden_width, rng)
            for _ in range(config.n_blocks)
        ]
        self._rev = np.arange(d)[::-1].copy()

    def parameters(self) -> list[Parameter]:
        params = []
        for block in self.blocks:
            params.extend(block.parameters())
        return params

    def get_param_values(self) -> list[np.ndarray]:
        return [p.value.copy() for p in self.parameters()]

    def set_param_values(self, values: list[np.ndarray]) -> None:
        for p, v in zip(self.parameters(), values):
            p.value = np.asarray(v, dtype=np.float64).reshape(p.value.shape)

    # -- maps --------------------------------------------------------------

    def inverse_map_t(self, x) -> tuple[Tensor, Tensor]:
        h = x if isinstance(x, Tensor) else Tensor(np.atleast_2d(x))
        log_det = None
        for block in self.blocks:
            h = h.take_cols(self._rev)
            h, ld = block.inverse(h)
            log_det = ld if log_det is None else log_det + ld
        return h, log_det

    def inverse_map(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        # inference path: plain numpy, no graph, so large sample sets are
        # bounded by a few transient (n, width) arrays
        h = np.array(np.atleast_2d(x), dtype=np.float64)
        log_det = np.zeros(h.shape[0])
        for block in self.blocks:
            h = h[:, self._rev]
            shift, logscale = block.conditioner_np(h)
            h = (h - shift) * np.exp(-logscale)
            log_det -= logscale.sum(axis=1)
        if not (np.all(np.isfinite(h)) and np.all(np.isfinite(log_det))):
            raise NumericalError("non-finite output in inverse_map")
        return h, log_det

    def forward_map(self, y: np.ndarray, return_log_det: bool = False):
        x = np.array(np.atleast_2d(y), dtype=np.float64)
        log_det = np.zeros(x.shape[0])
        for block in reversed(self.blocks):
            x, ld = block.forward_np(x)
            log_det += ld
            x = x[:, self._rev]
        if not np.all(np.isfinite(x)):
            raise NumericalError("non-finite output in forward_map")
        if return_log_det:
            return x, log_det
        return x

    def log_density_t(self, x) -> Tensor:
        y, log_det = self.inverse_map_t(x)
        log_n = -0.5 * self.d * LOG_2PI + (-0.5) * (y * y).sum(axis=1)
        return log_n + log_det

    def log_density(self, x: np.ndarray) -> np.ndarray:
        y, log_det = self.inverse_map(x)
        out = -0.5 * self.d * LOG_2PI - 0.5 * (y * y).sum(axis=1) + log_det
        if not np.all(np.isfinite(out)):
            raise NumericalError("non-finite log-density")
        return out

    # -- persistence ---------------------------------------------------------

    def save(self, path) -> None:
        header = {
            "d": self.d,
            "config": {
                "n_blocks": self.config.n_blocks,
                "hidden_layers_per_block": self.config.hidden_layers_per_block,
                "hidden_width": self.config.hidden_width,
                "seed": self.config.seed,
            },
        }
        flat = np.concatenate([p.value.ravel() for p in self.parameters()])
        with open(path, "wb") as fh:
            fh.write(json.dumps(header).encode("utf-8") + b"\n")
            fh.write(flat.astype("<f8").tobytes())

    @classmethod
    def load(cls, path) -> "FlowModel":
        with open(path, "rb") as fh:
            header = json.loads(fh.readline().decode("utf-8"))
            flat = np.frombuffer(fh.read(), dtype="<f8")
        model = cls(header["d"], FlowConfig(**header["config"]))
        offset = 0
        values = []
        for p in model.parameters():
            n = p.value.size
            values.append(flat[offset:offset + n].reshape(p.value.shape))
            offset += n
        if offset != flat.size:
            raise SchemaError("checkpoint parameter count mismatch")
        model.set_param_values(values)
        return model


def init_flow(d: int, config: FlowConfig) -> FlowModel:
    """Fresh near-identity flow: log q(x) equals the standard-normal
    log-density at initialization."""
    return FlowModel(d, config)
