"""Loading, validation and persistence of posterior sample sets.

A sample set is a CSV file whose header names the parameters followed by a
mandatory ``log_unnorm_posterior`` column; the companion metadata JSON
declares the rectangular prior box, periodic dimensions and sharp edges.
Floats are serialized as decimal text with 17 significant digits, which
round-trips IEEE doubles losslessly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ParseError, SchemaError

LOGP_COLUMN = "log_unnorm_posterior"


@dataclass
class PriorMetadata:
    """Rectangular prior bounds plus periodicity / sharp-edge declarations."""

    lower: np.ndarray
    upper: np.ndarray
    names: list[str]
    periodic: list[tuple[int, float]] = field(default_factory=list)
    sharp_edges: list[tuple[int, str]] = field(default_factory=list)

    def __post_init__(self):
        self.lower = np.asarray(self.lower, dtype=np.float64)
        self.upper = np.asarray(self.upper, dtype=np.float64)
        d = self.dim
        if self.lower.shape != (d,) or self.upper.shape != (d,):
            raise SchemaError("prior bound length does not match dimension")
        if not np.all(self.lower < self.upper):
            raise SchemaError("prior requires lower < upper componentwise")
        periodic_dims = set()
        for dim, period in self.periodic:
            if not 0 <= dim < d:
                raise DomainError(f"periodic dim {dim} out of range for d={d}")
            if not period > 0:
                raise SchemaError(f"period for dim {dim} must be positive")
            periodic_dims.add(dim)
        for dim, side in self.sharp_edges:
            if not 0 <= dim < d:
                raise DomainError(f"sharp edge dim {dim} out of range for d={d}")
            if side not in ("lower", "upper"):
                raise SchemaError(f"sharp edge side must be lower/upper, got {side!r}")
            if dim in periodic_dims:
                raise SchemaError(f"dim {dim} cannot be both periodic and sharp")

    @property
    def dim(self) -> int:
        return len(self.names)

    def to_dict(self) -> dict:
        return {
            "dim": self.dim,
            "names": list(self.names),
            "prior": {"lower": self.lower.tolist(), "upper": self.upper.tolist()},
            "periodic": [{"dim": d, "period": p} for d, p in self.periodic],
            "sharp_edges": [{"dim": d, "side": s} for d, s in self.sharp_edges],
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "PriorMetadata":
        try:
            d = int(obj["dim"])
            names = list(obj["names"])
            lower = obj["prior"]["lower"]
            upper = obj["prior"]["upper"]
        except (KeyError, TypeError) as exc:
            raise SchemaError(f"metadata missing required key: {exc}") from exc
        if len(names) != d:
            raise SchemaError(f"metadata names length {len(names)} != dim {d}")
        periodic = [(int(e["dim"]), float(e["period"])) for e in obj.get("periodic", [])]
        sharp = [(int(e["dim"]), str(e["side"])) for e in obj.get("sharp_edges", [])]
        return cls(lower=lower, upper=upper, names=names,
                   periodic=periodic, sharp_edges=sharp)


@dataclass
class SampleSet:
    """N x d parameter matrix plus per-sample unnormalized log-posterior."""

    params: np.ndarray
    log_p_hat: np.ndarray
    names: list[str]

    def __post_init__(self):
        self.params = np.asarray(self.params, dtype=np.float64)
        self.log_p_hat = np.asarray(self.log_p_hat, dtype=np.float64)
        if self.params.ndim != 2:
            raise SchemaError("params must be an N x d matrix")
        n, d = self.params.shape
        if n < 2:
            raise SchemaError(f"a sample set needs N >= 2, got N={n}")
        if len(self.names) != d:
            raise SchemaError(f"{len(self.names)} names for d={d} columns")
        if self.log_p_hat.shape != (n,):
            raise SchemaError("log_p_hat length does not match sample count")
        if not np.all(np.isfinite(self.params)):
            raise SchemaError("non-finite entries in params")
        if not np.all(np.isfinite(self.log_p_hat)):
            raise SchemaError("non-finite entries in log_p_hat")

    @property
    def n(self) -> int:
        return self.params.shape[0]

    @property
    def dim(self) -> int:
        return self.params.shape[1]

    def subset(self, idx: np.ndarray) -> "SampleSet":
        return SampleSet(self.params[idx], self.log_p_hat[idx], list(self.names))

    def with_shift(self, shift: float) -> "SampleSet":
        """Copy with a constant added to every log_p_hat."""
        return SampleSet(self.params.copy(), self.log_p_hat + shift, list(self.names))


def _fmt(x: float) -> str:
    return format(x, ".17g")


def load_sample_set(samples_path, metadata_path) -> tuple[SampleSet, PriorMetadata]:
    """Load and cross-validate a samples CSV and its metadata JSON."""
    with open(metadata_path, "r", encoding="utf-8") as fh:
        try:
            meta = PriorMetadata.from_dict(json.load(fh))
        except json.JSONDecodeError as exc:
            raise ParseError(f"{metadata_path}: invalid JSON: {exc}") from exc

    params_rows, logp_rows = [], []
    with open(samples_path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if not header:
            raise ParseError(f"{samples_path}: empty file, header row required")
        cols = header.split(",")
        if cols[-1] != LOGP_COLUMN:
            raise SchemaError(
                f"{samples_path}: last column must be {LOGP_COLUMN!r}, got {cols[-1]!r}")
        if cols[:-1] != list(meta.names):
            raise SchemaError(
                f"{samples_path}: header names {cols[:-1]} do not match metadata "
                f"names {list(meta.names)}")
        d = meta.dim
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            if len(fields) != d + 1:
                raise SchemaError(
                    f"{samples_path}:{lineno}: expected {d + 1} fields, got {len(fields)}")
            try:
                row = [float(f) for f in fields]
            except ValueError as exc:
                raise ParseError(f"{samples_path}:{lineno}: {exc}") from exc
            params_rows.append(row[:-1])
            logp_rows.append(row[-1])

    if len(params_rows) < 2:
        raise SchemaError(f"{samples_path}: a sample set needs N >= 2")
    sample_set = SampleSet(np.array(params_rows), np.array(logp_rows), list(meta.names))
    below = sample_set.params < meta.lower
    above = sample_set.params > meta.upper
    if below.any() or above.any():
        bad = int(np.argmax((below | above).any(axis=1)))
        raise DomainError(
            f"{samples_path}: sample row {bad} lies outside the prior box")
    return sample_set, meta


def write_sample_set(sample_set: SampleSet, meta: PriorMetadata,
                     samples_path, metadata_path=None) -> None:
    """Persist a sample set; the inverse of load_sample_set."""
    if sample_set.dim != meta.dim:
        raise SchemaError("sample set and metadata dimension disagree")
    with open(samples_path, "w", encoding="utf-8") as fh:
        fh.write(",".join(list(sample_set.names) + [LOGP_COLUMN]) + "\n")
        for row, lp in zip(sample_set.params, sample_set.log_p_hat):
            fh.write(",".join(_fmt(v) for v in row) + "," + _fmt(lp) + "\n")
    if metadata_path is not None:
        with open(metadata_path, "w", encoding="utf-8") as fh:
            json.dump(meta.to_dict(), fh, indent=2)
            fh.write("\n")
