"""Analytic benchmark families with ground-truth evidences and samplers.

Four families of unnormalized posteriors on a rectangular prior box:
truncated Gaussian, equal-weight mixture of five Gaussians (the 1/5 sits
inside p_hat so the analytic evidence carries it too), truncated
componentwise exponential, and the d-dimensional Rosenbrock density
exp{-sum_j [A(x_{j+1}-x_j^2)^2 + (1-x_j)^2]/B}.

Ground truth is always recomputed for the configured box: closed form
where available, adaptive 2-D quadrature otherwise, plus an independent
uniform-proposal Monte Carlo oracle for cross-checks.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.special import logsumexp, ndtr

from .errors import GeometryError, NumericalError, SchemaError
from .sampleio import PriorMetadata, SampleSet

FAMILIES = ("gaussian", "gaussian_mixture5", "exponential", "rosenbrock")

# 2-D parameter values used throughout the validation matrix
GAUSSIAN_2D_MEAN = np.array([23.0, 35.0])
GAUSSIAN_2D_COV = np.array([[299.0, 31.0], [31.0, 284.0]])
MIXTURE_2D_MEANS = np.array([[39.0, 19.0], [30.0, 38.0], [18.0, 12.0],
                             [46.0, 44.0], [28.0, 28.0]])
MIXTURE_2D_COVS = np.array([
    [[29.0, 8.0], [8.0, 118.0]],
    [[250.0, 15.0], [15.0, 171.0]],
    [[152.0, 4.0], [4.0, 32.0]],
    [[173.0, 12.0], [12.0, 107.0]],
    [[198.0, 17.0], [17.0, 468.0]],
])
EXPONENTIAL_2D_RATES = np.array([0.009057, 0.005257])
ROSENBROCK_A = 100.0
ROSENBROCK_B = 20.0


@dataclass
class BenchmarkSpec:
    family: str
    d: int
    n_samples: int
    seed: int = 0
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    # family parameters; unused ones stay None
    mean: np.ndarray | None = None
    cov: np.ndarray | None = None
    means: np.ndarray | None = None
    covs: np.ndarray | None = None
    rates: np.ndarray | None = None
    rosen_a: float = ROSENBROCK_A
    rosen_b: float = ROSENBROCK_B

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise SchemaError(f"unknown family {self.family!r}")
        if self.d < 1:
            raise SchemaError("dimension must be >= 1")
        if self.family == "rosenbrock" and self.d < 2:
            raise SchemaError("rosenbrock needs d >= 2")
        self._fill_defaults()
        self.lower = np.asarray(self.lower, dtype=np.float64)
        self.upper = np.asarray(self.upper, dtype=np.float64)
        if self.lower.shape != (self.d,) or self.upper.shape != (self.d,):
            raise SchemaError("prior bounds must have length d")
        if not np.all(self.lower < self.upper):
            raise SchemaError("prior box is degenerate")
        if self.family == "gaussian":
            self.mean = np.asarray(self.mean, dtype=np.float64)
            self.cov = np.atleast_2d(np.asarray(self.cov, dtype=np.float64))
            if not np.allclose(self.cov, self.cov.T):
                raise SchemaError("covariance must be symmetric")
            if np.linalg.eigvalsh(self.cov)[0] <= 0:
                raise SchemaError("covariance must be positive definite")
        elif self.family == "gaussian_mixture5":
            self.means = np.asarray(self.means, dtype=np.float64)
            self.covs = np.asarray(self.covs, dtype=np.float64)
            if self.means.shape != (5, self.d) or self.covs.shape != (5, self.d, self.d):
                raise SchemaError("mixture needs 5 means and covariances of dim d")
            for c in self.covs:
                if not np.allclose(c, c.T) or np.linalg.eigvalsh(c)[0] <= 0:
                    raise SchemaError("mixture covariances must be symmetric PD")
        elif self.family == "exponential":
            self.rates = np.asarray(self.rates, dtype=np.float64)
            if self.rates.shape != (self.d,) or not np.all(self.rates > 0):
                raise SchemaError("rates must be positive, length d")

    def _fill_defaults(self):
        d = self.d
        if self.family == "gaussian":
            if self.mean is None:
                if d == 2:
                    self.mean, self.cov = GAUSSIAN_2D_MEAN, GAUSSIAN_2D_COV
                else:
                    self.mean = np.full(d, 30.0)
                    self.cov = np.diag(np.linspace(40.0, 120.0, d))
            if self.lower is None:
                self.lower, self.upper = np.zeros(d), np.full(d, 60.0)
        elif self.family == "gaussian_mixture5":
            if self.means is None:
                if d != 2:
                    raise SchemaError("mixture defaults exist only for d=2")
                self.means, self.covs = MIXTURE_2D_MEANS, MIXTURE_2D_COVS
            if self.lower is None:
                self.lower, self.upper = np.zeros(d), np.full(d, 60.0)
        elif self.family == "exponential":
            if self.rates is None:
                if d == 2:
                    self.rates = EXPONENTIAL_2D_RATES
                else:
                    rng = np.random.default_rng(12345)
                    self.rates = rng.uniform(0.003, 0.012, size=d)
            if self.lower is None:
                self.lower = np.zeros(d)
                self.upper = 30.0 / np.asarray(self.rates, dtype=np.float64)
        elif self.family == "rosenbrock":
            if self.lower is None:
                self.lower, self.upper = np.full(d, -5.0), np.full(d, 10.0)

    # -- (de)serialization ------------------------------------------------

    def to_dict(self) -> dict:
        out = {"family": self.family, "d": self.d, "n_samples": self.n_samples,
               "seed": self.seed,
               "prior": {"lower": self.lower.tolist(), "upper": self.upper.tolist()}}
        if self.family == "gaussian":
            out["mean"] = self.mean.tolist()
            out["cov"] = self.cov.tolist()
        elif self.family == "gaussian_mixture5":
            out["means"] = self.means.tolist()
            out["covs"] = self.covs.tolist()
        elif self.family == "exponential":
            out["rates"] = self.rates.tolist()
        else:
            out["A"] = self.rosen_a
            out["B"] = self.rosen_b
        return out

    @classmethod
    def from_dict(cls, obj: dict) -> "BenchmarkSpec":
        try:
            family = obj["family"]
            d = int(obj["d"])
            n_samples = int(obj["n_samples"])
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"benchmark spec: {exc}") from exc
        prior = obj.get("prior") or {}
        return cls(
            family=family, d=d, n_samples=n_samples, seed=int(obj.get("seed", 0)),
            lower=prior.get("lower"), upper=prior.get("upper"),
            mean=obj.get("mean"), cov=obj.get("cov"),
            means=obj.get("means"), covs=obj.get("covs"),
            rates=obj.get("rates"),
            rosen_a=float(obj.get("A", ROSENBROCK_A)),
            rosen_b=float(obj.get("B", ROSENBROCK_B)),
        )

    @classmethod
    def from_json(cls, path) -> "BenchmarkSpec":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def metadata(self) -> PriorMetadata:
        names = [f"x{i}" for i in range(self.d)]
        sharp = [(i, "lower") for i in range(self.d)] \
            if self.family == "exponential" else []
        return PriorMetadata(lower=self.lower.copy(), upper=self.upper.copy(),
                             names=names, sharp_edges=sharp)


@dataclass
class GroundTruth:
    log_z: float | None
    method: str  # closed_form | quadrature_2d | monte_carlo_oracle | none
    oracle_error: float = 0.0

    def to_dict(self) -> dict:
        return {"log_z": self.log_z, "method": self.method,
                "oracle_error": self.oracle_error}


# -- pointwise unnormalized log-posterior ----------------------------------

def log_p_hat(spec: BenchmarkSpec, x: np.ndarray) -> np.ndarray:
    """Natural log of the unnormalized posterior; -inf outside the box."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    inside = np.all((x >= spec.lower) & (x <= spec.upper), axis=1)
    out = np.full(x.shape[0], -np.inf)
    if not inside.any():
        return out
    xi = x[inside]
    if spec.family == "gaussian":
        delta = xi - spec.mean
        sol = np.linalg.solve(spec.cov, delta.T).T
        out[inside] = -0.5 * np.sum(delta * sol, axis=1)
    elif spec.family == "gaussian_mixture5":
        comps = []
        for mu, cov in zip(spec.means, spec.covs):
            delta = xi - mu
            sol = np.linalg.solve(cov, delta.T).T
            comps.append(-0.5 * np.sum(delta * sol, axis=1))
        out[inside] = logsumexp(np.stack(comps), axis=0) - np.log(5.0)
    elif spec.family == "exponential":
        out[inside] = -xi @ spec.rates
    else:
        a, b = spec.rosen_a, spec.rosen_b
        terms = a * (xi[:, 1:] - xi[:, :-1] ** 2) ** 2 + (1.0 - xi[:, :-1]) ** 2
        out[inside] = -terms.sum(axis=1) / b
    return out


# -- ground truth ----------------------------------------------------------

def _gaussian_interval_mass_diag(mean, var, lower, upper) -> float:
    """log of prod_i P(lower_i < N(mean_i, var_i) < upper_i)."""
    s = np.sqrt(var)
    mass = ndtr((upper - mean) / s) - ndtr((lower - mean) / s)
    if np.any(mass <= 0):
        raise NumericalError("truncation mass underflow in closed form")
    return float(np.sum(np.log(mass)))


def _quad2d(f, lower, upper, inner_points=None) -> tuple[float, float]:
    """Nested adaptive quadrature of f(x0, x1) over the box."""

    def inner(x0):
        pts = None
        if inner_points is not None:
            pts = [p for p in np.atleast_1d(inner_points(x0))
                   if lower[1] < p < upper[1]]
            pts = pts or None
        val, _ = integrate.quad(lambda x1: f(x0, x1), lower[1], upper[1],
                                limit=200, points=pts)
        return val

    val, err = integrate.quad(inner, lower[0], upper[0], limit=200)
    return val, err


def analytic_log_evidence(spec: BenchmarkSpec) -> GroundTruth:
    """Closed form where tractable, 2-D quadrature otherwise."""
    d = spec.d
    if spec.family == "exponential":
        lam = spec.rates
        masses = (np.exp(-lam * spec.lower) - np.exp(-lam * spec.upper)) / lam
        return GroundTruth(float(np.sum(np.log(masses))), "closed_form")

    if spec.family == "gaussian":
        diag = np.allclose(spec.cov, np.diag(np.diag(spec.cov)))
        if diag:
            var = np.diag(spec.cov)
            lz = 0.5 * d * np.log(2 * np.pi) + 0.5 * float(np.sum(np.log(var))) \
                + _gaussian_interval_mass_diag(spec.mean, var, spec.lower, spec.upper)
            return GroundTruth(lz, "closed_form")
        if d == 2:
            f = lambda a, b: float(np.exp(log_p_hat(spec, np.array([[a, b]]))[0]))
            val, _ = _quad2d(f, spec.lower, spec.upper)
            return GroundTruth(float(np.log(val)), "quadrature_2d", 1e-8)
        return GroundTruth(None, "none")

    if spec.family == "gaussian_mixture5":
        all_diag = all(np.allclose(c, np.diag(np.diag(c))) for c in spec.covs)
        if all_diag:
            terms = []
            for mu, cov in zip(spec.means, spec.covs):
                var = np.diag(cov)
                terms.append(0.5 * d * np.log(2 * np.pi)
                             + 0.5 * float(np.sum(np.log(var)))
                             + _gaussian_interval_mass_diag(mu, var, spec.lower,
                                                            spec.upper))
            return GroundTruth(float(logsumexp(terms) - np.log(5.0)), "closed_form")
        if d == 2:
            f = lambda a, b: float(np.exp(log_p_hat(spec, np.array([[a, b]]))[0]))
            val, _ = _quad2d(f, spec.lower, spec.upper)
            return GroundTruth(float(np.log(val)), "quadrature_2d", 1e-8)
        return GroundTruth(None, "none")

    # rosenbrock
    if d == 2:
        f = lambda a, b: float(np.exp(log_p_hat(spec, np.array([[a, b]]))[0]))
        val, _ = _quad2d(f, spec.lower, spec.upper, inner_points=lambda a: a * a)
        return GroundTruth(float(np.log(val)), "quadrature_2d", 1e-8)
    return GroundTruth(None, "none")


def mc_oracle_log_evidence(spec: BenchmarkSpec, n: int, seed: int = 0) -> GroundTruth:
    """Uniform-proposal Monte Carlo estimate with a standard error."""
    rng = np.random.default_rng(seed)
    log_volume = float(np.sum(np.log(spec.upper - spec.lower)))
    # stream in chunks to bound memory at high n
    chunk = 1_000_000
    m_shift = None
    sum_w = 0.0
    sum_w2 = 0.0
    total = 0
    for start in range(0, n, chunk):
        k = min(chunk, n - start)
        x = rng.uniform(spec.lower, spec.upper, size=(k, spec.d))
        lp = log_p_hat(spec, x)
        if m_shift is None:
            m_shift = float(np.max(lp))
            if not np.isfinite(m_shift):
                raise GeometryError("all proposals carry zero mass")
        w = np.exp(lp - m_shift)
        sum_w += float(w.sum())
        sum_w2 += float((w * w).sum())
        total += k
    if sum_w <= 0:
        raise GeometryError("zero accepted mass in Monte Carlo oracle")
    mean_w = sum_w / total
    var_w = max(sum_w2 / total - mean_w ** 2, 0.0)
    se_log = float(np.sqrt(var_w / total) / mean_w)
    lz = m_shift + float(np.log(mean_w)) + log_volume
    return GroundTruth(lz, "monte_carlo_oracle", se_log)


# -- sampling ---------------------------------------------------------------

def _rejection_sample(draw, spec: BenchmarkSpec, rng) -> np.ndarray:
    """Draw until n_samples fall inside the box; guards against tiny overlap."""
    n = spec.n_samples
    kept: list[np.ndarray] = []
    kept_n = 0
    proposed = 0
    while kept_n < n:
        batch = max(n, 4096)
        x = draw(batch, rng)
        proposed += batch
        ok = np.all((x >= spec.lower) & (x <= spec.upper), axis=1)
        x = x[ok]
        kept.append(x)
        kept_n += x.shape[0]
        if proposed >= 100_000 and kept_n / proposed < 1e-4:
            raise GeometryError(
                f"rejection acceptance {kept_n / proposed:.2e} < 1e-4; the prior "
                "box barely overlaps the distribution, widen the overlap")
    return np.concatenate(kept)[:n]


def _metropolis_rosenbrock(spec: BenchmarkSpec, rng,
                           burn_in: int = 10_000, thin: int = 5,
                           return_acceptance: bool = False):
    """Seeded random-walk Metropolis with step-size adaptation in burn-in."""
    d = spec.d
    x = np.clip(np.ones(d), spec.lower, spec.upper)
    lp = float(log_p_hat(spec, x)[0])
    scale = 0.5
    accepted, window = 0, 0
    samples = np.empty((spec.n_samples, d))
    total_steps = burn_in + thin * spec.n_samples
    kept = 0
    acc_run, n_run = 0, 0
    for step in range(total_steps):
        prop = x + scale * rng.standard_normal(d)
        lp_prop = float(log_p_hat(spec, prop[None, :])[0])
        if np.log(rng.random()) < lp_prop - lp:
            x, lp = prop, lp_prop
            accepted += 1
            if step >= burn_in:
                acc_run += 1
        window += 1
        if step < burn_in and window == 200:
            rate = accepted / window
            scale *= np.exp(1.5 * (rate - 0.25))
            accepted, window = 0, 0
        if step >= burn_in:
            n_run += 1
            if (step - burn_in) % thin == thin - 1:
                samples[kept] = x
                kept += 1
                if kept == spec.n_samples:
                    break
    rate = acc_run / max(n_run, 1)
    if return_acceptance:
        return samples, rate
    return samples


def draw_samples(spec: BenchmarkSpec) -> SampleSet:
    """Seeded exact or MCMC sampling from the truncated family."""
    if spec.n_samples < 100:
        raise SchemaError("n_samples must be >= 100")
    rng = np.random.default_rng(spec.seed)

    if spec.family == "gaussian":
        chol = np.linalg.cholesky(spec.cov)
        draw = lambda k, g: spec.mean + g.standard_normal((k, spec.d)) @ chol.T
        x = _rejection_sample(draw, spec, rng)
    elif spec.family == "gaussian_mixture5":
        weights = np.array([np.sqrt(np.linalg.det(c)) for c in spec.covs])
        weights /= weights.sum()
        chols = [np.linalg.cholesky(c) for c in spec.covs]

        def draw(k, g):
            comp = g.choice(5, size=k, p=weights)
            z = g.standard_normal((k, spec.d))
            out = np.empty((k, spec.d))
            for j in range(5):
                m = comp == j
                out[m] = spec.means[j] + z[m] @ chols[j].T
            return out

        x = _rejection_sample(draw, spec, rng)
    elif spec.family == "exponential":
        u = rng.random((spec.n_samples, spec.d))
        lam = spec.rates
        span_mass = 1.0 - np.exp(-lam * (spec.upper - spec.lower))
        x = spec.lower - np.log(1.0 - u * span_mass) / lam
    else:
        x = _metropolis_rosenbrock(spec, rng)

    names = [f"x{i}" for i in range(spec.d)]
    return SampleSet(x, log_p_hat(spec, x), names)
