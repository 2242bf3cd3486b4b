"""End-to-end acceptance criteria.

Each test prints one [PASS]/[FAIL] line.  The full file trains real
flows on every benchmark family (including d=10 and d=50) and takes on
the order of an hour on a desktop CPU; run with ``pytest -v -s``.
"""

import sys

import numpy as np
import pytest

from floz.autodiff import evaluate_with_gradients
from floz.benchmarks import (BenchmarkSpec, analytic_log_evidence,
                             draw_samples, mc_oracle_log_evidence)
from floz.evidence import estimate_evidence
from floz.flow import ALPHA_CAP, FlowConfig, default_config, init_flow
from floz.losses import (SIGMA_FLOOR, LossSchedule, ZetaBatch, loss_l2,
                         loss_l3a, loss_l3b, schedule_weights)
from floz.pipeline import RunConfig, run_estimate
from floz.preprocess import (center_and_whiten, reflect_sharp_edges,
                             wrap_periodic)
from floz.sampleio import PriorMetadata, SampleSet
from floz.autodiff import Tensor


@pytest.fixture
def check(capsys):
    """Print one [PASS]/[FAIL] line per criterion, visible even when
    pytest captures output, then assert."""

    def _check(tag, ok, detail):
        with capsys.disabled():
            print(f"[{'PASS' if ok else 'FAIL'}] {tag}: {detail}", flush=True)
        assert ok, f"{tag}: {detail}"

    return _check


def run_benchmark(spec, config):
    samples = draw_samples(spec)
    result, _ = run_estimate(samples, spec.metadata(), config)
    return result


def benchmark_error(spec, config):
    truth = analytic_log_evidence(spec)
    result = run_benchmark(spec, config)
    return result["log_evidence"] - truth.log_z, result


def test_criterion_01_exact_flow_identity(check):
    mean = np.array([1.0, -2.0, 0.5])
    sigma = np.array([0.8, 2.5, 1.3])
    model = init_flow(3, FlowConfig(n_blocks=1, hidden_layers_per_block=1,
                                    hidden_width=4, seed=0))
    block = model.blocks[0]
    block.b_shift.value = mean[::-1].copy()
    block.b_logscale.value = ALPHA_CAP * np.arctanh(np.log(sigma[::-1]) / ALPHA_CAP)
    rng = np.random.default_rng(0)
    x = mean + sigma * rng.normal(size=(2000, 3))
    log_c = 4.2
    lp = (-0.5 * ((x - mean) / sigma) ** 2 - 0.5 * np.log(2 * np.pi)
          - np.log(sigma)).sum(axis=1) + log_c
    est = estimate_evidence(model, SampleSet(x, lp, ["a", "b", "c"]))
    err = abs(est.log_z - log_c)
    check("criterion 1 (exact-flow identity)",
          err < 1e-6 and est.uncertainty < 1e-6,
          f"|error|={err:.2e}, uncertainty={est.uncertainty:.2e}")


def test_criterion_02_gaussian_2d(check):
    spec = BenchmarkSpec(family="gaussian", d=2, n_samples=10_000, seed=0)
    err, result = benchmark_error(spec, RunConfig(seed=0))
    tol = max(0.1, 3 * result["uncertainty"])
    check("criterion 2 (2-D truncated gaussian)", abs(err) <= tol,
          f"error={err:+.4f}, tolerance={tol:.4f}, "
          f"uncertainty={result['uncertainty']:.4f}")


def test_criterion_03_gaussian_mixture_2d(check):
    spec = BenchmarkSpec(family="gaussian_mixture5", d=2, n_samples=10_000,
                         seed=0)
    err, result = benchmark_error(spec, RunConfig(seed=0))
    tol = max(0.1, 3 * result["uncertainty"])
    check("criterion 3 (2-D five-gaussian mixture)", abs(err) <= tol,
          f"error={err:+.4f}, tolerance={tol:.4f}, "
          f"uncertainty={result['uncertainty']:.4f}")


def test_criterion_04_exponential_edges(check):
    spec0 = BenchmarkSpec(family="exponential", d=2, n_samples=10_000, seed=0)
    truth = analytic_log_evidence(spec0).log_z
    wins = 0
    first = None
    for seed in range(5):
        spec = BenchmarkSpec(family="exponential", d=2, n_samples=10_000,
                             seed=seed)
        samples = draw_samples(spec)
        with_edges, _ = run_estimate(samples, spec.metadata(),
                                     RunConfig(seed=seed))
        without, _ = run_estimate(samples, spec.metadata(),
                                  RunConfig(seed=seed, reflect_edges=False))
        err_with = abs(with_edges["log_evidence"] - truth)
        err_without = abs(without["log_evidence"] - truth)
        if err_without > err_with:
            wins += 1
        if first is None:
            first = (with_edges["log_evidence"] - truth,
                     with_edges["uncertainty"])
        print(f"  seed {seed}: |error| with edges {err_with:.4f}, "
              f"without {err_without:.4f}", flush=True)
    tol = max(0.2, 3 * first[1])
    check("criterion 4 (exponential sharp edges)",
          abs(first[0]) <= tol and wins >= 4,
          f"error={first[0]:+.4f} (tol {tol:.4f}); "
          f"reflection better in {wins}/5 seeds")


def test_criterion_05_rosenbrock_2d(check):
    spec = BenchmarkSpec(family="rosenbrock", d=2, n_samples=10_000, seed=0)
    err, result = benchmark_error(spec, RunConfig(seed=0))
    tol = max(0.2, 3 * result["uncertainty"])
    check("criterion 5 (2-D rosenbrock)", abs(err) <= tol,
          f"error={err:+.4f}, tolerance={tol:.4f}, "
          f"uncertainty={result['uncertainty']:.4f}")


def test_criterion_06_gaussian_d10(check):
    spec = BenchmarkSpec(family="gaussian", d=10, n_samples=100_000, seed=0)
    err, result = benchmark_error(
        spec, RunConfig(seed=0, preset="high_dim", max_epochs=80, patience=30))
    check("criterion 6 (d=10 diagonal gaussian)", abs(err) <= 0.2,
          f"error={err:+.4f}, uncertainty={result['uncertainty']:.4f}, "
          f"{result['n_epochs']} epochs")


def test_criterion_07_gaussian_d50(check):
    spec = BenchmarkSpec(family="gaussian", d=50, n_samples=100_000, seed=0)
    err, result = benchmark_error(
        spec, RunConfig(seed=0, preset="high_dim", max_epochs=60, patience=20))
    check("criterion 7 (d=50 diagonal gaussian)", abs(err) <= 0.5,
          f"error={err:+.4f}, uncertainty={result['uncertainty']:.4f}, "
          f"{result['n_epochs']} epochs")


def test_criterion_08_rosenbrock_d10_cross_seed(check):
    estimates = []
    for seed in range(5):
        spec = BenchmarkSpec(family="rosenbrock", d=10, n_samples=30_000,
                             seed=seed)
        result = run_benchmark(spec, RunConfig(seed=seed, preset="high_dim",
                                               max_epochs=150, patience=50))
        estimates.append((result["log_evidence"], result["uncertainty"]))
        print(f"  seed {seed}: log_z={result['log_evidence']:.4f} "
              f"+/- {result['uncertainty']:.4f}", flush=True)
    worst = 0.0
    for i in range(5):
        for j in range(i + 1, 5):
            zi, ui = estimates[i]
            zj, uj = estimates[j]
            worst = max(worst, abs(zi - zj) / (3 * np.hypot(ui, uj)))
    check("criterion 8 (rosenbrock d=10 cross-seed)", worst <= 1.0,
          f"worst pairwise |dz| / (3 * combined uncertainty) = {worst:.3f}")


def test_criterion_09_property_suites(check):
    failures = []

    # gradient / finite-difference agreement
    rng = np.random.default_rng(0)
    model = init_flow(3, FlowConfig(n_blocks=2, hidden_layers_per_block=1,
                                    hidden_width=6, seed=0))
    for p in model.parameters():
        p.value = rng.normal(scale=0.3, size=p.value.shape)
    x = rng.normal(size=(4, 3))
    build = lambda: (-1.0) * model.log_density_t(x).mean()
    _, grads = evaluate_with_gradients(build, model.parameters())
    h = 1e-6
    worst_rel = 0.0
    for p, g in zip(model.parameters(), grads):
        flat, gf = p.value.ravel(), g.ravel()
        for k in range(flat.size):
            old = flat[k]
            flat[k] = old + h
            vp = build().value
            flat[k] = old - h
            vm = build().value
            flat[k] = old
            fd = (vp - vm) / (2 * h)
            denom = max(abs(fd), abs(gf[k]), 1e-6)
            worst_rel = max(worst_rel, abs(fd - gf[k]) / denom)
    if worst_rel >= 1e-6:
        failures.append(f"gradient FD rel {worst_rel:.2e}")

    # flow round trip and determinant consistency
    y_back, ld_inv = model.inverse_map(x)
    x_back = model.forward_map(y_back)
    if np.abs(x_back - x).max() >= 1e-9:
        failures.append("round trip")
    _, ld_fwd = model.forward_map(y_back, return_log_det=True)
    if np.abs(ld_fwd + ld_inv).max() >= 1e-9:
        failures.append("determinant consistency")

    # autoregressive mask property (exact)
    base = rng.normal(size=(1, 3))
    y0, _ = model.inverse_map(base)
    for j in range(3):
        bumped = base.copy()
        bumped[0, j] += 1.0
        yj, _ = model.inverse_map(bumped)
        # first block output for dims < j is exactly unchanged under a
        # block-internal check; at the model level verify via one block
        blk = model.blocks[0]
        mu0, a0 = blk.conditioner_np(base)
        mu1, a1 = blk.conditioner_np(bumped)
        if not (np.array_equal(mu0[0, :j + 1], mu1[0, :j + 1])
                and np.array_equal(a0[0, :j + 1], a1[0, :j + 1])):
            failures.append(f"mask (dim {j})")

    # 1-D and 2-D density normalization by quadrature
    m1 = init_flow(1, FlowConfig(n_blocks=2, hidden_layers_per_block=1,
                                 hidden_width=6, seed=2))
    for p in m1.parameters():
        p.value = np.random.default_rng(5).normal(scale=0.2,
                                                  size=p.value.shape)
    grid = np.linspace(-40, 40, 20001)[:, None]
    q = np.exp(m1.log_density(grid))
    total = np.trapezoid(q.ravel(), grid.ravel())
    if abs(total - 1.0) >= 1e-3:
        failures.append(f"1-D normalization {total:.5f}")
    m2 = init_flow(2, FlowConfig(n_blocks=2, hidden_layers_per_block=1,
                                 hidden_width=6, seed=3))
    g = np.linspace(-12, 12, 481)
    xx, yy = np.meshgrid(g, g)
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    dens = np.exp(m2.log_density(pts)).reshape(xx.shape)
    val = np.trapezoid(np.trapezoid(dens, g, axis=1), g)
    if abs(val - 1.0) >= 1e-3:
        failures.append(f"2-D normalization {val:.5f}")

    # schedule: sum, continuity, periodicity over 10 cycles
    sched = LossSchedule()
    for e in range(10 * sched.cycle_period):
        w = schedule_weights(e, sched)
        if abs(sum(w) - 1.0) >= 1e-12 or min(w) < 0:
            failures.append(f"schedule sum at {e}")
            break
        if schedule_weights(e, sched) != schedule_weights(
                e % sched.cycle_period, sched):
            failures.append(f"schedule periodicity at {e}")
            break

    # evidence invariance of every preprocessing step (exact per sample)
    xx = np.abs(np.random.default_rng(7).normal(size=(400, 2))) + 0.0
    lp = -xx.sum(axis=1)
    ss = SampleSet(xx, lp, ["a", "b"])
    meta = PriorMetadata(lower=np.zeros(2), upper=np.full(2, 12.0),
                         names=["a", "b"],
                         sharp_edges=[(0, "lower"), (1, "lower")])
    refl, meta2 = reflect_sharp_edges(ss, meta, seed=0)
    if not np.array_equal(refl.log_p_hat, lp - 2 * np.log(2.0)):
        failures.append("reflection shift")
    per = SampleSet(np.random.default_rng(8).uniform(0, 2 * np.pi, (300, 2)),
                    np.zeros(300), ["a", "b"])
    pmeta = PriorMetadata(lower=np.zeros(2), upper=np.full(2, 2 * np.pi),
                          names=["a", "b"], periodic=[(0, 2 * np.pi)])
    wrapped = wrap_periodic(per, pmeta)
    if not np.array_equal(wrapped.log_p_hat, per.log_p_hat):
        failures.append("wrap shift")
    white, ledger = center_and_whiten(ss)
    expected = lp + 0.5 * np.sum(np.log(ledger.eigvals))
    if not np.array_equal(white.log_p_hat, expected):
        failures.append("whitening shift")

    # zeta scale covariance (exact) and two-point enumerations
    lz = np.random.default_rng(9).normal(size=40)
    c = np.log(7.0)
    if loss_l2(ZetaBatch(Tensor(lz + c))).value - \
            loss_l2(ZetaBatch(Tensor(lz))).value != pytest.approx(c, abs=1e-12):
        failures.append("L2 scale covariance")
    if loss_l3a(ZetaBatch(Tensor(lz + c))).value != \
            loss_l3a(ZetaBatch(Tensor(lz))).value:
        failures.append("L3a scale invariance")
    two = ZetaBatch(Tensor(np.log(np.array([1.0, 2.0]))))
    if abs(loss_l3a(two).value - np.log(1.25)) >= 1e-12:
        failures.append("L3a two-point")
    if abs(loss_l3b(two).value - np.log(0.75)) >= 1e-12:
        failures.append("L3b two-point")
    if abs(loss_l2(ZetaBatch(Tensor(np.log([1.0, 3.0])))).value) >= 1e-12:
        failures.append("L2 two-point")
    if loss_l2(ZetaBatch(Tensor(np.zeros(3)))).value != \
            pytest.approx(np.log(SIGMA_FLOOR), abs=1e-9):
        failures.append("L2 floor")

    check("criterion 9 (property suites)", not failures,
          "all properties hold" if not failures else "; ".join(failures))


def test_criterion_10_oracle_concordance(check):
    specs = [
        BenchmarkSpec(family="gaussian", d=1, n_samples=1000),
        BenchmarkSpec(family="gaussian", d=2, n_samples=1000),
        BenchmarkSpec(family="gaussian_mixture5", d=2, n_samples=1000),
        BenchmarkSpec(family="exponential", d=1, n_samples=1000),
        BenchmarkSpec(family="exponential", d=2, n_samples=1000),
        BenchmarkSpec(family="rosenbrock", d=2, n_samples=1000),
    ]
    worst = ("", 0.0)
    for spec in specs:
        truth = analytic_log_evidence(spec)
        mc = mc_oracle_log_evidence(spec, n=4_000_000, seed=0)
        se = max(np.hypot(truth.oracle_error, mc.oracle_error), 1e-4)
        sigma = abs(truth.log_z - mc.log_z) / se
        if sigma > worst[1]:
            worst = (f"{spec.family} d={spec.d}", sigma)
    check("criterion 10 (oracle concordance)", worst[1] <= 3.0,
          f"worst deviation {worst[1]:.2f} combined SE ({worst[0]})")
