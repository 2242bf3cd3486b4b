"""
Why sharp prior edges need reflection
=====================================

An exponential posterior peaks exactly on the lower prior boundary.  A
smooth flow cannot reproduce that cliff and leaks probability mass past
it, which biases the evidence upward.  Mirroring a random half of the
samples across each declared edge (and dividing p-hat by 2 per edge)
turns the cliff into a smooth ridge the flow can fit.

This script runs the same estimation twice -- with and without the edge
treatment -- and prints both errors.
"""

import numpy as np

from floz import (BenchmarkSpec, RunConfig, analytic_log_evidence,
                  draw_samples, run_estimate)

spec = BenchmarkSpec(family="exponential", d=2, n_samples=10_000, seed=0)
truth = analytic_log_evidence(spec)
print(f"ground truth: log Z = {truth.log_z:.4f} (closed form)")
print(f"declared sharp edges: {spec.metadata().sharp_edges}")

for reflect in (True, False):
    samples = draw_samples(spec)
    config = RunConfig(seed=0, max_epochs=200, reflect_edges=reflect)
    result, _ = run_estimate(samples, spec.metadata(), config)
    label = "with reflection   " if reflect else "without reflection"
    err = result["log_evidence"] - truth.log_z
    print(f"{label}: log Z = {result['log_evidence']:.4f} "
          f"+/- {result['uncertainty']:.4f}   error {err:+.4f}")
