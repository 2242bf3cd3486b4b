"""Command-line surface: generate benchmarks, estimate evidence, validate.

Exit codes: 0 success, 2 input/schema error, 3 numerical/training failure,
4 insufficient latent-ball coverage.  Set FLOZ_THREADS to cap the linear
algebra thread pool (must be honored before numpy spins up its pool, so
it is applied at process start).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path


def _apply_thread_cap():
    cap = os.environ.get("FLOZ_THREADS")
    if cap:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, cap)


_apply_thread_cap()

import numpy as np  # noqa: E402

from .benchmarks import (BenchmarkSpec, analytic_log_evidence,  # noqa: E402
                         draw_samples)
from .errors import (ConfigurationError, DegenerateGeometryError,  # noqa: E402
                     DomainError, FlozError, GeometryError,
                     InsufficientCoverageError, NumericalError, ParseError,
                     SchemaError, TrainingError)
from .pipeline import RunConfig, run_estimate  # noqa: E402
from .sampleio import load_sample_set, write_sample_set  # noqa: E402

EXIT_INPUT = 2
EXIT_NUMERICAL = 3
EXIT_COVERAGE = 4


def _error_exit(exc: Exception, out_path=None) -> int:
    if isinstance(exc, InsufficientCoverageError):
        code = EXIT_COVERAGE
    elif isinstance(exc, (NumericalError, TrainingError, DegenerateGeometryError,
                          GeometryError)):
        code = EXIT_NUMERICAL
    elif isinstance(exc, (SchemaError, ParseError, DomainError,
                          ConfigurationError)):
        code = EXIT_INPUT
    else:
        raise exc
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
    print(json.dumps(payload), file=sys.stderr)
    return code


def _load_run_config(path, overrides: dict) -> RunConfig:
    obj = {}
    if path:
        with open(path, "r", encoding="utf-8") as fh:
            try:
                obj = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}: invalid JSON: {exc}") from exc
    obj.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig.from_dict(obj)


def cmd_generate(args) -> int:
    try:
        spec = BenchmarkSpec.from_json(args.spec)
        sample_set = draw_samples(spec)
        meta = spec.metadata()
        prefix = Path(args.out)
        prefix.parent.mkdir(parents=True, exist_ok=True)
        write_sample_set(sample_set, meta,
                         f"{prefix}_samples.csv", f"{prefix}_metadata.json")
        truth = analytic_log_evidence(spec)
        with open(f"{prefix}_ground_truth.json", "w", encoding="utf-8") as fh:
            json.dump(truth.to_dict(), fh, indent=2)
            fh.write("\n")
    except (FlozError, json.JSONDecodeError, OSError) as exc:
        if isinstance(exc, json.JSONDecodeError):
            exc = ParseError(f"{args.spec}: invalid JSON: {exc}")
        elif isinstance(exc, OSError):
            exc = ParseError(str(exc))
        return _error_exit(exc)
    print(f"wrote {prefix}_samples.csv, {prefix}_metadata.json, "
          f"{prefix}_ground_truth.json (method={truth.method})")
    return 0


def cmd_estimate(args) -> int:
    try:
        sample_set, meta = load_sample_set(args.samples, args.meta)
        config = _load_run_config(args.config, {"seed": args.seed})
        result, history = run_estimate(sample_set, meta, config)
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", encoding="utf-8") as fh:
            json.dump(result, fh, indent=2)
            fh.write("\n")
        history.write_csv(out.with_suffix(".history.csv"))
    except FlozError as exc:
        return _error_exit(exc, args.out)
    print(f"log_evidence = {result['log_evidence']:.4f} "
          f"+/- {result['uncertainty']:.4f} "
          f"(ball {result['n_in_ball']}/{result['n_total']})")
    return 0


def cmd_validate(args) -> int:
    try:
        with open(args.matrix, "r", encoding="utf-8") as fh:
            matrix = json.load(fh)
        cases = matrix.get("cases", [])
        if not cases:
            raise SchemaError(f"{args.matrix}: empty validation matrix")
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
    except (FlozError, json.JSONDecodeError, OSError) as exc:
        if not isinstance(exc, FlozError):
            exc = ParseError(str(exc))
        return _error_exit(exc)

    rows = []
    for case in cases:
        seeds = case.pop("seeds", [0])
        config_overrides = case.pop("config", {})
        for seed in seeds:
            name = f"{case['family']}_d{case['d']}_seed{seed}"
            try:
                spec = BenchmarkSpec.from_dict({**case, "seed": seed})
                sample_set = draw_samples(spec)
                truth = analytic_log_evidence(spec)
                config = RunConfig.from_dict({**config_overrides, "seed": seed})
                result, _ = run_estimate(sample_set, spec.metadata(), config)
                with open(out_dir / f"{name}.json", "w", encoding="utf-8") as fh:
                    json.dump({"case": name, "ground_truth": truth.to_dict(),
                               **result}, fh, indent=2)
                dev = ""
                if truth.log_z is not None and result["uncertainty"] > 0:
                    dev = (result["log_evidence"] - truth.log_z) / result["uncertainty"]
                rows.append({
                    "case": name, "log_z": result["log_evidence"],
                    "uncertainty": result["uncertainty"],
                    "ground_truth": truth.log_z if truth.log_z is not None else "",
                    "deviation_sigma": dev,
                })
                print(f"{name}: log_z={result['log_evidence']:.4f} "
                      f"+/- {result['uncertainty']:.4f}"
                      + (f" (truth {truth.log_z:.4f})" if truth.log_z is not None else ""))
            except FlozError as exc:
                rows.append({"case": name, "log_z": "", "uncertainty": "",
                             "ground_truth": "", "deviation_sigma": "",
                             "error": str(exc)})
                print(f"{name}: FAILED ({exc})", file=sys.stderr)

    with open(out_dir / "summary.csv", "w", encoding="utf-8") as fh:
        fh.write("case,log_z,uncertainty,ground_truth,deviation_sigma\n")
        for r in rows:
            fh.write(f"{r['case']},{r['log_z']},{r['uncertainty']},"
                     f"{r['ground_truth']},{r['deviation_sigma']}\n")

    # per-family cross-seed spread for cases lacking a ground truth
    by_family: dict[str, list[float]] = {}
    for r in rows:
        if r["ground_truth"] == "" and r["log_z"] != "":
            key = r["case"].rsplit("_seed", 1)[0]
            by_family.setdefault(key, []).append(float(r["log_z"]))
    if by_family:
        with open(out_dir / "cross_seed_spread.csv", "w", encoding="utf-8") as fh:
            fh.write("case,n_seeds,mean_log_z,spread\n")
            for key, vals in by_family.items():
                fh.write(f"{key},{len(vals)},{np.mean(vals):.6g},"
                         f"{np.std(vals):.6g}\n")
    print(f"summary written to {out_dir / 'summary.csv'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="floz",
        description="Bayesian evidence estimation from posterior samples")
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate", help="draw a benchmark sample set")
    p_gen.add_argument("spec", help="BenchmarkSpec JSON file")
    p_gen.add_argument("--out", required=True, help="output file prefix")
    p_gen.set_defaults(func=cmd_generate)

    p_est = sub.add_parser("estimate", help="estimate evidence from samples")
    p_est.add_argument("--samples", required=True)
    p_est.add_argument("--meta", required=True)
    p_est.add_argument("--config", default=None)
    p_est.add_argument("--seed", type=int, default=None)
    p_est.add_argument("--out", required=True)
    p_est.set_defaults(func=cmd_estimate)

    p_val = sub.add_parser("validate", help="run a benchmark validation matrix")
    p_val.add_argument("--matrix", required=True)
    p_val.add_argument("--out-dir", required=True)
    p_val.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
