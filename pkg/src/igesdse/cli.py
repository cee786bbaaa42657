"""Command-line entry point: simulate, estimate and evaluate IGES scenarios.

Exit codes: 0 success, 1 configuration or validation error, 2 numerical
failure, 3 I/O error.
"""
import argparse
import json
import platform
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from importlib import metadata
from importlib.resources import files
from pathlib import Path

import numpy as np
import scipy

from . import coupling, estimator, evaluation, scenario
from .errors import (DegenerateDenominator, NonConvergence, NumericFailure, ParseError,
                     SingularModel, ValidationError)
from .model import load_model, to_dict, validate

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3
SCENARIOS = ("config", "gaussian", "biased", "laplace", "cauchy")
OUTPUT_FILES = ("truth.csv", "measurements.csv", "estimates.csv", "metrics.csv", "manifest.json")


def bundled_config():
    return str(files("igesdse") / "data" / "iges30_39.json")


def _load(config, steps=None, seed=None):
    model = load_model(config)
    sc = model.scenario
    if steps is not None:
        sc = replace(sc, horizon_steps=steps)
    if seed is not None:
        sc = replace(sc, seed=seed)
    model = replace(model, scenario=sc)
    issues = validate(model)
    if issues:
        raise ValidationError(issues)
    return model


def _noise_specs(model, name, sigma, bias):
    if name == "config":
        return model.scenario.noise
    kw = {}
    if sigma is not None:
        kw["sigma"] = sigma
    if bias is not None:
        kw["bias"] = bias
    return scenario.noise_preset(name, **kw)


def _io_roundtrip(jm, truth, z):
    """Values exactly as they read back from the CSV files."""
    _, f_state = scenario.state_io_columns(jm)
    truth_rt = (truth * f_state) / f_state
    z_rt = scenario.from_io_measurements(jm, scenario.to_io_measurements(jm, z))
    return truth_rt, z_rt


def _estimate(jm, z, r, load_source):
    timings = []
    est, _ = estimator.run_dse(jm, z, estimator.default_noise_cov(jm, r), timings=timings,
                               load_source=load_source)
    return est, timings


def _metrics(jm, truth, z, est, units, warmup):
    art = scenario.make_artifacts(jm, truth, z, est, units)
    return evaluation.channel_metrics(art, warmup)


def _print_summary(metrics, label=""):
    head = f"[{label}] " if label else ""
    for group, s in evaluation.group_summary(metrics).items():
        print(f"{head}{group:<18} n={s['count']:<4d} eps1 min/mean/max "
              f"{s['eps1_min']:.4f}/{s['eps1_mean']:.4f}/{s['eps1_max']:.4f}  "
              f"eps2 max {s['eps2_max']:.3e}")
    flagged = [m for m in metrics if m.flag]
    if flagged:
        print(f"{head}flagged: " + ", ".join(f"{m.channel} ({m.flag})" for m in flagged))


def _versions():
    try:
        pkg = metadata.version("igesdse")
    except metadata.PackageNotFoundError:
        pkg = "unknown"
    return {"igesdse": pkg, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def run_scenario(config, name, seed=None, steps=None, sigma=None, bias=None, out=".",
                 load_source="filtered", quiet=False):
    """Full pipeline for one noise scenario; writes :data:`OUTPUT_FILES` into ``out``."""
    model = _load(config, steps, seed)
    sc = model.scenario
    jm = coupling.build_joint(model)
    specs = _noise_specs(model, name, sigma, bias)
    truth = scenario.simulate_truth(model, jm)
    z = scenario.synthesize_measurements(truth, jm, specs, sc.seed, sc.noise_units)
    truth, z = _io_roundtrip(jm, truth, z)
    r = scenario.measurement_variances(jm, specs, sc.noise_units)
    est, timings = _estimate(jm, z, r, load_source)
    metrics = _metrics(jm, truth, z, est, sc.noise_units, sc.warmup)

    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    scenario.write_states(out / "truth.csv", jm, truth)
    scenario.write_measurements(out / "measurements.csv", jm, z)
    scenario.write_states(out / "estimates.csv", jm, est)
    evaluation.write_metrics(out / "metrics.csv", metrics)
    manifest = {
        "config": str(Path(config).resolve()),
        "scenario": name,
        "seed": sc.seed,
        "steps": sc.horizon_steps,
        "sigma": sigma,
        "bias": bias,
        "load_source": load_source,
        "out": str(out.resolve()),
        "versions": _versions(),
        "defaults": to_dict(model)["scenario"],
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    step_ms = 1e3 * float(np.mean(timings))
    if not quiet:
        _print_summary(metrics, name)
        print(f"[{name}] mean KF step {step_ms:.3f} ms over {len(timings)} steps")
    return metrics, step_ms


def _guarded(fn, *args, **kwargs):
    """Run ``fn`` and map package errors onto exit codes."""
    try:
        fn(*args, **kwargs)
    except (ParseError, ValidationError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SingularModel, NonConvergence, NumericFailure, DegenerateDenominator) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def _run_job(kwargs):
    return _guarded(run_scenario, **kwargs)


def cmd_run(args):
    names = args.scenario or ["config"]
    if len(set(names)) != len(names):
        print("error: duplicate --scenario", file=sys.stderr)
        return EXIT_CONFIG
    jobs = []
    for name in names:
        out = Path(args.out) if len(names) == 1 else Path(args.out) / name
        jobs.append(dict(config=args.config, name=name, seed=args.seed, steps=args.steps,
                         sigma=args.sigma, bias=args.bias, out=str(out),
                         load_source=args.load_source))
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            codes = list(pool.map(_run_job, jobs))
    else:
        codes = [_run_job(j) for j in jobs]
    return max(codes)


def cmd_rerun(args):
    try:
        manifest = json.loads(Path(args.manifest).read_text())
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except json.JSONDecodeError as exc:
        print(f"error: {args.manifest}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        kwargs = dict(config=manifest["config"], name=manifest["scenario"], seed=manifest["seed"],
                      steps=manifest["steps"], sigma=manifest["sigma"], bias=manifest["bias"],
                      load_source=manifest["load_source"], out=args.out or manifest["out"])
    except KeyError as exc:
        print(f"error: manifest is missing {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return _run_job(kwargs)


def _simulate(args):
    model = _load(args.config, args.steps, args.seed)
    sc = model.scenario
    jm = coupling.build_joint(model)
    truth = scenario.simulate_truth(model, jm)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    specs = _noise_specs(model, args.scenario, args.sigma, args.bias)
    z = scenario.synthesize_measurements(truth, jm, specs, sc.seed, sc.noise_units)
    scenario.write_states(out / "truth.csv", jm, truth)
    if not args.truth_only:
        scenario.write_measurements(out / "measurements.csv", jm, z)
    print(f"simulated {sc.horizon_steps} steps into {out}")


def cmd_simulate(args):
    return _guarded(_simulate, args)


def _estimate_cmd(args):
    model = _load(args.config, args.steps, args.seed)
    sc = model.scenario
    jm = coupling.build_joint(model)
    z = scenario.read_measurements(args.measurements, jm)
    specs = _noise_specs(model, args.scenario, args.sigma, args.bias)
    r = scenario.measurement_variances(jm, specs, sc.noise_units)
    est, timings = _estimate(jm, z, r, args.load_source)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    scenario.write_states(out / "estimates.csv", jm, est)
    if args.truth:
        truth = scenario.read_states(args.truth, jm)
        metrics = _metrics(jm, truth, z, est, sc.noise_units, sc.warmup)
        evaluation.write_metrics(out / "metrics.csv", metrics)
        _print_summary(metrics)
    print(f"mean KF step {1e3 * float(np.mean(timings)):.3f} ms over {len(timings)} steps")


def cmd_estimate(args):
    return _guarded(_estimate_cmd, args)


def _validate(args):
    model = load_model(args.config)
    issues = validate(model)
    if issues:
        raise ValidationError(issues)
    print(f"ok: {model.gas.n_nodes} gas nodes, {model.gas.n_pipes} pipelines, "
          f"{model.grid.n_buses} buses, {len(model.gtus)} GTUs")


def cmd_validate(args):
    return _guarded(_validate, args)


def _add_common(p, scenario_many=False):
    p.add_argument("config", nargs="?", default=None,
                   help="model/scenario JSON (default: bundled 30-node/39-bus case)")
    if scenario_many:
        p.add_argument("--scenario", action="append", choices=SCENARIOS,
                       help="noise condition; repeat to run several (default: config)")
    else:
        p.add_argument("--scenario", choices=SCENARIOS, default="config")
    p.add_argument("--seed", type=int, help="override the scenario seed")
    p.add_argument("--steps", type=int, help="override the horizon length")
    p.add_argument("--sigma", type=float, help="relative noise standard deviation for presets")
    p.add_argument("--bias", type=float, help="bias on the designated channels (biased preset)")
    p.add_argument("--out", default="out", help="output directory")


def build_parser():
    parser = argparse.ArgumentParser(prog="igesdse", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate, estimate and evaluate")
    _add_common(p, scenario_many=True)
    p.add_argument("--jobs", type=int, default=1, help="scenarios to run concurrently")
    p.add_argument("--load-source", choices=("filtered", "measured"), default="filtered")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("simulate", help="write truth.csv and measurements.csv")
    _add_common(p)
    p.add_argument("--truth-only", action="store_true", help="skip measurement synthesis")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="estimate from an existing measurements.csv")
    _add_common(p)
    p.add_argument("--measurements", required=True)
    p.add_argument("--truth", help="truth.csv; when given, metrics.csv is written")
    p.add_argument("--load-source", choices=("filtered", "measured"), default="filtered")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("validate", help="check a model config")
    p.add_argument("config", nargs="?", default=None)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("rerun", help="repeat a run from its manifest.json")
    p.add_argument("manifest")
    p.add_argument("--out", help="output directory (default: the manifest's)")
    p.set_defaults(func=cmd_rerun)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if getattr(args, "config", "") is None:
        args.config = bundled_config()
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
