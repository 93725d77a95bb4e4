"""Command-line interface.

Subcommands: ``wwb`` (cost curves as CSV), ``lut`` (build or describe a
scaling look-up table), ``simulate`` (closed-loop Monte Carlo runs),
``antenna`` (candidate selections), ``train-surrogate`` (dataset generation
plus training).  Exit codes: 0 ok, 2 config error, 3 numeric failure, 4 I/O.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .controllers import (
    DirectScaling,
    FixedScaling,
    LinearScaling,
    LutScaling,
    RandomScaling,
    ScalingLut,
    antenna_costs_exact,
    build_scaling_lut,
    enumerate_antenna_candidates,
    make_prior,
)
from .errors import ConfigError, NumericError, WwbAdaptError
from .harness import ControllerSpec, MonteCarloResult, Scenario, export_results, monte_carlo_mse
from .optimize import AnnealConfig
from .priors import GaussianPrior, UniformBoxPrior
from .signal_model import snr_db_to_linear, uniform_linear_array
from .surrogate import (
    FeatureCodec,
    build_dataset_features,
    load_model,
    make_candidate_ranker,
    predict,
    save_model,
    train,
    TrainConfig,
)
from .wwb import scaling_cost_curve

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4


def parse_range(spec: str) -> np.ndarray:
    """Parse the lo:step:hi flag syntax into an inclusive grid."""
    parts = spec.split(":")
    if len(parts) != 3:
        raise ConfigError(f"range flag must be lo:step:hi, got {spec!r}")
    try:
        lo, step, hi = (float(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"range flag must be numeric, got {spec!r}") from exc
    if step <= 0 or hi < lo:
        raise ConfigError(f"range flag needs step > 0 and hi >= lo, got {spec!r}")
    return np.arange(lo, hi + step / 2.0, step)


def resolve_threads(arg) -> int:
    if arg is not None:
        return max(1, int(arg))
    env = os.environ.get("WWB_ADAPT_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def write_manifest(target: Path, subcommand: str, config: dict, seeds) -> Path:
    """Record the resolved run configuration before heavy computation."""
    manifest = {
        "subcommand": subcommand,
        "config": config,
        "seeds": seeds,
        "tool_version": __version__,
        "started_at": time.strftime("%Y-%m-%dT%H:%M:%S", time.gmtime()),
    }
    if target.is_dir() or target.suffix == "":
        target.mkdir(parents=True, exist_ok=True)
        path = target / "manifest.json"
    else:
        path = target.with_name(target.name + ".manifest.json")
        path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
    return path


def finalize_manifest(path: Path, output_files) -> None:
    """Append a content hash over the run outputs."""
    digest = hashlib.sha256()
    for f in sorted(str(p) for p in output_files):
        digest.update(Path(f).name.encode())
        digest.update(Path(f).read_bytes())
    with open(path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    manifest["content_hash"] = digest.hexdigest()
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)


def _fmt(x) -> str:
    return repr(float(x))


def _build_array(args) -> np.ndarray:
    return uniform_linear_array(args.array_n, args.spacing)


def cmd_wwb(args) -> int:
    """Dump cost curves over the scaling grid for the requested models."""
    models = ["rp", "kp", "uc"] if args.model == "all" else args.model.split(",")
    for m in models:
        if m not in ("rp", "kp", "uc"):
            raise ConfigError(f"unknown model {m!r}")
    if args.dv is None and args.var is None:
        raise ConfigError("one of --dv or --var is required")
    variance = args.var if args.var is not None else args.dv**2 / 12.0
    prior = make_prior(args.prior, variance)
    positions = _build_array(args)
    g_values = parse_range(args.g_grid)
    snr = snr_db_to_linear(args.snr_db)
    cfg = AnnealConfig(seed=args.seed)

    out = Path(args.out)
    manifest = write_manifest(
        out, "wwb", {k: v for k, v in vars(args).items() if k != "func"}, [args.seed]
    )

    curves = {
        m: scaling_cost_curve(prior, positions, snr, None, g_values, model=m, cfg=cfg)
        for m in models
    }
    header = [
        "g",
        "cost_rp",
        "cost_kp",
        "cost_uc",
        "h_opt_u_rp",
        "h_opt_phi_rp",
        "h_opt_kp",
        "h_opt_uc",
    ]
    with open(out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i in range(g_values.size):
            row = [_fmt(g_values[i])]
            for m in ("rp", "kp", "uc"):
                row.append(_fmt(curves[m].costs[i]) if m in curves else "")
            row.append(_fmt(curves["rp"].test_points[i, 0]) if "rp" in curves else "")
            row.append(_fmt(curves["rp"].test_points[i, 1]) if "rp" in curves else "")
            row.append(_fmt(curves["kp"].test_points[i, 0]) if "kp" in curves else "")
            row.append(_fmt(curves["uc"].test_points[i, 0]) if "uc" in curves else "")
            writer.writerow(row)
    finalize_manifest(manifest, [out])
    for m in models:
        print(f"{m}: g_opt = {curves[m].g_opt:.6g}")
    return EXIT_OK


def cmd_lut(args) -> int:
    """Build a scaling LUT, or describe an existing file with --describe."""
    if args.describe:
        lut = ScalingLut.load(args.describe)
        print(json.dumps(
            {
                "variance_axis": lut.variance_axis.tolist(),
                "snr_axis_db": lut.snr_axis_db.tolist(),
                "table": lut.table.tolist(),
                "metadata": lut.metadata,
            },
            indent=2,
        ))
        return EXIT_OK
    if not args.out:
        raise ConfigError("--out is required when building a LUT")
    variance_grid = np.logspace(np.log10(args.var_min), np.log10(args.var_max), args.var_points)
    snr_grid = parse_range(args.snr_grid)
    g_values = np.geomspace(args.g_min, args.g_max, args.g_points)
    positions = _build_array(args)

    out = Path(args.out)
    manifest = write_manifest(
        out, "lut", {k: v for k, v in vars(args).items() if k != "func"}, [args.seed]
    )
    lut = build_scaling_lut(
        args.model,
        args.prior,
        positions,
        variance_grid,
        snr_grid,
        g_values,
        cfg=AnnealConfig(seed=args.seed),
        workers=resolve_threads(args.threads),
    )
    lut.save(str(out))
    actual = str(out) if str(out).endswith(".npz") else str(out) + ".npz"
    finalize_manifest(manifest, [actual, actual + ".json"])
    print(f"wrote LUT with {lut.table.size} cells to {actual}")
    return EXIT_OK


def _policy_from_spec(doc: dict, base_dir: Path):
    kind = doc.get("policy")
    if kind == "fixed":
        return FixedScaling(g0=float(doc["g0"]))
    if kind == "linear":
        return LinearScaling(g0=float(doc["g0"]), slope=float(doc["slope"]))
    if kind == "random":
        return RandomScaling(low=float(doc["low"]), high=float(doc["high"]))
    if kind == "lut":
        lut_path = Path(doc["lut"])
        if not lut_path.is_absolute():
            lut_path = base_dir / lut_path
        return LutScaling(lut=ScalingLut.load(str(lut_path)))
    if kind == "direct":
        return DirectScaling(
            model=doc.get("model", "rp"),
            prior_kind=doc.get("prior", "uniform"),
            positions=np.asarray(doc["positions"], dtype=float),
            g_values=np.geomspace(
                float(doc.get("g_min", 0.1)),
                float(doc.get("g_max", 100.0)),
                int(doc.get("g_points", 120)),
            ),
        )
    raise ConfigError(f"unknown policy {kind!r}")


def load_scenarios(config_path: str, trials_override=None, seed_override=None):
    """Parse a scenario JSON document into per-controller Scenarios."""
    path = Path(config_path)
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"unreadable scenario config {config_path}: {exc}") from exc

    try:
        array = doc["array"]
        positions = uniform_linear_array(
            int(array["n_elements"]), float(array.get("spacing", np.pi))
        )
        prior_doc = doc["initial_prior"]
        if prior_doc.get("kind", "uniform") == "uniform":
            prior = UniformBoxPrior(
                center=[float(prior_doc.get("center", 0.0))],
                widths=[float(prior_doc["width"])],
            )
        else:
            prior = GaussianPrior(
                mean=[float(prior_doc.get("center", 0.0))],
                variances=[float(prior_doc["variance"])],
            )
        seed = int(seed_override if seed_override is not None else doc.get("seed", 0))
        base = Scenario(
            positions=positions,
            snr_db=float(doc["snr_db"]),
            initial_prior=prior,
            n_steps=int(doc["steps"]),
            n_particles=int(doc["particles"]),
            controller=ControllerSpec(policy=FixedScaling(1.0)),
            inflation=float(doc.get("inflation", 1.0)),
            seed=seed,
        )
        scenarios = []
        for spec in doc["controllers"]:
            controller = ControllerSpec(
                policy=_policy_from_spec(spec, path.parent),
                approx=spec.get("approx", "uniform"),
                label=spec.get("label", spec["policy"]),
            )
            scenarios.append(dataclasses.replace(base, controller=controller))
    except KeyError as exc:
        raise ConfigError(f"scenario config missing key {exc}") from exc
    trials = int(trials_override if trials_override is not None else doc.get("trials", 100))
    return scenarios, trials


def cmd_simulate(args) -> int:
    """Run Monte Carlo closed loops for every controller in the config."""
    scenarios, trials = load_scenarios(args.config, args.trials, args.seed)
    out = Path(args.out)
    manifest = write_manifest(
        out,
        "simulate",
        {"config": args.config, "trials": trials, "seed": scenarios[0].seed},
        [scenarios[0].seed],
    )
    workers = resolve_threads(args.threads)
    results = [
        monte_carlo_mse(scn, trials, seed_base=scn.seed, workers=workers)
        for scn in scenarios
    ]
    files = export_results(results, out)
    finalize_manifest(manifest, files)
    for res in results:
        print(f"{res.label}: MSE at final step = {res.mse[-1]:.6g}")
    return EXIT_OK


def cmd_antenna(args) -> int:
    """Rank antenna candidates per belief variance, exactly or by surrogate."""
    variances = np.logspace(np.log10(args.var_min), np.log10(args.var_max), args.var_points)
    candidates = enumerate_antenna_candidates()
    snr = snr_db_to_linear(args.snr_db)
    cfg = AnnealConfig(seed=args.seed)

    out = Path(args.out)
    manifest = write_manifest(
        out, "antenna", {k: v for k, v in vars(args).items() if k != "func"}, [args.seed]
    )

    ranker = None
    if args.evaluator == "surrogate":
        if not args.model_file:
            raise ConfigError("--model-file is required with --evaluator surrogate")
        mlp = load_model(args.model_file)
        codec = FeatureCodec.from_candidates(candidates)
        ranker = make_candidate_ranker(mlp, codec)

    with open(out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["variance", "tx_choice", "rx_choice", "cost"])
        for v in variances:
            if ranker is None:
                costs = antenna_costs_exact(candidates, v, snr, cfg)
            else:
                costs = np.asarray(ranker(candidates, v), dtype=float)
            best = int(np.argmin(costs))
            writer.writerow(
                [
                    _fmt(v),
                    candidates[best].tx_choice,
                    candidates[best].rx_choice,
                    _fmt(costs[best]),
                ]
            )
    finalize_manifest(manifest, [out])
    return EXIT_OK


def cmd_train_surrogate(args) -> int:
    """Generate the exact-cost dataset and fit the surrogate to it."""
    variances = np.logspace(np.log10(args.var_min), np.log10(args.var_max), args.var_points)
    candidates = enumerate_antenna_candidates()
    codec = FeatureCodec.from_candidates(candidates)
    snr = snr_db_to_linear(args.snr_db)
    cfg = AnnealConfig(seed=args.seed)

    out = Path(args.out)
    manifest = write_manifest(
        out, "train-surrogate", {k: v for k, v in vars(args).items() if k != "func"}, [args.seed]
    )

    costs = np.concatenate(
        [antenna_costs_exact(candidates, v, snr, cfg) for v in variances]
    )
    features = build_dataset_features(codec, candidates, variances)
    mlp, history = train(
        features,
        costs,
        TrainConfig(epochs=args.epochs, seed=args.seed),
    )
    save_model(mlp, str(out))
    actual = str(out) if str(out).endswith(".npz") else str(out) + ".npz"
    finalize_manifest(manifest, [actual])
    final_rel = float(np.sqrt(history[-1]))
    print(
        f"trained on {features.shape[0]} samples, "
        f"final rms relative error {final_rel:.4%}, wrote {actual}"
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wwb-adapt",
        description="Bound-driven adaptive sensing: LUTs, cost curves, closed loops.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add_array_flags(p):
        p.add_argument("--array-n", type=int, default=12, help="array element count")
        p.add_argument(
            "--spacing", type=float, default=float(np.pi), help="element spacing (phase units)"
        )

    p_wwb = sub.add_parser("wwb", help="dump cost curves over a scaling grid")
    p_wwb.add_argument("--model", default="all", help="rp, kp, uc, comma list, or all")
    p_wwb.add_argument("--prior", choices=["uniform", "gaussian"], default="uniform")
    p_wwb.add_argument("--dv", type=float, default=None, help="uniform support width")
    p_wwb.add_argument("--var", type=float, default=None, help="prior variance (alternative to --dv)")
    p_wwb.add_argument("--snr-db", type=float, required=True)
    p_wwb.add_argument("--g-grid", required=True, help="scaling grid, lo:step:hi")
    add_array_flags(p_wwb)
    p_wwb.add_argument("--seed", type=int, default=0)
    p_wwb.add_argument("--out", required=True, help="output CSV path")
    p_wwb.set_defaults(func=cmd_wwb)

    p_lut = sub.add_parser("lut", help="build or describe a scaling LUT")
    p_lut.add_argument("--describe", default=None, help="print an existing LUT file")
    p_lut.add_argument("--model", choices=["rp", "kp", "uc"], default="rp")
    p_lut.add_argument("--prior", choices=["uniform", "gaussian"], default="uniform")
    p_lut.add_argument("--var-min", type=float, default=1e-4)
    p_lut.add_argument("--var-max", type=float, default=10.0)
    p_lut.add_argument("--var-points", type=int, default=25)
    p_lut.add_argument("--snr-grid", default="-20:1:10", help="SNR axis in dB, lo:step:hi")
    p_lut.add_argument("--g-min", type=float, default=0.05)
    p_lut.add_argument("--g-max", type=float, default=300.0)
    p_lut.add_argument("--g-points", type=int, default=180)
    add_array_flags(p_lut)
    p_lut.add_argument("--seed", type=int, default=0)
    p_lut.add_argument("--threads", type=int, default=None)
    p_lut.add_argument("--out", default=None, help="output .npz path")
    p_lut.set_defaults(func=cmd_lut)

    p_sim = sub.add_parser("simulate", help="closed-loop Monte Carlo runs")
    p_sim.add_argument("--config", required=True, help="scenario JSON file")
    p_sim.add_argument("--trials", type=int, default=None)
    p_sim.add_argument("--seed", type=int, default=None)
    p_sim.add_argument("--threads", type=int, default=None)
    p_sim.add_argument("--out", required=True, help="run directory")
    p_sim.set_defaults(func=cmd_simulate)

    p_ant = sub.add_parser("antenna", help="antenna selections per belief variance")
    p_ant.add_argument("--evaluator", choices=["exact", "surrogate"], default="exact")
    p_ant.add_argument("--model-file", default=None, help="surrogate model file")
    p_ant.add_argument("--snr-db", type=float, default=0.0)
    p_ant.add_argument("--var-min", type=float, default=1e-3)
    p_ant.add_argument("--var-max", type=float, default=1.0)
    p_ant.add_argument("--var-points", type=int, default=16)
    p_ant.add_argument("--seed", type=int, default=0)
    p_ant.add_argument("--out", required=True, help="output CSV path")
    p_ant.set_defaults(func=cmd_antenna)

    p_train = sub.add_parser("train-surrogate", help="fit the antenna-cost surrogate")
    p_train.add_argument("--snr-db", type=float, default=0.0)
    p_train.add_argument("--var-min", type=float, default=1e-3)
    p_train.add_argument("--var-max", type=float, default=1.0)
    p_train.add_argument("--var-points", type=int, default=24)
    p_train.add_argument("--epochs", type=int, default=3000)
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument("--out", required=True, help="output model file (.npz)")
    p_train.set_defaults(func=cmd_train_surrogate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse already printed a message; normalize its code to ours
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"error: numeric: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"error: io: {exc}", file=sys.stderr)
        return EXIT_IO
    except WwbAdaptError as exc:
        print(f"error: internal: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
