"""Command-line interface.

Each invocation takes one JSON configuration file plus a few overrides:

    stable-sysid generate        --config gen.json  [--seed N] [--out DIR]
    stable-sysid fit             --config fit.json  [--seed N] [--out DIR]
    stable-sysid predict         --config run.json  [--out DIR]
    stable-sysid simulate        --config run.json  [--out DIR]
    stable-sysid benchmark       --config bench.json [--seed N] [--out DIR]
                                 [--runs N] [--full-scale]
    stable-sysid check-viability --config check.json

Unknown configuration keys are rejected.  Exit codes: 0 success, 2 input
error, 3 infeasible stability target, 4 numeric failure, 5 divergence.
Commands are deterministic given config + seed: re-running overwrites the
same bytes (benchmark timing columns are zeroed unless ``record_timing``
is set, precisely to keep re-runs byte-identical).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import benchmarks
from .errors import (
    DivergenceError,
    InfeasibleTargetError,
    InputError,
    NumericError,
    StableSysidError,
)
from .kernels import KernelInstance, structure_from_config
from .predictor import load_model, one_step_predict, run_model, save_model, simulate
from .selection import OptimizerConfig, SelectionConfig
from .viability import StabilityTarget, membership, numeric_falsifier

__all__ = ["main"]

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_INFEASIBLE = 3
EXIT_NUMERIC = 4
EXIT_DIVERGED = 5


# ---------------------------------------------------------------------------
# config plumbing
# ---------------------------------------------------------------------------

def _load_config(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            cfg = json.load(fh)
    except FileNotFoundError as exc:
        raise InputError(f"config file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise InputError(f"config root must be a JSON object, got {type(cfg).__name__}")
    return cfg


def _reject_unknown(cfg: dict, allowed: set, where: str) -> None:
    unknown = set(cfg) - allowed
    if unknown:
        raise InputError(f"unknown keys {sorted(unknown)} in {where}; allowed: {sorted(allowed)}")


def _require(cfg: dict, key: str, where: str):
    if key not in cfg:
        raise InputError(f"missing required key {key!r} in {where}")
    return cfg[key]


def _out_dir(cfg: dict, args) -> Path:
    out = Path(args.out) if args.out else Path(cfg.get("out", "."))
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputError(f"cannot create output directory {out}: {exc}") from exc
    return out


def _parse_kernel_block(cfg: dict, need_eta: bool):
    """Kernel block: structure fields + optional eta + input_dim."""
    if not isinstance(cfg, dict):
        raise InputError("kernel block must be a JSON object")
    block = dict(cfg)
    eta = block.pop("eta", None)
    input_dim = block.pop("input_dim", None)
    structure = structure_from_config(block)
    if need_eta and eta is None:
        raise InputError("kernel block needs an 'eta' list for this command")
    if need_eta and input_dim is None:
        raise InputError("kernel block needs 'input_dim' for this command")
    return structure, eta, input_dim


def _parse_selection_block(cfg: dict, target: StabilityTarget, seed_override) -> SelectionConfig:
    allowed = {"method", "kfold_k", "iota", "restarts", "max_evals", "seed"}
    _reject_unknown(cfg, allowed, "selection block")
    optimizer = OptimizerConfig(
        restarts=int(cfg.get("restarts", 8)),
        max_evals=int(cfg.get("max_evals", 2000)),
    )
    seed = int(cfg.get("seed", 0)) if seed_override is None else int(seed_override)
    return SelectionConfig(
        method=cfg.get("method", "eb"),
        kfold_k=int(cfg.get("kfold_k", 5)),
        iota=float(cfg.get("iota", 1e-10)),
        target=target,
        optimizer=optimizer,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_generate(args) -> int:
    cfg = _load_config(args.config)
    allowed = {"system", "seed", "n_train", "n_valid", "noise_std", "hh_dt", "out"}
    _reject_unknown(cfg, allowed, "generate config")
    seed = int(cfg.get("seed", 0)) if args.seed is None else int(args.seed)
    spec = benchmarks.SyntheticSystemSpec(
        variant=_require(cfg, "system", "generate config"),
        seed=seed,
        n_train=cfg.get("n_train"),
        n_valid=cfg.get("n_valid"),
        noise_std=cfg.get("noise_std"),
        hh_dt=float(cfg.get("hh_dt", benchmarks.DEFAULT_HH_DT)),
    )
    out = _out_dir(cfg, args)
    train, valid = benchmarks.generate_dataset(spec)
    train_path = out / f"{spec.variant}_train.csv"
    valid_path = out / f"{spec.variant}_valid.csv"
    benchmarks.write_dataset_csv(train, train_path)
    benchmarks.write_dataset_csv(valid, valid_path)
    manifest = {
        "system": spec.variant,
        "seed": spec.seed,
        "n_train": spec.n_train,
        "n_valid": spec.n_valid,
        "noise_std": spec.noise_std,
        "train": train_path.name,
        "valid": valid_path.name,
    }
    with open(out / f"{spec.variant}_manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
        fh.write("\n")
    print(f"wrote {train_path} ({len(train)} rows) and {valid_path} ({len(valid)} rows)")
    return EXIT_OK


def cmd_fit(args) -> int:
    cfg = _load_config(args.config)
    allowed = {"data", "kernel", "target", "selection", "m", "chi", "out", "model_name"}
    _reject_unknown(cfg, allowed, "fit config")
    dataset = benchmarks.read_dataset_csv(_require(cfg, "data", "fit config"))
    m = int(cfg.get("m", 2))
    chi = float(cfg.get("chi", 0.99))
    target = StabilityTarget.from_config(_require(cfg, "target", "fit config"))
    structure, _, _ = _parse_kernel_block(_require(cfg, "kernel", "fit config"), need_eta=False)
    selection = _parse_selection_block(cfg.get("selection", {}), target, args.seed)
    out = _out_dir(cfg, args)

    from .solver import FitProblem, build_regression_data, solve_constrained
    from .selection import select_hyperparameters
    from .predictor import PredictorModel

    data = build_regression_data(dataset.u, dataset.y, m)
    sel = select_hyperparameters(selection, data, structure)
    kernel = KernelInstance(structure=structure, eta=sel.eta, input_dim=2 * m + 1)
    problem = FitProblem(
        data=data, kernel=kernel, beta=sel.beta, chi=chi, constrained=target.constrained
    )
    report = solve_constrained(problem)
    model = PredictorModel.from_fit(data, kernel, report, target)

    model_path = out / cfg.get("model_name", "model.json")
    save_model(model, model_path)
    record = {
        "beta": sel.beta,
        "eta": list(sel.eta),
        "alpha_bar": report.alpha_bar,
        "effective_alpha": report.effective_alpha,
        "mu": report.mu,
        "cost": sel.cost,
        "evaluations": sel.evaluations,
        "constraint_active": report.constraint_active,
        "feasible": sel.feasible,
        "target": target.label(),
    }
    with open(out / "fit_report.json", "w", encoding="utf-8") as fh:
        json.dump(record, fh, indent=1, sort_keys=True)
        fh.write("\n")
    print(f"wrote {model_path}: target={target.label()} beta={sel.beta:.3e} mu={report.mu:.6f}")
    return EXIT_OK


def _run_outputs(args, want: str) -> int:
    cfg = _load_config(args.config)
    allowed = {"model", "data", "out", "output_name"}
    _reject_unknown(cfg, allowed, f"{want} config")
    model = load_model(_require(cfg, "model", f"{want} config"))
    dataset = benchmarks.read_dataset_csv(_require(cfg, "data", f"{want} config"))
    out = _out_dir(cfg, args)
    result = run_model(model, dataset.u, dataset.y)
    path = out / cfg.get("output_name", f"{want}.csv")
    import csv as _csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = _csv.writer(fh)
        writer.writerow(["t", "y", "y_pred", "y_sim"])
        for t in range(len(dataset)):
            writer.writerow(
                [
                    t + 1,
                    repr(float(dataset.y[t])),
                    repr(float(result.predicted[t])),
                    repr(float(result.simulated[t])),
                ]
            )
    print(f"wrote {path}")
    print(f"q_pre = {result.q_pre!r}")
    print(f"q_sim = {result.q_sim!r}")
    return EXIT_OK


def cmd_predict(args) -> int:
    return _run_outputs(args, "predict")


def cmd_simulate(args) -> int:
    return _run_outputs(args, "simulate")


def cmd_benchmark(args) -> int:
    cfg = _load_config(args.config)
    allowed = {
        "system", "methods", "runs", "seed", "n_train", "n_valid", "noise_std",
        "hh_dt", "selection", "m", "record_timing", "out",
    }
    _reject_unknown(cfg, allowed, "benchmark config")
    variant = _require(cfg, "system", "benchmark config")
    seed = int(cfg.get("seed", 0)) if args.seed is None else int(args.seed)
    runs = int(cfg.get("runs", 20)) if args.runs is None else int(args.runs)
    full = bool(args.full_scale)
    n_valid = cfg.get("n_valid")
    if n_valid is None and full:
        n_valid = benchmarks.FULL_SCALE_N_VALID[variant]
    if full and args.runs is None and "runs" not in cfg:
        runs = 501
    spec = benchmarks.SyntheticSystemSpec(
        variant=variant,
        seed=seed,
        n_train=cfg.get("n_train"),
        n_valid=n_valid,
        noise_std=cfg.get("noise_std"),
        hh_dt=float(cfg.get("hh_dt", benchmarks.DEFAULT_HH_DT)),
    )
    selection = benchmarks.benchmark_selection_config(full_scale=full)
    if "selection" in cfg:
        selection = _parse_selection_block(cfg["selection"], StabilityTarget.unconstrained(), None)
    available = {m.name: m for m in benchmarks.standard_methods(variant, selection)}
    wanted = cfg.get("methods", sorted(available))
    methods = []
    for name in wanted:
        if name not in available:
            raise InputError(
                f"unknown method {name!r} for system {variant}; available: {sorted(available)}"
            )
        methods.append(available[name])
    config = benchmarks.MonteCarloConfig(
        runs=runs,
        systems=(spec,),
        methods=tuple(methods),
        model_order=int(cfg.get("m", 2)),
    )
    out = _out_dir(cfg, args)
    result = benchmarks.run_monte_carlo(config)
    results_path = out / "results.csv"
    benchmarks.write_results_csv(
        result.rows, results_path, record_timing=bool(cfg.get("record_timing", False))
    )
    summary = benchmarks.summarize(result.rows)
    summary_path = out / "summary.csv"
    import csv as _csv

    with open(summary_path, "w", newline="", encoding="utf-8") as fh:
        writer = _csv.writer(fh)
        writer.writerow(["system", "method", "metric", "count", "min", "q1", "median", "q3", "max"])
        for entry in summary:
            writer.writerow(
                [entry["system"], entry["method"], entry["metric"], entry["count"]]
                + [repr(entry[k]) for k in ("min", "q1", "median", "q3", "max")]
            )
    print(f"wrote {results_path} ({len(result.rows)} rows, {len(result.failures)} failures)")
    for entry in summary:
        print(
            f"{entry['system']}/{entry['method']} {entry['metric']}: "
            f"median={entry['median']:.6g} (q1={entry['q1']:.6g}, q3={entry['q3']:.6g}, n={entry['count']})"
        )
    for failure in result.failures:
        print(f"failure: run {failure.run} {failure.system}/{failure.method}: {failure.error}")
    return EXIT_OK


def cmd_check_viability(args) -> int:
    cfg = _load_config(args.config)
    allowed = {"kernel", "target", "falsify"}
    _reject_unknown(cfg, allowed, "check-viability config")
    structure, eta, input_dim = _parse_kernel_block(
        _require(cfg, "kernel", "check-viability config"), need_eta=True
    )
    target = StabilityTarget.from_config(_require(cfg, "target", "check-viability config"))
    if target.kind == "unconstrained":
        raise InputError("check-viability needs a constrained stability target")
    kernel = KernelInstance(structure=structure, eta=tuple(eta), input_dim=int(input_dim))
    verdict = membership(structure, kernel.eta, target)
    print(f"target {target.label()}: {'member' if verdict else 'not member'}")
    falsify = cfg.get("falsify")
    if falsify is not None:
        _reject_unknown(falsify, {"samples", "radius", "seed"}, "falsify block")
        witness = numeric_falsifier(
            kernel,
            target,
            sample_count=int(falsify.get("samples", 100_000)),
            radius=float(falsify.get("radius", 50.0)),
            seed=int(falsify.get("seed", 0)),
        )
        if witness is None:
            print("falsifier: no witness found")
        else:
            print(f"falsifier: witness violating {witness.violated_condition} "
                  f"(margin {witness.margin!r})")
            for point in witness.points:
                print(f"  point: {np.asarray(point).tolist()}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stable-sysid",
        description="Learn stability-guaranteed nonlinear predictors by constrained kernel regression.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    specs = [
        ("generate", cmd_generate, "sample a benchmark dataset to CSV"),
        ("fit", cmd_fit, "select hyperparameters and fit a predictor model"),
        ("predict", cmd_predict, "one-step prediction against a dataset"),
        ("simulate", cmd_simulate, "free-run simulation against a dataset"),
        ("benchmark", cmd_benchmark, "Monte-Carlo comparison of fitting methods"),
        ("check-viability", cmd_check_viability, "closed-form viability verdict for a kernel"),
    ]
    for name, fn, help_text in specs:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="JSON configuration file")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="override the output directory")
        if name == "benchmark":
            p.add_argument("--runs", type=int, default=None, help="override the run count")
            p.add_argument("--full-scale", action="store_true", help="full-size experiment")
        p.set_defaults(fn=fn)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except DivergenceError as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except InfeasibleTargetError as exc:
        print(f"infeasible stability target: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except StableSysidError as exc:  # pragma: no cover - catch-all guard
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
