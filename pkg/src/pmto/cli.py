"""Experiment orchestration: config parsing, trial loops and persistence.

Subcommands::

    pmto run            seeded trials of one algorithm on one problem
    pmto minimax        robust-design pipeline on the truss problem
    pmto evaluate       re-score a saved task model on a fresh grid
    pmto list-problems  show the registry

Every output file except the manifest's timing fields is reproducible
byte-for-byte from (config, seed).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .acquisition import AcquisitionConfig
from .algorithms import (ConfigError, RunConfig, run_pmto, run_pmto_ft,
                         run_single_task_baseline, sample_tasks_lhs)
from .evaluation import (DEFAULT_ALPHAS, aggregate_trials, assess_robustness,
                         evaluate_task_model, nominal_optimal_design,
                         quantiles, sobol_grid, solve_minimax)
from .problems import get_problem, list_problems
from .task_evolution import EaConfig
from .task_model import fit_task_model, load_task_model, save_task_model

ALGORITHMS = ("baseline", "pmto-ft", "pmto", "pmto-rt")

DEFAULT_CONFIG = {
    "problem": None,
    "algorithm": "pmto",
    "n_init": 200,
    "n_tot": 2000,
    "m_tasks": 20,
    "beta": 1.0,
    "seed": 0,
    "trials": 1,
    "eval_k": 400,
    "eval_seed": 0,
    "top_p": 70.0,
    "refit_epochs_initial": 500,
    "refit_epochs_warm": 100,
    "ea": {"population_size": 100, "generations": 50, "eta_c": 15.0,
           "eta_m": 20.0, "p_c": 0.9, "p_m": 0.9},
    "acquisition": {"candidate_count": 1024, "refine_steps": 16},
    # Minimax-only keys.
    "total_budget": 2000,
    "pmto_fraction": 0.7,
    "n_errors": 800,
}


def load_config(path, overrides):
    cfg = json.loads(json.dumps(DEFAULT_CONFIG))  # deep copy
    if path:
        with open(path) as f:
            user = json.load(f)
        for key, value in user.items():
            if key not in cfg:
                raise ConfigError(f"unknown config key: {key!r}")
            if isinstance(cfg[key], dict):
                cfg[key].update(value)
            else:
                cfg[key] = value
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, raw = item.split("=", 1)
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = cfg
        parts = key.split(".")
        for part in parts[:-1]:
            if part not in node or not isinstance(node[part], dict):
                raise ConfigError(f"unknown config key: {key!r}")
            node = node[part]
        if parts[-1] not in node:
            raise ConfigError(f"unknown config key: {key!r}")
        node[parts[-1]] = value
    return cfg


def build_run_config(cfg, seed) -> RunConfig:
    return RunConfig(
        n_init=int(cfg["n_init"]),
        n_tot=int(cfg["n_tot"]),
        m_tasks=int(cfg["m_tasks"]),
        beta=float(cfg["beta"]),
        ea=EaConfig(**cfg["ea"]),
        acquisition=AcquisitionConfig(**cfg["acquisition"]),
        seed=int(seed),
        refit_epochs_initial=int(cfg["refit_epochs_initial"]),
        refit_epochs_warm=int(cfg["refit_epochs_warm"]),
        top_p=float(cfg["top_p"]),
    )


def _prepare_outdir(out, force):
    out = Path(out)
    if (out / "manifest.json").exists() and not force:
        raise ConfigError(
            f"output directory {out} already holds results; pass --force to "
            f"overwrite")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_manifest(out, cfg, wall_time, extra=None):
    manifest = {"config": cfg, "version": __version__,
                "wall_time_seconds": wall_time,
                "finished_at": time.strftime("%Y-%m-%dT%H:%M:%S")}
    if extra:
        manifest.update(extra)
    with open(out / "manifest.json", "w") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)


def run_trial(problem, algorithm, run_cfg):
    """One trial; returns (trace, task_model)."""
    if algorithm == "baseline":
        tasks = sample_tasks_lhs(problem, run_cfg.m_tasks, run_cfg.seed)
        trace, elites = run_single_task_baseline(problem, tasks, run_cfg)
        model = fit_task_model(elites, problem.solution_bounds,
                               problem.task_bounds,
                               epochs=run_cfg.refit_epochs_initial)
    elif algorithm == "pmto-ft":
        tasks = sample_tasks_lhs(problem, run_cfg.m_tasks, run_cfg.seed)
        trace, elites = run_pmto_ft(problem, tasks, run_cfg)
        model = fit_task_model(elites, problem.solution_bounds,
                               problem.task_bounds,
                               epochs=run_cfg.refit_epochs_initial)
    elif algorithm in ("pmto", "pmto-rt"):
        source = "evolved" if algorithm == "pmto" else "random"
        trace, _, model = run_pmto(problem, run_cfg, task_source=source)
    else:
        raise ConfigError(f"unknown algorithm: {algorithm!r}")
    return trace, model


def cmd_run(args) -> int:
    cfg = load_config(args.config, args.set)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.trials is not None:
        cfg["trials"] = args.trials
    if not cfg["problem"]:
        raise ConfigError("missing config key: 'problem'")
    if cfg["algorithm"] not in ALGORITHMS:
        raise ConfigError(
            f"unknown algorithm {cfg['algorithm']!r}; "
            f"choose from {', '.join(ALGORITHMS)}")
    problem = get_problem(cfg["problem"])
    out = _prepare_outdir(args.out, args.force)
    start = time.time()

    per_trial = []
    for u in range(int(cfg["trials"])):
        trial_seed = int(cfg["seed"]) + u
        run_cfg = build_run_config(cfg, trial_seed)
        trace, model = run_trial(problem, cfg["algorithm"], run_cfg)
        trace.to_csv(out / f"trace_trial{u}.csv")
        save_task_model(model, out / f"taskmodel_trial{u}.json")
        grid = sobol_grid(problem, int(cfg["eval_k"]), seed=int(cfg["eval_seed"]))
        per_trial.append(quantiles(evaluate_task_model(model, problem, grid)))

    report = aggregate_trials(per_trial)
    means, stds = report.means(), report.stds()
    with open(out / "quantiles.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["problem", "algorithm", "alpha", "mean", "std",
                         "U", "K", "seed"])
        for alpha, mean, std in zip(DEFAULT_ALPHAS, means, stds):
            writer.writerow([cfg["problem"], cfg["algorithm"], alpha,
                             repr(float(mean)), repr(float(std)),
                             cfg["trials"], cfg["eval_k"], cfg["seed"]])
    with open(out / "quantiles_per_trial.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["trial", "alpha", "value"])
        for u, qs in enumerate(per_trial):
            for alpha, value in zip(DEFAULT_ALPHAS, qs):
                writer.writerow([u, alpha, repr(float(value))])
    _write_manifest(out, cfg, time.time() - start)
    return 0


def cmd_minimax(args) -> int:
    cfg = load_config(args.config, args.set)
    if args.seed is not None:
        cfg["seed"] = args.seed
    cfg["problem"] = cfg["problem"] or "truss"
    if cfg["problem"] != "truss":
        raise ConfigError("config key 'problem' must be 'truss' for minimax")
    problem = get_problem("truss")
    out = _prepare_outdir(args.out, args.force)
    start = time.time()

    total = int(cfg["total_budget"])
    pmto_budget = int(round(cfg["pmto_fraction"] * total))
    outer_budget = total - pmto_budget
    run_cfg = build_run_config(cfg, cfg["seed"])
    run_cfg = replace(run_cfg, n_tot=pmto_budget)
    outer_ea = EaConfig(**cfg["ea"])

    theta_hat, model, h_best = solve_minimax(problem, run_cfg, outer_ea,
                                             outer_budget)
    theta_nom, _ = nominal_optimal_design(problem, outer_ea, total,
                                          seed=int(cfg["seed"]))
    save_task_model(model, out / "taskmodel.json")

    n_errors = int(cfg["n_errors"])
    with open(out / "robustness.csv", "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["design", "theta0", "theta1", "theta2", "value"])
        for label, theta in (("pmto", theta_hat), ("nominal", theta_nom)):
            result = assess_robustness(theta, problem, n_errors=n_errors,
                                       seed=int(cfg["seed"]))
            for value in result["values"]:
                writer.writerow([label] + [repr(float(t)) for t in theta]
                                + [repr(float(value))])
    _write_manifest(out, cfg, time.time() - start, extra={
        "pmto_budget": pmto_budget,
        "outer_budget": outer_budget,
        "robust_design": [float(t) for t in theta_hat],
        "nominal_design": [float(t) for t in theta_nom],
        "predicted_worst_case": h_best,
    })
    return 0


def cmd_evaluate(args) -> int:
    model = load_task_model(args.model)
    problem = get_problem(args.problem)
    grid = sobol_grid(problem, args.k, seed=args.seed or 0)
    values = evaluate_task_model(model, problem, grid)
    qs = quantiles(values)
    writer = csv.writer(sys.stdout if args.out is None
                        else open(args.out, "w", newline=""))
    writer.writerow(["alpha", "value"])
    for alpha, value in zip(DEFAULT_ALPHAS, qs):
        writer.writerow([alpha, repr(float(value))])
    return 0


def cmd_list_problems(args) -> int:
    for name in list_problems():
        print(name)
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pmto")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config key (repeatable)")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int)
        p.add_argument("--force", action="store_true",
                       help="overwrite existing results")

    p_run = sub.add_parser("run", help="run seeded experiment trials")
    common(p_run)
    p_run.add_argument("--trials", type=int)
    p_run.set_defaults(func=cmd_run)

    p_mm = sub.add_parser("minimax", help="truss robust-design pipeline")
    common(p_mm)
    p_mm.set_defaults(func=cmd_minimax)

    p_ev = sub.add_parser("evaluate", help="re-score a saved task model")
    p_ev.add_argument("--model", required=True)
    p_ev.add_argument("--problem", required=True)
    p_ev.add_argument("--k", type=int, default=400)
    p_ev.add_argument("--seed", type=int)
    p_ev.add_argument("--out")
    p_ev.set_defaults(func=cmd_evaluate)

    p_ls = sub.add_parser("list-problems", help="list the problem registry")
    p_ls.set_defaults(func=cmd_list_problems)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, KeyError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
