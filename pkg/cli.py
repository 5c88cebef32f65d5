#!/usr/bin/env python3
# cli.py
"""
Command-line surface for BayesFair.

Subcommands:
- synth       draw a true model (and a dataset / finite prior) for a config
- train       fit one policy on a config's scenario
- audit       fairness reports for a policy under a model and/or belief
- experiment  static Bayesian vs marginal curves (--out curves.csv)
- sequential  censored-feedback curves (--out sequential.csv)
- prep        discretize a CSV table with a schema, split train/holdout

Exit codes: 0 success, 2 invalid input or configuration, 3 degenerate model
or observation, 1 anything else.
"""

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

sys.path.insert(0, str(Path(__file__).parent))
from config import (
    EVAL_K_SAMPLES,
    HOLDOUT_SMOOTHING,
    LOG_LEVEL,
    MAX_WORKERS,
    N_TRAIN_DEFAULT,
    get_output_dir,
)

from shared.errors import BayesFairError, InputError
from shared.fairness import (
    accuracy_certificate,
    balance_deviation,
    bayes_balance,
    calibration_report,
    impossibility_check,
    marginal_balance,
)
from shared.model import empirical_model, update_many
from shared.policy import train
from shared.serialization import load_belief, load_model, load_policy, save, save_json
from ingest.loader import load_schema, read_dataset, read_table, split, write_dataset
from experiments.curves import aggregate_curves, emit_curves, emit_summary, evaluate
from experiments.harness import (
    ExperimentConfig,
    build_scenario,
    repetition_seeds,
    run_sequential_experiment,
    run_static_experiment,
)
from sequential.simulator import training_seed

LOG = logging.getLogger("cli")

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_INVALID = 2
EXIT_RUNTIME = 3

# default output under OUTPUT_DIR, per subcommand
DEFAULT_OUTPUTS = {
    "synth": "synth",
    "train": "train",
    "audit": "audit.json",
    "experiment": "curves.csv",
    "sequential": "sequential.csv",
    "prep": "prep",
}
OUT_HELP = "Output path (default: under OUTPUT_DIR)"


def _output_path(args) -> Path:
    if args.out:
        return Path(args.out)
    name = DEFAULT_OUTPUTS[args.command]
    if Path(name).suffix:
        return get_output_dir() / name
    return get_output_dir(name)


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config)
    train_cfg = cfg.train.with_overrides(
        steps=getattr(args, "steps", None),
        learning_rate=getattr(args, "lr", None),
        k_samples=getattr(args, "k", None),
    )
    lam = vars(args).get("lambda")
    lambdas = (lam,) if lam is not None else None
    methods = (args.method,) if getattr(args, "method", None) else None
    return cfg.with_overrides(train=train_cfg, seed=args.seed, lambdas=lambdas, methods=methods)


def cmd_synth(args) -> None:
    cfg = _load_config(args)
    if cfg.truth["kind"] == "empirical":
        raise InputError("synth needs a random or file truth, not an empirical one")
    if args.n is not None:
        cfg = replace(cfg, checkpoints=(args.n,))
    scenario = build_scenario(cfg, repetition_seeds(cfg)[0])
    out = _output_path(args)
    save(scenario.theta_star, out / "model.json")
    write_dataset(scenario.stream, out / "dataset.csv")
    save(scenario.prior, out / "prior.json")
    LOG.info(f"Wrote synthetic model, prior and {len(scenario.stream)} records to {out}")


def cmd_train(args) -> None:
    cfg = _load_config(args)
    rep_seed = repetition_seeds(cfg)[0]
    scenario = build_scenario(cfg, rep_seed)
    stream = read_dataset(args.data, cfg.space) if args.data else scenario.stream
    belief = update_many(scenario.prior, stream)
    method = args.method or cfg.methods[0]
    lam = cfg.lambdas[0]
    t = len(stream)
    tc = replace(cfg.train, lam=lam, seed=training_seed(rep_seed, t, method))
    pi = train(method, belief, cfg.utility_table, tc)

    out = _output_path(args)
    save(pi, out / "policy.json")
    record = evaluate(pi, scenario.theta_eval, cfg.utility_table, lam, t, method, rep_seed)
    save_json({"train": tc.to_dict(), "method": method, "evaluation": record.to_dict()},
              out / "train_report.json")
    LOG.info(f"Trained {method} policy on {t} records: U={record.utility:.4f} "
             f"F={record.fairness:.4g} V={record.value:.4f}")


def cmd_audit(args) -> None:
    if not args.model and not args.belief:
        raise InputError("audit needs --model, --belief, or both")
    pi = load_policy(args.policy)
    report = {"policy": str(args.policy)}

    theta = load_model(args.model) if args.model else None
    if theta is not None:
        report["balance_p1"] = balance_deviation(pi, theta, 1).to_dict()
        report["balance_p2"] = balance_deviation(pi, theta, 2).to_dict()
        calibration = calibration_report(pi, theta)
        report["calibration"] = {"value": calibration.value,
                                 "per_term": calibration.per_term.tolist(),
                                 "skipped_actions": list(calibration.skipped_actions)}
        report["impossibility"] = impossibility_check(pi, theta, args.tol).to_dict()

    if args.belief:
        belief = load_belief(args.belief)
        estimate = bayes_balance(pi, belief, 1, args.k, args.seed)
        report["bayes_balance"] = estimate.to_dict()
        report["marginal_balance"] = marginal_balance(pi, belief, 1)
        if theta is not None:
            cert = accuracy_certificate(belief, theta, args.epsilon, args.k, args.seed,
                                        alpha=estimate.value)
            report["certificate"] = cert.to_dict()

    out = _output_path(args)
    save_json(report, out)
    LOG.info(f"Wrote audit report to {out}")


def _emit(records, args, include_phase: bool) -> None:
    out = _output_path(args)
    emit_curves(records, out, include_phase=include_phase)
    emit_summary(aggregate_curves(records), out.with_name(out.stem + "_summary.csv"))


def cmd_experiment(args) -> None:
    cfg = _load_config(args)
    _emit(run_static_experiment(cfg, args.workers), args, include_phase=False)


def cmd_sequential(args) -> None:
    cfg = _load_config(args)
    if args.no_censoring:
        cfg = replace(cfg, censoring=False)
    _emit(run_sequential_experiment(cfg, args.workers), args, include_phase=True)


def cmd_prep(args) -> None:
    schema = load_schema(args.schema)
    dataset, ingest_report = read_table(args.table, schema)
    train_set, holdout = split(dataset, min(args.n_train, len(dataset)))
    out = _output_path(args)
    write_dataset(train_set, out / "train.csv")
    write_dataset(holdout, out / "holdout.csv")
    if len(holdout):
        save(empirical_model(holdout, args.smoothing), out / "holdout_model.json")
    save_json({"space": schema.space.to_dict(), "ingest": ingest_report.to_dict(),
               "n_train": len(train_set), "n_holdout": len(holdout)}, out / "prep_report.json")
    LOG.info(f"Prepared {len(train_set)} training and {len(holdout)} holdout records in {out}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="BayesFair: Bayesian fairness for decision rules")
    parser.add_argument("--log-level", default=LOG_LEVEL, help="Logging level")
    sub = parser.add_subparsers(dest="command", required=True)

    def experiment_flags(p):
        p.add_argument("--config", required=True, help="Experiment config (JSON)")
        p.add_argument("--seed", type=int, default=None, help="Override the config seed")
        p.add_argument("--out", default=None, help=OUT_HELP)
        p.add_argument("--lambda", type=float, default=None, help="Run a single lambda")
        p.add_argument("--method", choices=["bayes", "marginal"], default=None)
        p.add_argument("--k", type=int, default=None, help="Posterior samples per step")
        p.add_argument("--steps", type=int, default=None, help="Gradient steps")
        p.add_argument("--lr", type=float, default=None, help="Learning rate")

    p = sub.add_parser("synth", help="Generate a true model and dataset")
    experiment_flags(p)
    p.add_argument("--n", type=int, default=None, help="Records to sample")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="Fit a single policy")
    experiment_flags(p)
    p.add_argument("--data", default=None, help="Dataset CSV (x,y,z) instead of the config stream")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("audit", help="Fairness reports for a policy")
    p.add_argument("--policy", required=True, help="Policy JSON")
    p.add_argument("--model", default=None, help="Model JSON (reference / true model)")
    p.add_argument("--belief", default=None, help="Belief JSON")
    p.add_argument("--epsilon", type=float, default=0.05, help="Certificate accuracy radius")
    p.add_argument("--tol", type=float, default=1e-6, help="Tolerance for the impossibility check")
    p.add_argument("--k", type=int, default=EVAL_K_SAMPLES, help="Posterior samples")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help=OUT_HELP)
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("experiment", help="Static Bayesian vs marginal curves")
    experiment_flags(p)
    p.add_argument("--workers", type=int, default=MAX_WORKERS, help="Parallel repetitions")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("sequential", help="Censored-feedback curves")
    experiment_flags(p)
    p.add_argument("--workers", type=int, default=MAX_WORKERS, help="Parallel repetitions")
    p.add_argument("--no-censoring", action="store_true", help="Reveal every outcome")
    p.set_defaults(func=cmd_sequential)

    p = sub.add_parser("prep", help="Discretize and split a CSV table")
    p.add_argument("--schema", required=True, help="Discretization schema (JSON)")
    p.add_argument("--table", required=True, help="Input CSV table")
    p.add_argument("--n-train", type=int, default=N_TRAIN_DEFAULT)
    p.add_argument("--smoothing", type=float, default=HOLDOUT_SMOOTHING)
    p.add_argument("--out", default=None, help=OUT_HELP)
    p.set_defaults(func=cmd_prep)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=args.log_level.upper(),
        format="%(asctime)s [bayesfair] %(levelname)s: %(message)s",
    )
    try:
        args.func(args)
    except InputError as e:
        LOG.error(f"{e}")
        return EXIT_INVALID
    except BayesFairError as e:
        LOG.error(f"{type(e).__name__}: {e}")
        return EXIT_RUNTIME
    except Exception:
        LOG.exception("Unexpected failure")
        return EXIT_UNEXPECTED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
