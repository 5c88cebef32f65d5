# experiments/harness.py
"""
Experiment harness for Bayesian vs marginal decision rules.

Handles:
- Experiment configuration (JSON) and validation
- Drawing or loading the true model and the observation stream
- Static pipeline: retrain both methods from scratch at each checkpoint
- Sequential pipeline: censored-feedback runs per method and lambda
- Running repetitions in parallel, gathering records in a fixed order
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

import sys
sys.path.insert(0, str(Path(__file__).parent.parent))
from config import (
    HOLDOUT_SMOOTHING,
    MAX_WORKERS,
    N_TRAIN_DEFAULT,
    PRIOR_ALPHA,
    RETRAIN_EVERY,
    SYNTHETIC_SUPPORT_SIZE,
)

from shared.errors import ConfigError
from shared.model import (
    Belief,
    Dataset,
    DirichletBelief,
    DiscreteSpace,
    ModelParams,
    derive_seed,
    empirical_model,
    finite_support_prior,
    random_model,
    sample_dataset,
    update_many,
)
from shared.policy import TRAINERS, TrainConfig, UtilityTable, train
from shared.serialization import load_belief, load_json, load_model
from ingest.loader import load_schema, load_table, split
from sequential.simulator import SequentialConfig, run_sequential, training_seed
from experiments.curves import CurveRecord, evaluate

LOG = logging.getLogger("harness")

PRIOR_KINDS = ("dirichlet", "finite", "finite_random")
TRUTH_KINDS = ("random", "file", "empirical")
TRUTH_FIELDS = {"random": (), "file": ("path",), "empirical": ("schema", "table")}


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    """Everything needed to reproduce one experiment."""

    space: DiscreteSpace
    prior: Dict[str, Any] = field(default_factory=lambda: {"kind": "dirichlet",
                                                           "alpha": PRIOR_ALPHA})
    truth: Dict[str, Any] = field(default_factory=lambda: {"kind": "random"})
    lambdas: Tuple[float, ...] = (0.0,)
    checkpoints: Tuple[int, ...] = (10,)
    train: TrainConfig = field(default_factory=TrainConfig)
    repetitions: int = 1
    seed: int = 0
    methods: Tuple[str, ...] = ("bayes", "marginal")
    utility: Optional[UtilityTable] = None
    retrain_every: int = RETRAIN_EVERY
    censoring: bool = True
    base_dir: Path = field(default_factory=Path.cwd)

    def __post_init__(self):
        object.__setattr__(self, "lambdas", tuple(float(l) for l in self.lambdas))
        object.__setattr__(self, "checkpoints", tuple(int(t) for t in self.checkpoints))
        object.__setattr__(self, "methods", tuple(self.methods))
        if not self.checkpoints or self.checkpoints[0] < 0:
            raise ConfigError("checkpoints must be non-empty and non-negative")
        if any(b <= a for a, b in zip(self.checkpoints, self.checkpoints[1:])):
            raise ConfigError(f"checkpoints must be strictly increasing: {self.checkpoints}")
        if not self.lambdas or any(not 0.0 <= l <= 1.0 for l in self.lambdas):
            raise ConfigError(f"lambdas must be in [0, 1]: {self.lambdas}")
        if self.repetitions < 1:
            raise ConfigError(f"repetitions must be >= 1, got {self.repetitions}")
        if self.seed < 0:
            raise ConfigError(f"seed must be non-negative, got {self.seed}")
        unknown = [m for m in self.methods if m not in TRAINERS]
        if unknown or not self.methods:
            raise ConfigError(f"Unknown methods {unknown}; expected {sorted(TRAINERS)}")
        if self.prior.get("kind") not in PRIOR_KINDS:
            raise ConfigError(f"prior.kind must be one of {PRIOR_KINDS}")
        if self.truth.get("kind") not in TRUTH_KINDS:
            raise ConfigError(f"truth.kind must be one of {TRUTH_KINDS}")
        _check_truth_fields(self.truth)
        if self.retrain_every < 1:
            raise ConfigError(f"retrain_every must be >= 1, got {self.retrain_every}")
        if self.utility is not None:
            self.utility.check_space(self.space)

    @property
    def horizon(self) -> int:
        return self.checkpoints[-1]

    @property
    def utility_table(self) -> UtilityTable:
        return self.utility or UtilityTable.indicator(self.space.n_y, self.space.n_a)

    def resolve_path(self, value: str) -> Path:
        return _resolve(self.base_dir, value)

    def with_overrides(self, **changes) -> "ExperimentConfig":
        return replace(self, **{k: v for k, v in changes.items() if v is not None})

    def to_dict(self) -> Dict:
        d = {
            "space": self.space.to_dict(),
            "prior": dict(self.prior),
            "truth": dict(self.truth),
            "lambdas": list(self.lambdas),
            "checkpoints": list(self.checkpoints),
            "train": self.train.to_dict(),
            "repetitions": self.repetitions,
            "seed": self.seed,
            "methods": list(self.methods),
            "retrain_every": self.retrain_every,
            "censoring": self.censoring,
        }
        if self.utility is not None:
            d["utility"] = self.utility.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: Dict, base_dir: Path = None) -> "ExperimentConfig":
        base_dir = Path(base_dir) if base_dir else Path.cwd()
        truth = dict(d.get("truth", {"kind": "random"}))
        if truth.get("kind") == "empirical":
            _check_truth_fields(truth)
            schema = load_schema(_resolve(base_dir, truth["schema"]))
            space = schema.space
        else:
            try:
                space = DiscreteSpace.from_dict(d["space"])
            except KeyError as e:
                raise ConfigError(f"Config is missing field {e}")
        try:
            return cls(
                space=space,
                prior=dict(d.get("prior", {"kind": "dirichlet", "alpha": PRIOR_ALPHA})),
                truth=truth,
                lambdas=tuple(d.get("lambdas", (0.0,))),
                checkpoints=tuple(d.get("checkpoints", (10,))),
                train=TrainConfig.from_dict(d.get("train", {})),
                repetitions=int(d.get("repetitions", 1)),
                seed=int(d.get("seed", 0)),
                methods=tuple(d.get("methods", ("bayes", "marginal"))),
                utility=UtilityTable.from_dict(d["utility"]) if "utility" in d else None,
                retrain_every=int(d.get("retrain_every", RETRAIN_EVERY)),
                censoring=bool(d.get("censoring", True)),
                base_dir=base_dir,
            )
        except ConfigError:
            raise
        except (TypeError, ValueError) as e:
            raise ConfigError(f"Invalid experiment config: {e}")

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        return cls.from_dict(load_json(path), base_dir=path.parent)


def _check_truth_fields(truth: Dict) -> None:
    absent = [f for f in TRUTH_FIELDS.get(truth.get("kind"), ()) if f not in truth]
    if absent:
        raise ConfigError(f"truth of kind {truth.get('kind')!r} is missing {absent}")


def _resolve(base_dir: Path, value: str) -> Path:
    path = Path(value)
    return path if path.is_absolute() else base_dir / path


@dataclass(frozen=True, eq=False)
class Scenario:
    """The world one repetition runs in."""

    theta_star: Optional[ModelParams]
    theta_eval: ModelParams
    stream: Dataset
    prior: Belief


def build_scenario(cfg: ExperimentConfig, rep_seed: int) -> Scenario:
    """Draw or load the truth, the stream and the prior for one repetition."""
    rng = np.random.default_rng(rep_seed)
    kind = cfg.truth["kind"]

    if kind == "empirical":
        schema = load_schema(cfg.resolve_path(cfg.truth["schema"]))
        table = load_table(cfg.resolve_path(cfg.truth["table"]), schema)
        stream, holdout = split(table, int(cfg.truth.get("n_train", N_TRAIN_DEFAULT)))
        theta_star = None
        theta_eval = empirical_model(holdout, float(cfg.truth.get("smoothing",
                                                                   HOLDOUT_SMOOTHING)))
        if cfg.horizon > len(stream):
            raise ConfigError(f"Last checkpoint {cfg.horizon} exceeds the "
                              f"{len(stream)} training rows")
        stream = stream[:cfg.horizon]
    else:
        if kind == "file":
            theta_star = load_model(cfg.resolve_path(cfg.truth["path"]))
            if theta_star.space != cfg.space:
                raise ConfigError("True model space does not match the config space")
        else:
            theta_star = random_model(cfg.space, rng)
        theta_eval = theta_star
        stream = sample_dataset(theta_star, cfg.horizon, rng)

    prior_kind = cfg.prior["kind"]
    if prior_kind == "dirichlet":
        prior = DirichletBelief.symmetric(cfg.space, float(cfg.prior.get("alpha", PRIOR_ALPHA)))
    elif prior_kind == "finite":
        prior = load_belief(cfg.resolve_path(cfg.prior["path"]))
    else:
        if theta_star is None:
            raise ConfigError("finite_random priors need a synthetic or file truth")
        prior = finite_support_prior(
            theta_star, int(cfg.prior.get("n_models", SYNTHETIC_SUPPORT_SIZE)), rng)
    if prior.space != cfg.space:
        raise ConfigError("Prior space does not match the config space")
    return Scenario(theta_star=theta_star, theta_eval=theta_eval, stream=stream, prior=prior)


def repetition_seeds(cfg: ExperimentConfig) -> List[int]:
    return [derive_seed(cfg.seed, rep) for rep in range(cfg.repetitions)]


def _static_repetition(cfg: ExperimentConfig, rep_seed: int) -> List[CurveRecord]:
    scenario = build_scenario(cfg, rep_seed)
    u = cfg.utility_table
    records = []
    belief = scenario.prior
    consumed = 0
    for t in cfg.checkpoints:
        belief = update_many(belief, scenario.stream[consumed:t])
        consumed = t
        for lam in cfg.lambdas:
            for method in cfg.methods:
                tc = replace(cfg.train, lam=lam, seed=training_seed(rep_seed, t, method),
                             warm_start=None)
                pi = train(method, belief, u, tc)
                records.append(evaluate(pi, scenario.theta_eval, u, lam, t, method, rep_seed))
        LOG.info(f"[seed {rep_seed}] checkpoint t={t} done")
    return records


def _sequential_repetition(cfg: ExperimentConfig, rep_seed: int) -> List[CurveRecord]:
    scenario = build_scenario(cfg, rep_seed)
    u = cfg.utility_table
    records = []
    for lam in cfg.lambdas:
        for method in cfg.methods:
            seq = SequentialConfig(
                stream=scenario.stream,
                belief=scenario.prior,
                train=cfg.train,
                retrain_every=cfg.retrain_every,
                censoring=cfg.censoring,
                method=method,
            )
            result = run_sequential(seq, scenario.theta_eval, u, lam, rep_seed)
            records.extend(result.curves)
    return records


def _run_parallel(cfg: ExperimentConfig, job, max_workers: int) -> List[CurveRecord]:
    seeds = repetition_seeds(cfg)
    if max_workers <= 1 or len(seeds) == 1:
        return [r for s in seeds for r in job(cfg, s)]
    with ThreadPoolExecutor(max_workers=max_workers) as executor:
        futures = [executor.submit(job, cfg, s) for s in seeds]
        # gather in submission order so output does not depend on scheduling
        return [r for fut in futures for r in fut.result()]


def run_static_experiment(cfg: ExperimentConfig, max_workers: int = MAX_WORKERS) -> List[CurveRecord]:
    """
    For each repetition: draw the truth and the stream, and at each
    checkpoint update the belief on the prefix, train every method from
    scratch for every lambda, and evaluate against the evaluation model.
    """
    LOG.info(f"Static experiment: {cfg.repetitions} repetitions, "
             f"lambdas {list(cfg.lambdas)}, checkpoints {list(cfg.checkpoints)}")
    return _run_parallel(cfg, _static_repetition, max_workers)


def run_sequential_experiment(cfg: ExperimentConfig,
                              max_workers: int = MAX_WORKERS) -> List[CurveRecord]:
    """Censored-feedback runs for every repetition, lambda and method."""
    LOG.info(f"Sequential experiment: {cfg.repetitions} repetitions, horizon {cfg.horizon}, "
             f"censoring={'on' if cfg.censoring else 'off'}")
    return _run_parallel(cfg, _sequential_repetition, max_workers)
