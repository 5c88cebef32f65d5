# sequential/simulator.py
"""
Sequential allocation with censored feedback.

At each step the decision maker sees x_t and draws a_t from the current
stochastic policy. With censoring enabled, (y_t, z_t) are revealed only when
a_t = 1; unrevealed records leave the belief untouched. Every
`retrain_every` steps the policy is re-optimized on the current belief
(myopically, no lookahead) and evaluated against a fixed model.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional

import numpy as np

import sys
from pathlib import Path
sys.path.insert(0, str(Path(__file__).parent.parent))
from config import RETRAIN_EVERY

from shared.errors import ConfigError, InputError
from shared.model import Belief, Dataset, ModelParams, derive_seed, observe
from shared.policy import TRAINERS, Policy, TrainConfig, UtilityTable, train
from experiments.curves import CurveRecord, evaluate

LOG = logging.getLogger("sequential")

POSITIVE_ACTION = 1  # the action that reveals the outcome
METHOD_CODES = {"bayes": 1, "marginal": 2}
ACTION_STREAM_KEY = 0


@dataclass(frozen=True, eq=False)
class SequentialConfig:
    """One censored-feedback run."""

    stream: Dataset
    belief: Belief
    train: TrainConfig = field(default_factory=TrainConfig)
    retrain_every: int = RETRAIN_EVERY
    censoring: bool = True
    method: str = "bayes"
    warm_start: bool = True
    forced_action: Optional[int] = None

    def __post_init__(self):
        if self.retrain_every < 1:
            raise ConfigError(f"retrain_every must be >= 1, got {self.retrain_every}")
        if self.method not in TRAINERS:
            raise ConfigError(f"Unknown method {self.method!r}")
        if self.stream.space != self.belief.space:
            raise ConfigError("Stream and belief spaces differ")
        if self.forced_action is not None and not 0 <= self.forced_action < self.belief.space.n_a:
            raise ConfigError(f"forced_action {self.forced_action} out of range")


@dataclass(frozen=True)
class StepLog:
    t: int
    action: int
    observed: bool
    belief_updates: int

    def to_dict(self) -> Dict:
        return {"t": self.t, "action": self.action, "observed": self.observed,
                "belief_updates": self.belief_updates}


@dataclass
class SequentialResult:
    curves: List[CurveRecord]
    steps: List[StepLog]
    belief: Belief
    policy: Policy


def training_seed(seed: int, t: int, method: str) -> int:
    """Seed of the training run at checkpoint t, shared with the static harness."""
    return derive_seed(seed, t, METHOD_CODES[method])


def _sample_action(rng: np.random.Generator, row: np.ndarray) -> int:
    a = int((np.cumsum(row) <= rng.random()).sum())
    return min(a, len(row) - 1)


def run_sequential(cfg: SequentialConfig, theta_eval: ModelParams, u: UtilityTable,
                   lam: float, rng_seed: int = 0) -> SequentialResult:
    """
    Simulate the stream and emit a CurveRecord at t=0 and every
    `retrain_every` steps.

    The policy is retrained only when the belief changed since the last fit;
    with warm_start it continues from the incumbent policy.
    """
    if len(cfg.stream) == 0:
        raise InputError("Sequential stream is empty")
    action_rng = np.random.default_rng(derive_seed(rng_seed, ACTION_STREAM_KEY))
    belief = cfg.belief

    def fit(t: int, incumbent: Optional[Policy]) -> Policy:
        tc = replace(cfg.train, lam=lam, seed=training_seed(rng_seed, t, cfg.method),
                     warm_start=incumbent)
        return train(cfg.method, belief, u, tc)

    def record(pi: Policy, t: int) -> CurveRecord:
        return evaluate(pi, theta_eval, u, lam, t, cfg.method, rng_seed, phase="sequential")

    pi = fit(0, cfg.train.warm_start)
    curves = [record(pi, 0)]
    steps: List[StepLog] = []
    updates = 0
    updates_at_fit = 0

    for t, (x, y, z) in enumerate(cfg.stream, start=1):
        if cfg.forced_action is not None:
            a = cfg.forced_action
        else:
            a = _sample_action(action_rng, pi.table[x])
        observed = a == POSITIVE_ACTION if cfg.censoring else True
        if observed:
            belief = observe(belief, (x, y, z))
            updates += 1
        steps.append(StepLog(t=t, action=a, observed=observed, belief_updates=updates))

        if t % cfg.retrain_every == 0:
            if updates != updates_at_fit:
                pi = fit(t, pi if cfg.warm_start else None)
                updates_at_fit = updates
            curves.append(record(pi, t))
            LOG.debug(f"[{cfg.method}] t={t} updates={updates} value={curves[-1].value:.6f}")

    LOG.info(f"[{cfg.method}] {len(cfg.stream)} steps, {updates} belief updates")
    return SequentialResult(curves=curves, steps=steps, belief=belief, policy=pi)
