# shared/policy.py
"""
Stochastic decision rules and their optimization.

A policy pi(a | x) is stored either as unconstrained logits (resolved with a
row-wise softmax) or directly as simplex rows (kept feasible by Euclidean
projection after every step). Training maximizes

    V_theta(pi) = (1 - lambda) E[u] - lambda C_2(pi, theta)

by gradient ascent, either averaged over the posterior (Bayesian) or on the
posterior-mean model (marginal).
"""

import logging
from dataclasses import dataclass, replace
from enum import Enum
from functools import cached_property
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import softmax

import sys
from pathlib import Path
sys.path.insert(0, str(Path(__file__).parent.parent))
from config import (
    LEARNING_RATE,
    PROB_TOL,
    TRAIN_EXPONENT,
    TRAIN_K_SAMPLES,
    TRAIN_STEPS,
)

from shared.errors import ConfigError, InputError
from shared.fairness import balance_deviation, balance_terms, delta_table
from shared.model import (
    Belief,
    DiscreteSpace,
    FiniteSupportBelief,
    ModelParams,
    Seed,
    as_generator,
    conditional_tables,
    marginal_model,
    sample_model,
)
from shared.simplex import project_simplex

LOG = logging.getLogger("policy")

PROGRESS_EVERY = 500


class Parameterization(str, Enum):
    """How policy parameters map to action probabilities."""
    LOGITS = "logits"    # pi(.|x) = softmax(w[x])
    SIMPLEX = "simplex"  # pi(.|x) = w[x], projected after each step


def resolve(params: np.ndarray, parameterization: Parameterization) -> np.ndarray:
    """Action table pi[x][a] for raw parameters (no validation)."""
    if parameterization == Parameterization.LOGITS:
        return softmax(params, axis=1)
    return params


@dataclass(frozen=True, eq=False)
class Policy:
    """A stochastic decision rule pi(a | x) over a discrete space."""

    space: DiscreteSpace
    params: np.ndarray
    parameterization: Parameterization = Parameterization.LOGITS

    def __post_init__(self):
        params = np.array(self.params, dtype=float, copy=True)
        if params.shape != (self.space.n_x, self.space.n_a):
            raise InputError(f"Policy params have shape {params.shape}, expected "
                             f"{(self.space.n_x, self.space.n_a)}")
        if not np.all(np.isfinite(params)):
            raise InputError("Policy params must be finite")
        params.setflags(write=False)
        object.__setattr__(self, "params", params)
        object.__setattr__(self, "parameterization", Parameterization(self.parameterization))
        if self.parameterization == Parameterization.SIMPLEX:
            if np.any(params < 0) or np.abs(params.sum(axis=1) - 1.0).max() > PROB_TOL:
                raise InputError("Simplex policy rows must be probability vectors")

    @cached_property
    def table(self) -> np.ndarray:
        """pi[x][a]."""
        table = resolve(self.params, self.parameterization)
        table.setflags(write=False)
        return table

    @classmethod
    def uniform(cls, space: DiscreteSpace,
                parameterization: Parameterization = Parameterization.LOGITS) -> "Policy":
        if Parameterization(parameterization) == Parameterization.LOGITS:
            return cls(space, np.zeros((space.n_x, space.n_a)), Parameterization.LOGITS)
        return cls(space, np.full((space.n_x, space.n_a), 1.0 / space.n_a),
                   Parameterization.SIMPLEX)

    @classmethod
    def trivial(cls, space: DiscreteSpace, p_a: Sequence[float]) -> "Policy":
        """The x-independent rule pi(a | x) = p_a."""
        row = np.asarray(p_a, dtype=float)
        return cls(space, np.tile(row, (space.n_x, 1)), Parameterization.SIMPLEX)

    @classmethod
    def deterministic(cls, space: DiscreteSpace, actions: Sequence[int]) -> "Policy":
        """One action per observation."""
        table = np.zeros((space.n_x, space.n_a))
        table[np.arange(space.n_x), np.asarray(actions, dtype=int)] = 1.0
        return cls(space, table, Parameterization.SIMPLEX)

    def with_params(self, params: np.ndarray) -> "Policy":
        return Policy(self.space, params, self.parameterization)

    def to_dict(self) -> Dict:
        return {
            "space": self.space.to_dict(),
            "parameterization": self.parameterization.value,
            "params": self.params.tolist(),
        }

    @classmethod
    def from_dict(cls, d: Dict) -> "Policy":
        return cls(
            space=DiscreteSpace.from_dict(d["space"]),
            params=d["params"],
            parameterization=Parameterization(d["parameterization"]),
        )


@dataclass(frozen=True, eq=False)
class UtilityTable:
    """u[y][a]."""

    u: np.ndarray

    def __post_init__(self):
        u = np.array(self.u, dtype=float, copy=True)
        if u.ndim != 2 or not np.all(np.isfinite(u)):
            raise InputError("Utility must be a finite [y][a] table")
        u.setflags(write=False)
        object.__setattr__(self, "u", u)

    @classmethod
    def indicator(cls, n_y: int, n_a: int) -> "UtilityTable":
        """u(y, a) = 1[a = y]."""
        return cls(np.eye(n_y, n_a))

    def check_space(self, space: DiscreteSpace) -> None:
        if self.u.shape != (space.n_y, space.n_a):
            raise InputError(f"Utility has shape {self.u.shape}, expected "
                             f"{(space.n_y, space.n_a)}")

    def to_dict(self) -> Dict:
        return {"u": self.u.tolist()}

    @classmethod
    def from_dict(cls, d: Dict) -> "UtilityTable":
        return cls(d["u"])


@dataclass(frozen=True, eq=False)
class TrainConfig:
    """Hyperparameters of one training run."""

    lam: float = 0.0
    p: int = TRAIN_EXPONENT
    steps: int = TRAIN_STEPS
    learning_rate: float = LEARNING_RATE
    k_samples: int = TRAIN_K_SAMPLES
    seed: int = 0
    parameterization: Parameterization = Parameterization.LOGITS
    warm_start: Optional[Policy] = None

    def __post_init__(self):
        object.__setattr__(self, "parameterization", Parameterization(self.parameterization))
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigError(f"lambda must be in [0, 1], got {self.lam}")
        if self.p != TRAIN_EXPONENT:
            raise ConfigError(f"Training uses p={TRAIN_EXPONENT}, got {self.p}")
        if self.steps < 0:
            raise ConfigError(f"steps must be >= 0, got {self.steps}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.k_samples < 1:
            raise ConfigError(f"k_samples must be >= 1, got {self.k_samples}")

    def with_overrides(self, **changes) -> "TrainConfig":
        return replace(self, **{k: v for k, v in changes.items() if v is not None})

    def to_dict(self) -> Dict:
        return {
            "lambda": self.lam,
            "p": self.p,
            "steps": self.steps,
            "learning_rate": self.learning_rate,
            "k_samples": self.k_samples,
            "seed": self.seed,
            "parameterization": self.parameterization.value,
        }

    @classmethod
    def from_dict(cls, d: Dict) -> "TrainConfig":
        return cls(
            lam=float(d.get("lambda", 0.0)),
            p=int(d.get("p", TRAIN_EXPONENT)),
            steps=int(d.get("steps", TRAIN_STEPS)),
            learning_rate=float(d.get("learning_rate", LEARNING_RATE)),
            k_samples=int(d.get("k_samples", TRAIN_K_SAMPLES)),
            seed=int(d.get("seed", 0)),
            parameterization=Parameterization(d.get("parameterization", "logits")),
        )


# =============================================================================
# Objective
# =============================================================================

def _check_lambda(lam: float) -> None:
    if not 0.0 <= lam <= 1.0:
        raise InputError(f"lambda must be in [0, 1], got {lam}")


def expected_utility(pi: Policy, theta: ModelParams, u: UtilityTable) -> float:
    """sum_x P(x) sum_a pi(a|x) sum_y P(y|x) u(y, a)."""
    if pi.space != theta.space:
        raise InputError("Policy and model spaces differ")
    u.check_space(theta.space)
    cond = conditional_tables(theta, skip_degenerate=True)
    p_xy = cond.p_x[:, np.newaxis] * cond.p_y_given_x
    return float(np.einsum("xy,xa,ya->", p_xy, pi.table, u.u))


def objective_value(pi: Policy, theta: ModelParams, u: UtilityTable, lam: float) -> float:
    """(1 - lambda) E[u] - lambda C_2(pi, theta)."""
    _check_lambda(lam)
    return ((1.0 - lam) * expected_utility(pi, theta, u)
            - lam * balance_deviation(pi, theta, TRAIN_EXPONENT).aggregate_p)


class ModelTerms:
    """Per-model quantities reused across gradient steps."""

    def __init__(self, theta: ModelParams, u: UtilityTable):
        u.check_space(theta.space)
        cond = conditional_tables(theta, skip_degenerate=True)
        p_xy = cond.p_x[:, np.newaxis] * cond.p_y_given_x
        # P(x) E[u | x, a]
        self.utility = p_xy @ u.u
        self.delta = delta_table(theta).values

    def objective(self, table: np.ndarray, lam: float) -> float:
        c = balance_terms(table, self.delta)
        return float((1.0 - lam) * np.sum(self.utility * table) - lam * np.sum(c ** 2))

    def table_gradient(self, table: np.ndarray, lam: float) -> np.ndarray:
        """dV / dpi[x][a]."""
        c = balance_terms(table, self.delta)
        fairness = np.einsum("ayz,xyz->xa", c, self.delta)
        return (1.0 - lam) * self.utility - 2.0 * lam * fairness


def _chain(table: np.ndarray, table_grad: np.ndarray,
           parameterization: Parameterization) -> np.ndarray:
    """Map a gradient w.r.t. pi[x][a] to one w.r.t. the raw parameters."""
    if parameterization == Parameterization.LOGITS:
        # softmax Jacobian: dpi(a|x)/dw(b|x) = pi(a|x) (1[a=b] - pi(b|x))
        centered = table_grad - np.sum(table_grad * table, axis=1, keepdims=True)
        return table * centered
    return table_grad


def gradient(pi: Policy, theta: ModelParams, u: UtilityTable, lam: float) -> np.ndarray:
    """Analytic gradient of objective_value w.r.t. the policy parameters."""
    _check_lambda(lam)
    if pi.space != theta.space:
        raise InputError("Policy and model spaces differ")
    terms = ModelTerms(theta, u)
    return _chain(pi.table, terms.table_gradient(pi.table, lam), pi.parameterization)


def finite_difference_gradient(pi: Policy, theta: ModelParams, u: UtilityTable,
                               lam: float, h: float = 1e-5) -> np.ndarray:
    """Central differences of objective_value, one parameter at a time."""
    if h <= 0:
        raise InputError(f"h must be positive, got {h}")
    _check_lambda(lam)
    terms = ModelTerms(theta, u)
    params = np.array(pi.params, dtype=float)
    grad = np.zeros_like(params)
    for idx in np.ndindex(params.shape):
        plus = params.copy()
        minus = params.copy()
        plus[idx] += h
        minus[idx] -= h
        f_plus = terms.objective(resolve(plus, pi.parameterization), lam)
        f_minus = terms.objective(resolve(minus, pi.parameterization), lam)
        grad[idx] = (f_plus - f_minus) / (2.0 * h)
    return grad


def ascent_step(pi: Policy, grad: np.ndarray, learning_rate: float) -> Policy:
    """One gradient ascent step, projecting simplex rows back if needed."""
    params = pi.params + learning_rate * grad
    if pi.parameterization == Parameterization.SIMPLEX:
        params = project_simplex(params)
    return pi.with_params(params)


def bayes_optimal_rule(belief: Belief, u: UtilityTable) -> Policy:
    """
    Deterministic rule maximizing expected utility under the marginal model.

    Ties go to the lowest action index.
    """
    theta = marginal_model(belief)
    u.check_space(theta.space)
    cond = conditional_tables(theta, skip_degenerate=True)
    scores = cond.p_y_given_x @ u.u
    return Policy.deterministic(theta.space, np.argmax(scores, axis=1))


def posterior_expected_objective(pi: Policy, belief: Belief, u: UtilityTable, lam: float,
                                 k: int = TRAIN_K_SAMPLES, rng_seed: Seed = None) -> float:
    """E_belief V_theta(pi); exact for finite support, k samples otherwise."""
    if isinstance(belief, FiniteSupportBelief):
        return float(sum(w * objective_value(pi, theta, u, lam) for w, theta in belief.support()))
    if k < 1:
        raise InputError(f"k must be >= 1, got {k}")
    rng = as_generator(rng_seed)
    return float(np.mean([objective_value(pi, sample_model(belief, rng), u, lam)
                          for _ in range(k)]))


# =============================================================================
# Trainers
# =============================================================================

def initial_policy(space: DiscreteSpace, cfg: TrainConfig) -> Policy:
    """The warm start if given, otherwise the uniform policy."""
    if cfg.warm_start is not None:
        if cfg.warm_start.space != space:
            raise ConfigError("Warm-start policy space does not match the belief")
        return cfg.warm_start
    return Policy.uniform(space, cfg.parameterization)


def _weighted_gradient(pi: Policy, weighted_terms: List[Tuple[float, ModelTerms]],
                       lam: float) -> np.ndarray:
    table = pi.table
    table_grad = np.zeros_like(table)
    for w, terms in weighted_terms:
        table_grad += w * terms.table_gradient(table, lam)
    return _chain(table, table_grad, pi.parameterization)


def _run(pi: Policy, cfg: TrainConfig, step_terms: Callable[[], List[Tuple[float, ModelTerms]]],
         label: str) -> Policy:
    for step in range(cfg.steps):
        weighted = step_terms()
        pi = ascent_step(pi, _weighted_gradient(pi, weighted, cfg.lam), cfg.learning_rate)
        if LOG.isEnabledFor(logging.DEBUG) and (step + 1) % PROGRESS_EVERY == 0:
            value = sum(w * t.objective(pi.table, cfg.lam) for w, t in weighted)
            LOG.debug(f"[{label}] step {step + 1}/{cfg.steps}: objective {value:.6f}")
    return pi


def train_bayes(belief: Belief, u: UtilityTable, cfg: TrainConfig) -> Policy:
    """
    Stochastic gradient ascent on the posterior-expected objective.

    Each step averages the gradient over k_samples posterior draws; for
    finite-support beliefs the exact posterior-weighted gradient is used.
    """
    space = belief.space
    u.check_space(space)
    pi = initial_policy(space, cfg)

    if isinstance(belief, FiniteSupportBelief):
        fixed = [(w, ModelTerms(theta, u)) for w, theta in belief.support()]
        return _run(pi, cfg, lambda: fixed, "bayes")

    rng = as_generator(cfg.seed)
    weight = 1.0 / cfg.k_samples

    def sampled():
        return [(weight, ModelTerms(sample_model(belief, rng), u))
                for _ in range(cfg.k_samples)]

    return _run(pi, cfg, sampled, "bayes")


def train_marginal(belief: Belief, u: UtilityTable, cfg: TrainConfig) -> Policy:
    """Steepest ascent on the objective under the marginal model."""
    u.check_space(belief.space)
    pi = initial_policy(belief.space, cfg)
    fixed = [(1.0, ModelTerms(marginal_model(belief), u))]
    return _run(pi, cfg, lambda: fixed, "marginal")


TRAINERS = {
    "bayes": train_bayes,
    "marginal": train_marginal,
}


def train(method: str, belief: Belief, u: UtilityTable, cfg: TrainConfig) -> Policy:
    """Dispatch to a trainer by method name."""
    try:
        trainer = TRAINERS[method]
    except KeyError:
        raise ConfigError(f"Unknown method {method!r}; expected one of {sorted(TRAINERS)}")
    return trainer(belief, u, cfg)
