# shared/fairness.py
"""
Balance and calibration metrics for stochastic decision rules.

Balance asks that the action and the sensitive attribute be independent
given the outcome. For a model theta it is measured through

    Delta(x, y, z) = P(x, z | y) - P(x | y) P(z | y)
    c(a, y, z)     = sum_x pi(a | x) Delta(x, y, z)
    C_p(pi, theta) = sum_{a,y,z} |c(a, y, z)|^p

Calibration asks that the outcome and the sensitive attribute be independent
given the action, and is evaluated on the induced joint P(x,y,z) pi(a|x).

Also provides the Bayesian (posterior-averaged) and marginal versions of the
balance metric, and runtime checkers for the results that relate them.
"""

import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Dict, Tuple

import numpy as np

import sys
from pathlib import Path
sys.path.insert(0, str(Path(__file__).parent.parent))
from config import EVAL_EXPONENT, EVAL_K_SAMPLES

from shared.errors import DegeneratePolicy, InputError
from shared.model import (
    Belief,
    FiniteSupportBelief,
    ModelParams,
    Seed,
    as_generator,
    conditional_tables,
    marginal_model,
    sample_model,
)

if TYPE_CHECKING:
    from shared.policy import Policy

LOG = logging.getLogger("fairness")

SUPPORTED_EXPONENTS = (1, 2)


def _check_exponent(p: int) -> None:
    if p not in SUPPORTED_EXPONENTS:
        raise InputError(f"Exponent p must be one of {SUPPORTED_EXPONENTS}, got {p}")


def _check_space(pi: "Policy", theta: ModelParams) -> None:
    if pi.space != theta.space:
        raise InputError(f"Policy space {pi.space} does not match model space {theta.space}")


def induced_joint(pi: "Policy", theta: ModelParams) -> np.ndarray:
    """P(a, y, z) under the model and the policy, indexed [a][y][z]."""
    return np.einsum("xa,xyz->ayz", pi.table, theta.joint)


# =============================================================================
# Balance
# =============================================================================

@dataclass(frozen=True, eq=False)
class DeltaTable:
    """Delta[x][y][z]; slices of zero-mass outcomes are zero and flagged."""

    values: np.ndarray
    degenerate_outcomes: Tuple[int, ...] = ()


def delta_table(theta: ModelParams) -> DeltaTable:
    """Per-observation dependence residual between x and z given y."""
    cond = conditional_tables(theta, skip_degenerate=True)
    if cond.degenerate_outcomes:
        LOG.warning(f"Skipping zero-mass outcomes {list(cond.degenerate_outcomes)}")
    values = (cond.p_xz_given_y
              - cond.p_x_given_y[:, :, np.newaxis] * cond.p_z_given_y[np.newaxis, :, :])
    return DeltaTable(values=values, degenerate_outcomes=cond.degenerate_outcomes)


@dataclass(frozen=True, eq=False)
class BalanceReport:
    """Per-(a, y, z) balance terms and their p-power sum."""

    per_term: np.ndarray
    aggregate_p: float
    p: int

    @property
    def deviation(self) -> float:
        """The reported scalar, aggregate_p ** (1/p)."""
        return float(self.aggregate_p ** (1.0 / self.p))

    def to_dict(self) -> Dict:
        return {
            "per_term": self.per_term.tolist(),
            "aggregate_p": self.aggregate_p,
            "p": self.p,
            "deviation": self.deviation,
        }


def balance_terms(table: np.ndarray, delta: np.ndarray) -> np.ndarray:
    """c[a][y][z] = sum_x table[x][a] delta[x][y][z]."""
    return np.einsum("xa,xyz->ayz", table, delta)


def balance_deviation(pi: "Policy", theta: ModelParams, p: int = EVAL_EXPONENT) -> BalanceReport:
    """Deviation from balance of pi under theta."""
    _check_exponent(p)
    _check_space(pi, theta)
    terms = balance_terms(pi.table, delta_table(theta).values)
    return BalanceReport(per_term=terms, aggregate_p=float(np.sum(np.abs(terms) ** p)), p=p)


@dataclass(frozen=True)
class BayesBalanceEstimate:
    """Posterior expectation of C_p, with its Monte Carlo standard error."""

    value: float
    deviation: float
    std_error: float
    k: int
    exact: bool

    def to_dict(self) -> Dict:
        return {
            "value": self.value,
            "deviation": self.deviation,
            "std_error": self.std_error,
            "k": self.k,
            "exact": self.exact,
        }


def bayes_balance(
    pi: "Policy",
    belief: Belief,
    p: int = EVAL_EXPONENT,
    k: int = EVAL_K_SAMPLES,
    rng_seed: Seed = None,
) -> BayesBalanceEstimate:
    """
    Posterior-averaged balance deviation f(pi) = E_belief C_p(pi, theta).

    Finite-support beliefs are summed exactly; Dirichlet beliefs are estimated
    from k posterior samples.
    """
    _check_exponent(p)
    if isinstance(belief, FiniteSupportBelief):
        value = 0.0
        for w, theta in belief.support():
            value += w * balance_deviation(pi, theta, p).aggregate_p
        return BayesBalanceEstimate(value=value, deviation=value ** (1.0 / p),
                                    std_error=0.0, k=len(belief.models), exact=True)

    if k < 1:
        raise InputError(f"k must be >= 1, got {k}")
    rng = as_generator(rng_seed)
    samples = np.array([balance_deviation(pi, sample_model(belief, rng), p).aggregate_p
                        for _ in range(k)])
    value = float(samples.mean())
    std_error = float(samples.std(ddof=1) / np.sqrt(k)) if k > 1 else 0.0
    return BayesBalanceEstimate(value=value, deviation=value ** (1.0 / p),
                                std_error=std_error, k=k, exact=False)


def marginal_balance(pi: "Policy", belief: Belief, p: int = EVAL_EXPONENT) -> float:
    """Balance deviation of pi under the marginal model of the belief."""
    return balance_deviation(pi, marginal_model(belief), p).aggregate_p


# =============================================================================
# Calibration
# =============================================================================

@dataclass(frozen=True, eq=False)
class CalibrationReport:
    per_term: np.ndarray  # [a][y][z]
    value: float
    skipped_actions: Tuple[int, ...] = ()


def calibration_report(pi: "Policy", theta: ModelParams) -> CalibrationReport:
    """Terms P(y,z|a) - P(y|a)P(z|a); zero-mass actions are skipped."""
    _check_space(pi, theta)
    p_ayz = induced_joint(pi, theta)
    p_a = p_ayz.sum(axis=(1, 2))
    zero = p_a <= 0.0
    if zero.all():
        raise DegeneratePolicy("Every action has zero probability")
    skipped = tuple(int(a) for a in np.flatnonzero(zero))
    if skipped:
        LOG.warning(f"Skipping zero-mass actions {list(skipped)}")

    p_yz_given_a = p_ayz / np.where(zero, 1.0, p_a)[:, np.newaxis, np.newaxis]
    p_y_given_a = p_yz_given_a.sum(axis=2)
    p_z_given_a = p_yz_given_a.sum(axis=1)
    terms = p_yz_given_a - p_y_given_a[:, :, np.newaxis] * p_z_given_a[:, np.newaxis, :]
    return CalibrationReport(per_term=terms, value=float(np.abs(terms).sum()),
                             skipped_actions=skipped)


def calibration_deviation(pi: "Policy", theta: ModelParams) -> float:
    """Sum over (a, y, z) of |P(y,z|a) - P(y|a)P(z|a)|."""
    return calibration_report(pi, theta).value


# =============================================================================
# Theoretical checkers
# =============================================================================

@dataclass(frozen=True)
class ImpossibilityReport:
    """Which of calibration, balance and the two escape clauses hold."""

    calibrated: bool
    balanced: bool
    z_y_independent: bool
    perfect_slice: bool
    calibration: float
    balance: float

    @property
    def consistent(self) -> bool:
        """Calibrated and balanced only when an escape clause applies."""
        if self.calibrated and self.balanced:
            return self.z_y_independent or self.perfect_slice
        return True

    def to_dict(self) -> Dict:
        return {
            "calibrated": self.calibrated,
            "balanced": self.balanced,
            "z_y_independent": self.z_y_independent,
            "perfect_slice": self.perfect_slice,
            "consistent": self.consistent,
            "calibration": self.calibration,
            "balance": self.balance,
        }


def impossibility_check(pi: "Policy", theta: ModelParams, tol: float = 1e-6) -> ImpossibilityReport:
    """
    Evaluate calibration and balance against tol, together with the escape
    clauses under which both may hold: z independent of y, or some (a, y) with
    P(y|a) = 0 or P(a|y) = 0.
    """
    calibration = calibration_deviation(pi, theta)
    balance = balance_deviation(pi, theta, 1).aggregate_p

    cond = conditional_tables(theta, skip_degenerate=True)
    live_y = np.flatnonzero(cond.p_y > 0)
    p_z_given_y = cond.p_z_given_y[live_y]
    z_y_independent = bool(np.all(np.abs(p_z_given_y - p_z_given_y[0]) <= tol))

    p_ay = induced_joint(pi, theta).sum(axis=2)
    p_a = p_ay.sum(axis=1)
    p_y = p_ay.sum(axis=0)
    live_a = p_a > 0
    y_given_a = p_ay[live_a] / p_a[live_a, np.newaxis]
    a_given_y = p_ay[:, p_y > 0] / p_y[p_y > 0]
    perfect_slice = bool(np.any(y_given_a <= tol) or np.any(a_given_y <= tol))

    report = ImpossibilityReport(
        calibrated=calibration <= tol,
        balanced=balance <= tol,
        z_y_independent=z_y_independent,
        perfect_slice=perfect_slice,
        calibration=calibration,
        balance=balance,
    )
    if not report.consistent:
        LOG.error(f"Calibrated and balanced without an escape clause: {report}")
    return report


@dataclass(frozen=True)
class AccuracyCertificate:
    """Accuracy of a belief around a reference model, and the balance bound it implies."""

    epsilon: float
    delta: float
    alpha: float
    bound: float
    distance: str

    def to_dict(self) -> Dict:
        return {
            "epsilon": self.epsilon,
            "delta": self.delta,
            "alpha": self.alpha,
            "bound": self.bound,
            "distance": self.distance,
        }


DISTANCES = ("total_variation", "pointwise")


def _accuracy_tables(theta: ModelParams):
    j = theta.joint
    p_yz = j.sum(axis=0)  # [y][z]
    p_y = p_yz.sum(axis=1)
    x_given_yz = j / np.where(p_yz > 0, p_yz, 1.0)[np.newaxis]
    x_given_y = j.sum(axis=2) / np.where(p_y > 0, p_y, 1.0)[np.newaxis]
    z_given_y = p_yz / np.where(p_y > 0, p_y, 1.0)[:, np.newaxis]
    return x_given_yz, x_given_y, z_given_y


def model_distance(theta: ModelParams, theta_star: ModelParams,
                   distance: str = "total_variation") -> float:
    """
    Distance between two models in the conditionals that drive balance.

    "pointwise" is the largest entrywise gap in P(x|y,z) and P(x|y).
    "total_variation" is the largest, over (y, z), of the L1 gaps of
    P(.|y,z) and P(.|y) together with the gap in P(z|y); it is the reading
    under which the certificate bound holds for any |X|.
    """
    if distance not in DISTANCES:
        raise InputError(f"Unknown distance {distance!r}; expected one of {DISTANCES}")
    a, b, q = _accuracy_tables(theta)
    a_star, b_star, q_star = _accuracy_tables(theta_star)
    if distance == "pointwise":
        return float(max(np.abs(a - a_star).max(), np.abs(b - b_star).max()))
    return float(max(
        np.abs(a - a_star).sum(axis=0).max(),
        np.abs(b - b_star).sum(axis=0).max(),
        np.abs(q - q_star).max(),
    ))


def accuracy_certificate(
    belief: Belief,
    theta_star: ModelParams,
    epsilon: float,
    k: int = EVAL_K_SAMPLES,
    rng_seed: Seed = None,
    alpha: float = 0.0,
    distance: str = "total_variation",
) -> AccuracyCertificate:
    """
    Certify how accurate a belief is around theta_star.

    delta is the belief mass of models farther than epsilon from theta_star
    (exact for finite support, Monte Carlo over k samples for Dirichlet). Any
    policy whose (alpha, 1) Bayesian balance holds under the belief has
    balance deviation at most alpha + 2|A||Z||Y|(epsilon + delta) under
    theta_star.
    """
    if epsilon <= 0:
        raise InputError(f"epsilon must be positive, got {epsilon}")
    if isinstance(belief, FiniteSupportBelief):
        delta = sum(w for w, theta in belief.support()
                    if model_distance(theta, theta_star, distance) > epsilon)
    else:
        if k < 1:
            raise InputError(f"k must be >= 1, got {k}")
        rng = as_generator(rng_seed)
        far = sum(model_distance(sample_model(belief, rng), theta_star, distance) > epsilon
                  for _ in range(k))
        delta = far / k
    delta = float(min(max(delta, 0.0), 1.0))

    s = theta_star.space
    bound = alpha + 2 * s.n_a * s.n_z * s.n_y * (epsilon + delta)
    return AccuracyCertificate(epsilon=epsilon, delta=delta, alpha=alpha,
                               bound=float(bound), distance=distance)
