# shared/model.py
"""
Discrete world models and beliefs over them.

A world model factorizes as

    P(x, y, z) = P(y | x, z) P(x | z) P(z)

and is stored as three row-stochastic tables. Beliefs are either a product of
Dirichlet distributions (one per table row, conjugate to the factorization) or
a weighted finite set of models.

Provides:
- ModelParams construction, validation, joint and conditional tables
- Dirichlet and finite-support beliefs with Bayesian updates
- Seeded sampling of models and datasets
- Empirical (smoothed) estimation from data
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Iterable, List, Sequence, Tuple, Union

import numpy as np

import sys
from pathlib import Path
sys.path.insert(0, str(Path(__file__).parent.parent))
from config import PROB_TOL, PRIOR_ALPHA, HOLDOUT_SMOOTHING, RANDOM_MODEL_ALPHA

from shared.errors import (
    DegenerateEstimate,
    DegenerateOutcome,
    ImpossibleObservation,
    InputError,
)

LOG = logging.getLogger("model")

Seed = Union[int, np.random.Generator, None]
Record = Tuple[int, int, int]


def as_generator(seed: Seed) -> np.random.Generator:
    """Accept either a seed or an existing generator handle."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def derive_seed(seed: int, *keys: int) -> int:
    """Child seed for a (seed, key, ...) path, independent of call order."""
    entropy = [int(seed)] + [int(k) for k in keys]
    if any(v < 0 for v in entropy):
        raise InputError(f"Seeds and keys must be non-negative, got {entropy}")
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def _normalize_rows(counts: np.ndarray) -> np.ndarray:
    """Normalize along the last axis; all-zero rows become uniform."""
    totals = counts.sum(axis=-1, keepdims=True)
    n = counts.shape[-1]
    safe = np.where(totals > 0, totals, 1.0)
    return np.where(totals > 0, counts / safe, 1.0 / n)


def _check_rows(name: str, table: np.ndarray) -> None:
    if not np.all(np.isfinite(table)):
        raise InputError(f"{name} has non-finite entries")
    if np.any(table < 0) or np.any(table > 1):
        raise InputError(f"{name} has entries outside [0, 1]")
    err = np.abs(table.sum(axis=-1) - 1.0).max()
    if err > PROB_TOL:
        raise InputError(f"{name} rows do not sum to 1 (max error {err:.3e})")


# =============================================================================
# Spaces and models
# =============================================================================

@dataclass(frozen=True)
class DiscreteSpace:
    """Sizes of the observation, outcome, sensitive and action spaces."""

    n_x: int
    n_y: int
    n_z: int
    n_a: int

    def __post_init__(self):
        for name in ("n_x", "n_y", "n_z", "n_a"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise InputError(f"{name} must be a positive integer, got {value}")
            object.__setattr__(self, name, int(value))

    @property
    def fairness_ready(self) -> bool:
        """Whether balance and calibration metrics are nontrivial here."""
        return self.n_a >= 2 and self.n_y >= 2 and self.n_z >= 2

    def check_record(self, x: int, y: int, z: int) -> None:
        if not (0 <= x < self.n_x and 0 <= y < self.n_y and 0 <= z < self.n_z):
            raise InputError(f"Record ({x}, {y}, {z}) out of bounds for {self}")

    def to_dict(self) -> Dict:
        return {"n_x": self.n_x, "n_y": self.n_y, "n_z": self.n_z, "n_a": self.n_a}

    @classmethod
    def from_dict(cls, d: Dict) -> "DiscreteSpace":
        return cls(n_x=d["n_x"], n_y=d["n_y"], n_z=d["n_z"], n_a=d["n_a"])


@dataclass(frozen=True, eq=False)
class ModelParams:
    """
    One world model P(x, y, z).

    Tables:
        p_z[z]
        p_x_given_z[z][x]
        p_y_given_xz[x][z][y]
    """

    space: DiscreteSpace
    p_z: np.ndarray
    p_x_given_z: np.ndarray
    p_y_given_xz: np.ndarray

    def __post_init__(self):
        s = self.space
        object.__setattr__(self, "p_z", _frozen(self.p_z))
        object.__setattr__(self, "p_x_given_z", _frozen(self.p_x_given_z))
        object.__setattr__(self, "p_y_given_xz", _frozen(self.p_y_given_xz))
        expected = {
            "p_z": (s.n_z,),
            "p_x_given_z": (s.n_z, s.n_x),
            "p_y_given_xz": (s.n_x, s.n_z, s.n_y),
        }
        for name, shape in expected.items():
            table = getattr(self, name)
            if table.shape != shape:
                raise InputError(f"{name} has shape {table.shape}, expected {shape}")
            _check_rows(name, table)

    @cached_property
    def joint(self) -> np.ndarray:
        """Full joint table indexed [x][y][z]."""
        j = np.einsum("z,zx,xzy->xyz", self.p_z, self.p_x_given_z, self.p_y_given_xz)
        j.setflags(write=False)
        return j

    @classmethod
    def from_joint(cls, space: DiscreteSpace, joint: np.ndarray) -> "ModelParams":
        """Exact re-factorization of a joint table [x][y][z]."""
        joint = np.asarray(joint, dtype=float)
        if joint.shape != (space.n_x, space.n_y, space.n_z):
            raise InputError(f"Joint has shape {joint.shape}, expected "
                             f"{(space.n_x, space.n_y, space.n_z)}")
        p_xz = joint.sum(axis=1)  # [x][z]
        return cls(
            space=space,
            p_z=_normalize_rows(p_xz.sum(axis=0)),
            p_x_given_z=_normalize_rows(p_xz.T),
            p_y_given_xz=_normalize_rows(joint.transpose(0, 2, 1)),
        )

    def to_dict(self) -> Dict:
        return {
            "space": self.space.to_dict(),
            "p_z": self.p_z.tolist(),
            "p_x_given_z": self.p_x_given_z.tolist(),
            "p_y_given_xz": self.p_y_given_xz.tolist(),
        }

    @classmethod
    def from_dict(cls, d: Dict) -> "ModelParams":
        return cls(
            space=DiscreteSpace.from_dict(d["space"]),
            p_z=d["p_z"],
            p_x_given_z=d["p_x_given_z"],
            p_y_given_xz=d["p_y_given_xz"],
        )


def joint_probability(theta: ModelParams, x: int, y: int, z: int) -> float:
    """P(x, y, z) = P(z) P(x | z) P(y | x, z)."""
    theta.space.check_record(x, y, z)
    return float(theta.p_z[z] * theta.p_x_given_z[z, x] * theta.p_y_given_xz[x, z, y])


@dataclass(frozen=True, eq=False)
class ConditionalSet:
    """Conditionals derived from a joint, all by exact summation and division."""

    p_xz_given_y: np.ndarray  # [x][y][z]
    p_x_given_y: np.ndarray  # [x][y]
    p_z_given_y: np.ndarray  # [y][z]
    p_y_given_x: np.ndarray  # [x][y]
    p_x: np.ndarray  # [x]
    p_y: np.ndarray  # [y]
    degenerate_outcomes: Tuple[int, ...] = ()


def conditional_tables(theta: ModelParams, skip_degenerate: bool = False) -> ConditionalSet:
    """
    Derive P(x,z|y), P(x|y), P(z|y), P(y|x) and P(x) from the joint.

    Outcomes with zero marginal probability raise DegenerateOutcome, unless
    skip_degenerate is set; then their slices are zero and the outcome is
    listed in `degenerate_outcomes`.
    """
    j = theta.joint
    p_y = j.sum(axis=(0, 2))
    zero = p_y <= 0.0
    degenerate = tuple(int(y) for y in np.flatnonzero(zero))
    if degenerate and not skip_degenerate:
        raise DegenerateOutcome(degenerate)

    p_xz_given_y = j / np.where(zero, 1.0, p_y)[np.newaxis, :, np.newaxis]
    p_x = j.sum(axis=(1, 2))
    p_xy = j.sum(axis=2)
    safe_x = np.where(p_x > 0, p_x, 1.0)[:, np.newaxis]
    p_y_given_x = np.where(p_x[:, np.newaxis] > 0, p_xy / safe_x, 1.0 / theta.space.n_y)

    return ConditionalSet(
        p_xz_given_y=p_xz_given_y,
        p_x_given_y=p_xz_given_y.sum(axis=2),
        p_z_given_y=p_xz_given_y.sum(axis=0),
        p_y_given_x=p_y_given_x,
        p_x=p_x,
        p_y=p_y,
        degenerate_outcomes=degenerate,
    )


# =============================================================================
# Beliefs
# =============================================================================

@dataclass(frozen=True, eq=False)
class DirichletBelief:
    """Product of independent Dirichlets, one per row of each factor table."""

    space: DiscreteSpace
    alpha_z: np.ndarray
    alpha_x_given_z: np.ndarray
    alpha_y_given_xz: np.ndarray

    def __post_init__(self):
        s = self.space
        object.__setattr__(self, "alpha_z", _frozen(self.alpha_z))
        object.__setattr__(self, "alpha_x_given_z", _frozen(self.alpha_x_given_z))
        object.__setattr__(self, "alpha_y_given_xz", _frozen(self.alpha_y_given_xz))
        expected = {
            "alpha_z": (s.n_z,),
            "alpha_x_given_z": (s.n_z, s.n_x),
            "alpha_y_given_xz": (s.n_x, s.n_z, s.n_y),
        }
        for name, shape in expected.items():
            table = getattr(self, name)
            if table.shape != shape:
                raise InputError(f"{name} has shape {table.shape}, expected {shape}")
            if not np.all(np.isfinite(table)) or np.any(table <= 0):
                raise InputError(f"{name} pseudo-counts must be positive")

    @classmethod
    def symmetric(cls, space: DiscreteSpace, alpha: float = PRIOR_ALPHA) -> "DirichletBelief":
        """Prior with every pseudo-count equal to alpha."""
        return cls(
            space=space,
            alpha_z=np.full(space.n_z, alpha),
            alpha_x_given_z=np.full((space.n_z, space.n_x), alpha),
            alpha_y_given_xz=np.full((space.n_x, space.n_z, space.n_y), alpha),
        )

    @property
    def total_mass(self) -> float:
        return float(self.alpha_z.sum())

    def to_dict(self) -> Dict:
        return {
            "kind": "dirichlet",
            "space": self.space.to_dict(),
            "alpha_z": self.alpha_z.tolist(),
            "alpha_x_given_z": self.alpha_x_given_z.tolist(),
            "alpha_y_given_xz": self.alpha_y_given_xz.tolist(),
        }

    @classmethod
    def from_dict(cls, d: Dict) -> "DirichletBelief":
        return cls(
            space=DiscreteSpace.from_dict(d["space"]),
            alpha_z=d["alpha_z"],
            alpha_x_given_z=d["alpha_x_given_z"],
            alpha_y_given_xz=d["alpha_y_given_xz"],
        )


@dataclass(frozen=True, eq=False)
class FiniteSupportBelief:
    """A probability-weighted finite set of models."""

    models: Tuple[ModelParams, ...]
    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "models", tuple(self.models))
        object.__setattr__(self, "weights", _frozen(self.weights))
        if not self.models:
            raise InputError("Finite-support belief needs at least one model")
        if self.weights.shape != (len(self.models),):
            raise InputError(f"Expected {len(self.models)} weights, got {self.weights.shape}")
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > PROB_TOL:
            raise InputError("Weights must be non-negative and sum to 1")
        space = self.models[0].space
        if any(m.space != space for m in self.models):
            raise InputError("All support models must share one space")

    @property
    def space(self) -> DiscreteSpace:
        return self.models[0].space

    @classmethod
    def uniform(cls, models: Sequence[ModelParams]) -> "FiniteSupportBelief":
        return cls(models=tuple(models), weights=np.full(len(models), 1.0 / len(models)))

    @classmethod
    def point_mass(cls, theta: ModelParams) -> "FiniteSupportBelief":
        return cls(models=(theta,), weights=np.ones(1))

    def support(self) -> List[Tuple[float, ModelParams]]:
        """(weight, model) pairs with positive weight, in support order."""
        return [(float(w), m) for w, m in zip(self.weights, self.models) if w > 0]

    def to_dict(self) -> Dict:
        return {
            "kind": "finite",
            "models": [m.to_dict() for m in self.models],
            "weights": self.weights.tolist(),
        }

    @classmethod
    def from_dict(cls, d: Dict) -> "FiniteSupportBelief":
        return cls(models=tuple(ModelParams.from_dict(m) for m in d["models"]),
                   weights=d["weights"])


Belief = Union[DirichletBelief, FiniteSupportBelief]


def belief_from_dict(d: Dict) -> Belief:
    """Load either belief kind from its dict form."""
    kind = d.get("kind")
    if kind == "dirichlet":
        return DirichletBelief.from_dict(d)
    if kind == "finite":
        return FiniteSupportBelief.from_dict(d)
    raise InputError(f"Unknown belief kind: {kind!r}")


def _dirichlet_rows(rng: np.random.Generator, alpha: np.ndarray) -> np.ndarray:
    gammas = rng.standard_gamma(alpha)
    return _normalize_rows(gammas)


def sample_model(belief: Belief, rng_seed: Seed = None) -> ModelParams:
    """
    Draw one model from the belief.

    Dirichlet rows are drawn in a fixed order (p_z, p_x_given_z, p_y_given_xz)
    so a seed fully determines the result.
    """
    rng = as_generator(rng_seed)
    if isinstance(belief, FiniteSupportBelief):
        idx = int(rng.choice(len(belief.models), p=belief.weights))
        return belief.models[idx]
    return ModelParams(
        space=belief.space,
        p_z=_dirichlet_rows(rng, belief.alpha_z),
        p_x_given_z=_dirichlet_rows(rng, belief.alpha_x_given_z),
        p_y_given_xz=_dirichlet_rows(rng, belief.alpha_y_given_xz),
    )


def marginal_model(belief: Belief) -> ModelParams:
    """
    The belief-averaged model.

    For Dirichlet products this is the row-wise posterior mean. For finite
    support the joints are mixed first and the mixture is re-factored.
    """
    if isinstance(belief, DirichletBelief):
        return ModelParams(
            space=belief.space,
            p_z=_normalize_rows(belief.alpha_z),
            p_x_given_z=_normalize_rows(belief.alpha_x_given_z),
            p_y_given_xz=_normalize_rows(belief.alpha_y_given_xz),
        )
    support = belief.support()
    if len(support) == 1:
        return support[0][1]
    mixture = sum(w * m.joint for w, m in support)
    return ModelParams.from_joint(belief.space, mixture)


def update(belief: DirichletBelief, record: Record) -> DirichletBelief:
    """Conjugate update of every factor row touched by one complete record."""
    x, y, z = (int(v) for v in record)
    belief.space.check_record(x, y, z)
    alpha_z = belief.alpha_z.copy()
    alpha_x = belief.alpha_x_given_z.copy()
    alpha_y = belief.alpha_y_given_xz.copy()
    alpha_z[z] += 1
    alpha_x[z, x] += 1
    alpha_y[x, z, y] += 1
    return DirichletBelief(belief.space, alpha_z, alpha_x, alpha_y)


def update_finite(belief: FiniteSupportBelief, record: Record) -> FiniteSupportBelief:
    """Bayes rule on the support weights."""
    x, y, z = (int(v) for v in record)
    likelihoods = np.array([joint_probability(m, x, y, z) for m in belief.models])
    posterior = belief.weights * likelihoods
    total = posterior.sum()
    if total <= 0:
        raise ImpossibleObservation(f"No support model can produce record ({x}, {y}, {z})")
    return FiniteSupportBelief(models=belief.models, weights=posterior / total)


def observe(belief: Belief, record: Record) -> Belief:
    """Update either belief kind with one complete record."""
    if isinstance(belief, DirichletBelief):
        return update(belief, record)
    return update_finite(belief, record)


def update_many(belief: Belief, records: Iterable[Record]) -> Belief:
    """Fold `observe` over records, in order."""
    if not isinstance(records, Dataset):
        records = Dataset.from_records(belief.space, records)
    if isinstance(belief, DirichletBelief):
        if len(records) == 0:
            return belief
        c_z, c_xz, c_yxz = _counts(belief.space, records.records)
        return DirichletBelief(
            belief.space,
            belief.alpha_z + c_z,
            belief.alpha_x_given_z + c_xz,
            belief.alpha_y_given_xz + c_yxz,
        )
    for record in records:
        belief = update_finite(belief, record)
    return belief


# =============================================================================
# Data
# =============================================================================

@dataclass(frozen=True, eq=False)
class Dataset:
    """Ordered (x, y, z) index records over a space."""

    space: DiscreteSpace
    records: np.ndarray = field(default_factory=lambda: np.zeros((0, 3), dtype=np.int64))

    def __post_init__(self):
        recs = np.array(self.records, dtype=np.int64).reshape(-1, 3)
        if len(recs):
            bounds = np.array([self.space.n_x, self.space.n_y, self.space.n_z])
            if np.any(recs < 0) or np.any(recs >= bounds):
                raise InputError("Dataset record index out of bounds")
        recs.setflags(write=False)
        object.__setattr__(self, "records", recs)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        for x, y, z in self.records:
            yield (int(x), int(y), int(z))

    def __getitem__(self, item: slice) -> "Dataset":
        if not isinstance(item, slice):
            raise TypeError("Dataset supports slicing only")
        return Dataset(self.space, self.records[item])

    @classmethod
    def from_records(cls, space: DiscreteSpace, records: Iterable[Record]) -> "Dataset":
        return cls(space, np.array(list(records), dtype=np.int64).reshape(-1, 3))


def _counts(space: DiscreteSpace, records: np.ndarray):
    x, y, z = records[:, 0], records[:, 1], records[:, 2]
    c_z = np.bincount(z, minlength=space.n_z).astype(float)
    c_xz = np.zeros((space.n_z, space.n_x))
    np.add.at(c_xz, (z, x), 1.0)
    c_yxz = np.zeros((space.n_x, space.n_z, space.n_y))
    np.add.at(c_yxz, (x, z, y), 1.0)
    return c_z, c_xz, c_yxz


def _inverse_cdf(rows: np.ndarray, u: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(rows, axis=-1)
    idx = (cdf <= u[:, np.newaxis]).sum(axis=1)
    return np.minimum(idx, rows.shape[-1] - 1)


def sample_dataset(theta: ModelParams, n: int, rng_seed: Seed = None) -> Dataset:
    """Draw n i.i.d. records z -> x -> y."""
    if n < 0:
        raise InputError(f"n must be non-negative, got {n}")
    rng = as_generator(rng_seed)
    u = rng.random((n, 3))
    z = _inverse_cdf(np.broadcast_to(theta.p_z, (n, theta.space.n_z)), u[:, 0])
    x = _inverse_cdf(theta.p_x_given_z[z], u[:, 1])
    y = _inverse_cdf(theta.p_y_given_xz[x, z], u[:, 2])
    return Dataset(theta.space, np.stack([x, y, z], axis=1))


def empirical_model(dataset: Dataset, smoothing: float = HOLDOUT_SMOOTHING) -> ModelParams:
    """
    Smoothed frequency estimate of each factor table.

    Same arithmetic as the posterior mean of a symmetric Dirichlet(smoothing)
    prior updated on the dataset.
    """
    if smoothing < 0:
        raise InputError(f"smoothing must be non-negative, got {smoothing}")
    if len(dataset) == 0 and smoothing == 0:
        raise DegenerateEstimate("Empty dataset with zero smoothing")
    c_z, c_xz, c_yxz = _counts(dataset.space, dataset.records)
    return ModelParams(
        space=dataset.space,
        p_z=_normalize_rows(smoothing + c_z),
        p_x_given_z=_normalize_rows(smoothing + c_xz),
        p_y_given_xz=_normalize_rows(smoothing + c_yxz),
    )


# =============================================================================
# Random models and synthetic priors
# =============================================================================

def random_model(space: DiscreteSpace, rng_seed: Seed = None,
                 alpha: float = RANDOM_MODEL_ALPHA) -> ModelParams:
    """Model with every factor row drawn from a symmetric Dirichlet(alpha)."""
    return sample_model(DirichletBelief.symmetric(space, alpha), rng_seed)


def finite_support_prior(theta_star: ModelParams, n_models: int,
                         rng_seed: Seed = None) -> FiniteSupportBelief:
    """
    Uniform prior over n_models models, one of which is theta_star.

    The other models are random; theta_star sits at a seeded random position.
    """
    if n_models < 1:
        raise InputError(f"n_models must be >= 1, got {n_models}")
    rng = as_generator(rng_seed)
    models = [random_model(theta_star.space, rng) for _ in range(n_models - 1)]
    models.insert(int(rng.integers(n_models)), theta_star)
    return FiniteSupportBelief.uniform(models)
