# shared/__init__.py
"""
Core modules for BayesFair: world models, beliefs, fairness metrics, policies.
"""

from .errors import (
    BayesFairError,
    ConfigError,
    DegenerateEstimate,
    DegenerateOutcome,
    DegeneratePolicy,
    ImpossibleObservation,
    InputError,
    SchemaError,
)

from .model import (
    Dataset,
    DirichletBelief,
    DiscreteSpace,
    FiniteSupportBelief,
    ModelParams,
    conditional_tables,
    empirical_model,
    finite_support_prior,
    joint_probability,
    marginal_model,
    observe,
    random_model,
    sample_dataset,
    sample_model,
    update,
    update_finite,
    update_many,
)

from .fairness import (
    accuracy_certificate,
    balance_deviation,
    bayes_balance,
    calibration_deviation,
    delta_table,
    impossibility_check,
    marginal_balance,
)

from .policy import (
    Parameterization,
    Policy,
    TrainConfig,
    UtilityTable,
    bayes_optimal_rule,
    expected_utility,
    finite_difference_gradient,
    gradient,
    objective_value,
    train,
    train_bayes,
    train_marginal,
)

from .simplex import project_simplex

__all__ = [
    "BayesFairError",
    "ConfigError",
    "DegenerateEstimate",
    "DegenerateOutcome",
    "DegeneratePolicy",
    "ImpossibleObservation",
    "InputError",
    "SchemaError",
    "Dataset",
    "DirichletBelief",
    "DiscreteSpace",
    "FiniteSupportBelief",
    "ModelParams",
    "conditional_tables",
    "empirical_model",
    "finite_support_prior",
    "joint_probability",
    "marginal_model",
    "observe",
    "random_model",
    "sample_dataset",
    "sample_model",
    "update",
    "update_finite",
    "update_many",
    "accuracy_certificate",
    "balance_deviation",
    "bayes_balance",
    "calibration_deviation",
    "delta_table",
    "impossibility_check",
    "marginal_balance",
    "Parameterization",
    "Policy",
    "TrainConfig",
    "UtilityTable",
    "bayes_optimal_rule",
    "expected_utility",
    "finite_difference_gradient",
    "gradient",
    "objective_value",
    "train",
    "train_bayes",
    "train_marginal",
    "project_simplex",
]
