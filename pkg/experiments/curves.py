# experiments/curves.py
"""
Evaluation records and their CSV form.

One CurveRecord is the performance of a trained policy at a point of an
experiment: t observations consumed, a method, a lambda, and the utility,
fairness and value measured against the evaluation model.
"""

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Sequence, Union

import numpy as np
import pandas as pd

from shared.errors import InputError
from shared.fairness import balance_deviation
from shared.model import ModelParams
from shared.policy import Policy, UtilityTable, expected_utility

LOG = logging.getLogger("curves")

PathLike = Union[str, Path]

CURVE_COLUMNS = ["t", "method", "lambda", "utility", "fairness", "value", "seed"]
PHASE_COLUMN = "phase"
METHODS = ("bayes", "marginal")


@dataclass(frozen=True)
class CurveRecord:
    """One evaluation point of a policy."""

    t: int
    method: str
    lam: float
    utility: float
    fairness: float
    value: float
    seed: int
    phase: str = "static"

    def __post_init__(self):
        if self.method not in METHODS:
            raise InputError(f"Unknown method {self.method!r}")

    @property
    def sort_key(self):
        return (self.lam, self.method, self.seed, self.t)

    def to_row(self, include_phase: bool = False) -> List[str]:
        row = [str(self.t), self.method, repr(float(self.lam)), repr(float(self.utility)),
               repr(float(self.fairness)), repr(float(self.value)), str(self.seed)]
        if include_phase:
            row.append(self.phase)
        return row

    def to_dict(self) -> Dict:
        return {
            "t": self.t,
            "method": self.method,
            "lambda": self.lam,
            "utility": self.utility,
            "fairness": self.fairness,
            "value": self.value,
            "seed": self.seed,
            "phase": self.phase,
        }


def evaluate(pi: Policy, theta_eval: ModelParams, u: UtilityTable, lam: float, t: int,
             method: str, seed: int, phase: str = "static") -> CurveRecord:
    """Measure U, F (p=1 balance deviation) and V = (1 - lambda) U - lambda F."""
    utility = expected_utility(pi, theta_eval, u)
    fairness = balance_deviation(pi, theta_eval, 1).deviation
    value = (1.0 - lam) * utility - lam * fairness
    return CurveRecord(t=int(t), method=method, lam=float(lam), utility=utility,
                       fairness=fairness, value=value, seed=int(seed), phase=phase)


def emit_curves(records: Sequence[CurveRecord], path: PathLike,
                include_phase: bool = False) -> Path:
    """
    Write records as CSV sorted by (lambda, method, seed, t).

    Floats are written with repr, so identical records give identical bytes
    and parse back exactly.
    """
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(CURVE_COLUMNS + ([PHASE_COLUMN] if include_phase else []))
            for record in sorted(records, key=lambda r: r.sort_key):
                writer.writerow(record.to_row(include_phase))
    except OSError as e:
        raise InputError(f"Cannot write curves to {path}: {e}")
    LOG.info(f"Wrote {len(records)} curve records to {path}")
    return path


def read_curves(path: PathLike) -> List[CurveRecord]:
    """Parse a file written by emit_curves."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"Curve file not found: {path}")
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or reader.fieldnames[:len(CURVE_COLUMNS)] != CURVE_COLUMNS:
            raise InputError(f"{path.name} does not have the curve header")
        return [
            CurveRecord(
                t=int(row["t"]),
                method=row["method"],
                lam=float(row["lambda"]),
                utility=float(row["utility"]),
                fairness=float(row["fairness"]),
                value=float(row["value"]),
                seed=int(row["seed"]),
                phase=row.get(PHASE_COLUMN) or "static",
            )
            for row in reader
        ]


def aggregate_curves(records: Sequence[CurveRecord]) -> pd.DataFrame:
    """
    Mean and standard error of U, F and V over seeds.

    One row per (lambda, method, t), sorted on those keys.
    """
    columns = ["lambda", "method", "t", "n"]
    for metric in ("utility", "fairness", "value"):
        columns += [f"{metric}_mean", f"{metric}_se"]
    if not records:
        return pd.DataFrame(columns=columns)

    frame = pd.DataFrame([r.to_dict() for r in records])
    grouped = frame.groupby(["lambda", "method", "t"], sort=True)
    summary = grouped.size().rename("n").to_frame()
    for metric in ("utility", "fairness", "value"):
        summary[f"{metric}_mean"] = grouped[metric].mean()
        # standard error is 0 for a single seed
        summary[f"{metric}_se"] = grouped[metric].sem(ddof=1).fillna(0.0)
    return summary.reset_index()[columns]


def emit_summary(summary: pd.DataFrame, path: PathLike) -> Path:
    """Write an aggregate_curves table as CSV."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    summary.to_csv(path, index=False, lineterminator="\n")
    return path


def mean_by(records: Sequence[CurveRecord], metric: str, **filters) -> float:
    """Mean of one metric over records matching all filters (e.g. method="bayes")."""
    values = [getattr(r, metric) for r in records
              if all(getattr(r, k) == v for k, v in filters.items())]
    if not values:
        raise InputError(f"No records match {filters}")
    return float(np.mean(values))
