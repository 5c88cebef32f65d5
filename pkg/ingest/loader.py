# ingest/loader.py
"""
Table ingestion for BayesFair.

Handles:
- Reading a comma-separated table with a header row
- Discretizing schema columns and mixed-radix encoding of x and z
- Dropping (and counting) rows with missing or unparseable cells
- Positional train/holdout splits
- Dataset CSV files of (x, y, z) indices
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Tuple, Union

import numpy as np
import pandas as pd

import sys
sys.path.insert(0, str(Path(__file__).parent.parent))
from config import HOLDOUT_SMOOTHING

from shared.errors import InputError, SchemaError
from shared.model import Dataset, DiscreteSpace, ModelParams, empirical_model
from shared.serialization import load_json
from ingest.schema import DiscretizationSchema, encode

LOG = logging.getLogger("ingest")

PathLike = Union[str, Path]
DATASET_COLUMNS = ["x", "y", "z"]


@dataclass(frozen=True)
class IngestReport:
    """Row accounting for one table load."""

    rows_read: int
    rows_emitted: int
    dropped_missing: int
    dropped_unparseable: int

    @property
    def rows_dropped(self) -> int:
        return self.dropped_missing + self.dropped_unparseable

    def to_dict(self) -> Dict:
        return {
            "rows_read": self.rows_read,
            "rows_emitted": self.rows_emitted,
            "dropped_missing": self.dropped_missing,
            "dropped_unparseable": self.dropped_unparseable,
        }


def load_schema(path: PathLike) -> DiscretizationSchema:
    """Read a schema JSON file."""
    return DiscretizationSchema.from_dict(load_json(path))


def read_table(path: PathLike, schema: DiscretizationSchema) -> Tuple[Dataset, IngestReport]:
    """
    Discretize a CSV table into a Dataset, preserving row order.

    Returns the dataset and the row accounting. Rows with a missing cell in
    any schema column are counted as missing; otherwise rows with a cell that
    does not parse are counted as unparseable.
    """
    path = Path(path)
    if not path.exists():
        raise InputError(f"Table not found: {path}")
    table = pd.read_csv(path, dtype=str, skipinitialspace=True)

    absent = [c for c in schema.columns if c not in table.columns]
    if absent:
        raise SchemaError(f"Columns missing from {path.name}: {absent}")

    n = len(table)
    missing = np.zeros(n, dtype=bool)
    bad = np.zeros(n, dtype=bool)

    def discretize(specs):
        codes = []
        for spec in specs:
            c, m, b = spec.discretize(table[spec.column])
            codes.append(c)
            missing[:] |= m
            bad[:] |= b
        return codes

    x_codes = discretize(schema.feature_specs)
    z_codes = discretize(schema.sensitive_specs)

    outcome = table[schema.outcome_column]
    missing |= outcome.isna().to_numpy()
    labels = outcome.astype(str).str.strip()
    positive = (labels == schema.positive_label).to_numpy()
    negative = (labels == schema.negative_label).to_numpy()
    bad |= ~(positive | negative)
    y = positive.astype(np.int64)

    bad &= ~missing
    keep = ~(missing | bad)
    x = encode([c[keep] for c in x_codes], schema.feature_cardinalities)
    z = encode([c[keep] for c in z_codes], schema.sensitive_cardinalities)

    report = IngestReport(
        rows_read=n,
        rows_emitted=int(keep.sum()),
        dropped_missing=int(missing.sum()),
        dropped_unparseable=int(bad.sum()),
    )
    if report.rows_dropped:
        LOG.warning(f"Dropped {report.dropped_missing} rows with missing cells and "
                    f"{report.dropped_unparseable} unparseable rows from {path.name}")
    dataset = Dataset(schema.space, np.stack([x, y[keep], z], axis=1))
    return dataset, report


def load_table(path: PathLike, schema: DiscretizationSchema) -> Dataset:
    """Discretize a CSV table into a Dataset."""
    dataset, report = read_table(path, schema)
    LOG.info(f"Loaded {report.rows_emitted}/{report.rows_read} rows from {Path(path).name}")
    return dataset


def split(dataset: Dataset, n_train: int) -> Tuple[Dataset, Dataset]:
    """Positional split: the first n_train records train, the rest are held out."""
    if not 0 <= n_train <= len(dataset):
        raise InputError(f"n_train must be in [0, {len(dataset)}], got {n_train}")
    return dataset[:n_train], dataset[n_train:]


def holdout_model(holdout: Dataset, smoothing: float = HOLDOUT_SMOOTHING) -> ModelParams:
    """Empirical evaluation model of a holdout split."""
    return empirical_model(holdout, smoothing)


def write_dataset(dataset: Dataset, path: PathLike) -> Path:
    """Write (x, y, z) index records as CSV."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(np.asarray(dataset.records), columns=DATASET_COLUMNS)
    frame.to_csv(path, index=False, lineterminator="\n")
    return path


def read_dataset(path: PathLike, space: DiscreteSpace) -> Dataset:
    """Read (x, y, z) index records written by write_dataset."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"Dataset not found: {path}")
    frame = pd.read_csv(path)
    if list(frame.columns) != DATASET_COLUMNS:
        raise InputError(f"{path.name} must have header {','.join(DATASET_COLUMNS)}")
    return Dataset(space, frame.to_numpy(dtype=np.int64))
