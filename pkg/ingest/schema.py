# ingest/schema.py
"""
Discretization schemas for tabular data.

A schema lists the observable features (combined into x), the sensitive
columns (combined into z) and the binary outcome column (y). Each feature is
either categorical (an ordered list of accepted values) or a numeric column
binned by increasing edges. Feature codes are combined by mixed-radix
encoding, first feature most significant.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from shared.errors import SchemaError
from shared.model import DiscreteSpace

LOG = logging.getLogger("schema")


class FeatureKind(str, Enum):
    CATEGORICAL = "categorical"
    BINNED = "binned"


@dataclass(frozen=True)
class FeatureSpec:
    """How one column maps to a small integer code."""

    column: str
    kind: FeatureKind
    categories: Tuple[str, ...] = ()
    edges: Tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "kind", FeatureKind(self.kind))
        object.__setattr__(self, "categories", tuple(str(c) for c in self.categories))
        object.__setattr__(self, "edges", tuple(float(e) for e in self.edges))
        if self.kind == FeatureKind.CATEGORICAL:
            if not self.categories:
                raise SchemaError(f"Categorical feature {self.column!r} has no categories")
            if len(set(self.categories)) != len(self.categories):
                raise SchemaError(f"Duplicate categories for {self.column!r}")
        elif any(b <= a for a, b in zip(self.edges, self.edges[1:])):
            raise SchemaError(f"Bin edges for {self.column!r} must be strictly increasing")

    @property
    def cardinality(self) -> int:
        if self.kind == FeatureKind.CATEGORICAL:
            return len(self.categories)
        return len(self.edges) + 1

    def discretize(self, cells: pd.Series) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """
        Map raw cells to codes.

        Returns (codes, missing, unparseable); codes are -1 where a cell is
        missing or cannot be parsed.
        """
        missing = cells.isna().to_numpy()
        if self.kind == FeatureKind.CATEGORICAL:
            lookup = {c: i for i, c in enumerate(self.categories)}
            mapped = cells.astype(str).str.strip().map(lookup)
            bad = mapped.isna().to_numpy() & ~missing
            codes = mapped.fillna(-1).to_numpy(dtype=np.int64)
        else:
            values = pd.to_numeric(cells, errors="coerce")
            bad = values.isna().to_numpy() & ~missing
            codes = np.searchsorted(np.asarray(self.edges), values.to_numpy(dtype=float),
                                    side="right").astype(np.int64)
            codes[missing | bad] = -1
        codes[missing] = -1
        return codes, missing, bad

    def to_dict(self) -> Dict:
        d = {"column": self.column, "kind": self.kind.value}
        if self.kind == FeatureKind.CATEGORICAL:
            d["categories"] = list(self.categories)
        else:
            d["edges"] = list(self.edges)
        return d

    @classmethod
    def from_dict(cls, d: Dict) -> "FeatureSpec":
        try:
            return cls(column=d["column"], kind=d["kind"],
                       categories=d.get("categories", ()), edges=d.get("edges", ()))
        except (KeyError, ValueError) as e:
            raise SchemaError(f"Invalid feature spec {d}: {e}")


def encode(codes: Sequence[np.ndarray], cardinalities: Sequence[int]) -> np.ndarray:
    """Mixed-radix index of per-feature codes (first feature most significant)."""
    index = np.zeros_like(np.asarray(codes[0]), dtype=np.int64)
    for c, card in zip(codes, cardinalities):
        index = index * card + np.asarray(c, dtype=np.int64)
    return index


def decode(index: np.ndarray, cardinalities: Sequence[int]) -> List[np.ndarray]:
    """Inverse of encode."""
    index = np.asarray(index, dtype=np.int64)
    digits = []
    for card in reversed(cardinalities):
        digits.append(index % card)
        index = index // card
    return digits[::-1]


@dataclass(frozen=True)
class DiscretizationSchema:
    """Feature, sensitive and outcome columns of a table."""

    feature_specs: Tuple[FeatureSpec, ...]
    sensitive_specs: Tuple[FeatureSpec, ...]
    outcome_column: str
    positive_label: str
    negative_label: str = "0"
    n_a: int = 2
    declared_n_x: Optional[int] = None
    declared_n_z: Optional[int] = None
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "feature_specs", tuple(self.feature_specs))
        object.__setattr__(self, "sensitive_specs", tuple(self.sensitive_specs))
        object.__setattr__(self, "positive_label", str(self.positive_label))
        object.__setattr__(self, "negative_label", str(self.negative_label))
        if self.positive_label == self.negative_label:
            raise SchemaError(f"Outcome labels must differ, got {self.positive_label!r} twice")
        if not self.feature_specs:
            raise SchemaError("Schema needs at least one feature")
        if not self.sensitive_specs:
            raise SchemaError("Schema needs at least one sensitive column")
        if self.declared_n_x is not None and self.n_x != self.declared_n_x:
            raise SchemaError(f"Feature cardinalities give |X|={self.n_x}, "
                              f"declared {self.declared_n_x}")
        if self.declared_n_z is not None and self.n_z != self.declared_n_z:
            raise SchemaError(f"Sensitive cardinalities give |Z|={self.n_z}, "
                              f"declared {self.declared_n_z}")

    @property
    def feature_cardinalities(self) -> List[int]:
        return [f.cardinality for f in self.feature_specs]

    @property
    def sensitive_cardinalities(self) -> List[int]:
        return [f.cardinality for f in self.sensitive_specs]

    @property
    def n_x(self) -> int:
        return int(np.prod(self.feature_cardinalities))

    @property
    def n_z(self) -> int:
        return int(np.prod(self.sensitive_cardinalities))

    @property
    def space(self) -> DiscreteSpace:
        return DiscreteSpace(n_x=self.n_x, n_y=2, n_z=self.n_z, n_a=self.n_a)

    @property
    def columns(self) -> List[str]:
        return ([f.column for f in self.feature_specs]
                + [f.column for f in self.sensitive_specs]
                + [self.outcome_column])

    def to_dict(self) -> Dict:
        d = {
            "name": self.name,
            "features": [f.to_dict() for f in self.feature_specs],
            "sensitive": [f.to_dict() for f in self.sensitive_specs],
            "outcome": {"column": self.outcome_column, "positive": self.positive_label,
                        "negative": self.negative_label},
            "n_a": self.n_a,
        }
        if self.declared_n_x is not None:
            d["n_x"] = self.declared_n_x
        if self.declared_n_z is not None:
            d["n_z"] = self.declared_n_z
        return d

    @classmethod
    def from_dict(cls, d: Dict) -> "DiscretizationSchema":
        try:
            return cls(
                feature_specs=tuple(FeatureSpec.from_dict(f) for f in d["features"]),
                sensitive_specs=tuple(FeatureSpec.from_dict(f) for f in d["sensitive"]),
                outcome_column=d["outcome"]["column"],
                positive_label=d["outcome"]["positive"],
                negative_label=d["outcome"].get("negative", "0"),
                n_a=int(d.get("n_a", 2)),
                declared_n_x=d.get("n_x"),
                declared_n_z=d.get("n_z"),
                name=d.get("name", ""),
            )
        except KeyError as e:
            raise SchemaError(f"Schema is missing field {e}")
