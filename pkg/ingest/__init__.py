# ingest/__init__.py
"""
Tabular data ingestion: discretization schemas, loading and splitting.
"""

from .schema import DiscretizationSchema, FeatureKind, FeatureSpec, decode, encode
from .loader import (
    IngestReport,
    holdout_model,
    load_schema,
    load_table,
    read_dataset,
    read_table,
    split,
    write_dataset,
)

__all__ = [
    "DiscretizationSchema",
    "FeatureKind",
    "FeatureSpec",
    "decode",
    "encode",
    "IngestReport",
    "holdout_model",
    "load_schema",
    "load_table",
    "read_dataset",
    "read_table",
    "split",
    "write_dataset",
]
