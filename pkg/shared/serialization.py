# shared/serialization.py
"""
JSON persistence for models, beliefs, policies and reports.

Every serializable type exposes to_dict / from_dict; these helpers only deal
with files. Output is deterministic for identical inputs.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Union

from shared.errors import InputError
from shared.model import Belief, ModelParams, belief_from_dict
from shared.policy import Policy, UtilityTable

LOG = logging.getLogger("serialization")

PathLike = Union[str, Path]


def save_json(data: Dict[str, Any], path: PathLike) -> Path:
    """Write a dict as indented, key-sorted JSON, creating parent directories."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write("\n")
    LOG.debug(f"Wrote {path}")
    return path


def load_json(path: PathLike) -> Dict[str, Any]:
    """Read a JSON object from disk."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"File not found: {path}")
    try:
        with open(path, "r") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise InputError(f"Invalid JSON in {path}: {e}")
    if not isinstance(data, dict):
        raise InputError(f"Expected a JSON object in {path}")
    return data


def save(obj: Any, path: PathLike) -> Path:
    """Save any object exposing to_dict()."""
    return save_json(obj.to_dict(), path)


def load_model(path: PathLike) -> ModelParams:
    return ModelParams.from_dict(load_json(path))


def load_belief(path: PathLike) -> Belief:
    return belief_from_dict(load_json(path))


def load_policy(path: PathLike) -> Policy:
    return Policy.from_dict(load_json(path))


def load_utility(path: PathLike) -> UtilityTable:
    return UtilityTable.from_dict(load_json(path))
