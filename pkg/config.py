# config.py
"""
Central configuration for BayesFair.
Can be overridden via environment variables (or a .env file).

Optional environment variables:
  - LEARNING_RATE: constant step size for policy gradient ascent (default: 0.05)
  - TRAIN_STEPS: gradient steps per training run (default: 2000)
  - TRAIN_K_SAMPLES: posterior samples per training step (default: 16)
  - EVAL_K_SAMPLES: posterior samples for evaluation-time estimates (default: 512)
  - PRIOR_ALPHA: symmetric Dirichlet pseudo-count (default: 0.5)
  - HOLDOUT_SMOOTHING: pseudo-count for empirical evaluation models (default: 0.5)
  - RETRAIN_EVERY: sequential re-optimization interval in steps (default: 10)
  - N_TRAIN_DEFAULT: training rows kept by table splits (default: 6000)
  - MAX_WORKERS: parallel repetitions in the experiment harness (default: 4)
  - SYNTHETIC_SUPPORT_SIZE: models in a synthetic finite-support prior (default: 8)
  - OUTPUT_DIR: default location of CLI outputs (default: ./output)
  - LOG_LEVEL: logging level for the CLI (default: INFO)
"""

import os
from pathlib import Path

from dotenv import load_dotenv

load_dotenv()

# Base directories
BASE_DIR = Path(__file__).resolve().parent
OUTPUT_DIR = Path(os.environ.get("OUTPUT_DIR", BASE_DIR / "output"))

# Numerical tolerances
PROB_TOL = float(os.environ.get("PROB_TOL", 1e-12))  # row sums of factor tables and weights

# Priors and evaluation models
PRIOR_ALPHA = float(os.environ.get("PRIOR_ALPHA", 0.5))
HOLDOUT_SMOOTHING = float(os.environ.get("HOLDOUT_SMOOTHING", 0.5))
RANDOM_MODEL_ALPHA = 1.0  # uniform on the simplex

# Policy optimization
LEARNING_RATE = float(os.environ.get("LEARNING_RATE", 0.05))
TRAIN_STEPS = int(os.environ.get("TRAIN_STEPS", 2000))
TRAIN_K_SAMPLES = int(os.environ.get("TRAIN_K_SAMPLES", 16))
TRAIN_EXPONENT = 2  # gradients are derived for the squared deviation

# Fairness evaluation
EVAL_K_SAMPLES = int(os.environ.get("EVAL_K_SAMPLES", 512))
EVAL_EXPONENT = 1

# Sequential allocation
RETRAIN_EVERY = int(os.environ.get("RETRAIN_EVERY", 10))

# Data ingestion
N_TRAIN_DEFAULT = int(os.environ.get("N_TRAIN_DEFAULT", 6000))

# Experiment harness
MAX_WORKERS = int(os.environ.get("MAX_WORKERS", 4))
SYNTHETIC_SUPPORT_SIZE = int(os.environ.get("SYNTHETIC_SUPPORT_SIZE", 8))

# Logging
LOG_LEVEL = os.environ.get("LOG_LEVEL", "INFO")


def get_output_dir(name: str = None) -> Path:
    """Get (and create) the output directory for an experiment run."""
    base = OUTPUT_DIR
    if name:
        base = base / name
    base.mkdir(parents=True, exist_ok=True)
    return base
