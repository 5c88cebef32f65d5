# shared/simplex.py
"""
Euclidean projection onto the probability simplex.

    P(v) = argmin_{w >= 0, sum(w) = 1} ||w - v||^2

Sort-based algorithm, vectorized over the rows of a 2-D array.
"""

import numpy as np

from shared.errors import InputError


def project_simplex(rows: np.ndarray) -> np.ndarray:
    """
    Project each row of `rows` onto the probability simplex.

    Accepts a 1-D vector or a 2-D array; the result has the same shape.
    """
    v = np.asarray(rows, dtype=float)
    if v.ndim == 1:
        return project_simplex(v[np.newaxis, :])[0]
    if v.ndim != 2:
        raise InputError(f"project_simplex expects a vector or a 2-D array, got {v.ndim} dims")

    n = v.shape[1]
    u = np.sort(v, axis=1)[:, ::-1]
    cssv = np.cumsum(u, axis=1) - 1.0
    ind = np.arange(1, n + 1)
    cond = u - cssv / ind > 0
    rho = np.count_nonzero(cond, axis=1)
    tau = cssv[np.arange(len(v)), rho - 1] / rho
    w = np.maximum(v - tau[:, np.newaxis], 0.0)
    # exact renormalization so row sums are 1 to machine precision
    return w / w.sum(axis=1, keepdims=True)
