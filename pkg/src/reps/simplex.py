"""Euclidean projection onto the probability simplex."""

import numpy as np


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Project each row of ``v`` (or ``v`` itself when 1-D) onto the unit simplex.

    Sort-and-threshold algorithm of Duchi et al. (2008), vectorised over rows.
    """
    v = np.asarray(v, dtype=float)
    flat = v.ndim == 1
    x = np.atleast_2d(v)
    n = x.shape[1]
    u = -np.sort(-x, axis=1)
    css = np.cumsum(u, axis=1) - 1.0
    idx = np.arange(1, n + 1)
    cond = u * idx > css
    k = n - np.argmax(cond[:, ::-1], axis=1)  # last index where cond holds, 1-based
    theta = css[np.arange(x.shape[0]), k - 1] / k
    w = np.maximum(x - theta[:, None], 0.0)
    return w[0] if flat else w
