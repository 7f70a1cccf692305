"""Central finite differences with the step rule eps = 1e-5 * max(1, |x|)."""

from __future__ import annotations

import numpy as np

REL_STEP = 1e-5


def step_size(x):
    """Per-point step for (..., D) points."""
    return REL_STEP * np.maximum(1.0, np.linalg.norm(x, axis=-1))


def directional_derivative(f, x, v):
    """Df(x) . v for batched points; the stencil moves a distance eps along v."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    vnorm = np.linalg.norm(v, axis=-1)
    safe = np.where(vnorm > 0, vnorm, 1.0)
    h = (step_size(x) / safe)[..., None]
    d = (np.asarray(f(x + h * v)) - np.asarray(f(x - h * v))) / (2 * h)
    return np.where((vnorm > 0)[..., None], d, 0.0)


def jacobian(f, x):
    """Jacobian of f: R^D -> R^M at a single point, shape (M, D)."""
    x = np.asarray(x, dtype=float)
    h = float(step_size(x))
    cols = []
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        cols.append((np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2 * h))
    return np.column_stack(cols)


def lie_bracket(X, Y, x):
    """[X, Y](x) = DY(x).X(x) - DX(x).Y(x) for batched vector fields."""
    return directional_derivative(Y, x, X(x)) - directional_derivative(X, x, Y(x))
