"""Independent reference implementations used only to certify test results."""

import numpy as np
from numba import njit


@njit(cache=True)
def _subgradient_descent(W, y, lam, iters, eta0):
    n = W.shape[1]
    x = y.copy()
    best_x = x.copy()
    best_f = np.sum(np.abs(W @ x)) + 0.5 * lam * np.sum((y - x) ** 2)
    for k in range(1, iters + 1):
        z = W @ x
        g = W.T @ np.sign(z) + lam * (x - y)
        x = x - (eta0 / np.sqrt(k)) * g
        f = np.sum(np.abs(W @ x)) + 0.5 * lam * np.sum((y - x) ** 2)
        if f < best_f:
            best_f = f
            for i in range(n):
                best_x[i] = x[i]
    return best_x, best_f


def min_signal_objective(op, y, lam, iters=1_000_000, eta0=0.5):
    """Minimise |W x|_1 + lam/2 |y - x|^2 by plain subgradient descent with a
    diminishing step, tracking the best iterate.  Convexity makes the value a
    certificate for any other solver."""
    _, best_f = _subgradient_descent(
        np.ascontiguousarray(op.entries), np.ascontiguousarray(y, dtype=float),
        float(lam), iters, eta0,
    )
    return best_f


def signal_objective(op, X, Y, lam):
    """Objective of the signal-update program evaluated at X."""
    return float(np.abs(op.entries @ X).sum() + 0.5 * lam * ((Y - X) ** 2).sum())
