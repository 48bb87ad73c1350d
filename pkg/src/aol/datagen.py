"""Synthetic reference operators, q-cosparse training sets and perturbed
initial points for the recovery experiments."""

from dataclasses import dataclass
import math

import numpy as np

from .errors import DegenerateSelection, NotConverged
from .operators import AnalysisOperator, untf_project

_UNTF_TOL = 1e-8
_RETRIES = 5


@dataclass(frozen=True)
class SyntheticSpec:
    a: int
    n: int
    l: int
    q: int
    gamma_perturb: float  # math.inf means a fully random initial operator
    seed: int = 0

    def __post_init__(self):
        if self.q >= self.n:
            raise ValueError("need q < n")
        if self.l < 1:
            raise ValueError("need l >= 1")


def random_untf(a, n, seed):
    """Gaussian draw projected onto the UNTF set; retried on the rare
    failure of the alternating projections."""
    rng = np.random.default_rng(seed)
    last = None
    for _ in range(_RETRIES):
        draw = AnalysisOperator(rng.standard_normal((a, n)))
        try:
            return untf_project(draw, max_alt=1000, tol=_UNTF_TOL, rng=rng)
        except NotConverged as err:
            last = err
    raise last


def sample_cosparse(op, q, count, seed):
    """Columns orthogonal to q randomly chosen rows of the operator.

    Each column is a standard normal vector projected onto the orthogonal
    complement of the selected rows; columns keep their natural scale.
    """
    if q >= op.n:
        raise ValueError("need q < n")
    rng = np.random.default_rng(seed)
    out = np.empty((op.n, count))
    for j in range(count):
        for attempt in range(100):
            g = rng.standard_normal(op.n)
            if q == 0:
                out[:, j] = g
                break
            rows = rng.choice(op.a, size=q, replace=False)
            sub = op.entries[rows]
            if np.linalg.matrix_rank(sub) < q:
                continue
            basis, _ = np.linalg.qr(sub.T)
            out[:, j] = g - basis @ (basis.T @ g)
            break
        else:
            raise DegenerateSelection(
                f"could not find {q} rows in general position after 100 tries"
            )
    return out


def perturb_operator(op0, gamma, seed):
    """Reference operator plus gamma times a Frobenius-normalised Gaussian
    matrix, reprojected onto the admissible set; gamma = inf returns a
    fresh random operator independent of the reference."""
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    if math.isinf(gamma):
        return random_untf(op0.a, op0.n, seed)
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal((op0.a, op0.n))
    noise /= np.linalg.norm(noise)
    perturbed = AnalysisOperator(op0.entries + gamma * noise, op0.row_norm_target)
    return untf_project(perturbed, max_alt=1000, tol=_UNTF_TOL, rng=rng)
