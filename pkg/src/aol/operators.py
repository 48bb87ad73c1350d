"""Analysis operators, constraint-set projections and the L1 objective.

The admissible set is the intersection of the tight frames (Gram equal to
the identity, or to an orthogonal projector when a null space is
prescribed) with the matrices whose rows all have the same norm.  Feasible
points are found by alternating the two projections.
"""

from dataclasses import dataclass, field
import logging
import math
import warnings

import numpy as np

from .errors import DimensionMismatch, NotConverged, RankDeficientWarning

log = logging.getLogger(__name__)

TOL_FRAME = 1e-8
TOL_ROW = 1e-8
TOL_SVD = 1e-10
TOL_SIGN = 1e-12
TOL_ZERO_ROW = 1e-12


@dataclass(frozen=True)
class AnalysisOperator:
    """An a-by-n analysis operator (a >= n); rows are the analysis atoms.

    ``row_norm_target`` defaults to sqrt(n/a): the trace identity
    tr(Omega^T Omega) = n forces this value when the Gram matrix is the
    identity and all rows have equal norm.  ``tight`` marks whether the
    operator is meant to satisfy the tight-frame invariant at all
    (finite-difference operators deliberately do not).
    """

    entries: np.ndarray
    row_norm_target: float = None
    tight: bool = True

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=float)
        if entries.ndim != 2 or entries.shape[0] < entries.shape[1]:
            raise DimensionMismatch(
                f"operator must be a x n with a >= n, got {entries.shape}"
            )
        object.__setattr__(self, "entries", entries)
        if self.row_norm_target is None:
            a, n = entries.shape
            object.__setattr__(self, "row_norm_target", math.sqrt(n / a))

    @property
    def a(self):
        return self.entries.shape[0]

    @property
    def n(self):
        return self.entries.shape[1]

    def gram(self):
        return self.entries.T @ self.entries

    def frame_residual(self, ns=None):
        """Frobenius distance of the Gram matrix from its target."""
        target = np.eye(self.n) if ns is None else ns.complement_projector()
        return float(np.linalg.norm(self.gram() - target))

    def row_residual(self):
        norms = np.linalg.norm(self.entries, axis=1)
        return float(np.max(np.abs(norms - self.row_norm_target)))


@dataclass(frozen=True)
class NullSpaceBasis:
    """Orthonormal basis (n x r, r < n) of the prescribed kernel."""

    basis: np.ndarray

    def __post_init__(self):
        basis = np.asarray(self.basis, dtype=float)
        if basis.ndim != 2:
            raise DimensionMismatch("null-space basis must be a 2-d array")
        n, r = basis.shape
        if r >= n:
            raise DimensionMismatch(f"need r < n, got basis shape {basis.shape}")
        if r > 0 and np.linalg.norm(basis.T @ basis - np.eye(r)) > TOL_FRAME:
            raise DimensionMismatch("null-space basis columns are not orthonormal")
        object.__setattr__(self, "basis", basis)

    @property
    def n(self):
        return self.basis.shape[0]

    @property
    def r(self):
        return self.basis.shape[1]

    def complement_projector(self):
        return np.eye(self.n) - self.basis @ self.basis.T

    @classmethod
    def dc(cls, n):
        """Span of the constant vector, the kernel of difference operators."""
        return cls(np.full((n, 1), 1.0 / math.sqrt(n)))


@dataclass(frozen=True)
class SignalMatrix:
    """n x l matrix whose columns are signals; role is "clean" or "observed"."""

    entries: np.ndarray
    role: str = "clean"

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=float)
        if entries.ndim != 2 or entries.shape[1] < 1:
            raise DimensionMismatch(f"signals must be n x l with l >= 1, got {entries.shape}")
        if not np.all(np.isfinite(entries)):
            raise DimensionMismatch("signal matrix has non-finite entries")
        object.__setattr__(self, "entries", entries)

    @property
    def n(self):
        return self.entries.shape[0]

    @property
    def l(self):
        return self.entries.shape[1]


def _signals(X):
    return X.entries if isinstance(X, SignalMatrix) else np.asarray(X, dtype=float)


def project_un(op, rng):
    """Scale every row to the target norm; replace zero rows randomly.

    A row with norm below ``TOL_ZERO_ROW`` has no well-defined direction and
    is replaced by a random point on the sphere of radius ``row_norm_target``.
    """
    entries = op.entries.copy()
    c = op.row_norm_target
    norms = np.linalg.norm(entries, axis=1)
    for i in np.nonzero(norms < TOL_ZERO_ROW)[0]:
        v = rng.standard_normal(op.n)
        entries[i] = v / np.linalg.norm(v)
        norms[i] = 1.0
    entries *= (c / norms)[:, None]
    return AnalysisOperator(entries, c, op.tight)


def project_tf(op):
    """Project onto the tight-frame manifold by resetting singular values to 1."""
    u, s, vt = np.linalg.svd(op.entries, full_matrices=False)
    if s[-1] < TOL_SVD:
        warnings.warn(
            "rank-deficient input to tight-frame projection; all singular "
            "values replaced by 1",
            RankDeficientWarning,
        )
    return AnalysisOperator(u @ vt, op.row_norm_target, op.tight)


def project_tf_perp_null(op, ns):
    """Project onto tight frames whose Gram matrix is the projector onto
    the orthogonal complement of the prescribed null space."""
    if ns.r == 0:
        return project_tf(op)
    if ns.n != op.n:
        raise DimensionMismatch("null-space basis dimension does not match operator")
    projected = op.entries - (op.entries @ ns.basis) @ ns.basis.T
    u, s, vt = np.linalg.svd(projected, full_matrices=False)
    keep = op.n - ns.r
    if s[keep - 1] < TOL_SVD:
        warnings.warn(
            "input projects to a matrix of rank below n - r",
            RankDeficientWarning,
        )
    d = np.zeros(op.n)
    d[:keep] = 1.0
    return AnalysisOperator(u @ (d[:, None] * vt), op.row_norm_target, op.tight)


def untf_project(op, ns=None, max_alt=500, tol=TOL_FRAME, rng=None):
    """Alternate tight-frame and row-norm projections until both residuals
    are below ``tol``.

    Raises :class:`NotConverged` (carrying the last iterate) when the
    tolerance is unmet after ``max_alt`` pairs; callers inside learning
    loops may accept the approximate point.
    """
    if rng is None:
        rng = np.random.default_rng()
    if max_alt < 1:
        raise ValueError("max_alt must be at least 1")
    current = op
    if ns is not None and ns.r > 0:
        # tr(Omega^T Omega) = tr(P) = n - r forces the smaller row norm
        target = math.sqrt((op.n - ns.r) / op.a)
        if current.row_norm_target != target:
            current = AnalysisOperator(current.entries, target, current.tight)
    frame_res = current.frame_residual(ns)
    row_res = current.row_residual()
    for it in range(max_alt):
        if frame_res <= tol and row_res <= tol:
            log.debug("untf_project converged after %d alternations", it)
            return current
        if ns is None:
            current = project_tf(current)
        else:
            current = project_tf_perp_null(current, ns)
        current = project_un(current, rng)
        frame_res = current.frame_residual(ns)
        row_res = current.row_residual()
    if frame_res <= tol and row_res <= tol:
        return current
    raise NotConverged(
        f"residuals ({frame_res:.3e}, {row_res:.3e}) above {tol:.1e} "
        f"after {max_alt} alternations",
        operator=current,
        frame_residual=frame_res,
        row_residual=row_res,
    )


def objective_l1(op, X):
    """Entrywise sum of absolute values of Omega X."""
    X = _signals(X)
    if X.shape[0] != op.n:
        raise DimensionMismatch(f"operator is {op.a}x{op.n} but signals are {X.shape}")
    return float(np.abs(op.entries @ X).sum())


def subgradient(op, X, rng):
    """A subgradient sgn(Omega X) X^T of the L1 objective.

    Entries of Omega X within ``TOL_SIGN`` of zero get an independent
    uniform draw from [-1, 1]; feed a dedicated RNG stream for bitwise
    reproducibility.
    """
    X = _signals(X)
    if X.shape[0] != op.n:
        raise DimensionMismatch(f"operator is {op.a}x{op.n} but signals are {X.shape}")
    Z = op.entries @ X
    S = np.sign(Z)
    zero = np.abs(Z) <= TOL_SIGN
    k = int(zero.sum())
    if k:
        S[zero] = rng.uniform(-1.0, 1.0, size=k)
    return S @ X.T
