"""The learning algorithms: projected-subgradient operator update,
Douglas-Rachford signal update and the outer alternating loop."""

from dataclasses import dataclass, field
import math
import logging

import numpy as np

from .errors import DimensionMismatch, NonTightOperator
from .operators import (
    AnalysisOperator,
    SignalMatrix,
    _signals,
    project_tf,
    project_tf_perp_null,
    project_un,
)

log = logging.getLogger(__name__)

ETA_MIN = 1e-14
GRAM_RESIDUAL_LIMIT = 1e-4
REPROJECT_TOL = 1e-4
REPROJECT_MAX_PAIRS = 10


@dataclass(frozen=True)
class LearnConfig:
    """All scalar hyperparameters of the learning loops.

    ``lam`` weights data fidelity, ``gamma`` the augmented-Lagrangian
    penalty, ``eta0``/``rho`` drive the shrinking-step line search and
    ``eps`` the Frobenius-change stopping rules.  ``null_space`` switches
    the constraint from plain UNTF to the variant with a prescribed kernel.
    """

    lam: float = 1.0
    gamma: float = 1.0
    eta0: float = 0.1
    rho: float = 0.9
    eps: float = 1e-6
    k_max_inner: int = 1000
    k_max_drs: int = 100
    outer_iters: int = 10
    null_space: object = None
    seed: int = 0
    noiseless: bool = False

    def __post_init__(self):
        if not (0 < self.rho < 1):
            raise ValueError("rho must be in (0, 1)")
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if self.lam <= 0 or self.gamma <= 0 or self.eta0 <= 0:
            raise ValueError("lam, gamma and eta0 must be positive")
        if min(self.k_max_inner, self.k_max_drs, self.outer_iters) < 1:
            raise ValueError("iteration counts must be at least 1")


@dataclass
class OperatorUpdateResult:
    operator: AnalysisOperator
    trace: list
    eta: float
    iterations: int
    stalled: bool


@dataclass
class LearnState:
    operator: AnalysisOperator
    signals: SignalMatrix
    dual: np.ndarray
    analysis_codes: np.ndarray
    outer_iterations: int
    inner_iterations: int
    objective_trace: list
    stalled: bool = False


def soft_threshold(beta, alpha):
    """Shrink towards zero: beta - alpha*sgn(beta) if |beta| >= alpha, else 0."""
    if alpha <= 0:
        raise ValueError("threshold must be positive")
    beta = np.asarray(beta, dtype=float)
    out = np.where(np.abs(beta) >= alpha, beta - alpha * np.sign(beta), 0.0)
    return float(out) if out.ndim == 0 else out


def _rngs_from_seed(seed):
    sign_ss, row_ss = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(sign_ss), np.random.default_rng(row_ss)


def operator_update(X, init, cfg, eta=None, sign_rng=None, row_rng=None):
    """Projected subgradient descent on the L1 objective over the UNTF set.

    Each step takes a subgradient, moves against it and reprojects with
    alternating tight-frame / row-norm projection pairs until the residuals
    fall below ``REPROJECT_TOL`` (capped at ``REPROJECT_MAX_PAIRS`` pairs);
    a loose single-pair reprojection lets iterates drift off the manifold,
    where the L1 objective is artificially small and the line search jams.
    The stepsize shrinks by
    ``rho`` until the objective does not increase and is carried over to
    the next step.  Stops on a Frobenius change below ``eps`` or after
    ``k_max_inner`` steps, returning the previous iterate as in the
    pseudocode.  If the stepsize underflows ``ETA_MIN`` with no accepted
    step the current iterate is returned flagged as stalled.
    """
    X = _signals(X)
    if X.shape[0] != init.n:
        raise DimensionMismatch(f"operator is {init.a}x{init.n}, signals {X.shape}")
    if not np.any(X):
        raise ValueError("training matrix is identically zero")
    if sign_rng is None or row_rng is None:
        sign_rng, row_rng = _rngs_from_seed(cfg.seed)
    if eta is None:
        eta = cfg.eta0
    ns = cfg.null_space
    target = init.row_norm_target
    if ns is not None and ns.r > 0:
        # trace of the Gram target is n - r, forcing the smaller row norm
        target = math.sqrt((init.n - ns.r) / init.a)

    def reproject(entries):
        op = AnalysisOperator(entries, target)
        for _ in range(REPROJECT_MAX_PAIRS):
            if ns is None:
                op = project_tf(op)
            else:
                op = project_tf_perp_null(op, ns)
            op = project_un(op, row_rng)
            if (
                op.frame_residual(ns) <= REPROJECT_TOL
                and op.row_residual() <= REPROJECT_TOL
            ):
                break
        return op

    Xt = X.T
    omega = init.entries
    omega_prev = None  # pseudocode's Omega_[0] = 0; first stop check is vacuous
    Z = omega @ X
    f_cur = float(np.abs(Z).sum())
    trace = [f_cur]
    stalled = False
    k = 1
    while k <= cfg.k_max_inner:
        if omega_prev is not None and np.linalg.norm(omega - omega_prev) < cfg.eps:
            break
        S = np.sign(Z)
        zero = np.abs(Z) <= 1e-12
        nz = int(zero.sum())
        if nz:
            S[zero] = sign_rng.uniform(-1.0, 1.0, size=nz)
        G = S @ Xt
        while True:
            candidate = reproject(omega - eta * G)
            Zc = candidate.entries @ X
            f_new = float(np.abs(Zc).sum())
            if f_new <= f_cur:
                break
            eta *= cfg.rho
            if eta < ETA_MIN:
                stalled = True
                break
        if stalled:
            log.debug("operator update stalled at step %d (eta underflow)", k)
            break
        omega_prev = omega
        omega = candidate.entries
        Z = Zc
        f_cur = f_new
        trace.append(f_cur)
        k += 1
    if stalled or omega_prev is None:
        result_entries = omega
    else:
        result_entries = omega_prev
    return OperatorUpdateResult(
        operator=AnalysisOperator(result_entries, target),
        trace=trace,
        eta=eta,
        iterations=k - 1,
        stalled=stalled,
    )


def _inverse_applier(op, lam, gamma, spectral):
    """(lam*I + gamma*Omega^T Omega)^{-1} as a function of the right-hand side.

    Tight operators reduce to division by lam + gamma.  Otherwise the
    inverse is applied through an eigendecomposition of the Gram matrix
    (for the null-space-constrained Gram, a 0/1 projector, this gives the
    exact two-scale closed form); that path must be requested explicitly.
    """
    gram = op.gram()
    residual = float(np.linalg.norm(gram - np.eye(op.n)))
    if residual <= GRAM_RESIDUAL_LIMIT:
        scale = 1.0 / (lam + gamma)
        return lambda rhs: scale * rhs
    if not spectral:
        raise NonTightOperator(
            f"Gram residual {residual:.3e} exceeds {GRAM_RESIDUAL_LIMIT:.0e} "
            "and no spectral fallback was requested"
        )
    evals, evecs = np.linalg.eigh(gram)
    inv = 1.0 / (lam + gamma * np.clip(evals, 0.0, None))
    return lambda rhs: evecs @ (inv[:, None] * (evecs.T @ rhs))


def _drs(Y, op, X_init, cfg, spectral=False):
    """Douglas-Rachford iterations for min |Omega X|_1 + lam/2 |Y - X|_F^2."""
    apply_inverse = _inverse_applier(op, cfg.lam, cfg.gamma, spectral)
    W = op.entries
    X = X_init
    B = np.zeros((op.a, Y.shape[1]))
    Z = W @ X
    k = 1
    while k <= cfg.k_max_drs:
        X_new = apply_inverse(cfg.lam * Y + cfg.gamma * (W.T @ (Z - B)))
        WX = W @ X_new
        Z = soft_threshold(WX + B, 1.0 / cfg.gamma)
        B = B + (WX - Z)
        change = float(np.linalg.norm(X_new - X))
        X = X_new
        k += 1
        # the first X update precedes any thresholding of Z and cannot move
        if k > 2 and change < cfg.eps:
            break
    return X, Z, B, k - 1


def signal_update(Y, op, X_init, cfg, spectral=False):
    """Solve the cosparse signal recovery program for fixed operator."""
    Y = _signals(Y)
    X_init = _signals(X_init)
    if Y.shape[0] != op.n or X_init.shape != Y.shape:
        raise DimensionMismatch(
            f"operator {op.a}x{op.n}, observations {Y.shape}, init {X_init.shape}"
        )
    X, _, _, _ = _drs(Y, op, X_init, cfg, spectral=spectral)
    return X


def aola(Y, init, cfg):
    """Alternate operator and signal updates; in noiseless mode only the
    operator is updated (one long subgradient run, X stays equal to Y)."""
    Y = _signals(Y)
    if cfg.noiseless:
        result = operator_update(Y, init, cfg)
        op = result.operator
        Z = op.entries @ Y
        return LearnState(
            operator=op,
            signals=SignalMatrix(Y, role="clean"),
            dual=np.zeros_like(Z),
            analysis_codes=Z,
            outer_iterations=1,
            inner_iterations=result.iterations,
            objective_trace=result.trace,
            stalled=result.stalled,
        )
    root = np.random.SeedSequence(cfg.seed)
    op = init
    X = Y.copy()
    eta = cfg.eta0
    trace = []
    inner_total = 0
    stalled = False
    B = np.zeros((init.a, Y.shape[1]))
    Z = init.entries @ X
    outer = 0
    for outer in range(1, cfg.outer_iters + 1):
        sign_ss, row_ss = root.spawn(1)[0].spawn(2)
        result = operator_update(
            X,
            op,
            cfg,
            eta=eta,
            sign_rng=np.random.default_rng(sign_ss),
            row_rng=np.random.default_rng(row_ss),
        )
        op_change = float(np.linalg.norm(result.operator.entries - op.entries))
        op = result.operator
        eta = result.eta
        trace.extend(result.trace)
        inner_total += result.iterations
        stalled = stalled or result.stalled
        spectral = (
            cfg.null_space is not None
            or op.frame_residual() > GRAM_RESIDUAL_LIMIT
        )
        X_new, Z, B, _ = _drs(Y, op, X, cfg, spectral=spectral)
        x_change = float(np.linalg.norm(X_new - X))
        X = X_new
        if op_change < cfg.eps and x_change < cfg.eps:
            break
    return LearnState(
        operator=op,
        signals=SignalMatrix(X, role="clean"),
        dual=B,
        analysis_codes=Z,
        outer_iterations=outer,
        inner_iterations=inner_total,
        objective_trace=trace,
        stalled=stalled,
    )
