"""Local-identifiability machinery: tangent spaces of the constraint set,
the linear operator whose kernel parametrises admissible analysis-domain
perturbations, kernel sampling and the variational condition checks.

All vectorisations are column-major, so an a x l perturbation maps entry
(k, r) to flat index r*a + k.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    DimensionMismatch,
    NotInTangentSpace,
    RankDeficientData,
    TrivialKernel,
)
from .operators import _signals

_MEMBERSHIP_TOL = 1e-8


@dataclass(frozen=True)
class TangentSpaceC:
    """Orthonormal basis (under the Frobenius inner product) of the
    first-order feasible perturbations of the constraint set at a base
    operator: Delta^T Omega + Omega^T Delta = 0 and each row of Delta
    orthogonal to the matching row of Omega."""

    base: object
    basis: np.ndarray  # (a*n, dim), columns orthonormal

    @property
    def dim(self):
        return self.basis.shape[1]

    def matrix(self, i):
        a, n = self.base.entries.shape
        return self.basis[:, i].reshape((a, n), order="F")

    def random_element(self, rng):
        coeff = rng.standard_normal(self.dim)
        a, n = self.base.entries.shape
        return (self.basis @ coeff).reshape((a, n), order="F")


def tangent_constraint_matrix(op0):
    """Stack the symmetric-part constraints (upper triangle, n(n+1)/2 rows)
    and the per-row orthogonality constraints (a rows) as one matrix acting
    on the column-major vectorisation of Delta."""
    W = op0.entries
    a, n = W.shape
    rows = n * (n + 1) // 2 + a
    M = np.zeros((rows, a * n))
    r = 0
    for i in range(n):
        for j in range(i, n):
            # (Delta^T W + W^T Delta)_{ij} = sum_k Delta_{ki} W_{kj} + Delta_{kj} W_{ki}
            M[r, i * a : (i + 1) * a] += W[:, j]
            M[r, j * a : (j + 1) * a] += W[:, i]
            r += 1
    for i in range(a):
        M[r, i::a] = W[i, :]
        r += 1
    return M


def tangent_basis(op0):
    M = tangent_constraint_matrix(op0)
    basis = scipy.linalg.null_space(M)
    return TangentSpaceC(base=op0, basis=basis)


def tangent_membership_residual(op0, delta):
    W = op0.entries
    sym = float(np.linalg.norm(delta.T @ W + W.T @ delta))
    rows = float(np.max(np.abs(np.sum(W * delta, axis=1))))
    return max(sym, rows)


def psi_shape(a, n, l):
    """Row and column counts of the constraint operator for given sizes."""
    return (n * n + a + a * (l - n), a * l)


@dataclass(frozen=True)
class PsiOperator:
    """Dense linear operator whose kernel holds the admissible
    perturbations of the analysis codes, with the SVD pieces of the
    training matrix cached for reuse."""

    matrix: np.ndarray  # (n^2 + a + a(l-n)) x (a*l)
    kernel: np.ndarray  # (a*l, dim), orthonormal columns
    a: int
    n: int
    l: int
    codes: np.ndarray  # Omega_0 X
    v1: np.ndarray
    v0: np.ndarray
    sigma1: np.ndarray

    @property
    def kernel_dim(self):
        return self.kernel.shape[1]


def build_psi(op0, X):
    """Assemble the three constraint blocks on vect(Delta_z):

    - kernel block: Delta_z V0 = 0 (a(l-n) rows),
    - diagonal block: diag(Delta_z Q) = 0 with Q = V1 Sigma1^-2 V1^T Z0^T
      (a rows),
    - symmetrised block: V1^T Delta_z^T A + A^T Delta_z V1 = 0 with
      A = Z0 V1, kept with all n^2 rows (redundancy is harmless for the
      SVD-based kernel extraction).
    """
    X = _signals(X)
    a, n = op0.entries.shape
    l = X.shape[1]
    if X.shape[0] != n:
        raise DimensionMismatch(f"operator is {a}x{n} but data is {X.shape}")
    if l < n:
        raise RankDeficientData("need at least n training signals")
    u, s, vt = np.linalg.svd(X, full_matrices=True)
    if s[-1] / s[0] < 1e-10:
        raise RankDeficientData(
            f"training matrix singular-value ratio {s[-1] / s[0]:.3e} below 1e-10"
        )
    v1 = vt[:n].T  # l x n
    v0 = vt[n:].T  # l x (l - n)
    z0 = op0.entries @ X
    A = z0 @ v1  # a x n
    Q = v1 @ ((s ** -2)[:, None] * (v1.T @ z0.T))  # l x a

    al = a * l
    n_rows, _ = psi_shape(a, n, l)
    psi = np.zeros((n_rows, al))
    # vec(Delta_z V0) = (V0^T kron I_a) vec(Delta_z)
    psi[: a * (l - n)] = np.kron(v0.T, np.eye(a))
    # diag(Delta_z Q)_i = sum_k Delta_z[i, k] Q[k, i]
    diag_block = psi[a * (l - n) : a * (l - n) + a]
    for i in range(a):
        diag_block[i, i::a] = Q[:, i]
    # vec(A^T Delta_z V1) = (V1^T kron A^T) vec(Delta_z); add the transpose
    sym = np.kron(v1.T, A.T)
    ij = np.arange(n * n).reshape((n, n), order="F")
    psi[a * (l - n) + a :] = sym + sym[ij.T.reshape(-1, order="F")]

    _, sv, vh = np.linalg.svd(psi, full_matrices=True)
    threshold = max(psi.shape) * sv[0] * 1e-12
    rank = int(np.sum(sv > threshold))
    kernel = vh[rank:].T
    return PsiOperator(
        matrix=psi, kernel=kernel, a=a, n=n, l=l, codes=z0, v1=v1, v0=v0, sigma1=s
    )


def sample_kernel(psi, count, seed):
    """Unit-Frobenius-norm kernel elements from projected Gaussian draws."""
    if psi.kernel_dim == 0:
        raise TrivialKernel("the constraint operator has a trivial kernel")
    rng = np.random.default_rng(seed)
    samples = []
    while len(samples) < count:
        g = rng.standard_normal(psi.a * psi.l)
        proj = psi.kernel @ (psi.kernel.T @ g)
        norm = np.linalg.norm(proj)
        if norm < 1e-12:
            continue
        samples.append((proj / norm).reshape((psi.a, psi.l), order="F"))
    return samples


def _cosupport_sign(op0, X, zero_tol):
    z0 = op0.entries @ _signals(X)
    cobar = np.abs(z0) <= zero_tol
    sign = np.where(cobar, 0.0, np.sign(z0))
    return cobar, sign


def check_lemma3(op0, X, dz, zero_tol=1e-10):
    """Necessary-and-sufficient noiseless condition: the inner product of
    the perturbation with the sign pattern must be beaten by its mass on
    the cosupport."""
    cobar, sign = _cosupport_sign(op0, X, zero_tol)
    lhs = abs(float(np.sum(sign * dz)))
    rhs = float(np.abs(dz[cobar]).sum())
    margin = rhs - lhs
    return margin > 0, margin


def check_theorem1(op0, X, dz, zero_tol=1e-10):
    """Sufficient (sign-pattern-free) condition: cosupport mass must beat
    the support mass outright."""
    cobar, _ = _cosupport_sign(op0, X, zero_tol)
    lhs = float(np.abs(dz[~cobar]).sum())
    rhs = float(np.abs(dz[cobar]).sum())
    margin = rhs - lhs
    return margin > 0, margin


def _pair_terms(op0, X0, delta, sigma, zero_tol):
    X0 = _signals(X0)
    if tangent_membership_residual(op0, delta) > _MEMBERSHIP_TOL:
        raise NotInTangentSpace("delta violates the tangent-space constraints")
    cobar, sign = _cosupport_sign(op0, X0, zero_tol)
    move = delta @ X0 + op0.entries @ sigma
    return move, cobar, sign


def check_lemma1(op0, X0, Y, lam, delta, sigma, zero_tol=1e-10):
    """Noise-aware necessary-and-sufficient condition for a pair."""
    X0 = _signals(X0)
    Y = _signals(Y)
    move, cobar, sign = _pair_terms(op0, X0, delta, sigma, zero_tol)
    fidelity = lam * float(np.sum(sigma * (X0 - Y)))
    lhs = float(np.abs(move[cobar]).sum())
    rhs = abs(float(np.sum(move * sign)) + fidelity)
    margin = lhs - rhs
    return margin > 0, margin


def check_lemma2(op0, X0, Y, lam, delta, sigma, zero_tol=1e-10):
    """Noise-aware sufficient condition (support mass replaces the signed
    inner product)."""
    X0 = _signals(X0)
    Y = _signals(Y)
    move, cobar, _ = _pair_terms(op0, X0, delta, sigma, zero_tol)
    fidelity = lam * abs(float(np.sum(sigma * (X0 - Y))))
    lhs = float(np.abs(move[cobar]).sum())
    rhs = float(np.abs(move[~cobar]).sum()) + fidelity
    margin = lhs - rhs
    return margin > 0, margin


@dataclass
class ConditionReport:
    n_samples: int
    n_satisfied_lemma3: int
    n_satisfied_theorem1: int
    lemma3_margins: np.ndarray
    theorem1_margins: np.ndarray
    cosupport_size: int
    kernel_dim: int

    @property
    def lemma3_fraction(self):
        return self.n_satisfied_lemma3 / self.n_samples

    @property
    def theorem1_fraction(self):
        return self.n_satisfied_theorem1 / self.n_samples


def identifiability_fraction(op0, X, count, seed, zero_tol=1e-10):
    """Sample kernel perturbations and report how often each condition is
    satisfied."""
    X = _signals(X)
    psi = build_psi(op0, X)
    samples = sample_kernel(psi, count, seed)
    cobar, _ = _cosupport_sign(op0, X, zero_tol)
    l3_margins = np.empty(count)
    t1_margins = np.empty(count)
    n3 = n1 = 0
    for i, dz in enumerate(samples):
        ok3, m3 = check_lemma3(op0, X, dz, zero_tol)
        ok1, m1 = check_theorem1(op0, X, dz, zero_tol)
        l3_margins[i] = m3
        t1_margins[i] = m1
        n3 += ok3
        n1 += ok1
    return ConditionReport(
        n_samples=count,
        n_satisfied_lemma3=n3,
        n_satisfied_theorem1=n1,
        lemma3_margins=l3_margins,
        theorem1_margins=t1_margins,
        cosupport_size=int(cobar.sum()),
        kernel_dim=psi.kernel_dim,
    )
