"""Covariance structure of the scale space field.

The field ``X(t, nu) = nu^{-N/2} int k((s - t) / nu) dB(s)``, ``t`` in R^N,
is handled in log-scale ``v = -log(nu)``. In the coordinates ``(t_1, ..., t_N, v)``
its one-point derivative covariances do not depend on ``t``, and depend on
``v`` only through powers of ``e^v`` attached to each spatial derivative.

Block layout: the gradient is ordered ``(t_1, ..., t_N, v)`` and the
Hessian is half-vectorized in column-major lower order over the same
coordinates (for ``N = 1``: ``(tt, tv, vv)``).

For the Gaussian kernel, with ``a = e^{2v}``, ``i != j`` spatial, the
nonzero one-point covariances are::

    Var X = 1        Var X_i = a/2          Var X_v = N/2
    Cov(X, X_ii) = -a/2                     Cov(X, X_vv) = -N/2
    Cov(X_i, X_iv) = a/2                    Cov(X_v, X_ii) = -a/2
    Var X_ii = 3a^2/4   Cov(X_ii, X_jj) = a^2/4   Var X_ij = a^2/4
    Var X_iv = (N+4) a/4   Cov(X_ii, X_vv) = N a/4   Var X_vv = N (3N+4)/4
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations_with_replacement

import numpy as np

from .covmodel import Kernel, kernel_covariance_matrix, quad
from .errors import ContractError, UnsupportedDimension
from .gaussian import is_negative_definite, vech_index
from .kacrice import JointGaussianSpec


@dataclass(frozen=True)
class ScaleSpaceSpec:
    """Scale space field in ``N`` spatial dimensions at log-scale ``v``."""

    N: int
    kernel: Kernel
    v: float = 0.0

    def __post_init__(self):
        if int(self.N) < 1:
            raise ContractError("N must be >= 1")

    @classmethod
    def from_nu(cls, N: int, nu: float, kernel: Kernel | None = None) -> "ScaleSpaceSpec":
        if not nu > 0:
            raise ContractError("nu must be positive")
        return cls(N, kernel or Kernel.gaussian(), -math.log(nu))

    @property
    def nu(self) -> float:
        return math.exp(-self.v)


@dataclass(frozen=True)
class ScaleSpaceBlocks:
    """One-point covariance blocks of ``(X, grad X, vech hess X)``.

    Attributes
    ----------
    Sigma11 : (d, d) gradient covariance, ``d = N + 1``
    Sigma22 : (q, q) Hessian covariance, ``q = d(d+1)/2``
    Sigma21 : (q, d) Hessian-gradient cross covariance
    field_hess : (q,) field-Hessian cross covariance
    field_grad : (d,) field-gradient cross covariance (zero)
    """

    N: int
    v: float
    Sigma11: np.ndarray
    Sigma22: np.ndarray
    Sigma21: np.ndarray
    field_hess: np.ndarray
    field_grad: np.ndarray
    field_var: float = 1.0

    @property
    def SigmaTilde21(self) -> np.ndarray:
        """Hessian cross covariance with ``(X, grad X)``, shape ``(q, 1 + d)``."""
        return np.hstack([self.field_hess[:, None], self.Sigma21])

    def to_joint_spec(self) -> JointGaussianSpec:
        return JointGaussianSpec(
            fv=self.field_var, dv=self.Sigma11, d2v=self.Sigma22,
            fdcov=self.field_grad, fd2cov=self.field_hess, dd2cov=self.Sigma21.T,
        )

    def joint_cov(self) -> np.ndarray:
        return self.to_joint_spec().joint_cov()

    def conditional_hessian_cov(self) -> np.ndarray:
        """Covariance of ``vech hess X`` given ``grad X = 0``."""
        s21 = self.Sigma21
        return self.Sigma22 - s21 @ np.linalg.solve(self.Sigma11, s21.T)


def _labels(N: int):
    d = N + 1
    grad = [(i,) for i in range(d)]
    hess = [(i, j) if i <= j else (j, i) for (i, j) in vech_index(d).pairs]
    return grad, hess


def _gauss_entry(A: tuple, B: tuple, N: int, a: float) -> float:
    # covariance of the derivatives indexed by A and B; index N is v
    v = N
    A, B = tuple(sorted(A)), tuple(sorted(B))
    if len(A) > len(B):
        A, B = B, A
    la, lb = len(A), len(B)
    if la == 0 and lb == 0:
        return 1.0
    if la == 0 and lb == 2:
        if B == (v, v):
            return -N / 2.0
        return -a / 2.0 if B[0] == B[1] else 0.0
    if la == 1 and lb == 1:
        if A != B:
            return 0.0
        return N / 2.0 if A == (v,) else a / 2.0
    if la == 1 and lb == 2:
        (i,) = A
        if i != v and B == (i, v):
            return a / 2.0
        if i == v and B[0] == B[1] and B[0] != v:
            return -a / 2.0
        return 0.0
    if la == 2 and lb == 2:
        na, nb = A.count(v), B.count(v)
        if na == 2 and nb == 2:
            return N * (3 * N + 4) / 4.0
        if {na, nb} == {0, 2}:
            spatial = A if na == 0 else B
            return N * a / 4.0 if spatial[0] == spatial[1] else 0.0
        if na == 1 and nb == 1:
            return (N + 4) * a / 4.0 if A == B else 0.0
        if na == 0 and nb == 0:
            if A == B:
                return 3 * a * a / 4.0 if A[0] == A[1] else a * a / 4.0
            if A[0] == A[1] and B[0] == B[1]:
                return a * a / 4.0
    return 0.0


def gaussian_blocks(N: int, v: float) -> ScaleSpaceBlocks:
    """Closed-form blocks for the Gaussian kernel in ``N`` spatial dimensions."""
    if int(N) < 1:
        raise ContractError("N must be >= 1")
    a = math.exp(2.0 * v)
    grad, hess = _labels(N)
    s11 = np.array([[_gauss_entry(g, h, N, a) for h in grad] for g in grad])
    s22 = np.array([[_gauss_entry(g, h, N, a) for h in hess] for g in hess])
    s21 = np.array([[_gauss_entry(g, h, N, a) for h in grad] for g in hess])
    fh = np.array([_gauss_entry((), h, N, a) for h in hess])
    return ScaleSpaceBlocks(N, float(v), s11, s22, s21, fh, np.zeros(N + 1))


def gaussian_blocks_2d(v: float) -> ScaleSpaceBlocks:
    """Closed-form blocks of the 2D (one space, one scale) Gaussian-kernel field."""
    return gaussian_blocks(1, v)


def _integrands_2d(kernel: Kernel, v: float):
    # derivative integrands in w = (s - t) e^v for (X, X_t, X_v, X_tt, X_tv, X_vv)
    e = math.exp(v)

    def g(w):
        k, k1, k2 = kernel.k(w), kernel.dk(w), kernel.d2k(w)
        return (k, -e * k1, 0.5 * k + w * k1, e * e * k2,
                -e * (1.5 * k1 + w * k2), 0.25 * k + 2.0 * w * k1 + w * w * k2)

    return g


def general_blocks_2d(kernel: Kernel, v: float) -> ScaleSpaceBlocks:
    """Blocks of the 2D scale space field for any smooth kernel, by quadrature.

    Raises
    ------
    QuadratureFailure
    """
    g = _integrands_2d(kernel, v)
    var = [quad(lambda w, i=i: g(w)[i] ** 2, epsabs=0.0, epsrel=1e-12) for i in range(6)]
    m = np.diag(var)
    for i, j in combinations_with_replacement(range(6), 2):
        if i != j:
            tol = 1e-13 * math.sqrt(var[i] * var[j])
            m[i, j] = m[j, i] = quad(lambda w: g(w)[i] * g(w)[j], epsabs=tol, epsrel=1e-12)
    # order: X, t, v | tt, tv, vv
    return ScaleSpaceBlocks(1, float(v), m[1:3, 1:3], m[3:, 3:], m[3:, 1:3], m[0, 3:],
                            m[0, 1:3], field_var=m[0, 0])


def blocks_for(spec: ScaleSpaceSpec) -> ScaleSpaceBlocks:
    """Covariance blocks for ``spec``.

    Raises
    ------
    UnsupportedDimension
        For non-Gaussian kernels with ``N > 1``.
    """
    if spec.kernel.is_gaussian:
        return gaussian_blocks(spec.N, spec.v)
    if spec.N == 1:
        return general_blocks_2d(spec.kernel, spec.v)
    raise UnsupportedDimension("non-Gaussian kernels are supported for N = 1 only")


def spec_for_kacrice(spec: ScaleSpaceSpec) -> JointGaussianSpec:
    """Joint Gaussian input for the Kac-Rice estimators at ``spec``."""
    return blocks_for(spec).to_joint_spec()


def scale_block_identity(H_blocks, v: float, N: int) -> tuple[float, float]:
    """Determinant identity under the log-scale change of variables.

    With ``H = [[A, B], [B^T, C]]`` and ``M = [[e^{2v} A, e^v B], [e^v B^T, C]]``
    returns ``(det M, e^{2Nv} det H)``, which agree, and asserts that ``M``
    and ``H`` are negative definite together.
    """
    A, B, C = H_blocks
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float).reshape(N, 1)
    C = float(C)
    if A.shape != (N, N):
        raise ContractError("A must be N x N")
    e = math.exp(v)
    H = np.block([[A, B], [B.T, np.array([[C]])]])
    M = np.block([[e * e * A, e * B], [e * B.T, np.array([[C]])]])
    lhs = float(np.linalg.det(M))
    rhs = math.exp(2 * N * v) * float(np.linalg.det(H))
    if is_negative_definite(M) != is_negative_definite(H):
        raise AssertionError("negative definiteness differs between assemblies")
    return lhs, rhs


def field_covariance(points, nus, N: int, kernel: Kernel | None = None) -> np.ndarray:
    """Covariance matrix of ``X(t, nu)`` at lattice points.

    Parameters
    ----------
    points : array, shape (n, N)
    nus : array, shape (n,)
    N : int
    kernel : Kernel, optional
        Gaussian by default. Other kernels only for ``N = 1``.
    """
    kernel = kernel or Kernel.gaussian()
    t = np.asarray(points, dtype=float).reshape(len(nus), N)
    nu = np.asarray(nus, dtype=float)
    if kernel.is_gaussian:
        ss = nu[:, None] ** 2 + nu[None, :] ** 2
        r2 = np.zeros_like(ss)
        for ax in range(N):
            r2 += (t[:, None, ax] - t[None, :, ax]) ** 2
        return (2.0 * nu[:, None] * nu[None, :] / ss) ** (N / 2.0) * np.exp(-r2 / (2.0 * ss))
    if N == 1:
        return kernel_covariance_matrix(kernel, t[:, 0], nu)
    raise UnsupportedDimension("non-Gaussian kernels are supported for N = 1 only")
