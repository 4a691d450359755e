"""Covariance models of centered 1D Gaussian processes.

A process is described at each location ``t`` by the six second moments of
``(X, X', X'')``. They can be obtained three ways, and the test-suite checks
that all three agree:

* from partial derivatives of ``h(t, tau) = C(t - d/2, t + d/2)``,
  ``tau = d**2`` (:func:`moments_from_h`);
* from Wiener-integral quadrature of the kernel representation
  ``X(t) = int nu(t)^{-1/2} k((t - s) / nu(t)) dB(s)``
  (:func:`moments_via_quadrature`);
* from closed forms for the built-in examples.

Kernels are normalized so that ``int k(s)^2 ds = 1``; then every kernel
model has unit variance.

Notes
-----
For the Gaussian kernel the correlation of the varying-bandwidth model at
midpoint ``t`` and separation ``d`` expands as::

    1 - (1 + n1^2) / (4 n0^2) d^2
      + (3 n1^4 + 12 n1^2 + 3 + 6 n0 n1^2 n2 + 6 n0 n2 - 2 n0^2 n1 n3)
        / (96 n0^4) d^4 + O(d^6)

with ``n_k`` the k-th derivative of ``nu`` at ``t``. This gives exact
h-derivatives for the built-in models.
"""

from __future__ import annotations

import math
import warnings
from abc import ABC, abstractmethod
from dataclasses import dataclass, fields
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .errors import (
    BaseNotUnitVariance,
    ContractError,
    NonPSDMoments,
    QuadratureFailure,
    StencilOutOfDomain,
)

#: Quadrature tolerances for Wiener-integral moments.
QUAD_EPSABS = 1e-10
QUAD_EPSREL = 1e-10
#: Accepted deviation of int k^2 from 1 for built-in kernels.
KERNEL_NORM_TOL = 1e-8
#: Eigenvalue tolerance (relative) of the PSD check on moment matrices.
PSD_TOL = 1e-10


# ---------------------------------------------------------------------------
# quadrature helper


def quad(f: Callable, a: float = -np.inf, b: float = np.inf, epsabs: float = QUAD_EPSABS,
         epsrel: float = QUAD_EPSREL, limit: int = 400) -> float:
    """``scipy.integrate.quad`` that raises instead of warning.

    Raises
    ------
    QuadratureFailure
        If QUADPACK reports failure and its error estimate exceeds the
        requested tolerance by more than a factor 100.
    """
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        res = integrate.quad(f, a, b, epsabs=epsabs, epsrel=epsrel, limit=limit, full_output=1)
    val, err = res[0], res[1]
    if not np.isfinite(val):
        raise QuadratureFailure("non-finite integral")
    if len(res) > 3 and err > 100.0 * max(epsabs, epsrel * abs(val)):
        raise QuadratureFailure(f"{res[3]} (estimate {val:.6g} +- {err:.1e})")
    return float(val)


# ---------------------------------------------------------------------------
# kernels


def _sech(s):
    a = np.exp(-np.abs(s))
    return 2.0 * a / (1.0 + a * a)


class Kernel:
    """Smoothing kernel ``k`` with its first two derivatives.

    Parameters
    ----------
    name : str
    k, dk, d2k : callable
        Vectorized functions of ``s``.
    half_width : float
        ``|k(s)|`` is negligible (below ~1e-17 of its peak) for
        ``|s| > half_width``; used by fixed-grid quadrature.
    normalize : bool
        Rescale to ``int k^2 = 1``. A warning is issued when the input is
        off by more than 1e-6.

    Use :meth:`gaussian`, :meth:`sech` or :meth:`custom` to construct.
    """

    def __init__(self, name: str, k, dk, d2k, half_width: float, normalize: bool = True,
                 expr: str | None = None):
        self.name = name
        self.expr = expr
        self.half_width = float(half_width)
        self._k, self._dk, self._d2k = k, dk, d2k
        self._c = 1.0
        norm = quad(lambda s: self._k(s) ** 2, epsabs=1e-14, epsrel=1e-12)
        if not norm > 0:
            raise ContractError(f"kernel {name!r} has zero norm")
        if abs(norm - 1.0) > KERNEL_NORM_TOL:
            if not normalize:
                raise ContractError(f"kernel {name!r} has int k^2 = {norm:.12g}")
            if abs(norm - 1.0) > 1e-6:
                warnings.warn(f"kernel {name!r} rescaled: int k^2 was {norm:.6g}", stacklevel=3)
            self._c = 1.0 / math.sqrt(norm)

    def __repr__(self):
        return f"Kernel({self.name!r})"

    def k(self, s):
        return self._c * self._k(np.asarray(s, dtype=float))

    def dk(self, s):
        return self._c * self._dk(np.asarray(s, dtype=float))

    def d2k(self, s):
        return self._c * self._d2k(np.asarray(s, dtype=float))

    __call__ = k

    @property
    def is_gaussian(self) -> bool:
        return self.name == "gaussian"

    @classmethod
    def gaussian(cls) -> "Kernel":
        """``k(s) = sqrt(2) pi^(1/4) phi(s) = pi^(-1/4) exp(-s^2 / 2)``."""
        c = np.pi ** -0.25

        def k(s):
            return c * np.exp(-0.5 * s * s)

        return cls("gaussian", k, lambda s: -s * k(s), lambda s: (s * s - 1.0) * k(s), 40.0,
                   normalize=False)

    @classmethod
    def sech(cls) -> "Kernel":
        """``k(s) = sech(s) / sqrt(2)``; heavier-than-Gaussian tails."""
        r = 1.0 / math.sqrt(2.0)

        def k(s):
            return r * _sech(s)

        def dk(s):
            return -r * _sech(s) * np.tanh(s)

        def d2k(s):
            h = _sech(s)
            return r * h * (np.tanh(s) ** 2 - h * h)

        return cls("sech", k, dk, d2k, 45.0, normalize=False)

    @classmethod
    def custom(cls, expr: str) -> "Kernel":
        """Kernel from a sympy expression in ``s``, e.g. ``"exp(-s**4)"``.

        Derivatives are taken symbolically; the result is normalized.
        """
        import sympy as sp

        s = sp.Symbol("s", real=True)
        try:
            e = sp.sympify(expr, locals={"s": s})
        except (sp.SympifyError, SyntaxError, TypeError) as exc:
            raise ContractError(f"cannot parse kernel expression {expr!r}") from exc
        if e.free_symbols - {s}:
            raise ContractError(f"kernel expression may only use 's': {expr!r}")
        fns = [sp.lambdify(s, ex, "numpy") for ex in (e, sp.diff(e, s), sp.diff(e, s, 2))]

        def vec(f):
            return lambda x: np.asarray(f(x), dtype=float) + np.zeros_like(x, dtype=float)

        k, dk, d2k = (vec(f) for f in fns)
        peak = np.max(np.abs(k(np.linspace(-5, 5, 201))))
        if not np.isfinite(peak) or peak == 0:
            raise ContractError(f"kernel {expr!r} is not finite and nonzero near 0")
        grid = np.arange(0.0, 400.0, 0.25)
        big = np.abs(k(grid)) + np.abs(k(-grid)) > 1e-17 * peak
        half = float(grid[np.flatnonzero(big)[-1]] + 1.0)
        if half >= 399.0:
            raise ContractError(f"kernel {expr!r} decays too slowly")
        return cls("custom", k, dk, d2k, half, normalize=True, expr=str(expr))

    @classmethod
    def from_name(cls, name: str, expr: str | None = None) -> "Kernel":
        if name == "gaussian":
            return cls.gaussian()
        if name == "sech":
            return cls.sech()
        if name == "custom":
            if not expr:
                raise ContractError("custom kernel needs an expression")
            return cls.custom(expr)
        raise ContractError(f"unknown kernel {name!r}")


# ---------------------------------------------------------------------------
# profiles nu(t), sigma(t)


class Profile(ABC):
    """Positive smooth function of ``t`` with analytic derivatives."""

    #: highest derivative order available
    max_order = 2

    @abstractmethod
    def jet(self, t: float, order: int = 2) -> np.ndarray:
        """Values ``[f(t), f'(t), ..., f^(order)(t)]``."""

    def __call__(self, t):
        return np.asarray(self.jet_array(t, 0)[0])

    def jet_array(self, t, order):
        t = np.asarray(t, dtype=float)
        return np.array([np.vectorize(lambda x, k=k: self.jet(x, order)[k])(t)
                         for k in range(order + 1)])

    def check_positive(self, t):
        v = np.asarray(self(t))
        if np.any(~(v > 0)):
            raise ContractError(f"profile {self!r} is not positive on the queried domain")


@dataclass(frozen=True)
class PolyProfile(Profile):
    """Polynomial ``sum coeffs[k] t^k`` (increasing degree)."""

    coeffs: tuple

    max_order = 10**6

    def __post_init__(self):
        c = tuple(float(x) for x in np.atleast_1d(self.coeffs))
        if not c:
            raise ContractError("empty coefficient list")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def const(cls, c: float) -> "PolyProfile":
        return cls((c,))

    @classmethod
    def linear(cls, intercept: float, slope: float) -> "PolyProfile":
        return cls((intercept, slope))

    @property
    def is_constant(self) -> bool:
        return all(c == 0.0 for c in self.coeffs[1:])

    def jet(self, t, order=2):
        p = np.polynomial.Polynomial(self.coeffs)
        out = []
        for _ in range(order + 1):
            out.append(p(t))
            p = p.deriv()
        return np.array(out, dtype=float)

    def __call__(self, t):
        return np.polynomial.Polynomial(self.coeffs)(np.asarray(t, dtype=float))

    def jet_array(self, t, order):
        return self.jet(np.asarray(t, dtype=float), order)


class CallableProfile(Profile):
    """Profile given by closures ``f, df, d2f``."""

    def __init__(self, f, df, d2f):
        self.f, self.df, self.d2f = f, df, d2f

    def jet(self, t, order=2):
        if order > 2:
            raise NotImplementedError("callable profiles provide two derivatives")
        return np.array([self.f(t), self.df(t), self.d2f(t)][: order + 1], dtype=float)

    def __call__(self, t):
        return np.asarray(self.f(np.asarray(t, dtype=float)), dtype=float)


def as_profile(p) -> Profile:
    if isinstance(p, Profile):
        return p
    if np.isscalar(p):
        return PolyProfile.const(float(p))
    return PolyProfile(tuple(p))


# ---------------------------------------------------------------------------
# moment containers


@dataclass(frozen=True)
class CovDerivatives:
    """Partial derivatives of ``h(t, tau)`` at ``tau = 0`` (1 = d/dt, 2 = d/dtau)."""

    h0: float
    h1: float = 0.0
    h2: float = 0.0
    h11: float = 0.0
    h12: float = 0.0
    h22: float = 0.0
    h111: float = 0.0
    h112: float = 0.0
    h1111: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            v = float(getattr(self, f.name))
            if not math.isfinite(v):
                raise ContractError(f"{f.name} is not finite")
            object.__setattr__(self, f.name, v)
        if not self.h0 > 0:
            raise ContractError("h0 = Var X must be positive")
        if not 0.25 * self.h11 - 2.0 * self.h2 > 0:
            raise ContractError("h11/4 - 2 h2 = Var X' must be positive")


@dataclass(frozen=True)
class DerivativeMoments:
    """Second moments of ``(X, X', X'')`` at one location."""

    varX: float
    varXp: float
    varXpp: float
    covXXp: float = 0.0
    covXXpp: float = 0.0
    covXpXpp: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            v = float(getattr(self, f.name))
            if not math.isfinite(v):
                raise ContractError(f"{f.name} is not finite")
            object.__setattr__(self, f.name, v)
        if not (self.varX > 0 and self.varXp > 0 and self.varXpp > 0):
            raise ContractError("variances of X, X', X'' must be positive")

    def matrix(self) -> np.ndarray:
        """Covariance matrix of ``(X, X', X'')``."""
        return np.array([
            [self.varX, self.covXXp, self.covXXpp],
            [self.covXXp, self.varXp, self.covXpXpp],
            [self.covXXpp, self.covXpXpp, self.varXpp],
        ])

    def check_psd(self) -> "DerivativeMoments":
        m = self.matrix()
        d = np.sqrt(np.diag(m))
        ev = np.linalg.eigvalsh(m / np.outer(d, d))
        if ev[0] < -PSD_TOL:
            raise NonPSDMoments(f"moment matrix has eigenvalue {ev[0]:.3e} (correlation scale)")
        return self

    def astuple(self) -> tuple:
        return (self.varX, self.varXp, self.varXpp, self.covXXp, self.covXXpp, self.covXpXpp)


MOMENT_NAMES = ("varX", "varXp", "varXpp", "covXXp", "covXXpp", "covXpXpp")


def moments_from_h(d: CovDerivatives) -> DerivativeMoments:
    """Moments of ``(X, X', X'')`` from derivatives of ``h``.

    Raises
    ------
    NonPSDMoments
        If the resulting matrix is not PSD (inconsistent ``h``).
    """
    return DerivativeMoments(
        varX=d.h0,
        varXp=0.25 * d.h11 - 2.0 * d.h2,
        varXpp=d.h1111 / 16.0 - d.h112 + 12.0 * d.h22,
        covXXp=0.5 * d.h1,
        covXXpp=0.25 * d.h11 + 2.0 * d.h2,
        covXpXpp=d.h111 / 8.0 - d.h12,
    ).check_psd()


def gaussian_bandwidth_moments(nu: float, nu_p: float = 0.0, nu_pp: float = 0.0) -> DerivativeMoments:
    """Closed-form moments for the Gaussian kernel with bandwidth ``nu(t)``.

    Parameters
    ----------
    nu, nu_p, nu_pp : float
        ``nu(t)`` and its first two derivatives.
    """
    n, p, q = float(nu), float(nu_p), float(nu_pp)
    if not n > 0:
        raise ContractError("bandwidth must be positive")
    lam1 = (1.0 + p * p) / (2.0 * n * n)
    lam2 = ((9.0 * p**4 + 18.0 * p * p + 3.0) / (4.0 * n**4)
            + q * (1.0 - p * p) / n**3 + q * q / (2.0 * n * n))
    r1 = -(p**3 + p) / (2.0 * n**3) + p * q / (2.0 * n * n)
    return DerivativeMoments(1.0, lam1, lam2, 0.0, -lam1, r1)


def scaled_moments(base: DerivativeMoments, sigma: float, sigma_p: float,
                   sigma_pp: float) -> DerivativeMoments:
    """Moments of ``Y = sigma(t) X(t)`` from those of a unit-variance ``X``.

    Raises
    ------
    BaseNotUnitVariance
        If ``base`` violates ``Var X = 1``, ``E[XX'] = 0``, ``E[XX''] = -Var X'``.
    """
    tol = 1e-8
    lam1, lam2, r1 = base.varXp, base.varXpp, base.covXpXpp
    if (abs(base.varX - 1.0) > tol or abs(base.covXXp) > tol * math.sqrt(lam1)
            or abs(base.covXXpp + lam1) > tol * lam1):
        raise BaseNotUnitVariance("base moments are not those of a unit-variance process")
    s, s1, s2 = float(sigma), float(sigma_p), float(sigma_pp)
    if not s > 0:
        raise ContractError("sigma must be positive")
    return DerivativeMoments(
        varX=s * s,
        varXp=s1 * s1 + s * s * lam1,
        varXpp=s2 * s2 + (4.0 * s1 * s1 - 2.0 * s * s2) * lam1 + s * s * lam2 + 4.0 * s * s1 * r1,
        covXXp=s * s1,
        covXXpp=s * s2 - s * s * lam1,
        covXpXpp=s1 * s2 + s * s1 * lam1 + s * s * r1,
    )


def cosine_moments(c1: float, c2: float, omega: float, t: float) -> DerivativeMoments:
    """Exact moments of ``c1 z1 cos(omega t) + c2 z2 sin(omega t)``."""
    if not (c1 > 0 and c2 > 0 and omega > 0):
        raise ContractError("c1, c2, omega must be positive")
    c, s = math.cos(omega * t), math.sin(omega * t)
    v0 = c1 * c1 * c * c + c2 * c2 * s * s
    v1 = omega * omega * (c1 * c1 * s * s + c2 * c2 * c * c)
    x01 = omega * (c2 * c2 - c1 * c1) * s * c
    w2 = omega * omega
    return DerivativeMoments(
        varX=v0, varXp=v1, varXpp=w2 * w2 * v0,
        covXXp=x01, covXXpp=-w2 * v0, covXpXpp=-w2 * x01,
    )


def _wiener_moments(kernel: Kernel, nu: float, nu_p: float, nu_pp: float) -> DerivativeMoments:
    # integrands in u = (t - s) / nu; ds = nu du
    n, p, q = nu, nu_p, nu_pp
    a0 = n ** -0.5
    a1 = -0.5 * n ** -1.5 * p
    a2 = 0.75 * n ** -2.5 * p * p - 0.5 * n ** -1.5 * q

    def g(u):
        k, k1, k2 = kernel.k(u), kernel.dk(u), kernel.d2k(u)
        du = (1.0 - u * p) / n
        ddu = -(2.0 * du * p + u * q) / n
        return (a0 * k,
                a1 * k + a0 * k1 * du,
                a2 * k + 2.0 * a1 * k1 * du + a0 * k2 * du * du + a0 * k1 * ddu)

    def inner(i, j, epsabs):
        def f(u):
            r = g(u)
            return r[i] * r[j]
        return n * quad(f, epsabs=epsabs / n, epsrel=QUAD_EPSREL)

    v = [inner(i, i, 0.0) for i in range(3)]

    def cross(i, j):
        return inner(i, j, 1e-12 * math.sqrt(v[i] * v[j]))

    return DerivativeMoments(v[0], v[1], v[2], cross(0, 1), cross(0, 2), cross(1, 2))


# ---------------------------------------------------------------------------
# process models


class ProcessModel(ABC):
    """A centered 1D Gaussian process.

    Subclasses provide :meth:`moments`; most also provide
    :meth:`covariance` (for grid simulation) and :meth:`h_derivatives`
    (exact derivatives of ``h``).
    """

    #: True when the process has a kernel (Wiener-integral) representation
    kernel_defined = False

    @abstractmethod
    def moments(self, t: float) -> DerivativeMoments:
        """Moments of ``(X, X', X'')`` at ``t`` by the preferred route."""

    def covariance(self, s, t):
        """Covariance ``C(s, t)``; broadcasts over arrays."""
        raise NotImplementedError(f"{type(self).__name__} has no covariance function")

    def covariance_matrix(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        return self.covariance(p[:, None], p[None, :])

    def h(self, t, tau):
        """``h(t, tau) = C(t - sqrt(tau)/2, t + sqrt(tau)/2)`` for ``tau >= 0``."""
        d = np.sqrt(tau)
        return self.covariance(t - 0.5 * d, t + 0.5 * d)

    def h_derivatives(self, t: float) -> CovDerivatives:
        """Exact derivatives of ``h`` at ``(t, 0)``."""
        raise NotImplementedError(f"{type(self).__name__} has no exact h-derivatives")

    def variance(self, t):
        return self.moments(t).varX

    def check_domain(self, t) -> None:
        """Raise ContractError if the model is invalid at ``t``."""


class VaryingBandwidth(ProcessModel):
    """``X(t) = int nu(t)^{-1/2} k((t - s) / nu(t)) dB(s)``; unit variance."""

    kernel_defined = True

    def __init__(self, kernel: Kernel, nu):
        self.kernel = kernel
        self.nu = as_profile(nu)

    def __repr__(self):
        return f"{type(self).__name__}({self.kernel!r}, {self.nu!r})"

    def check_domain(self, t):
        self.nu.check_positive(t)

    def moments(self, t):
        self.check_domain(t)
        n, p, q = self.nu.jet(t, 2)
        if self.kernel.is_gaussian:
            return gaussian_bandwidth_moments(n, p, q)
        return _wiener_moments(self.kernel, n, p, q)

    def covariance(self, s, t):
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        n1, n2 = self.nu(s), self.nu(t)
        if self.kernel.is_gaussian:
            ss = n1 * n1 + n2 * n2
            return np.sqrt(2.0 * n1 * n2 / ss) * np.exp(-((s - t) ** 2) / (2.0 * ss))
        return kernel_covariance(self.kernel, s, n1, t, n2)

    def covariance_matrix(self, points):
        p = np.asarray(points, dtype=float)
        if self.kernel.is_gaussian:
            return self.covariance(p[:, None], p[None, :])
        return kernel_covariance_matrix(self.kernel, p, self.nu(p))

    def h_derivatives(self, t):
        if not self.kernel.is_gaussian or self.nu.max_order < 3:
            return super().h_derivatives(t)
        self.check_domain(t)
        r1, dr1, ddr1, r2 = _gauss_corr_coeffs(self.nu.jet(t, 3))
        return CovDerivatives(h0=1.0, h2=r1, h12=dr1, h112=ddr1, h22=2.0 * r2)


class StationaryKernel(VaryingBandwidth):
    """Kernel smoothing of white noise with a fixed bandwidth ``nu``."""

    def __init__(self, kernel: Kernel, nu: float):
        if not nu > 0:
            raise ContractError("bandwidth must be positive")
        super().__init__(kernel, PolyProfile.const(float(nu)))


def _gauss_corr_coeffs(jet):
    # d^2 and d^4 coefficients of the Gaussian-kernel correlation at midpoint
    # t, plus the first two t-derivatives of the d^2 coefficient
    n0, n1, n2, n3 = (float(x) for x in jet[:4])
    r1 = -(1.0 + n1 * n1) / (4.0 * n0 * n0)
    dr1 = -n1 * (n0 * n2 - n1 * n1 - 1.0) / (2.0 * n0**3)
    ddr1 = -(n0 * n0 * n1 * n3 + n0 * n0 * n2 * n2 - 5.0 * n0 * n1 * n1 * n2 - n0 * n2
             + 3.0 * n1**4 + 3.0 * n1 * n1) / (2.0 * n0**4)
    r2 = (-2.0 * n0 * n0 * n1 * n3 + 6.0 * n0 * n1 * n1 * n2 + 6.0 * n0 * n2
          + 3.0 * n1**4 + 12.0 * n1 * n1 + 3.0) / (96.0 * n0**4)
    return r1, dr1, ddr1, r2


class ScaledVariance(ProcessModel):
    """``Y(t) = sigma(t) X(t)`` for a unit-variance base model ``X``."""

    def __init__(self, base: ProcessModel, sigma):
        self.base = base
        self.sigma = as_profile(sigma)
        self.kernel_defined = base.kernel_defined

    def __repr__(self):
        return f"ScaledVariance({self.base!r}, {self.sigma!r})"

    @property
    def kernel(self):
        return getattr(self.base, "kernel", None)

    def check_domain(self, t):
        self.base.check_domain(t)
        self.sigma.check_positive(t)

    def moments(self, t):
        self.check_domain(t)
        s, s1, s2 = self.sigma.jet(t, 2)
        return scaled_moments(self.base.moments(t), s, s1, s2)

    def covariance(self, s, t):
        return self.sigma(s) * self.sigma(t) * self.base.covariance(s, t)

    def covariance_matrix(self, points):
        p = np.asarray(points, dtype=float)
        sd = self.sigma(p)
        return sd[:, None] * self.base.covariance_matrix(p) * sd[None, :]

    def h_derivatives(self, t):
        if self.sigma.max_order < 4:
            return super().h_derivatives(t)
        b = self.base.h_derivatives(t)
        if b.h0 != 1.0 or b.h1 or b.h11 or b.h111 or b.h1111:
            raise BaseNotUnitVariance("base h-derivatives are not unit variance")
        self.sigma.check_positive(t)
        s0, s1, s2, s3, s4 = self.sigma.jet(t, 4)
        # h = S(t, d) R(t, d), S = sigma(t - d/2) sigma(t + d/2)
        S2 = 0.25 * (s0 * s2 - s1 * s1)
        dS2 = 0.25 * (s0 * s3 - s1 * s2)
        ddS2 = 0.25 * (s0 * s4 - s2 * s2)
        S4 = s0 * s4 / 192.0 - s1 * s3 / 48.0 + s2 * s2 / 64.0
        r1, dr1, ddr1, r2 = b.h2, b.h12, b.h112, 0.5 * b.h22
        a1 = s0 * s0 * r1 + S2
        da1 = 2.0 * s0 * s1 * r1 + s0 * s0 * dr1 + dS2
        dda1 = (2.0 * s1 * s1 + 2.0 * s0 * s2) * r1 + 4.0 * s0 * s1 * dr1 + s0 * s0 * ddr1 + ddS2
        a2 = s0 * s0 * r2 + S2 * r1 + S4
        return CovDerivatives(
            h0=s0 * s0, h1=2.0 * s0 * s1, h11=2.0 * s1 * s1 + 2.0 * s0 * s2,
            h111=6.0 * s1 * s2 + 2.0 * s0 * s3,
            h1111=6.0 * s2 * s2 + 8.0 * s1 * s3 + 2.0 * s0 * s4,
            h2=a1, h12=da1, h112=dda1, h22=2.0 * a2,
        )


@dataclass(frozen=True)
class Cosine(ProcessModel):
    """``X(t) = c1 z1 cos(omega t) + c2 z2 sin(omega t)``, ``z1, z2`` iid N(0,1)."""

    c1: float
    c2: float
    omega: float

    def __post_init__(self):
        if not (self.c1 > 0 and self.c2 > 0 and self.omega > 0):
            raise ContractError("c1, c2, omega must be positive")

    def moments(self, t):
        return cosine_moments(self.c1, self.c2, self.omega, t)

    def covariance(self, s, t):
        w = self.omega
        return (self.c1**2 * np.cos(w * s) * np.cos(w * t)
                + self.c2**2 * np.sin(w * s) * np.sin(w * t))

    def h_derivatives(self, t):
        # h = (A cos(w d) + B cos(2 w t)) / 2, A = c1^2 + c2^2, B = c1^2 - c2^2
        w = self.omega
        A = self.c1**2 + self.c2**2
        B = self.c1**2 - self.c2**2
        c, s = math.cos(2 * w * t), math.sin(2 * w * t)
        return CovDerivatives(
            h0=0.5 * (A + B * c), h1=-B * w * s, h11=-2.0 * B * w * w * c,
            h111=4.0 * B * w**3 * s, h1111=8.0 * B * w**4 * c,
            h2=-A * w * w / 4.0, h22=A * w**4 / 24.0,
        )


class HDerivatives(ProcessModel):
    """Process specified only through ``t -> CovDerivatives``."""

    def __init__(self, fn: Callable[[float], CovDerivatives]):
        self.fn = fn

    def moments(self, t):
        return moments_from_h(self.fn(t))

    def h_derivatives(self, t):
        return self.fn(t)


# ---------------------------------------------------------------------------
# general-kernel covariance by fixed-grid quadrature


def _kernel_grid(kernel: Kernel, lo: float, hi: float, nu_min: float, nu_max: float):
    w = kernel.half_width * nu_max
    step = 0.02 * nu_min
    x = np.arange(lo - w, hi + w + step, step)
    return x, step


def kernel_covariance(kernel: Kernel, s, nu_s, t, nu_t):
    """``int g_s(x) g_t(x) dx`` with ``g_p(x) = nu_p^{-1/2} k((p - x) / nu_p)``.

    Trapezoid rule on a uniform grid, spectrally accurate for smooth,
    rapidly decaying kernels. Broadcasts over its array arguments.
    """
    s, nu_s, t, nu_t = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (s, nu_s, t, nu_t)))
    out = np.empty(s.shape)
    flat = zip(s.ravel(), nu_s.ravel(), t.ravel(), nu_t.ravel())
    for i, (a, na, b, nb) in enumerate(flat):
        x, step = _kernel_grid(kernel, min(a, b), max(a, b), min(na, nb), max(na, nb))
        ga = kernel.k((a - x) / na) / math.sqrt(na)
        gb = kernel.k((b - x) / nb) / math.sqrt(nb)
        out.flat[i] = step * float(np.dot(ga, gb))
    return out if out.ndim else float(out)


def kernel_covariance_matrix(kernel: Kernel, points, nus) -> np.ndarray:
    """Covariance matrix of the kernel process at ``points`` (bandwidths ``nus``)."""
    p = np.asarray(points, dtype=float)
    n = np.asarray(nus, dtype=float) * np.ones_like(p)
    x, step = _kernel_grid(kernel, p.min(), p.max(), n.min(), n.max())
    g = kernel.k((p[:, None] - x[None, :]) / n[:, None]) / np.sqrt(n)[:, None]
    return step * (g @ g.T)


# ---------------------------------------------------------------------------
# moments by quadrature and by finite differences


def moments_via_quadrature(model: ProcessModel, t: float) -> DerivativeMoments:
    """Moments as L2 inner products of the Wiener-integral integrands.

    Parameters
    ----------
    model : VaryingBandwidth, StationaryKernel, or ScaledVariance over these
    t : float

    Raises
    ------
    QuadratureFailure
    """
    if isinstance(model, ScaledVariance):
        s, s1, s2 = model.sigma.jet(t, 2)
        model.sigma.check_positive(t)
        return scaled_moments(moments_via_quadrature(model.base, t), s, s1, s2)
    if not isinstance(model, VaryingBandwidth):
        raise ContractError(f"{type(model).__name__} is not kernel-defined")
    model.check_domain(t)
    n, p, q = model.nu.jet(t, 2)
    return _wiener_moments(model.kernel, n, p, q)


# central-difference steps per derivative order (times the length scale)
_T_STEPS = {1: 1e-3, 2: 2e-3, 3: 1e-2, 4: 3e-2}
# one-sided tau steps per order (times the length scale squared)
_TAU_STEPS = {1: 1e-3, 2: 4e-3}


def _central(g, order, step):
    # O(step^2) central differences
    if order == 1:
        return (g(step) - g(-step)) / (2 * step)
    if order == 2:
        return (g(step) - 2 * g(0.0) + g(-step)) / step**2
    if order == 3:
        return (g(2 * step) - 2 * g(step) + 2 * g(-step) - g(-2 * step)) / (2 * step**3)
    return (g(2 * step) - 4 * g(step) + 6 * g(0.0) - 4 * g(-step) + g(-2 * step)) / step**4


def _forward(g, order, step):
    # O(step^2) one-sided differences at 0
    if order == 1:
        return (-3 * g(0.0) + 4 * g(step) - g(2 * step)) / (2 * step)
    return (2 * g(0.0) - 5 * g(step) + 4 * g(2 * step) - g(3 * step)) / step**2


def _richardson(diff, g, order, step):
    return (4.0 * diff(g, order, 0.5 * step) - diff(g, order, step)) / 3.0


def h_derivatives_numeric(h: Callable[[float, float], float], t: float, scale: float = 1.0,
                          domain: tuple[float, float] | None = None) -> CovDerivatives:
    """Finite-difference derivatives of ``h(t, tau)`` at ``tau = 0``.

    Central differences in ``t`` and one-sided second-order differences in
    ``tau``, each with one Richardson step. Step sizes grow with the
    derivative order and are proportional to ``scale`` (a correlation
    length of the process) in ``t`` and to ``scale**2`` in ``tau``.

    Parameters
    ----------
    h : callable
        ``h(t, tau)``, defined for ``tau >= 0``.
    t : float
    scale : float
        Characteristic length of the process near ``t``.
    domain : (float, float), optional
        Interval on which ``h`` may be evaluated in ``t``.

    Raises
    ------
    StencilOutOfDomain
        If the stencil leaves ``domain`` or ``h`` is not finite on it.
    """
    L = float(scale)
    reach = 2 * _T_STEPS[4] * L
    if domain is not None and not (domain[0] <= t - reach and t + reach <= domain[1]):
        raise StencilOutOfDomain(f"stencil [{t - reach}, {t + reach}] leaves {domain}")

    def H(a, b):
        try:
            v = float(h(t + a, b))
        except (ValueError, ArithmeticError) as exc:
            raise StencilOutOfDomain(f"h failed at ({t + a}, {b})") from exc
        if not math.isfinite(v):
            raise StencilOutOfDomain(f"h not finite at ({t + a}, {b})")
        return v

    def td(g, order):
        return _richardson(_central, g, order, _T_STEPS[order] * L)

    def tau_d(a, order):
        return _richardson(_forward, lambda b: H(a, b), order, _TAU_STEPS[order] * L * L)

    g0 = lambda a: H(a, 0.0)  # noqa: E731
    return CovDerivatives(
        h0=H(0.0, 0.0), h1=td(g0, 1), h11=td(g0, 2), h111=td(g0, 3), h1111=td(g0, 4),
        h2=tau_d(0.0, 1), h22=tau_d(0.0, 2),
        h12=td(lambda a: tau_d(a, 1), 1), h112=_richardson(_central, lambda a: tau_d(a, 1), 2,
                                                           _T_STEPS[4] * L),
    )


def moment_scales(m: DerivativeMoments) -> np.ndarray:
    """Natural magnitude of each moment (product of standard deviations)."""
    sx, sp, spp = math.sqrt(m.varX), math.sqrt(m.varXp), math.sqrt(m.varXpp)
    return np.array([sx * sx, sp * sp, spp * spp, sx * sp, sx * spp, sp * spp])


def moments_close(a: DerivativeMoments, b: DerivativeMoments, rtol: float) -> bool:
    """Componentwise agreement relative to each moment's natural scale."""
    diff = np.abs(np.array(a.astuple()) - np.array(b.astuple()))
    return bool(np.all(diff <= rtol * moment_scales(b)))
