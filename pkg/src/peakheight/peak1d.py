"""Closed-form peak height law of a smooth centered 1D Gaussian process.

At a location ``t`` the law of the height of a local maximum depends on
two numbers only: ``sigma_tilde``, the conditional standard deviation of
``X`` given ``X' = 0``, and ``rho``, the conditional correlation of ``X``
and ``X''`` given ``X' = 0``. For ``|rho| < 1`` the density is::

    f(x) = phi(x / s) / s * sqrt(2 pi (1 - rho^2)) * psi(-rho x / (sqrt(1 - rho^2) s))

with ``s = sigma_tilde`` and ``psi`` from :mod:`peakheight.gaussian`. At
``rho = -1`` the law is Rayleigh with scale ``s``; ``rho = +1`` mirrors it.

Integrating the density by parts gives the tail in closed form::

    P(height > u) = Phibar(u / (s q)) - rho sqrt(2 pi) phi(u / s) Phi(-rho u / (s q)),

``q = sqrt(1 - rho^2)``, which is what :func:`peak_tail` evaluates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .covmodel import CovDerivatives, DerivativeMoments
from .errors import BoundaryRho, ContractError, DegenerateField, NotBoundary
from .gaussian import SQRT_2PI, norm_cdf, norm_pdf, norm_sf, psi

#: |rho| above this is treated as the Rayleigh boundary.
BOUNDARY = 1.0 - 1e-9
#: Largest |rho| overshoot beyond 1 that is silently clamped.
CLAMP_TOL = 1e-9


@dataclass(frozen=True)
class PeakParams:
    """Parameters ``(rho, sigma_tilde)`` of the 1D peak height law."""

    rho: float
    sigma_tilde: float

    def __post_init__(self):
        rho, s = float(self.rho), float(self.sigma_tilde)
        if not abs(rho) <= 1.0:
            raise ContractError(f"|rho| must be <= 1, got {rho}")
        if not (math.isfinite(s) and s > 0):
            raise ContractError(f"sigma_tilde must be finite and positive, got {s}")
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "sigma_tilde", s)

    @property
    def is_boundary(self) -> bool:
        return abs(self.rho) > BOUNDARY

    @property
    def kappa(self) -> float:
        """Legacy parameter ``-sqrt(3) rho``; meaningful for constant variance only."""
        return -math.sqrt(3.0) * self.rho


def _finish(num: float, den_sq: float, sigma2: float) -> PeakParams:
    if not den_sq > 0:
        raise DegenerateField("conditional variances vanish")
    rho = num / math.sqrt(den_sq)
    if abs(rho) > 1.0:
        if abs(rho) - 1.0 > CLAMP_TOL:
            raise DegenerateField(f"|rho| = {abs(rho):.12g} exceeds 1")
        rho = math.copysign(1.0, rho)
    if not sigma2 > 0:
        raise DegenerateField("conditional variance of X given X' = 0 is not positive")
    return PeakParams(rho, math.sqrt(sigma2))


def peak_params(m: DerivativeMoments) -> PeakParams:
    """``(rho, sigma_tilde)`` from the moments of ``(X, X', X'')``.

    ``rho = (f b - d e) / sqrt((a b - d^2)(b c - e^2))`` with ``a, b, c`` the
    variances of ``X, X', X''``, ``d = E[XX']``, ``e = E[X'X'']``,
    ``f = E[XX'']``; ``sigma_tilde^2 = a - d^2 / b``.

    Raises
    ------
    DegenerateField
        If a conditional variance given ``X' = 0`` vanishes (relative 1e-12)
        or ``|rho|`` overshoots 1 by more than 1e-9.
    """
    a, b, c = m.varX, m.varXp, m.varXpp
    d, e, f = m.covXXp, m.covXpXpp, m.covXXpp
    q1 = a * b - d * d
    q2 = b * c - e * e
    if q1 <= 1e-12 * a * b or q2 <= 1e-12 * b * c:
        raise DegenerateField("(X, X') or (X', X'') is numerically rank deficient")
    return _finish(f * b - d * e, q1 * q2, a - d * d / b)


def peak_params_from_h(d: CovDerivatives) -> PeakParams:
    """``(rho, sigma_tilde)`` directly from the derivatives of ``h``."""
    b = 0.25 * d.h11 - 2.0 * d.h2
    c = d.h1111 / 16.0 - d.h112 + 12.0 * d.h22
    e = d.h111 / 8.0 - d.h12
    num = 2.0 * (d.h11 * d.h11 / 16.0 - 4.0 * d.h2 * d.h2) - d.h1 * e
    q1 = d.h0 * b - 0.25 * d.h1 * d.h1
    q2 = b * c - e * e
    if q1 <= 1e-12 * d.h0 * b or q2 <= 1e-12 * b * c:
        raise DegenerateField("(X, X') or (X', X'') is numerically rank deficient")
    # numerator and denominator both carry a factor 2
    return _finish(num, 4.0 * q1 * q2, d.h0 - d.h1 * d.h1 / (4.0 * b))


def kappa(m: DerivativeMoments, tol: float = 1e-10) -> float:
    """``kappa = -sqrt(3) rho`` for a constant-variance process.

    Raises
    ------
    ContractError
        If ``E[XX'] != 0``, i.e. the variance is not locally constant.
    """
    if abs(m.covXXp) > tol * math.sqrt(m.varX * m.varXp):
        raise ContractError("kappa is defined for constant-variance processes only")
    return peak_params(m).kappa


def rho_gauss_bandwidth(nu: float, nu_p: float, nu_pp: float) -> float:
    """``rho(t)`` for the Gaussian kernel with bandwidth function ``nu(t)``.

    ``rho^2 = (nu'^2 + 1)^3 / (7 nu'^6 + 23 nu'^4 + 19 nu'^2 + 3
    + 4 nu nu'' (nu'^2 + 1) + 2 nu^2 nu''^2)``, ``rho < 0``. Depends on ``nu'``
    alone when ``nu`` is linear.
    """
    if not nu > 0:
        raise ContractError("bandwidth must be positive")
    p2 = nu_p * nu_p
    den = (7.0 * p2**3 + 23.0 * p2 * p2 + 19.0 * p2 + 3.0
           + 4.0 * nu * nu_pp * (p2 + 1.0) + 2.0 * nu * nu * nu_pp * nu_pp)
    return -math.sqrt((p2 + 1.0) ** 3 / den)


def _require_interior(p: PeakParams):
    if p.is_boundary:
        raise BoundaryRho(f"rho = {p.rho} is at the boundary; use the Rayleigh law")


def _scalar(x, out):
    return float(out) if np.ndim(x) == 0 else out


def peak_density(p: PeakParams, x):
    """Density of the peak height at ``x`` (vectorized).

    Raises
    ------
    BoundaryRho
        If ``|rho| > 1 - 1e-9``.
    """
    _require_interior(p)
    xa = np.asarray(x, dtype=float)
    s, r = p.sigma_tilde, p.rho
    q = math.sqrt(1.0 - r * r)
    z = xa / s
    out = norm_pdf(z) / s * SQRT_2PI * q * psi(-r * z / q)
    return _scalar(x, np.asarray(out))


def peak_tail(p: PeakParams, u):
    """``P(height > u)`` (vectorized; ``u`` may be infinite).

    Raises
    ------
    BoundaryRho
        If ``|rho| > 1 - 1e-9``.
    """
    _require_interior(p)
    ua = np.atleast_1d(np.asarray(u, dtype=float))
    s, r = p.sigma_tilde, p.rho
    q = math.sqrt(1.0 - r * r)
    with np.errstate(invalid="ignore"):
        z = ua / s
        out = norm_sf(z / q) - r * SQRT_2PI * norm_pdf(z) * norm_cdf(-r * z / q)
        # near 1, go through the small CDF so rounding keeps the curve monotone
        cdf = norm_cdf(z / q) + r * SQRT_2PI * norm_pdf(z) * norm_cdf(-r * z / q)
        out = np.where(out > 0.5, 1.0 - cdf, out)
    out = np.where(ua == -np.inf, 1.0, np.where(ua == np.inf, 0.0, out))
    # for rho > 0 the two terms cancel far in the upper tail; factor out
    # phi(z / q) and use Mills ratios, since sqrt(2 pi) phi(z) phi(rho z / q) = phi(z / q)
    bad = (r > 0) & np.isfinite(ua) & (ua / (s * q) > 6.0)
    if np.any(bad):
        a = ua[bad] / (s * q)
        out[bad] = norm_pdf(a) * (_mills(a) - r * _mills(r * a))
    out = np.clip(out, 0.0, 1.0)
    return float(out[0]) if np.ndim(u) == 0 else out


def _mills(x):
    return math.sqrt(math.pi / 2.0) * special.erfcx(x / math.sqrt(2.0))


def peak_moments(p: PeakParams) -> tuple[float, float]:
    """Mean and variance of the peak height (interior ``rho``)."""
    _require_interior(p)
    s, r = p.sigma_tilde, p.rho
    return -math.sqrt(math.pi / 2.0) * r * s, (1.0 - (math.pi / 2.0 - 1.0) * r * r) * s * s


def stationary_density(kappa_: float, x):
    """Peak height density of a stationary unit-variance process, ``kappa`` form.

    ``f(x) = sqrt(3 - kappa^2) / sqrt(3) phi(sqrt(3) x / sqrt(3 - kappa^2))
    + sqrt(2 pi) kappa x / sqrt(3) phi(x) Phi(kappa x / sqrt(3 - kappa^2))``.
    """
    k = float(kappa_)
    if not 0 <= k < math.sqrt(3.0):
        raise ContractError("kappa must lie in [0, sqrt(3))")
    xa = np.asarray(x, dtype=float)
    w = math.sqrt(3.0 - k * k)
    out = (w / math.sqrt(3.0) * norm_pdf(math.sqrt(3.0) * xa / w)
           + SQRT_2PI * k * xa / math.sqrt(3.0) * norm_pdf(xa) * norm_cdf(k * xa / w))
    return _scalar(x, np.asarray(out))


def _require_boundary(p: PeakParams):
    if not abs(p.rho) == 1.0 and not p.is_boundary:
        raise NotBoundary(f"rho = {p.rho} is not at the boundary")


def rayleigh_density(p: PeakParams, x):
    """Peak height density at ``rho = -1`` (Rayleigh) or ``+1`` (mirrored)."""
    _require_boundary(p)
    s = p.sigma_tilde
    xa = np.asarray(x, dtype=float)
    y = -xa if p.rho > 0 else xa
    out = np.where(y >= 0, SQRT_2PI * y / (s * s) * norm_pdf(y / s), 0.0)
    return _scalar(x, out)


def rayleigh_tail(p: PeakParams, u):
    """``P(height > u)`` at the boundary; ``exp(-u^2 / (2 s^2))`` for ``u >= 0``."""
    _require_boundary(p)
    s = p.sigma_tilde
    ua = np.asarray(u, dtype=float)
    with np.errstate(invalid="ignore", over="ignore"):
        e = np.exp(-0.5 * (ua / s) ** 2)
        e = np.where(np.isinf(ua), 0.0, e)
    out = np.where(ua <= 0, 1.0, e) if p.rho < 0 else np.where(ua < 0, 1.0 - e, 0.0)
    return _scalar(u, out)


def rayleigh_moments(p: PeakParams) -> tuple[float, float]:
    """Mean ``-+sqrt(pi/2) s`` and variance ``(2 - pi/2) s^2`` at the boundary."""
    _require_boundary(p)
    s = p.sigma_tilde
    return -math.copysign(1.0, p.rho) * math.sqrt(math.pi / 2.0) * s, (2.0 - math.pi / 2.0) * s * s


def height_density(p: PeakParams, x):
    """Density with automatic dispatch to the Rayleigh boundary."""
    return rayleigh_density(p, x) if p.is_boundary else peak_density(p, x)


def height_tail(p: PeakParams, u):
    """Tail probability with automatic dispatch to the Rayleigh boundary."""
    return rayleigh_tail(p, u) if p.is_boundary else peak_tail(p, u)


def height_moments(p: PeakParams) -> tuple[float, float]:
    """Mean and variance with automatic dispatch to the Rayleigh boundary."""
    return rayleigh_moments(p) if p.is_boundary else peak_moments(p)
