"""Monte Carlo evaluation of the Kac-Rice peak height distribution.

For a smooth centered field observed at one point, the probability that a
local maximum there exceeds ``u`` is the ratio::

    E[|det H| 1{H < 0} 1{X > u} | grad X = 0] / E[|det H| 1{H < 0} | grad X = 0]

with ``H`` the Hessian. Both estimators below sample from the Gaussian law
of ``(X, vech H)`` given ``grad X = 0``.

``algorithm1`` draws ``(X, H)`` jointly and reuses one sample set for all
thresholds, so its curve is exactly monotone. ``algorithm2`` factors the
numerator as ``E[. | X > u, grad X = 0] P(X > u | grad X = 0)``, drawing
``X`` from the truncated law and shifting pre-drawn zero-mean Hessians by
their conditional mean given ``X``; this keeps the relative error bounded
in the upper tail.

Standard errors use the delta method for a ratio of means,
``se^2 = sum((a_i - R b_i)^2) / (n (n - 1) mean(b)^2)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _backend
from ._parallel import CHUNK_SIZE, chunk_bounds, map_ordered, rng
from .covmodel import DerivativeMoments
from .errors import ContractError, NotPSD, TailUnderflowWarning, ZeroDenominator
from .gaussian import GaussianLaw, cholesky_psd, condition, norm_sf, truncnorm_lower

# stream tags for the random number generator
_TAG_ALG1 = 10
_TAG_BASE_H = 20
_TAG_TRUNC = 21


@dataclass(frozen=True)
class JointGaussianSpec:
    """Covariance blocks of ``(X, grad X, vech hess X)`` at one point.

    Attributes
    ----------
    fv : float
        ``Var X``.
    dv : (d, d) array
        Gradient covariance.
    d2v : (q, q) array
        Covariance of the half-vectorized Hessian, ``q = d(d+1)/2``.
    fdcov : (d,) array
        ``Cov(X, grad X)``.
    fd2cov : (q,) array
        ``Cov(X, vech H)``.
    dd2cov : (d, q) array
        ``Cov(grad X, vech H)``.
    """

    fv: float
    dv: np.ndarray
    d2v: np.ndarray
    fdcov: np.ndarray
    fd2cov: np.ndarray
    dd2cov: np.ndarray

    def __post_init__(self):
        dv = np.atleast_2d(np.asarray(self.dv, dtype=float))
        d = dv.shape[0]
        q = d * (d + 1) // 2
        arrays = {
            "dv": (dv, (d, d)),
            "d2v": (np.atleast_2d(np.asarray(self.d2v, dtype=float)), (q, q)),
            "fdcov": (np.asarray(self.fdcov, dtype=float).reshape(-1), (d,)),
            "fd2cov": (np.asarray(self.fd2cov, dtype=float).reshape(-1), (q,)),
            "dd2cov": (np.asarray(self.dd2cov, dtype=float).reshape(d, -1), (d, q)),
        }
        for name, (arr, shape) in arrays.items():
            if arr.shape != shape:
                raise ContractError(f"{name} has shape {arr.shape}, expected {shape}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "fv", float(self.fv))
        if not self.fv > 0:
            raise ContractError("field variance must be positive")
        j = self.joint_cov()
        sd = np.sqrt(np.diag(j))
        if np.any(~(sd > 0)):
            raise ContractError("every coordinate needs positive variance")
        ev = np.linalg.eigvalsh(j / np.outer(sd, sd))
        if ev[0] < -1e-10:
            raise NotPSD(f"joint covariance has eigenvalue {ev[0]:.3e} (correlation scale)")

    @property
    def d(self) -> int:
        return self.dv.shape[0]

    @property
    def q(self) -> int:
        return self.d2v.shape[0]

    def joint_cov(self) -> np.ndarray:
        """Covariance of ``(X, grad X, vech H)``, size ``1 + d + q``."""
        return np.block([
            [np.array([[self.fv]]), self.fdcov[None, :], self.fd2cov[None, :]],
            [self.fdcov[:, None], self.dv, self.dd2cov],
            [self.fd2cov[:, None], self.dd2cov.T, self.d2v],
        ])

    def conditional_law(self) -> GaussianLaw:
        """Law of ``(X, vech H)`` given ``grad X = 0``."""
        d = self.d
        return condition(GaussianLaw.centered(self.joint_cov()), np.arange(1, 1 + d), np.zeros(d))

    def grad_density_at_zero(self) -> float:
        """Density of ``grad X`` at the origin."""
        sign, logdet = np.linalg.slogdet(self.dv)
        return math.exp(-0.5 * (self.d * math.log(2 * math.pi) + logdet))


def spec_from_moments_1d(m: DerivativeMoments) -> JointGaussianSpec:
    """One-dimensional spec from the moments of ``(X, X', X'')``."""
    return JointGaussianSpec(
        fv=m.varX, dv=[[m.varXp]], d2v=[[m.varXpp]],
        fdcov=[m.covXXp], fd2cov=[m.covXXpp], dd2cov=[[m.covXpXpp]],
    )


@dataclass(frozen=True)
class PeakCdfEstimate:
    """Monte Carlo estimate of ``P(height > u)`` on a threshold grid.

    Attributes
    ----------
    u, tail, se : ndarray
        Thresholds, tail estimates and their standard errors.
    niters, seed, algorithm : int
    underflow : ndarray of bool
        Thresholds at which ``P(X > u | grad X = 0)`` underflowed
        (algorithm 2 only); those report ``tail = se = 0``.
    kr_numerator : ndarray
        Unnormalized Kac-Rice numerators (including ``p_grad(0)``).
    kr_denominator : float
    n_exceed : ndarray of int
        Samples contributing to each numerator: those with ``X > u`` for
        algorithm 1, all draws for algorithm 2 (zero where underflowed).
    """

    u: np.ndarray
    tail: np.ndarray
    se: np.ndarray
    niters: int
    seed: int
    algorithm: int
    underflow: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))
    kr_numerator: np.ndarray = field(default_factory=lambda: np.zeros(0))
    kr_denominator: float = float("nan")
    n_exceed: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))


def _as_thresholds(u) -> np.ndarray:
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if u.ndim != 1 or np.any(np.isnan(u)):
        raise ContractError("thresholds must be a 1D array without NaN")
    return u


def _check_niters(niters) -> int:
    n = int(niters)
    if n < 1:
        raise ContractError("niters must be >= 1")
    return n


def algorithm1(spec: JointGaussianSpec, u, niters: int, seed: int,
               workers: int | None = None) -> PeakCdfEstimate:
    """Direct Monte Carlo Kac-Rice estimate of the peak height tail.

    Parameters
    ----------
    spec : JointGaussianSpec
    u : array_like
        Thresholds (any order; ``-inf`` allowed).
    niters : int
        Number of joint samples.
    seed : int
    workers : int, optional
        Threads; the result does not depend on it.

    Raises
    ------
    ZeroDenominator
        If no sample has a negative-definite Hessian.
    """
    u = _as_thresholds(u)
    n = _check_niters(niters)
    law = spec.conditional_law()
    chol = cholesky_psd(law.cov)
    d = spec.d

    def run(item):
        c, (lo, hi) = item
        z = rng(seed, _TAG_ALG1, c).standard_normal((hi - lo, law.dim))
        s = z @ chol.T
        return s[:, 0].copy(), _backend.hessian_weights(s[:, 1:], d)

    parts = map_ordered(run, list(enumerate(chunk_bounds(n, CHUNK_SIZE))), workers)
    x = np.concatenate([p[0] for p in parts])
    w = np.concatenate([p[1] for p in parts])
    order = np.argsort(x, kind="stable")[::-1]  # descending
    xd, wd = x[order], w[order]
    c1 = np.concatenate([[0.0], np.cumsum(wd)])
    c2 = np.concatenate([[0.0], np.cumsum(wd * wd)])
    total = c1[-1]
    if not total > 0:
        raise ZeroDenominator("no sample with a negative-definite Hessian")
    k = np.searchsorted(-xd, -u, side="left")  # number of samples with x > u
    tail = c1[k] / total
    ss = np.maximum(c2[k] * (1.0 - 2.0 * tail) + tail * tail * c2[-1], 0.0)
    mean_b = total / n
    se = np.sqrt(ss / max(n - 1, 1) / n) / mean_b
    p0 = spec.grad_density_at_zero()
    return PeakCdfEstimate(u, tail, se, n, int(seed), 1, np.zeros(u.size, dtype=bool),
                           c1[k] / n * p0, total / n * p0, k.astype(np.int64))


def algorithm2(spec: JointGaussianSpec, u, niters: int, seed: int,
               workers: int | None = None) -> PeakCdfEstimate:
    """Kac-Rice estimate with truncated sampling of the field value.

    For each threshold the field value is drawn from its law given
    ``X > u`` and ``grad X = 0``; Hessians ``H_i`` drawn once from their law
    given ``X`` and ``grad X`` are shifted by ``beta * X``, the conditional
    mean. Estimates are clipped to ``[0, 1]``.

    Raises
    ------
    ZeroDenominator
    """
    u = _as_thresholds(u)
    n = _check_niters(niters)
    law = spec.conditional_law()
    cov = law.cov
    s2 = cov[0, 0]
    if not s2 > 0:
        raise ZeroDenominator("field value is degenerate given a zero gradient")
    sig = math.sqrt(s2)
    c = cov[1:, 0]
    beta = c / s2
    chol_h = cholesky_psd(cov[1:, 1:] - np.outer(c, c) / s2)
    d, q = spec.d, spec.q
    p0 = spec.grad_density_at_zero()
    # key 0 is the untruncated (denominator) stream; -inf thresholds share it
    lowers = [-np.inf] + list(u)
    keys = [0] + [0 if ui == -np.inf else j + 1 for j, ui in enumerate(u)]

    def run(item):
        ci, (lo, hi) = item
        m = hi - lo
        h = rng(seed, _TAG_BASE_H, ci).standard_normal((m, q)) @ chol_h.T
        out = np.empty((m, len(lowers)))
        for j, (low, key) in enumerate(zip(lowers, keys)):
            if low == np.inf:
                out[:, j] = 0.0
                continue
            xt = truncnorm_lower(0.0, sig, low, m, rng(seed, _TAG_TRUNC, key, ci))
            out[:, j] = _backend.hessian_weights(h, d, beta, xt)
        return out

    g = np.concatenate(map_ordered(run, list(enumerate(chunk_bounds(n, CHUNK_SIZE))), workers))
    prob = norm_sf(np.asarray(lowers) / sig)
    b = g[:, 0] * p0
    mean_b = float(np.mean(b))
    if not mean_b > 0:
        raise ZeroDenominator("no sample with a negative-definite Hessian")
    tail = np.zeros(u.size)
    se = np.zeros(u.size)
    num = np.zeros(u.size)
    under = np.zeros(u.size, dtype=bool)
    for j in range(u.size):
        pj = prob[j + 1]
        if pj == 0.0:
            under[j] = bool(np.isfinite(u[j]))
            continue
        a = g[:, j + 1] * (p0 * pj)
        mean_a = float(np.mean(a))
        r = mean_a / mean_b
        resid = a - r * b
        se[j] = math.sqrt(float(np.sum(resid * resid)) / max(n - 1, 1) / n) / mean_b
        tail[j] = r
        num[j] = mean_a
    if np.any(under):
        warnings.warn(f"P(X > u | grad X = 0) underflowed at u = {u[under]}", TailUnderflowWarning,
                      stacklevel=2)
    n_exceed = np.where(under, 0, n).astype(np.int64)
    return PeakCdfEstimate(u, np.clip(tail, 0.0, 1.0), se, n, int(seed), 2, under, num, mean_b,
                           n_exceed)
