"""Gaussian primitives shared by the analytic and Monte Carlo modules.

Normal pdf/cdf evaluation, the tilting function ``psi``, conditioning of a
multivariate normal law, seeded samplers (plain and lower-truncated),
half-vectorization of symmetric matrices, and the negative-definiteness
test used by the Kac-Rice estimators.

Symmetric matrices are plain ``ndarray`` objects. Their half-vectorized form
uses column-major lower-triangle order, ``(0,0), (1,0), ..., (d-1,0), (1,1),
(2,1), ...``; :class:`VechIndex` owns that bijection.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import linalg as sla
from scipy import special

from ._parallel import rng
from .errors import NotPSD, SingularBlock

SQRT_2PI = float(np.sqrt(2.0 * np.pi))
INV_SQRT_2PI = 1.0 / SQRT_2PI

#: Relative jitter for the first factorization retry.
JITTER_START = 1e-12
#: Number of jitter retries, each multiplying the jitter by 10.
JITTER_RETRIES = 3
#: Largest condition number accepted when conditioning on a block.
MAX_CONDITION = 1e12
#: Standardized lower bound above which the tail rejection sampler is used.
TAIL_SWITCH = 4.0


# ---------------------------------------------------------------------------
# scalar normal functions


def norm_pdf(x):
    """Standard normal density."""
    x = np.asarray(x, dtype=float)
    return INV_SQRT_2PI * np.exp(-0.5 * x * x)


def norm_cdf(x):
    """Standard normal distribution function, erfc based."""
    return special.ndtr(x)


def norm_sf(x):
    """Standard normal survival function ``1 - Phi(x)`` without cancellation."""
    return special.ndtr(-np.asarray(x, dtype=float))


def _psi_left_tail(z):
    # psi(-z) = phi(z) (1 - z R(z)), R the Mills ratio; asymptotic series
    # avoids the cancellation in 1 - z R(z) for large z.
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    big = z >= 20.0
    if np.any(~big):
        zs = z[~big]
        mills = np.sqrt(np.pi / 2.0) * special.erfcx(zs / np.sqrt(2.0))
        out[~big] = 1.0 - zs * mills
    if np.any(big):
        zb = z[big]
        inv2 = 1.0 / (zb * zb)
        term = inv2.copy()
        acc = term.copy()
        for k in range(1, 12):
            term = -term * (2 * k + 1) * inv2
            acc += term
        out[big] = acc
    return norm_pdf(z) * out


def psi(x):
    """Tilting function ``psi(x) = phi(x) + x * Phi(x)``.

    ``psi`` is the antiderivative of ``Phi`` vanishing at minus infinity,
    so it is positive and increasing. The left tail is evaluated through
    the scaled complementary error function to keep full relative accuracy.

    Parameters
    ----------
    x : float or array_like
        Finite argument(s).

    Returns
    -------
    float or ndarray
    """
    xa = np.asarray(x, dtype=float)
    out = np.empty_like(xa)
    left = xa < -5.0
    if np.any(~left):
        xr = xa[~left]
        out[~left] = norm_pdf(xr) + xr * norm_cdf(xr)
    if np.any(left):
        out[left] = _psi_left_tail(-xa[left])
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# half-vectorization


@dataclass(frozen=True)
class VechIndex:
    """Bijection between lower-triangle pairs ``(i, j)``, ``i >= j``, and
    linear positions ``0 .. d(d+1)/2 - 1`` in column-major order.

    Examples
    --------
    >>> VechIndex(2).pairs
    ((0, 0), (1, 0), (1, 1))
    """

    d: int
    pairs: tuple = field(init=False, repr=False)

    def __post_init__(self):
        if int(self.d) < 1:
            raise ValueError("dimension must be >= 1")
        pairs = tuple((i, j) for j in range(self.d) for i in range(j, self.d))
        object.__setattr__(self, "pairs", pairs)

    @property
    def q(self) -> int:
        return self.d * (self.d + 1) // 2

    def index(self, i: int, j: int) -> int:
        """Linear position of entry ``(i, j)`` (either triangle)."""
        if i < j:
            i, j = j, i
        if not 0 <= j <= i < self.d:
            raise IndexError((i, j))
        # columns 0..j-1 hold d, d-1, ... entries
        return j * self.d - j * (j - 1) // 2 + (i - j)

    def rows(self) -> np.ndarray:
        return np.array([p[0] for p in self.pairs], dtype=np.intp)

    def cols(self) -> np.ndarray:
        return np.array([p[1] for p in self.pairs], dtype=np.intp)


@lru_cache(maxsize=None)
def vech_index(d: int) -> VechIndex:
    return VechIndex(d)


def dim_from_q(q: int) -> int:
    """Matrix dimension ``d`` with ``d(d+1)/2 == q``."""
    d = int(round((np.sqrt(8 * q + 1) - 1) / 2))
    if d * (d + 1) // 2 != q:
        raise ValueError(f"{q} is not a triangular number")
    return d


def vech(m) -> np.ndarray:
    """Half-vectorize symmetric matrices (last two axes)."""
    m = np.asarray(m, dtype=float)
    vi = vech_index(m.shape[-1])
    return m[..., vi.rows(), vi.cols()]


def unvech(v, d: int | None = None) -> np.ndarray:
    """Inverse of :func:`vech` (last axis), returning symmetric matrices."""
    v = np.asarray(v, dtype=float)
    d = dim_from_q(v.shape[-1]) if d is None else d
    vi = vech_index(d)
    out = np.zeros(v.shape[:-1] + (d, d))
    r, c = vi.rows(), vi.cols()
    out[..., r, c] = v
    out[..., c, r] = v
    return out


def symmetrize(m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    return 0.5 * (m + np.swapaxes(m, -1, -2))


# ---------------------------------------------------------------------------
# Gaussian laws


@dataclass(frozen=True)
class GaussianLaw:
    """Multivariate normal law ``N(mean, cov)``.

    The covariance is symmetrized on construction and must be positive
    semi-definite up to ``psd_tol`` times its largest eigenvalue.
    """

    mean: np.ndarray
    cov: np.ndarray
    psd_tol: float = 1e-10

    def __post_init__(self):
        cov = symmetrize(np.atleast_2d(np.asarray(self.cov, dtype=float)))
        mean = np.atleast_1d(np.asarray(self.mean, dtype=float))
        if cov.shape != (mean.size, mean.size):
            raise ValueError("mean and covariance shapes disagree")
        if not (np.all(np.isfinite(cov)) and np.all(np.isfinite(mean))):
            raise ValueError("non-finite law parameters")
        if mean.size:
            ev = np.linalg.eigvalsh(cov)
            if ev[0] < -self.psd_tol * max(1.0, abs(ev[-1])):
                raise NotPSD(f"covariance has eigenvalue {ev[0]:.3e}")
        cov.setflags(write=False)
        mean.setflags(write=False)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "mean", mean)

    @classmethod
    def centered(cls, cov) -> "GaussianLaw":
        cov = np.atleast_2d(np.asarray(cov, dtype=float))
        return cls(np.zeros(cov.shape[0]), cov)

    @property
    def dim(self) -> int:
        return self.mean.size


def cholesky_psd(cov, error=NotPSD) -> np.ndarray:
    """Lower Cholesky factor of a PSD matrix, with escalating diagonal jitter.

    The first attempt is unjittered. On failure ``JITTER_START * trace / d``
    is added to the diagonal and multiplied by 10 on each of up to
    ``JITTER_RETRIES`` retries.

    Raises
    ------
    NotPSD
        (or the class given as ``error``) if every attempt fails.
    """
    cov = symmetrize(cov)
    d = cov.shape[0]
    if d == 0:
        return np.zeros((0, 0))
    scale = np.trace(cov) / d
    if scale == 0.0 and not np.any(cov):
        return np.zeros_like(cov)
    jitter = 0.0
    for attempt in range(JITTER_RETRIES + 1):
        try:
            a = cov + jitter * np.eye(d) if jitter else cov
            return sla.cholesky(a, lower=True, check_finite=False)
        except sla.LinAlgError:
            jitter = JITTER_START * abs(scale) * (10.0 ** attempt)
    raise error(f"factorization failed after {JITTER_RETRIES} jitter retries")


def condition(joint: GaussianLaw, observed_indices, observed_values) -> GaussianLaw:
    """Law of the unobserved coordinates given observed ones.

    Parameters
    ----------
    joint : GaussianLaw
    observed_indices : sequence of int
    observed_values : array_like
        Values of the observed coordinates, same length as the indices.

    Returns
    -------
    GaussianLaw
        Conditional law of the remaining coordinates in their original order.

    Raises
    ------
    SingularBlock
        If the observed block has condition number above ``MAX_CONDITION``.
    """
    obs = np.asarray(observed_indices, dtype=np.intp).reshape(-1)
    vals = np.asarray(observed_values, dtype=float).reshape(-1)
    if obs.size != vals.size:
        raise ValueError("indices and values differ in length")
    if obs.size == 0:
        return joint
    free = np.setdiff1d(np.arange(joint.dim), obs)
    s = joint.cov
    s_oo = s[np.ix_(obs, obs)]
    s_fo = s[np.ix_(free, obs)]
    s_ff = s[np.ix_(free, free)]
    if np.linalg.cond(s_oo) > MAX_CONDITION:
        raise SingularBlock("observed covariance block is singular")
    c, low = sla.cho_factor(s_oo, lower=True)
    gain = sla.cho_solve((c, low), s_fo.T).T
    mean = joint.mean[free] + gain @ (vals - joint.mean[obs])
    cov = s_ff - gain @ s_fo.T
    # cancellation can leave tiny negative eigenvalues; symmetrize only
    return GaussianLaw(mean, cov, psd_tol=max(joint.psd_tol, 1e-9))


def sample_mvn(law: GaussianLaw, n: int, seed: int, chunk: int = 0) -> np.ndarray:
    """Draw ``n`` samples (rows) from ``law``.

    The stream is fixed by ``(seed, chunk)`` so chunks may be drawn on
    different threads and concatenated deterministically.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    chol = cholesky_psd(law.cov)
    z = rng(seed, 0, chunk).standard_normal((n, law.dim))
    return law.mean + z @ chol.T


def _truncnorm_std(a: float, n: int, gen: np.random.Generator) -> np.ndarray:
    # standard normal conditioned on Z >= a
    if a == -np.inf:
        return gen.standard_normal(n)
    if a < TAIL_SWITCH:
        u = 1.0 - gen.random(n)  # (0, 1]
        x = -special.ndtri(u * special.ndtr(-a))
        return np.maximum(x, a)
    # exponential rejection with the optimal rate (Robert 1995)
    alpha = 0.5 * (a + np.sqrt(a * a + 4.0))
    out = np.empty(n)
    filled = 0
    while filled < n:
        m = max(16, int(1.2 * (n - filled)))
        z = a + gen.exponential(1.0 / alpha, m)
        keep = z[gen.random(m) <= np.exp(-0.5 * (z - alpha) ** 2)]
        take = min(keep.size, n - filled)
        out[filled:filled + take] = keep[:take]
        filled += take
    return out


def sample_truncnorm_lower(mu: float, sigma: float, lower: float, n: int, seed: int,
                           chunk: int = 0) -> np.ndarray:
    """Draw from ``N(mu, sigma^2)`` conditioned on ``X >= lower``.

    Inverse-CDF sampling on the survival scale below ``mu + 4 sigma``;
    exponential rejection above it. ``lower = -inf`` gives plain normal
    draws.
    """
    return truncnorm_lower(mu, sigma, lower, n, rng(seed, 1, chunk))


def truncnorm_lower(mu: float, sigma: float, lower: float, n: int,
                    gen: np.random.Generator) -> np.ndarray:
    """As :func:`sample_truncnorm_lower` with an explicit generator."""
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    a = (lower - mu) / sigma
    x = mu + sigma * _truncnorm_std(a, n, gen)
    return np.maximum(x, lower) if np.isfinite(lower) else x


# ---------------------------------------------------------------------------
# definiteness and determinants


def neg_ldl_pivots(m) -> np.ndarray:
    """Pivots of the LDL^T factorization of ``-m`` without pivoting.

    Stops at the first non-positive pivot, so the returned array is shorter
    than ``d`` exactly when ``m`` is not negative definite.
    """
    a = -np.array(m, dtype=float)
    d = a.shape[0]
    piv = []
    for j in range(d):
        s = a[j, j]
        for k in range(j):
            s -= a[j, k] * a[j, k] * a[k, k]
        if not s > 0.0:
            break
        a[j, j] = s
        piv.append(s)
        for i in range(j + 1, d):
            t = a[i, j]
            for k in range(j):
                t -= a[i, k] * a[j, k] * a[k, k]
            a[i, j] = t / s
    return np.array(piv)


def is_negative_definite(m) -> bool:
    """True iff all eigenvalues of the symmetric matrix ``m`` are < 0.

    Decided by attempting an LDL^T factorization of ``-m`` and requiring
    every pivot to be strictly positive.
    """
    m = np.atleast_2d(np.asarray(m, dtype=float))
    return len(neg_ldl_pivots(m)) == m.shape[0]


def logdet_and_det_sign(m) -> tuple[float, float]:
    """``(log|det m|, sign(det m))``; a singular matrix gives ``(-inf, 0)``."""
    sign, logdet = np.linalg.slogdet(np.atleast_2d(np.asarray(m, dtype=float)))
    return float(logdet), float(sign)
