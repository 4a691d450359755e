import math
import warnings

import numpy as np
import pytest
import sympy as sp

from peakheight.covmodel import (
    Cosine,
    CovDerivatives,
    DerivativeMoments,
    HDerivatives,
    Kernel,
    PolyProfile,
    ScaledVariance,
    StationaryKernel,
    VaryingBandwidth,
    cosine_moments,
    gaussian_bandwidth_moments,
    h_derivatives_numeric,
    moments_close,
    moments_from_h,
    moments_via_quadrature,
    scaled_moments,
)
from peakheight.errors import BaseNotUnitVariance, ContractError, NonPSDMoments, StencilOutOfDomain
from peakheight.peak1d import peak_params

GAUSS = Kernel.gaussian()
LINEAR_NU = PolyProfile.linear(0.1, 0.5)


def scaled_stationary():
    return ScaledVariance(StationaryKernel(GAUSS, 0.3), PolyProfile.linear(0.1, 1.0))


def quadratic_sigma():
    return ScaledVariance(VaryingBandwidth(GAUSS, LINEAR_NU), PolyProfile((6.0, -10.0, 8.0)))


def symbolic_h_derivatives(expr, t, tau, at_t):
    """Exact CovDerivatives of a sympy h(t, tau) at (at_t, 0)."""
    def d(nt, ntau):
        e = expr
        if nt:
            e = sp.diff(e, t, nt)
        if ntau:
            e = sp.diff(e, tau, ntau)
        return float(e.subs({t: at_t, tau: 0}))

    return CovDerivatives(
        h0=d(0, 0), h1=d(1, 0), h2=d(0, 1), h11=d(2, 0), h12=d(1, 1), h22=d(0, 2),
        h111=d(3, 0), h112=d(2, 1), h1111=d(4, 0),
    )


class TestMomentsFromH:
    def test_stationary_reduction(self):
        m = moments_from_h(CovDerivatives(h0=2.0, h2=-0.3, h22=0.05))
        assert m.covXXp == 0 and m.covXpXpp == 0
        assert m.varXp == pytest.approx(0.6)
        assert m.covXXpp == pytest.approx(-0.6)
        assert m.varXpp == pytest.approx(0.6)

    def test_gaussian_unit_bandwidth(self):
        t, tau = sp.symbols("t tau")
        d = symbolic_h_derivatives(sp.exp(-tau / 4), t, tau, 0.3)
        m = moments_from_h(d)
        assert m.astuple() == pytest.approx((1.0, 0.5, 0.75, 0.0, -0.5, 0.0), abs=1e-15)

    def test_degenerate_process_rejected(self):
        with pytest.raises(ContractError):
            moments_from_h(CovDerivatives(h0=1.0))

    def test_inconsistent_h_is_not_psd(self):
        # Var X'' far too small for the given Cov(X, X'')
        with pytest.raises(NonPSDMoments):
            moments_from_h(CovDerivatives(h0=1.0, h2=-1.0, h22=0.01))


class TestClosedForms:
    @pytest.mark.parametrize("t", [0.05, 0.3, 0.5, 0.9])
    def test_linear_bandwidth_var_xp(self, t):
        m = moments_via_quadrature(VaryingBandwidth(GAUSS, LINEAR_NU), t)
        nu = 0.5 * t + 0.1
        assert m.varXp == pytest.approx((1 + 0.25) / (2 * nu * nu), abs=1e-8)

    def test_linear_bandwidth_cov_xp_xpp(self):
        m = moments_via_quadrature(VaryingBandwidth(GAUSS, LINEAR_NU), 0.5)
        nu, p = 0.35, 0.5
        assert m.covXpXpp == pytest.approx(-(p**3 + p) / (2 * nu**3), abs=1e-8)

    @pytest.mark.parametrize("nu,nu_p,nu_pp", [(0.3, 0.0, 0.0), (0.35, 0.5, 0.0), (0.8, -0.7, 1.3), (1.5, 0.2, -0.4)])
    def test_quadrature_matches_gaussian_closed_form(self, nu, nu_p, nu_pp):
        model = VaryingBandwidth(GAUSS, PolyProfile((nu, nu_p, nu_pp / 2)))
        got = np.array(moments_via_quadrature(model, 0.0).astuple())
        want = np.array(gaussian_bandwidth_moments(nu, nu_p, nu_pp).astuple())
        np.testing.assert_allclose(got, want, rtol=1e-8, atol=1e-8)

    def test_stationary_kernel_location_free(self):
        for kernel in (GAUSS, Kernel.sech()):
            m = StationaryKernel(kernel, 0.3)
            a = np.array(moments_via_quadrature(m, 0.1).astuple())
            b = np.array(moments_via_quadrature(m, 7.3).astuple())
            np.testing.assert_allclose(a, b, rtol=1e-10, atol=0)


class TestScaled:
    def test_identity_scaling(self):
        base = gaussian_bandwidth_moments(0.4, 0.3, 0.1)
        assert scaled_moments(base, 1.0, 0.0, 0.0) == base

    @pytest.mark.parametrize("s,s1,s2", [(2.0, 0.7, -1.0), (0.5, -3.0, 4.0)])
    def test_cov_y_yp(self, s, s1, s2):
        base = gaussian_bandwidth_moments(0.4, 0.3, 0.1)
        assert scaled_moments(base, s, s1, s2).covXXp == pytest.approx(s * s1)

    def test_rejects_non_unit_base(self):
        with pytest.raises(BaseNotUnitVariance):
            scaled_moments(DerivativeMoments(2.0, 1.0, 3.0, 0.0, -1.0, 0.0), 1.0, 0.0, 0.0)

    def test_quadratic_sigma_extremes(self):
        t = np.linspace(0.0, 1.0, 1001)
        rho = np.array([peak_params(quadratic_sigma().moments(x)).rho for x in t])
        i, j = np.argmin(rho), np.argmax(rho)
        assert rho[i] == pytest.approx(-0.54, abs=0.005)
        assert rho[j] == pytest.approx(0.38, abs=0.01)
        assert abs(t[i] - 0.2) < 0.05
        assert abs(t[j] - 0.7) < 0.05

    def test_matches_symbolic_product(self):
        # Y = sigma X with Gaussian X of constant bandwidth, exact route through h
        t, tau = sp.symbols("t tau", real=True)
        dd = sp.sqrt(tau)
        sig = lambda x: 8 * x**2 - 10 * x + 6  # noqa: E731
        nu = sp.Rational(3, 10)
        h = sig(t - dd / 2) * sig(t + dd / 2) * sp.exp(-tau / (4 * nu**2))
        exact = moments_from_h(symbolic_h_derivatives(sp.expand(h), t, tau, 0.4))
        got = ScaledVariance(StationaryKernel(GAUSS, 0.3), PolyProfile((6.0, -10.0, 8.0))).moments(0.4)
        np.testing.assert_allclose(got.astuple(), exact.astuple(), rtol=1e-12, atol=1e-12)


class TestCosine:
    def test_equal_constants(self):
        p = peak_params(cosine_moments(2.0, 2.0, 1.5, 0.7))
        assert p.rho == -1.0
        assert p.sigma_tilde == pytest.approx(2.0)

    @pytest.mark.parametrize("t,sigma_tilde", [(math.pi / 4, 4.0), (math.pi / 2, 3.0)])
    def test_sigma_tilde(self, t, sigma_tilde):
        p = peak_params(cosine_moments(3.0, 4.0, 2.0, t))
        assert p.rho == -1.0
        assert p.sigma_tilde == pytest.approx(sigma_tilde, rel=1e-12)

    def test_h_route(self):
        c = Cosine(3.0, 4.0, 2.0)
        for t in (0.1, 0.4, 1.3):
            np.testing.assert_allclose(moments_from_h(c.h_derivatives(t)).astuple(),
                                       c.moments(t).astuple(), atol=1e-12)


class TestNumericH:
    def test_exponential(self):
        d = h_derivatives_numeric(lambda t, tau: math.exp(-tau / 4), 0.0)
        assert d.h2 == pytest.approx(-0.25, abs=1e-6)
        assert d.h22 == pytest.approx(1 / 16, abs=1e-6)

    def test_stationary_zero_t_derivatives(self):
        d = h_derivatives_numeric(lambda t, tau: math.exp(-tau / 4), 1.7)
        for name in ("h1", "h11", "h111", "h112", "h1111", "h12"):
            assert abs(getattr(d, name)) < 1e-6, name

    def test_stencil_out_of_domain(self):
        with pytest.raises(StencilOutOfDomain):
            h_derivatives_numeric(lambda t, tau: math.exp(-tau), 0.0, domain=(0.0, 1.0))

    def test_non_finite(self):
        with pytest.raises(StencilOutOfDomain):
            h_derivatives_numeric(lambda t, tau: math.log(t) * 0 + 1.0 - tau, 0.0)

    def test_scaled_stationary(self):
        model = scaled_stationary()
        for t in (0.3, 0.5, 0.8):
            num = moments_from_h(h_derivatives_numeric(model.h, t, scale=0.3))
            assert moments_close(num, moments_via_quadrature(model, t), 1e-5)


BUILTIN_KERNEL_MODELS = {
    "stationary-gauss": lambda: StationaryKernel(GAUSS, 0.3),
    "stationary-sech": lambda: StationaryKernel(Kernel.sech(), 0.4),
    "scaled-stationary": scaled_stationary,
    "linear-bandwidth": lambda: VaryingBandwidth(GAUSS, LINEAR_NU),
    "quadratic-sigma": quadratic_sigma,
    "sech-linear": lambda: VaryingBandwidth(Kernel.sech(), PolyProfile.linear(0.3, 0.2)),
}


class TestOracleEquivalence:
    @pytest.mark.parametrize("name", sorted(BUILTIN_KERNEL_MODELS))
    def test_numeric_h_vs_quadrature(self, name):
        model = BUILTIN_KERNEL_MODELS[name]()
        for t in np.random.default_rng(11).uniform(0.15, 0.95, 10):
            m = model.moments(t)
            scale = math.sqrt(m.varX / m.varXp)  # correlation length
            num = moments_from_h(h_derivatives_numeric(model.h, t, scale=scale))
            quad = moments_via_quadrature(model, t)
            assert moments_close(num, quad, 1e-5), (t, num, quad)

    @pytest.mark.parametrize("name", ["stationary-gauss", "stationary-sech", "linear-bandwidth"])
    def test_unit_variance_identities(self, name):
        model = BUILTIN_KERNEL_MODELS[name]()
        for t in (0.2, 0.6):
            m = moments_via_quadrature(model, t)
            assert abs(m.varX - 1) < 1e-10
            assert abs(m.covXXp) < 1e-10
            assert abs(m.covXXpp + m.varXp) < 1e-10 * max(1.0, m.varXp)

    @pytest.mark.parametrize("name", sorted(BUILTIN_KERNEL_MODELS))
    def test_moment_matrix_psd(self, name):
        model = BUILTIN_KERNEL_MODELS[name]()
        for t in np.linspace(0.05, 1.0, 8):
            ev = np.linalg.eigvalsh(model.moments(t).matrix())
            assert ev.min() >= -1e-10 * ev.max()


class TestKernels:
    def test_normalized(self):
        with pytest.warns(UserWarning):
            quartic = Kernel.custom("exp(-s**4)")
        for kernel in (GAUSS, Kernel.sech(), quartic):
            s = np.linspace(-60, 60, 600001)
            assert np.trapezoid(kernel.k(s) ** 2, s) == pytest.approx(1.0, abs=1e-8)

    def test_custom_warns_when_rescaled(self):
        with pytest.warns(UserWarning, match="rescaled"):
            Kernel.custom("exp(-s**2)")

    def test_custom_already_normalized_is_silent(self):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            k = Kernel.custom("pi**(-1/4)*exp(-s**2/2)")
        assert k.k(0.0) == pytest.approx(math.pi ** -0.25)

    @pytest.mark.parametrize("expr", ["exp(-x**2)", "1/(1+s**2)", "s+"])
    def test_custom_rejects(self, expr):
        with pytest.raises(ContractError):
            Kernel.custom(expr)

    def test_custom_matches_gaussian(self):
        with pytest.warns(UserWarning):
            custom = VaryingBandwidth(Kernel.custom("exp(-s**2/2)"), LINEAR_NU)
        got = moments_via_quadrature(custom, 0.4)
        want = gaussian_bandwidth_moments(0.3, 0.5)
        np.testing.assert_allclose(got.astuple(), want.astuple(), rtol=1e-8, atol=1e-8)

    def test_kernel_covariance_matches_gaussian(self):
        g = VaryingBandwidth(GAUSS, LINEAR_NU)
        custom = VaryingBandwidth(Kernel.sech(), LINEAR_NU)  # exercises the quadrature grid
        pts = np.linspace(0.0, 1.0, 7)
        np.testing.assert_allclose(np.diag(custom.covariance_matrix(pts)), 1.0, atol=1e-10)
        gm = g.covariance_matrix(pts)
        np.testing.assert_allclose(np.diag(gm), 1.0, atol=1e-14)


class TestDomain:
    def test_bandwidth_must_stay_positive(self):
        with pytest.raises(ContractError):
            VaryingBandwidth(GAUSS, PolyProfile.linear(0.1, -1.0)).moments(0.5)

    def test_sigma_must_stay_positive(self):
        with pytest.raises(ContractError):
            ScaledVariance(StationaryKernel(GAUSS, 0.3), PolyProfile.linear(-0.5, 1.0)).moments(0.2)

    def test_h_derivatives_model(self):
        m = HDerivatives(lambda t: CovDerivatives(h0=1.0, h2=-0.25, h22=1 / 16))
        assert m.moments(3.0).varXp == pytest.approx(0.5)
