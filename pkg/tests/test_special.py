import math

import pytest
from scipy import integrate

from perinodular.special import (
    chi2_cdf,
    chi2_sf,
    incomplete_beta_I,
    incomplete_gamma_P,
    incomplete_gamma_Q,
    t_two_tailed_p,
)


def gamma_P_quadrature(a, x):
    if x == 0.0:
        return 0.0
    if a >= 1.0:
        def logpdf(t):
            return math.exp((a - 1) * math.log(t) - t - math.lgamma(a)) if t > 0 else 0.0

        val, _ = integrate.quad(logpdf, 0.0, x, limit=400,
                                points=[min(a, x)], epsabs=1e-12, epsrel=1e-12)
        return val
    # substitute u = t^a to remove the t -> 0 singularity
    val, _ = integrate.quad(lambda u: math.exp(-(u ** (1.0 / a))), 0.0, x ** a,
                            limit=400, epsabs=1e-12, epsrel=1e-12)
    return val / (a * math.exp(math.lgamma(a)))


def beta_I_quadrature(x, a, b):
    val, _ = integrate.quad(lambda t: t ** (a - 1) * (1 - t) ** (b - 1), 0.0, x, limit=200)
    lbeta = math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)
    return val / math.exp(lbeta)


def test_boundary_identities():
    for a in (0.5, 1.0, 3.0, 10.0):
        assert incomplete_gamma_P(a, 0.0) == 0.0
        assert incomplete_gamma_Q(a, 0.0) == 1.0
    for a, b in ((0.5, 0.5), (2.0, 3.0), (7.0, 1.5)):
        assert incomplete_beta_I(0.0, a, b) == 0.0
        assert incomplete_beta_I(1.0, a, b) == 1.0


def test_beta_symmetry_point():
    assert incomplete_beta_I(0.5, 2.0, 2.0) == pytest.approx(0.5, abs=1e-12)


def test_chi2_95th_percentile():
    # the classic 3.841 critical value at 1 dof
    assert chi2_cdf(3.841, 1) == pytest.approx(0.95, abs=1e-3)
    assert chi2_cdf(3.841, 1) == pytest.approx(gamma_P_quadrature(0.5, 3.841 / 2), abs=1e-3)


def test_t_p_value_05():
    p = t_two_tailed_p(2.776, 4)
    assert p == pytest.approx(0.05, abs=1e-3)

    def t_pdf(u, df):
        c = math.exp(math.lgamma((df + 1) / 2) - math.lgamma(df / 2)) / math.sqrt(df * math.pi)
        return c * (1 + u * u / df) ** (-(df + 1) / 2)

    tail, _ = integrate.quad(lambda u: t_pdf(u, 4), 2.776, math.inf)
    assert p == pytest.approx(2 * tail, abs=1e-3)


def test_gamma_grid_against_quadrature():
    checked = 0
    for a in (0.3, 0.5, 1.0, 2.5, 5.0, 10.0, 25.0, 60.0, 120.0, 300.0):
        for frac in (0.05, 0.3, 0.7, 1.0, 1.3, 1.8, 2.5, 4.0, 6.0, 10.0):
            x = a * frac
            assert incomplete_gamma_P(a, x) == pytest.approx(
                gamma_P_quadrature(a, x), abs=1e-8), (a, x)
            checked += 1
    assert checked == 100


def test_beta_grid_against_quadrature():
    checked = 0
    for a, b in ((0.5, 0.5), (1.0, 3.0), (2.0, 2.0), (5.0, 1.5), (10.0, 10.0)):
        for x in (0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.75, 0.9,
                  0.95, 0.99, 0.15, 0.25, 0.35, 0.45, 0.55, 0.65, 0.85, 0.98):
            assert incomplete_beta_I(x, a, b) == pytest.approx(
                beta_I_quadrature(x, a, b), abs=1e-8), (x, a, b)
            checked += 1
    assert checked == 100


def test_monotone_in_x():
    for a in (0.5, 2.0, 9.0):
        values = [incomplete_gamma_P(a, x) for x in (0.1, 0.5, 1.0, 2.0, 5.0, 9.0, 20.0)]
        assert values == sorted(values)
    for a, b in ((2.0, 3.0), (0.7, 0.7)):
        values = [incomplete_beta_I(x, a, b) for x in (0.05, 0.2, 0.4, 0.6, 0.8, 0.95)]
        assert values == sorted(values)


def test_p_q_complement():
    for a in (0.5, 1.0, 4.0, 40.0):
        for x in (0.2, 1.0, 3.0, 10.0, 60.0):
            assert incomplete_gamma_P(a, x) + incomplete_gamma_Q(a, x) == pytest.approx(
                1.0, abs=1e-12)


def test_domain_errors():
    with pytest.raises(ValueError):
        incomplete_gamma_P(-1.0, 1.0)
    with pytest.raises(ValueError):
        incomplete_gamma_P(1.0, -0.1)
    with pytest.raises(ValueError):
        incomplete_beta_I(1.5, 1.0, 1.0)
    with pytest.raises(ValueError):
        incomplete_beta_I(0.5, 0.0, 1.0)
    with pytest.raises(ValueError):
        chi2_sf(1.0, 0)
