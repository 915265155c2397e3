"""Probability-model kernels against independent oracles.

Frozen expected values below were produced by scipy.integrate.quad (bin-mass
quadrature) and mpmath (order derivative of the incomplete gamma) before the
implementation was written; the oracle code is kept next to each assertion.
"""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.special import erf, gammainc

import swpc.prob_models as pm
from swpc.prob_models import (
    InfiniteRateError,
    ParameterDomainError,
    ProbModel,
    cdf_eval,
    gmm_effective_mean,
    grad_rate_params,
    pmf_integer,
    rate_bits,
    regularized_lower_gamma,
    regularized_lower_gamma_with_da,
)

# sigma such that the central unit bin holds exactly half the mass:
# 0.5 / (sqrt(2) * erfinv(0.5))
SIGMA_HALF_MASS = 0.7413011092528009


def random_model(rng, family=None):
    family = family or rng.choice(["gm", "ggm", "gmm"])
    if family == "gm":
        return ProbModel.gaussian(np.exp(rng.uniform(np.log(0.1), np.log(10))))
    if family == "ggm":
        return ProbModel.generalized_gaussian(rng.uniform(0.4, 4.0), np.exp(rng.uniform(np.log(0.1), np.log(10))))
    k = 3
    w = rng.dirichlet(np.ones(k) * 3)
    w = w / w.sum()
    return ProbModel.mixture(w, rng.uniform(-4, 4, k), np.exp(rng.uniform(np.log(0.3), np.log(4), k)))


# ---------------------------------------------------------------------------
# CDFs


def test_gaussian_cdf_center_is_half():
    assert cdf_eval(ProbModel.gaussian(1.0), 0.0) == pytest.approx(0.5, abs=1e-15)


def test_ggm_beta2_matches_gaussian_cdf():
    # beta=2, alpha=sqrt(2)*sigma degenerates to Gaussian(sigma)
    for sigma in (0.2, 1.0, 5.0):
        g = ProbModel.gaussian(sigma)
        gg = ProbModel.generalized_gaussian(2.0, math.sqrt(2.0) * sigma)
        grid = np.linspace(-6 * sigma, 6 * sigma, 50)
        assert np.max(np.abs(cdf_eval(gg, grid) - cdf_eval(g, grid))) <= 1e-9


def test_ggm_beta1_is_laplace():
    # Laplace(b=1): F(x) = 1 - exp(-x)/2 for x >= 0
    val = cdf_eval(ProbModel.generalized_gaussian(1.0, 1.0), 0.7)
    assert val == pytest.approx(1.0 - 0.5 * math.exp(-0.7), abs=1e-12)


def test_cdf_monotone_no_inversions():
    rng = np.random.default_rng(7)
    for _ in range(30):
        model = random_model(rng)
        xs = np.sort(rng.uniform(-30, 30, 1000))
        vals = np.asarray(cdf_eval(model, xs))
        assert np.all(np.diff(vals) >= -1e-12)
        assert np.all((vals >= 0) & (vals <= 1))


# ---------------------------------------------------------------------------
# Integer-bin masses


def test_gaussian_pmf_matches_quadrature():
    # oracle: quad(phi_sigma, k-1/2, k+1/2); frozen values above tolerance 1e-12
    frozen = {
        (1.0, 0): 0.3829249225480263,
        (1.0, 1): 0.24173033745712882,
        (1.0, 3): 0.005977036246740612,
        (0.42, 2): 0.00017751836902669786,
        (7.5, 4): 0.046116073151196806,
    }
    for (sigma, k), expect in frozen.items():
        assert pmf_integer(ProbModel.gaussian(sigma), k) == pytest.approx(expect, abs=1e-12)


def test_ggm_pmf_matches_quadrature():
    frozen = {
        (1.4, 2.2, 3): 0.05419446870853909,
        (0.7, 0.9, 0): 0.30192317455478507,
        (3.0, 1.1, 1): 0.24471861684081697,
        (2.0, math.sqrt(2.0), 2): 0.06059753594308194,
    }
    for (beta, alpha, k), expect in frozen.items():
        assert pmf_integer(ProbModel.generalized_gaussian(beta, alpha), k) == pytest.approx(expect, abs=1e-12)


def test_gmm_pmf_matches_quadrature():
    model = ProbModel.mixture((0.3, 0.5, 0.2), (-1.0, 0.5, 2.0), (0.8, 1.5, 0.6))
    frozen = {-1: 0.2210524317973749, 0: 0.19566932361734907, 2: 0.19997419262762944}
    for k, expect in frozen.items():
        assert pmf_integer(model, k) == pytest.approx(expect, abs=1e-12)


def test_pmf_symmetry_exact():
    # symmetric families evaluate through |k|, so +/-k are bit-identical
    for model in (ProbModel.gaussian(1.0), ProbModel.generalized_gaussian(1.3, 0.8)):
        for k in (1, 2, 3, 17):
            assert pmf_integer(model, k) == pmf_integer(model, -k)


def test_pmf_wide_sigma_approximates_density():
    sigma = 1e6
    val = pmf_integer(ProbModel.gaussian(sigma), 0)
    assert val == pytest.approx(1.0 / (sigma * math.sqrt(2 * math.pi)), rel=0.01)


@pytest.mark.parametrize(
    "model",
    [
        ProbModel.gaussian(0.3),
        ProbModel.gaussian(12.0),
        ProbModel.generalized_gaussian(0.6, 1.8),
        ProbModel.generalized_gaussian(4.0, 9.0),
        ProbModel.mixture((0.25, 0.25, 0.5), (-6.0, 0.0, 7.5), (0.5, 2.0, 1.0)),
    ],
)
def test_pmf_sums_to_one(model):
    ks = np.arange(-400, 401)
    assert np.sum(pmf_integer(model, ks)) == pytest.approx(1.0, abs=1e-9)


@given(sigma=st.floats(0.05, 50), x=st.floats(-40, 40))
@settings(max_examples=200, deadline=None)
def test_gaussian_cdf_pmf_bounds(sigma, x):
    model = ProbModel.gaussian(sigma)
    c = cdf_eval(model, x)
    p = pmf_integer(model, int(round(x)))
    assert 0.0 <= c <= 1.0
    assert 0.0 <= p <= 1.0


# ---------------------------------------------------------------------------
# Rates


def test_rate_one_bit_at_half_mass():
    assert rate_bits(ProbModel.gaussian(SIGMA_HALF_MASS), 0) == pytest.approx(1.0, abs=1e-10)


def test_rate_zero_bits_at_full_mass():
    # sigma tiny: the whole mass sits in the central bin
    assert rate_bits(ProbModel.gaussian(1e-8), 0) == 0.0


def test_rate_frozen_value():
    assert rate_bits(ProbModel.gaussian(1.0), 0) == pytest.approx(1.3848665342909894, abs=1e-12)


def test_rate_raises_below_floor():
    with pytest.raises(InfiniteRateError):
        rate_bits(ProbModel.gaussian(0.05), 40)


def test_floored_rate_matches_rate_in_support():
    model = ProbModel.gaussian(2.0)
    ks = np.arange(-8, 9)
    floored = pm.floored_rate_bits(pmf_integer(model, ks))
    exact = np.array([rate_bits(model, int(k)) for k in ks])
    np.testing.assert_allclose(floored, exact, atol=1e-12)


# ---------------------------------------------------------------------------
# Mixture helpers


def test_gmm_effective_mean():
    assert gmm_effective_mean(pm.GmmParams((0.5, 0.5), (-2.0, 2.0), (1.0, 1.0))) == 0.0
    assert gmm_effective_mean(pm.GmmParams((0.2, 0.8), (0.0, 5.0), (1.0, 1.0))) == pytest.approx(4.0)
    assert gmm_effective_mean(pm.GmmParams((1.0,), (3.25,), (0.5,))) == pytest.approx(3.25)


def test_model_std_mixture():
    # Var = sum w (sigma^2 + mu^2) - mean^2
    params = pm.GmmParams((0.5, 0.5), (-2.0, 2.0), (1.0, 1.0))
    model = ProbModel("gmm", params)
    assert pm.model_std(model) == pytest.approx(math.sqrt(5.0), abs=1e-12)


# ---------------------------------------------------------------------------
# Gradients vs central finite differences


def _fd_rate(model_builder, coords, k, idx, h=1e-5):
    up = coords.copy()
    dn = coords.copy()
    up[idx] += h
    dn[idx] -= h
    return (rate_bits(model_builder(up), k) - rate_bits(model_builder(dn), k)) / (2 * h)


def _coords_and_builder(model):
    if model.family == "gm":
        return np.array([math.log(model.params.sigma)]), lambda c: ProbModel.gaussian(math.exp(c[0]))
    if model.family == "ggm":
        p = model.params
        return (
            np.array([math.log(p.beta), math.log(p.alpha)]),
            lambda c: ProbModel.generalized_gaussian(math.exp(c[0]), math.exp(c[1])),
        )
    p = model.params
    kc = p.component_count
    coords = np.concatenate([np.log(p.weights), p.means, np.log(p.sigmas)])

    def build(c):
        w = np.exp(c[:kc])
        w = w / w.sum()
        return ProbModel.mixture(w, c[kc : 2 * kc], np.exp(c[2 * kc :]))

    return coords, build


def test_grad_rate_params_matches_fd():
    rng = np.random.default_rng(11)
    checked = 0
    for _ in range(120):
        model = random_model(rng)
        spread = max(1.0, pm.model_std(model))
        k = int(rng.integers(-2 * spread, 2 * spread + 1))
        try:
            grads = grad_rate_params(model, k)
        except InfiniteRateError:
            continue
        coords, build = _coords_and_builder(model)
        for idx in range(len(coords)):
            fd = _fd_rate(build, coords, k, idx)
            # negligible gradients are compared absolutely (FD noise floor),
            # resolvable ones relatively at 1e-4
            err = abs(grads[idx] - fd)
            assert err <= 1e-8 or err / max(abs(fd), abs(grads[idx])) <= 1e-4, (model, k, idx, grads[idx], fd)
        checked += 1
    assert checked >= 80


# ---------------------------------------------------------------------------
# Regularized lower incomplete gamma


def test_gamma_against_scipy_grid():
    a = np.exp(np.linspace(np.log(0.3), np.log(20), 60))
    x = np.linspace(0.0, 200.0, 101)
    aa, xx = np.meshgrid(a, x)
    mine = regularized_lower_gamma(aa, xx)
    ref = gammainc(aa, xx)
    assert np.max(np.abs(mine - ref)) <= 1e-12


def test_gamma_identities():
    xs = np.linspace(0.01, 40, 300)
    np.testing.assert_allclose(regularized_lower_gamma(1.0, xs), 1 - np.exp(-xs), atol=1e-13)
    np.testing.assert_allclose(regularized_lower_gamma(0.5, xs), erf(np.sqrt(xs)), atol=1e-13)
    assert regularized_lower_gamma(2.7, 0.0) == 0.0


def test_gamma_monotone_in_x():
    xs = np.linspace(0, 60, 2000)
    vals = regularized_lower_gamma(1.7, xs)
    assert np.all(np.diff(vals) >= -1e-15)


def test_gamma_domain_errors():
    for a, x in [(0.0, 1.0), (-1.0, 1.0), (1.0, -0.5), (math.nan, 1.0), (1.0, math.inf)]:
        with pytest.raises(ParameterDomainError):
            regularized_lower_gamma(a, x)


def test_gamma_order_derivative_vs_mpmath():
    # oracle: mpmath.diff(lambda a: gammainc(a, 0, x, regularized=True), a), dps=40
    frozen = {
        (0.35, 0.2): -0.97430602445689610257,
        (0.9, 1.7): -0.26228712586233781123,
        (1.6, 0.4): -0.2193803450673077999,
        (2.5, 6.0): -0.04392923998836796951,
        (5.0, 3.0): -0.13305676070192275156,
        (12.0, 30.0): -6.428643488001914913e-5,
        (19.5, 150.0): -1.1068575368126581243e-41,
        (0.31, 60.0): -1.3313773822150577558e-27,
    }
    for (a, x), expect in frozen.items():
        p, dp = regularized_lower_gamma_with_da(a, x)
        assert dp == pytest.approx(expect, rel=1e-8, abs=1e-45)
        assert p == pytest.approx(float(gammainc(a, x)), abs=1e-12)


# ---------------------------------------------------------------------------
# Validation and support sizing


def test_parameter_validation():
    with pytest.raises(ParameterDomainError):
        ProbModel.gaussian(0.0)
    with pytest.raises(ParameterDomainError):
        ProbModel.gaussian(math.nan)
    with pytest.raises(ParameterDomainError):
        ProbModel.generalized_gaussian(-1.0, 1.0)
    with pytest.raises(ParameterDomainError):
        ProbModel.generalized_gaussian(2.0, 0.0)
    with pytest.raises(ParameterDomainError):
        ProbModel.mixture((0.6, 0.6), (0.0, 1.0), (1.0, 1.0))
    with pytest.raises(ParameterDomainError):
        ProbModel.mixture((0.5, 0.5), (0.0, 1.0), (1.0, -1.0))
    with pytest.raises(ParameterDomainError):
        ProbModel("gm", pm.GeneralizedGaussianParams(2.0, 1.0))


def test_support_radius_covers_mass():
    rng = np.random.default_rng(3)
    for _ in range(25):
        model = random_model(rng)
        r = pm.support_radius(model, tail_mass=2.0 ** -20)
        ks = np.arange(-r, r + 1)
        covered = float(np.sum(pmf_integer(model, ks)))
        if r < 127:
            assert covered >= 1.0 - 2.0 ** -18
        assert 1 <= r <= 127


def test_support_radius_monotone_in_sigma():
    radii = [pm.support_radius(ProbModel.gaussian(s)) for s in (0.1, 0.5, 1.0, 4.0, 16.0)]
    assert radii == sorted(radii)


def test_ggm_std_roundtrip():
    beta, std = 1.3, 2.4
    alpha = pm.ggm_alpha_for_std(beta, std)
    assert pm.ggm_std(beta, alpha) == pytest.approx(std, rel=1e-12)
    # beta=2: alpha = sqrt(2) sigma
    assert pm.ggm_alpha_for_std(2.0, 1.0) == pytest.approx(math.sqrt(2.0), rel=1e-12)
