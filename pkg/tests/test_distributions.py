import math
from functools import lru_cache

import mpmath as mp
import numpy as np
import pytest
from hypothesis import example, given, strategies as st
from scipy import integrate as sp_integrate
from scipy import stats

from leorelay.distributions import (
    DEFAULT_FADING,
    SeriesTruncationError,
    ShadowedRicianParams,
    downlink_distance_cdf,
    downlink_distance_pdf,
    expected_downlink_distance,
    mean_downlink_distance,
    mean_theta1,
    sr_cdf,
    sr_mean,
    sr_mgf,
    sr_pdf,
    sr_sample,
    sr_sf,
    theta1_cdf,
    theta1_pdf,
    theta2_cdf,
    theta2_pdf,
    uplink_distance_cdf,
    uplink_distance_pdf,
)
from leorelay.geometry import ConstellationGeometry, central_angle_from_chord, chord_distance

THETA = 500.0 / 6371.0


def _quad(f, a, b, points=None):
    return sp_integrate.quad(f, a, b, points=points, epsabs=1e-13, epsrel=1e-12, limit=500)[0]


# --- nearest-satellite angle -----------------------------------------------------

@pytest.mark.parametrize("n", [1, 10, 500])
def test_theta1_pdf_normalised(n):
    g = ConstellationGeometry(n_sats=n)
    pts = [0.5 / math.sqrt(n), 2.0 / math.sqrt(n)] if n > 1 else None
    assert _quad(lambda t: theta1_pdf(t, g), 0, math.pi, pts) == pytest.approx(1.0, abs=1e-8)


def test_theta1_examples():
    g1 = ConstellationGeometry(n_sats=1)
    assert theta1_pdf(math.pi / 2, g1) == pytest.approx(0.5)
    assert theta1_pdf(-0.1, g1) == 0.0 and theta1_pdf(4.0, g1) == 0.0
    t = np.linspace(0, math.pi, 50)
    np.testing.assert_allclose(theta1_cdf(t, g1), (1 - np.cos(t)) / 2, atol=1e-15)


def test_theta1_mode_matches_dense_grid(geom):
    grid = np.linspace(0, math.pi, 1_000_001)
    n = geom.n_sats
    # Independent evaluation of the density expression.
    raw = n / 2 * np.sin(grid) * ((1 + np.cos(grid)) / 2) ** (n - 1)
    step = grid[1] - grid[0]
    assert abs(grid[np.argmax(theta1_pdf(grid, geom))] - grid[np.argmax(raw)]) <= step
    assert grid[np.argmax(raw)] == pytest.approx(math.acos(1 - 1 / n), abs=step)


def test_theta1_cdf_boundaries_and_integral(geom):
    assert theta1_cdf(0.0, geom) == 0.0
    assert theta1_cdf(math.pi, geom) == 1.0
    for b in (0.02, 0.08, 0.2):
        assert theta1_cdf(b, geom) == pytest.approx(_quad(lambda t: theta1_pdf(t, geom), 0, b), abs=1e-10)


def test_theta1_stochastic_order():
    t = np.linspace(0, math.pi, 200)
    cdfs = [theta1_cdf(t, ConstellationGeometry(n_sats=n)) for n in (1, 10, 100, 1000)]
    for lo, hi in zip(cdfs, cdfs[1:]):
        assert np.all(hi >= lo - 1e-15)


def test_mean_theta1_small_cases():
    assert mean_theta1(ConstellationGeometry(n_sats=1)) == pytest.approx(math.pi / 2, rel=1e-14)
    assert mean_theta1(ConstellationGeometry(n_sats=2)) == pytest.approx(3 * math.pi / 8, rel=1e-14)


@pytest.mark.parametrize("n", [3, 50, 500, 5000])
def test_mean_theta1_wallis_product(n):
    mp.mp.dps = 30
    prod = mp.fprod((2 * n - 2 * k - 1) / mp.mpf(2 * n - 2 * k) for k in range(n))
    assert mean_theta1(ConstellationGeometry(n_sats=n)) == pytest.approx(float(mp.pi * prod), rel=1e-13)


def test_mean_theta1_survival_integral(geom):
    sf = lambda t: 1 - theta1_cdf(t, geom)
    assert mean_theta1(geom) == pytest.approx(_quad(sf, 0, math.pi, [0.05, 0.2]), abs=1e-8)


# --- downlink distance -------------------------------------------------------------

@pytest.mark.parametrize("n", [1, 500])
def test_downlink_pdf_normalised(n):
    g = ConstellationGeometry(n_sats=n)
    pts = [600.0, 800.0, 1200.0] if n > 1 else None
    assert _quad(lambda d: downlink_distance_pdf(d, g), g.d_min, g.d_max, pts) == pytest.approx(1.0, abs=1e-8)


def test_downlink_support(geom):
    assert downlink_distance_pdf(499.0, geom) == 0.0
    assert downlink_distance_pdf(13243.0, geom) == 0.0
    assert downlink_distance_cdf(500.0, geom) == 0.0
    assert downlink_distance_cdf(13242.0, geom) == 1.0
    assert downlink_distance_cdf(100.0, geom) == 0.0
    assert downlink_distance_cdf(2e4, geom) == 1.0


def test_downlink_single_satellite_pushforward():
    g = ConstellationGeometry(n_sats=1)
    d = np.linspace(g.d_min + 1, g.d_max - 1, 200)
    theta = central_angle_from_chord(d, g)
    ref = theta1_pdf(theta, g) * d / (g.rs_km * g.re_km * np.sin(theta))
    np.testing.assert_allclose(downlink_distance_pdf(d, g), ref, rtol=1e-10)
    mid = 0.5 * (g.d_min + g.d_max)
    assert downlink_distance_cdf(mid, g) == pytest.approx((mid ** 2 - 500 ** 2) / (4 * 6371 * 6871))


def test_downlink_cdf_derivative(geom):
    d = np.linspace(510, 1500, 100)
    h = 1e-3
    fd = (downlink_distance_cdf(d + h, geom) - downlink_distance_cdf(d - h, geom)) / (2 * h)
    np.testing.assert_allclose(fd, downlink_distance_pdf(d, geom), rtol=1e-6)


def test_mean_downlink_distance():
    g1 = ConstellationGeometry(n_sats=1)
    assert mean_downlink_distance(g1) == pytest.approx(math.hypot(6371, 6871), rel=1e-12)
    means = [mean_downlink_distance(ConstellationGeometry(n_sats=n)) for n in (1, 10, 100, 1000)]
    assert all(a > b for a, b in zip(means, means[1:]))


def test_plugin_mean_distance_gap_is_measured(geom):
    numeric = _quad(lambda d: d * downlink_distance_pdf(d, geom), geom.d_min, geom.d_max, [600, 800, 1200])
    assert expected_downlink_distance(geom) == pytest.approx(numeric, rel=1e-9)
    gap = mean_downlink_distance(geom) - numeric
    # Chord is convex in angle near 0, so the plug-in sits below the true mean.
    assert -50.0 < gap < 0.0


# --- transmitter-side angle and uplink distance -----------------------------------

@lru_cache(maxsize=None)
def _legendre_coeffs(n_sats, l_max=260):
    """Legendre coefficients of the relay ring density N/(4 pi) ((1 + x)/2)^(N - 1)."""
    mp.mp.dps = 40
    n = n_sats - 1
    out = []
    for l in range(min(l_max, n) + 1):
        integral = 2 * mp.factorial(n) ** 2 / (mp.factorial(n - l) * mp.factorial(n + l + 1))
        out.append((2 * l + 1) / mp.mpf(2) * n_sats / (4 * mp.pi) * integral)
    return out


def _theta2_cdf_legendre(beta, Theta, n_sats):
    """Addition theorem: the azimuthal average of P_l(cos psi) is P_l(cos theta) P_l(cos Theta)."""
    mp.mp.dps = 40
    x = mp.cos(beta)
    total = mp.mpf(0)
    for l, a in enumerate(_legendre_coeffs(n_sats)):
        if l == 0:
            cap = 1 - x
        else:
            cap = (mp.legendre(l - 1, x) - mp.legendre(l + 1, x)) / (2 * l + 1)
        total += a * mp.legendre(l, mp.cos(Theta)) * cap
    return float(2 * mp.pi * total)


def _theta2_pdf_legendre(beta, Theta, n_sats):
    mp.mp.dps = 40
    x = mp.cos(beta)
    s = sum(a * mp.legendre(l, mp.cos(Theta)) * mp.legendre(l, x)
            for l, a in enumerate(_legendre_coeffs(n_sats)))
    return float(2 * mp.pi * s * mp.sin(beta))


def test_legendre_truncation_is_converged():
    a = _legendre_coeffs(500)
    assert float(a[-1] / a[0]) < 1e-40


@pytest.mark.parametrize("beta", [0.02, 0.06, 0.08, 0.11, 0.2, 0.4])
def test_theta2_cdf_matches_legendre_series(geom, beta):
    assert theta2_cdf(beta, THETA, geom) == pytest.approx(_theta2_cdf_legendre(beta, THETA, 500), abs=1e-9)


@pytest.mark.parametrize("beta", [0.03, 0.07, 0.1, 0.15])
def test_theta2_pdf_matches_legendre_series(geom, beta):
    assert theta2_pdf(beta, THETA, geom) == pytest.approx(_theta2_pdf_legendre(beta, THETA, 500), rel=1e-8)


def test_theta2_wide_separation_legendre():
    g = ConstellationGeometry(n_sats=60)
    for beta in (0.3, 0.9, 1.4):
        assert theta2_cdf(beta, 1.0, g) == pytest.approx(_theta2_cdf_legendre(beta, 1.0, 60), abs=1e-9)


def test_theta2_boundaries(geom):
    assert theta2_cdf(0.0, THETA, geom) == 0.0
    assert theta2_cdf(math.pi, THETA, geom) == pytest.approx(1.0, abs=1e-4)
    b = np.linspace(0, math.pi, 1000)
    c = theta2_cdf(b, THETA, geom)
    assert np.all(np.diff(c) >= 0) and c.min() >= 0 and c.max() <= 1


def test_theta2_colocated(geom):
    for b in (0.1, 0.5, 1.0):
        assert theta2_cdf(b, 0.0, geom) == pytest.approx(theta1_cdf(b, geom), abs=1e-6)
        assert theta2_pdf(b, 0.0, geom) == pytest.approx(theta1_pdf(b, geom), abs=1e-8)


def test_theta2_pdf_normalised_and_consistent(geom):
    total = _quad(lambda b: theta2_pdf(b, THETA, geom), 0, math.pi, [0.03, 0.08, 0.13, 0.3])
    assert total == pytest.approx(1.0, abs=1e-4)
    b = np.linspace(0.02, 0.3, 40)
    h = 1e-5
    fd = (theta2_cdf(b + h, THETA, geom) - theta2_cdf(b - h, THETA, geom)) / (2 * h)
    np.testing.assert_allclose(fd, theta2_pdf(b, THETA, geom), rtol=1e-5, atol=1e-5)


def test_theta2_literal_form_is_not_a_distribution(geom):
    # The doubled-angle variant fails the co-location check that the default passes.
    assert abs(theta2_cdf(0.1, 0.0, geom, literal=True) - theta1_cdf(0.1, geom)) > 1e-3


def test_theta2_cdf_interpolated_path(geom):
    # More points than the exact-evaluation budget go through knot interpolation.
    b = np.linspace(0.0, 0.4, 5000)
    approx = theta2_cdf(b, THETA, geom, max_exact=1000)
    exact = theta2_cdf(b[::50], THETA, geom)
    np.testing.assert_allclose(approx[::50], exact, atol=5e-6)


def test_uplink_distance_boundaries(geom):
    assert uplink_distance_cdf(geom.d_min, THETA, geom) == 0.0
    assert uplink_distance_cdf(geom.d_max, THETA, geom) == 1.0
    assert uplink_distance_pdf(geom.d_min - 1, THETA, geom) == 0.0


def test_uplink_distance_colocated(geom):
    d = np.linspace(505, 2000, 30)
    np.testing.assert_allclose(uplink_distance_cdf(d, 0.0, geom), downlink_distance_cdf(d, geom), atol=1e-6)
    np.testing.assert_allclose(uplink_distance_pdf(d, 0.0, geom), downlink_distance_pdf(d, geom),
                               rtol=1e-6, atol=1e-12)


def test_uplink_distance_pdf_normalised_and_consistent(geom):
    pts = list(chord_distance(np.array([0.02, 0.05, 0.08, 0.11, 0.15, 0.3]), geom))
    total = _quad(lambda d: uplink_distance_pdf(d, THETA, geom), geom.d_min, geom.d_max, pts)
    assert total == pytest.approx(1.0, abs=1e-4)
    d = np.linspace(600, 1500, 30)
    h = 1e-3
    fd = (uplink_distance_cdf(d + h, THETA, geom) - uplink_distance_cdf(d - h, THETA, geom)) / (2 * h)
    pdf = uplink_distance_pdf(d, THETA, geom)
    np.testing.assert_allclose(fd, pdf, rtol=1e-5, atol=1e-5 * pdf.max())


# --- shadowed-Rician fading ------------------------------------------------------------

def _sr_pdf_mpmath(t, p: ShadowedRicianParams):
    mp.mp.dps = 40
    m, b0, om = mp.mpf(p.m), mp.mpf(p.b0), mp.mpf(p.omega)
    lead = (2 * b0 * m / (2 * b0 * m + om)) ** m / (2 * b0)
    x = om * t / (2 * b0 * (2 * b0 * m + om))
    return float(lead * mp.exp(-t / (2 * b0)) * mp.hyp1f1(m, 1, x))


@pytest.mark.parametrize("t", [0.0, 0.01, 0.5, 1.0, 1.606, 3.0, 7.0, 20.0])
def test_sr_pdf_matches_hypergeometric(t):
    assert sr_pdf(t) == pytest.approx(_sr_pdf_mpmath(t, DEFAULT_FADING), rel=1e-10)


def test_sr_pdf_other_params_match_hypergeometric():
    p = ShadowedRicianParams(m=2.0, b0=0.5, omega=3.0)
    for t in (0.1, 2.0, 9.0):
        assert sr_pdf(t, p) == pytest.approx(_sr_pdf_mpmath(t, p), rel=1e-10)


def test_sr_pdf_at_zero():
    p = DEFAULT_FADING
    ref = (2 * p.b0 * p.m / (2 * p.b0 * p.m + p.omega)) ** p.m / (2 * p.b0)
    assert sr_pdf(0.0) == pytest.approx(ref, rel=1e-14)


def test_sr_pdf_normalisation_and_mean():
    assert _quad(sr_pdf, 0, np.inf) == pytest.approx(1.0, abs=1e-6)
    assert _quad(lambda t: t * sr_pdf(t), 0, np.inf) == pytest.approx(1.606, abs=1e-4)


def test_sr_pdf_finite_over_range():
    t = np.linspace(0, 20, 2001)
    v = sr_pdf(t)
    assert np.all(np.isfinite(v)) and np.all(v >= 0)
    assert sr_pdf(1e6) == 0.0


def test_sr_series_truncation_reported():
    p = ShadowedRicianParams(series_max_terms=3)
    with pytest.raises(SeriesTruncationError):
        sr_pdf(2.0, p)


def test_sr_params_validation():
    for bad in (dict(m=0), dict(b0=-1), dict(omega=-0.1), dict(series_eps=0), dict(series_max_terms=0)):
        with pytest.raises(ValueError):
            ShadowedRicianParams(**bad)


@pytest.mark.parametrize("t", [0.2, 1.0, 1.6, 2.5, 5.0])
def test_sr_cdf_matches_pdf_integral(t):
    assert sr_cdf(t) == pytest.approx(_quad(sr_pdf, 0, t), abs=1e-12)
    assert sr_cdf(t) + sr_sf(t) == pytest.approx(1.0, abs=1e-14)


def test_sr_mgf():
    assert sr_mgf(0.0) == pytest.approx(1.0, rel=1e-15)
    h = 1e-5
    assert (sr_mgf(-h) - sr_mgf(h)) / (2 * h) == pytest.approx(sr_mean(), abs=1e-6)
    sig = np.geomspace(1e-3, 1e6, 200)
    v = sr_mgf(sig)
    assert np.all(np.diff(v) < 0) and v[-1] < 1e-4
    for s in (0.3, 2.0):
        ref = _quad(lambda t: math.exp(-s * t) * sr_pdf(t), 0, np.inf)
        assert sr_mgf(s) == pytest.approx(ref, rel=1e-9)


def test_sr_mean_examples():
    assert sr_mean() == pytest.approx(1.606, abs=1e-15)
    assert sr_mean(ShadowedRicianParams(omega=0.0)) == pytest.approx(0.316)
    assert sr_mean(ShadowedRicianParams(b0=1e-12)) == pytest.approx(1.29)


def test_sr_sampler_mean_and_ks():
    rng = np.random.default_rng(11)
    big = sr_sample(rng, DEFAULT_FADING, 1_000_000)
    se = big.std() / math.sqrt(big.size)
    assert abs(big.mean() - 1.606) < 3 * se
    ks = stats.kstest(big[:100_000], sr_cdf).statistic
    assert ks < 0.005


def test_sr_sampler_pure_scatter_is_exponential():
    p = ShadowedRicianParams(omega=0.0)
    x = sr_sample(np.random.default_rng(5), p, 100_000)
    assert stats.kstest(x, stats.expon(scale=2 * p.b0).cdf).pvalue > 0.01
    np.testing.assert_allclose(sr_cdf(np.array([0.1, 0.5]), p), 1 - np.exp(-np.array([0.1, 0.5]) / 0.316))


@given(st.floats(0.5, 30.0), st.floats(0.01, 2.0), st.floats(0.0, 5.0))
@example(1.0, 0.01, 4.0)  # partial sums pass 1e308 before the terms turn over
def test_sr_cdf_properties(m, b0, omega):
    p = ShadowedRicianParams(m=m, b0=b0, omega=omega)
    t = np.linspace(0, 60 * (omega + 2 * b0), 300)
    c = sr_cdf(t, p)
    assert c[0] == 0.0
    assert np.all(np.diff(c) >= -1e-14)
    assert c[-1] == pytest.approx(1.0, abs=1e-6)
    mid = t[20]
    ref = _quad(lambda x: sr_pdf(x, p), 0, mid)
    assert sr_cdf(mid, p) == pytest.approx(ref, abs=1e-9)
