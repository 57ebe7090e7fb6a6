import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from leorelay.distributions import mean_downlink_distance, sr_mean
from leorelay.geometry import ConstellationGeometry
from leorelay.link_budget import (
    BOLTZMANN,
    DEFAULT_DOWNLINK,
    DEFAULT_UPLINK,
    LinkBudgetParams,
    db_to_linear,
    linear_to_db,
    noise_power,
    propagation_loss,
    snr,
    z_of_gamma,
)

UNIT = LinkBudgetParams(eirp=1.0, wavelength=4 * math.pi, bandwidth=1.0, noise_power=1.0)


def test_unit_budget():
    assert propagation_loss(1e-3, UNIT) == pytest.approx(1.0, rel=1e-14)
    assert snr(1e-3, 1.0, UNIT) == pytest.approx(1.0, rel=1e-14)
    p = LinkBudgetParams(eirp=7.5, wavelength=4 * math.pi, bandwidth=1.0, noise_power=1.0)
    assert snr(1e-3, 1.0, p) == pytest.approx(7.5, rel=1e-14)


def test_inverse_square():
    d = np.random.default_rng(3).uniform(100, 5000, 20)
    np.testing.assert_allclose(propagation_loss(2 * d, DEFAULT_DOWNLINK), propagation_loss(d, DEFAULT_DOWNLINK) / 4,
                               rtol=1e-14)


def test_downlink_loss_matches_fspl_in_db():
    d_m = 500e3
    fspl_db = 20 * math.log10(4 * math.pi * d_m / DEFAULT_DOWNLINK.wavelength)
    got_db = 10 * math.log10(propagation_loss(500.0, DEFAULT_DOWNLINK))
    assert got_db == pytest.approx(-fspl_db - 3.0, abs=1e-9)


def test_distance_domain():
    with pytest.raises(ValueError):
        propagation_loss(0.0, UNIT)
    with pytest.raises(ValueError):
        snr(-1.0, 1.0, UNIT)
    with pytest.raises(ValueError):
        snr(1.0, -1.0, UNIT)


def test_noise_power():
    assert noise_power(1, 1, 1) == 1
    assert noise_power(BOLTZMANN, 0.5e9, 521.5) == pytest.approx(3.6e-12, rel=1e-3)
    assert noise_power(2.0, 3.0, 5.0) == pytest.approx(2 * noise_power(1.0, 3.0, 5.0))
    with pytest.raises(ValueError):
        noise_power(1, 0, 1)


def test_noise_source_exclusive():
    with pytest.raises(ValueError):
        LinkBudgetParams(eirp=1, wavelength=1, bandwidth=1)
    with pytest.raises(ValueError):
        LinkBudgetParams(eirp=1, wavelength=1, bandwidth=1, noise_power=1, noise_temperature=300)
    p = LinkBudgetParams(eirp=1, wavelength=1, bandwidth=2e6, noise_temperature=290)
    assert p.noise_power == pytest.approx(BOLTZMANN * 2e6 * 290)


def test_loss_validation():
    with pytest.raises(ValueError):
        LinkBudgetParams(eirp=1, wavelength=1, bandwidth=1, noise_power=1, additional_loss=0.5)
    with pytest.raises(ValueError):
        LinkBudgetParams(eirp=0, wavelength=1, bandwidth=1, noise_power=1)


def test_snr_composition_paths():
    d = np.linspace(500, 3000, 50)
    w = np.linspace(0.1, 3, 50)
    for p in (DEFAULT_UPLINK, DEFAULT_DOWNLINK):
        direct = snr(d, w, p)
        composed = p.eirp * propagation_loss(d, p) * w / p.noise_power
        np.testing.assert_allclose(direct, composed, rtol=1e-12)
    assert snr(800.0, 0.0, DEFAULT_UPLINK) == 0.0


def test_uplink_snr_db_ledger():
    d_m = mean_downlink_distance(ConstellationGeometry()) * 1e3
    budget_db = (60.0 + 20 * math.log10(0.015) - 20 * math.log10(4 * math.pi * d_m) - 3.0
                 + 10 * math.log10(sr_mean()) - 10 * math.log10(3.6e-12))
    got_db = 10 * math.log10(snr(d_m / 1e3, sr_mean(), DEFAULT_UPLINK))
    assert got_db == pytest.approx(budget_db, abs=0.01)


def test_z_of_gamma_round_trip_1000():
    rng = np.random.default_rng(4)
    d = rng.uniform(500, 13000, 1000)
    g = 10 ** rng.uniform(-4, 3, 1000)
    for p in (DEFAULT_UPLINK, DEFAULT_DOWNLINK):
        back = snr(d, z_of_gamma(g, p) * (d * 1e3) ** 2, p)
        np.testing.assert_allclose(back, g, rtol=1e-10)
    assert z_of_gamma(0.0, DEFAULT_UPLINK) == 0.0
    assert z_of_gamma(6.0, DEFAULT_UPLINK) == pytest.approx(3 * z_of_gamma(2.0, DEFAULT_UPLINK))


@given(st.floats(100, 10_000), st.floats(1.0001, 10.0), st.floats(0.01, 5.0))
def test_snr_monotone(d, factor, w):
    p = DEFAULT_UPLINK
    assert snr(d * factor, w, p) < snr(d, w, p)
    assert snr(d, w * factor, p) > snr(d, w, p)
    louder = LinkBudgetParams(eirp=p.eirp * factor, wavelength=p.wavelength, bandwidth=p.bandwidth,
                              noise_power=p.noise_power, additional_loss=p.additional_loss)
    assert snr(d, w, louder) > snr(d, w, p)


@given(st.floats(-80.0, 80.0))
def test_db_round_trip(x):
    assert float(linear_to_db(db_to_linear(x))) == pytest.approx(x, rel=1e-12, abs=1e-12)


def test_scaled_keeps_snr():
    p = DEFAULT_DOWNLINK.scaled(37.0)
    assert snr(900.0, 1.3, p) == pytest.approx(snr(900.0, 1.3, DEFAULT_DOWNLINK), rel=1e-14)
