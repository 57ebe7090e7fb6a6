import math

import pytest

from leorelay.config import OPERATOR_PRESETS, ConfigError, ExperimentConfig, load_config, parse_config
from leorelay.link_budget import DEFAULT_DOWNLINK, DEFAULT_UPLINK


def test_defaults_match_builtins():
    cfg = parse_config("")
    assert cfg == ExperimentConfig()
    assert load_config(None) == cfg
    assert cfg.scenario.uplink == DEFAULT_UPLINK and cfg.scenario.downlink == DEFAULT_DOWNLINK
    assert cfg.scenario.geom.rs_km == 6871.0
    assert cfg.scenario.theta_sep == pytest.approx(500 / 6371)


def test_db_keys_convert():
    cfg = parse_config("[uplink]\neirp_db = 50\n[downlink]\nadditional_loss_db = 6\n")
    assert cfg.scenario.uplink.eirp == pytest.approx(1e5)
    assert cfg.scenario.downlink.additional_loss == pytest.approx(10 ** 0.6)


def test_geometry_keys():
    cfg = parse_config("[geometry]\naltitude_km = 1000\nn_sats = 200\nseparation_km = 1274.2\n")
    g = cfg.scenario.geom
    assert (g.rs_km, g.n_sats) == (7371.0, 200)
    assert cfg.scenario.theta_sep == pytest.approx(0.2)
    with pytest.raises(ConfigError, match="not both"):
        parse_config("[geometry]\naltitude_km = 1000\nrs_km = 7000\n")


def test_run_section():
    cfg = parse_config("[run]\nseed = 42\ntrials = 17\njobs = 2\ngamma_min = 0.001\n")
    assert cfg.scenario.seed == 42 and cfg.scenario.n_trials == 17
    assert cfg.n_jobs == 2 and cfg.delay.gamma_min == 0.001


@pytest.mark.parametrize("text, line", [
    ("[geometry]\nn_sats = 10\nsats = 3\n", 3),
    ("[run]\nseed = 1\n\n[extras]\nx = 1\n", 4),
    ("[uplink]\neirp = 1\neirp_db = 30\n", 3),
])
def test_unknown_or_duplicate_reports_line(text, line):
    with pytest.raises(ConfigError, match=f"cfg.ini:{line}"):
        parse_config(text, "cfg.ini")


def test_bad_values():
    with pytest.raises(ConfigError, match="not a number"):
        parse_config("[run]\ntrials = many\n")
    with pytest.raises(ConfigError, match="finite"):
        parse_config("[fading]\nomega = inf\n")
    with pytest.raises(ConfigError, match="fading"):
        parse_config("[fading]\nomega = -0.3\n")
    with pytest.raises(ConfigError, match="jobs"):
        parse_config("[run]\njobs = 0\n")
    with pytest.raises(ConfigError):
        parse_config("[run\nseed = 1\n")


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="nope.ini"):
        load_config(tmp_path / "nope.ini")


def test_ini_round_trip():
    text = ("[geometry]\naltitude_km = 1150\nn_sats = 321\nseparation_km = 900\n"
            "[uplink]\neirp_db = 55\nnoise_temperature_k = 400\n"
            "[fading]\nm = 2.5\n[packet]\npacket_bits = 1e8\n[run]\nseed = 9\ntrials = 50\n")
    cfg = parse_config(text)
    again = parse_config(cfg.to_ini())
    assert again == cfg
    assert again.snapshot() == cfg.snapshot()


def test_from_file(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text("[fading]  # comment\nb0 = 0.2 ; inline\n")
    assert load_config(p).scenario.srp.b0 == 0.2


def test_presets():
    assert OPERATOR_PRESETS == {"oneweb": 1200.0, "telesat": 1150.0, "spacex": 1110.0}
    assert all(math.isfinite(h) for h in OPERATOR_PRESETS.values())
