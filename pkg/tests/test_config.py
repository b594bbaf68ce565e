import pytest

from stcav.config import ConfigError, default_config, from_dict, load_config


def test_defaults():
    cfg = default_config()
    assert cfg.scheme == "self_triggered"
    assert cfg.T_d == 0.05 and cfg.T_s == 0.05 and cfg.T_max == 0.5
    assert cfg.barrier.u_min == pytest.approx(-5.886)
    assert cfg.barrier.u_max == pytest.approx(4.905)
    assert cfg.beta == pytest.approx(5.774166)
    assert cfg.arrival_rate == {"main": 0.1, "ramp": 0.1}
    assert len(cfg.omega) == 4 and len(cfg.r) == 3


def test_overrides_deep_merge():
    cfg = default_config(road={"L": 300.0}, arrivals={"max_cavs": 3})
    assert cfg.barrier.L == 300.0 and cfg.barrier.psi == 1.8
    assert cfg.max_cavs == 3 and cfg.v0_range == (15.0, 20.0)
    again = cfg.with_overrides(seed=9)
    assert again.seed == 9 and again.barrier.L == 300.0


@pytest.mark.parametrize("bad, msg", [
    ({"T_d": 0}, "T_d"),
    ({"T_s": 0.07}, "multiple"),
    ({"T_max": 0.01}, "T_max"),
    ({"alpha": 1.0}, "alpha"),
    ({"rho": 0}, "rho"),
    ({"scheme": "event"}, "scheme"),
    ({"bogus": 1}, "unknown"),
    ({"arrivals": {"v0_range": [20, 15]}}, "v0_range"),
    ({"arrivals": {"v0_range": [15, 40]}}, "v0_range"),
    ({"arrivals": {"rate": {"main": -1}}}, "rate"),
    ({"road": {"c_a": -0.5}}, "road"),
    ({"fuel": {"omega": [1, 2]}}, "fuel"),
    ({"seed": "x"}, "seed"),
    ({"T_d": "fast"}, "T_d"),
])
def test_invalid(bad, msg):
    with pytest.raises(ConfigError, match=msg):
        from_dict(bad)


def test_load_config(tmp_path):
    f = tmp_path / "c.yaml"
    f.write_text("scheme: time_triggered\nT_s: 0.1\n")
    cfg = load_config(f)
    assert cfg.scheme == "time_triggered" and cfg.ticks_per_sample == 2
    (tmp_path / "empty.yaml").write_text("")
    assert load_config(tmp_path / "empty.yaml").scheme == "self_triggered"
    (tmp_path / "bad.yaml").write_text("a: [1,\n")
    with pytest.raises(ConfigError, match="malformed"):
        load_config(tmp_path / "bad.yaml")
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.yaml")
    (tmp_path / "list.yaml").write_text("- 1\n")
    with pytest.raises(ConfigError, match="mapping"):
        load_config(tmp_path / "list.yaml")
