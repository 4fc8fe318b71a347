import json

import pytest

from peermon.config import load_peer_setup, peer_setup_from_dict
from peermon.core import ConfigError, IndicatorKind


MINIMAL = {"indicators": [{"name": "cpu"}]}


class TestDefaults:
    def test_minimal_document(self):
        setup = peer_setup_from_dict(MINIMAL)
        assert setup.bounds.r_min == 30.0 and setup.bounds.r_max == 60.0
        assert setup.sensitivity == 0.10
        assert setup.window == 20
        assert setup.gossip_period == 30.0 and setup.gossip_fanout == 2
        ind = setup.indicators[0]
        assert ind.kind is IndicatorKind.NUMERICAL
        cfg = ind.state_config()
        assert (cfg.k, cfg.p) == (5, 0.8)
        assert cfg.delta_max == pytest.approx(0.05)

    def test_state_defaults_follow_declared_range(self):
        doc = {"indicators": [{"name": "temp", "range": [0, 100]}]}
        cfg = peer_setup_from_dict(doc).indicators[0].state_config()
        assert cfg.delta_max == pytest.approx(5.0)
        assert (cfg.too_low, cfg.low, cfg.high, cfg.too_high) == pytest.approx(
            (10.0, 30.0, 70.0, 90.0)
        )

    def test_null_sensitivity_disables_suppression(self):
        doc = dict(MINIMAL, sensitivity=None)
        assert peer_setup_from_dict(doc).sensitivity is None

    def test_partial_state_overrides(self):
        doc = {"indicators": [{"name": "cpu", "state": {"k": 3, "delta_max": 0.2}}]}
        cfg = peer_setup_from_dict(doc).indicators[0].state_config()
        assert cfg.k == 3
        assert cfg.delta_max == 0.2
        assert cfg.low == pytest.approx(0.3)  # untouched default

    def test_initial_interval_defaults_to_r_min(self):
        kb = peer_setup_from_dict(MINIMAL).build_kb()
        assert kb.config.intervals["cpu"] == 30.0

    def test_explicit_initial_interval(self):
        doc = dict(MINIMAL, initial_interval=45)
        kb = peer_setup_from_dict(doc).build_kb()
        assert kb.config.intervals["cpu"] == 45.0


class TestErrors:
    def test_missing_indicators(self):
        with pytest.raises(ConfigError):
            peer_setup_from_dict({})

    def test_unknown_kind(self):
        with pytest.raises(ConfigError, match="kind"):
            peer_setup_from_dict({"indicators": [{"name": "cpu", "kind": "fuzzy"}]})

    def test_bad_range(self):
        with pytest.raises(ConfigError, match="range"):
            peer_setup_from_dict({"indicators": [{"name": "cpu", "range": [1]}]})

    def test_bad_threshold_order(self):
        doc = {"indicators": [{"name": "cpu", "state": {"too_low": 0.9, "low": 0.3}}]}
        with pytest.raises(ConfigError):
            peer_setup_from_dict(doc)


class TestFiles:
    def test_load_example_config(self):
        setup = load_peer_setup("config/follower.example.json")
        assert [i.name for i in setup.indicators] == ["cpu", "mem", "power"]
        assert setup.sensitivity == 0.1

    def test_missing_file(self):
        with pytest.raises(ConfigError):
            load_peer_setup("/nonexistent/peer.json")

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{nope")
        with pytest.raises(ConfigError, match="not valid JSON"):
            load_peer_setup(str(path))

    def test_round_trip_with_build(self, tmp_path):
        path = tmp_path / "peer.json"
        path.write_text(json.dumps({
            "indicators": [{"name": "cpu"}, {"name": "power"}],
            "bounds": {"r_min": 5, "r_max": 40},
            "sensitivity": None,
            "window": 10,
            "gossip": {"period": 15, "fanout": 1},
        }))
        kb = load_peer_setup(str(path)).build_kb()
        assert kb.config.sensitivity is None
        assert kb.config.window == 10
        assert kb.config.gossip_period == 15.0
        assert kb.config.enabled == {"cpu", "power"}
