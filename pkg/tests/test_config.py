import json

import pytest

from bridgescan.config import PRESET_NAMES, ConfigError, ExperimentConfig, preset


class TestRoundTrip:
    @pytest.mark.parametrize("name", PRESET_NAMES)
    def test_preset_json_round_trip(self, name, tmp_path):
        cfg = preset(name)
        cfg.save(tmp_path / "c.json")
        back = ExperimentConfig.load(tmp_path / "c.json")
        assert back == cfg and back.digest() == cfg.digest()

    def test_digest_ignores_key_order(self):
        cfg = preset("gwn-l5")
        data = cfg.to_dict()
        shuffled = json.dumps(dict(reversed(list(data.items()))))
        assert ExperimentConfig.from_json(shuffled).digest() == cfg.digest()

    def test_digest_tracks_values(self):
        cfg = preset("gwn-l5")
        assert cfg.replace(seed=1).digest() != cfg.digest()

    def test_presets_are_independent_copies(self):
        a = preset("stat-mass")
        a.traffic.n_vehicles = 3
        assert preset("stat-mass").traffic.n_vehicles == 25

    def test_partial_document_takes_defaults(self):
        cfg = ExperimentConfig.from_dict({"runs": 3, "beam": {"length": 12.0}})
        assert cfg.runs == 3 and cfg.beam.length == 12.0 and cfg.beam.n_modes == 4


class TestErrors:
    @pytest.mark.parametrize("doc,field", [
        ({"scenario": "bus"}, "scenario"),
        ({"runs": 0}, "runs"),
        ({"seed": -1}, "seed"),
        ({"beam": {"length": -1.0}}, "beam.length"),
        ({"beam": {"zeta": 1.5}}, "beam.zeta"),
        ({"force": {"location": 11.0}}, "force.location"),
        ({"sensor": {"noise": -0.1}}, "sensor.noise"),
        ({"beam": {"colour": "red"}}, "beam.colour"),
        ({"identify": {"estimator": "fft"}}, "identify.estimator"),
        ({"identify": {"band": [5.0, 1.0]}}, "identify.band"),
        ({"identify": {"check_shape": [0.9]}}, "identify.check_shape"),
        ({"identify": {"check_unexcited": [1.5]}}, "identify.check_unexcited"),
        ({"scenario": "moving-mass", "traffic": {"masses": [1.0, 1.0], "velocities": [1.0], "lags": [0, 0]}},
         "traffic.velocities"),
        ({"scenario": "vbi", "vbi": {"stiffness": 0.0}}, "vbi.stiffness"),
    ])
    def test_field_path(self, doc, field):
        with pytest.raises(ConfigError) as info:
            ExperimentConfig.from_dict(doc)
        assert info.value.field == field

    def test_invalid_json(self):
        with pytest.raises(ConfigError) as info:
            ExperimentConfig.from_json("{runs: 3")
        assert info.value.field == "<document>"

    def test_not_an_object(self):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"beam": 3})

    def test_unknown_preset(self):
        with pytest.raises(ConfigError):
            preset("nope")


class TestResolution:
    def test_default_estimators(self):
        assert ExperimentConfig().resolved_estimator == "nls"
        assert ExperimentConfig(runs=5).resolved_estimator == "sd"
