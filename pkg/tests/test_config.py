"""Scenario files and presets."""

import copy
import json

import pytest

from aigc_incentive.config import load_config, load_scenario, parse_config, preset_names, preset_path
from aigc_incentive.errors import ConfigError
from aigc_incentive.incomplete import LambdaMode


@pytest.fixture
def doc():
    return json.loads(preset_path("mnist_vd").read_text())


class TestPresets:
    def test_all_presets_load(self):
        names = preset_names()
        assert {"mnist_vd.json", "quad_small.json", "vc_ldd.json"} <= set(names)
        for name in names:
            assert load_config(name).scenario.K >= 1

    def test_mnist_vd(self):
        loaded = load_config("mnist_vd")
        sc = loaded.scenario
        assert sc.K == 10 and sc.datasize_range == (30, 30)
        assert sc.info == "incomplete" and sc.mode is LambdaMode.PAPER_LITERAL
        assert sc.seeds == tuple(range(10))
        assert loaded.experiment.sweep_var == "K"
        assert abs(sc.quality.zeta3 - 0.62337) < 1e-5

    def test_quad_small_targets(self):
        fl = load_config("quad_small.json").experiment.flsim
        assert fl.targets == [0.4, 0.8, 1.2, 1.6, 2.0] and fl.T == 50

    def test_file_path(self, tmp_path, doc):
        path = tmp_path / "s.json"
        path.write_text(json.dumps(doc))
        assert load_scenario(path) == load_config("mnist_vd").scenario

    def test_missing_file(self):
        with pytest.raises(ConfigError, match="does not exist"):
            load_config("/nonexistent/scenario.json")

    def test_unknown_preset(self):
        assert preset_path("no_such_preset") is None


class TestValidation:
    def test_learning_rate_precondition(self, doc):
        doc["learning"]["eta"] = 1.0 / 37.36
        with pytest.raises(ConfigError) as info:
            parse_config(doc)
        assert any("eta" in p for p in info.value.problems)

    def test_theta_at_least_one(self, doc):
        doc["quality"]["g_diff"] = 5.0
        with pytest.raises(ConfigError) as info:
            parse_config(doc)
        assert any("theta" in p for p in info.value.problems)

    def test_all_problems_reported(self, doc):
        doc["learning"]["eta"] = 0.5
        doc["quality"]["g_diff"] = 5.0
        doc["population"]["colour"] = "red"
        doc["server"].pop("gamma2")
        with pytest.raises(ConfigError) as info:
            parse_config(doc)
        problems = info.value.problems
        # structural problems are reported together before any value is checked
        assert "population.colour: unknown key" in problems
        assert "server.gamma2: required key missing" in problems
        doc["population"].pop("colour")
        doc["server"]["gamma2"] = 1
        with pytest.raises(ConfigError) as info:
            parse_config(doc)
        joined = " | ".join(info.value.problems)
        assert "learning" in joined and "quality" in joined

    def test_unknown_sections(self, doc):
        doc["extras"] = {}
        del doc["server"]
        with pytest.raises(ConfigError) as info:
            parse_config(doc)
        assert "unknown top-level key 'extras'" in info.value.problems
        assert "missing section 'server'" in info.value.problems

    def test_s_max_beyond_zeta3_only_matters_for_incomplete(self, doc):
        doc["population"]["s_max"] = 0.8
        with pytest.raises(ConfigError):
            parse_config(doc)
        doc["experiment"]["info"] = "complete"
        assert parse_config(doc).scenario.dist.s_max == 0.8

    def test_bad_density_and_mode(self, doc):
        doc["population"]["s_density"] = "triangular"
        doc["experiment"]["mode"] = "whatever"
        with pytest.raises(ConfigError) as info:
            parse_config(doc)
        joined = " | ".join(info.value.problems)
        assert "s_density" in joined and "experiment.mode" in joined

    def test_non_object(self):
        with pytest.raises(ConfigError, match="JSON object"):
            parse_config([1, 2])

    def test_json_parse_error_has_line(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{\n  "population": {\n    "K": 10,\n  }\n}\n')
        with pytest.raises(ConfigError) as info:
            load_config(path)
        assert "line 4" in str(info.value)
        assert info.value.problems and info.value.problems[0].startswith("line 4")

    def test_defaults(self, doc):
        minimal = copy.deepcopy(doc)
        del minimal["experiment"]
        del minimal["learning"]["h"]
        loaded = parse_config(minimal)
        assert loaded.scenario.seeds == (0,) and loaded.scenario.learning.h == 5
        assert loaded.scenario.mechanism == "IMFL" and loaded.scenario.info == "complete"
        assert loaded.scenario.server.omega == 100.0
