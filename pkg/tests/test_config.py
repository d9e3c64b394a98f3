import json

import pytest

from src.config import (METHODS, PRESETS, Config, dump_config, load_pipeline_config, merge_dicts,
                        read_config_file)
from src.errors import ConfigError, LoadError
from src.params import ClusterParams, CrfParams, PipelineConfig


def write_config(path, data):
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


class TestDefaults:
    def test_documented_values(self):
        cfg = load_pipeline_config()
        assert cfg.pipeline == "crf"
        assert cfg.ratios.sigma == 1.0
        assert cfg.ratios.threshold == 0.02
        assert cfg.ratios.fusion == "geometric"
        assert cfg.retinex.t_brightness == 0.075 and cfg.retinex.t_chroma == 0.075
        assert cfg.clustering.k == "auto" and cfg.clustering.k_max == 50
        assert cfg.crf.iterations == 10
        assert not cfg.guided_filter.enabled

    def test_theta_pos_resolved_per_image(self):
        assert CrfParams().resolved_theta_pos(40, 120) == pytest.approx(12.0)
        assert CrfParams(theta_pos=3.0).resolved_theta_pos(40, 120) == 3.0


class TestPresetsAndMethods:
    def test_presets(self):
        assert load_pipeline_config(preset="mit").linearization == "identity"
        assert load_pipeline_config(preset="iiw").clustering.ratio_weight == 10.0

    @pytest.mark.parametrize("method", sorted(METHODS))
    def test_every_method_resolves(self, method):
        cfg = load_pipeline_config(method=method)
        assert cfg.pipeline in ("crf", "retinex")

    def test_final_enables_all_injections(self):
        cfg = load_pipeline_config(method="final")
        assert cfg.clustering.adaptive and cfg.clustering.use_ratios and cfg.crf.use_ratio_feature

    def test_default_method_is_plain(self):
        cfg = load_pipeline_config(method="default")
        assert cfg.clustering.k == 20
        assert not cfg.clustering.use_ratios and not cfg.crf.use_ratio_feature

    def test_unknown_names(self):
        with pytest.raises(ConfigError):
            load_pipeline_config(preset="nyu")
        with pytest.raises(ConfigError):
            load_pipeline_config(method="best")

    def test_presets_cover_both_datasets(self):
        assert set(PRESETS) == {"mit", "iiw"}


class TestPrecedence:
    def test_file_overrides_preset_and_flags_override_file(self, tmp_path):
        path = write_config(tmp_path / "cfg.json", {"linearization": "srgb", "clustering": {"ratio_weight": 2.0}})
        cfg = load_pipeline_config(path, preset="mit", method="default")
        assert cfg.linearization == "srgb"
        assert cfg.clustering.ratio_weight == 2.0
        assert cfg.clustering.k == 20

        cfg = load_pipeline_config(path, preset="mit", overrides={"clustering": {"ratio_weight": 7.0}})
        assert cfg.clustering.ratio_weight == 7.0

    def test_preset_overrides_method(self):
        cfg = load_pipeline_config(preset="iiw", method="final")
        assert cfg.clustering.ratio_weight == 10.0
        assert cfg.crf.use_ratio_feature

    def test_merge_is_recursive_and_pure(self):
        base = {"a": {"x": 1, "y": 2}, "b": 3}
        merged = merge_dicts(base, {"a": {"y": 5}})
        assert merged == {"a": {"x": 1, "y": 5}, "b": 3}
        assert base["a"]["y"] == 2


class TestValidation:
    def test_unknown_key_names_dotted_path(self):
        with pytest.raises(ConfigError, match=r"crf\.w_q"):
            load_pipeline_config(overrides={"crf": {"w_q": 1.0}})

    def test_unknown_top_level_key(self):
        with pytest.raises(ConfigError, match="colour"):
            load_pipeline_config(overrides={"colour": 1})

    def test_invalid_value(self):
        with pytest.raises(ConfigError, match="sigma"):
            load_pipeline_config(overrides={"ratios": {"sigma": 0}})

    def test_invalid_k(self):
        with pytest.raises(ConfigError):
            load_pipeline_config(overrides={"clustering": {"k": "many"}})
        with pytest.raises(ValueError):
            ClusterParams(k=True)

    def test_section_must_be_object(self):
        with pytest.raises(ConfigError):
            load_pipeline_config(overrides={"crf": 3})

    def test_missing_file(self, tmp_path):
        with pytest.raises(LoadError):
            read_config_file(tmp_path / "absent.json")

    def test_malformed_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{\"crf\": ", encoding="utf-8")
        with pytest.raises(ConfigError, match="línea 1"):
            load_pipeline_config(path)

    def test_non_object_document(self, tmp_path):
        with pytest.raises(ConfigError):
            load_pipeline_config(write_config(tmp_path / "list.json", [1, 2]))


class TestSerialization:
    def test_round_trip(self):
        cfg = load_pipeline_config(preset="iiw", method="ratio_pairwise",
                                   overrides={"crf": {"theta_pos": 4.0}})
        assert PipelineConfig.from_dict(cfg.to_dict()) == cfg

    def test_dump_is_sorted_json(self):
        text = dump_config(PipelineConfig())
        data = json.loads(text)
        assert list(data) == sorted(data)
        assert data["crf"]["shading_log_range"] == [-2.5, 2.5]
        assert text == json.dumps(data, sort_keys=True)


class TestEnvironment:
    def test_valid_environment(self, monkeypatch):
        monkeypatch.setattr(Config, "THREADS", 2)
        monkeypatch.setattr(Config, "LOG_LEVEL", "DEBUG")
        assert Config.validate_env()

    def test_invalid_threads_and_level(self, monkeypatch):
        monkeypatch.setattr(Config, "THREADS", 0)
        monkeypatch.setattr(Config, "LOG_LEVEL", "LOUD")
        with pytest.raises(ValueError, match="IID_THREADS.*IID_LOG_LEVEL"):
            Config.validate_env()
