"""Unit tests for configuration management."""

import pytest
import yaml

from src.utils.config import GazeKitConfig, load_config, save_config


class TestGazeKitConfig:
    """Test pipeline configuration loading."""

    def test_defaults(self):
        """Defaults describe the standard tablet and pipeline."""
        config = GazeKitConfig()
        assert config.geometry.n_points == 35
        assert config.forest.n_trees == 100
        assert config.knn.k == 3
        assert config.tracking.sigma_r_cm == 1.7
        assert config.validate_config() == {"errors": [], "warnings": []}

    def test_load_missing_file(self, tmp_path):
        """Test loading when the config file doesn't exist."""
        config = load_config(str(tmp_path / "absent.yaml"))
        assert config == GazeKitConfig()

    def test_load_example_fallback(self, tmp_path):
        """A sibling example file is used when the named file is missing."""
        (tmp_path / "gazekit.example.yaml").write_text(yaml.dump({"knn": {"k": 5}}))
        assert load_config(str(tmp_path / "gazekit.yaml")).knn.k == 5

    def test_load_empty_file(self, tmp_path):
        """An empty file gives the defaults."""
        path = tmp_path / "gazekit.yaml"
        path.write_text("")
        assert load_config(str(path)) == GazeKitConfig()

    def test_load_valid_config(self, tmp_path):
        """Test loading a partial configuration."""
        path = tmp_path / "gazekit.yaml"
        path.write_text(
            yaml.dump(
                {
                    "features": {"descriptor": "lbp"},
                    "forest": {"n_trees": 20, "min_leaf": 3},
                    "tracking": {"sigma_t": 3.0},
                }
            )
        )
        config = load_config(str(path))
        assert config.features.descriptor.value == "lbp"
        assert config.forest.n_trees == 20
        assert config.tracking.sigma_t == 3.0
        assert config.tracking.sigma_r_cm == 1.7

    def test_env_path(self, tmp_path, monkeypatch):
        """GAZEKIT_CONFIG_PATH is used when no path is given."""
        path = tmp_path / "custom.yaml"
        path.write_text(yaml.dump({"frames": {"frames_per_chunk": 3}}))
        monkeypatch.setenv("GAZEKIT_CONFIG_PATH", str(path))
        assert load_config().frames.frames_per_chunk == 3

    def test_field_validation(self, tmp_path):
        """Out-of-range values are reported with the file name."""
        path = tmp_path / "gazekit.yaml"
        path.write_text(yaml.dump({"imaging": {"log_side": 8}}))
        with pytest.raises(ValueError, match="gazekit.yaml"):
            load_config(str(path))

    def test_grid_must_fit(self, tmp_path):
        """A grid wider than the screen is refused."""
        path = tmp_path / "gazekit.yaml"
        path.write_text(yaml.dump({"geometry": {"dx_cm": 5.0}}))
        with pytest.raises(ValueError):
            load_config(str(path))

    def test_cross_field_errors(self, tmp_path):
        """Cross-field errors fail the load unless validation is off."""
        path = tmp_path / "gazekit.yaml"
        path.write_text(yaml.dump({"eyes": {"blink_skip": 30}}))
        with pytest.raises(ValueError, match="blink_skip"):
            load_config(str(path))
        assert load_config(str(path), validate=False).eyes.blink_skip == 30

    def test_cross_field_warnings(self):
        """Wide range sigma and a short LoG kernel only warn."""
        config = GazeKitConfig(
            tracking={"sigma_r_cm": 4.0}, imaging={"log_sigma": 3.0, "log_side": 9}
        )
        issues = config.validate_config()
        assert issues["errors"] == []
        assert len(issues["warnings"]) == 2

    def test_size_study_sizes(self):
        """Groups of one subject cannot be cross-validated."""
        config = GazeKitConfig(evaluation={"size_study_sizes": [1, 4]})
        assert config.validate_config()["errors"]

    def test_invalid_yaml(self, tmp_path):
        """Unparseable YAML raises."""
        path = tmp_path / "gazekit.yaml"
        path.write_text("forest: [unclosed\n")
        with pytest.raises(yaml.YAMLError):
            load_config(str(path))

    def test_save_round_trip(self, tmp_path):
        """A saved configuration loads back unchanged."""
        config = GazeKitConfig(
            knn={"k": 7}, evaluation={"repeats": 2, "size_study_sizes": [2, 4]}
        )
        path = tmp_path / "nested" / "gazekit.yaml"
        save_config(config, str(path))
        assert load_config(str(path)) == config

    def test_summary(self):
        """The log summary names the grid and descriptor."""
        summary = GazeKitConfig().summary()
        assert summary["grid"] == "5x7"
        assert summary["descriptor"] == "mhog"
