"""Configuration management for the gaze pipeline."""

import os
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import yaml
from pydantic import BaseModel, Field, ValidationError, field_validator

from src.dataset.models import ScreenGeometry
from src.features.models import FeatureSpec
from src.regress.config import ForestParams, KnnParams
from src.utils import constants
from src.utils.logging import get_logger

logger = get_logger(__name__)

DEFAULT_CONFIG_PATH = "config/gazekit.yaml"


class ImagingConfig(BaseModel):
    """Filter parameters shared by features and frame selection."""

    log_sigma: float = Field(constants.LOG_SIGMA, gt=0, description="LoG sigma (pixels)")
    log_side: int = Field(constants.LOG_SIDE, ge=3, description="LoG kernel side (odd)")

    @field_validator("log_side")
    @classmethod
    def _odd_side(cls, value: int) -> int:
        if value % 2 == 0:
            raise ValueError("log_side must be odd")
        return value


class EyesConfig(BaseModel):
    """Eye localisation and blink detection thresholds."""

    min_box_fraction: float = Field(constants.MIN_BOX_FRACTION, gt=0, lt=1)
    symmetry_tolerance: float = Field(constants.SYMMETRY_TOLERANCE, gt=0)
    blink_window: int = Field(constants.BLINK_WINDOW, ge=2)
    blink_skip: int = Field(constants.BLINK_SKIP, ge=1)
    blink_sigma_factor: float = Field(constants.BLINK_SIGMA_FACTOR, gt=0)
    blink_min_rise: float = Field(constants.BLINK_MIN_RISE, ge=0)


class FramesConfig(BaseModel):
    """Frame pruning inside dot-display chunks."""

    frames_per_chunk: int = Field(constants.FRAMES_PER_CHUNK, ge=1)


class ReductionConfig(BaseModel):
    """PCA/LDA settings."""

    pca_floor: int = Field(constants.PCA_FLOOR, ge=1)
    lda_epsilon_scale: float = Field(constants.LDA_EPSILON_SCALE, ge=0)


class TrackingConfig(BaseModel):
    """Temporal bilateral filter defaults."""

    sigma_t: float = Field(constants.FILTER_SIGMA_T, gt=0, description="frames")
    sigma_r_cm: float = Field(constants.FILTER_SIGMA_R_CM, gt=0, description="cm")


class EvaluationConfig(BaseModel):
    """Evaluation protocol defaults."""

    viewing_distances_cm: Tuple[float, ...] = Field(constants.VIEWING_DISTANCES_CM)
    repeats: int = Field(constants.PROTOCOL_REPEATS, ge=1)
    size_study_sizes: List[int] = Field(default_factory=list)


class GazeKitConfig(BaseModel):
    """Pipeline configuration container."""

    geometry: ScreenGeometry = Field(default_factory=ScreenGeometry)
    imaging: ImagingConfig = Field(default_factory=ImagingConfig)
    eyes: EyesConfig = Field(default_factory=EyesConfig)
    features: FeatureSpec = Field(default_factory=FeatureSpec)
    frames: FramesConfig = Field(default_factory=FramesConfig)
    reduction: ReductionConfig = Field(default_factory=ReductionConfig)
    forest: ForestParams = Field(default_factory=ForestParams)
    knn: KnnParams = Field(default_factory=KnnParams)
    tracking: TrackingConfig = Field(default_factory=TrackingConfig)
    evaluation: EvaluationConfig = Field(default_factory=EvaluationConfig)

    def validate_config(self) -> Dict[str, List[str]]:
        """
        Cross-field checks that single-field validation cannot express.

        Returns:
            Dict with validation warnings and errors
        """
        issues: Dict[str, List[str]] = {"errors": [], "warnings": []}

        if self.imaging.log_side < 2 * round(2 * self.imaging.log_sigma) + 1:
            issues["warnings"].append(
                f"LoG side {self.imaging.log_side} truncates sigma {self.imaging.log_sigma} "
                "before 2 sigma"
            )
        if self.eyes.blink_skip > self.eyes.blink_window:
            issues["errors"].append("blink_skip must not exceed blink_window")
        if any(d <= 0 for d in self.evaluation.viewing_distances_cm):
            issues["errors"].append("viewing distances must be positive")
        if any(k < 2 for k in self.evaluation.size_study_sizes):
            issues["errors"].append("size study group sizes must be at least 2")
        if self.tracking.sigma_r_cm > min(self.geometry.dx_cm, self.geometry.dy_cm):
            issues["warnings"].append(
                "filter range sigma exceeds the grid spacing; saccades may be smoothed"
            )

        return issues

    def summary(self) -> Dict[str, object]:
        """Short description for logs."""
        return {
            "grid": f"{self.geometry.grid_rows}x{self.geometry.grid_cols}",
            "descriptor": self.features.descriptor.value,
            "log": (self.imaging.log_sigma, self.imaging.log_side),
            "trees": self.forest.n_trees,
            "knn_k": self.knn.k,
            "filter": (self.tracking.sigma_t, self.tracking.sigma_r_cm),
        }


def load_config(config_path: Optional[str] = None, validate: bool = True) -> GazeKitConfig:
    """
    Load the pipeline configuration from YAML.

    Args:
        config_path: Path to a gazekit YAML file
        validate: Whether to run cross-field validation

    Returns:
        GazeKitConfig: Loaded configuration (defaults when no file exists)

    Raises:
        ValueError: If the configuration is invalid
        yaml.YAMLError: If YAML parsing fails
    """
    if config_path is None:
        config_path = os.getenv("GAZEKIT_CONFIG_PATH", DEFAULT_CONFIG_PATH)

    config_file = Path(config_path)

    if not config_file.exists():
        example_path = config_file.parent / "gazekit.example.yaml"
        if example_path.exists():
            logger.info("using_example_config", path=str(example_path))
            config_file = example_path
        else:
            logger.debug("no_config_file", path=str(config_path))
            return GazeKitConfig()

    try:
        with open(config_file, "r") as f:
            data = yaml.safe_load(f)
    except yaml.YAMLError as e:
        logger.error("config_parse_failed", path=str(config_file), error=str(e))
        raise

    if not data:
        logger.warning("config_file_empty", path=str(config_file))
        return GazeKitConfig()

    try:
        config = GazeKitConfig(**data)
    except ValidationError as e:
        raise ValueError(f"Configuration validation failed ({config_file}):\n{e}") from e

    if validate:
        issues = config.validate_config()
        for warning in issues["warnings"]:
            logger.warning("config_validation_warning", warning=warning)
        if issues["errors"]:
            error_msg = "Configuration errors found:\n" + "\n".join(issues["errors"])
            logger.error("config_invalid", errors=issues["errors"])
            raise ValueError(error_msg)

    logger.info("config_loaded", path=str(config_file), **config.summary())
    return config


def save_config(config: GazeKitConfig, config_path: str) -> None:
    """
    Save the pipeline configuration to YAML.

    Args:
        config: Configuration to save
        config_path: Destination file
    """
    config_file = Path(config_path)
    config_file.parent.mkdir(parents=True, exist_ok=True)

    data = config.model_dump(mode="json")
    with open(config_file, "w") as f:
        yaml.dump(data, f, default_flow_style=False, sort_keys=False)

    logger.info("config_saved", path=str(config_file))
