"""Two-axis gaze regression on reduced eye-appearance features."""

from dataclasses import dataclass
from typing import List, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from src.dataset.models import Corpus, GazePoint, ScreenGeometry
from src.eyes.models import EyeGeometryFeature, EyePair
from src.features.extract import SpecLike, as_spec, extract
from src.features.models import FeatureSpec
from src.features.table import FeatureTable, build_feature_table
from src.reduction.model import ReductionModel, fit_reduction, project
from src.regress.config import ForestParams, KnnParams, RegressionError, RegressorKind
from src.regress.forest import RfModel, fit_rf, predict_rf_batch
from src.regress.knn import KnnModel, fit_knn, predict_knn_batch
from src.utils import constants
from src.utils.config import EyesConfig
from src.utils.logging import get_logger
from src.utils.seeding import derive_seed, fingerprint

logger = get_logger(__name__)

Regressor = Union[KnnModel, RfModel]


class TrainSpec(BaseModel):
    """Everything that determines a fitted GazeModel besides the data."""

    feature: FeatureSpec = Field(default_factory=FeatureSpec)
    regressor: RegressorKind = RegressorKind.RF
    forest: ForestParams = Field(default_factory=ForestParams)
    knn: KnnParams = Field(default_factory=KnnParams)
    augmented: bool = Field(False, description="Append eye-box geometry after reduction")
    clamp: bool = Field(False, description="Clamp predictions to the screen")
    seed: int = 0
    pca_floor: int = Field(constants.PCA_FLOOR, ge=1)
    lda_epsilon_scale: float = Field(constants.LDA_EPSILON_SCALE, ge=0)

    model_config = ConfigDict(frozen=True)

    def fingerprint(self) -> str:
        return fingerprint(self.model_dump(mode="json"))


class TrainingInfo(BaseModel):
    """Provenance embedded in every model."""

    corpus_fingerprint: str
    seed: int
    config_fingerprint: str
    samples: int
    subjects: List[str] = Field(default_factory=list)

    model_config = ConfigDict(frozen=True)


@dataclass(frozen=True, eq=False)
class GazeModel:
    """Shared reduction feeding one regressor per screen axis."""

    reduction: ReductionModel
    regressor_x: Regressor
    regressor_y: Regressor
    kind: RegressorKind
    feature: FeatureSpec
    augmented: bool
    training: TrainingInfo
    geometry: ScreenGeometry

    @property
    def descriptor(self) -> str:
        return self.feature.descriptor.value

    @property
    def regressor_input_dim(self) -> int:
        extra = constants.GEOMETRY_FEATURE_LENGTH if self.augmented else 0
        return self.reduction.output_dim + extra


def fit_regressor(X: np.ndarray, y: np.ndarray, spec: TrainSpec, axis: str) -> Regressor:
    """Fit one axis. Forest seeds are derived per axis so the axes never share draws."""
    if spec.regressor == RegressorKind.KNN:
        return fit_knn(X, y, spec.knn.k)
    params = spec.forest.model_copy(
        update={"seed": derive_seed(spec.seed, "forest", spec.forest.seed, axis)}
    )
    return fit_rf(X, y, params)


def predict_regressor(m: Regressor, X: np.ndarray) -> np.ndarray:
    if isinstance(m, KnnModel):
        return predict_knn_batch(m, X)
    return predict_rf_batch(m, X)


def _inputs(
    reduction: ReductionModel,
    augmented: bool,
    features: np.ndarray,
    eye_geometry: Optional[np.ndarray],
) -> np.ndarray:
    Z = np.atleast_2d(project(reduction, features))
    if not augmented:
        return Z
    if eye_geometry is None:
        raise RegressionError("augmented model needs the eye-box geometry of every sample")
    G = np.atleast_2d(np.asarray(eye_geometry, dtype=np.float64))
    if G.shape != (Z.shape[0], constants.GEOMETRY_FEATURE_LENGTH):
        raise RegressionError(
            f"eye geometry of shape {G.shape} does not match {Z.shape[0]} samples"
        )
    return np.hstack([Z, G])


def regressor_inputs(
    model: GazeModel, features: np.ndarray, eye_geometry: Optional[np.ndarray]
) -> np.ndarray:
    """Reduced features, with the geometry columns appended for augmented models."""
    return _inputs(model.reduction, model.augmented, features, eye_geometry)


def fit_gaze(
    table: FeatureTable,
    rows: Optional[np.ndarray] = None,
    spec: Optional[TrainSpec] = None,
) -> GazeModel:
    """
    Fit a GazeModel on a subset of a feature table.

    The reduction is fitted with the grid labels as classes; the x and y
    regressors are fitted separately on the reduced (optionally augmented) features.

    Raises:
        RegressionError: If no rows are selected
    """
    spec = (spec or TrainSpec()).model_copy(update={"feature": table.spec})
    rows = np.arange(len(table)) if rows is None else np.asarray(rows, dtype=np.int64)
    if rows.size == 0:
        raise RegressionError("cannot train on an empty set of rows")

    features = table.features[rows]
    reduction = fit_reduction(
        features,
        table.labels[rows],
        pca_floor=spec.pca_floor,
        epsilon_scale=spec.lda_epsilon_scale,
    )
    training = TrainingInfo(
        corpus_fingerprint=table.corpus_fingerprint,
        seed=spec.seed,
        config_fingerprint=spec.fingerprint(),
        samples=int(rows.size),
        subjects=list(dict.fromkeys(table.subjects[rows].tolist())),
    )
    X = _inputs(reduction, spec.augmented, features, table.eye_geometry[rows])
    targets = table.targets[rows]
    model = GazeModel(
        reduction=reduction,
        regressor_x=fit_regressor(X, targets[:, 0], spec, "x"),
        regressor_y=fit_regressor(X, targets[:, 1], spec, "y"),
        kind=spec.regressor,
        feature=table.spec,
        augmented=spec.augmented,
        training=training,
        geometry=table.geometry,
    )
    logger.debug(
        "gaze_model_fitted",
        regressor=spec.regressor.value,
        descriptor=table.spec.descriptor.value,
        samples=int(rows.size),
        input_dim=model.regressor_input_dim,
    )
    return model


def train_gaze(
    corpus: Corpus,
    descriptor: Optional[SpecLike] = None,
    kind: Optional[RegressorKind] = None,
    spec: Optional[TrainSpec] = None,
    augmented: Optional[bool] = None,
    eyes: Optional[EyesConfig] = None,
    jobs: int = 1,
    cache_dir: Optional[str] = None,
) -> GazeModel:
    """
    Extract features for every usable frame of a corpus and fit a GazeModel.

    Blink frames and frames whose eyes cannot be localised never reach the fit;
    subjects without any usable frame are excluded and reported by the table.
    """
    spec = spec or TrainSpec()
    update = {}
    if descriptor is not None:
        update["feature"] = as_spec(descriptor)
    if kind is not None:
        update["regressor"] = RegressorKind(kind)
    if augmented is not None:
        update["augmented"] = augmented
    spec = spec.model_copy(update=update)

    table = build_feature_table(corpus, spec.feature, eyes, jobs=jobs, cache_dir=cache_dir)
    model = fit_gaze(table, spec=spec)
    logger.info(
        "gaze_model_trained",
        regressor=spec.regressor.value,
        descriptor=spec.feature.descriptor.value,
        samples=model.training.samples,
        subjects=len(model.training.subjects),
        excluded_subjects=table.exclusions.excluded_subjects,
    )
    return model


def predict_gaze_batch(
    model: GazeModel,
    features: np.ndarray,
    eye_geometry: Optional[np.ndarray] = None,
    clamp: bool = False,
) -> np.ndarray:
    """Gaze positions (cm) for a samples x dim feature matrix, n x 2."""
    X = regressor_inputs(model, features, eye_geometry)
    out = np.column_stack(
        [predict_regressor(model.regressor_x, X), predict_regressor(model.regressor_y, X)]
    )
    if clamp:
        out[:, 0] = np.clip(out[:, 0], 0.0, model.geometry.width_cm)
        out[:, 1] = np.clip(out[:, 1], 0.0, model.geometry.height_cm)
    return out


def predict_gaze(
    model: GazeModel,
    pair: EyePair,
    geometry: Optional[EyeGeometryFeature] = None,
    clamp: bool = False,
) -> GazePoint:
    """
    Predict where on the screen an eye pair is looking.

    Raises:
        RegressionError: If the model is augmented and no geometry is given
    """
    if model.augmented and geometry is None:
        raise RegressionError("augmented model needs the eye-box geometry")
    values = extract(pair, model.feature).values.astype(np.float32).astype(np.float64)
    geo = geometry.as_array()[None, :] if geometry is not None else None
    x, y = predict_gaze_batch(model, values[None, :], geo, clamp=clamp)[0]
    return GazePoint(x_cm=float(x), y_cm=float(y))


def clamp_to_screen(point: GazePoint, geometry: ScreenGeometry) -> GazePoint:
    """Clip a prediction to the physical screen."""
    return GazePoint(
        x_cm=min(max(point.x_cm, 0.0), geometry.width_cm),
        y_cm=min(max(point.y_cm, 0.0), geometry.height_cm),
    )
