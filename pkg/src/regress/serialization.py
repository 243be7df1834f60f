"""Versioned binary container for fitted gaze models (``.gzm``).

Layout::

    magic "GZKMODEL" | u16 version | u32 metadata length | JSON metadata |
    raw little-endian sections | SHA-256 of everything before it

The metadata lists every section with its dtype, shape and byte offset
relative to the start of the section block.
"""

import hashlib
import json
import os
import struct
from pathlib import Path
from typing import Any, Dict, List, Tuple, Union

import numpy as np

from src.dataset.models import ScreenGeometry
from src.features.models import FeatureSpec
from src.reduction.model import ReductionModel
from src.regress.config import ForestParams, RegressionError, RegressorKind
from src.regress.forest import RfModel, Tree
from src.regress.knn import KnnModel
from src.regress.model import GazeModel, Regressor, TrainingInfo
from src.utils import constants
from src.utils.logging import get_logger

logger = get_logger(__name__)

_VERSION = struct.Struct("<H")
_LENGTH = struct.Struct("<I")
_DIGEST = 32
_TREE_FIELDS = (
    ("feature", "<i8"),
    ("threshold", "<f8"),
    ("left", "<i8"),
    ("right", "<i8"),
    ("value", "<f8"),
)


class ModelFormatError(RegressionError):
    """The file is not a gaze model container or its metadata is malformed."""

    code = "model_format_error"


class ModelVersionError(RegressionError):
    """The container was written by an unsupported format version."""

    code = "model_version_error"


class ModelChecksumError(RegressionError):
    """The container is truncated or corrupt."""

    code = "model_checksum_error"


class _Sections:
    def __init__(self) -> None:
        self.table: List[Dict[str, Any]] = []
        self.chunks: List[bytes] = []
        self.offset = 0

    def add(self, name: str, array: np.ndarray, dtype: str) -> None:
        data = np.ascontiguousarray(array, dtype=dtype).tobytes()
        self.table.append(
            {
                "name": name,
                "dtype": dtype,
                "shape": list(np.shape(array)),
                "offset": self.offset,
                "nbytes": len(data),
            }
        )
        self.chunks.append(data)
        self.offset += len(data)


def _add_regressor(sections: _Sections, axis: str, m: Regressor) -> Dict[str, Any]:
    if isinstance(m, KnnModel):
        sections.add(f"{axis}.X", m.X, "<f8")
        sections.add(f"{axis}.y", m.y, "<f8")
        return {"type": RegressorKind.KNN.value, "k": m.k}
    sections.add(f"{axis}.nodes", [t.n_nodes for t in m.trees], "<i8")
    for name, dtype in _TREE_FIELDS:
        sections.add(f"{axis}.{name}", np.concatenate([getattr(t, name) for t in m.trees]), dtype)
    return {
        "type": RegressorKind.RF.value,
        "n_features": m.n_features,
        "params": m.params.model_dump(mode="json"),
    }


def model_bytes(model: GazeModel) -> bytes:
    """Serialise a model. Equal models give identical bytes."""
    sections = _Sections()
    sections.add("reduction.pca_mean", model.reduction.pca_mean, "<f8")
    sections.add("reduction.pca_basis", model.reduction.pca_basis, "<f8")
    sections.add("reduction.lda_basis", model.reduction.lda_basis, "<f8")
    regressors = {
        "x": _add_regressor(sections, "x", model.regressor_x),
        "y": _add_regressor(sections, "y", model.regressor_y),
    }
    metadata = {
        "kind": model.kind.value,
        "descriptor": model.descriptor,
        "feature": model.feature.model_dump(mode="json"),
        "augmented": model.augmented,
        "training": model.training.model_dump(mode="json"),
        "geometry": model.geometry.model_dump(mode="json"),
        "reduction": {
            "input_dim": model.reduction.input_dim,
            "class_count": model.reduction.class_count,
        },
        "regressors": regressors,
        "sections": sections.table,
    }
    blob = json.dumps(metadata, sort_keys=True, separators=(",", ":")).encode("utf-8")
    body = b"".join(
        [
            constants.MODEL_MAGIC,
            _VERSION.pack(constants.MODEL_FORMAT_VERSION),
            _LENGTH.pack(len(blob)),
            blob,
            *sections.chunks,
        ]
    )
    return body + hashlib.sha256(body).digest()


def save_model(model: GazeModel, path: Union[str, Path]) -> Path:
    """Write a model container, replacing any existing file atomically."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(model_bytes(model))
    os.replace(tmp, path)
    logger.info(
        "model_saved", path=str(path), regressor=model.kind.value, descriptor=model.descriptor
    )
    return path


def _check_envelope(data: bytes, source: str) -> Tuple[Dict[str, Any], bytes]:
    magic = constants.MODEL_MAGIC
    if len(data) < len(magic):
        if magic.startswith(data) and data:
            raise ModelChecksumError(f"{source} is truncated")
        raise ModelFormatError(f"{source} is not a gaze model")
    if data[: len(magic)] != magic:
        raise ModelFormatError(f"{source} is not a gaze model")

    offset = len(magic)
    if len(data) < offset + _VERSION.size:
        raise ModelChecksumError(f"{source} is truncated")
    (version,) = _VERSION.unpack_from(data, offset)
    if version != constants.MODEL_FORMAT_VERSION:
        raise ModelVersionError(
            f"{source} has model format version {version}; "
            f"this build reads version {constants.MODEL_FORMAT_VERSION}",
            {"version": version, "supported": constants.MODEL_FORMAT_VERSION},
        )

    if len(data) < offset + _VERSION.size + _LENGTH.size + _DIGEST:
        raise ModelChecksumError(f"{source} is truncated")
    body, digest = data[:-_DIGEST], data[-_DIGEST:]
    if hashlib.sha256(body).digest() != digest:
        raise ModelChecksumError(f"{source} failed its checksum (truncated or corrupt)")

    offset += _VERSION.size
    (length,) = _LENGTH.unpack_from(body, offset)
    offset += _LENGTH.size
    try:
        metadata = json.loads(body[offset : offset + length].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ModelFormatError(f"{source} has malformed metadata: {e}") from e
    return metadata, body[offset + length :]


def _read_sections(metadata: Dict[str, Any], block: bytes) -> Dict[str, np.ndarray]:
    arrays = {}
    for entry in metadata["sections"]:
        start, nbytes = entry["offset"], entry["nbytes"]
        if start + nbytes > len(block):
            raise ModelFormatError(f"section {entry['name']} runs past the end of the file")
        if nbytes == 0:
            arrays[entry["name"]] = np.zeros(entry["shape"], dtype=entry["dtype"][1:])
            continue
        raw = np.frombuffer(block[start : start + nbytes], dtype=entry["dtype"])
        arrays[entry["name"]] = raw.astype(entry["dtype"][1:]).reshape(entry["shape"])
    return arrays


def _load_regressor(axis: str, info: Dict[str, Any], arrays: Dict[str, np.ndarray]) -> Regressor:
    if info["type"] == RegressorKind.KNN.value:
        return KnnModel(X=arrays[f"{axis}.X"], y=arrays[f"{axis}.y"], k=int(info["k"]))
    bounds = np.concatenate([[0], np.cumsum(arrays[f"{axis}.nodes"])])
    trees = []
    for start, stop in zip(bounds[:-1], bounds[1:]):
        fields = {name: arrays[f"{axis}.{name}"][start:stop] for name, _ in _TREE_FIELDS}
        trees.append(Tree(**fields))
    return RfModel(
        trees=trees,
        n_features=int(info["n_features"]),
        params=ForestParams(**info["params"]),
    )


def model_from_bytes(data: bytes, source: str = "<bytes>") -> GazeModel:
    """
    Parse a model container.

    Raises:
        ModelFormatError: Not a container, or malformed metadata
        ModelVersionError: Written by another format version
        ModelChecksumError: Truncated or corrupt
    """
    metadata, block = _check_envelope(data, source)
    try:
        arrays = _read_sections(metadata, block)
        reduction = ReductionModel(
            input_dim=int(metadata["reduction"]["input_dim"]),
            pca_mean=arrays["reduction.pca_mean"],
            pca_basis=arrays["reduction.pca_basis"],
            lda_basis=arrays["reduction.lda_basis"],
            class_count=int(metadata["reduction"]["class_count"]),
        )
        return GazeModel(
            reduction=reduction,
            regressor_x=_load_regressor("x", metadata["regressors"]["x"], arrays),
            regressor_y=_load_regressor("y", metadata["regressors"]["y"], arrays),
            kind=RegressorKind(metadata["kind"]),
            feature=FeatureSpec(**metadata["feature"]),
            augmented=bool(metadata["augmented"]),
            training=TrainingInfo(**metadata["training"]),
            geometry=ScreenGeometry(**metadata["geometry"]),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise ModelFormatError(f"{source} has inconsistent metadata: {e}") from e


def load_model(path: Union[str, Path]) -> GazeModel:
    """Read a model written by :func:`save_model`."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise ModelFormatError(f"cannot read model {path}: {e}") from e
    model = model_from_bytes(data, str(path))
    logger.debug("model_loaded", path=str(path), regressor=model.kind.value)
    return model
