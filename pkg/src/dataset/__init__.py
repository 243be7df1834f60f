"""Labelled corpora, screen geometry and frame pruning."""

from .geometry import chunk_window, grid_from_label, grid_to_screen, label_id, nearest_grid
from .models import (
    Corpus,
    GazePoint,
    GeometryError,
    GridIndex,
    ManifestError,
    Posture,
    Provenance,
    Race,
    SampleRecord,
    ScreenGeometry,
)

__all__ = [
    "Corpus",
    "GazePoint",
    "GeometryError",
    "GridIndex",
    "ManifestError",
    "Posture",
    "Provenance",
    "Race",
    "SampleRecord",
    "ScreenGeometry",
    "chunk_window",
    "grid_from_label",
    "grid_to_screen",
    "label_id",
    "nearest_grid",
]
