"""Screen and grid geometry helpers."""

from typing import List, Tuple

from src.dataset.models import GazePoint, GeometryError, GridIndex, ScreenGeometry
from src.utils import constants


def grid_to_screen(g: GridIndex, geom: ScreenGeometry) -> GazePoint:
    """
    Screen coordinates (cm) of a grid dot. The grid is centred on the screen.

    Raises:
        GeometryError: If the index lies outside the grid
    """
    g.check(geom)
    return GazePoint(
        x_cm=geom.margin_x_cm + g.col * geom.dx_cm,
        y_cm=geom.margin_y_cm + g.row * geom.dy_cm,
    )


def label_id(g: GridIndex, geom: ScreenGeometry) -> int:
    """Class label of a grid dot: row * cols + col."""
    g.check(geom)
    return g.row * geom.grid_cols + g.col


def grid_from_label(label: int, geom: ScreenGeometry) -> GridIndex:
    """Inverse of :func:`label_id`."""
    if not 0 <= label < geom.n_points:
        raise GeometryError(
            f"label {label} outside [0, {geom.n_points - 1}]", {"label": label}
        )
    return GridIndex(row=label // geom.grid_cols, col=label % geom.grid_cols)


def grid_points(geom: ScreenGeometry) -> List[Tuple[GridIndex, GazePoint]]:
    """All dots in label order with their screen positions."""
    out = []
    for label in range(geom.n_points):
        g = grid_from_label(label, geom)
        out.append((g, grid_to_screen(g, geom)))
    return out


def nearest_grid(point: GazePoint, geom: ScreenGeometry) -> GridIndex:
    """Grid dot closest to an arbitrary screen point."""
    col = round((point.x_cm - geom.margin_x_cm) / geom.dx_cm)
    row = round((point.y_cm - geom.margin_y_cm) / geom.dy_cm)
    return GridIndex(
        row=min(max(row, 0), geom.grid_rows - 1),
        col=min(max(col, 0), geom.grid_cols - 1),
    )


def chunk_window(dot_onset_s: float) -> Tuple[float, float]:
    """Interval after a dot appears during which the gaze is considered settled."""
    if dot_onset_s < 0:
        raise GeometryError(f"dot onset must be non-negative, got {dot_onset_s}")
    return (
        dot_onset_s + constants.CHUNK_START_OFFSET_S,
        dot_onset_s + constants.CHUNK_END_OFFSET_S,
    )


def dot_onset(timestamp_s: float, interval_s: float = constants.DOT_INTERVAL_S) -> float:
    """Start of the dot-display slot containing ``timestamp_s`` (session-relative)."""
    return float(int(timestamp_s // interval_s)) * interval_s
