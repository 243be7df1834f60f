"""Track export: CSV table and SVG overlay on the dot grid."""

from pathlib import Path
from typing import Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from src.dataset.geometry import grid_points  # noqa: E402
from src.dataset.models import ScreenGeometry  # noqa: E402
from src.tracking.models import GazeTrack  # noqa: E402

TRACK_COLUMNS = ["frame", "raw_x_cm", "raw_y_cm", "filt_x_cm", "filt_y_cm", "blink"]


def track_frame(track: GazeTrack) -> pd.DataFrame:
    """One row per frame; frames without an estimate have empty coordinates."""
    rows = []
    for p in track.points:
        rows.append(
            {
                "frame": p.frame_index,
                "raw_x_cm": p.raw.x_cm if p.raw else np.nan,
                "raw_y_cm": p.raw.y_cm if p.raw else np.nan,
                "filt_x_cm": p.filtered.x_cm if p.filtered else np.nan,
                "filt_y_cm": p.filtered.y_cm if p.filtered else np.nan,
                "blink": int(p.blink),
            }
        )
    return pd.DataFrame(rows, columns=TRACK_COLUMNS)


def write_track_csv(track: GazeTrack, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    track_frame(track).to_csv(path, index=False, float_format="%.6f")
    return path


def write_track_svg(
    track: GazeTrack, path: Path, geometry: Optional[ScreenGeometry] = None
) -> Path:
    """Raw and filtered estimates drawn over the screen and its dot grid."""
    geometry = geometry or ScreenGeometry()
    path.parent.mkdir(parents=True, exist_ok=True)
    with plt.rc_context({"svg.hashsalt": "gazekit", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(7, 4.5))
        try:
            dots = np.array([p.as_tuple() for _, p in grid_points(geometry)])
            ax.scatter(dots[:, 0], dots[:, 1], s=30, c="black", marker="+", label="grid")
            raw, filt = track.raw_array(), track.filtered_array()
            if len(raw):
                ax.scatter(raw[:, 0], raw[:, 1], s=8, alpha=0.5, label="raw")
                ax.plot(filt[:, 0], filt[:, 1], linewidth=1.0, color="tab:red", label="filtered")
            ax.set_xlim(0, geometry.width_cm)
            ax.set_ylim(geometry.height_cm, 0)
            ax.set_aspect("equal")
            ax.set_xlabel("x (cm)")
            ax.set_ylabel("y (cm)")
            ax.legend(loc="upper right", fontsize="small")
            fig.tight_layout()
            fig.savefig(path, format="svg", metadata={"Date": None})
        finally:
            plt.close(fig)
    return path
