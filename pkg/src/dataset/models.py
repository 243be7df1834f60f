"""Data models for labelled gaze corpora."""

from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.utils import constants
from src.utils.errors import GazeKitError
from src.utils.seeding import fingerprint


class GeometryError(GazeKitError):
    """Invalid screen geometry or grid index outside the grid."""

    code = "geometry_error"


class ManifestError(GazeKitError):
    """Manifest file missing, malformed, or referencing missing frames."""

    code = "manifest_error"


class Posture(str, Enum):
    """Body posture held for a whole session."""

    STANDING = "standing"
    SITTING = "sitting"
    SLOUCHING = "slouching"
    LYING = "lying"


class Race(str, Enum):
    """Coarse subject race grouping used by the partition experiments."""

    CAUCASIAN = "caucasian"
    ASIAN = "asian"
    OTHER = "other"


class Provenance(str, Enum):
    """Where a corpus came from."""

    REAL = "real"
    SYNTHETIC = "synthetic"


class ScreenGeometry(BaseModel):
    """Landscape tablet screen and the centred dot grid shown on it."""

    width_cm: float = Field(constants.SCREEN_WIDTH_CM, gt=0, description="Screen width (cm)")
    height_cm: float = Field(constants.SCREEN_HEIGHT_CM, gt=0, description="Screen height (cm)")
    grid_rows: int = Field(constants.GRID_ROWS, gt=0, description="Dot grid rows")
    grid_cols: int = Field(constants.GRID_COLS, gt=0, description="Dot grid columns")
    dx_cm: float = Field(constants.GRID_DX_CM, gt=0, description="Horizontal dot spacing (cm)")
    dy_cm: float = Field(constants.GRID_DY_CM, gt=0, description="Vertical dot spacing (cm)")

    model_config = ConfigDict(
        frozen=True,
        json_schema_extra={
            "example": {
                "width_cm": 22.62,
                "height_cm": 14.14,
                "grid_rows": 5,
                "grid_cols": 7,
                "dx_cm": 3.42,
                "dy_cm": 3.41,
            }
        },
    )

    @model_validator(mode="after")
    def _grid_fits_screen(self) -> "ScreenGeometry":
        # The outermost dot centres must lie on the screen.
        if (self.grid_rows - 1) * self.dy_cm > self.height_cm + 1e-9:
            raise ValueError(
                f"{self.grid_rows} rows at {self.dy_cm} cm do not fit {self.height_cm} cm"
            )
        if (self.grid_cols - 1) * self.dx_cm > self.width_cm + 1e-9:
            raise ValueError(
                f"{self.grid_cols} cols at {self.dx_cm} cm do not fit {self.width_cm} cm"
            )
        return self

    @property
    def n_points(self) -> int:
        return self.grid_rows * self.grid_cols

    @property
    def margin_x_cm(self) -> float:
        return (self.width_cm - (self.grid_cols - 1) * self.dx_cm) / 2.0

    @property
    def margin_y_cm(self) -> float:
        return (self.height_cm - (self.grid_rows - 1) * self.dy_cm) / 2.0

    @property
    def center(self) -> "GazePoint":
        return GazePoint(x_cm=self.width_cm / 2.0, y_cm=self.height_cm / 2.0)


class GridIndex(BaseModel):
    """Row/column of a dot on the grid."""

    row: int = Field(..., ge=0, description="Grid row, top to bottom")
    col: int = Field(..., ge=0, description="Grid column, left to right")

    model_config = ConfigDict(frozen=True)

    def check(self, geom: ScreenGeometry) -> "GridIndex":
        """Raise GeometryError unless the index lies on ``geom``'s grid."""
        if self.row >= geom.grid_rows or self.col >= geom.grid_cols:
            raise GeometryError(
                f"grid index ({self.row}, {self.col}) outside "
                f"{geom.grid_rows}x{geom.grid_cols} grid",
                {"row": self.row, "col": self.col},
            )
        return self


class GazePoint(BaseModel):
    """Screen location in cm, origin top-left, x rightward, y downward."""

    x_cm: float
    y_cm: float

    model_config = ConfigDict(frozen=True)

    def as_tuple(self) -> Tuple[float, float]:
        return (self.x_cm, self.y_cm)


class SampleRecord(BaseModel):
    """One labelled frame."""

    subject_id: str = Field(..., min_length=1)
    session_id: str = Field(..., min_length=1)
    posture: Posture
    glasses: bool
    race: Race
    frame_ref: str = Field(..., description="Frame path, relative to the corpus root")
    grid: GridIndex
    timestamp_s: float = Field(..., ge=0)

    model_config = ConfigDict(
        frozen=True,
        json_schema_extra={
            "example": {
                "subject_id": "s01",
                "session_id": "s01-01",
                "posture": "sitting",
                "glasses": False,
                "race": "asian",
                "frame_ref": "frames/s01/s01-01/000123.png",
                "grid": {"row": 2, "col": 3},
                "timestamp_s": 4.6,
            }
        },
    )

    @property
    def key(self) -> Tuple[str, str, str]:
        return (self.subject_id, self.session_id, self.frame_ref)


class Corpus(BaseModel):
    """Ordered labelled records plus the geometry they refer to.

    ``source`` supplies pixels and detector candidates for each record (see
    ``src.dataset.frames``); it is not part of the corpus identity.
    """

    geometry: ScreenGeometry = Field(default_factory=ScreenGeometry)
    records: List[SampleRecord]
    provenance: Provenance
    root: Optional[Path] = None
    source: Optional[Any] = Field(None, exclude=True, repr=False)
    generator: Optional[dict] = Field(None, description="Synthetic generator parameters")

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    @model_validator(mode="after")
    def _check_records(self) -> "Corpus":
        if not self.records:
            raise ValueError("corpus must contain at least one record")
        seen = set()
        postures: Dict[Tuple[str, str], Posture] = {}
        for i, record in enumerate(self.records):
            record.grid.check(self.geometry)
            if record.key in seen:
                raise ValueError(f"duplicate record {record.key} at position {i}")
            seen.add(record.key)
            sess = (record.subject_id, record.session_id)
            if postures.setdefault(sess, record.posture) != record.posture:
                raise ValueError(f"posture changes within session {sess}")
        return self

    @property
    def subjects(self) -> List[str]:
        """Subject ids in first-appearance order."""
        return list(dict.fromkeys(r.subject_id for r in self.records))

    def sessions(self, subject_id: Optional[str] = None) -> List[Tuple[str, str]]:
        """(subject, session) pairs in first-appearance order."""
        pairs = ((r.subject_id, r.session_id) for r in self.records)
        return [
            p for p in dict.fromkeys(pairs) if subject_id is None or p[0] == subject_id
        ]

    def subject_meta(self, subject_id: str) -> SampleRecord:
        """First record of a subject (carries glasses and race)."""
        for record in self.records:
            if record.subject_id == subject_id:
                return record
        raise KeyError(subject_id)

    def subset(self, subjects: List[str]) -> "Corpus":
        """Corpus restricted to the given subjects, record order kept."""
        wanted = set(subjects)
        return self.model_copy(
            update={"records": [r for r in self.records if r.subject_id in wanted]}
        )

    def manifest_rows(self) -> List[dict]:
        """Rows in manifest CSV layout."""
        return [
            {
                "subject_id": r.subject_id,
                "session_id": r.session_id,
                "posture": r.posture.value,
                "glasses": int(r.glasses),
                "race": r.race.value,
                "frame_path": r.frame_ref,
                "grid_row": r.grid.row,
                "grid_col": r.grid.col,
                "timestamp_s": r.timestamp_s,
            }
            for r in self.records
        ]

    def fingerprint(self) -> str:
        """Content hash of geometry, records, and (synthetic) generator parameters."""
        return fingerprint(
            {
                "geometry": self.geometry.model_dump(),
                "records": self.manifest_rows(),
                "provenance": self.provenance.value,
                "generator": self.generator,
            }
        )
