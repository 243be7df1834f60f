"""CSV, JSON and SVG report writers for evaluation results."""

import json
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402
from pydantic import BaseModel, Field  # noqa: E402

from src.evaluation.metrics import center_baseline_error  # noqa: E402
from src.evaluation.partition import PartitionResult  # noqa: E402
from src.evaluation.protocols import (  # noqa: E402
    CrossValidationResult,
    SizeStudyResult,
    SweepResult,
)
from src.features.table import FeatureTable  # noqa: E402
from src.utils import constants  # noqa: E402
from src.utils.logging import get_logger  # noqa: E402

logger = get_logger(__name__)

# RF row order of the published comparison, best first; the last three are unordered
REFERENCE_RF_ORDER = ("mhog", "hog")
REFERENCE_RF_REST = ("lbp", "log", "intensity")


class ReferenceCheck(BaseModel):
    """Comparison of a public-dataset run with the published numbers."""

    mean_error_cm: float
    reference_cm: float = constants.REFERENCE_MHOG_RF_ME_CM
    tolerance_cm: float = constants.REFERENCE_TOLERANCE_CM
    within_tolerance: bool
    ordering_preserved: Optional[bool] = None
    rf_row: Dict[str, float] = Field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.within_tolerance and self.ordering_preserved is not False


def reference_check(
    mhog_rf_me: float, sweep_table: Optional[pd.DataFrame] = None
) -> ReferenceCheck:
    """
    Check a run on the public dataset against the published mean error and RF ordering.

    The ordering holds when mHoG < HoG < every remaining descriptor in the RF row.
    """
    ordering = None
    rf_row: Dict[str, float] = {}
    if sweep_table is not None and "rf" in sweep_table.index:
        rf_row = {str(k): float(v) for k, v in sweep_table.loc["rf"].items()}
        ranked = [rf_row[d] for d in REFERENCE_RF_ORDER if d in rf_row]
        rest = [rf_row[d] for d in REFERENCE_RF_REST if d in rf_row]
        ordering = all(a < b for a, b in zip(ranked, ranked[1:]))
        if ranked and rest:
            ordering = ordering and ranked[-1] < min(rest)
    return ReferenceCheck(
        mean_error_cm=mhog_rf_me,
        within_tolerance=abs(mhog_rf_me - constants.REFERENCE_MHOG_RF_ME_CM)
        <= constants.REFERENCE_TOLERANCE_CM,
        ordering_preserved=ordering,
        rf_row=rf_row,
    )


def write_json(data: Any, path: Path) -> Path:
    """Key-sorted, indented JSON."""
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, sort_keys=True, indent=2) + "\n")
    return path


@contextmanager
def _figure(path: Path, **kwargs: Any) -> Iterator[Any]:
    # fixed hash salt and no date keep reruns byte-identical
    with plt.rc_context({"svg.hashsalt": "gazekit", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(**kwargs)
        try:
            yield ax
            fig.tight_layout()
            fig.savefig(path, format="svg", metadata={"Date": None})
        finally:
            plt.close(fig)


def write_cv_report(
    result: CrossValidationResult,
    table: FeatureTable,
    out_dir: Path,
    name: str,
    meta: Optional[Dict[str, Any]] = None,
) -> List[Path]:
    """Fold CSV, per-image predictions CSV and JSON summary of one cross-validation."""
    out_dir.mkdir(parents=True, exist_ok=True)
    folds = result.folds_frame()
    folds.insert(0, "config_fingerprint", result.report.config_fingerprint)
    folds_path = out_dir / f"{name}_folds.csv"
    folds.to_csv(folds_path, index=False)
    pred_path = out_dir / f"{name}_predictions.csv"
    result.predictions_frame(table).to_csv(pred_path, index=False, float_format="%.6f")
    summary = result.report.model_dump(mode="json")
    summary["skipped_subjects"] = result.skipped
    summary["folds"] = len(result.folds)
    summary["center_baseline_cm"] = center_baseline_error(table.geometry)
    summary.update(meta or {})
    summary_path = write_json(summary, out_dir / f"{name}_summary.json")
    logger.info("cv_report_written", name=name, out_dir=str(out_dir))
    return [folds_path, pred_path, summary_path]


def write_sweep(
    result: SweepResult, out_dir: Path, meta: Optional[Dict[str, Any]] = None
) -> List[Path]:
    """Mean-error table (regressors x descriptors) as CSV, JSON and a grouped bar chart."""
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "sweep.csv"
    result.table.to_csv(csv_path, float_format="%.6f")

    summary = {
        "mean_error_cm": {
            r: {d: float(v) for d, v in row.items()} for r, row in result.table.iterrows()
        },
        "config_fingerprints": {
            f"{r}/{d}": cv.report.config_fingerprint for (r, d), cv in result.results.items()
        },
    }
    summary.update(meta or {})
    json_path = write_json(summary, out_dir / "sweep_summary.json")

    svg_path = out_dir / "sweep.svg"
    with _figure(svg_path, figsize=(7, 4)) as ax:
        descriptors = list(result.table.columns)
        x = np.arange(len(descriptors))
        width = 0.8 / max(1, len(result.table.index))
        for i, (regressor, row) in enumerate(result.table.iterrows()):
            ax.bar(x + i * width, row.values, width, label=regressor)
        ax.set_xticks(x + width * (len(result.table.index) - 1) / 2)
        ax.set_xticklabels(descriptors)
        ax.set_ylabel("mean error (cm)")
        ax.legend()
    return [csv_path, json_path, svg_path]


def write_size_study(
    result: SizeStudyResult, out_dir: Path, meta: Optional[Dict[str, Any]] = None
) -> List[Path]:
    """Error versus group size as CSV, JSON and a line chart on a log x axis."""
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "size_study.csv"
    result.frame().to_csv(csv_path, index=False, float_format="%.6f")
    summary = result.model_dump(mode="json")
    summary.update(meta or {})
    json_path = write_json(summary, out_dir / "size_study.json")

    svg_path = out_dir / "size_study.svg"
    with _figure(svg_path, figsize=(6, 4)) as ax:
        frame = result.frame()
        ax.plot(frame["k"], frame["mean_error_cm"], marker="o")
        ax.set_xscale("log")
        ax.set_xlabel("training subjects")
        ax.set_ylabel("mean error (cm)")
    return [csv_path, json_path, svg_path]


def partition_frame(result: PartitionResult) -> pd.DataFrame:
    """One row per group, one column per experiment."""
    return pd.DataFrame(
        {
            "group": [g.name for g in result.groups],
            "subjects": [len(g.subjects) for g in result.groups],
            "E1": [g.e1_mean_error_cm for g in result.groups],
            "E2": [g.e2_mean_error_cm for g in result.groups],
            "E3": [g.e3_mean_error_cm for g in result.groups],
        }
    )


def write_partition(
    result: PartitionResult, out_dir: Path, meta: Optional[Dict[str, Any]] = None
) -> List[Path]:
    """Per-group errors as CSV, JSON and a grouped bar chart."""
    out_dir.mkdir(parents=True, exist_ok=True)
    frame = partition_frame(result)
    csv_path = out_dir / f"partition_{result.factor.value}.csv"
    frame.to_csv(csv_path, index=False, float_format="%.6f")
    summary = result.model_dump(mode="json")
    summary.update(meta or {})
    json_path = write_json(summary, out_dir / f"partition_{result.factor.value}.json")

    svg_path = out_dir / f"partition_{result.factor.value}.svg"
    with _figure(svg_path, figsize=(7, 4)) as ax:
        x = np.arange(len(frame))
        for i, experiment in enumerate(("E1", "E2", "E3")):
            values = frame[experiment].astype(float).fillna(0.0).values
            ax.bar(x + (i - 1) * 0.25, values, 0.25, label=experiment)
        ax.set_xticks(x)
        ax.set_xticklabels(frame["group"])
        ax.set_ylabel("mean error (cm)")
        ax.set_title(result.factor.value)
        ax.legend()
    return [csv_path, json_path, svg_path]
