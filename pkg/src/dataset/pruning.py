"""Frame pruning inside dot-display chunks."""

from collections import defaultdict
from typing import Dict, List, NamedTuple, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field
from scipy.stats import rankdata

from src.dataset.frames import observe
from src.dataset.geometry import chunk_window, dot_onset
from src.dataset.models import Corpus, ManifestError, SampleRecord
from src.imaging.image import GrayImage
from src.imaging.ops import convolve, log_kernel
from src.utils import constants
from src.utils.logging import get_logger

logger = get_logger(__name__)


class FrameSelection(NamedTuple):
    """Indices picked from a chunk; ``short`` flags a chunk with fewer than k frames."""

    indices: List[int]
    short: bool


class PruneReport(BaseModel):
    """Counts of frames removed by each pruning rule."""

    chunks: int = 0
    input_frames: int = 0
    kept_frames: int = 0
    outside_window: int = 0
    detection_failures: int = 0
    not_selected: int = 0
    short_chunks: List[str] = Field(default_factory=list, description="Chunks with < k frames")


def frame_scores(
    chunk: Sequence[GrayImage],
    log_sigma: float = constants.LOG_SIGMA,
    log_side: int = constants.LOG_SIDE,
) -> np.ndarray:
    """Sum of ranks: darker is better, stronger mean |LoG| is better (lower score wins)."""
    kernel = log_kernel(log_sigma, log_side)
    intensity = np.array([img.pixels.mean() for img in chunk])
    sharpness = np.array([np.abs(convolve(img, kernel)).mean() for img in chunk])
    return rankdata(intensity) + rankdata(-sharpness)


def select_frames(
    chunk: Sequence[GrayImage],
    k: int = constants.FRAMES_PER_CHUNK,
    log_sigma: float = constants.LOG_SIGMA,
    log_side: int = constants.LOG_SIDE,
) -> FrameSelection:
    """
    Pick the k darkest and sharpest frames of a chunk.

    Frames are ranked by ascending mean intensity plus descending mean |LoG|
    response; the k lowest rank sums win, ties broken by frame index.

    Returns:
        FrameSelection with indices in ranking order; ``short`` is set (and all
        indices returned) when the chunk holds fewer than k frames
    """
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    n = len(chunk)
    if n < k:
        logger.warning("chunk_shorter_than_k", frames=n, k=k)
        return FrameSelection(list(range(n)), True)
    scores = frame_scores(chunk, log_sigma, log_side)
    order = sorted(range(n), key=lambda i: (scores[i], i))
    return FrameSelection(order[:k], False)


def chunk_key(record: SampleRecord) -> Tuple[str, str, int, int]:
    """One dot display: subject, session, grid dot."""
    return (record.subject_id, record.session_id, record.grid.row, record.grid.col)


def prune_chunks(
    corpus: Corpus,
    k: int = constants.FRAMES_PER_CHUNK,
    min_box_fraction: float = constants.MIN_BOX_FRACTION,
    symmetry_tolerance: float = constants.SYMMETRY_TOLERANCE,
    log_sigma: float = constants.LOG_SIGMA,
    log_side: int = constants.LOG_SIDE,
) -> Tuple[Corpus, PruneReport]:
    """
    Apply the settling-window, localisation and selection rules per chunk.

    The dot onset of a chunk is the start of the display slot holding its
    earliest frame; frames outside the settling window after it are dropped,
    frames without a usable eye pair are dropped, and ``select_frames`` keeps
    the best k of the rest using the side-by-side eye crops.

    Returns:
        (pruned corpus with original record order kept, report)
    """
    chunks: Dict[Tuple[str, str, int, int], List[SampleRecord]] = defaultdict(list)
    for record in corpus.records:
        chunks[chunk_key(record)].append(record)

    report = PruneReport(chunks=len(chunks), input_frames=len(corpus.records))
    keep = set()
    for key, records in chunks.items():
        start, end = chunk_window(dot_onset(min(r.timestamp_s for r in records)))
        in_window = [r for r in records if start <= r.timestamp_s <= end]
        report.outside_window += len(records) - len(in_window)

        crops: List[GrayImage] = []
        usable: List[SampleRecord] = []
        for record in in_window:
            obs = observe(corpus, record, min_box_fraction, symmetry_tolerance)
            if obs.pair is None:
                report.detection_failures += 1
                continue
            crops.append(obs.pair.side_by_side())
            usable.append(record)

        if not usable:
            continue
        selection = select_frames(crops, k, log_sigma, log_side)
        if selection.short:
            report.short_chunks.append("/".join(str(part) for part in key))
        report.not_selected += len(usable) - len(selection.indices)
        keep.update(usable[i].key for i in selection.indices)

    kept = [r for r in corpus.records if r.key in keep]
    report.kept_frames = len(kept)
    if not kept:
        raise ManifestError("pruning removed every frame", report.model_dump())
    logger.info(
        "corpus_pruned",
        chunks=report.chunks,
        kept=report.kept_frames,
        outside_window=report.outside_window,
        detection_failures=report.detection_failures,
        not_selected=report.not_selected,
    )
    return corpus.model_copy(update={"records": kept}), report
