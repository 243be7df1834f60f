"""Blink detection on a session's mean eye-intensity series."""

from dataclasses import dataclass, field
from typing import FrozenSet, Iterator, List, Optional, Sequence

import numpy as np

from src.utils import constants
from src.utils.logging import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True)
class Blink:
    """A detected blink: the peak frame and the frames to skip around it."""

    peak_index: int
    skip_set: FrozenSet[int]


@dataclass(frozen=True)
class BlinkReport:
    """Blinks found in one series, plus a warning when detection could not run."""

    blinks: List[Blink] = field(default_factory=list)
    warning: Optional[str] = None

    def __iter__(self) -> Iterator[Blink]:
        return iter(self.blinks)

    def __len__(self) -> int:
        return len(self.blinks)

    @property
    def skipped(self) -> FrozenSet[int]:
        """Union of all skip sets."""
        out: set = set()
        for blink in self.blinks:
            out |= blink.skip_set
        return frozenset(out)


def skip_window(peak: int, length: int, skip: int = constants.BLINK_SKIP) -> FrozenSet[int]:
    """Frames p - skip/2 .. p + skip/2 - 1, clipped to the series."""
    start = peak - skip // 2
    return frozenset(i for i in range(start, start + skip) if 0 <= i < length)


def detect_blinks(
    mean_series: Sequence[float],
    window: int = constants.BLINK_WINDOW,
    skip: int = constants.BLINK_SKIP,
    sigma_factor: float = constants.BLINK_SIGMA_FACTOR,
    min_rise: float = constants.BLINK_MIN_RISE,
) -> BlinkReport:
    """
    Find blink peaks in a per-frame mean intensity series.

    Each frame is compared with the mean of the ``window`` frames before it (the
    first ``window`` frames share the opening window). A frame is over threshold
    when it exceeds that baseline by more than max(sigma_factor * std, min_rise).
    Every run of consecutive over-threshold frames yields one peak at its maximum;
    a flat top resolves to its centre.

    Args:
        mean_series: Mean intensity per frame, in temporal order
        window: Baseline length in frames
        skip: Frames removed around each peak
        sigma_factor: Threshold in baseline standard deviations
        min_rise: Absolute floor on the threshold (intensity units)

    Returns:
        BlinkReport; empty with a warning when the series is shorter than ``window``
    """
    x = np.asarray(mean_series, dtype=np.float64)
    n = len(x)
    if n < window:
        msg = f"series of {n} frames is shorter than the {window}-frame baseline"
        logger.warning("blink_series_too_short", frames=n, window=window)
        return BlinkReport(warning=msg)

    over = np.zeros(n, dtype=bool)
    for i in range(n):
        base = x[i - window : i] if i >= window else x[:window]
        tau = max(sigma_factor * base.std(), min_rise)
        over[i] = x[i] - base.mean() > tau

    blinks: List[Blink] = []
    i = 0
    while i < n:
        if not over[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and over[j + 1]:
            j += 1
        run = x[i : j + 1]
        tops = np.flatnonzero(run == run.max())
        peak = i + int(tops[(len(tops) - 1) // 2])
        blinks.append(Blink(peak_index=peak, skip_set=skip_window(peak, n, skip)))
        i = j + 1

    if blinks:
        logger.debug("blinks_detected", peaks=[b.peak_index for b in blinks], frames=n)
    return BlinkReport(blinks=blinks)
