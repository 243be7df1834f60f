"""Unit tests for appearance descriptors, feature dumps and feature tables."""

import dataclasses
import math

import numpy as np
import pandas as pd
import pytest
from pydantic import ValidationError

from src.dataset.manifest import open_corpus, write_corpus
from src.dataset.synthetic import synth_generate
from src.features.dump import read_dump, write_dump
from src.features.extract import extract, extract_augmented, feature_length
from src.features.hog import (
    cell_histograms,
    hog_descriptor,
    normalize_block,
    orientation_votes,
)
from src.features.intensity import standardize
from src.features.lbp import UNIFORM_LUT, lbp_codes, lbp_histograms, transitions
from src.features.mhog import l1_normalize, level_cells, mhog_descriptor, mhog_layout
from src.features.models import (
    Descriptor,
    FeatureError,
    FeatureSpec,
    FeatureVector,
    HogSpec,
    parse_descriptor,
)
from src.features.table import build_feature_table, read_table, table_key, write_table
from src.eyes.localize import eye_geometry_feature
from src.reduction.model import fit_reduction
from src.utils.config import EyesConfig


def _stripes() -> np.ndarray:
    """30x100 vertical stripes, 2 px dark / 2 px bright."""
    row = np.where((np.arange(100) // 2) % 2 == 0, 0.2, 0.8)
    return np.tile(row, (30, 1))


class TestFeatureModels:
    """Test descriptor tags and parameter validation."""

    def test_parse_descriptor(self):
        """Tags resolve; unknown tags raise FeatureError."""
        assert parse_descriptor("mhog") == Descriptor.MHOG
        with pytest.raises(FeatureError, match="sift"):
            parse_descriptor("sift")

    def test_hog_lengths(self):
        """Default HoG and mHoG lengths per eye."""
        spec = HogSpec()
        assert spec.hog_length == 2 * 9 * 4 * 9
        assert spec.mhog_length == 80 * 9

    def test_cell_grid_must_tile(self):
        """Cell grids must divide the 30x100 crop."""
        with pytest.raises(ValidationError):
            HogSpec(cell_grid=(4, 10))
        with pytest.raises(ValidationError):
            HogSpec(levels=[(1, 1), (7, 10)])

    def test_unknown_block_norm(self):
        """Only l2 and l2hys are known."""
        with pytest.raises(ValidationError):
            HogSpec(block_norm="l1")

    def test_vector_rejects_nan(self):
        """Non-finite values are refused."""
        with pytest.raises(FeatureError):
            FeatureVector(Descriptor.HOG, np.array([1.0, np.nan]))

    def test_vector_read_only(self):
        """Vector values cannot be modified."""
        vector = FeatureVector(Descriptor.HOG, np.zeros(3), {"all": (0, 3)})
        with pytest.raises(ValueError):
            vector.values[0] = 1.0
        assert len(vector.block("all")) == 3


class TestDescriptors:
    """Test each descriptor on synthetic eye crops and hand-made patterns."""

    @pytest.mark.parametrize(
        "tag,length",
        [("intensity", 6000), ("log", 6000), ("lbp", 3540), ("hog", 1296), ("mhog", 1440)],
    )
    def test_lengths(self, eye_pair, tag, length):
        """Extracted lengths match feature_length for every descriptor."""
        vector = extract(eye_pair, tag)
        assert feature_length(tag) == length
        assert len(vector) == length
        assert vector.layout["left"] == (0, length // 2)

    def test_extraction_deterministic(self, eye_pair):
        """The same pair always gives the same vector."""
        a = extract(eye_pair, "mhog").values
        b = extract(eye_pair, "mhog").values
        assert np.array_equal(a, b)

    def test_standardize(self):
        """Intensities get zero mean and unit variance; flat patches give zeros."""
        values = standardize(np.random.default_rng(0).uniform(size=(30, 100)))
        assert values.mean() == pytest.approx(0.0, abs=1e-12)
        assert values.std() == pytest.approx(1.0)
        assert np.array_equal(standardize(np.full((30, 100), 0.4)), np.zeros(3000))

    def test_stripe_votes_split_between_end_bins(self):
        """Horizontal gradients split their votes between bins 0 and 8."""
        votes = orientation_votes(_stripes())
        totals = votes.sum(axis=(1, 2))
        assert totals[0] > 0
        assert totals[0] == pytest.approx(totals[8])
        assert np.allclose(totals[1:8], 0.0)

    def test_cell_histograms_shape(self):
        """Cells are laid out (rows, cols, bins)."""
        assert cell_histograms(_stripes()).shape == (3, 10, 9)

    def test_block_normalisation(self):
        """L2-Hys blocks have unit norm; zero blocks stay zero."""
        spec = HogSpec()
        block = normalize_block(np.array([4.0, 0.1, 0.1, 0.1]), spec)
        assert np.linalg.norm(block) == pytest.approx(1.0)
        assert block.max() < 1.0
        assert np.array_equal(normalize_block(np.zeros(4), spec), np.zeros(4))

    def test_hog_of_flat_image(self):
        """A flat crop has no gradients."""
        assert np.array_equal(hog_descriptor(np.full((30, 100), 0.5)), np.zeros(648))

    def test_hog_blocks_unit_norm(self):
        """Every 36-value block of a textured crop has unit norm."""
        values = hog_descriptor(np.random.default_rng(1).uniform(size=(30, 100)))
        norms = np.linalg.norm(values.reshape(-1, 36), axis=1)
        assert np.allclose(norms, 1.0)

    def test_mhog_finest_level_matches_cell_histograms(self):
        """The 6x10 level equals L1-normalised 6x10 HoG cells."""
        pixels = np.random.default_rng(2).uniform(size=(30, 100))
        values = mhog_descriptor(pixels)
        assert values.shape == (720,)
        cells = cell_histograms(pixels, HogSpec(cell_grid=(6, 10))).reshape(60, 9)
        expected = np.concatenate([l1_normalize(c) for c in cells])
        assert np.allclose(values[180:], expected)

    def test_mhog_coarsest_level_is_global_histogram(self):
        """The 1x1 level is the normalised histogram of all votes."""
        pixels = np.random.default_rng(3).uniform(size=(30, 100))
        total = orientation_votes(pixels).sum(axis=(1, 2))
        assert np.allclose(mhog_descriptor(pixels)[:9], total / total.sum())

    def test_mhog_cells_l1_normalised(self):
        """Every mHoG cell sums to one on a textured crop."""
        values = mhog_descriptor(np.random.default_rng(4).uniform(size=(30, 100)))
        assert np.allclose(values.reshape(-1, 9).sum(axis=1), 1.0)

    def test_mhog_layout(self):
        """Level blocks are recorded for both eyes."""
        layout = mhog_layout(HogSpec())
        assert layout["left"] == (0, 720)
        assert layout["right"] == (720, 1440)
        assert layout["left:6x10"] == (180, 720)
        assert layout["right:1x1"] == (720, 729)
        assert len(level_cells(HogSpec(), (3, 5))) == 15

    def test_uniform_patterns(self):
        """There are 58 uniform codes; everything else shares label 58."""
        assert transitions(0) == 0
        assert transitions(0b00001111) == 2
        assert transitions(0b01010101) == 8
        assert len(set(UNIFORM_LUT[UNIFORM_LUT < 58].tolist())) == 58
        assert UNIFORM_LUT[255] == 57
        assert UNIFORM_LUT[0b01010101] == 58

    def test_lbp_of_flat_image(self):
        """A flat crop has code 0 everywhere."""
        pixels = np.full((30, 100), 0.5)
        assert not lbp_codes(pixels).any()
        hist = lbp_histograms(pixels)
        assert hist.shape == (30, 59)
        assert np.allclose(hist[:, 0], 1.0)

    def test_lbp_histograms_normalised(self):
        """Each cell histogram sums to one."""
        hist = lbp_histograms(np.random.default_rng(5).uniform(size=(30, 100)))
        assert np.allclose(hist.sum(axis=1), 1.0)

    def test_augmented_vector(self, small_table, eye_pair):
        """Geometry follows the reduced descriptor."""
        reduction = fit_reduction(small_table.features, small_table.labels)
        geometry = eye_geometry_feature(eye_pair.left_box, eye_pair.right_box)
        vector = extract_augmented(eye_pair, geometry, "mhog", reduction)
        assert len(vector) == reduction.output_dim + 10
        assert np.array_equal(vector.block("geometry"), geometry.as_array())


def _naive_votes(pixels: np.ndarray, bins: int = 9) -> list:
    """Per-pixel (row, col, bin, weight) votes, one pixel at a time."""
    h, w = pixels.shape
    votes = []
    width = math.pi / bins
    for y in range(h):
        for x in range(w):
            gx = pixels[y, min(x + 1, w - 1)] - pixels[y, max(x - 1, 0)]
            gy = pixels[min(y + 1, h - 1), x] - pixels[max(y - 1, 0), x]
            magnitude = math.hypot(gx, gy)
            theta = math.atan2(gy, gx) % math.pi
            pos = theta / width - 0.5
            lower = math.floor(pos)
            frac = pos - lower
            votes.append((y, x, lower % bins, (1.0 - frac) * magnitude))
            votes.append((y, x, (lower + 1) % bins, frac * magnitude))
    return votes


def _naive_hog(pixels: np.ndarray) -> np.ndarray:
    """9-bin HoG on 3x10 cells, 2x2-cell L2-Hys blocks, built with plain loops."""
    ch, cw = pixels.shape[0] // 3, pixels.shape[1] // 10
    cells = np.zeros((3, 10, 9))
    for y, x, b, weight in _naive_votes(pixels):
        cells[y // ch, x // cw, b] += weight
    out = []
    for r in range(2):
        for c in range(9):
            block = [cells[r + i, c + j, b] for i in range(2) for j in range(2) for b in range(9)]
            norm = math.sqrt(sum(v * v for v in block) + 1e-20)
            block = [min(v / norm, 0.2) for v in block]
            norm = math.sqrt(sum(v * v for v in block) + 1e-20)
            out.extend(v / norm for v in block)
    return np.array(out)


def _naive_lbp(pixels: np.ndarray) -> np.ndarray:
    """Uniform-LBP cell histograms (3x10 cells, 59 labels), built with plain loops."""
    offsets = [(-1, -1), (-1, 0), (-1, 1), (0, 1), (1, 1), (1, 0), (1, -1), (0, -1)]

    def is_uniform(code):
        bits = [(code >> k) & 1 for k in range(8)]
        return sum(bits[k] != bits[(k + 1) % 8] for k in range(8)) <= 2

    uniform = [code for code in range(256) if is_uniform(code)]
    label = {code: uniform.index(code) if code in uniform else 58 for code in range(256)}
    h, w = pixels.shape
    ch, cw = h // 3, w // 10
    hist = np.zeros((30, 59))
    for y in range(1, h - 1):
        for x in range(1, w - 1):
            code = 0
            for k, (dy, dx) in enumerate(offsets):
                if pixels[y + dy, x + dx] > pixels[y, x]:
                    code |= 1 << k
            hist[(y // ch) * 10 + x // cw, label[code]] += 1
    return hist / hist.sum(axis=1, keepdims=True)


def _direct_mhog(pixels: np.ndarray, levels) -> np.ndarray:
    """mHoG by summing the votes inside every cell directly."""
    padded = np.pad(pixels, 1, mode="edge")
    gx = padded[1:-1, 2:] - padded[1:-1, :-2]
    gy = padded[2:, 1:-1] - padded[:-2, 1:-1]
    magnitude = np.hypot(gx, gy)
    pos = np.mod(np.arctan2(gy, gx), np.pi) / (np.pi / 9) - 0.5
    lower = np.floor(pos)
    frac = pos - lower
    lower = lower.astype(int) % 9
    upper = (lower + 1) % 9
    planes = np.stack(
        [
            np.where(lower == b, (1.0 - frac) * magnitude, 0.0)
            + np.where(upper == b, frac * magnitude, 0.0)
            for b in range(9)
        ]
    )
    h, w = pixels.shape
    parts = []
    for rows, cols in levels:
        ch, cw = h // rows, w // cols
        for r in range(rows):
            for c in range(cols):
                hist = planes[:, r * ch : (r + 1) * ch, c * cw : (c + 1) * cw].sum(axis=(1, 2))
                parts.append(hist / hist.sum() if hist.sum() > 0 else hist)
    return np.concatenate(parts)


class TestDescriptorReferences:
    """Test descriptors against plain per-pixel reimplementations."""

    @pytest.fixture(scope="class")
    def crops(self):
        """A few random 30x100 crops."""
        rng = np.random.default_rng(21)
        return [rng.uniform(size=(30, 100)) for _ in range(3)]

    def test_hog_matches_pixel_loop(self, crops):
        """HoG equals a loop over pixels, cells and blocks."""
        for pixels in crops:
            assert np.allclose(hog_descriptor(pixels), _naive_hog(pixels), rtol=0, atol=1e-12)

    def test_hog_matches_pixel_loop_on_stripes(self):
        """A striped crop with orientations on bin boundaries agrees too."""
        pixels = _stripes()
        assert np.allclose(hog_descriptor(pixels), _naive_hog(pixels), rtol=0, atol=1e-12)

    def test_lbp_matches_pixel_loop(self, crops):
        """LBP histograms equal a loop over interior pixels and neighbours."""
        for pixels in crops:
            assert np.allclose(lbp_histograms(pixels), _naive_lbp(pixels), rtol=0, atol=1e-15)

    def test_mhog_matches_direct_cell_sums(self):
        """Integral-histogram mHoG equals direct cell sums on a thousand crops."""
        rng = np.random.default_rng(22)
        levels = HogSpec().levels
        worst = 0.0
        for _ in range(1000):
            pixels = rng.uniform(size=(30, 100))
            diff = np.abs(mhog_descriptor(pixels) - _direct_mhog(pixels, levels))
            worst = max(worst, float(diff.max()))
        assert worst <= 1e-9


class TestFeatureDump:
    """Test the binary feature dump."""

    def test_write_read(self, tmp_path):
        """Headers gain count, dim and version; values come back as float32."""
        values = np.random.default_rng(0).normal(size=(4, 7))
        path = write_dump(tmp_path / "f.gzf", {"descriptor": "hog"}, values)
        header, back = read_dump(path)
        assert header["count"] == 4
        assert header["dim"] == 7
        assert header["version"] == 1
        assert header["descriptor"] == "hog"
        assert np.allclose(back, values.astype(np.float32))

    def test_empty_dump(self, tmp_path):
        """Zero rows are allowed."""
        path = write_dump(tmp_path / "f.gzf", {}, np.zeros((0, 5)))
        header, back = read_dump(path)
        assert back.shape == (0, 5)

    def test_bad_magic(self, tmp_path):
        """Files without the magic are refused."""
        path = tmp_path / "f.gzf"
        path.write_bytes(b"NOPE" + b"\x00" * 20)
        with pytest.raises(FeatureError, match="not a feature dump"):
            read_dump(path)

    def test_truncated(self, tmp_path):
        """Missing value bytes are detected."""
        path = write_dump(tmp_path / "f.gzf", {}, np.ones((3, 3)))
        path.write_bytes(path.read_bytes()[:-4])
        with pytest.raises(FeatureError, match="value bytes"):
            read_dump(path)

    def test_version_mismatch(self, tmp_path):
        """Dumps from another format version are refused."""
        path = write_dump(tmp_path / "f.gzf", {}, np.ones((1, 1)))
        path.write_bytes(path.read_bytes().replace(b'"version":1', b'"version":9'))
        with pytest.raises(FeatureError, match="version 9"):
            read_dump(path)

    def test_missing_file(self, tmp_path):
        """Unreadable files raise FeatureError."""
        with pytest.raises(FeatureError):
            read_dump(tmp_path / "absent.gzf")


class TestFeatureTable:
    """Test corpus-wide feature extraction."""

    def test_rows_accounted_for(self, small_corpus, small_table):
        """Every frame is either a row, a detector failure or a blink."""
        report = small_table.exclusions
        assert report.detector_failures == 0
        assert len(small_table) + report.blink_frames == len(small_corpus.records)
        assert small_table.dim == 1440
        assert small_table.eye_geometry.shape == (len(small_table), 10)
        assert small_table.subject_ids() == ["s01", "s02", "s03", "s04"]

    def test_targets(self, small_table):
        """Targets are the dot positions of the labels."""
        row = int(np.flatnonzero(small_table.labels == 17)[0])
        assert small_table.targets[row] == pytest.approx((11.31, 7.07))

    def test_row_filters(self, small_table):
        """Subject and session filters select the matching rows."""
        rows = small_table.rows(subjects=["s02"])
        assert set(small_table.subjects[rows]) == {"s02"}
        others = small_table.rows(exclude_subjects=["s02"])
        assert len(rows) + len(others) == len(small_table)
        one = small_table.rows(sessions=[("s02", "s02-01")])
        assert set(small_table.sessions[one]) == {"s02-01"}
        rest = small_table.rows(subjects=["s02"], exclude_sessions=[("s02", "s02-01")])
        assert set(small_table.sessions[rest]) == {"s02-02"}

    def test_jobs_do_not_change_result(self, tiny_corpus):
        """Parallel extraction gives the same table."""
        a = build_feature_table(tiny_corpus, "hog", jobs=1)
        b = build_feature_table(tiny_corpus, "hog", jobs=3)
        assert np.array_equal(a.features, b.features)
        assert a.frame_refs == b.frame_refs

    def test_subject_without_detections_excluded(self, tiny_corpus):
        """A subject whose boxes are never usable is excluded and reported."""
        source = tiny_corpus.source
        real = source.candidates

        class NoEyesForS02:
            def load(self, record):
                return source.load(record)

            def candidates(self, record, frame):
                return [] if record.subject_id == "s02" else real(record, frame)

        corpus = tiny_corpus.model_copy(update={"source": NoEyesForS02()})
        table = build_feature_table(corpus, "hog")
        assert table.exclusions.excluded_subjects == ["s02"]
        assert table.exclusions.detector_failures == 35
        assert table.subject_ids() == ["s01"]

    def test_nothing_usable(self, tiny_corpus):
        """A corpus without any eye pair raises FeatureError."""
        source = tiny_corpus.source

        class NoEyes:
            def load(self, record):
                return source.load(record)

            def candidates(self, record, frame):
                return []

        with pytest.raises(FeatureError, match="no usable frame"):
            build_feature_table(tiny_corpus.model_copy(update={"source": NoEyes()}), "hog")

    def test_write_read_table(self, small_table, tmp_path):
        """Tables survive the dump round trip with their metadata."""
        path = write_table(small_table, tmp_path / "t.gzf")
        back = read_table(path)
        assert np.array_equal(back.features, small_table.features)
        assert np.array_equal(back.labels, small_table.labels)
        assert back.frame_refs == small_table.frame_refs
        assert back.layout == small_table.layout
        assert back.fingerprint == small_table.fingerprint

    def test_cache_reused(self, tiny_corpus, tmp_path):
        """A second build with the same inputs reads the cached dump."""
        first = build_feature_table(tiny_corpus, "lbp", cache_dir=tmp_path)
        cached = list(tmp_path.glob("*.gzf"))
        assert len(cached) == 1
        assert cached[0].name.startswith(
            table_key(tiny_corpus, FeatureSpec(descriptor="lbp"), EyesConfig())[:32]
        )
        second = build_feature_table(tiny_corpus, "lbp", cache_dir=tmp_path)
        assert np.array_equal(first.features, second.features)

    def test_cache_key_follows_box_source(self, tiny_corpus, tmp_path):
        """Other annotation boxes or another detector give another cache key."""
        corpus_dir = tmp_path / "corpus"
        write_corpus(tiny_corpus, corpus_dir)
        spec, eyes = FeatureSpec(descriptor="lbp"), EyesConfig()
        base = table_key(open_corpus(corpus_dir), spec, eyes)
        assert table_key(open_corpus(corpus_dir), spec, eyes) == base

        boxes = pd.read_csv(corpus_dir / "annotations.csv")
        boxes["x"] = boxes["x"] + 1
        shifted = tmp_path / "shifted.csv"
        boxes.to_csv(shifted, index=False)
        moved = table_key(open_corpus(corpus_dir, annotations=shifted), spec, eyes)
        assert moved != base

        detected = table_key(open_corpus(corpus_dir, detector="cmd:eyes-detect"), spec, eyes)
        other = table_key(open_corpus(corpus_dir, detector="cmd:eyes-detect --fast"), spec, eyes)
        assert len({base, moved, detected, other}) == 4

    def test_dataclass_replace_keeps_types(self, small_table):
        """Tables can be narrowed with dataclasses.replace."""
        rows = small_table.rows(subjects=["s01"])
        narrowed = dataclasses.replace(
            small_table,
            features=small_table.features[rows],
            eye_geometry=small_table.eye_geometry[rows],
            labels=small_table.labels[rows],
            subjects=small_table.subjects[rows],
            sessions=small_table.sessions[rows],
            frame_refs=[small_table.frame_refs[i] for i in rows],
        )
        assert narrowed.subject_ids() == ["s01"]


def test_glare_changes_only_glasses_subjects():
    """Glare noise is applied to subjects wearing glasses."""
    clean = synth_generate(2, seed=8, frames_per_point=1)
    glare = synth_generate(2, seed=8, frames_per_point=1, glare=0.05)
    s01 = clean.records[0]
    s02 = next(r for r in clean.records if r.subject_id == "s02")
    assert clean.source.load(s01) == glare.source.load(s01)
    assert not (clean.source.load(s02) == glare.source.load(s02))
