from __future__ import annotations

import json

import numpy as np
import pytest

from gapsolver.pieces import (
    EMPTY_SLOT_GRAY,
    PieceImage,
    PuzzleBundle,
    Solution,
    erode,
    erosion_width_for,
    load_bundle,
    load_solution,
    quantize_image,
    render,
    save_bundle,
    save_solution,
    shuffle,
    slice_image,
)
from gapsolver.placement import Board


def checker_image(rows: int, cols: int, s: int = 64) -> np.ndarray:
    """Image whose pieces are solid, distinct colors; easy to track."""
    rng = np.random.default_rng(99)
    colors = rng.integers(0, 256, size=(rows * cols, 3), dtype=np.uint8)
    img = np.zeros((rows * s, cols * s, 3), dtype=np.uint8)
    for i, color in enumerate(colors):
        r, c = divmod(i, cols)
        img[r * s : (r + 1) * s, c * s : (c + 1) * s] = color
    return img


class TestQuantize:
    def test_uint8_maps_to_unit_range(self):
        arr = np.array([[[0, 128, 255]]], dtype=np.uint8)
        out = quantize_image(arr)
        assert out.dtype == np.float32
        assert out[0, 0, 0] == 0.0
        assert out[0, 0, 2] == 1.0
        assert abs(out[0, 0, 1] - 128 / 255) < 1e-7

    def test_floats_snap_to_8bit_grid(self):
        arr = np.full((2, 2, 3), 0.5000001, dtype=np.float64)
        out = quantize_image(arr)
        assert np.all(out == np.float32(np.round(0.5000001 * 255) / 255))

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            quantize_image(np.full((2, 2, 3), 1.5, dtype=np.float32))

    def test_wrong_shape_rejected(self):
        with pytest.raises(ValueError):
            quantize_image(np.zeros((4, 4), dtype=np.uint8))


class TestSliceImage:
    def test_grid_shape_and_row_major_ids(self):
        bundle, solution = slice_image(checker_image(2, 3), 64)
        assert (bundle.rows, bundle.cols, bundle.n_pieces) == (2, 3, 6)
        for pid in range(6):
            assert solution[pid] == (pid // 3, pid % 3)

    def test_margins_discarded(self):
        img = checker_image(2, 2)
        padded = np.pad(img, ((0, 30), (0, 17), (0, 0)))
        bundle, _ = slice_image(padded, 64)
        assert (bundle.rows, bundle.cols) == (2, 2)
        assert np.array_equal(bundle.piece(0).pixels, quantize_image(img[:64, :64]))

    def test_pieces_are_pristine(self):
        bundle, _ = slice_image(checker_image(2, 2), 64)
        assert bundle.erosion_width == 0
        assert all(bundle.piece(i).valid.all() for i in range(4))

    def test_too_small_image_rejected(self):
        with pytest.raises(ValueError):
            slice_image(np.zeros((32, 100, 3), dtype=np.uint8), 64)


class TestErode:
    def test_seven_percent_invalidates_960_pixels(self):
        bundle, _ = slice_image(checker_image(2, 2), 64)
        eroded = erode(bundle, 0.07)
        piece = eroded.piece(0)
        assert eroded.erosion_width == 4
        assert int((~piece.valid).sum()) == 960
        assert piece.valid[4:60, 4:60].all()
        assert not piece.valid[:4].any() and not piece.valid[-4:].any()
        assert np.all(piece.pixels[~piece.valid] == 0.0)

    def test_fourteen_percent_keeps_48x48_interior(self):
        bundle, _ = slice_image(checker_image(2, 2), 64)
        eroded = erode(bundle, 0.14)
        assert eroded.erosion_width == 8
        assert int(eroded.piece(1).valid.sum()) == 48 * 48

    def test_zero_erosion_is_identity_on_validity(self):
        bundle, _ = slice_image(checker_image(2, 2), 64)
        assert erode(bundle, 0.0).erosion_width == 0

    def test_double_erosion_rejected(self):
        bundle, _ = slice_image(checker_image(2, 2), 64)
        with pytest.raises(ValueError, match="already eroded"):
            erode(erode(bundle, 0.07), 0.07)

    def test_original_bundle_unchanged(self):
        bundle, _ = slice_image(checker_image(2, 2), 64)
        erode(bundle, 0.14)
        assert bundle.piece(0).valid.all()

    def test_width_helper_truncates(self):
        assert erosion_width_for(64, 0.07) == 4
        assert erosion_width_for(64, 0.14) == 8
        assert erosion_width_for(64, 0.0) == 0
        with pytest.raises(ValueError):
            erosion_width_for(64, 0.5)


class TestShuffle:
    def test_permutation_is_deterministic(self):
        bundle, solution = slice_image(checker_image(2, 3), 64)
        a1, s1 = shuffle(bundle, 11, solution)
        a2, s2 = shuffle(bundle, 11, solution)
        assert s1 == s2
        for i in range(6):
            assert np.array_equal(a1.piece(i).pixels, a2.piece(i).pixels)

    def test_solution_tracks_pixels(self):
        img = checker_image(2, 3)
        bundle, solution = slice_image(img, 64)
        shuffled, new_solution = shuffle(bundle, 3, solution)
        for pid in range(6):
            r, c = new_solution[pid]
            expected = quantize_image(img[r * 64 : r * 64 + 64, c * 64 : c * 64 + 64])
            assert np.array_equal(shuffled.piece(pid).pixels, expected)

    def test_different_seeds_differ(self):
        bundle, solution = slice_image(checker_image(3, 3), 64)
        _, s1 = shuffle(bundle, 0, solution)
        _, s2 = shuffle(bundle, 1, solution)
        assert s1 != s2

    def test_erosion_metadata_carried(self):
        bundle, solution = slice_image(checker_image(2, 2), 64)
        shuffled, _ = shuffle(erode(bundle, 0.07), 4, solution)
        assert shuffled.erosion_width == 4
        assert shuffled.shuffled


class TestSolution:
    def test_requires_full_grid_bijection(self):
        with pytest.raises(ValueError):
            Solution({0: (0, 0), 1: (0, 0)})
        with pytest.raises(ValueError):
            Solution({0: (0, 0), 1: (0, 2)})

    def test_neighbor_lookup(self):
        solution = Solution({0: (0, 0), 1: (0, 1), 2: (1, 0), 3: (1, 1)})
        assert solution.neighbor(0, (0, 1)) == 1
        assert solution.neighbor(0, (1, 0)) == 2
        assert solution.neighbor(3, (0, 1)) is None
        assert solution.piece_at((1, 1)) == 3
        assert solution.piece_at((9, 9)) is None


class TestRender:
    def test_ground_truth_render_reassembles_image(self):
        img = checker_image(2, 3)
        bundle, solution = slice_image(img, 64)
        board = Board((2, 3))
        for pid, slot in solution.items():
            board.place(pid, slot)
        out = render(board, bundle)
        assert out.shape == (128, 192, 3)
        assert np.array_equal(out, quantize_image(img))

    def test_empty_slots_gray_and_invalid_black(self):
        bundle, solution = slice_image(checker_image(2, 2), 64)
        eroded = erode(bundle, 0.07)
        board = Board((2, 2))
        board.place(0, (0, 0))
        out = render(board, eroded)
        assert np.all(out[:4, :4] == 0.0)  # eroded corner of the placed piece
        assert np.all(out[:, 64:] == EMPTY_SLOT_GRAY)

    def test_out_of_frame_slot_rejected(self):
        bundle, _ = slice_image(checker_image(2, 2), 64)
        board = Board()
        board.place(0, (5, 5))
        board.place(1, (0, 0))
        board.place(2, (0, 1))
        board.place(3, (1, 0))
        with pytest.raises(ValueError):
            render(board, bundle)


class TestBundleRoundTrip:
    def test_save_load_is_field_exact(self, tmp_path):
        bundle, solution = slice_image(checker_image(2, 3), 64)
        eroded = erode(bundle, 0.07)
        shuffled, new_solution = shuffle(eroded, 21, solution)
        out = tmp_path / "puzzle"
        save_bundle(shuffled, out, seed=21)
        loaded = load_bundle(out)
        assert (loaded.rows, loaded.cols) == (2, 3)
        assert loaded.piece_size == 64
        assert loaded.erosion_width == 4
        assert loaded.shuffled
        for i in range(6):
            assert np.array_equal(loaded.piece(i).pixels, shuffled.piece(i).pixels)
            assert np.array_equal(loaded.piece(i).valid, shuffled.piece(i).valid)

    def test_solution_round_trip(self, tmp_path):
        _, solution = slice_image(checker_image(2, 2), 64)
        save_solution(solution, tmp_path / "solution.json")
        assert load_solution(tmp_path / "solution.json") == solution

    def test_missing_piece_file_named_in_error(self, tmp_path):
        bundle, _ = slice_image(checker_image(2, 2), 64)
        out = tmp_path / "puzzle"
        save_bundle(bundle, out)
        (out / "piece_0002.png").unlink()
        with pytest.raises(FileNotFoundError, match="2"):
            load_bundle(out)

    def test_corrupt_manifest_rejected(self, tmp_path):
        bundle, _ = slice_image(checker_image(2, 2), 64)
        out = tmp_path / "puzzle"
        save_bundle(bundle, out)
        (out / "manifest.json").write_text("{not json")
        with pytest.raises(ValueError):
            load_bundle(out)

    def test_dimension_mismatch_rejected(self, tmp_path):
        bundle, _ = slice_image(checker_image(2, 2), 64)
        out = tmp_path / "puzzle"
        save_bundle(bundle, out)
        manifest = json.loads((out / "manifest.json").read_text())
        manifest["rows"] = 3
        (out / "manifest.json").write_text(json.dumps(manifest))
        with pytest.raises(ValueError):
            load_bundle(out)

    def test_manifest_records_seed_and_version(self, tmp_path):
        bundle, _ = slice_image(checker_image(2, 2), 64)
        out = tmp_path / "puzzle"
        save_bundle(bundle, out, seed=77)
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["seed"] == 77
        assert manifest["tool_version"]


class TestBundleValidation:
    def test_count_must_match_grid(self):
        pieces = [
            PieceImage(i, np.zeros((8, 8, 3), np.float32), np.ones((8, 8), bool))
            for i in range(3)
        ]
        with pytest.raises(ValueError):
            PuzzleBundle(pieces, piece_size=8, rows=2, cols=2)

    def test_piece_shape_checked(self):
        pieces = [
            PieceImage(0, np.zeros((8, 8, 3), np.float32), np.ones((8, 8), bool)),
            PieceImage(1, np.zeros((4, 4, 3), np.float32), np.ones((4, 4), bool)),
        ]
        with pytest.raises(ValueError):
            PuzzleBundle(pieces, piece_size=8, rows=1, cols=2)
