from __future__ import annotations

import numpy as np
import pytest

from gapsolver.pairs import Direction
from gapsolver.pieces import Solution
from gapsolver.placement import (
    Board,
    GreedyPlacer,
    best_buddies,
    board_edge_cost,
    compatibility,
    place,
)
from gapsolver.scoring import DissimilarityTensor, oracle_dissimilarity
from reference import random_tensor, ref_place, ref_reachable_boards


def grid_solution(rows: int, cols: int) -> Solution:
    return Solution({r * cols + c: (r, c) for r in range(rows) for c in range(cols)})


def board_from(solution: Solution) -> Board:
    board = Board()
    for pid, slot in solution.items():
        board.place(pid, slot)
    return board


class TestBoard:
    def test_place_and_lookup(self):
        board = Board()
        board.place(3, (1, 2))
        assert board.piece_at((1, 2)) == 3
        assert board.slot_of(3) == (1, 2)
        assert board.piece_at((0, 0)) is None

    def test_slot_collision_rejected(self):
        board = Board()
        board.place(0, (0, 0))
        with pytest.raises(ValueError):
            board.place(1, (0, 0))

    def test_piece_collision_rejected(self):
        board = Board()
        board.place(0, (0, 0))
        with pytest.raises(ValueError):
            board.place(0, (0, 1))

    def test_normalized_moves_min_corner_to_origin(self):
        board = Board()
        board.place(0, (2, 3))
        board.place(1, (2, 4))
        norm = board.normalized()
        assert dict(norm.items()) == {(0, 0): 0, (0, 1): 1}

    def test_to_grid_uses_minus_one_for_empty(self):
        board = Board((2, 2))
        board.place(5, (0, 1))
        grid = board.to_grid()
        assert grid.shape == (2, 2)
        assert grid[0, 1] == 5
        assert (grid == -1).sum() == 3

    def test_save_load_round_trip(self, tmp_path):
        board = Board((2, 3))
        for pid, slot in grid_solution(2, 3).items():
            board.place(pid, slot)
        path = tmp_path / "board.txt"
        board.save(path, seed=9)
        loaded = Board.load(path)
        assert dict(loaded.items()) == dict(board.items())
        assert loaded.frame == (2, 3)
        assert path.read_text().startswith("#")

    def test_unbounded_save_load_round_trip(self, tmp_path):
        board = Board()
        board.place(0, (0, 0))
        board.place(1, (0, 1))
        board.save(tmp_path / "b.txt")
        loaded = Board.load(tmp_path / "b.txt")
        assert dict(loaded.items()) == dict(board.items())
        assert loaded.frame is None


class TestCompatibility:
    def test_runner_up_scaling_hand_case(self):
        n = 4
        values = np.full((n, n, 4), 7.0)
        values[np.arange(n), np.arange(n)] = np.inf
        values[0, 1, 0] = 0.0
        values[0, 2, 0] = 5.0
        values[0, 3, 0] = 10.0
        comp = compatibility(values)
        assert comp[0, 1, 0] == 1.0     # best against runner-up 5
        assert comp[0, 2, 0] == 0.0     # the runner-up itself
        assert comp[0, 3, 0] == -1.0    # twice the runner-up

    def test_two_piece_row_scores_zero(self):
        values = np.full((2, 2, 4), np.inf)
        values[0, 1] = [3.0, 4.0, 5.0, 6.0]
        values[1, 0] = [5.0, 6.0, 3.0, 4.0]
        comp = compatibility(values)
        assert comp[0, 1, 0] == 0.0
        assert comp[1, 0, 2] == 0.0

    def test_zero_runner_up(self):
        values = np.full((4, 4, 4), np.inf)
        values[0, 1, 0] = 0.0
        values[0, 2, 0] = 0.0
        values[0, 3, 0] = 3.0
        comp = compatibility(values)
        assert comp[0, 1, 0] == 0.0
        assert comp[0, 2, 0] == 0.0
        assert comp[0, 3, 0] == -np.inf

    def test_infinite_runner_up_blanks_the_row(self):
        values = np.full((3, 3, 4), np.inf)
        values[0, 1, 0] = 2.0
        comp = compatibility(values)
        assert np.all(comp[0, :, 0] == -np.inf)

    def test_diagonal_is_negative_inf(self):
        comp = compatibility(oracle_dissimilarity(grid_solution(2, 2)))
        assert np.all(np.diagonal(comp, axis1=0, axis2=1) == -np.inf)

    def test_single_piece_rejected(self):
        with pytest.raises(ValueError):
            compatibility(np.full((1, 1, 4), np.inf))

    def test_accepts_tensor_wrapper(self):
        tensor = oracle_dissimilarity(grid_solution(2, 3))
        assert np.array_equal(compatibility(tensor), compatibility(tensor.values))


class TestBestBuddies:
    def test_oracle_adjacencies_are_mutual(self):
        solution = grid_solution(2, 2)
        buddies = best_buddies(compatibility(oracle_dissimilarity(solution)))
        # every true adjacency is a buddy pair in both orders
        for x, y, d in (
            (0, 1, Direction.RIGHT),
            (2, 3, Direction.RIGHT),
            (0, 2, Direction.DOWN),
            (1, 3, Direction.DOWN),
        ):
            assert (x, y, d) in buddies
            assert (y, x, d.opposite) in buddies
        # rows with no true neighbor are all-tied; those may add extras,
        # but never one that contradicts a decided row
        assert (0, 3, Direction.RIGHT) not in buddies
        assert (1, 2, Direction.DOWN) not in buddies

    def test_ties_resolve_to_smaller_id(self):
        comp = np.full((3, 3, 4), -np.inf)
        comp[0, 1, 0] = comp[0, 2, 0] = 0.5   # 0's Right row ties at 1 and 2
        comp[1, 0, 2] = 0.5
        comp[2, 0, 2] = 0.5
        buddies = best_buddies(comp)
        assert (0, 1, Direction.RIGHT) in buddies
        assert (0, 2, Direction.RIGHT) not in buddies


class TestEdgeCost:
    def test_hand_summed_cost(self):
        values = np.zeros((4, 4, 4))
        values[0, 1, 0] = 1.0   # 0 right-of... 1 right of 0
        values[2, 3, 0] = 2.0
        values[0, 2, 1] = 4.0
        values[1, 3, 1] = 8.0
        board = board_from(grid_solution(2, 2))
        assert board_edge_cost(board, values) == 15.0


class TestPlace:
    def test_2x2_oracle_reconstructs_and_minimizes_cost(self):
        solution = grid_solution(2, 2)
        tensor = oracle_dissimilarity(solution)
        board = place(compatibility(tensor), (2, 2))
        assert dict(board.items()) == {slot: pid for pid, slot in solution.items()}

        # brute force: greedy cost equals the minimum over all 4! assignments
        from itertools import permutations

        costs = []
        for perm in permutations(range(4)):
            b = Board()
            for i, pid in enumerate(perm):
                b.place(pid, (i // 2, i % 2))
            costs.append(board_edge_cost(b, tensor))
        assert board_edge_cost(board, tensor) == min(costs)

    def test_oracle_ladder_is_perfect(self):
        for rows, cols in ((2, 2), (2, 3), (3, 3), (4, 5)):
            solution = grid_solution(rows, cols)
            comp = compatibility(oracle_dissimilarity(solution))
            for frame in ((rows, cols), None):
                board = place(comp, frame)
                assert dict(board.items()) == {
                    slot: pid for pid, slot in solution.items()
                }, (rows, cols, frame)

    def test_single_piece(self):
        board = place(np.full((1, 1, 4), -np.inf), None)
        assert dict(board.items()) == {(0, 0): 0}

    def test_frame_capacity_checked(self):
        with pytest.raises(ValueError, match="cannot hold"):
            place(np.zeros((6, 6, 4)), (2, 2))

    def test_malformed_tensor_rejected(self):
        with pytest.raises(ValueError):
            place(np.zeros((3, 3, 2)))

    def test_degenerate_tensor_still_completes(self):
        values = np.full((4, 4, 4), np.inf)
        board = place(compatibility(values), (2, 2))
        assert board.is_complete(4)
        assert board.to_grid().min() >= 0

    def test_constrained_result_fits_frame(self):
        rng = np.random.default_rng(8)
        for _ in range(10):
            arr = np.array(random_tensor(rng, 6))
            board = place(compatibility(arr), (2, 3))
            rows = [r for (r, c) in dict(board.items())]
            cols = [c for (r, c) in dict(board.items())]
            assert max(rows) - min(rows) < 2
            assert max(cols) - min(cols) < 3

    def test_matches_reference_replay(self):
        rng = np.random.default_rng(17)
        for _ in range(25):
            for shape in ((2, 2), (2, 3)):
                n = shape[0] * shape[1]
                values = random_tensor(rng, n)
                for frame in (shape, None):
                    board = place(compatibility(np.array(values)), frame)
                    assert dict(board.items()) == ref_place(values, frame)

    def test_board_reachable_under_documented_rule(self):
        rng = np.random.default_rng(18)
        for _ in range(10):
            values = random_tensor(rng, 4)
            board = place(compatibility(np.array(values)), (2, 2))
            key = frozenset((r, c, pid) for (r, c), pid in board.items())
            assert key in ref_reachable_boards(values, (2, 2))


class TestGreedyPlacer:
    def test_estimator_params_round_trip(self):
        placer = GreedyPlacer(frame=(2, 3), max_extent=7, tie_break_seed=1)
        params = placer.get_params()
        assert params == {"frame": (2, 3), "max_extent": 7, "tie_break_seed": 1}
        placer.set_params(frame=None)
        assert placer.frame is None

    def test_predict_from_tensor_object(self):
        solution = grid_solution(2, 3)
        tensor = oracle_dissimilarity(solution)
        board = GreedyPlacer(frame=(2, 3)).fit().predict(tensor)
        assert dict(board.items()) == {slot: pid for pid, slot in solution.items()}

    def test_predict_single_piece(self):
        tensor = DissimilarityTensor(np.full((1, 1, 4), np.inf))
        board = GreedyPlacer().fit().predict(tensor)
        assert dict(board.items()) == {(0, 0): 0}

    def test_max_extent_caps_unbounded_growth(self):
        rng = np.random.default_rng(19)
        arr = np.array(random_tensor(rng, 6))
        board = GreedyPlacer(max_extent=3).fit().predict(DissimilarityTensor(arr))
        rows = [r for (r, c) in dict(board.items())]
        cols = [c for (r, c) in dict(board.items())]
        assert max(rows) - min(rows) < 3
        assert max(cols) - min(cols) < 3
