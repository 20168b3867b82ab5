"""Greedy placement driven by pairwise dissimilarity scores.

The placer grows the board from a seed piece chosen by best-buddy support.
Candidate (piece, slot) pairs are ranked by the mean compatibility with the
already-placed neighbors of the slot; compatibility contrasts a candidate
against the runner-up, so a match only scores high when it beats the
alternatives.  All ties are broken lexicographically for reproducibility.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator

from . import __version__
from .pairs import Direction

_NEG_INF = float("-inf")


class Board:
    """Assignment of pieces to grid slots.

    ``frame=(rows, cols)`` constrains slots to that window (after
    normalization the window starts at (0, 0)); ``frame=None`` is unbounded.
    """

    def __init__(self, frame: tuple[int, int] | None = None):
        self.frame = None if frame is None else (int(frame[0]), int(frame[1]))
        self._by_slot: dict[tuple[int, int], int] = {}
        self._by_piece: dict[int, tuple[int, int]] = {}

    def place(self, piece_id: int, slot: tuple[int, int]) -> None:
        slot = (int(slot[0]), int(slot[1]))
        if slot in self._by_slot:
            raise ValueError(f"slot {slot} already holds piece {self._by_slot[slot]}")
        if piece_id in self._by_piece:
            raise ValueError(f"piece {piece_id} already placed at {self._by_piece[piece_id]}")
        self._by_slot[slot] = int(piece_id)
        self._by_piece[int(piece_id)] = slot

    def __len__(self) -> int:
        return len(self._by_slot)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Board)
            and self.frame == other.frame
            and self._by_slot == other._by_slot
        )

    def items(self):
        return self._by_slot.items()

    def piece_at(self, slot: tuple[int, int]) -> int | None:
        return self._by_slot.get(tuple(slot))

    def slot_of(self, piece_id: int) -> tuple[int, int]:
        return self._by_piece[piece_id]

    def piece_ids(self) -> list[int]:
        return sorted(self._by_piece)

    @property
    def bounding_box(self) -> tuple[int, int, int, int]:
        """(min_row, min_col, max_row, max_col) over occupied slots."""
        if not self._by_slot:
            raise ValueError("board is empty")
        rows = [r for r, _ in self._by_slot]
        cols = [c for _, c in self._by_slot]
        return min(rows), min(cols), max(rows), max(cols)

    def translated(self, dr: int, dc: int) -> "Board":
        out = Board(self.frame)
        for (r, c), pid in self._by_slot.items():
            out.place(pid, (r + dr, c + dc))
        return out

    def normalized(self) -> "Board":
        """Translate so the minimum occupied row/col becomes (0, 0)."""
        minr, minc, _, _ = self.bounding_box
        return self.translated(-minr, -minc)

    def is_complete(self, n_pieces: int) -> bool:
        return len(self._by_slot) == n_pieces and set(self._by_piece) == set(
            range(n_pieces)
        )

    def to_grid(self) -> np.ndarray:
        """Integer grid of piece ids with -1 for empty slots."""
        if self.frame is not None:
            rows, cols = self.frame
            minr = minc = 0
        else:
            minr, minc, maxr, maxc = self.bounding_box
            rows, cols = maxr - minr + 1, maxc - minc + 1
        grid = np.full((rows, cols), -1, dtype=int)
        for (r, c), pid in self._by_slot.items():
            grid[r - minr, c - minc] = pid
        return grid

    def save(self, path: str | Path, seed: int | None = None) -> Path:
        path = Path(path)
        lines = [f"# gapsolver board v1 tool_version={__version__}"]
        if seed is not None:
            lines.append(f"# seed={seed}")
        if self.frame is not None:
            lines.append(f"# frame=constrained {self.frame[0]} {self.frame[1]}")
        else:
            lines.append("# frame=unbounded")
        grid = self.normalized().to_grid() if self._by_slot else np.zeros((0, 0), int)
        for row in grid:
            lines.append(" ".join(str(v) for v in row))
        path.write_text("\n".join(lines) + "\n")
        return path

    @classmethod
    def load(cls, path: str | Path) -> "Board":
        path = Path(path)
        frame = None
        rows = []
        for line in path.read_text().splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if "frame=constrained" in line:
                    parts = line.split()
                    frame = (int(parts[-2]), int(parts[-1]))
                continue
            try:
                rows.append([int(v) for v in line.split()])
            except ValueError as exc:
                raise ValueError(f"malformed board row in {path}: {line!r}") from exc
        board = cls(frame)
        for r, row in enumerate(rows):
            for c, pid in enumerate(row):
                if pid >= 0:
                    board.place(pid, (r, c))
        return board


def compatibility(dissimilarity) -> np.ndarray:
    """Rescale dissimilarities against the per-row runner-up.

    C[x, y, d] = 1 - D[x, y, d] / secondmin_{z != x} D[x, z, d], where the
    second minimum is the second order statistic by value.  When the second
    minimum is the +inf sentinel the whole row maps to the -inf sentinel.
    """
    values = np.asarray(getattr(dissimilarity, "values", dissimilarity), dtype=np.float64)
    n = values.shape[0]
    if values.shape != (n, n, 4):
        raise ValueError(f"expected an (N, N, 4) tensor, got shape {values.shape}")
    if n < 2:
        raise ValueError("compatibility needs at least 2 pieces")

    comp = np.empty_like(values)
    off_diag = ~np.eye(n, dtype=bool)
    for d in range(4):
        plane = values[:, :, d]
        for x in range(n):
            row = plane[x, off_diag[x]]
            order = np.sort(row)
            second = order[1] if len(order) >= 2 else order[0]
            if np.isinf(second):
                comp[x, :, d] = _NEG_INF
                continue
            with np.errstate(divide="ignore", invalid="ignore"):
                if second > 0:
                    ratio = plane[x] / second
                else:
                    ratio = np.where(plane[x] == 0.0, 1.0, np.inf)
            comp[x, :, d] = 1.0 - ratio
        comp[np.arange(n), np.arange(n), d] = _NEG_INF
    return comp


def best_buddies(comp: np.ndarray) -> set[tuple[int, int, Direction]]:
    """Mutually-best pairs: (x, y, d) iff y is x's argmax in d and x is y's
    argmax in the opposite direction.  Ties pick the smaller piece id."""
    comp = np.asarray(comp, dtype=np.float64)
    n = comp.shape[0]
    best = {
        d: np.argmax(comp[:, :, d.value], axis=1) for d in Direction
    }
    buddies = set()
    for d in Direction:
        opp = d.opposite
        for x in range(n):
            y = int(best[d][x])
            if y != x and int(best[opp][y]) == x:
                buddies.add((x, y, d))
    return buddies


def board_edge_cost(board: Board, dissimilarity) -> float:
    """Sum of dissimilarities over all placed adjacent pairs (Right + Down)."""
    values = np.asarray(getattr(dissimilarity, "values", dissimilarity), dtype=np.float64)
    total = 0.0
    # sorted so the float sum is independent of placement insertion order
    for (r, c), pid in sorted(board.items()):
        right = board.piece_at((r, c + 1))
        if right is not None:
            total += values[pid, right, Direction.RIGHT.value]
        down = board.piece_at((r + 1, c))
        if down is not None:
            total += values[pid, down, Direction.DOWN.value]
    return float(total)


def _seed_piece(comp: np.ndarray, buddies: set[tuple[int, int, Direction]]) -> int:
    """Piece with the most best-buddy relations; ties by larger buddy
    compatibility sum, then by smaller id."""
    n = comp.shape[0]
    counts = np.zeros(n, dtype=int)
    sums = np.zeros(n, dtype=np.float64)
    for x, y, d in buddies:
        counts[x] += 1
        value = comp[x, y, d.value]
        if np.isfinite(value):
            sums[x] += value
    return min(range(n), key=lambda p: (-counts[p], -sums[p], p))


def place(
    comp: np.ndarray,
    frame: tuple[int, int] | None = None,
    *,
    max_extent: int | None = None,
    tie_break_seed: int = 0,
) -> Board:
    """Greedily place all pieces of a compatibility tensor onto a board.

    With ``frame=(rows, cols)`` the growing bounding box must fit inside a
    rows x cols window (the board is normalized to start at (0, 0) at the
    end).  Unbounded mode grows freely, optionally capped at ``max_extent``
    per dimension.  ``tie_break_seed`` is accepted for interface stability;
    the lexicographic tie-breaking rules leave no decision to randomness.
    """
    del tie_break_seed
    comp = np.asarray(comp, dtype=np.float64)
    n = comp.shape[0]
    if comp.shape != (n, n, 4):
        raise ValueError(f"expected an (N, N, 4) tensor, got shape {comp.shape}")
    if frame is not None and frame[0] * frame[1] < n:
        raise ValueError(f"frame {frame} cannot hold {n} pieces")

    board = Board(frame)
    if n == 1:
        board.place(0, (0, 0))
        return board

    if frame is not None:
        limit_rows, limit_cols = frame
    elif max_extent is not None:
        limit_rows = limit_cols = max_extent
    else:
        limit_rows = limit_cols = None

    buddies = best_buddies(comp)
    seed = _seed_piece(comp, buddies)

    unplaced = np.ones(n, dtype=bool)
    board.place(seed, (0, 0))
    unplaced[seed] = False
    box = [0, 0, 0, 0]  # minr, minc, maxr, maxc

    # frontier slot -> (summed neighbor contributions over pieces, count)
    frontier: dict[tuple[int, int], tuple[np.ndarray, int]] = {}

    def fits(slot: tuple[int, int]) -> bool:
        if limit_rows is None:
            return True
        height = max(box[2], slot[0]) - min(box[0], slot[0]) + 1
        width = max(box[3], slot[1]) - min(box[1], slot[1]) + 1
        return height <= limit_rows and width <= limit_cols

    def absorb(piece_id: int, slot: tuple[int, int]) -> None:
        """Add the contributions of a newly placed piece to adjacent slots."""
        for d in Direction:
            dr, dc = d.offset
            adj = (slot[0] + dr, slot[1] + dc)
            if board.piece_at(adj) is not None:
                continue
            entry = frontier.get(adj)
            contribution = comp[piece_id, :, d.value]
            if entry is None:
                frontier[adj] = (contribution.copy(), 1)
            else:
                frontier[adj] = (entry[0] + contribution, entry[1] + 1)

    absorb(seed, (0, 0))

    while unplaced.any():
        best_key = None
        best_slot = None
        for slot in list(frontier):
            if not fits(slot):
                del frontier[slot]  # the box only grows; never valid again
                continue
            sums, count = frontier[slot]
            scores = sums / count
            scores = np.where(unplaced, scores, _NEG_INF)
            pid = int(np.argmax(scores))
            score = scores[pid]
            if not np.isfinite(score):
                continue
            key = (-score, pid, slot[0], slot[1])
            if best_key is None or key < best_key:
                best_key = key
                best_slot = slot
        if best_key is None:
            # Degenerate tensors can leave only non-finite candidates; fall
            # back to pure tie-break order so the board still completes.
            pid = int(np.flatnonzero(unplaced)[0])
            best_slot = min(s for s in frontier if fits(s))
        else:
            pid = best_key[1]

        board.place(pid, best_slot)
        unplaced[pid] = False
        del frontier[best_slot]
        box[0] = min(box[0], best_slot[0])
        box[1] = min(box[1], best_slot[1])
        box[2] = max(box[2], best_slot[0])
        box[3] = max(box[3], best_slot[1])
        absorb(pid, best_slot)

    return board.normalized()


class GreedyPlacer(BaseEstimator):
    """Estimator-style wrapper: predict a Board from a dissimilarity tensor."""

    def __init__(
        self,
        frame: tuple[int, int] | None = None,
        max_extent: int | None = None,
        tie_break_seed: int = 0,
    ):
        self.frame = frame
        self.max_extent = max_extent
        self.tie_break_seed = tie_break_seed

    def fit(self, dissimilarity=None, y=None) -> "GreedyPlacer":
        return self

    def predict(self, dissimilarity) -> Board:
        values = np.asarray(getattr(dissimilarity, "values", dissimilarity))
        if values.shape[0] == 1:
            # compatibility needs a competitor; a lone piece just sits at (0, 0)
            board = Board(self.frame)
            board.place(0, (0, 0))
            return board
        return place(
            compatibility(dissimilarity),
            self.frame,
            max_extent=self.max_extent,
            tie_break_seed=self.tie_break_seed,
        )
