"""Joined two-piece images for the networks: training pairs and inference pairs.

A pair is always presented horizontally (left piece, right piece) with a
vertical band of unknown pixels in the middle.  Vertically adjacent pieces are
rotated 90 degrees counter-clockwise first, so the upper piece lands on the
left.  The same convention is used in training and inference.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .pieces import PieceImage, PuzzleBundle, Solution, quantize_image

POSITIVE = "positive"
NEGATIVE = "negative"


class Direction(Enum):
    """Relative placement of piece y with respect to piece x.

    The enum value doubles as the direction axis index in score tensors.
    """

    RIGHT = 0
    DOWN = 1
    LEFT = 2
    UP = 3

    @property
    def opposite(self) -> "Direction":
        return _OPPOSITE[self]

    @property
    def offset(self) -> tuple[int, int]:
        """(row, col) offset from x's slot to y's slot."""
        return _OFFSET[self]

    @property
    def is_primary(self) -> bool:
        """RIGHT and DOWN are stored; LEFT and UP are derived views."""
        return self in (Direction.RIGHT, Direction.DOWN)


_OPPOSITE = {
    Direction.RIGHT: Direction.LEFT,
    Direction.LEFT: Direction.RIGHT,
    Direction.DOWN: Direction.UP,
    Direction.UP: Direction.DOWN,
}
_OFFSET = {
    Direction.RIGHT: (0, 1),
    Direction.DOWN: (1, 0),
    Direction.LEFT: (0, -1),
    Direction.UP: (-1, 0),
}


@dataclass
class PairSample:
    """A joined two-piece image plus the inpaint mask and provenance.

    ``input`` is (S, 2S, 3) with unknown pixels zeroed; ``mask`` is True
    exactly where the generator may write (the central band).  ``original``
    holds the pre-erosion join when known (training only).
    """

    input: np.ndarray
    mask: np.ndarray
    original: np.ndarray | None = None
    label: str | None = None
    x_id: int = -1
    y_id: int = -1
    direction: Direction = Direction.RIGHT

    @property
    def piece_size(self) -> int:
        return self.input.shape[0]


def band_mask(piece_size: int, gap_width: int) -> np.ndarray:
    """Boolean (S, 2S) mask of the central 2w-wide full-height band."""
    mask = np.zeros((piece_size, 2 * piece_size), dtype=bool)
    if gap_width > 0:
        mask[:, piece_size - gap_width : piece_size + gap_width] = True
    return mask


def join_pair(
    x: PieceImage,
    y: PieceImage,
    direction: Direction,
    gap_width: int,
    keep_original: bool = False,
) -> PairSample:
    """Join two pieces into the horizontal pair image fed to the networks.

    ``direction`` must be RIGHT or DOWN; callers wanting LEFT/UP swap the
    arguments first.  For DOWN the vertical stack is rotated counter-clockwise
    so x occupies the left half.
    """
    if not direction.is_primary:
        raise ValueError(
            f"join_pair takes RIGHT or DOWN; for {direction.name} swap x and y"
        )
    s = x.size
    if y.size != s:
        raise ValueError(f"piece sizes differ: {s} vs {y.size}")
    if not 0 <= gap_width < s // 2:
        raise ValueError(f"gap_width {gap_width} must be in [0, {s // 2})")

    xp, xv = x.pixels, x.valid
    yp, yv = y.pixels, y.valid
    if direction is Direction.DOWN:
        xp, xv = np.rot90(xp), np.rot90(xv)
        yp, yv = np.rot90(yp), np.rot90(yv)

    joined = np.concatenate([xp, yp], axis=1).astype(np.float32)
    valid = np.concatenate([xv, yv], axis=1)
    mask = band_mask(s, gap_width)

    original = joined.copy() if keep_original else None
    joined = joined.copy()
    joined[~valid] = 0.0
    joined[mask] = 0.0
    return PairSample(
        input=joined,
        mask=mask,
        original=original,
        x_id=x.id,
        y_id=y.id,
        direction=direction,
    )


def center_crop(raster: np.ndarray) -> np.ndarray:
    """Crop the middle half of the width, all rows; for (S, 2S) input this
    keeps columns [S/2, 3S/2), which contains the whole inpaint band."""
    w = raster.shape[1]
    if w % 2 != 0:
        raise ValueError(f"width {w} must be even")
    keep = w // 2
    start = (w - keep) // 2
    return raster[:, start : start + keep].copy()


def _zero_outer_frame(sample: PairSample, width: int) -> None:
    """Zero the non-facing frame (outer border of the pair) in input and
    original, to match the appearance of fully eroded pieces at inference."""
    if width <= 0:
        return
    for arr in (sample.input, sample.original):
        if arr is None:
            continue
        arr[:width, :] = 0.0
        arr[-width:, :] = 0.0
        arr[:, :width] = 0.0
        arr[:, -width:] = 0.0
    # The outer columns of the band mask overlap the frame; keep the mask as
    # the band only, so the generator never rewrites the frame.


def make_phase1_example(
    image: np.ndarray,
    rng: np.random.Generator,
    piece_size: int = 64,
    erosion_pct: float = 0.07,
    erode_outer_frame: bool = False,
) -> PairSample:
    """Cut a random adjacent pair out of a training image for inpainting.

    Orientation is uniform over horizontal/vertical; the pre-erosion join is
    kept in ``original``.  Only the facing edges are eroded by default.
    """
    img = quantize_image(image)
    s = piece_size
    h, w = img.shape[:2]
    gap = int(erosion_pct * s)

    horizontal = bool(rng.integers(2) == 0)
    if horizontal:
        if h < s or w < 2 * s:
            raise ValueError(
                f"image {h}x{w} too small for a horizontal {s}px pair"
            )
        top = int(rng.integers(h - s + 1))
        left = int(rng.integers(w - 2 * s + 1))
        window = img[top : top + s, left : left + 2 * s]
        x_tile, y_tile = window[:, :s], window[:, s:]
        direction = Direction.RIGHT
    else:
        if h < 2 * s or w < s:
            raise ValueError(f"image {h}x{w} too small for a vertical {s}px pair")
        top = int(rng.integers(h - 2 * s + 1))
        left = int(rng.integers(w - s + 1))
        window = img[top : top + 2 * s, left : left + s]
        x_tile, y_tile = window[:s], window[s:]
        direction = Direction.DOWN

    full = np.ones((s, s), dtype=bool)
    sample = join_pair(
        PieceImage(0, np.ascontiguousarray(x_tile), full),
        PieceImage(1, np.ascontiguousarray(y_tile), full.copy()),
        direction,
        gap,
        keep_original=True,
    )
    sample.label = POSITIVE
    if erode_outer_frame:
        _zero_outer_frame(sample, gap)
    return sample


def make_phase2_pair(
    bundle: PuzzleBundle,
    solution: Solution,
    rng: np.random.Generator,
    erosion_pct: float = 0.07,
    erode_outer_frame: bool = False,
) -> tuple[PairSample, PairSample]:
    """Draw one positive and one matched negative pair from a puzzle.

    The negative keeps one piece of the positive pair and replaces the other
    with a uniform pick over pieces that are not its true neighbor in the
    sampled direction.
    """
    if bundle.n_pieces < 3:
        raise ValueError("phase-2 sampling needs a puzzle with at least 3 pieces")
    if bundle.erosion_width != 0:
        raise ValueError("pass a pristine bundle; erosion is applied at the join")
    gap = int(erosion_pct * bundle.piece_size)

    direction = Direction.RIGHT if rng.integers(2) == 0 else Direction.DOWN

    def adjacent_in(d: Direction) -> list[tuple[int, int]]:
        pairs = [
            (x, y)
            for x, _ in solution.items()
            if (y := solution.neighbor(x, d.offset)) is not None
        ]
        pairs.sort()
        return pairs

    adjacent = adjacent_in(direction)
    if not adjacent:
        # single-row or single-column puzzles only have pairs one way
        direction = (
            Direction.DOWN if direction is Direction.RIGHT else Direction.RIGHT
        )
        adjacent = adjacent_in(direction)
    if not adjacent:
        raise ValueError("puzzle has no adjacent pairs in either direction")
    x_id, y_id = adjacent[int(rng.integers(len(adjacent)))]

    keep_x = bool(rng.integers(2) == 0)
    if keep_x:
        banned = {x_id, y_id}
        candidates = [p for p in solution.piece_ids() if p not in banned]
        neg_x, neg_y = x_id, int(candidates[int(rng.integers(len(candidates)))])
    else:
        banned = {y_id, x_id}
        candidates = [p for p in solution.piece_ids() if p not in banned]
        neg_x, neg_y = int(candidates[int(rng.integers(len(candidates)))]), y_id

    positive = join_pair(
        bundle.piece(x_id), bundle.piece(y_id), direction, gap, keep_original=True
    )
    positive.label = POSITIVE
    negative = join_pair(
        bundle.piece(neg_x), bundle.piece(neg_y), direction, gap, keep_original=True
    )
    negative.label = NEGATIVE
    if erode_outer_frame:
        _zero_outer_frame(positive, gap)
        _zero_outer_frame(negative, gap)
    return positive, negative
