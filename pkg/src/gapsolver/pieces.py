"""Puzzle piece handling: slicing, erosion, shuffling, rendering and bundle IO.

A bundle on disk is a directory containing ``manifest.json`` and one RGBA PNG
per piece (alpha encodes pixel validity).  The ground-truth ``solution.json``
is kept in a separate file so that solvers can load a bundle without seeing it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterator

import numpy as np
from PIL import Image, PngImagePlugin

from . import __version__

EMPTY_SLOT_GRAY = 0.5


def quantize_image(image: np.ndarray) -> np.ndarray:
    """Convert an image to float32 in [0,1], snapped to the 8-bit grid.

    Snapping makes bundle files round-trip exactly: every stored pixel value
    is k/255 for an integer k, which an RGBA PNG represents losslessly.
    """
    arr = np.asarray(image)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected an HxWx3 image, got shape {arr.shape}")
    if arr.dtype == np.uint8:
        return (arr.astype(np.float32) / 255.0).astype(np.float32)
    arr = arr.astype(np.float64)
    if not np.all(np.isfinite(arr)):
        raise ValueError("image contains non-finite values")
    if arr.min() < 0.0 or arr.max() > 1.0:
        raise ValueError("float images must lie in [0, 1]")
    return (np.round(arr * 255.0) / 255.0).astype(np.float32)


@dataclass
class PieceImage:
    """One square puzzle piece with a per-pixel validity mask."""

    id: int
    pixels: np.ndarray  # (S, S, 3) float32 in [0, 1]
    valid: np.ndarray   # (S, S) bool, False on eroded pixels

    @property
    def size(self) -> int:
        return self.pixels.shape[0]

    def copy(self) -> "PieceImage":
        return PieceImage(self.id, self.pixels.copy(), self.valid.copy())


@dataclass
class PuzzleBundle:
    """An (optionally eroded, optionally shuffled) set of puzzle pieces."""

    pieces: list[PieceImage]
    piece_size: int
    rows: int
    cols: int
    erosion_width: int = 0
    shuffled: bool = False

    def __post_init__(self) -> None:
        if self.rows * self.cols != len(self.pieces):
            raise ValueError(
                f"rows*cols = {self.rows * self.cols} does not match "
                f"{len(self.pieces)} pieces"
            )
        for piece in self.pieces:
            if piece.pixels.shape != (self.piece_size, self.piece_size, 3):
                raise ValueError(
                    f"piece {piece.id} has shape {piece.pixels.shape}, "
                    f"expected ({self.piece_size}, {self.piece_size}, 3)"
                )

    @property
    def n_pieces(self) -> int:
        return len(self.pieces)

    def piece(self, piece_id: int) -> PieceImage:
        p = self.pieces[piece_id]
        if p.id != piece_id:
            raise ValueError(f"bundle piece order is inconsistent at id {piece_id}")
        return p


class Solution:
    """Ground-truth mapping from piece id to its (row, col) grid slot."""

    def __init__(self, slots: dict[int, tuple[int, int]]):
        if not slots:
            raise ValueError("solution must contain at least one piece")
        positions = list(slots.values())
        if len(set(positions)) != len(positions):
            raise ValueError("solution maps two pieces to the same slot")
        rows = max(r for r, _ in positions) + 1
        cols = max(c for _, c in positions) + 1
        if rows * cols != len(slots):
            raise ValueError(
                f"solution does not cover a full {rows}x{cols} grid"
            )
        if min(r for r, _ in positions) < 0 or min(c for _, c in positions) < 0:
            raise ValueError("solution slots must be non-negative")
        self._slots = {int(k): (int(r), int(c)) for k, (r, c) in slots.items()}
        self._by_slot = {slot: pid for pid, slot in self._slots.items()}
        self.rows = rows
        self.cols = cols

    def __getitem__(self, piece_id: int) -> tuple[int, int]:
        return self._slots[piece_id]

    def __len__(self) -> int:
        return len(self._slots)

    def __contains__(self, piece_id: int) -> bool:
        return piece_id in self._slots

    def __eq__(self, other) -> bool:
        return isinstance(other, Solution) and self._slots == other._slots

    def items(self) -> Iterator[tuple[int, tuple[int, int]]]:
        return iter(self._slots.items())

    def piece_ids(self) -> list[int]:
        return sorted(self._slots)

    def piece_at(self, slot: tuple[int, int]) -> int | None:
        return self._by_slot.get(tuple(slot))

    def neighbor(self, piece_id: int, offset: tuple[int, int]) -> int | None:
        """Piece at the slot ``offset`` away from ``piece_id``, or None."""
        r, c = self._slots[piece_id]
        return self.piece_at((r + offset[0], c + offset[1]))


def slice_image(image: np.ndarray, piece_size: int) -> tuple[PuzzleBundle, Solution]:
    """Cut an image into a row-major grid of square pieces.

    Surplus right/bottom margins that do not fill a whole piece are discarded.
    """
    if piece_size <= 0:
        raise ValueError("piece_size must be positive")
    img = quantize_image(image)
    h, w = img.shape[:2]
    if h < piece_size or w < piece_size:
        raise ValueError(
            f"image of size {h}x{w} is smaller than one {piece_size}px piece"
        )
    rows, cols = h // piece_size, w // piece_size
    pieces = []
    slots = {}
    for r in range(rows):
        for c in range(cols):
            pid = r * cols + c
            tile = img[
                r * piece_size : (r + 1) * piece_size,
                c * piece_size : (c + 1) * piece_size,
            ].copy()
            pieces.append(
                PieceImage(pid, tile, np.ones((piece_size, piece_size), dtype=bool))
            )
            slots[pid] = (r, c)
    bundle = PuzzleBundle(pieces, piece_size, rows, cols)
    return bundle, Solution(slots)


def erosion_width_for(piece_size: int, erosion_pct: float) -> int:
    """Frame width in pixels for a given erosion fraction of the piece size."""
    if not 0.0 <= erosion_pct < 0.5:
        raise ValueError(
            f"erosion_pct must be in [0, 0.5), got {erosion_pct} "
            "(at 0.5 the pieces would vanish)"
        )
    return int(erosion_pct * piece_size)


def erode(bundle: PuzzleBundle, erosion_pct: float) -> PuzzleBundle:
    """Invalidate and zero a frame of width floor(erosion_pct*S) on every piece.

    Interior pixels are untouched.  Downstream code must consult the validity
    mask rather than testing for zero color.
    """
    width = erosion_width_for(bundle.piece_size, erosion_pct)
    if bundle.erosion_width != 0:
        raise ValueError("bundle is already eroded; erode pristine bundles only")
    s = bundle.piece_size
    frame = np.zeros((s, s), dtype=bool)
    frame[:] = True
    if width > 0:
        frame[:width, :] = False
        frame[-width:, :] = False
        frame[:, :width] = False
        frame[:, -width:] = False
    pieces = []
    for piece in bundle.pieces:
        pixels = piece.pixels.copy()
        valid = piece.valid & frame
        pixels[~valid] = 0.0
        pieces.append(PieceImage(piece.id, pixels, valid))
    return replace(bundle, pieces=pieces, erosion_width=width)


def shuffle(
    bundle: PuzzleBundle, seed: int, solution: Solution | None = None
) -> tuple[PuzzleBundle, Solution]:
    """Permute piece order with a seeded RNG and re-assign ids 0..N-1.

    The returned Solution maps the new ids to their true grid slots.  For an
    already-shuffled bundle the existing solution must be supplied.
    """
    if bundle.n_pieces < 1:
        raise ValueError("bundle has no pieces")
    if bundle.shuffled and solution is None:
        raise ValueError("re-shuffling a shuffled bundle requires its solution")
    if solution is None:
        solution = Solution(
            {p.id: (p.id // bundle.cols, p.id % bundle.cols) for p in bundle.pieces}
        )
    rng = np.random.default_rng(seed)
    perm = rng.permutation(bundle.n_pieces)
    pieces = []
    slots = {}
    for new_id, old_index in enumerate(perm):
        old = bundle.pieces[old_index]
        pieces.append(PieceImage(new_id, old.pixels.copy(), old.valid.copy()))
        slots[new_id] = solution[old.id]
    return replace(bundle, pieces=pieces, shuffled=True), Solution(slots)


def render(board, bundle: PuzzleBundle) -> np.ndarray:
    """Compose a board back into an image raster.

    Placed pieces are copied into their slots with invalid pixels black;
    empty slots are mid-gray.  ``board`` is a placement.Board (or any object
    with an ``items()`` of (slot, piece_id) pairs).
    """
    s = bundle.piece_size
    out = np.full((bundle.rows * s, bundle.cols * s, 3), EMPTY_SLOT_GRAY, np.float32)
    seen: set[int] = set()
    for (r, c), pid in board.items():
        if not (0 <= r < bundle.rows and 0 <= c < bundle.cols):
            raise ValueError(
                f"slot ({r}, {c}) is outside the {bundle.rows}x{bundle.cols} frame"
            )
        if pid in seen:
            raise RuntimeError(f"piece {pid} is placed more than once")
        seen.add(pid)
        piece = bundle.piece(pid)
        tile = piece.pixels.copy()
        tile[~piece.valid] = 0.0
        out[r * s : (r + 1) * s, c * s : (c + 1) * s] = tile
    return out


# ---------------------------------------------------------------------------
# Disk format
# ---------------------------------------------------------------------------

MANIFEST_NAME = "manifest.json"
SOLUTION_NAME = "solution.json"


def _piece_filename(piece_id: int) -> str:
    return f"piece_{piece_id:04d}.png"


def save_bundle(bundle: PuzzleBundle, path: str | Path, seed: int | None = None) -> Path:
    """Write a bundle directory: manifest.json plus one RGBA PNG per piece."""
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    files = []
    for piece in bundle.pieces:
        rgba = np.zeros((bundle.piece_size, bundle.piece_size, 4), dtype=np.uint8)
        rgba[..., :3] = np.round(piece.pixels * 255.0).astype(np.uint8)
        rgba[..., 3] = np.where(piece.valid, 255, 0).astype(np.uint8)
        name = _piece_filename(piece.id)
        Image.fromarray(rgba, mode="RGBA").save(path / name)
        files.append(name)
    manifest = {
        "format_version": 1,
        "tool_version": __version__,
        "piece_size": bundle.piece_size,
        "rows": bundle.rows,
        "cols": bundle.cols,
        "erosion_width": bundle.erosion_width,
        "shuffled": bundle.shuffled,
        "pieces": files,
    }
    if seed is not None:
        manifest["seed"] = seed
    (path / MANIFEST_NAME).write_text(json.dumps(manifest, indent=2))
    return path


def load_bundle(path: str | Path) -> PuzzleBundle:
    """Load a bundle directory written by :func:`save_bundle`."""
    path = Path(path)
    manifest_path = path / MANIFEST_NAME
    if not manifest_path.exists():
        raise FileNotFoundError(f"no {MANIFEST_NAME} in {path}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"corrupt manifest in {path}: {exc}") from exc
    for key in ("piece_size", "rows", "cols", "erosion_width", "shuffled", "pieces"):
        if key not in manifest:
            raise ValueError(f"manifest in {path} is missing field {key!r}")
    size = int(manifest["piece_size"])
    rows, cols = int(manifest["rows"]), int(manifest["cols"])
    files = manifest["pieces"]
    if rows * cols != len(files):
        raise ValueError(
            f"manifest dimension mismatch: rows*cols = {rows * cols} but "
            f"{len(files)} piece files listed"
        )
    pieces = []
    for pid, name in enumerate(files):
        file_path = path / name
        if not file_path.exists():
            raise FileNotFoundError(f"piece {pid} file missing: {file_path}")
        rgba = np.asarray(Image.open(file_path).convert("RGBA"))
        if rgba.shape[:2] != (size, size):
            raise ValueError(
                f"piece {pid} has size {rgba.shape[:2]}, expected {(size, size)}"
            )
        pixels = (rgba[..., :3].astype(np.float32) / 255.0).astype(np.float32)
        valid = rgba[..., 3] > 127
        pixels[~valid] = 0.0
        pieces.append(PieceImage(pid, pixels, valid))
    return PuzzleBundle(
        pieces, size, rows, cols,
        erosion_width=int(manifest["erosion_width"]),
        shuffled=bool(manifest["shuffled"]),
    )


def save_solution(solution: Solution, path: str | Path) -> Path:
    path = Path(path)
    payload = {
        "tool_version": __version__,
        "slots": {str(pid): list(slot) for pid, slot in solution.items()},
    }
    path.write_text(json.dumps(payload, indent=2))
    return path


def load_solution(path: str | Path) -> Solution:
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"corrupt solution file {path}: {exc}") from exc
    if "slots" not in payload:
        raise ValueError(f"solution file {path} is missing 'slots'")
    return Solution({int(k): tuple(v) for k, v in payload["slots"].items()})


def save_image(image: np.ndarray, path: str | Path, seed: int | None = None) -> Path:
    """Write a float [0,1] raster as an 8-bit PNG with tool metadata."""
    path = Path(path)
    arr = np.clip(np.asarray(image), 0.0, 1.0)
    data = np.round(arr * 255.0).astype(np.uint8)
    info = PngImagePlugin.PngInfo()
    info.add_text("Software", f"gapsolver {__version__}")
    if seed is not None:
        info.add_text("gapsolver:seed", str(seed))
    Image.fromarray(data).save(path, pnginfo=info)
    return path


def load_image(path: str | Path) -> np.ndarray:
    """Read an image file as a quantized float RGB array."""
    return quantize_image(np.asarray(Image.open(path).convert("RGB")))
