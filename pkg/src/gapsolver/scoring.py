"""Pairwise dissimilarity scoring.

A dissimilarity tensor holds, for every ordered piece pair (x, y) and
direction d, a non-negative cost for placing y adjacent to x in direction d.
Left/up planes mirror the right/down planes (D[x, y, L] = D[y, x, R]) and
the diagonal carries +inf so a piece can never match itself.

Three scorers are provided: a ground-truth oracle, a color-difference
baseline over the facing edges, and the trained classifier whose probability
p becomes the cost -ln(p).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from sklearn.base import BaseEstimator

from . import __version__
from .losses import PROB_EPS
from .networks import ModelCheckpoint, load_checkpoint
from .pairs import Direction, join_pair
from .pieces import PuzzleBundle, Solution, erosion_width_for
from .training import MODE_NO_INPAINT

DIRECTION_LETTERS = {
    Direction.RIGHT: "R",
    Direction.DOWN: "D",
    Direction.LEFT: "L",
    Direction.UP: "U",
}
_LETTER_DIRECTIONS = {v: k for k, v in DIRECTION_LETTERS.items()}

ORACLE_MISMATCH = 1000.0


@dataclass
class DissimilarityTensor:
    """(N, N, 4) pairwise costs plus provenance metadata."""

    values: np.ndarray
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 3 or self.values.shape[2] != 4:
            raise ValueError(
                f"expected an (N, N, 4) tensor, got shape {self.values.shape}"
            )
        if self.values.shape[0] != self.values.shape[1]:
            raise ValueError(
                f"expected a square tensor, got shape {self.values.shape}"
            )

    @property
    def n_pieces(self) -> int:
        return self.values.shape[0]

    def __getitem__(self, key):
        return self.values[key]


def _empty_values(n: int) -> np.ndarray:
    values = np.zeros((n, n, 4), dtype=np.float64)
    idx = np.arange(n)
    values[idx, idx, :] = np.inf
    return values


def _mirror_secondary(values: np.ndarray) -> None:
    """Fill left/up planes from right/down: D[x, y, L] = D[y, x, R]."""
    values[:, :, Direction.LEFT.value] = values[:, :, Direction.RIGHT.value].T
    values[:, :, Direction.UP.value] = values[:, :, Direction.DOWN.value].T


def oracle_dissimilarity(solution: Solution) -> DissimilarityTensor:
    """Ground-truth costs: 0 for true adjacencies, 1000 otherwise."""
    n = len(solution)
    values = _empty_values(n)
    values[~np.eye(n, dtype=bool)] = ORACLE_MISMATCH
    for x, _ in solution.items():
        for d in (Direction.RIGHT, Direction.DOWN):
            y = solution.neighbor(x, d.offset)
            if y is not None:
                values[x, y, d.value] = 0.0
    _mirror_secondary(values)
    return DissimilarityTensor(values, {"scorer": "oracle"})


def _edge_strip(piece, direction: Direction) -> tuple[np.ndarray, np.ndarray]:
    """Outermost column/row of the piece that still has valid pixels.

    Returns (pixels (S, 3), valid (S,)) along the edge facing ``direction``.
    """
    pixels, valid = piece.pixels, piece.valid
    if direction is Direction.RIGHT:
        cols = np.flatnonzero(valid.any(axis=0))
        if cols.size == 0:
            return pixels[:, 0], np.zeros(pixels.shape[0], dtype=bool)
        c = cols[-1]
        return pixels[:, c], valid[:, c]
    if direction is Direction.LEFT:
        cols = np.flatnonzero(valid.any(axis=0))
        if cols.size == 0:
            return pixels[:, 0], np.zeros(pixels.shape[0], dtype=bool)
        c = cols[0]
        return pixels[:, c], valid[:, c]
    rows = np.flatnonzero(valid.any(axis=1))
    if rows.size == 0:
        return pixels[0], np.zeros(pixels.shape[1], dtype=bool)
    r = rows[-1] if direction is Direction.DOWN else rows[0]
    return pixels[r], valid[r]


def baseline_dissimilarity(bundle: PuzzleBundle) -> DissimilarityTensor:
    """Mean squared color difference between the facing valid edges.

    With eroded pieces the compared strips are the outermost columns or rows
    that survived erosion, so the gap itself is skipped rather than matched.
    """
    n = bundle.n_pieces
    if n < 1:
        raise ValueError("bundle has no pieces")
    values = _empty_values(n)
    edges = {
        d: [_edge_strip(bundle.piece(i), d) for i in range(n)]
        for d in Direction
    }
    for x in range(n):
        for y in range(n):
            if x == y:
                continue
            for d, facing in (
                (Direction.RIGHT, Direction.LEFT),
                (Direction.DOWN, Direction.UP),
            ):
                a, a_valid = edges[d][x]
                b, b_valid = edges[facing][y]
                both = a_valid & b_valid
                if not both.any():
                    values[x, y, d.value] = np.inf
                    continue
                diff = a[both].astype(np.float64) - b[both].astype(np.float64)
                values[x, y, d.value] = float(np.mean(diff * diff))
    _mirror_secondary(values)
    return DissimilarityTensor(
        values,
        {"scorer": "baseline", "erosion_width": bundle.erosion_width},
    )


def _check_checkpoint_compatible(
    bundle: PuzzleBundle, checkpoint: ModelCheckpoint
) -> None:
    meta = checkpoint.metadata
    size = meta.get("piece_size")
    if size is not None and size != bundle.piece_size:
        raise ValueError(
            f"checkpoint was trained on {size}px pieces but the bundle has "
            f"{bundle.piece_size}px pieces"
        )
    pct = meta.get("erosion_pct")
    if pct is not None:
        trained = erosion_width_for(bundle.piece_size, float(pct))
        if trained != bundle.erosion_width:
            raise ValueError(
                f"checkpoint erosion width {trained}px does not match the "
                f"bundle erosion width {bundle.erosion_width}px; rescore with "
                "a matching model"
            )


def probability_to_cost(p: float) -> float:
    """Cost of an adjacency probability: -ln(p) with p clamped off 0 and 1."""
    return -math.log(min(max(float(p), PROB_EPS), 1.0 - PROB_EPS))


def pair_probabilities(
    checkpoint: ModelCheckpoint,
    samples: list,
    batch_size: int = 16,
) -> np.ndarray:
    """Classifier probability for each pair sample, batched on CPU."""
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    generator = checkpoint.build_generator()
    discriminator = checkpoint.build_discriminator()
    inpaint = checkpoint.metadata.get("phase2_mode") != MODE_NO_INPAINT
    out = np.empty(len(samples), dtype=np.float64)
    with torch.no_grad():
        for start in range(0, len(samples), batch_size):
            chunk = samples[start : start + batch_size]
            x = torch.stack(
                [
                    torch.from_numpy(np.ascontiguousarray(s.input)).permute(2, 0, 1)
                    for s in chunk
                ]
            ).float()
            if inpaint:
                mask = torch.stack(
                    [torch.from_numpy(s.mask)[None] for s in chunk]
                )
                x = generator(x, mask)
            s_px = x.shape[2]
            crop = x[..., s_px // 2 : s_px // 2 + s_px]
            probs, _ = discriminator(crop)
            out[start : start + len(chunk)] = probs.numpy().astype(np.float64)
    return out


def neural_dissimilarity(
    bundle: PuzzleBundle,
    checkpoint: ModelCheckpoint,
    batch_size: int = 16,
) -> DissimilarityTensor:
    """Costs -ln p from the trained classifier over all ordered pairs."""
    _check_checkpoint_compatible(bundle, checkpoint)
    n = bundle.n_pieces
    if n < 1:
        raise ValueError("bundle has no pieces")
    values = _empty_values(n)
    w = bundle.erosion_width

    samples = []
    keys = []
    for d in (Direction.RIGHT, Direction.DOWN):
        for x in range(n):
            for y in range(n):
                if x == y:
                    continue
                samples.append(
                    join_pair(bundle.piece(x), bundle.piece(y), d, w)
                )
                keys.append((x, y, d.value))
    if samples:
        probs = pair_probabilities(checkpoint, samples, batch_size)
        for (x, y, dv), p in zip(keys, probs):
            values[x, y, dv] = probability_to_cost(p)
    _mirror_secondary(values)

    off_diagonal = ~np.eye(n, dtype=bool)
    if not np.isfinite(values[off_diagonal]).all():
        raise RuntimeError("classifier produced non-finite dissimilarities")
    return DissimilarityTensor(
        values,
        {
            "scorer": "neural",
            "erosion_width": w,
            "checkpoint_phase": checkpoint.phase,
            "phase2_mode": checkpoint.metadata.get("phase2_mode", ""),
        },
    )


# ---------------------------------------------------------------------------
# CSV round trip
# ---------------------------------------------------------------------------


def save_tensor(
    tensor: DissimilarityTensor, path: str | Path, seed: int | None = None
) -> Path:
    """Write ``x,y,dir,value`` rows sorted by (x, y, direction)."""
    path = Path(path)
    lines = [
        f"# gapsolver {__version__} dissimilarity",
        f"# n_pieces={tensor.n_pieces}",
    ]
    for key in ("scorer", "erosion_width", "checkpoint_phase", "phase2_mode"):
        if key in tensor.metadata and tensor.metadata[key] != "":
            lines.append(f"# {key}={tensor.metadata[key]}")
    if seed is not None:
        lines.append(f"# seed={seed}")
    lines.append("x,y,dir,value")
    n = tensor.n_pieces
    for x in range(n):
        for y in range(n):
            for d in Direction:
                v = float(tensor.values[x, y, d.value])
                lines.append(f"{x},{y},{DIRECTION_LETTERS[d]},{v!r}")
    path.write_text("\n".join(lines) + "\n")
    return path


def load_tensor(path: str | Path) -> DissimilarityTensor:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"dissimilarity file not found: {path}")
    metadata: dict = {}
    n_pieces = None
    rows = []
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line.lstrip("#").strip()
            if "=" in body:
                key, _, value = body.partition("=")
                key = key.strip()
                if key == "n_pieces":
                    n_pieces = int(value)
                else:
                    metadata[key] = value.strip()
            continue
        if line == "x,y,dir,value":
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise ValueError(f"{path}:{lineno}: expected x,y,dir,value")
        try:
            x, y = int(parts[0]), int(parts[1])
            d = _LETTER_DIRECTIONS[parts[2]]
            v = float(parts[3])
        except (ValueError, KeyError) as exc:
            raise ValueError(f"{path}:{lineno}: bad row {line!r}") from exc
        rows.append((x, y, d.value, v))
    if not rows:
        raise ValueError(f"{path}: no dissimilarity rows")
    if n_pieces is None:
        n_pieces = max(max(x, y) for x, y, _, _ in rows) + 1
    values = np.full((n_pieces, n_pieces, 4), np.nan)
    for x, y, dv, v in rows:
        if not (0 <= x < n_pieces and 0 <= y < n_pieces):
            raise ValueError(f"{path}: piece index out of range in ({x}, {y})")
        values[x, y, dv] = v
    if np.isnan(values).any():
        raise ValueError(f"{path}: missing entries for some (x, y, dir) triples")
    return DissimilarityTensor(values, metadata)


# ---------------------------------------------------------------------------
# Estimator wrappers
# ---------------------------------------------------------------------------


class OracleScorer(BaseEstimator):
    """Scores from the known solution; for pipeline validation only."""

    name = "oracle"

    def __init__(self, solution: Solution | None = None):
        self.solution = solution

    def fit(self, X=None, y: Solution | None = None) -> "OracleScorer":
        self.solution_ = y if y is not None else self.solution
        return self

    def transform(self, bundle: PuzzleBundle | None = None) -> DissimilarityTensor:
        solution = getattr(self, "solution_", None) or self.solution
        if solution is None:
            raise ValueError("OracleScorer needs a solution; pass it to fit()")
        if bundle is not None and bundle.n_pieces != len(solution):
            raise ValueError(
                f"bundle has {bundle.n_pieces} pieces but the solution covers "
                f"{len(solution)}"
            )
        return oracle_dissimilarity(solution)


class BaselineScorer(BaseEstimator):
    """Edge color difference scorer; no training required."""

    name = "baseline"

    def fit(self, X=None, y=None) -> "BaselineScorer":
        return self

    def transform(self, bundle: PuzzleBundle) -> DissimilarityTensor:
        return baseline_dissimilarity(bundle)


class NeuralScorer(BaseEstimator):
    """Trained-classifier scorer built from a checkpoint."""

    name = "neural"

    def __init__(
        self,
        checkpoint: ModelCheckpoint | None = None,
        checkpoint_path: str | Path | None = None,
        batch_size: int = 16,
    ):
        self.checkpoint = checkpoint
        self.checkpoint_path = checkpoint_path
        self.batch_size = batch_size

    def fit(self, X=None, y=None) -> "NeuralScorer":
        if self.checkpoint is not None:
            self.checkpoint_ = self.checkpoint
        elif self.checkpoint_path is not None:
            self.checkpoint_ = load_checkpoint(self.checkpoint_path)
        else:
            raise ValueError("NeuralScorer needs a checkpoint or a checkpoint path")
        return self

    def transform(self, bundle: PuzzleBundle) -> DissimilarityTensor:
        if not hasattr(self, "checkpoint_"):
            self.fit()
        return neural_dissimilarity(bundle, self.checkpoint_, self.batch_size)
