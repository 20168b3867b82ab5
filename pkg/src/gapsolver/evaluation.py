"""Standard puzzle reconstruction measures and dataset reports.

Adjacencies are counted once per edge via the canonical Right/Down
directions; the denominator is rows*(cols-1) + (rows-1)*cols from the
ground-truth grid.
"""

from __future__ import annotations

import csv
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .pieces import Solution
from .placement import Board


def _check_complete(board: Board, solution: Solution) -> None:
    placed = set(board.piece_ids())
    expected = set(solution.piece_ids())
    if placed != expected:
        missing = sorted(expected - placed)
        extra = sorted(placed - expected)
        raise ValueError(
            f"board is not a complete placement of the solution "
            f"(missing {missing[:5]}, unexpected {extra[:5]})"
        )


def neighbor_measure(board: Board, solution: Solution) -> float:
    """Fraction of ground-truth adjacencies preserved by the board.

    Translation-invariant: only relative placement matters.
    """
    _check_complete(board, solution)
    total = solution.rows * (solution.cols - 1) + (solution.rows - 1) * solution.cols
    if total == 0:
        return 1.0  # single-piece puzzle: nothing to get wrong
    correct = 0
    for (r, c), pid in board.items():
        for dr, dc in ((0, 1), (1, 0)):
            other = board.piece_at((r + dr, c + dc))
            if other is None:
                continue
            sr, sc = solution[pid]
            if solution.piece_at((sr + dr, sc + dc)) == other:
                correct += 1
    return correct / total


def direct_measure(board: Board, solution: Solution) -> float:
    """Fraction of pieces at their exact ground-truth slot.

    In constrained mode positions are compared as-is.  In unbounded mode the
    board is first shifted by the translation that maximizes the measure
    (ties by smallest shift).
    """
    _check_complete(board, solution)
    n = len(solution)
    if board.frame is not None:
        hits = sum(
            1 for (r, c), pid in board.items() if solution[pid] == (r, c)
        )
        return hits / n
    shifts = Counter()
    for (r, c), pid in board.items():
        sr, sc = solution[pid]
        shifts[(sr - r, sc - c)] += 1
    best = max(
        shifts.items(),
        key=lambda kv: (kv[1], -(abs(kv[0][0]) + abs(kv[0][1])), -kv[0][0], -kv[0][1]),
    )
    return best[1] / n


def perfect(board: Board, solution: Solution) -> bool:
    """True when every piece sits at its ground-truth slot (after unbounded
    alignment)."""
    return direct_measure(board, solution) == 1.0


@dataclass
class EvalRow:
    puzzle_id: str
    n_pieces: int
    erosion_pct: float
    scorer: str
    neighbor: float
    direct: float
    perfect: bool


@dataclass
class EvalReport:
    rows: list[EvalRow] = field(default_factory=list)

    @property
    def mean_neighbor(self) -> float:
        return sum(r.neighbor for r in self.rows) / len(self.rows)

    @property
    def mean_direct(self) -> float:
        return sum(r.direct for r in self.rows) / len(self.rows)

    @property
    def perfect_count(self) -> int:
        return sum(1 for r in self.rows if r.perfect)


def evaluate_dataset(
    entries: list[tuple[str, Board, Solution]],
    erosion_pct: float = 0.0,
    scorer: str = "unknown",
) -> EvalReport:
    """Evaluate a list of (puzzle id, board, solution) triples."""
    if not entries:
        raise ValueError("cannot evaluate an empty dataset")
    report = EvalReport()
    for puzzle_id, board, solution in entries:
        report.rows.append(
            EvalRow(
                puzzle_id=str(puzzle_id),
                n_pieces=len(solution),
                erosion_pct=erosion_pct,
                scorer=scorer,
                neighbor=neighbor_measure(board, solution),
                direct=direct_measure(board, solution),
                perfect=perfect(board, solution),
            )
        )
    return report


def write_report_csv(report: EvalReport, path: str | Path, seed: int | None = None) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(f"# gapsolver report v1 tool_version={__version__}\n")
        if seed is not None:
            fh.write(f"# seed={seed}\n")
        writer = csv.writer(fh)
        writer.writerow(
            ["puzzle_id", "pieces", "erosion_pct", "scorer", "neighbor", "direct", "perfect"]
        )
        for r in report.rows:
            writer.writerow(
                [r.puzzle_id, r.n_pieces, r.erosion_pct, r.scorer,
                 f"{r.neighbor:.6f}", f"{r.direct:.6f}", int(r.perfect)]
            )
        writer.writerow(
            ["mean", sum(r.n_pieces for r in report.rows), "", "",
             f"{report.mean_neighbor:.6f}", f"{report.mean_direct:.6f}",
             report.perfect_count]
        )
    return path


def format_report(report: EvalReport) -> str:
    """Plain-text table of per-puzzle rows plus dataset means."""
    header = f"{'puzzle':<20} {'pieces':>6} {'neighbor':>9} {'direct':>7} {'perfect':>7}"
    lines = [header, "-" * len(header)]
    for r in report.rows:
        lines.append(
            f"{r.puzzle_id:<20} {r.n_pieces:>6} {r.neighbor:>9.3f} "
            f"{r.direct:>7.3f} {str(r.perfect):>7}"
        )
    lines.append("-" * len(header))
    lines.append(
        f"{'mean':<20} {'':>6} {report.mean_neighbor:>9.3f} "
        f"{report.mean_direct:>7.3f} {report.perfect_count:>7}"
    )
    return "\n".join(lines)
