"""End-to-end facade: score a bundle, then place the pieces."""

from __future__ import annotations

from sklearn.base import BaseEstimator, clone

from .evaluation import neighbor_measure
from .pieces import PuzzleBundle, Solution
from .placement import Board, GreedyPlacer
from .scoring import BaselineScorer


class PuzzleSolver(BaseEstimator):
    """Compose a scorer and a placer into one predict(bundle) -> Board.

    ``frame`` controls the board shape: "auto" constrains placement to the
    bundle's recorded rows x cols grid, None defers to the placer's own
    setting, and an explicit (rows, cols) tuple overrides both.
    """

    def __init__(self, scorer=None, placer=None, frame="auto"):
        self.scorer = scorer
        self.placer = placer
        self.frame = frame

    def fit(self, X: PuzzleBundle | None = None, y: Solution | None = None) -> "PuzzleSolver":
        self.scorer_ = clone(self.scorer) if self.scorer is not None else BaselineScorer()
        self.scorer_.fit(X, y)
        self.placer_ = clone(self.placer) if self.placer is not None else GreedyPlacer()
        self.placer_.fit()
        return self

    def predict(self, bundle: PuzzleBundle) -> Board:
        if not hasattr(self, "scorer_"):
            self.fit()
        tensor = self.scorer_.transform(bundle)
        placer = clone(self.placer_)
        if self.frame == "auto":
            placer.set_params(frame=(bundle.rows, bundle.cols))
        elif self.frame is not None:
            placer.set_params(frame=(int(self.frame[0]), int(self.frame[1])))
        return placer.predict(tensor)

    def score(self, bundle: PuzzleBundle, solution: Solution) -> float:
        """Fraction of true adjacencies preserved by the predicted board."""
        return neighbor_measure(self.predict(bundle), solution)
