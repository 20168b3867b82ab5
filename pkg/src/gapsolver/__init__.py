"""gapsolver: square jigsaw puzzles with eroded piece boundaries.

The pipeline inpaints the gap between candidate piece pairs with an
adversarially trained generator, turns the discriminator's adjacency
probability into a pairwise dissimilarity, and greedily places pieces.
"""

__version__ = "0.1.0"

from .pairs import Direction, PairSample, center_crop, join_pair  # noqa: E402
from .pieces import (  # noqa: E402
    PieceImage,
    PuzzleBundle,
    Solution,
    erode,
    load_bundle,
    load_image,
    load_solution,
    render,
    save_bundle,
    save_image,
    save_solution,
    shuffle,
    slice_image,
)
from .placement import Board, GreedyPlacer, best_buddies, compatibility, place  # noqa: E402
from .scoring import (  # noqa: E402
    BaselineScorer,
    DissimilarityTensor,
    NeuralScorer,
    OracleScorer,
    baseline_dissimilarity,
    load_tensor,
    neural_dissimilarity,
    oracle_dissimilarity,
    save_tensor,
)
from .evaluation import (  # noqa: E402
    EvalReport,
    direct_measure,
    evaluate_dataset,
    neighbor_measure,
    perfect,
)
from .networks import (  # noqa: E402
    GapGenerator,
    ModelCheckpoint,
    PatchDiscriminator,
    load_checkpoint,
    save_checkpoint,
)
from .training import (  # noqa: E402
    TrainConfig,
    evaluate_separation,
    train_phase1,
    train_phase2,
)
from .solver import PuzzleSolver  # noqa: E402

__all__ = [
    "Board",
    "BaselineScorer",
    "Direction",
    "DissimilarityTensor",
    "EvalReport",
    "GapGenerator",
    "GreedyPlacer",
    "ModelCheckpoint",
    "PatchDiscriminator",
    "NeuralScorer",
    "OracleScorer",
    "PairSample",
    "PieceImage",
    "PuzzleBundle",
    "PuzzleSolver",
    "Solution",
    "TrainConfig",
    "baseline_dissimilarity",
    "best_buddies",
    "center_crop",
    "compatibility",
    "direct_measure",
    "erode",
    "evaluate_dataset",
    "evaluate_separation",
    "join_pair",
    "load_bundle",
    "load_checkpoint",
    "load_image",
    "load_solution",
    "load_tensor",
    "neighbor_measure",
    "neural_dissimilarity",
    "oracle_dissimilarity",
    "perfect",
    "place",
    "render",
    "save_bundle",
    "save_checkpoint",
    "save_image",
    "save_solution",
    "save_tensor",
    "shuffle",
    "slice_image",
    "train_phase1",
    "train_phase2",
]
