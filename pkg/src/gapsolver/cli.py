"""Command line interface.

Subcommands cover the whole workflow: generate puzzle bundles, train both
phases, score bundles into dissimilarity tensors, solve, evaluate, render,
and run the generate-score-solve-evaluate pipeline in one call.

Every subcommand takes ``--config FILE`` with plain ``key=value`` lines
(# comments allowed); command line flags win over config values.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import __version__
from .evaluation import (
    EvalReport,
    EvalRow,
    direct_measure,
    evaluate_dataset,
    format_report,
    neighbor_measure,
    perfect,
    write_report_csv,
)
from .networks import load_checkpoint, save_checkpoint
from .pieces import (
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
from .placement import Board, GreedyPlacer
from .scoring import (
    BaselineScorer,
    NeuralScorer,
    OracleScorer,
    load_tensor,
    save_tensor,
)
from .training import (
    PHASE2_MODES,
    TrainConfig,
    configure_threads,
    train_phase1,
    train_phase2,
    write_loss_log,
)

SCORER_NAMES = ("baseline", "oracle", "neural")


def read_config(path: str | Path) -> dict[str, str]:
    """Parse a plain key=value config file; '#' starts a comment."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    out: dict[str, str] = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_widths(text: str) -> tuple[int, ...]:
    try:
        widths = tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError as exc:
        raise ValueError(f"bad width list {text!r}: {exc}") from exc
    if not widths:
        raise ValueError("width list is empty")
    return widths


class Options:
    """Resolved view over CLI args and the optional config file."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.config = read_config(args.config) if getattr(args, "config", None) else {}

    def get(self, name: str, default=None, cast=None):
        value = getattr(self.args, name, None)
        if value is not None:
            return value
        if name in self.config:
            raw = self.config[name]
            return cast(raw) if cast is not None else raw
        return default

    def require(self, name: str, flag: str, cast=None):
        value = self.get(name, cast=cast)
        if value is None:
            raise ValueError(f"missing required option {flag}")
        return value


def _train_config(opts: Options) -> TrainConfig:
    base = TrainConfig()
    return TrainConfig(
        piece_size=opts.get("piece_size", base.piece_size, int),
        erosion_pct=opts.get("erosion", base.erosion_pct, float),
        erode_outer_frame=opts.get(
            "erode_outer_frame", base.erode_outer_frame, _parse_bool
        ),
        generator_widths=opts.get(
            "generator_widths", base.generator_widths, _parse_widths
        ),
        discriminator_widths=opts.get(
            "discriminator_widths", base.discriminator_widths, _parse_widths
        ),
        epochs_phase1=opts.get("epochs", base.epochs_phase1, int),
        epochs_phase2=opts.get("epochs2", base.epochs_phase2, int),
        examples_phase1=opts.get("examples", base.examples_phase1, int),
        examples_phase2=opts.get("examples2", base.examples_phase2, int),
        lr_generator=opts.get("lr_generator", base.lr_generator, float),
        lr_discriminator=opts.get("lr_discriminator", base.lr_discriminator, float),
        lr_phase2=opts.get("lr_phase2", base.lr_phase2, float),
        l1_weight=opts.get("l1_weight", base.l1_weight, float),
        phase2_mode=opts.get("mode", base.phase2_mode),
        seed=opts.get("seed", base.seed, int),
    )


def _load_images(paths: list[str]) -> list:
    if not paths:
        raise ValueError("no input images given")
    return [load_image(p) for p in paths]


def _build_scorer(name, checkpoint_path, solution, batch_size):
    if name == "baseline":
        return BaselineScorer()
    if name == "oracle":
        if solution is None:
            raise ValueError("the oracle scorer needs --solution")
        return OracleScorer(solution)
    if name == "neural":
        if checkpoint_path is None:
            raise ValueError("the neural scorer needs --checkpoint")
        return NeuralScorer(checkpoint_path=checkpoint_path, batch_size=batch_size)
    raise ValueError(f"unknown scorer {name!r}; pick one of {SCORER_NAMES}")


def _progress_printer(enabled: bool):
    if not enabled:
        return None

    def show(stats):
        parts = [f"{stats.phase} epoch {stats.epoch}: d_loss={stats.d_loss:.4f}"]
        if stats.g_loss == stats.g_loss:  # not NaN
            parts.append(f"g_loss={stats.g_loss:.4f} l1={stats.l1:.4f}")
        if stats.p_positive == stats.p_positive:
            parts.append(
                f"p_pos={stats.p_positive:.3f} p_neg={stats.p_negative:.3f}"
            )
        print(" ".join(parts))

    return show


# ---------------------------------------------------------------------------
# subcommand handlers
# ---------------------------------------------------------------------------


def _cmd_generate(opts: Options) -> int:
    out_dir = Path(opts.require("out", "--out"))
    piece_size = opts.get("piece_size", 64, int)
    erosion = opts.get("erosion", 0.07, float)
    seed = opts.get("seed", 0, int)
    do_shuffle = opts.get("shuffle", True, _parse_bool)
    images = opts.get("images") or []
    if not images:
        raise ValueError("no input images given")

    out_dir.mkdir(parents=True, exist_ok=True)
    for i, image_path in enumerate(images):
        image = load_image(image_path)
        bundle, solution = slice_image(image, piece_size)
        if erosion > 0:
            bundle = erode(bundle, erosion)
        puzzle_seed = seed + i
        if do_shuffle:
            bundle, solution = shuffle(bundle, puzzle_seed, solution)
        name = Path(image_path).stem
        puzzle_dir = out_dir / f"{name}_{bundle.rows}x{bundle.cols}"
        save_bundle(bundle, puzzle_dir, seed=puzzle_seed)
        save_solution(solution, puzzle_dir / "solution.json")
        print(
            f"{puzzle_dir}: {bundle.n_pieces} pieces "
            f"({bundle.rows}x{bundle.cols}), erosion {bundle.erosion_width}px"
        )
    return 0


def _cmd_train_inpaint(opts: Options) -> int:
    configure_threads(opts.get("threads", 1, int))
    config = _train_config(opts)
    images = _load_images(opts.require("images", "images"))
    out = Path(opts.require("out", "--out"))
    checkpoint_dir = opts.get("checkpoint_dir")
    log_path = opts.get("log")

    checkpoint, history = train_phase1(
        images,
        config,
        checkpoint_dir=checkpoint_dir,
        progress=_progress_printer(not opts.get("quiet", False, _parse_bool)),
    )
    out.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(checkpoint, out)
    if log_path:
        write_loss_log(history, log_path, seed=config.seed)
    print(f"saved inpainting checkpoint to {out}")
    return 0


def _cmd_train_classify(opts: Options) -> int:
    configure_threads(opts.get("threads", 1, int))
    config = _train_config(opts)
    images = _load_images(opts.require("images", "images"))
    out = Path(opts.require("out", "--out"))
    checkpoint_path = opts.get("checkpoint")
    warm = load_checkpoint(checkpoint_path) if checkpoint_path else None

    checkpoint, history = train_phase2(
        images,
        config,
        warm,
        checkpoint_dir=opts.get("checkpoint_dir"),
        progress=_progress_printer(not opts.get("quiet", False, _parse_bool)),
    )
    out.parent.mkdir(parents=True, exist_ok=True)
    save_checkpoint(checkpoint, out)
    log_path = opts.get("log")
    if log_path:
        write_loss_log(history, log_path, seed=config.seed)
    print(f"saved classifier checkpoint to {out}")
    return 0


def _cmd_score(opts: Options) -> int:
    configure_threads(opts.get("threads", 1, int))
    bundle = load_bundle(opts.require("bundle", "--bundle"))
    name = opts.get("scorer", "baseline")
    solution_path = opts.get("solution")
    solution = load_solution(solution_path) if solution_path else None
    scorer = _build_scorer(
        name,
        opts.get("checkpoint"),
        solution,
        opts.get("batch_size", 16, int),
    )
    tensor = scorer.fit(None, solution).transform(bundle)
    out = Path(opts.require("out", "--out"))
    out.parent.mkdir(parents=True, exist_ok=True)
    save_tensor(tensor, out, seed=opts.get("seed", None, int))
    print(f"wrote {tensor.n_pieces}-piece dissimilarity tensor to {out}")
    return 0


def _resolve_frame(opts: Options, bundle) -> tuple[int, int] | None:
    if opts.get("unbounded", False, _parse_bool):
        return None
    rows = opts.get("rows", None, int)
    cols = opts.get("cols", None, int)
    if (rows is None) != (cols is None):
        raise ValueError("--rows and --cols must be given together")
    if rows is not None:
        return (rows, cols)
    if bundle is not None:
        return (bundle.rows, bundle.cols)
    raise ValueError("need --rows/--cols, --unbounded, or a bundle to size the board")


def _cmd_solve(opts: Options) -> int:
    configure_threads(opts.get("threads", 1, int))
    tensor_path = opts.get("tensor")
    bundle_path = opts.get("bundle")
    if tensor_path is None and bundle_path is None:
        raise ValueError("give --tensor or --bundle")
    bundle = load_bundle(bundle_path) if bundle_path else None

    if tensor_path is not None:
        tensor = load_tensor(tensor_path)
    else:
        solution_path = opts.get("solution")
        solution = load_solution(solution_path) if solution_path else None
        scorer = _build_scorer(
            opts.get("scorer", "baseline"),
            opts.get("checkpoint"),
            solution,
            opts.get("batch_size", 16, int),
        )
        tensor = scorer.fit(None, solution).transform(bundle)

    frame = _resolve_frame(opts, bundle)
    placer = GreedyPlacer(frame=frame, max_extent=opts.get("max_extent", None, int))
    board = placer.fit().predict(tensor)
    out = Path(opts.require("out", "--out"))
    out.parent.mkdir(parents=True, exist_ok=True)
    board.save(out, seed=opts.get("seed", None, int))
    print(f"placed {len(board)} pieces; board written to {out}")
    return 0


def _cmd_evaluate(opts: Options) -> int:
    dataset = opts.get("dataset")
    out = opts.get("out")
    scorer_name = opts.get("scorer_name", "unknown")
    if dataset is not None:
        entries = []
        erosion_pct = 0.0
        for child in sorted(Path(dataset).iterdir()):
            board_file = child / "board.txt"
            if not child.is_dir() or not board_file.exists():
                continue
            bundle = load_bundle(child)
            erosion_pct = bundle.erosion_width / bundle.piece_size
            entries.append(
                (
                    child.name,
                    Board.load(board_file),
                    load_solution(child / "solution.json"),
                )
            )
        if not entries:
            raise ValueError(f"no puzzle directories with board.txt under {dataset}")
        report = evaluate_dataset(entries, erosion_pct, scorer_name)
    else:
        bundle_path = opts.require("bundle", "--bundle")
        board = Board.load(opts.require("board", "--board"))
        solution_path = opts.get("solution") or str(Path(bundle_path) / "solution.json")
        solution = load_solution(solution_path)
        bundle = load_bundle(bundle_path)
        report = evaluate_dataset(
            [(Path(bundle_path).name, board, solution)],
            bundle.erosion_width / bundle.piece_size,
            scorer_name,
        )
    print(format_report(report))
    if out:
        write_report_csv(report, out, seed=opts.get("seed", None, int))
        print(f"report written to {out}")
    return 0


def _cmd_render(opts: Options) -> int:
    bundle = load_bundle(opts.require("bundle", "--bundle"))
    board_path = opts.get("board")
    if board_path is not None:
        board = Board.load(board_path)
    else:
        board = Board((bundle.rows, bundle.cols))
        for pid in range(bundle.n_pieces):
            board.place(pid, (pid // bundle.cols, pid % bundle.cols))
    image = render(board, bundle)
    out = Path(opts.require("out", "--out"))
    out.parent.mkdir(parents=True, exist_ok=True)
    save_image(image, out)
    print(f"rendered {image.shape[1]}x{image.shape[0]} image to {out}")
    return 0


def _cmd_pipeline(opts: Options) -> int:
    configure_threads(opts.get("threads", 1, int))
    out_dir = Path(opts.require("out", "--out"))
    piece_size = opts.get("piece_size", 64, int)
    erosion = opts.get("erosion", 0.07, float)
    seed = opts.get("seed", 0, int)
    scorer_name = opts.get("scorer", "baseline")
    checkpoint_path = opts.get("checkpoint")
    batch_size = opts.get("batch_size", 16, int)
    images = opts.get("images") or []
    if not images:
        raise ValueError("no input images given")

    out_dir.mkdir(parents=True, exist_ok=True)
    rows_out: list[EvalRow] = []
    for i, image_path in enumerate(images):
        image = load_image(image_path)
        bundle, solution = slice_image(image, piece_size)
        if erosion > 0:
            bundle = erode(bundle, erosion)
        puzzle_seed = seed + i
        bundle, solution = shuffle(bundle, puzzle_seed, solution)

        name = f"{Path(image_path).stem}_{bundle.rows}x{bundle.cols}"
        puzzle_dir = out_dir / name
        save_bundle(bundle, puzzle_dir, seed=puzzle_seed)
        save_solution(solution, puzzle_dir / "solution.json")

        scorer = _build_scorer(
            scorer_name,
            checkpoint_path,
            solution if scorer_name == "oracle" else None,
            batch_size,
        )
        tensor = scorer.fit(None, solution).transform(bundle)
        save_tensor(tensor, puzzle_dir / "dissimilarity.csv", seed=puzzle_seed)

        board = GreedyPlacer(frame=(bundle.rows, bundle.cols)).fit().predict(tensor)
        board.save(puzzle_dir / "board.txt", seed=puzzle_seed)
        save_image(render(board, bundle), puzzle_dir / "solved.png")

        rows_out.append(
            EvalRow(
                puzzle_id=name,
                n_pieces=bundle.n_pieces,
                erosion_pct=erosion,
                scorer=scorer_name,
                neighbor=neighbor_measure(board, solution),
                direct=direct_measure(board, solution),
                perfect=perfect(board, solution),
            )
        )

    report = EvalReport(rows=rows_out)
    print(format_report(report))
    write_report_csv(report, out_dir / "report.csv", seed=seed)
    print(f"report written to {out_dir / 'report.csv'}")
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="key=value config file")
    sub.add_argument("--seed", type=int, help="random seed (default 0)")
    sub.add_argument("--threads", type=int, help="torch thread count (default 1)")


def _add_train_options(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("images", nargs="*", help="training image files")
    sub.add_argument("--out", help="checkpoint output path (.pt)")
    sub.add_argument("--piece-size", type=int, dest="piece_size")
    sub.add_argument("--erosion", type=float, help="erosion fraction, e.g. 0.07")
    sub.add_argument(
        "--erode-outer-frame",
        dest="erode_outer_frame",
        action="store_const",
        const=True,
        help="also erode the non-facing piece edges in training pairs",
    )
    sub.add_argument("--epochs", type=int, help="inpainting epochs")
    sub.add_argument("--epochs2", type=int, help="classifier epochs")
    sub.add_argument("--examples", type=int, help="inpainting examples per epoch")
    sub.add_argument("--examples2", type=int, help="classifier examples per epoch")
    sub.add_argument("--lr-generator", type=float, dest="lr_generator")
    sub.add_argument("--lr-discriminator", type=float, dest="lr_discriminator")
    sub.add_argument("--lr-phase2", type=float, dest="lr_phase2")
    sub.add_argument("--l1-weight", type=float, dest="l1_weight")
    sub.add_argument("--generator-widths", dest="generator_widths", type=_parse_widths)
    sub.add_argument(
        "--discriminator-widths", dest="discriminator_widths", type=_parse_widths
    )
    sub.add_argument("--checkpoint-dir", dest="checkpoint_dir",
                     help="directory for per-epoch checkpoints")
    sub.add_argument("--log", help="per-epoch loss CSV path")
    sub.add_argument("--quiet", action="store_const", const=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gapsolver",
        description="Solve square jigsaw puzzles with eroded piece boundaries.",
    )
    parser.add_argument("--version", action="version", version=f"gapsolver {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    sub = commands.add_parser("generate", help="cut, erode, and shuffle puzzles")
    sub.add_argument("images", nargs="*", help="source image files")
    sub.add_argument("--out", help="output directory")
    sub.add_argument("--piece-size", type=int, dest="piece_size")
    sub.add_argument("--erosion", type=float)
    sub.add_argument(
        "--no-shuffle", dest="shuffle", action="store_const", const=False
    )
    _add_common(sub)
    sub.set_defaults(handler=_cmd_generate)

    sub = commands.add_parser("train-inpaint", help="phase 1: adversarial inpainting")
    _add_train_options(sub)
    _add_common(sub)
    sub.set_defaults(handler=_cmd_train_inpaint)

    sub = commands.add_parser("train-classify", help="phase 2: neighbor classifier")
    _add_train_options(sub)
    sub.add_argument("--checkpoint", help="phase-1 checkpoint to start from")
    sub.add_argument("--mode", choices=PHASE2_MODES)
    _add_common(sub)
    sub.set_defaults(handler=_cmd_train_classify)

    sub = commands.add_parser("score", help="build a dissimilarity tensor")
    sub.add_argument("--bundle", help="puzzle bundle directory")
    sub.add_argument("--scorer", choices=SCORER_NAMES)
    sub.add_argument("--checkpoint", help="classifier checkpoint (neural scorer)")
    sub.add_argument("--solution", help="solution JSON (oracle scorer)")
    sub.add_argument("--batch-size", type=int, dest="batch_size")
    sub.add_argument("--out", help="output CSV path")
    _add_common(sub)
    sub.set_defaults(handler=_cmd_score)

    sub = commands.add_parser("solve", help="place pieces from a tensor or bundle")
    sub.add_argument("--tensor", help="dissimilarity CSV from 'score'")
    sub.add_argument("--bundle", help="bundle directory (scored inline)")
    sub.add_argument("--scorer", choices=SCORER_NAMES)
    sub.add_argument("--checkpoint")
    sub.add_argument("--solution")
    sub.add_argument("--batch-size", type=int, dest="batch_size")
    sub.add_argument("--rows", type=int)
    sub.add_argument("--cols", type=int)
    sub.add_argument(
        "--unbounded", action="store_const", const=True,
        help="grow the board freely instead of fixing rows x cols",
    )
    sub.add_argument("--max-extent", type=int, dest="max_extent")
    sub.add_argument("--out", help="board output path")
    _add_common(sub)
    sub.set_defaults(handler=_cmd_solve)

    sub = commands.add_parser("evaluate", help="measure a solved board")
    sub.add_argument("--bundle")
    sub.add_argument("--board")
    sub.add_argument("--solution")
    sub.add_argument("--dataset", help="directory of solved puzzle directories")
    sub.add_argument("--scorer-name", dest="scorer_name")
    sub.add_argument("--out", help="report CSV path")
    _add_common(sub)
    sub.set_defaults(handler=_cmd_evaluate)

    sub = commands.add_parser("render", help="paint a bundle (optionally arranged)")
    sub.add_argument("--bundle")
    sub.add_argument("--board")
    sub.add_argument("--out")
    _add_common(sub)
    sub.set_defaults(handler=_cmd_render)

    sub = commands.add_parser(
        "pipeline", help="generate, score, solve, and evaluate in one pass"
    )
    sub.add_argument("images", nargs="*")
    sub.add_argument("--out")
    sub.add_argument("--piece-size", type=int, dest="piece_size")
    sub.add_argument("--erosion", type=float)
    sub.add_argument("--scorer", choices=SCORER_NAMES)
    sub.add_argument("--checkpoint")
    sub.add_argument("--batch-size", type=int, dest="batch_size")
    _add_common(sub)
    sub.set_defaults(handler=_cmd_pipeline)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        opts = Options(args)
        return args.handler(opts)
    except (ValueError, FileNotFoundError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
