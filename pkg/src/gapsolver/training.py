"""Two-phase training: adversarial inpainting, then neighbor classification.

Phase 1 trains the generator to fill the eroded band between two adjacent
crops while the discriminator learns real vs. inpainted.  Phase 2 freezes
the generator, warm-starts the discriminator, and retrains it to separate
inpainted true neighbors (now labeled real) from inpainted non-neighbors.

Training examples are described by per-example child seeds drawn once from
the config seed, so datasets are reproducible and materialized lazily.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from . import __version__
from .losses import (
    discriminator_loss_phase1,
    discriminator_loss_phase2,
    generator_loss,
)
from .networks import (
    PHASE_CLASSIFIER,
    PHASE_INPAINTING,
    DiscriminatorArch,
    GapGenerator,
    GeneratorArch,
    ModelCheckpoint,
    PatchDiscriminator,
    sample_to_tensors,
    save_checkpoint,
)
from .pairs import PairSample, make_phase1_example, make_phase2_pair
from .pieces import PuzzleBundle, Solution, slice_image

MODE_WARM = "warm"
MODE_FRESH = "fresh"
MODE_NO_INPAINT = "no-inpaint"
PHASE2_MODES = (MODE_WARM, MODE_FRESH, MODE_NO_INPAINT)

# spawn-key codes keep the example streams of the two phases independent
_STREAM_PHASE1 = 1
_STREAM_PHASE2 = 2
_STREAM_VALIDATION = 3
_STREAM_ORDER = 7


@dataclass
class TrainConfig:
    """Hyperparameters for both phases, defaulting to the full-scale recipe."""

    piece_size: int = 64
    erosion_pct: float = 0.07
    erode_outer_frame: bool = False
    generator_widths: tuple[int, ...] = (64, 128, 256, 512, 512, 512)
    discriminator_widths: tuple[int, ...] = (64, 128, 256)
    epochs_phase1: int = 48
    epochs_phase2: int = 40
    examples_phase1: int = 45000
    examples_phase2: int = 45000
    batch_size: int = 1
    lr_generator: float = 2e-4
    lr_discriminator: float = 1e-4
    lr_phase2: float = 2e-4
    l1_weight: float = 100.0
    phase2_mode: str = MODE_WARM
    seed: int = 0

    def __post_init__(self) -> None:
        if self.batch_size != 1:
            raise ValueError("only batch size 1 is supported")
        if not 0.0 <= self.erosion_pct < 0.5:
            raise ValueError(f"erosion_pct must be in [0, 0.5), got {self.erosion_pct}")
        if self.piece_size < 2 ** len(self.generator_widths):
            raise ValueError(
                f"piece size {self.piece_size} is too small for "
                f"{len(self.generator_widths)} encoder levels"
            )
        for name in ("epochs_phase1", "epochs_phase2"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        for name in ("examples_phase1", "examples_phase2"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        for name in ("lr_generator", "lr_discriminator", "lr_phase2"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.l1_weight < 0:
            raise ValueError("l1_weight must be non-negative")
        if self.phase2_mode not in PHASE2_MODES:
            raise ValueError(
                f"phase2_mode must be one of {PHASE2_MODES}, got {self.phase2_mode!r}"
            )

    def generator_arch(self) -> GeneratorArch:
        return GeneratorArch(widths=tuple(self.generator_widths))

    def discriminator_arch(self) -> DiscriminatorArch:
        return DiscriminatorArch(widths=tuple(self.discriminator_widths))

    def metadata(self) -> dict:
        return {
            "seed": self.seed,
            "piece_size": self.piece_size,
            "erosion_pct": self.erosion_pct,
            "erode_outer_frame": self.erode_outer_frame,
            "l1_weight": self.l1_weight,
            "tool_version": __version__,
        }


@dataclass
class EpochStats:
    """Mean losses for one epoch; probability columns are phase-2 only."""

    phase: str
    epoch: int
    d_loss: float
    g_loss: float = math.nan
    l1: float = math.nan
    p_positive: float = math.nan
    p_negative: float = math.nan


@dataclass
class SeparationResult:
    mean_positive: float
    mean_negative: float
    n_pairs: int

    @property
    def separation(self) -> float:
        return self.mean_positive - self.mean_negative


def configure_threads(n_threads: int) -> None:
    """Pin torch to a fixed thread count for reproducible timing."""
    if n_threads < 1:
        raise ValueError("thread count must be >= 1")
    torch.set_num_threads(n_threads)
    try:
        torch.set_num_interop_threads(n_threads)
    except RuntimeError:
        pass  # interop pool already started; keep the existing setting


def _example_seeds(seed: int, stream: int, count: int) -> np.ndarray:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(stream,))
    return ss.generate_state(count, dtype=np.uint64)


def _epoch_order(seed: int, stream: int, epoch: int, count: int) -> np.ndarray:
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(_STREAM_ORDER, stream, epoch))
    return np.random.default_rng(ss).permutation(count)


def _center_columns(t: torch.Tensor) -> torch.Tensor:
    """Middle square of a (B, C, S, 2S) tensor, matching pairs.center_crop."""
    s = t.shape[2]
    return t[..., s // 2 : s // 2 + s]


def _materialize_phase1(
    images: list[np.ndarray], seed: np.uint64, config: TrainConfig
) -> PairSample:
    rng = np.random.default_rng(int(seed))
    image = images[int(rng.integers(len(images)))]
    return make_phase1_example(
        image,
        rng,
        piece_size=config.piece_size,
        erosion_pct=config.erosion_pct,
        erode_outer_frame=config.erode_outer_frame,
    )


def _materialize_phase2(
    bundles: list[tuple[PuzzleBundle, Solution]],
    seed: np.uint64,
    config: TrainConfig,
) -> tuple[PairSample, PairSample]:
    rng = np.random.default_rng(int(seed))
    bundle, solution = bundles[int(rng.integers(len(bundles)))]
    return make_phase2_pair(
        bundle,
        solution,
        rng,
        erosion_pct=config.erosion_pct,
        erode_outer_frame=config.erode_outer_frame,
    )


def _bundles_for(
    images: list[np.ndarray], piece_size: int
) -> list[tuple[PuzzleBundle, Solution]]:
    if not images:
        raise ValueError("need at least one training image")
    out = []
    for i, image in enumerate(images):
        try:
            bundle, solution = slice_image(image, piece_size)
        except ValueError as exc:
            raise ValueError(f"training image {i} cannot be sliced: {exc}") from exc
        if bundle.n_pieces < 3:
            raise ValueError(
                f"training image {i} yields only {bundle.n_pieces} pieces; "
                "phase-2 sampling needs at least 3"
            )
        out.append((bundle, solution))
    return out


def _check_finite(value: float, phase: str, epoch: int, step: int, name: str) -> None:
    if not math.isfinite(value):
        raise RuntimeError(
            f"{name} diverged to {value} at {phase} epoch {epoch} step {step}"
        )


def train_phase1(
    images: list[np.ndarray],
    config: TrainConfig,
    *,
    checkpoint_dir: str | Path | None = None,
    progress=None,
) -> tuple[ModelCheckpoint, list[EpochStats]]:
    """Adversarial inpainting training; returns the final checkpoint.

    One iteration alternates a discriminator step (real join vs. detached
    inpainted join) with a generator step (fool the discriminator plus
    weighted L1 against the pre-erosion band).
    """
    if not images:
        raise ValueError("need at least one training image")
    torch.manual_seed(config.seed)
    generator = GapGenerator(config.generator_arch())
    discriminator = PatchDiscriminator(config.discriminator_arch())
    g_opt = torch.optim.Adam(generator.parameters(), lr=config.lr_generator)
    d_opt = torch.optim.Adam(discriminator.parameters(), lr=config.lr_discriminator)

    seeds = _example_seeds(config.seed, _STREAM_PHASE1, config.examples_phase1)
    history: list[EpochStats] = []
    for epoch in range(config.epochs_phase1):
        order = _epoch_order(config.seed, _STREAM_PHASE1, epoch, len(seeds))
        d_sum = g_sum = l1_sum = 0.0
        for step, idx in enumerate(order):
            sample = _materialize_phase1(images, seeds[idx], config)
            x, mask = sample_to_tensors(sample)
            original = (
                torch.from_numpy(np.ascontiguousarray(sample.original))
                .permute(2, 0, 1)[None]
                .float()
            )
            fake = generator(x, mask)

            p_real, _ = discriminator(_center_columns(original))
            p_fake, _ = discriminator(_center_columns(fake.detach()))
            d_loss = discriminator_loss_phase1(p_real[0], p_fake[0])
            d_opt.zero_grad()
            d_loss.backward()
            d_opt.step()

            p_gen, _ = discriminator(_center_columns(fake))
            band = mask[:, 0]
            generated_band = fake.permute(0, 2, 3, 1)[band]
            original_band = original.permute(0, 2, 3, 1)[band]
            l1_term = (
                torch.mean(torch.abs(original_band - generated_band))
                if generated_band.numel()
                else torch.zeros(())
            )
            g_loss = generator_loss(
                p_gen[0], original_band, generated_band, weight=config.l1_weight
            )
            g_opt.zero_grad()
            g_loss.backward()
            g_opt.step()

            d_val, g_val = float(d_loss.detach()), float(g_loss.detach())
            _check_finite(d_val, PHASE_INPAINTING, epoch, step, "discriminator loss")
            _check_finite(g_val, PHASE_INPAINTING, epoch, step, "generator loss")
            d_sum += d_val
            g_sum += g_val
            l1_sum += float(l1_term.detach())

        n = len(order)
        stats = EpochStats(
            phase=PHASE_INPAINTING,
            epoch=epoch,
            d_loss=d_sum / n,
            g_loss=g_sum / n,
            l1=l1_sum / n,
        )
        history.append(stats)
        if progress is not None:
            progress(stats)
        if checkpoint_dir is not None:
            ckpt = ModelCheckpoint.from_models(
                generator,
                discriminator,
                PHASE_INPAINTING,
                {**config.metadata(), "epoch": epoch},
            )
            save_checkpoint(
                ckpt, Path(checkpoint_dir) / f"inpaint_epoch_{epoch:03d}.pt"
            )

    metadata = {**config.metadata(), "epochs": config.epochs_phase1,
                "examples": config.examples_phase1}
    final = ModelCheckpoint.from_models(
        generator, discriminator, PHASE_INPAINTING, metadata
    )
    return final, history


def _pair_probability_tensor(
    generator: GapGenerator | None,
    discriminator: PatchDiscriminator,
    sample: PairSample,
    inpaint: bool,
) -> torch.Tensor:
    x, mask = sample_to_tensors(sample)
    if inpaint:
        if generator is None:
            raise ValueError("inpainting requested but no generator given")
        with torch.no_grad():
            x = generator(x, mask)
    prob, _ = discriminator(_center_columns(x))
    return prob[0]


def train_phase2(
    images: list[np.ndarray],
    config: TrainConfig,
    checkpoint: ModelCheckpoint | None,
    *,
    checkpoint_dir: str | Path | None = None,
    progress=None,
) -> tuple[ModelCheckpoint, list[EpochStats]]:
    """Neighbor-classifier training on inpainted pairs.

    The generator is frozen.  In ``warm`` mode the discriminator continues
    from the phase-1 weights; ``fresh`` reinitializes it; ``no-inpaint``
    skips the generator and classifies the eroded pairs directly.
    """
    mode = config.phase2_mode
    if mode in (MODE_WARM, MODE_FRESH) and checkpoint is None:
        raise ValueError(f"phase-2 mode {mode!r} needs a phase-1 checkpoint")
    if checkpoint is not None and checkpoint.phase != PHASE_INPAINTING:
        raise ValueError(
            f"expected an {PHASE_INPAINTING!r} checkpoint, got {checkpoint.phase!r}"
        )

    torch.manual_seed(config.seed + 1)
    if checkpoint is not None:
        generator = checkpoint.build_generator()
        discriminator = (
            checkpoint.build_discriminator()
            if mode == MODE_WARM
            else PatchDiscriminator(checkpoint.discriminator_arch)
        )
    else:
        generator = GapGenerator(config.generator_arch())
        discriminator = PatchDiscriminator(config.discriminator_arch())
    generator.eval()
    for p in generator.parameters():
        p.requires_grad_(False)
    discriminator.train()
    inpaint = mode != MODE_NO_INPAINT

    d_opt = torch.optim.Adam(discriminator.parameters(), lr=config.lr_phase2)
    bundles = _bundles_for(images, config.piece_size)
    seeds = _example_seeds(config.seed, _STREAM_PHASE2, config.examples_phase2)
    history: list[EpochStats] = []
    for epoch in range(config.epochs_phase2):
        order = _epoch_order(config.seed, _STREAM_PHASE2, epoch, len(seeds))
        d_sum = pos_sum = neg_sum = 0.0
        for step, idx in enumerate(order):
            positive, negative = _materialize_phase2(bundles, seeds[idx], config)
            p_pos = _pair_probability_tensor(generator, discriminator, positive, inpaint)
            p_neg = _pair_probability_tensor(generator, discriminator, negative, inpaint)
            loss = discriminator_loss_phase2(p_pos, p_neg)
            d_opt.zero_grad()
            loss.backward()
            d_opt.step()

            val = float(loss.detach())
            _check_finite(val, PHASE_CLASSIFIER, epoch, step, "classifier loss")
            d_sum += val
            pos_sum += float(p_pos.detach())
            neg_sum += float(p_neg.detach())

        n = len(order)
        stats = EpochStats(
            phase=PHASE_CLASSIFIER,
            epoch=epoch,
            d_loss=d_sum / n,
            p_positive=pos_sum / n,
            p_negative=neg_sum / n,
        )
        history.append(stats)
        if progress is not None:
            progress(stats)
        if checkpoint_dir is not None:
            ckpt = ModelCheckpoint.from_models(
                generator,
                discriminator,
                PHASE_CLASSIFIER,
                {**config.metadata(), "phase2_mode": mode, "epoch": epoch},
            )
            save_checkpoint(
                ckpt, Path(checkpoint_dir) / f"classify_epoch_{epoch:03d}.pt"
            )

    metadata = {
        **config.metadata(),
        "phase2_mode": mode,
        "epochs": config.epochs_phase2,
        "examples": config.examples_phase2,
    }
    final = ModelCheckpoint.from_models(
        generator, discriminator, PHASE_CLASSIFIER, metadata
    )
    return final, history


def draw_phase2_pairs(
    images: list[np.ndarray],
    n_pairs: int,
    config: TrainConfig,
    stream: int = _STREAM_VALIDATION,
) -> list[tuple[PairSample, PairSample]]:
    """Deterministic held-out (positive, negative) draws for evaluation."""
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    bundles = _bundles_for(images, config.piece_size)
    seeds = _example_seeds(config.seed, stream, n_pairs)
    return [_materialize_phase2(bundles, s, config) for s in seeds]


def evaluate_separation(
    checkpoint: ModelCheckpoint,
    pairs: list[tuple[PairSample, PairSample]],
) -> SeparationResult:
    """Mean classifier probability on positives minus negatives."""
    if not pairs:
        raise ValueError("need at least one evaluation pair")
    generator = checkpoint.build_generator()
    discriminator = checkpoint.build_discriminator()
    inpaint = checkpoint.metadata.get("phase2_mode") != MODE_NO_INPAINT
    pos_sum = neg_sum = 0.0
    with torch.no_grad():
        for positive, negative in pairs:
            pos_sum += float(
                _pair_probability_tensor(generator, discriminator, positive, inpaint)
            )
            neg_sum += float(
                _pair_probability_tensor(generator, discriminator, negative, inpaint)
            )
    return SeparationResult(pos_sum / len(pairs), neg_sum / len(pairs), len(pairs))


def write_loss_log(
    history: list[EpochStats], path: str | Path, seed: int | None = None
) -> Path:
    """Append-style CSV of per-epoch losses with a comment header."""
    path = Path(path)
    lines = [f"# gapsolver {__version__} training log"]
    if seed is not None:
        lines.append(f"# seed={seed}")
    lines.append("phase,epoch,d_loss,g_loss,l1,p_positive,p_negative")
    for row in history:
        lines.append(
            f"{row.phase},{row.epoch},{row.d_loss:.6f},{row.g_loss:.6f},"
            f"{row.l1:.6f},{row.p_positive:.6f},{row.p_negative:.6f}"
        )
    path.write_text("\n".join(lines) + "\n")
    return path


__all__ = [
    "TrainConfig",
    "EpochStats",
    "SeparationResult",
    "MODE_WARM",
    "MODE_FRESH",
    "MODE_NO_INPAINT",
    "PHASE2_MODES",
    "configure_threads",
    "train_phase1",
    "train_phase2",
    "draw_phase2_pairs",
    "evaluate_separation",
    "write_loss_log",
]
