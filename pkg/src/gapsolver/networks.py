"""Generator and discriminator networks plus checkpoint serialization.

The generator is a 6-level encoder-decoder with skip connections between
symmetric levels and no bottleneck: with 64px-high input the innermost
feature map has height 1.  Its output layer copies every known pixel straight
from the input, so only masked pixels are ever generated.

The discriminator is Markovian: a 3-level strided encoder followed by a 3x3
valid convolution yields a grid of per-patch probabilities (6x6 for 64px
crops) whose arithmetic mean is the output probability.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch
from torch import nn

from . import __version__
from .pairs import PairSample

PHASE_INPAINTING = "inpainting"
PHASE_CLASSIFIER = "classifier"


@dataclass(frozen=True)
class GeneratorArch:
    in_channels: int = 3
    widths: tuple[int, ...] = (64, 128, 256, 512, 512, 512)

    @property
    def levels(self) -> int:
        return len(self.widths)

    @property
    def factor(self) -> int:
        return 2 ** self.levels


@dataclass(frozen=True)
class DiscriminatorArch:
    in_channels: int = 3
    widths: tuple[int, ...] = (64, 128, 256)
    patch_kernel: int = 3

    @property
    def levels(self) -> int:
        return len(self.widths)


def _norm(channels: int) -> nn.Module:
    return nn.InstanceNorm2d(channels, affine=True, track_running_stats=False)


class GapGenerator(nn.Module):
    """Encoder-decoder inpainter that writes only inside the band mask."""

    def __init__(self, arch: GeneratorArch = GeneratorArch()):
        super().__init__()
        self.arch = arch
        w = arch.widths
        encoders = []
        in_ch = arch.in_channels
        for i, out_ch in enumerate(w):
            block = [nn.Conv2d(in_ch, out_ch, 4, stride=2, padding=1)]
            # no norm on the outermost level or on the innermost (height-1) map
            if 0 < i < len(w) - 1:
                block.append(_norm(out_ch))
            block.append(nn.LeakyReLU(0.2))
            encoders.append(nn.Sequential(*block))
            in_ch = out_ch
        self.encoders = nn.ModuleList(encoders)

        decoders = []
        rev = list(w[::-1])  # innermost first
        in_ch = rev[0]
        for i, out_ch in enumerate(rev[1:]):
            decoders.append(
                nn.Sequential(
                    nn.ConvTranspose2d(in_ch, out_ch, 4, stride=2, padding=1),
                    _norm(out_ch),
                    nn.ReLU(),
                )
            )
            in_ch = out_ch * 2  # skip connection doubles the channels
        self.decoders = nn.ModuleList(decoders)
        self.head = nn.ConvTranspose2d(in_ch, arch.in_channels, 4, stride=2, padding=1)

    def forward(self, x: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
        """x: (B, C, H, W) with unknown pixels zeroed; mask: (B, 1, H, W) bool.

        Returns the full image with unmasked pixels copied bit-exactly from x.
        """
        if x.dim() != 4:
            raise ValueError(f"expected a (B, C, H, W) tensor, got {tuple(x.shape)}")
        f = self.arch.factor
        if x.shape[2] % f or x.shape[3] % f:
            raise ValueError(
                f"spatial dims {tuple(x.shape[2:])} must be divisible by {f}"
            )
        skips = []
        h = x
        for enc in self.encoders:
            h = enc(h)
            skips.append(h)
        h = skips[-1]
        for i, dec in enumerate(self.decoders):
            h = dec(h)
            h = torch.cat([h, skips[-2 - i]], dim=1)
        out = torch.sigmoid(self.head(h))
        return torch.where(mask, out, x)


class PatchDiscriminator(nn.Module):
    """Markovian discriminator over a square center crop."""

    def __init__(self, arch: DiscriminatorArch = DiscriminatorArch()):
        super().__init__()
        self.arch = arch
        layers = []
        in_ch = arch.in_channels
        for i, out_ch in enumerate(arch.widths):
            layers.append(nn.Conv2d(in_ch, out_ch, 4, stride=2, padding=1))
            if i > 0:
                layers.append(_norm(out_ch))
            layers.append(nn.LeakyReLU(0.2))
            in_ch = out_ch
        self.encoder = nn.Sequential(*layers)
        # valid (unpadded) convolution: 8x8 feature map -> 6x6 patch grid
        self.head = nn.Conv2d(in_ch, 1, arch.patch_kernel)

    def patch_probabilities(self, crop: torch.Tensor) -> torch.Tensor:
        """Per-patch probabilities, shape (B, P, P)."""
        if crop.dim() != 4 or crop.shape[2] != crop.shape[3]:
            raise ValueError(
                f"expected a square (B, C, S, S) crop, got {tuple(crop.shape)}"
            )
        side = crop.shape[2]
        factor = 2 ** self.arch.levels
        if side % factor or side // factor <= self.arch.patch_kernel - 1:
            raise ValueError(f"crop side {side} is incompatible with the encoder")
        return torch.sigmoid(self.head(self.encoder(crop)))[:, 0]

    def forward(self, crop: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """Returns (probability (B,), patch map (B, P, P))."""
        patches = self.patch_probabilities(crop)
        return patches.mean(dim=(1, 2)), patches


def average_patch_probabilities(patch_map: np.ndarray) -> float:
    """The output probability is the arithmetic mean of the patch grid."""
    return float(np.mean(patch_map))


# ---------------------------------------------------------------------------
# numpy-facing forward passes
# ---------------------------------------------------------------------------


@dataclass
class GeneratedPair:
    """Generator output with the band views used by the losses."""

    image: np.ndarray            # (S, 2S, 3), equals the input off-mask
    generated_band: np.ndarray   # (K, 3): generated pixels under the mask
    original_band: np.ndarray | None  # (K, 3) from the pre-erosion original


def sample_to_tensors(
    sample: PairSample, dtype: torch.dtype = torch.float32
) -> tuple[torch.Tensor, torch.Tensor]:
    """PairSample -> (input (1, 3, S, 2S), mask (1, 1, S, 2S))."""
    x = torch.from_numpy(np.ascontiguousarray(sample.input)).permute(2, 0, 1)
    mask = torch.from_numpy(sample.mask)[None, None]
    return x[None].to(dtype), mask


def generator_forward(generator: GapGenerator, sample: PairSample) -> GeneratedPair:
    """Inpaint one pair; known pixels pass through bit-identically."""
    dtype = next(generator.parameters()).dtype
    x, mask = sample_to_tensors(sample, dtype)
    with torch.no_grad():
        out = generator(x, mask)
    image = out[0].permute(1, 2, 0).numpy().astype(sample.input.dtype, copy=True)
    generated_band = image[sample.mask]
    original_band = (
        sample.original[sample.mask] if sample.original is not None else None
    )
    return GeneratedPair(image, generated_band, original_band)


def discriminator_forward(
    discriminator: PatchDiscriminator, crop: np.ndarray
) -> tuple[float, np.ndarray]:
    """Probability that a crop shows a true (real/neighboring) pair.

    Returns the scalar probability and the patch probability grid.
    """
    if crop.ndim != 3 or crop.shape[0] != crop.shape[1]:
        raise ValueError(f"expected a square (S, S, 3) crop, got {crop.shape}")
    dtype = next(discriminator.parameters()).dtype
    t = torch.from_numpy(np.ascontiguousarray(crop)).permute(2, 0, 1)[None].to(dtype)
    with torch.no_grad():
        prob, patches = discriminator(t)
    return float(prob[0]), patches[0].numpy()


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------


def architecture_hash(gen_arch: GeneratorArch, disc_arch: DiscriminatorArch) -> str:
    payload = json.dumps(
        {"generator": asdict(gen_arch), "discriminator": asdict(disc_arch)},
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


@dataclass
class ModelCheckpoint:
    """Serialized generator/discriminator weights plus phase and metadata."""

    generator_state: dict[str, torch.Tensor]
    discriminator_state: dict[str, torch.Tensor]
    generator_arch: GeneratorArch
    discriminator_arch: DiscriminatorArch
    phase: str
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.phase not in (PHASE_INPAINTING, PHASE_CLASSIFIER):
            raise ValueError(f"unknown phase {self.phase!r}")

    def build_generator(self) -> GapGenerator:
        net = GapGenerator(self.generator_arch)
        net.load_state_dict(self.generator_state)
        net.eval()
        return net

    def build_discriminator(self) -> PatchDiscriminator:
        net = PatchDiscriminator(self.discriminator_arch)
        net.load_state_dict(self.discriminator_state)
        net.eval()
        return net

    @property
    def arch_hash(self) -> str:
        return architecture_hash(self.generator_arch, self.discriminator_arch)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ModelCheckpoint):
            return False
        if (
            self.phase != other.phase
            or self.generator_arch != other.generator_arch
            or self.discriminator_arch != other.discriminator_arch
            or self.metadata != other.metadata
        ):
            return False
        for mine, theirs in (
            (self.generator_state, other.generator_state),
            (self.discriminator_state, other.discriminator_state),
        ):
            if mine.keys() != theirs.keys():
                return False
            if any(not torch.equal(mine[k], theirs[k]) for k in mine):
                return False
        return True

    @classmethod
    def from_models(
        cls,
        generator: GapGenerator,
        discriminator: PatchDiscriminator,
        phase: str,
        metadata: dict | None = None,
    ) -> "ModelCheckpoint":
        return cls(
            generator_state={k: v.detach().clone() for k, v in generator.state_dict().items()},
            discriminator_state={k: v.detach().clone() for k, v in discriminator.state_dict().items()},
            generator_arch=generator.arch,
            discriminator_arch=discriminator.arch,
            phase=phase,
            metadata=dict(metadata or {}),
        )


def _sidecar_path(path: Path) -> Path:
    return path.with_suffix(".json")


def save_checkpoint(checkpoint: ModelCheckpoint, path: str | Path) -> Path:
    """Write the tensor payload plus a plain-text metadata sidecar."""
    path = Path(path)
    payload = {
        "generator_state": checkpoint.generator_state,
        "discriminator_state": checkpoint.discriminator_state,
        "generator_arch": asdict(checkpoint.generator_arch),
        "discriminator_arch": asdict(checkpoint.discriminator_arch),
        "phase": checkpoint.phase,
        "metadata": checkpoint.metadata,
    }
    torch.save(payload, path)
    sidecar = {
        "tool_version": __version__,
        "arch_hash": checkpoint.arch_hash,
        "phase": checkpoint.phase,
        "generator_arch": asdict(checkpoint.generator_arch),
        "discriminator_arch": asdict(checkpoint.discriminator_arch),
        "metadata": {
            k: v for k, v in checkpoint.metadata.items()
            if isinstance(v, (str, int, float, bool))
        },
    }
    _sidecar_path(path).write_text(json.dumps(sidecar, indent=2))
    return path


def load_checkpoint(
    path: str | Path,
    expected_generator_arch: GeneratorArch | None = None,
    expected_discriminator_arch: DiscriminatorArch | None = None,
) -> ModelCheckpoint:
    """Load a checkpoint, refusing architecture metadata mismatches."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    try:
        payload = torch.load(path, map_location="cpu", weights_only=False)
    except Exception as exc:
        raise ValueError(f"corrupt checkpoint file {path}: {exc}") from exc
    try:
        checkpoint = ModelCheckpoint(
            generator_state=payload["generator_state"],
            discriminator_state=payload["discriminator_state"],
            generator_arch=GeneratorArch(
                in_channels=payload["generator_arch"]["in_channels"],
                widths=tuple(payload["generator_arch"]["widths"]),
            ),
            discriminator_arch=DiscriminatorArch(
                in_channels=payload["discriminator_arch"]["in_channels"],
                widths=tuple(payload["discriminator_arch"]["widths"]),
                patch_kernel=payload["discriminator_arch"]["patch_kernel"],
            ),
            phase=payload["phase"],
            metadata=payload.get("metadata", {}),
        )
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed checkpoint payload in {path}: {exc}") from exc

    sidecar_file = _sidecar_path(path)
    if sidecar_file.exists():
        sidecar = json.loads(sidecar_file.read_text())
        if sidecar.get("arch_hash") != checkpoint.arch_hash:
            raise ValueError(
                f"architecture metadata mismatch for {path}: sidecar declares "
                f"{sidecar.get('arch_hash')}, payload is {checkpoint.arch_hash}"
            )
    if (
        expected_generator_arch is not None
        and checkpoint.generator_arch != expected_generator_arch
    ):
        raise ValueError(
            f"checkpoint generator architecture {checkpoint.generator_arch} does "
            f"not match the expected {expected_generator_arch}"
        )
    if (
        expected_discriminator_arch is not None
        and checkpoint.discriminator_arch != expected_discriminator_arch
    ):
        raise ValueError(
            f"checkpoint discriminator architecture {checkpoint.discriminator_arch} "
            f"does not match the expected {expected_discriminator_arch}"
        )
    return checkpoint
