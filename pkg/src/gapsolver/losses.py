"""Training losses for both phases.

All probabilities pass through a clamp to [PROB_EPS, 1 - PROB_EPS] before any
logarithm, so losses stay finite even for saturated discriminator outputs.
The scalar paths use math.log to keep reference values exact to double
precision; tensor paths use torch ops so gradients flow.
"""

from __future__ import annotations

import math

import torch

PROB_EPS = 1e-7
L1_WEIGHT = 100.0


def clamp_probability(p):
    """Clamp a probability (scalar or tensor) away from 0 and 1."""
    if isinstance(p, torch.Tensor):
        return torch.clamp(p, PROB_EPS, 1.0 - PROB_EPS)
    p = float(p)
    if math.isnan(p):
        raise ValueError("probability is NaN")
    return min(max(p, PROB_EPS), 1.0 - PROB_EPS)


def bce(p, target: float):
    """Binary cross-entropy of one predicted probability against 0 or 1."""
    if target not in (0.0, 1.0, 0, 1):
        raise ValueError(f"target must be 0 or 1, got {target}")
    p = clamp_probability(p)
    if isinstance(p, torch.Tensor):
        return -(target * torch.log(p) + (1.0 - target) * torch.log(1.0 - p))
    if target:
        return -math.log(p)
    return -math.log(1.0 - p)


def l1_band(original_band, generated_band):
    """Mean absolute difference over the masked band; 0 for an empty band."""
    if isinstance(generated_band, torch.Tensor):
        if original_band.shape != generated_band.shape:
            raise ValueError(
                f"band shapes differ: {tuple(original_band.shape)} vs "
                f"{tuple(generated_band.shape)}"
            )
        if generated_band.numel() == 0:
            return torch.zeros((), dtype=generated_band.dtype)
        return torch.mean(torch.abs(original_band - generated_band))
    import numpy as np

    original_band = np.asarray(original_band, dtype=np.float64)
    generated_band = np.asarray(generated_band, dtype=np.float64)
    if original_band.shape != generated_band.shape:
        raise ValueError(
            f"band shapes differ: {original_band.shape} vs {generated_band.shape}"
        )
    if generated_band.size == 0:
        return 0.0
    return float(np.mean(np.abs(original_band - generated_band)))


def generator_loss(d_pred, original_band, generated_band, weight: float = L1_WEIGHT):
    """Adversarial term plus weighted L1 reconstruction over the band."""
    if weight < 0:
        raise ValueError(f"weight must be non-negative, got {weight}")
    return bce(d_pred, 1.0) + weight * l1_band(original_band, generated_band)


def discriminator_loss_phase1(p_real, p_fake):
    """Mean of real-vs-1 and fake-vs-0 binary cross-entropies."""
    return (bce(p_real, 1.0) + bce(p_fake, 0.0)) / 2


def discriminator_loss_phase2(p_positive, p_negative):
    """Mean of neighbor-vs-1 and non-neighbor-vs-0 cross-entropies.

    Both inputs are probabilities on inpainted pairs; true neighbors are
    relabeled as real regardless of the generated band.
    """
    return (bce(p_positive, 1.0) + bce(p_negative, 0.0)) / 2
