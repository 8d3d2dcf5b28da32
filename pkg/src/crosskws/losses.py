"""Training objectives for the detector.

Total objective: lambda_denoise * denoising + lambda_match * matching +
detection, with defaults 0.5 and 0.3.  The matching loss pulls the affinity
matrix toward one of three row-stochastic target patterns chosen by how the
text relates to the audio: a Gaussian diagonal when they fully match,
normalized random noise when they do not, and a row-wise mix when only the
front of the text matches.  A rear-only match counts as non-matching.
Detection starts as binary cross-entropy and switches to focal loss partway
through training.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .tensor import Tensor


class MatchKind(enum.Enum):
    FULL = "full"
    NON = "non"
    PARTIAL_FRONT = "partial_front"
    PARTIAL_BACK = "partial_back"


@dataclass(frozen=True)
class MatchType:
    """How a text keyword relates to the audio content of a pair.

    ``boundary_k`` is the number of leading text positions that match the
    audio; it is required for PARTIAL_FRONT and meaningless otherwise.
    """

    kind: MatchKind
    boundary_k: int | None = None

    def __post_init__(self):
        if self.kind is MatchKind.PARTIAL_FRONT and (
                self.boundary_k is None or self.boundary_k < 1):
            raise ValueError("partial-front match needs boundary_k >= 1")

    @property
    def label(self) -> int:
        return 1 if self.kind is MatchKind.FULL else 0


@dataclass(frozen=True)
class LossWeights:
    lambda_denoise: float = 0.5
    lambda_match: float = 0.3
    focal_gamma: float = 2.0
    focal_alpha: float = 0.25
    switch_fraction: float = 0.5
    gaussian_width: float = 0.2

    def __post_init__(self):
        if self.lambda_denoise < 0 or self.lambda_match < 0:
            raise ValueError("loss weights must be nonnegative")
        if not 0.0 <= self.switch_fraction <= 1.0:
            raise ValueError("switch_fraction must lie in [0, 1]")


def denoising_loss(e_clean: Tensor, e_noisy: Tensor) -> Tensor:
    """Mean squared distance between clean and noisy audio embeddings."""
    if e_clean.data.shape != e_noisy.data.shape:
        raise T.ShapeError(
            f"embedding shapes differ: {e_clean.data.shape} vs {e_noisy.data.shape}")
    return T.mse(e_clean, e_noisy)


def _check_dims(t_t: int, t_a: int) -> None:
    if t_t < 1 or t_a < 1:
        raise ValueError(f"target dims must be positive, got {t_t} x {t_a}")


def target_full(t_t: int, t_a: int, g: float = 0.2) -> np.ndarray:
    """Gaussian ridge along the relative-position diagonal, rows sum to 1.

    Entry (t, a), 1-based: exp(-(a/T_a - t/T_t)^2 / (2 g^2)).
    """
    _check_dims(t_t, t_a)
    text_pos = np.arange(1, t_t + 1)[:, None] / t_t
    audio_pos = np.arange(1, t_a + 1)[None, :] / t_a
    raw = np.exp(-((audio_pos - text_pos) ** 2) / (2.0 * g * g))
    return raw / raw.sum(axis=1, keepdims=True)


def target_non(t_t: int, t_a: int, seed: int) -> np.ndarray:
    """|N(0,1)| noise, rows normalized to sum 1; deterministic per seed."""
    _check_dims(t_t, t_a)
    rng = np.random.default_rng(seed)
    raw = np.abs(rng.standard_normal((t_t, t_a)))
    sums = raw.sum(axis=1, keepdims=True)
    sums[sums == 0.0] = 1.0
    return raw / sums


def target_partial(t_t: int, t_a: int, boundary_k: int, g: float = 0.2,
                   seed: int = 0) -> np.ndarray:
    """First ``boundary_k`` text rows from target_full, the rest from target_non."""
    _check_dims(t_t, t_a)
    if not 0 <= boundary_k <= t_t:
        raise ValueError(f"boundary {boundary_k} out of range 0..{t_t}")
    out = target_non(t_t, t_a, seed)
    out[:boundary_k] = target_full(t_t, t_a, g)[:boundary_k]
    return out


def matching_target(t_t: int, t_a: int, mt: MatchType, seed: int,
                    g: float = 0.2) -> np.ndarray:
    if mt.kind is MatchKind.FULL:
        return target_full(t_t, t_a, g)
    if mt.kind is MatchKind.PARTIAL_FRONT:
        k = min(mt.boundary_k, t_t)
        return target_partial(t_t, t_a, k, g, seed)
    # Non-matching and rear-only matches both train toward noise.
    return target_non(t_t, t_a, seed)


def mml_loss(affinity: Tensor, mt: MatchType, seed: int,
             g: float = 0.2) -> Tensor:
    """Mean squared distance between the affinity matrix and its target."""
    t_t, t_a = affinity.data.shape
    target = T.constant(matching_target(t_t, t_a, mt, seed, g))
    return T.mse(affinity, target)


def detection_loss(p: Tensor, y: int, step_fraction: float,
                   weights: LossWeights) -> Tensor:
    """BCE early in training, focal loss from switch_fraction onward.

    Focal form: -alpha * (1 - p_t)^gamma * ln(p_t) with p_t = p when y = 1
    and 1 - p otherwise; gamma = 0, alpha = 1 reduces it to BCE.
    """
    val = p.item()
    if not 0.0 < val < 1.0:
        raise ValueError(f"probability {val} outside (0, 1)")
    if y not in (0, 1):
        raise ValueError(f"label must be 0 or 1, got {y}")
    p_t = p if y == 1 else T.rsub_const(1.0, p)
    nll = T.scale(T.log(p_t), -1.0)
    if step_fraction < weights.switch_fraction:
        return nll
    modulator = T.pow_const(T.rsub_const(1.0, p_t), weights.focal_gamma)
    return T.scale(T.mul(modulator, nll), weights.focal_alpha)


def total_loss(l_dn: Tensor, l_mm: Tensor, l_d: Tensor,
               weights: LossWeights = LossWeights()) -> Tensor:
    """Weighted sum of the three components."""
    for name, comp in (("denoising", l_dn), ("matching", l_mm), ("detection", l_d)):
        if comp.item() < 0.0:
            raise ValueError(f"negative {name} loss component")
    weighted = T.add(T.scale(l_dn, weights.lambda_denoise),
                     T.scale(l_mm, weights.lambda_match))
    return T.add(weighted, l_d)
