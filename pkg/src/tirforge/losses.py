"""Reference implementations of the two training objectives.

Stage 1 is plain negative log-likelihood over response tokens; stage 2 is
the pairwise preference loss on the policy-vs-reference log-probability
margin, with analytic gradients. These are scalar reference functions used
to verify an external trainer's logged values — no autograd, no model
forward passes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence


class NonFiniteInputError(ValueError):
    """Raised when a log-probability input is NaN or infinite."""


def _require_finite(name: str, value: float) -> float:
    if not math.isfinite(value):
        raise NonFiniteInputError(f"{name} must be finite, got {value!r}")
    return float(value)


@dataclass(frozen=True)
class TokenLogprobs:
    """Per-token log-probabilities of one response; each entry is <= 0."""

    values: tuple[float, ...]

    def __init__(self, values: Sequence[float]):
        if len(values) == 0:
            raise ValueError("token log-probs must be non-empty")
        vals = tuple(_require_finite("log-prob", v) for v in values)
        for v in vals:
            if v > 0.0:
                raise ValueError(f"log-probability cannot be positive: {v}")
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class DPOInputs:
    """Sequence log-prob sums for winner/loser under policy and reference."""

    lp_policy_w: float
    lp_policy_l: float
    lp_ref_w: float
    lp_ref_l: float
    beta: float = 0.1
    winner_tokens: int | None = None
    loser_tokens: int | None = None

    def __post_init__(self) -> None:
        for name in ("lp_policy_w", "lp_policy_l", "lp_ref_w", "lp_ref_l", "beta"):
            _require_finite(name, getattr(self, name))
        if self.beta < 0:
            raise ValueError("beta must be non-negative")


@dataclass(frozen=True)
class DPOGradients:
    """Partial derivatives of the preference loss wrt the four log-prob sums.

    The reference model is frozen, so its two entries are identically zero.
    """

    d_lp_policy_w: float
    d_lp_policy_l: float
    d_lp_ref_w: float = 0.0
    d_lp_ref_l: float = 0.0


def sft_nll(lp: TokenLogprobs) -> float:
    """Per-sequence negative log-likelihood: -sum of token log-probs.

    Dataset-level loss is the mean of this value over sequences.
    """
    return -math.fsum(lp.values)


def _softplus(x: float) -> float:
    # log(1 + e^x), overflow-safe on both tails.
    return max(x, 0.0) + math.log1p(math.exp(-abs(x)))


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def margin(inputs: DPOInputs, length_normalized: bool = False) -> float:
    """Beta-scaled policy-vs-reference gap between winner and loser."""
    pw, pl = inputs.lp_policy_w, inputs.lp_policy_l
    rw, rl = inputs.lp_ref_w, inputs.lp_ref_l
    if length_normalized:
        if not inputs.winner_tokens or not inputs.loser_tokens:
            raise ValueError("length-normalized margin needs winner/loser token counts")
        pw, rw = pw / inputs.winner_tokens, rw / inputs.winner_tokens
        pl, rl = pl / inputs.loser_tokens, rl / inputs.loser_tokens
    return inputs.beta * ((pw - pl) - (rw - rl))


def dpo_loss(inputs: DPOInputs, length_normalized: bool = False) -> float:
    """Preference loss -log(sigmoid(margin)), computed via stable softplus."""
    return _softplus(-margin(inputs, length_normalized))


def dpo_loss_grad(inputs: DPOInputs, length_normalized: bool = False) -> DPOGradients:
    """Analytic gradient of dpo_loss wrt the four sequence log-prob sums."""
    m = margin(inputs, length_normalized)
    s = _sigmoid(-m)
    scale_w = inputs.beta
    scale_l = inputs.beta
    if length_normalized:
        scale_w = inputs.beta / inputs.winner_tokens  # type: ignore[operator]
        scale_l = inputs.beta / inputs.loser_tokens  # type: ignore[operator]
    return DPOGradients(
        d_lp_policy_w=-scale_w * s,
        d_lp_policy_l=scale_l * s,
    )
