"""Semantic mapping M, cosine scoring, and the three training losses."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .numerics import SplitMix64, Tensor
from .numerics import tensor as ops


@dataclass
class MappingParams:
    w_m: Tensor
    bias: Tensor | None = None


@dataclass(frozen=True)
class LossWeights:
    lambda_cons: float = 1.0
    lambda_deb: float = 1.0

    def __post_init__(self):
        if self.lambda_cons < 0 or self.lambda_deb < 0:
            raise ValueError("loss weights must be non-negative")


@dataclass(frozen=True)
class ScoreStats:
    alpha_s: float
    beta_s: float
    alpha_u: float
    beta_u: float

    def to_dict(self) -> dict:
        return {"alpha_s": self.alpha_s, "beta_s": self.beta_s, "alpha_u": self.alpha_u, "beta_u": self.beta_u}


def init_mapping(rng: SplitMix64, width: int, num_attributes: int, bias: bool = False) -> MappingParams:
    w = Tensor(rng.normal((width, num_attributes), std=1 / math.sqrt(width)), requires_grad=True, name="mapping.w_m")
    b = Tensor(np.zeros(num_attributes), requires_grad=True, name="mapping.bias") if bias else None
    return MappingParams(w_m=w, bias=b)


def normalize_prototypes(prototypes: np.ndarray) -> np.ndarray:
    prototypes = np.asarray(prototypes, dtype=np.float64)
    norms = np.linalg.norm(prototypes, axis=-1, keepdims=True)
    if np.any(norms < 1e-12):
        raise ZeroDivisionError("attribute prototype with zero norm")
    return prototypes / norms


def map_to_semantic(f_x: Tensor, params: MappingParams) -> Tensor:
    """Global average pool over tokens, then project into attribute space."""
    if f_x.shape[-1] != params.w_m.shape[0]:
        raise ValueError(f"feature width {f_x.shape[-1]} does not match mapping {params.w_m.shape}")
    pooled = ops.mean(f_x, axis=-2)
    out = ops.matmul(ops.reshape(pooled, (-1, pooled.shape[-1])), params.w_m)
    if params.bias is not None:
        out = ops.add(out, params.bias)
    return ops.reshape(out, pooled.shape[:-1] + (params.w_m.shape[1],))


def cosine_scores(mapped: Tensor, unit_prototypes: np.ndarray) -> Tensor:
    """Cosine similarity of each mapped feature (rows) with each unit prototype."""
    norms = ops.l2_norm(mapped, axis=-1, keepdims=True)
    if np.any(norms.data < 1e-12):
        raise ZeroDivisionError("mapped feature with zero norm")
    unit = ops.div(mapped, norms)
    return ops.matmul(unit, Tensor(np.asarray(unit_prototypes).T))


def _positions(classes: Sequence[int], labels: Sequence[int]) -> np.ndarray:
    where = {c: i for i, c in enumerate(classes)}
    try:
        return np.array([where[int(y)] for y in labels], dtype=np.intp)
    except KeyError as exc:
        raise KeyError(f"class {exc.args[0]} is not among the scored classes") from None


def classification_loss(scores: Tensor, labels, seen_classes: Sequence[int], temperature: float = 1.0) -> Tensor:
    """Mean cross-entropy of the softmax over seen-class scores.

    ``scores`` is ``[B, C]`` over all classes (or ``[C]`` for one sample);
    only the columns in ``seen_classes`` enter the softmax.
    """
    scores = ops.as_tensor(scores)
    if scores.ndim == 1:
        scores = ops.reshape(scores, (1, scores.shape[0]))
    labels = np.atleast_1d(np.asarray(labels))
    pos = _positions(seen_classes, labels)
    logits = ops.take(scores, list(seen_classes), axis=-1)
    if temperature != 1.0:
        logits = ops.scale(logits, 1.0 / temperature)
    logp = ops.log_softmax(logits, axis=-1)
    onehot = np.zeros(logp.shape)
    onehot[np.arange(len(pos)), pos] = 1.0
    picked = ops.sum(ops.mul(logp, Tensor(onehot)), axis=-1)
    return ops.scale(ops.mean(picked), -1.0)


def debias_loss(scores: Tensor, seen_classes: Sequence[int], unseen_classes: Sequence[int]) -> Tensor:
    """(alpha_s - alpha_u)^2 + (beta_s - beta_u)^2 over the pooled score multisets."""
    if len(seen_classes) == 0 or len(unseen_classes) == 0:
        raise ValueError("debias_loss needs non-empty seen and unseen class sets")
    scores = ops.as_tensor(scores)
    seen = ops.take(scores, list(seen_classes), axis=-1)
    unseen = ops.take(scores, list(unseen_classes), axis=-1)
    d_mean = ops.sub(ops.mean(seen), ops.mean(unseen))
    d_var = ops.sub(ops.variance(seen), ops.variance(unseen))
    return ops.add(ops.square(d_mean), ops.square(d_var))


def score_stats(scores: np.ndarray, seen_classes: Sequence[int], unseen_classes: Sequence[int]) -> ScoreStats:
    scores = np.asarray(scores, dtype=np.float64)
    seen = scores[..., list(seen_classes)]
    unseen = scores[..., list(unseen_classes)]
    return ScoreStats(
        alpha_s=float(seen.mean()),
        beta_s=float(seen.var()),
        alpha_u=float(unseen.mean()),
        beta_u=float(unseen.var()),
    )


def total_loss(cls: Tensor, cons, deb, weights: LossWeights) -> Tensor:
    out = ops.as_tensor(cls)
    if weights.lambda_cons:
        out = ops.add(out, ops.scale(ops.as_tensor(cons), weights.lambda_cons))
    if weights.lambda_deb:
        out = ops.add(out, ops.scale(ops.as_tensor(deb), weights.lambda_deb))
    return out
