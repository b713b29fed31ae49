"""Concept-aware attention over a learnable modal-sharing token bank.

Queries come from one modality (attribute tokens or visual tokens); keys and
values come from the shared bank R through projections shared by both
branches.  Relevance is max-pooled over the query tokens, so each branch
collapses to a single harmonized token that is a convex combination of the
projected bank rows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .numerics import SplitMix64, Tensor
from .numerics import tensor as ops


@dataclass
class CaaParams:
    q_s: Tensor
    q_e: Tensor
    k_r: Tensor
    v_r: Tensor

    @property
    def width(self) -> int:
        return self.k_r.shape[1]


@dataclass
class HarmonizedPair:
    s_tilde: Tensor
    e_tilde: Tensor


def init_caa(rng: SplitMix64, width: int, caa_width: int) -> CaaParams:
    std = 1 / math.sqrt(width)
    return CaaParams(
        q_s=Tensor(rng.normal((width, caa_width), std=std), requires_grad=True, name="caa.q_s"),
        q_e=Tensor(rng.normal((width, caa_width), std=std), requires_grad=True, name="caa.q_e"),
        k_r=Tensor(rng.normal((width, caa_width), std=std), requires_grad=True, name="caa.k_r"),
        v_r=Tensor(rng.normal((width, caa_width), std=std), requires_grad=True, name="caa.v_r"),
    )


def init_sharing_token(rng: SplitMix64, num_tokens: int, width: int) -> Tensor:
    return Tensor(rng.normal((num_tokens, width)), requires_grad=True, name="caa.sharing")


def concept_attention(
    queries: Tensor,
    sharing: Tensor,
    w_query: Tensor,
    params: CaaParams,
    scaled: bool = False,
    return_weights: bool = False,
):
    """softmax(GMP((X Wq)(R Wk)^T)) (R Wv) for ``queries`` of shape ``[..., n, D]``."""
    if queries.shape[-1] != w_query.shape[0] or sharing.shape[-1] != params.k_r.shape[0]:
        raise ValueError(
            f"CAA shape mismatch: queries {queries.shape}, bank {sharing.shape}, "
            f"query projection {w_query.shape}, key projection {params.k_r.shape}"
        )
    keys = ops.matmul(sharing, params.k_r)
    values = ops.matmul(sharing, params.v_r)
    relevance = ops.matmul(ops.matmul(queries, w_query), ops.transpose(keys))
    pooled = ops.gmp_rows(relevance)
    if scaled:
        pooled = ops.scale(pooled, 1.0 / math.sqrt(params.width))
    weights = ops.softmax(pooled, axis=-1)
    out = ops.matmul(weights, values)
    if return_weights:
        return out, weights
    return out


def caa_text(s: Tensor, sharing: Tensor, params: CaaParams, scaled: bool = False, return_weights: bool = False):
    """Harmonized attribute token S~ of shape ``[1, d]``."""
    return concept_attention(s, sharing, params.q_s, params, scaled, return_weights)


def caa_vision(e_bar: Tensor, sharing: Tensor, params: CaaParams, scaled: bool = False, return_weights: bool = False):
    """Harmonized visual token E~ of shape ``[..., 1, d]``."""
    return concept_attention(e_bar, sharing, params.q_e, params, scaled, return_weights)


def mean_pooled_pair(s: Tensor, e_bar: Tensor, params: CaaParams) -> HarmonizedPair:
    """Replacement used when CAA is ablated: mean-pool each modality, then project to d."""
    s_tilde = ops.matmul(ops.mean(s, axis=-2, keepdims=True), params.q_s)
    e_tilde = ops.matmul(ops.mean(e_bar, axis=-2, keepdims=True), params.q_e)
    return HarmonizedPair(s_tilde=s_tilde, e_tilde=e_tilde)
