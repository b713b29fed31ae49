"""Visual residual refinement: a zero-initialised linear residual predictor.

``Z = ZLinear([S~, E~])`` is added to every prompt token.  Because ZLinear
starts at exactly zero, the enhanced prompt equals the plain prompt
embedding until the first update.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .caa import HarmonizedPair
from .numerics import SplitMix64, Tensor
from .numerics import tensor as ops


@dataclass
class VrruParams:
    w_z: Tensor
    b_z: Tensor
    mlp_w1: Tensor
    mlp_b1: Tensor
    mlp_w2: Tensor
    mlp_b2: Tensor


def init_vrru(rng: SplitMix64, caa_width: int, width: int, num_attributes: int, hidden: int) -> VrruParams:
    return VrruParams(
        w_z=Tensor(np.zeros((2 * caa_width, width)), requires_grad=True, name="vrru.w_z"),
        b_z=Tensor(np.zeros(width), requires_grad=True, name="vrru.b_z"),
        mlp_w1=Tensor(rng.normal((num_attributes, hidden), std=1 / math.sqrt(num_attributes)),
                      requires_grad=True, name="vrru.mlp_w1"),
        mlp_b1=Tensor(np.zeros(hidden), requires_grad=True, name="vrru.mlp_b1"),
        mlp_w2=Tensor(rng.normal((hidden, width), std=1 / math.sqrt(hidden)),
                      requires_grad=True, name="vrru.mlp_w2"),
        mlp_b2=Tensor(np.zeros(width), requires_grad=True, name="vrru.mlp_b2"),
    )


def predict_residual(pair: HarmonizedPair, params: VrruParams) -> Tensor:
    """Z = [S~, E~] W_z + b_z.  S~ is broadcast over any batch axes of E~."""
    s, e = pair.s_tilde, pair.e_tilde
    if s.shape[-1] + e.shape[-1] != params.w_z.shape[0]:
        raise ValueError(f"ZLinear expects width {params.w_z.shape[0]}, got {s.shape[-1]} + {e.shape[-1]}")
    if e.ndim > s.ndim:
        s = ops.broadcast_to(s, e.shape[:-1] + s.shape[-1:])
    joint = ops.concat([s, e], axis=-1)
    return ops.add(ops.matmul(joint, params.w_z), params.b_z)


def attribute_mlp(a: Tensor, params: VrruParams) -> Tensor:
    """Two-layer GELU perceptron from attribute space into residual space."""
    hidden = ops.gelu(ops.add(ops.matmul(a, params.mlp_w1), params.mlp_b1))
    return ops.add(ops.matmul(hidden, params.mlp_w2), params.mlp_b2)


def consistency_loss(z: Tensor, a_y, params: VrruParams, squared: bool = False) -> Tensor:
    """||Z - MLP(a_y)||, averaged over the batch when inputs are batched.

    ``z`` has shape ``[..., 1, D]`` or ``[..., D]`` and ``a_y`` ``[..., K]``.
    """
    a_y = ops.as_tensor(a_y)
    if a_y.ndim == 1:
        a_y = ops.reshape(a_y, (1, a_y.shape[0]))
    target = attribute_mlp(a_y, params)
    z_flat = ops.reshape(z, target.shape)
    diff = ops.sub(z_flat, target)
    per_sample = ops.sum(ops.square(diff), axis=-1) if squared else ops.l2_norm(diff, axis=-1)
    return ops.mean(per_sample)


def enhance_prompt(p_bar: Tensor, z: Tensor) -> Tensor:
    """Skip connection: add Z to every prompt token."""
    if p_bar.shape[-1] != z.shape[-1]:
        raise ValueError(f"prompt width {p_bar.shape[-1]} does not match residual width {z.shape[-1]}")
    return ops.add(p_bar, z)


def assemble_feature(p_tilde: Tensor | None, e_bar: Tensor) -> Tensor:
    """f(x) = [P~; E~bar], prompt rows first."""
    if p_tilde is None:
        return e_bar
    if p_tilde.shape[-1] != e_bar.shape[-1]:
        raise ValueError(f"width mismatch: prompt {p_tilde.shape} vs visual {e_bar.shape}")
    return ops.concat([p_tilde, e_bar], axis=-2)
