"""Toy prompt-conditioned transformer and attribute-token table.

These stand in for a pre-trained ViT and for frozen word vectors.  Prompt
tokens are inserted once, at the input (shallow prompting), and the encoder
runs over the joint ``[prompt; patches]`` sequence.  All functions accept
optional leading batch axes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .numerics import SplitMix64, Tensor
from .numerics import tensor as ops


@dataclass
class PromptParams:
    prompt: Tensor

    @property
    def length(self) -> int:
        return self.prompt.shape[0]


@dataclass
class BlockParams:
    ln1_gain: Tensor
    ln1_bias: Tensor
    w_q: Tensor
    w_k: Tensor
    w_v: Tensor
    w_o: Tensor
    ln2_gain: Tensor
    ln2_bias: Tensor
    w_ff1: Tensor
    w_ff2: Tensor


@dataclass
class EncoderParams:
    w_in: Tensor
    w_attr: Tensor
    blocks: list[BlockParams]
    positions: Tensor | None = None


@dataclass
class EncodedSample:
    e_bar: Tensor
    p_bar: Tensor | None


def _gauss(rng: SplitMix64, shape, std, trainable, name):
    return Tensor(rng.normal(shape, std=std), requires_grad=trainable, name=name)


def init_encoder(
    rng: SplitMix64,
    width: int,
    raw_dim: int,
    num_attribute_tokens: int,
    layers: int,
    num_visual_tokens: int | None = None,
    train_backbone: bool = False,
    train_attributes: bool = True,
) -> EncoderParams:
    """Random weights with ``1/sqrt(fan_in)`` scaling; layer norms start at identity."""
    tb = train_backbone
    blocks = []
    for i in range(layers):
        pre = f"encoder.block{i}."
        blocks.append(
            BlockParams(
                ln1_gain=Tensor([1.0] * width, requires_grad=tb, name=pre + "ln1_gain"),
                ln1_bias=Tensor([0.0] * width, requires_grad=tb, name=pre + "ln1_bias"),
                w_q=_gauss(rng, (width, width), 1 / math.sqrt(width), tb, pre + "w_q"),
                w_k=_gauss(rng, (width, width), 1 / math.sqrt(width), tb, pre + "w_k"),
                w_v=_gauss(rng, (width, width), 1 / math.sqrt(width), tb, pre + "w_v"),
                w_o=_gauss(rng, (width, width), 1 / math.sqrt(width), tb, pre + "w_o"),
                ln2_gain=Tensor([1.0] * width, requires_grad=tb, name=pre + "ln2_gain"),
                ln2_bias=Tensor([0.0] * width, requires_grad=tb, name=pre + "ln2_bias"),
                w_ff1=_gauss(rng, (width, 4 * width), 1 / math.sqrt(width), tb, pre + "w_ff1"),
                w_ff2=_gauss(rng, (4 * width, width), 1 / math.sqrt(4 * width), tb, pre + "w_ff2"),
            )
        )
    positions = None
    if num_visual_tokens is not None:
        positions = _gauss(rng, (num_visual_tokens, width), 0.1, tb, "encoder.positions")
    return EncoderParams(
        w_in=_gauss(rng, (raw_dim, width), 1 / math.sqrt(raw_dim), tb, "encoder.w_in"),
        w_attr=_gauss(rng, (num_attribute_tokens, width), 1.0, train_attributes, "encoder.w_attr"),
        blocks=blocks,
        positions=positions,
    )


def embed_attributes(params: EncoderParams) -> Tensor:
    """The attribute-token matrix S, one learned row per attribute descriptor."""
    return params.w_attr


def self_attention_block(tokens: Tensor, block: BlockParams, return_weights: bool = False):
    """Pre-norm single-head self-attention then pre-norm GELU feed-forward, both residual."""
    width = tokens.shape[-1]
    h = ops.layer_norm(tokens, block.ln1_gain, block.ln1_bias)
    q = ops.matmul(h, block.w_q)
    k = ops.matmul(h, block.w_k)
    v = ops.matmul(h, block.w_v)
    logits = ops.scale(ops.matmul(q, ops.transpose(k)), 1.0 / math.sqrt(width))
    weights = ops.softmax(logits, axis=-1)
    x = ops.add(tokens, ops.matmul(ops.matmul(weights, v), block.w_o))
    h2 = ops.layer_norm(x, block.ln2_gain, block.ln2_bias)
    out = ops.add(x, ops.matmul(ops.gelu(ops.matmul(h2, block.w_ff1)), block.w_ff2))
    if return_weights:
        return out, weights
    return out


def encode(raw_patches: Tensor, prompt: PromptParams | None, params: EncoderParams) -> EncodedSample:
    """Encode ``[..., N_v, d_raw]`` patches conditioned on the prompt.

    Returns the visual tokens and the prompt embedding (``None`` when run
    without a prompt).
    """
    raw_patches = ops.as_tensor(raw_patches)
    if raw_patches.shape[-1] != params.w_in.shape[0]:
        raise ValueError(
            f"raw patch width {raw_patches.shape[-1]} does not match encoder input {params.w_in.shape[0]}"
        )
    tokens = ops.matmul(raw_patches, params.w_in)
    if params.positions is not None:
        if params.positions.shape[0] != tokens.shape[-2]:
            raise ValueError(f"expected {params.positions.shape[0]} patches, got {tokens.shape[-2]}")
        tokens = ops.add(tokens, params.positions)
    t = 0
    if prompt is not None:
        t = prompt.length
        lead = tokens.shape[:-2]
        p = ops.broadcast_to(prompt.prompt, lead + prompt.prompt.shape) if lead else prompt.prompt
        tokens = ops.concat([p, tokens], axis=-2)
    for block in params.blocks:
        tokens = self_attention_block(tokens, block)
    n = tokens.shape[-2]
    if t == 0:
        return EncodedSample(e_bar=tokens, p_bar=None)
    return EncodedSample(e_bar=ops.narrow(tokens, -2, t, n), p_bar=ops.narrow(tokens, -2, 0, t))
