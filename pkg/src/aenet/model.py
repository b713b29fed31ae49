"""The assembled model: parameters, forward pass and loss terms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .caa import (
    CaaParams,
    HarmonizedPair,
    caa_text,
    caa_vision,
    init_caa,
    init_sharing_token,
    mean_pooled_pair,
)
from .config import RunConfig
from .encoder import EncoderParams, PromptParams, embed_attributes, encode, init_encoder
from .numerics import SplitMix64, Tensor
from .numerics import tensor as ops
from .objective import (
    LossWeights,
    MappingParams,
    classification_loss,
    cosine_scores,
    debias_loss,
    init_mapping,
    map_to_semantic,
    total_loss,
)
from .vrru import VrruParams, assemble_feature, consistency_loss, enhance_prompt, init_vrru, predict_residual


@dataclass
class ModelParams:
    prompt: PromptParams | None
    sharing: Tensor
    caa: CaaParams
    vrru: VrruParams
    mapping: MappingParams
    encoder: EncoderParams

    def named_tensors(self) -> list[tuple[str, Tensor, str]]:
        """(name, tensor, role) for every tensor, in a fixed order."""
        out: list[tuple[str, Tensor, str]] = []
        if self.prompt is not None:
            out.append(("prompt", self.prompt.prompt, "prompt"))
        out.append(("sharing", self.sharing, "sharing"))
        for name in ("q_s", "q_e", "k_r", "v_r"):
            out.append((f"caa.{name}", getattr(self.caa, name), "caa"))
        for name in ("w_z", "b_z", "mlp_w1", "mlp_b1", "mlp_w2", "mlp_b2"):
            out.append((f"vrru.{name}", getattr(self.vrru, name), "vrru"))
        out.append(("mapping.w_m", self.mapping.w_m, "mapping"))
        if self.mapping.bias is not None:
            out.append(("mapping.bias", self.mapping.bias, "mapping"))
        enc = self.encoder
        out.append(("encoder.w_attr", enc.w_attr, "attribute"))
        out.append(("encoder.w_in", enc.w_in, "encoder"))
        if enc.positions is not None:
            out.append(("encoder.positions", enc.positions, "encoder"))
        for i, block in enumerate(enc.blocks):
            for name, t in vars(block).items():
                out.append((f"encoder.block{i}.{name}", t, "encoder"))
        return out

    def trainable(self) -> list[Tensor]:
        return [t for _, t, _ in self.named_tensors() if t.requires_grad]

    def snapshot(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t, _ in self.named_tensors()}


def init_params(cfg: RunConfig, rng: SplitMix64) -> ModelParams:
    """Each component draws from its own named substream, so toggling an
    ablation never shifts the initial values of the others."""
    D = cfg.model_width
    prompt = None
    if not cfg.no_prompt:
        p = rng.substream("prompt").normal((cfg.prompt_length, D))
        prompt = PromptParams(Tensor(p, requires_grad=True, name="prompt"))
    encoder = init_encoder(
        rng.substream("encoder"),
        width=D,
        raw_dim=cfg.raw_patch_dim,
        num_attribute_tokens=cfg.num_attribute_tokens,
        layers=cfg.encoder_layers,
        num_visual_tokens=cfg.num_visual_tokens if cfg.positional_embedding else None,
        train_backbone=not cfg.freeze_backbone,
        train_attributes=not cfg.freeze_attribute_table,
    )
    return ModelParams(
        prompt=prompt,
        sharing=init_sharing_token(rng.substream("sharing"), cfg.num_sharing_tokens, D),
        caa=init_caa(rng.substream("caa"), D, cfg.caa_width),
        vrru=init_vrru(rng.substream("vrru"), cfg.caa_width, D, cfg.num_attributes, cfg.mlp_hidden),
        mapping=init_mapping(rng.substream("mapping"), D, cfg.num_attributes, bias=cfg.mapping_bias),
        encoder=encoder,
    )


@dataclass
class ForwardPass:
    mapped: Tensor
    scores: Tensor
    z: Tensor | None
    f_x: Tensor
    pair: HarmonizedPair | None


def forward(params: ModelParams, cfg: RunConfig, raw, unit_prototypes: np.ndarray) -> ForwardPass:
    """Encode -> CAA -> VRRU -> assemble f(x) -> map -> cosine scores vs all classes."""
    enc = encode(raw, params.prompt, params.encoder)
    z = None
    pair = None
    p_tilde = enc.p_bar
    if enc.p_bar is not None and not cfg.no_residual:
        s = embed_attributes(params.encoder)
        if cfg.no_caa:
            pair = mean_pooled_pair(s, enc.e_bar, params.caa)
        else:
            pair = HarmonizedPair(
                s_tilde=caa_text(s, params.sharing, params.caa, scaled=cfg.caa_logit_scaling),
                e_tilde=caa_vision(enc.e_bar, params.sharing, params.caa, scaled=cfg.caa_logit_scaling),
            )
        z = predict_residual(pair, params.vrru)
        p_tilde = enhance_prompt(enc.p_bar, z)
    f_x = assemble_feature(p_tilde, enc.e_bar)
    mapped = map_to_semantic(f_x, params.mapping)
    return ForwardPass(mapped=mapped, scores=cosine_scores(mapped, unit_prototypes), z=z, f_x=f_x, pair=pair)


@dataclass
class LossTerms:
    total: Tensor
    cls: Tensor
    cons: Tensor
    deb: Tensor

    def values(self) -> dict[str, float]:
        return {"loss": self.total.item(), "cls": self.cls.item(), "cons": self.cons.item(), "deb": self.deb.item()}


def loss_terms(
    fp: ForwardPass,
    labels,
    prototypes: np.ndarray,
    seen: list[int],
    unseen: list[int],
    params: ModelParams,
    cfg: RunConfig,
) -> LossTerms:
    cls = classification_loss(fp.scores, labels, seen, temperature=cfg.temperature)
    if fp.z is not None:
        cons = consistency_loss(fp.z, prototypes[np.asarray(labels)], params.vrru, squared=cfg.squared_consistency)
    else:
        cons = Tensor(0.0)
    deb = debias_loss(fp.scores, seen, unseen)
    weights = LossWeights(cfg.lambda_cons, cfg.lambda_deb)
    return LossTerms(total=total_loss(cls, cons, deb, weights), cls=cls, cons=cons, deb=deb)
