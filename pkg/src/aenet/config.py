"""Run configuration: one flat JSON object with fully spelled keys."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path


class ConfigError(ValueError):
    pass


def default_gamma_grid() -> list[float]:
    return [round(i / 20, 10) for i in range(21)]


@dataclass(frozen=True)
class RunConfig:
    # widths and token counts
    model_width: int = 16
    caa_width: int = 16
    prompt_length: int = 5
    num_visual_tokens: int = 8
    num_attribute_tokens: int = 12
    num_sharing_tokens: int = 4
    num_attributes: int = 12
    raw_patch_dim: int = 8
    mlp_hidden: int = 32
    encoder_layers: int = 2
    # synthetic benchmark
    num_classes: int = 20
    num_seen: int = 15
    samples_per_class: int = 50
    test_per_class: int = 10
    noise_std: float = 0.3
    # objective
    lambda_cons: float = 1.0
    lambda_deb: float = 10.0
    temperature: float = 0.1
    squared_consistency: bool = False
    caa_logit_scaling: bool = False
    mapping_bias: bool = False
    positional_embedding: bool = False
    freeze_backbone: bool = True
    freeze_attribute_table: bool = False
    # optimiser
    optimizer: str = "adam"
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    steps: int = 2000
    batch_size: int = 32
    eval_every: int = 500
    # evaluation
    gamma_grid: list[float] = field(default_factory=default_gamma_grid)
    # bookkeeping
    seed: int = 42
    no_prompt: bool = False
    no_residual: bool = False
    no_caa: bool = False
    output_dir: str = "runs/default"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        dims = (
            "model_width", "caa_width", "prompt_length", "num_visual_tokens",
            "num_attribute_tokens", "num_sharing_tokens", "num_attributes",
            "raw_patch_dim", "mlp_hidden", "encoder_layers", "num_classes",
            "samples_per_class", "test_per_class", "batch_size",
        )
        for name in dims:
            value = getattr(self, name)
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ConfigError(f"{name} must be a positive integer, got {value!r}")
        if not 1 <= self.num_seen < self.num_classes:
            raise ConfigError(f"num_seen must lie in [1, num_classes), got {self.num_seen}")
        if self.test_per_class >= self.samples_per_class:
            raise ConfigError("test_per_class must be smaller than samples_per_class")
        if self.steps < 0 or self.eval_every < 0:
            raise ConfigError("steps and eval_every must be non-negative")
        if self.lambda_cons < 0 or self.lambda_deb < 0:
            raise ConfigError("loss weights must be non-negative")
        if self.temperature <= 0:
            raise ConfigError("temperature must be positive")
        if self.noise_std < 0 or self.learning_rate < 0:
            raise ConfigError("noise_std and learning_rate must be non-negative")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        if not self.gamma_grid:
            raise ConfigError("gamma_grid must be non-empty")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must fit in 64 bits")

    @property
    def prompt_tokens(self) -> int:
        return 0 if self.no_prompt else self.prompt_length

    @property
    def num_unseen(self) -> int:
        return self.num_classes - self.num_seen

    def with_overrides(self, **changes) -> "RunConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)


_FIELDS = {f.name: f for f in fields(RunConfig)}


def config_from_dict(raw: dict, base: RunConfig | None = None) -> RunConfig:
    unknown = sorted(set(raw) - set(_FIELDS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    try:
        return replace(base or RunConfig(), **raw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    return config_from_dict(raw)


def tiny_config(**overrides) -> RunConfig:
    """The small configuration used for end-to-end gradient checks."""
    base = dict(
        model_width=8,
        caa_width=8,
        prompt_length=2,
        num_visual_tokens=4,
        num_attribute_tokens=6,
        num_sharing_tokens=3,
        num_attributes=6,
        raw_patch_dim=4,
        mlp_hidden=16,
        encoder_layers=2,
        num_classes=8,
        num_seen=6,
        samples_per_class=6,
        test_per_class=2,
        batch_size=4,
        steps=20,
        eval_every=0,
        freeze_backbone=False,
    )
    base.update(overrides)
    return RunConfig(**base)
