"""Ablation table and hyper-parameter sweeps over the synthetic benchmark."""

from __future__ import annotations

import logging
from typing import Sequence

from .config import RunConfig
from .data import ZslDataset, generate_dataset
from .train import evaluate_model, train

log = logging.getLogger(__name__)

PROMPT_LENGTHS = (1, 3, 5, 7, 9)
LAMBDA_CONS_GRID = (0.0, 0.5, 1.0, 1.5, 2.0)
ABLATIONS = {
    "full": {},
    "no_prompt": {"no_prompt": True},
    "no_residual": {"no_residual": True},
    "no_caa": {"no_caa": True},
}
METRIC_COLUMNS = ("acc_zsl", "S", "U", "H", "gamma", "alpha_gap", "final_loss")
FINAL_WINDOW = 100


def run_once(cfg: RunConfig, data: ZslDataset) -> dict:
    """Train from scratch and return the headline metrics."""
    params, trainlog = train(cfg, data)
    report = evaluate_model(params, cfg, data)
    tail = [s["loss"] for s in trainlog.steps[-FINAL_WINDOW:]]
    return {
        "acc_zsl": report.acc_zsl,
        "S": report.S,
        "U": report.U,
        "H": report.H,
        "gamma": report.gamma,
        "alpha_gap": abs(report.stats.alpha_s - report.stats.alpha_u),
        "final_loss": sum(tail) / len(tail) if tail else float("nan"),
    }


def ablate(cfg: RunConfig, variants: Sequence[str] = tuple(ABLATIONS), data: ZslDataset | None = None) -> list[dict]:
    data = data if data is not None else generate_dataset(cfg)
    rows = []
    for name in variants:
        row = {"variant": name, **run_once(cfg.with_overrides(**ABLATIONS[name]), data)}
        log.info("%s acc %.3f H %.3f", name, row["acc_zsl"], row["H"])
        rows.append(row)
    return rows


def sweep(cfg: RunConfig, field: str, values: Sequence, data: ZslDataset | None = None) -> list[dict]:
    """One training run per value of ``field``; the dataset is shared."""
    data = data if data is not None else generate_dataset(cfg)
    rows = []
    for value in values:
        row = {field: value, **run_once(cfg.with_overrides(**{field: value}), data)}
        log.info("%s=%s acc %.3f H %.3f", field, value, row["acc_zsl"], row["H"])
        rows.append(row)
    return rows


def sweep_prompt_length(cfg: RunConfig, values: Sequence[int] = PROMPT_LENGTHS) -> list[dict]:
    return sweep(cfg, "prompt_length", values)


def sweep_lambda_cons(cfg: RunConfig, values: Sequence[float] = LAMBDA_CONS_GRID) -> list[dict]:
    return sweep(cfg, "lambda_cons", values)
