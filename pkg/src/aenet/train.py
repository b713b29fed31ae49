"""Mini-batch training loop and model evaluation."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .config import RunConfig
from .data import ZslDataset
from .evaluation import EvalReport, PredictionScores, evaluate_scores
from .model import ModelParams, forward, init_params, loss_terms
from .numerics import SplitMix64, Tensor, backward, no_grad
from .objective import normalize_prototypes
from .optim import SGD, Adam, global_grad_norm

log = logging.getLogger(__name__)


class DivergenceError(RuntimeError):
    def __init__(self, step: int, detail: str):
        super().__init__(f"training diverged at step {step}: {detail}")
        self.step = step


@dataclass
class TrainLog:
    steps: list[dict] = field(default_factory=list)
    evals: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"steps": self.steps, "evals": self.evals}


def make_optimizer(cfg: RunConfig, params: ModelParams):
    if cfg.optimizer == "sgd":
        return SGD(params.trainable(), lr=cfg.learning_rate)
    return Adam(params.trainable(), lr=cfg.learning_rate, beta1=cfg.beta1, beta2=cfg.beta2, eps=cfg.epsilon)


def _batches(n: int, size: int, rng: SplitMix64):
    """Endless stream of index batches; reshuffled every epoch."""
    while True:
        order = rng.permutation(n)
        for start in range(0, n - size + 1 if n >= size else 1, size):
            yield order[start:start + size]


def compute_scores(params: ModelParams, cfg: RunConfig, data: ZslDataset) -> PredictionScores:
    unit = normalize_prototypes(data.prototypes)
    with no_grad():
        fp = forward(params, cfg, Tensor(data.test_x), unit)
    return PredictionScores(fp.scores.data.copy(), data.seen_mask, data.test_y)


def evaluate_model(params: ModelParams, cfg: RunConfig, data: ZslDataset) -> EvalReport:
    return evaluate_scores(compute_scores(params, cfg, data), cfg.gamma_grid)


def train(cfg: RunConfig, data: ZslDataset, params: ModelParams | None = None) -> tuple[ModelParams, TrainLog]:
    root = SplitMix64(cfg.seed)
    if params is None:
        params = init_params(cfg, root.substream("init"))
    view = data.training_view()
    prototypes = view.prototypes()
    unit = normalize_prototypes(prototypes)
    seen, unseen = data.seen_classes, data.unseen_classes
    opt = make_optimizer(cfg, params)
    batches = _batches(len(view), cfg.batch_size, root.substream("batch-order"))
    trainlog = TrainLog()

    for step in range(1, cfg.steps + 1):
        x, y = view.batch(next(batches))
        opt.zero_grad()
        try:
            fp = forward(params, cfg, Tensor(x), unit)
            terms = loss_terms(fp, y, prototypes, seen, unseen, params, cfg)
            backward(terms.total)
        except FloatingPointError as exc:
            raise DivergenceError(step, str(exc)) from exc
        gnorm = global_grad_norm(opt.params)
        if not np.isfinite(gnorm):
            raise DivergenceError(step, "non-finite gradient")
        opt.step()
        record = {"step": step, **terms.values(), "grad_norm": gnorm}
        trainlog.steps.append(record)
        if cfg.eval_every and step % cfg.eval_every == 0:
            report = evaluate_model(params, cfg, data)
            trainlog.evals.append({"step": step, **report.to_dict()})
            log.info("step %d loss %.4f acc %.3f H %.3f", step, record["loss"], report.acc_zsl, report.H)
    return params, trainlog
