"""Gradient diagnostics: a per-operation suite and an end-to-end model check."""

from __future__ import annotations

import numpy as np

from .config import RunConfig
from .data import generate_dataset
from .model import forward, init_params, loss_terms
from .numerics import SplitMix64, Tensor, gradcheck
from .numerics import tensor as ops
from .numerics.gradcheck import GradcheckReport
from .numerics.rng import fnv1a64
from .objective import normalize_prototypes


def _positive(x):
    return np.abs(x) + 0.5


# name -> (builder(tensors) -> scalar, input shapes, per-input transform)
OP_CASES = {
    "add": (lambda a, b: ops.sum(ops.mul(ops.add(a, b), ops.add(a, b))), [(3, 4), (4,)], None),
    "sub": (lambda a, b: ops.sum(ops.square(ops.sub(a, b))), [(3, 4), (3, 1)], None),
    "mul": (lambda a, b: ops.sum(ops.mul(a, b)), [(2, 3), (2, 3)], None),
    "div": (lambda a, b: ops.sum(ops.div(a, b)), [(2, 3), (2, 3)], {1: _positive}),
    "scale": (lambda a: ops.sum(ops.square(ops.scale(a, -1.7))), [(5,)], None),
    "square": (lambda a, b: ops.sum(ops.mul(ops.square(a), b)), [(2, 3), (2, 3)], None),
    "exp": (lambda a: ops.sum(ops.exp(a)), [(2, 3)], None),
    "log": (lambda a: ops.sum(ops.log(a)), [(2, 3)], {0: _positive}),
    "gelu": (lambda a: ops.sum(ops.mul(ops.gelu(a), a)), [(3, 4)], None),
    "matmul": (lambda a, b: ops.sum(ops.square(ops.matmul(a, b))), [(3, 4), (4, 2)], None),
    "matmul_batched": (lambda a, b: ops.sum(ops.square(ops.matmul(a, b))), [(2, 3, 4), (4, 2)], None),
    "transpose": (lambda a, b: ops.sum(ops.mul(ops.transpose(a), b)), [(3, 2), (2, 3)], None),
    "reshape": (lambda a, b: ops.sum(ops.mul(ops.reshape(a, (3, 2)), b)), [(2, 3), (3, 2)], None),
    "broadcast_to": (lambda a, b: ops.sum(ops.mul(ops.broadcast_to(a, (4, 2, 3)), b)), [(2, 3), (4, 2, 3)], None),
    "concat": (lambda a, b: ops.sum(ops.square(ops.concat([a, b], axis=0))), [(2, 3), (1, 3)], None),
    "narrow": (lambda a: ops.sum(ops.square(ops.narrow(a, -2, 1, 3))), [(2, 4, 3)], None),
    "take": (lambda a: ops.sum(ops.square(ops.take(a, [2, 0, 2], axis=-1))), [(3, 4)], None),
    "sum_axis": (lambda a: ops.sum(ops.square(ops.sum(a, axis=1))), [(3, 4)], None),
    "mean_axis": (lambda a: ops.sum(ops.square(ops.mean(a, axis=0, keepdims=True))), [(3, 4)], None),
    "max_pool": (lambda a, b: ops.sum(ops.mul(ops.max_pool(a, axis=-1), b)), [(3, 4), (3, 1)], None),
    "gmp_rows": (lambda a: ops.sum(ops.square(ops.gmp_rows(a))), [(4, 3)], None),
    "softmax": (lambda a, b: ops.sum(ops.mul(ops.softmax(a), b)), [(3, 5), (3, 5)], None),
    "log_softmax": (lambda a, b: ops.sum(ops.mul(ops.log_softmax(a), b)), [(3, 5), (3, 5)], None),
    "l2_norm": (lambda a: ops.sum(ops.l2_norm(a, axis=-1)), [(3, 4)], None),
    "variance": (lambda a: ops.variance(a), [(3, 4)], None),
    "layer_norm": (
        lambda a, g, b, w: ops.sum(ops.mul(ops.layer_norm(a, g, b), w)),
        [(3, 5), (5,), (5,), (3, 5)],
        None,
    ),
    "cosine": (lambda a, b: ops.cosine(a, b), [(5,), (5,)], None),
}


def op_gradcheck(name: str, trials: int = 100, h: float = 1e-5) -> float:
    """Worst relative error of one operation over ``trials`` seeded inputs."""
    build, shapes, transforms = OP_CASES[name]
    transforms = transforms or {}
    rng = SplitMix64(fnv1a64(name))
    worst = 0.0
    for _ in range(trials):
        inputs = []
        for i, shape in enumerate(shapes):
            data = rng.normal(shape)
            if i in transforms:
                data = transforms[i](data)
            inputs.append(Tensor(data, requires_grad=True))
        report = gradcheck(lambda: build(*inputs), inputs, h=h)
        worst = max(worst, report.max_error)
    return worst


def op_gradient_suite(trials: int = 100, h: float = 1e-5) -> dict[str, float]:
    return {name: op_gradcheck(name, trials, h) for name in sorted(OP_CASES)}


def model_gradcheck(cfg: RunConfig, batch: int = 4, h: float = 1e-5, tol: float = 1e-4) -> GradcheckReport:
    """Check the total loss of the assembled model against finite differences.

    Every tensor is made trainable, and the zero-initialised residual
    weights are replaced by small random values so the attention branch
    actually feeds the loss.
    """
    data = generate_dataset(cfg)
    root = SplitMix64(cfg.seed)
    params = init_params(cfg, root.substream("init"))
    jitter = root.substream("gradcheck")
    params.vrru.w_z.data[:] = jitter.normal(params.vrru.w_z.shape, std=0.1)
    params.vrru.b_z.data[:] = jitter.normal(params.vrru.b_z.shape, std=0.1)
    named = params.named_tensors()
    for _, t, _ in named:
        t.requires_grad = True
    x, y = data.training_view().batch(np.arange(min(batch, len(data.train_y))))
    unit = normalize_prototypes(data.prototypes)

    def loss():
        fp = forward(params, cfg, Tensor(x), unit)
        return loss_terms(fp, y, data.prototypes, data.seen_classes, data.unseen_classes, params, cfg).total

    return gradcheck(loss, [t for _, t, _ in named], h=h, tol=tol, names=[n for n, _, _ in named])
