"""Central-difference gradient checking."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor, backward


@dataclass
class GradcheckReport:
    errors: dict[str, float]
    tol: float
    h: float
    evaluations: int = 0
    flagged: list[str] = field(default_factory=list)

    @property
    def max_error(self) -> float:
        return max(self.errors.values(), default=0.0)

    @property
    def passed(self) -> bool:
        return not self.flagged

    def to_dict(self) -> dict:
        return {
            "h": self.h,
            "tol": self.tol,
            "max_rel_error": self.max_error,
            "passed": self.passed,
            "flagged": list(self.flagged),
            "per_param": dict(self.errors),
        }


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> np.ndarray:
    return np.abs(analytic - numeric) / np.maximum(1e-8, np.abs(analytic) + np.abs(numeric))


def numeric_grad(f: Callable[[], Tensor], param: Tensor, h: float = 1e-5) -> np.ndarray:
    grad = np.zeros_like(param.data)
    flat = param.data.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        up = f().item()
        flat[i] = orig - h
        down = f().item()
        flat[i] = orig
        gflat[i] = (up - down) / (2 * h)
    return grad


def gradcheck(
    f: Callable[[], Tensor],
    params: Sequence[Tensor],
    h: float = 1e-5,
    tol: float = 1e-4,
    names: Sequence[str] | None = None,
) -> GradcheckReport:
    """Compare analytic gradients of ``f()`` against central differences.

    ``f`` must rebuild its graph from the current ``param.data`` on every call.
    Parameters are perturbed in place and restored afterwards.
    """
    if h <= 0:
        raise ValueError("step h must be positive")
    names = list(names) if names is not None else [p.name or f"param{i}" for i, p in enumerate(params)]
    for p in params:
        p.zero_grad()
    backward(f())
    analytic = [p.grad.copy() for p in params]

    errors: dict[str, float] = {}
    evaluations = 1
    for name, p, ga in zip(names, params, analytic):
        gn = numeric_grad(f, p, h)
        evaluations += 2 * p.data.size
        errors[name] = float(relative_error(ga, gn).max()) if ga.size else 0.0
    flagged = [n for n, e in errors.items() if e >= tol]
    return GradcheckReport(errors=errors, tol=tol, h=h, evaluations=evaluations, flagged=flagged)
