"""ZSL / GZSL inference, calibrated stacking and the reported metrics."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .numerics.aent import read_aent, write_aent
from .objective import ScoreStats, score_stats


@dataclass
class PredictionScores:
    """Cosine scores of every test sample against every class prototype."""

    scores: np.ndarray
    seen_mask: np.ndarray
    labels: np.ndarray
    class_names: list[str] | None = None

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        self.seen_mask = np.asarray(self.seen_mask, dtype=bool)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        n, c = self.scores.shape
        if self.seen_mask.shape != (c,) or self.labels.shape != (n,):
            raise ValueError("scores, seen_mask and labels have inconsistent shapes")
        if not np.isfinite(self.scores).all():
            raise ValueError("scores must be finite")
        if n and (self.labels.min() < 0 or self.labels.max() >= c):
            raise ValueError("label outside the class list")

    @property
    def seen_classes(self) -> np.ndarray:
        return np.flatnonzero(self.seen_mask)

    @property
    def unseen_classes(self) -> np.ndarray:
        return np.flatnonzero(~self.seen_mask)


@dataclass
class EvalReport:
    acc_zsl: float
    S: float
    U: float
    H: float
    gamma: float
    per_class_accuracy: dict[int, float]
    sample_accuracy: float
    stats: ScoreStats
    sweep: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "acc_zsl": self.acc_zsl,
            "S": self.S,
            "U": self.U,
            "H": self.H,
            "gamma": self.gamma,
            "sample_accuracy": self.sample_accuracy,
            "per_class_accuracy": {str(k): v for k, v in self.per_class_accuracy.items()},
            "stats": self.stats.to_dict(),
            "sweep": self.sweep,
        }


def infer_zsl(ps: PredictionScores) -> np.ndarray:
    """Argmax restricted to unseen classes; ties go to the lowest class index."""
    unseen = ps.unseen_classes
    if unseen.size == 0:
        raise ValueError("ZSL inference needs at least one unseen class")
    return unseen[np.argmax(ps.scores[:, unseen], axis=1)]


def infer_gzsl(ps: PredictionScores, gamma: float) -> np.ndarray:
    """Calibrated stacking: argmax over all classes of ``score - gamma * [seen]``."""
    return np.argmax(ps.scores - gamma * ps.seen_mask, axis=1)


def per_class_accuracy(pred, truth, classes: Sequence[int]) -> np.ndarray:
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    classes = list(classes)
    if not classes:
        raise ValueError("class set is empty")
    out = np.empty(len(classes))
    for i, c in enumerate(classes):
        members = truth == c
        if not members.any():
            raise ValueError(f"class {c} has no test samples")
        out[i] = np.mean(pred[members] == c)
    return out


def harmonic_mean(S: float, U: float) -> float:
    if S + U == 0:
        return 0.0
    return 2.0 * S * U / (S + U)


def _domain_samples(ps: PredictionScores, classes: np.ndarray) -> np.ndarray:
    return np.isin(ps.labels, classes)


def gzsl_metrics(ps: PredictionScores, gamma: float) -> tuple[float, float, float]:
    pred = infer_gzsl(ps, gamma)
    S = float(per_class_accuracy(pred, ps.labels, ps.seen_classes).mean())
    U = float(per_class_accuracy(pred, ps.labels, ps.unseen_classes).mean())
    return S, U, harmonic_mean(S, U)


def sweep_gamma(ps: PredictionScores, grid: Sequence[float]) -> list[dict]:
    """One row per grid point, in grid order."""
    if len(grid) == 0:
        raise ValueError("gamma grid is empty")
    rows = []
    for gamma in grid:
        S, U, H = gzsl_metrics(ps, float(gamma))
        rows.append({"gamma": float(gamma), "S": S, "U": U, "H": H})
    return rows


def best_gamma(rows: list[dict]) -> dict:
    """Row with the highest H; the earliest row wins ties."""
    best = rows[0]
    for row in rows[1:]:
        if row["H"] > best["H"]:
            best = row
    return best


def zsl_accuracy(ps: PredictionScores) -> float:
    mask = _domain_samples(ps, ps.unseen_classes)
    sub = PredictionScores(ps.scores[mask], ps.seen_mask, ps.labels[mask])
    return float(per_class_accuracy(infer_zsl(sub), sub.labels, sub.unseen_classes).mean())


def evaluate_scores(ps: PredictionScores, gamma_grid: Sequence[float]) -> EvalReport:
    rows = sweep_gamma(ps, gamma_grid)
    best = best_gamma(rows)
    pred = infer_gzsl(ps, best["gamma"])
    present = sorted(set(ps.labels.tolist()))
    per_class = dict(zip(present, per_class_accuracy(pred, ps.labels, present).tolist()))
    return EvalReport(
        acc_zsl=zsl_accuracy(ps),
        S=best["S"],
        U=best["U"],
        H=best["H"],
        gamma=best["gamma"],
        per_class_accuracy=per_class,
        sample_accuracy=float(np.mean(pred == ps.labels)),
        stats=score_stats(ps.scores, ps.seen_classes, ps.unseen_classes),
        sweep=rows,
    )


# --------------------------------------------------------------------- files


def save_scores(path, ps: PredictionScores) -> None:
    """Write ``<path>.aent`` plus a JSON sidecar ``<path>.json``."""
    path = Path(path)
    write_aent(path.with_suffix(".aent"), ps.scores)
    names = ps.class_names or [f"class{c:03d}" for c in range(ps.scores.shape[1])]
    sidecar = {"class_names": names, "seen": ps.seen_mask.tolist(), "labels": ps.labels.tolist()}
    path.with_suffix(".json").write_text(json.dumps(sidecar, indent=1))


def load_scores(path) -> PredictionScores:
    path = Path(path)
    scores = read_aent(path.with_suffix(".aent"))
    sidecar = json.loads(path.with_suffix(".json").read_text())
    return PredictionScores(scores, np.array(sidecar["seen"]), np.array(sidecar["labels"]), sidecar.get("class_names"))


def write_json(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def write_csv(path, rows: list[dict], columns: Sequence[str]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(columns), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in columns})
