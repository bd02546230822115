"""Training and scoring of pair-matcher models.

Validation accuracy thresholds scores at 0.5 (ties predict 1) and the
loss is mean binary cross-entropy with scores clamped away from {0, 1},
matching the downstream report tooling exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .model import build_model
from .sampleio import Sample, load_split, write_score_csv

APPROACHES = ("S12", "T1", "T2", "T3")
_BCE_EPS = 1e-12


@dataclass(frozen=True)
class TrainSpec:
    samples_dir: str
    subtask: int
    approach: str
    architecture: str = "tile-stat"
    epochs: int = 10
    batch_size: int = 16
    seed: int = 0
    learning_rate: float = 1e-3
    weight_decay: float = 1e-2
    model_id: str = "model"
    scores_path: str | None = None

    def __post_init__(self):
        if self.subtask not in (1, 2, 3):
            raise ValueError(f"subtask must be 1, 2 or 3, got {self.subtask}")
        if self.approach not in APPROACHES:
            raise ValueError(f"approach must be one of {APPROACHES}")
        if self.subtask in (1, 2) and self.approach != "S12":
            raise ValueError("approaches T1/T2/T3 apply to subtask 3 only")
        if self.subtask == 3 and self.approach == "S12":
            raise ValueError("subtask 3 uses approaches T1, T2 or T3")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")


@dataclass(frozen=True)
class ReportRow:
    model_id: str
    validation_accuracy: float
    validation_loss: float

    def csv_line(self) -> str:
        return f"{self.model_id},{self.validation_accuracy:.6f},{self.validation_loss:.6f}"


def _to_batch(samples: list[Sample]) -> tuple[torch.Tensor, torch.Tensor, list[int]]:
    xs = torch.stack(
        [torch.from_numpy(s.tensor.transpose(2, 0, 1).copy()) for s in samples]
    )
    ys = torch.tensor([s.label for s in samples], dtype=torch.float32)
    return xs, ys, [s.pair_id for s in samples]


def evaluate_scores(scores: np.ndarray, labels: np.ndarray) -> tuple[float, float]:
    """(accuracy, BCE loss) with the 0.5 tie-up threshold convention."""
    preds = (scores >= 0.5).astype(int)
    acc = float((preds == labels).mean())
    clamped = np.clip(scores, _BCE_EPS, 1.0 - _BCE_EPS)
    loss = float(-np.mean(labels * np.log(clamped) + (1 - labels) * np.log(1 - clamped)))
    return acc, loss


def train(spec: TrainSpec) -> tuple[nn.Module, ReportRow]:
    """Fit one model; returns it plus its validation report row."""
    torch.manual_seed(spec.seed)
    train_samples = load_split(spec.samples_dir, "train")
    valid_samples = load_split(spec.samples_dir, "valid")
    xtr, ytr, _ = _to_batch(train_samples)
    xva, yva, _ = _to_batch(valid_samples)
    side = xtr.shape[-1]

    net = build_model(spec.architecture, side)
    optimizer = torch.optim.Adam(
        net.parameters(), lr=spec.learning_rate, weight_decay=spec.weight_decay
    )
    loss_fn = nn.BCEWithLogitsLoss()
    shuffler = torch.Generator().manual_seed(spec.seed)

    for _ in range(spec.epochs):
        net.train()
        order = torch.randperm(len(xtr), generator=shuffler)
        for start in range(0, len(xtr), spec.batch_size):
            idx = order[start : start + spec.batch_size]
            optimizer.zero_grad()
            loss = loss_fn(net(xtr[idx]), ytr[idx])
            loss.backward()
            optimizer.step()

    net.eval()
    with torch.no_grad():
        scores = torch.sigmoid(net(xva)).numpy().astype(np.float64)
    acc, loss = evaluate_scores(scores, yva.numpy().astype(int))
    return net, ReportRow(spec.model_id, acc, loss)


def predict(
    net: nn.Module,
    samples: list[Sample],
    batch_size: int = 32,
    pair_ids: list[int] | None = None,
) -> dict[int, float]:
    """Per-pair sigmoid scores in [0, 1], keyed by pair id.

    With pair_ids given, scores exactly those pairs and raises on ids the
    sample set does not contain.
    """
    if pair_ids is not None:
        by_id = {s.pair_id: s for s in samples}
        unknown = [pid for pid in pair_ids if pid not in by_id]
        if unknown:
            raise ValueError(f"unknown pair ids: {unknown[:5]}")
        samples = [by_id[pid] for pid in pair_ids]
    net.eval()
    out: dict[int, float] = {}
    with torch.no_grad():
        for start in range(0, len(samples), batch_size):
            chunk = samples[start : start + batch_size]
            xs, _, ids = _to_batch(chunk)
            scores = torch.sigmoid(net(xs)).numpy()
            for pid, score in zip(ids, scores):
                if pid in out:
                    raise ValueError(f"duplicate pair id {pid}")
                out[pid] = float(min(max(score, 0.0), 1.0))
    return out


def save_model(path, net: nn.Module, spec: TrainSpec, side: int) -> None:
    torch.save(
        {
            "state_dict": net.state_dict(),
            "architecture": spec.architecture,
            "side": side,
            "model_id": spec.model_id,
        },
        path,
    )


def load_model(path) -> tuple[nn.Module, str]:
    payload = torch.load(path, map_location="cpu", weights_only=True)
    net = build_model(payload["architecture"], payload["side"])
    net.load_state_dict(payload["state_dict"])
    net.eval()
    return net, payload["model_id"]


def run_training(
    spec: TrainSpec,
    model_path=None,
    scores_path=None,
    report_path=None,
) -> ReportRow:
    """Train, then write the artifacts the scoring harness consumes."""
    net, row = train(spec)
    valid_samples = load_split(spec.samples_dir, "valid")
    if scores_path is None:
        scores_path = spec.scores_path
    if model_path is not None:
        side = valid_samples[0].tensor.shape[0]
        save_model(model_path, net, spec, side)
    if scores_path is not None:
        write_score_csv(scores_path, spec.model_id, predict(net, valid_samples))
    if report_path is not None:
        header = "model_id,validation_accuracy,validation_loss"
        Path(report_path).write_text(header + "\n" + row.csv_line() + "\n")
    return row
