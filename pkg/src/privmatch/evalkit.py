"""Scoring and submission machinery.

Submissions are bare 0/1 lines, one per test pair, newline-terminated.
Score files are CSV rows (pair_id, model_id, score) with probabilistic
scores in [0, 1]. The challenge-style aggregate is a weighted mean of
per-subtask accuracies; rounding of ensemble means is half-up (a mean of
exactly 0.5 predicts 1).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

from .errors import FormatError, ValidationError

DEFAULT_WEIGHTS = (0.1, 0.3, 0.6)
_WEIGHT_TOL = 1e-9
_BCE_EPS = 1e-12


@dataclass(frozen=True)
class Weights:
    """Per-subtask weights; must be non-negative and sum to 1."""

    w1: float = DEFAULT_WEIGHTS[0]
    w2: float = DEFAULT_WEIGHTS[1]
    w3: float = DEFAULT_WEIGHTS[2]

    def __post_init__(self):
        values = (self.w1, self.w2, self.w3)
        if any(w < 0 for w in values):
            raise ValidationError(f"weights must be non-negative, got {values}")
        if abs(sum(values) - 1.0) > _WEIGHT_TOL:
            raise ValidationError(f"weights must sum to 1, got {sum(values)!r}")


def weighted_accuracy(acc1: float, acc2: float, acc3: float, weights: Weights | None = None) -> float:
    """w1*acc1 + w2*acc2 + w3*acc3."""
    weights = weights or Weights()
    for name, acc in (("acc1", acc1), ("acc2", acc2), ("acc3", acc3)):
        if not 0.0 <= acc <= 1.0:
            raise ValidationError(f"{name} must lie in [0, 1], got {acc}")
    return weights.w1 * acc1 + weights.w2 * acc2 + weights.w3 * acc3


@dataclass(frozen=True)
class ScoreMatrix:
    """Rows = pairs (sorted by pair_id), columns = models (sorted by id)."""

    pair_ids: tuple[int, ...]
    model_ids: tuple[str, ...]
    scores: tuple[tuple[float, ...], ...]  # scores[row][col]

    def __post_init__(self):
        if not self.model_ids:
            raise ValidationError("score matrix needs at least one model")
        for row in self.scores:
            if len(row) != len(self.model_ids):
                raise ValidationError("ragged score matrix")
            for s in row:
                if not (0.0 <= s <= 1.0) or math.isnan(s):
                    raise ValidationError(f"score {s!r} outside [0, 1]")

    def column(self, model_id: str) -> list[float]:
        idx = self.model_ids.index(model_id)
        return [row[idx] for row in self.scores]


def read_score_csv(path) -> dict[tuple[int, str], float]:
    """Parse (pair_id, model_id, score) rows; header optional."""
    entries: dict[tuple[int, str], float] = {}
    text = Path(path).read_text()
    for row in csv.reader(io.StringIO(text)):
        if not row:
            continue
        if row[0].strip().lower() == "pair_id":
            continue
        if len(row) != 3:
            raise FormatError(f"score row must have 3 fields, got {row!r}")
        pair_id = int(row[0])
        model_id = row[1].strip()
        score = float(row[2])
        key = (pair_id, model_id)
        if key in entries:
            raise FormatError(f"duplicate score for {key}")
        entries[key] = score
    return entries


def write_score_csv(path, entries: dict[tuple[int, str], float]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["pair_id", "model_id", "score"])
    for (pair_id, model_id), score in sorted(entries.items()):
        writer.writerow([pair_id, model_id, repr(float(score))])
    Path(path).write_text(buf.getvalue())


def score_matrix_from_files(paths) -> ScoreMatrix:
    entries: dict[tuple[int, str], float] = {}
    for path in paths:
        for key, value in read_score_csv(path).items():
            if key in entries:
                raise FormatError(f"duplicate score for {key} across files")
            entries[key] = value
    if not entries:
        raise ValidationError("no scores found")
    pair_ids = tuple(sorted({k[0] for k in entries}))
    model_ids = tuple(sorted({k[1] for k in entries}))
    rows = []
    for pid in pair_ids:
        row = []
        for mid in model_ids:
            if (pid, mid) not in entries:
                raise ValidationError(f"missing score for pair {pid}, model {mid}")
            row.append(entries[(pid, mid)])
        rows.append(tuple(row))
    return ScoreMatrix(pair_ids=pair_ids, model_ids=model_ids, scores=tuple(rows))


def ensemble(matrix: ScoreMatrix) -> list[int]:
    """Mean score per pair, rounded half-up to a 0/1 prediction."""
    out = []
    for row in matrix.scores:
        mean = sum(row) / len(row)
        out.append(1 if mean >= 0.5 else 0)
    return out


def accuracy(pred: list[int], truth: list[int]) -> float:
    """Proportion of positions where the two label lists agree."""
    if len(pred) != len(truth):
        raise ValidationError(f"length mismatch: {len(pred)} vs {len(truth)}")
    if not pred:
        raise ValidationError("cannot score empty submissions")
    return sum(p == t for p, t in zip(pred, truth)) / len(pred)


def parse_submission(text: str, expected_count: int | None = None) -> list[int]:
    """Strict parse: one token per line, each 0 or 1, no blank lines."""
    if text and not text.endswith("\n"):
        text = text + "\n"
    lines = text.split("\n")[:-1]
    values = []
    for lineno, line in enumerate(lines, 1):
        token = line.strip()
        if token != line:
            raise FormatError(f"line {lineno}: stray whitespace")
        if token not in ("0", "1"):
            raise FormatError(f"line {lineno}: expected 0 or 1, got {line!r}")
        values.append(int(token))
    if expected_count is not None and len(values) != expected_count:
        raise FormatError(f"expected {expected_count} lines, got {len(values)}")
    if not values:
        raise FormatError("empty submission")
    return values


def emit_submission(values: list[int]) -> str:
    for v in values:
        if v not in (0, 1):
            raise ValidationError(f"submission values must be 0 or 1, got {v!r}")
    if not values:
        raise ValidationError("empty submission")
    return "\n".join(str(v) for v in values) + "\n"


def binary_cross_entropy(scores: list[float], labels: list[int]) -> float:
    if len(scores) != len(labels) or not scores:
        raise ValidationError("scores and labels must be equal-length and non-empty")
    total = 0.0
    for s, y in zip(scores, labels):
        s = min(max(s, _BCE_EPS), 1.0 - _BCE_EPS)
        total += -(y * math.log(s) + (1 - y) * math.log(1.0 - s))
    return total / len(scores)


def report_validation(matrix: ScoreMatrix, labels_by_pair: dict[int, int]) -> list[tuple[str, float, float]]:
    """Per-model (id, accuracy, BCE loss) over the labelled pairs given.

    Pairs are the matrix rows; labels_by_pair must cover all of them
    (callers pass the split=valid subset of a manifest).
    """
    missing = [pid for pid in matrix.pair_ids if pid not in labels_by_pair]
    if missing:
        raise ValidationError(f"labels missing for pairs {missing[:5]}")
    labels = [labels_by_pair[pid] for pid in matrix.pair_ids]
    rows = []
    for model_id in matrix.model_ids:
        scores = matrix.column(model_id)
        preds = [1 if s >= 0.5 else 0 for s in scores]
        rows.append(
            (model_id, accuracy(preds, labels), binary_cross_entropy(scores, labels))
        )
    return rows
