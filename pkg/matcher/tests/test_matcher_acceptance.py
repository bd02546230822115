"""Acceptance: the same small CNN separates scrambled pairs but not
encrypted ones.

Run with `pytest tests/test_acceptance.py -v -s` for the PASS/FAIL lines.
"""

from pairmatcher.sampleio import load_split
from pairmatcher.train import TrainSpec, predict, train


def report(name, ok, detail=""):
    suffix = f"  ({detail})" if detail else ""
    print(f"[{'PASS' if ok else 'FAIL'}] {name}{suffix}")
    assert ok, f"{name}{suffix}"


def test_criterion_scrambled_pairs_are_learnable(scramble_corpus):
    spec = TrainSpec(
        samples_dir=str(scramble_corpus / "samples"),
        subtask=1,
        approach="S12",
        architecture="tile-stat",
        epochs=10,
        seed=2022,
        model_id="scramble-1",
    )
    net, row = train(spec)
    report(
        "tile-scrambled corpus: validation accuracy >= 0.9 within 10 epochs",
        row.validation_accuracy >= 0.9,
        f"accuracy={row.validation_accuracy:.4f}, loss={row.validation_loss:.4f}",
    )

    train_samples = load_split(scramble_corpus / "samples", "train")
    scores = predict(net, train_samples)
    labels = {s.pair_id: s.label for s in train_samples}
    match_scores = [s for pid, s in scores.items() if labels[pid] == 1]
    other_scores = [s for pid, s in scores.items() if labels[pid] == 0]
    gap = sum(match_scores) / len(match_scores) - sum(other_scores) / len(other_scores)
    report(
        "fitted model separates training matches from non-matches by > 0.5",
        gap > 0.5,
        f"mean score gap={gap:.3f}",
    )


def test_criterion_encrypted_pairs_stay_at_chance(encrypted_corpus):
    spec = TrainSpec(
        samples_dir=str(encrypted_corpus / "samples"),
        subtask=3,
        approach="T2",
        architecture="tile-stat",
        epochs=10,
        seed=2022,
        model_id="encrypted-3",
    )
    _, row = train(spec)
    report(
        "encrypted corpus: validation accuracy stays within [0.45, 0.58]",
        0.45 <= row.validation_accuracy <= 0.58,
        f"accuracy={row.validation_accuracy:.4f}, loss={row.validation_loss:.4f}",
    )
