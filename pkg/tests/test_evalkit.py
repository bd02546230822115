import math

import pytest

from privmatch import evalkit
from privmatch.errors import FormatError, ValidationError
from privmatch.evalkit import ScoreMatrix, Weights


def test_weights_validation():
    Weights(0.1, 0.3, 0.6)
    Weights(1.0, 0.0, 0.0)
    with pytest.raises(ValidationError):
        Weights(0.5, 0.5, 0.5)
    with pytest.raises(ValidationError):
        Weights(-0.2, 0.6, 0.6)


def test_weighted_accuracy_unit_vectors():
    assert evalkit.weighted_accuracy(1, 0, 0) == pytest.approx(0.1, abs=1e-12)
    assert evalkit.weighted_accuracy(0, 1, 0) == pytest.approx(0.3, abs=1e-12)
    assert evalkit.weighted_accuracy(0, 0, 1) == pytest.approx(0.6, abs=1e-12)
    assert evalkit.weighted_accuracy(1, 1, 1) == pytest.approx(1.0, abs=1e-12)


def test_weighted_accuracy_reported_pattern():
    # best per-subtask validation accuracies, weighted: 0.1*0.999 + 0.3*0.9595 + 0.6*0.5246
    value = evalkit.weighted_accuracy(0.999, 0.9595, 0.5246)
    assert value == pytest.approx(0.70251, abs=1e-9)


def test_weighted_accuracy_monotone_and_diagonal():
    base = evalkit.weighted_accuracy(0.5, 0.5, 0.5)
    assert base == pytest.approx(0.5)
    assert evalkit.weighted_accuracy(0.6, 0.5, 0.5) > base
    assert evalkit.weighted_accuracy(0.5, 0.6, 0.5) > base
    assert evalkit.weighted_accuracy(0.5, 0.5, 0.6) > base
    with pytest.raises(ValidationError):
        evalkit.weighted_accuracy(1.2, 0, 0)


def test_ensemble_single_model_rounding():
    matrix = ScoreMatrix(pair_ids=(0, 1), model_ids=("m",), scores=((0.9,), (0.2,)))
    assert evalkit.ensemble(matrix) == [1, 0]


def test_ensemble_mean_below_half():
    matrix = ScoreMatrix(pair_ids=(0,), model_ids=("a", "b"), scores=((0.6, 0.2),))
    assert evalkit.ensemble(matrix) == [0]


def test_ensemble_tie_rounds_up():
    matrix = ScoreMatrix(pair_ids=(0,), model_ids=("a", "b"), scores=((0.5, 0.5),))
    assert evalkit.ensemble(matrix) == [1]


def test_ensemble_column_order_invariance():
    rows_ab = ((0.1, 0.9), (0.8, 0.3), (0.5, 0.5))
    rows_ba = tuple(tuple(reversed(r)) for r in rows_ab)
    a = ScoreMatrix(pair_ids=(0, 1, 2), model_ids=("a", "b"), scores=rows_ab)
    b = ScoreMatrix(pair_ids=(0, 1, 2), model_ids=("b", "a"), scores=rows_ba)
    assert evalkit.ensemble(a) == evalkit.ensemble(b)


def test_score_matrix_validation():
    with pytest.raises(ValidationError):
        ScoreMatrix(pair_ids=(0,), model_ids=(), scores=((),))
    with pytest.raises(ValidationError):
        ScoreMatrix(pair_ids=(0,), model_ids=("m",), scores=((1.5,),))


def test_accuracy_examples():
    assert evalkit.accuracy([1, 0, 1], [1, 0, 1]) == 1.0
    assert evalkit.accuracy([1, 0, 1], [0, 1, 0]) == 0.0
    assert evalkit.accuracy([1, 1, 0, 0], [1, 0, 0, 1]) == 0.5
    with pytest.raises(ValidationError):
        evalkit.accuracy([1], [1, 0])


def test_parse_submission():
    assert evalkit.parse_submission("1\n0\n1\n") == [1, 0, 1]
    assert evalkit.parse_submission("1\n0") == [1, 0]  # missing final newline tolerated
    with pytest.raises(FormatError):
        evalkit.parse_submission("2\n")
    with pytest.raises(FormatError):
        evalkit.parse_submission("1\n\n0\n")
    with pytest.raises(FormatError):
        evalkit.parse_submission("1 0\n")
    with pytest.raises(FormatError):
        evalkit.parse_submission("")
    with pytest.raises(FormatError):
        evalkit.parse_submission("1\n0\n", expected_count=3)
    assert evalkit.parse_submission("1\n0\n", expected_count=2) == [1, 0]


def test_emit_parse_roundtrip():
    values = [1, 0, 1, 1, 0]
    text = evalkit.emit_submission(values)
    assert text == "1\n0\n1\n1\n0\n"
    assert evalkit.parse_submission(text) == values
    with pytest.raises(ValidationError):
        evalkit.emit_submission([1, 2])


def test_score_csv_roundtrip(tmp_path):
    entries = {(0, "m1"): 0.25, (1, "m1"): 0.875, (0, "m2"): 1.0, (1, "m2"): 0.0}
    path = tmp_path / "scores.csv"
    evalkit.write_score_csv(path, entries)
    assert evalkit.read_score_csv(path) == entries
    matrix = evalkit.score_matrix_from_files([path])
    assert matrix.pair_ids == (0, 1)
    assert matrix.model_ids == ("m1", "m2")

    bad = tmp_path / "bad.csv"
    bad.write_text("0,m1\n")
    with pytest.raises(FormatError):
        evalkit.read_score_csv(bad)


def test_score_matrix_missing_entry(tmp_path):
    path = tmp_path / "scores.csv"
    path.write_text("pair_id,model_id,score\n0,m1,0.5\n1,m2,0.5\n")
    with pytest.raises(ValidationError):
        evalkit.score_matrix_from_files([path])


def test_report_validation_perfect_and_flipped():
    labels = {0: 1, 1: 0, 2: 1, 3: 0}
    perfect = ScoreMatrix(
        pair_ids=(0, 1, 2, 3),
        model_ids=("good", "bad"),
        scores=((1.0, 0.0), (0.0, 1.0), (1.0, 0.0), (0.0, 1.0)),
    )
    rows = evalkit.report_validation(perfect, labels)
    by_model = {name: (acc, loss) for name, acc, loss in rows}
    assert by_model["good"][0] == 1.0
    assert by_model["good"][1] < 1e-9
    assert by_model["bad"][0] == 0.0


def test_report_validation_constant_half_gives_ln2():
    labels = {i: i % 2 for i in range(10)}
    matrix = ScoreMatrix(
        pair_ids=tuple(range(10)),
        model_ids=("coin",),
        scores=tuple((0.5,) for _ in range(10)),
    )
    ((_, acc, loss),) = evalkit.report_validation(matrix, labels)
    assert acc == 0.5  # balanced labels, constant prediction
    assert loss == pytest.approx(math.log(2.0), abs=1e-6)


def test_report_validation_requires_labels():
    matrix = ScoreMatrix(pair_ids=(7,), model_ids=("m",), scores=((0.5,),))
    with pytest.raises(ValidationError):
        evalkit.report_validation(matrix, {1: 0})
