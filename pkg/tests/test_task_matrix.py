import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fscil_gacc import AccuracyMatrix, TaskLayout, emit_matrix, parse_matrix, read_matrix
from fscil_gacc import errors


@st.composite
def matrices(draw):
    n = draw(st.integers(1, 8))
    layout = TaskLayout(n, draw(st.integers(1, 100)), draw(st.integers(1, 20)))
    acc = st.floats(0, 100, allow_nan=False)
    rows = [[draw(acc) for _ in range(i)] for i in range(1, n + 1)]
    return AccuracyMatrix(layout, rows)


@settings(max_examples=200, deadline=None)
@given(matrices(), st.sampled_from(["csv", "json"]))
def test_round_trip_exact(m, fmt):
    assert parse_matrix(emit_matrix(m, fmt), fmt) == m


def test_layout_helpers():
    lay = TaskLayout(9, 60, 5)
    assert lay.ratio == 12
    assert lay.classes_seen(1) == 60 and lay.classes_seen(9) == 100
    assert lay.total_classes == 100
    assert lay.task_of_class(59) == 1 and lay.task_of_class(60) == 2 and lay.task_of_class(99) == 9
    assert list(lay.task_classes(3)) == list(range(65, 70))
    # shots does not take part in equality
    assert TaskLayout(9, 60, 5, shots=1) == lay


def test_tri_has_nan_above_diagonal():
    m = AccuracyMatrix(TaskLayout(3, 6, 2), [[10], [20, 30], [40, 50, 60]])
    t = m.tri()
    assert np.isnan(t[0, 1]) and np.isnan(t[1, 2])
    assert t[2, 1] == 50 and m.entry(3, 3) == 60


def test_csv_comments_and_crlf():
    text = "# method x\r\nlayout,2,60,5\r\n1,85\r\n2,80,10\r\n"
    m = parse_matrix(text)
    assert m.rows == ((85.0,), (80.0, 10.0))


def test_read_matrix_uses_extension(tmp_path):
    m = AccuracyMatrix(TaskLayout(2, 60, 5), [[85], [80, 10]])
    p = tmp_path / "m.json"
    p.write_text(emit_matrix(m, "json"))
    assert read_matrix(p) == m


@pytest.mark.parametrize("text, exc", [
    ("", errors.MalformedHeader),
    ("layoot,2,60,5\n1,85\n2,1,2\n", errors.MalformedHeader),
    ("layout,2,60\n1,85\n2,1,2\n", errors.MalformedHeader),
    ("layout,2,60,x\n1,85\n2,1,2\n", errors.MalformedHeader),
    ("layout,2,60,5\n1,85\n", errors.RowLengthMismatch),
    ("layout,2,60,5\n1,85\n2,1\n", errors.RowLengthMismatch),
    ("layout,2,60,5\n1,85,3\n2,1,2\n", errors.RowLengthMismatch),
    ("layout,2,60,5\n1,85\n3,1,2\n", errors.MalformedRow),
    ("layout,2,60,5\n1,abc\n2,1,2\n", errors.MalformedRow),
    ("layout,2,60,5\n1,101\n2,1,2\n", errors.ValueOutOfRange),
    ("layout,2,60,5\n1,-0.5\n2,1,2\n", errors.ValueOutOfRange),
    ("layout,2,60,5\n1,nan\n2,1,2\n", errors.ValueOutOfRange),
    ("layout,0,60,5\n", errors.NonPositiveLayout),
    ("layout,2,60,0\n1,85\n2,1,2\n", errors.NonPositiveLayout),
])
def test_csv_errors(text, exc):
    with pytest.raises(exc):
        parse_matrix(text)


def test_json_errors():
    with pytest.raises(errors.MalformedHeader):
        parse_matrix("{not json", "json")
    with pytest.raises(errors.MalformedHeader):
        parse_matrix(json.dumps({"rows": []}), "json")
    with pytest.raises(errors.VariableNovelSize):
        parse_matrix(json.dumps({"layout": {"n_tasks": 3, "base_classes": 60, "novel_classes": [5, 10]},
                                 "rows": [[1], [1, 2], [1, 2, 3]]}), "json")
    with pytest.raises(errors.MalformedRow):
        parse_matrix(json.dumps({"layout": {"n_tasks": 1, "base_classes": 6, "novel_classes": 1},
                                 "rows": [["85"]]}), "json")
    # a uniform novel-size list is accepted
    m = parse_matrix(json.dumps({"layout": {"n_tasks": 2, "base_classes": 60, "novel_classes": [5]},
                                 "rows": [[85], [80, 10]]}), "json")
    assert m.layout.novel_classes == 5


def test_all_errors_are_value_errors():
    with pytest.raises(ValueError):
        parse_matrix("layout,2,60,5\n1,101\n2,1,2\n")


def test_matrix_is_immutable():
    m = AccuracyMatrix(TaskLayout(1, 6, 2), [[10]])
    with pytest.raises(AttributeError):
        m.rows = ((20.0,),)
