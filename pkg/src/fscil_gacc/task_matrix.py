"""Task layouts and lower-triangular accuracy matrices.

CSV format::

    # comments are ignored
    layout,<n_tasks>,<base_classes>,<novel_classes>
    1,<A(1,1)>
    2,<A(2,1)>,<A(2,2)>
    ...

JSON format::

    {"layout": {"n_tasks": 2, "base_classes": 60, "novel_classes": 5},
     "rows": [[85.0], [85.0, 0.0]]}

Accuracies are percentages in [0, 100]. Row ``i`` holds exactly ``i`` values.
"""
import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    MalformedHeader,
    MalformedRow,
    NonPositiveLayout,
    RowLengthMismatch,
    ValueOutOfRange,
    VariableNovelSize,
)

FORMATS = ("csv", "json")


def _positive_int(value, name):
    if isinstance(value, bool):
        raise NonPositiveLayout(f"{name} must be a positive integer, got {value!r}")
    if isinstance(value, float) and value.is_integer():
        value = int(value)
    if not isinstance(value, (int, np.integer)) or value < 1:
        raise NonPositiveLayout(f"{name} must be a positive integer, got {value!r}")
    return int(value)


@dataclass(frozen=True)
class TaskLayout:
    """Session structure of an FSCIL benchmark.

    ``shots`` is only used by the simulator and does not take part in equality.
    """

    n_tasks: int
    base_classes: int
    novel_classes: int
    shots: int = field(default=5, compare=False)

    def __post_init__(self):
        for name in ("n_tasks", "base_classes", "novel_classes", "shots"):
            object.__setattr__(self, name, _positive_int(getattr(self, name), name))

    @property
    def ratio(self):
        """|Y_1| / |Y_novel|."""
        return self.base_classes / self.novel_classes

    def classes_seen(self, session):
        return self.base_classes + (session - 1) * self.novel_classes

    @property
    def total_classes(self):
        return self.classes_seen(self.n_tasks)

    def task_of_class(self, cls):
        """1-based task index that introduces class id ``cls`` (0-based ids)."""
        if cls < self.base_classes:
            return 1
        return 2 + (cls - self.base_classes) // self.novel_classes

    def task_classes(self, task):
        """Class ids (0-based) introduced by ``task``."""
        if task == 1:
            return range(self.base_classes)
        start = self.base_classes + (task - 2) * self.novel_classes
        return range(start, start + self.novel_classes)

    def to_dict(self):
        return {
            "n_tasks": self.n_tasks,
            "base_classes": self.base_classes,
            "novel_classes": self.novel_classes,
        }


@dataclass(frozen=True)
class AccuracyMatrix:
    """A(i, j): accuracy (percent) of the model after session i on task j, j <= i.

    ``rows[i - 1]`` holds ``A(i, 1) .. A(i, i)``. Instances are validated on
    construction and immutable afterwards.
    """

    layout: TaskLayout
    rows: tuple

    def __post_init__(self):
        if not isinstance(self.layout, TaskLayout):
            raise NonPositiveLayout("layout must be a TaskLayout")
        rows = tuple(tuple(float(v) for v in row) for row in self.rows)
        n = self.layout.n_tasks
        if len(rows) != n:
            raise RowLengthMismatch(f"expected {n} rows, got {len(rows)}")
        for i, row in enumerate(rows, start=1):
            if len(row) != i:
                raise RowLengthMismatch(f"row {i} must have {i} values, got {len(row)}")
            for j, v in enumerate(row, start=1):
                if not (0.0 <= v <= 100.0):
                    raise ValueOutOfRange(f"A({i},{j}) = {v!r} is outside [0, 100]")
        object.__setattr__(self, "rows", rows)

    @property
    def n_tasks(self):
        return self.layout.n_tasks

    def entry(self, i, j):
        """A(i, j) with 1-based indices."""
        return self.rows[i - 1][j - 1]

    def tri(self):
        """n x n float array; entries above the diagonal are NaN."""
        n = self.n_tasks
        out = np.full((n, n), np.nan)
        for i, row in enumerate(self.rows):
            out[i, : i + 1] = row
        return out

    @classmethod
    def from_array(cls, layout, array):
        arr = np.asarray(array, dtype=np.float64)
        return cls(layout, tuple(tuple(arr[i, : i + 1]) for i in range(layout.n_tasks)))


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

def _to_float(token, where):
    try:
        value = float(token)
    except ValueError:
        raise MalformedRow(f"{where}: {token!r} is not a number") from None
    if not math.isfinite(value):
        raise ValueOutOfRange(f"{where}: non-finite value {token!r}")
    return value


def _parse_csv(text):
    lines = [ln.strip() for ln in text.replace("\r\n", "\n").replace("\r", "\n").split("\n")]
    lines = [ln for ln in lines if ln and not ln.startswith("#")]
    if not lines:
        raise MalformedHeader("empty input")
    header = next(csv.reader([lines[0]]))
    if len(header) != 4 or header[0].strip() != "layout":
        raise MalformedHeader(f"expected 'layout,<n_tasks>,<base>,<novel>', got {lines[0]!r}")
    try:
        dims = [int(t.strip()) for t in header[1:]]
    except ValueError:
        raise MalformedHeader(f"layout fields must be integers: {lines[0]!r}") from None
    layout = TaskLayout(*dims)
    body = lines[1:]
    if len(body) != layout.n_tasks:
        raise RowLengthMismatch(f"expected {layout.n_tasks} data rows, got {len(body)}")
    rows = []
    for i, (line, fields) in enumerate(zip(body, csv.reader(body)), start=1):
        try:
            idx = int(fields[0].strip())
        except ValueError:
            raise MalformedRow(f"row {i}: bad session index in {line!r}") from None
        if idx != i:
            raise MalformedRow(f"row {i}: session index {idx} out of order")
        values = [_to_float(t.strip(), f"row {i}") for t in fields[1:]]
        if len(values) != i:
            raise RowLengthMismatch(f"row {i} must have {i} values, got {len(values)}")
        rows.append(values)
    return AccuracyMatrix(layout, rows)


def _parse_json(text):
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedHeader(f"invalid JSON: {exc}") from None
    if not isinstance(obj, dict) or not isinstance(obj.get("layout"), dict) or "rows" not in obj:
        raise MalformedHeader("expected an object with 'layout' and 'rows'")
    lay = obj["layout"]
    try:
        n, base, novel = lay["n_tasks"], lay["base_classes"], lay["novel_classes"]
    except KeyError as exc:
        raise MalformedHeader(f"layout is missing {exc}") from None
    if isinstance(novel, list):
        if len(set(novel)) != 1:
            raise VariableNovelSize(f"novel tasks must share one class count, got {novel}")
        novel = novel[0]
    layout = TaskLayout(n, base, novel, lay.get("shots", 5))
    rows = obj["rows"]
    if not isinstance(rows, list) or not all(isinstance(r, list) for r in rows):
        raise MalformedRow("'rows' must be a list of lists")
    parsed = []
    for i, row in enumerate(rows, start=1):
        vals = []
        for v in row:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise MalformedRow(f"row {i}: {v!r} is not a number")
            vals.append(_to_float(v, f"row {i}"))
        parsed.append(vals)
    return AccuracyMatrix(layout, parsed)


def parse_matrix(text, format="csv"):
    """Parse and validate an accuracy matrix from CSV or JSON text."""
    if format == "csv":
        return _parse_csv(text)
    if format == "json":
        return _parse_json(text)
    raise ValueError(f"unknown format {format!r}; expected one of {FORMATS}")


def emit_matrix(m, format="csv"):
    """Serialize ``m``; ``parse_matrix(emit_matrix(m, f), f) == m`` exactly."""
    if format == "csv":
        buf = io.StringIO()
        lay = m.layout
        buf.write(f"layout,{lay.n_tasks},{lay.base_classes},{lay.novel_classes}\n")
        for i, row in enumerate(m.rows, start=1):
            buf.write(",".join([str(i)] + [repr(v) for v in row]) + "\n")
        return buf.getvalue()
    if format == "json":
        return json.dumps({"layout": m.layout.to_dict(), "rows": [list(r) for r in m.rows]}) + "\n"
    raise ValueError(f"unknown format {format!r}; expected one of {FORMATS}")


def read_matrix(path, format=None):
    """Read a matrix file; the format defaults to the file extension."""
    path = str(path)
    if format is None:
        format = "json" if path.lower().endswith(".json") else "csv"
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_matrix(fh.read(), format)
