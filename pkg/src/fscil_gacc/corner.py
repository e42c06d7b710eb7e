"""Analytic corner-case learners used as golden fixtures.

* ``lazy``: keeps base accuracy forever, learns nothing new.
* ``greedy``: only the current task is solved (100%), everything older is 0.
* ``greedy-nf``: like greedy, but novel tasks are never forgotten.
"""
from dataclasses import dataclass

from .errors import ValueOutOfRange
from .task_matrix import AccuracyMatrix, TaskLayout

CASES = ("lazy", "greedy", "greedy-nf")
_ALIASES = {"greedynf": "greedy-nf", "greedy_nf": "greedy-nf"}


def normalize_case(name):
    key = name.strip().lower()
    key = _ALIASES.get(key, key)
    if key not in CASES:
        raise ValueError(f"unknown corner case {name!r}; expected one of {CASES}")
    return key


@dataclass(frozen=True)
class CornerSpec:
    case: str
    base_accuracy: float = 85.0
    layout: TaskLayout = TaskLayout(9, 60, 5)

    def __post_init__(self):
        object.__setattr__(self, "case", normalize_case(self.case))
        if not 0.0 <= self.base_accuracy <= 100.0:
            raise ValueOutOfRange(f"base_accuracy {self.base_accuracy} outside [0, 100]")


def generate(spec):
    n = spec.layout.n_tasks
    rows = []
    for i in range(1, n + 1):
        row = [0.0] * i
        if spec.case == "lazy" or i == 1:
            row[0] = spec.base_accuracy
        elif spec.case == "greedy":
            row[i - 1] = 100.0
        else:
            row[1:] = [100.0] * (i - 1)
        rows.append(row)
    return AccuracyMatrix(spec.layout, rows)


def corner_matrix(case, base_accuracy=85.0, layout=None):
    return generate(CornerSpec(case, base_accuracy, layout or TaskLayout(9, 60, 5)))
