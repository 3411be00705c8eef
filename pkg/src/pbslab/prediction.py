"""Linear workload model: expected minimum moves from total item distance, escorts and grid size.

    moves ~ a0 + a1 * sum_item_manhattan + a2 * ln(e) + a3 * n
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np


class RankDeficient(ValueError):
    pass


@dataclass(frozen=True)
class RegressionSample:
    sum_item_manhattan: int
    e: int
    n: int
    moves: float

    def __post_init__(self):
        if self.e < 1:
            raise ValueError("e must be at least 1")
        if self.moves < 0:
            raise ValueError("moves must be non-negative")


@dataclass(frozen=True)
class FitResult:
    alpha0: float
    alpha1: float
    alpha2: float
    alpha3: float
    r_squared: float = float("nan")

    @property
    def coef(self) -> np.ndarray:
        return np.array([self.alpha0, self.alpha1, self.alpha2, self.alpha3])

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> "FitResult":
        return cls(**{k: float(v) for k, v in obj.items()})

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1) + "\n")

    @classmethod
    def load(cls, path) -> "FitResult":
        return cls.from_json(json.loads(Path(path).read_text()))


# reference coefficients, fitted on learned-policy objectives
REFERENCE_FIT = FitResult(-9.517, 2.351, -4.142, 3.445, 0.916)


def design_matrix(samples: Sequence[RegressionSample]) -> np.ndarray:
    return np.array([[1.0, s.sum_item_manhattan, math.log(s.e), s.n] for s in samples])


def ols_fit(samples: Sequence[RegressionSample]) -> FitResult:
    """Least squares through the normal equations ``(X'X) a = X'y``."""
    if len(samples) < 5:
        raise ValueError("need at least five samples")
    X = design_matrix(samples)
    yv = np.array([s.moves for s in samples], dtype=float)
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise RankDeficient("feature columns are collinear")
    coef = np.linalg.solve(X.T @ X, X.T @ yv)
    resid = yv - X @ coef
    ss_tot = float(np.sum((yv - yv.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / ss_tot if ss_tot > 0 else 1.0
    return FitResult(*map(float, coef), r_squared=r2)


def predict(fit: FitResult, sum_item_manhattan: float, e: int, n: int) -> float:
    if e < 1:
        raise ValueError("e must be at least 1")
    return fit.alpha0 + fit.alpha1 * sum_item_manhattan + fit.alpha2 * math.log(e) + fit.alpha3 * n


def samples_from_instances(instances: Iterable, objectives: Iterable[int]) -> list[RegressionSample]:
    out = []
    for inst, obj in zip(instances, objectives):
        total = sum(abs(a[0] - b[0]) + abs(a[1] - b[1]) for a, b in zip(inst.items, inst.io))
        out.append(RegressionSample(total, inst.e, max(inst.m, inst.n), obj))
    return out


SAMPLE_FIELDS = ("sum_item_manhattan", "e", "n", "moves")


def write_samples(samples: Sequence[RegressionSample], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(SAMPLE_FIELDS)
        for s in samples:
            w.writerow([s.sum_item_manhattan, s.e, s.n, s.moves])


def read_samples(path) -> list[RegressionSample]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    missing = set(SAMPLE_FIELDS) - set(rows[0] if rows else SAMPLE_FIELDS)
    if missing:
        raise ValueError(f"samples CSV lacks columns {sorted(missing)}")
    return [RegressionSample(int(r["sum_item_manhattan"]), int(r["e"]), int(r["n"]), float(r["moves"]))
            for r in rows]
