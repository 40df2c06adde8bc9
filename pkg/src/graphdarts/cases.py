"""Synthetic data for the three benchmark models, splits and curve emitters."""

from __future__ import annotations

import csv
import hashlib
import io
import itertools
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .autodiff import logistic
from .errors import ConfigurationError, UsageError

SPLITS = ("train", "val", "test")


@dataclass
class Dataset:
    name: str
    iv_names: list[str]
    dv_names: list[str]
    X: np.ndarray
    Y: np.ndarray
    split_assignment: np.ndarray | None = None
    row_id: np.ndarray = field(default=None)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.Y = np.asarray(self.Y, dtype=float).reshape(len(self.X), -1)
        if self.row_id is None:
            self.row_id = np.arange(len(self.X))

    def __len__(self):
        return len(self.X)

    def subset(self, split: str):
        if self.split_assignment is None:
            raise UsageError("dataset has not been split")
        mask = self.split_assignment == split
        return self.X[mask], self.Y[mask]

    def split_sizes(self) -> dict:
        return {s: int(np.sum(self.split_assignment == s)) for s in SPLITS}

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow([*self.iv_names, *self.dv_names, "split", "row_id"])
        split = self.split_assignment if self.split_assignment is not None else [""] * len(self)
        for x, y, s, rid in zip(self.X, self.Y, split, self.row_id):
            writer.writerow([*map(repr, map(float, x)), *map(repr, map(float, y)), s, int(rid)])
        return buf.getvalue()

    def checksum(self) -> str:
        return hashlib.sha256(self.to_csv().encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class CaseSpec:
    id: str
    iv_names: tuple
    dv_names: tuple
    output_activation: str
    ground_truth: Callable[[np.ndarray], np.ndarray]
    generator: Callable[[], Dataset]

    @property
    def S(self):
        return len(self.iv_names)

    @property
    def D(self):
        return len(self.dv_names)


# ground-truth models on (n, S) arrays

WEBER_C = 1.0
LEARNING_RATE = 5.0
LCA_DECAY, LCA_EXCITE, LCA_INHIBIT = 0.4, 0.2, 0.2
LCA_DT = 1.0


def weber_truth(X):
    X = np.atleast_2d(X)
    i0, i1 = X[:, 0], X[:, 1]
    return logistic((i1 - i0) - WEBER_C * i0)


def exp_learning_truth(X):
    X = np.atleast_2d(X)
    t, p0, pinf = X[:, 0], X[:, 1], X[:, 2]
    return pinf - (pinf - p0) * np.exp(-LEARNING_RATE * t)


def lca_truth(X, dt=LCA_DT):
    X = np.atleast_2d(X)
    f = np.maximum(X, 0.0)
    return (-LCA_DECAY * X[:, 0] + LCA_EXCITE * f[:, 0] - LCA_INHIBIT * (f[:, 1] + f[:, 2])) * dt


def gen_weber() -> Dataset:
    grid = np.linspace(0.0, 5.0, 20)
    X = np.array([(i0, i1) for i0 in grid for i1 in grid if i0 <= i1])
    return Dataset("weber", ["I0", "I1"], ["P(detected)"], X, weber_truth(X))


def _crossing(*axes):
    return np.array(list(itertools.product(*axes)))


def gen_exp_learning() -> Dataset:
    X = _crossing(np.linspace(0, 1, 8), np.linspace(0, 0.4, 8), np.linspace(0.5, 1, 8))
    return Dataset("exp_learning", ["t", "P0", "Pinf"], ["Pn"], X, exp_learning_truth(X))


def gen_lca() -> Dataset:
    axis = np.linspace(-1, 1, 8)
    X = _crossing(axis, axis, axis)
    return Dataset("lca", ["x1", "x2", "x3"], ["dx1"], X, lca_truth(X))


CASES = {
    "weber": CaseSpec("weber", ("I0", "I1"), ("P(detected)",), "logistic", weber_truth, gen_weber),
    "exp_learning": CaseSpec("exp_learning", ("t", "P0", "Pinf"), ("Pn",), "identity",
                             exp_learning_truth, gen_exp_learning),
    "lca": CaseSpec("lca", ("x1", "x2", "x3"), ("dx1",), "identity", lca_truth, gen_lca),
}


def get_case(case_id: str) -> CaseSpec:
    try:
        return CASES[case_id]
    except KeyError:
        raise ConfigurationError(
            f"unknown case {case_id!r}; valid ids: {', '.join(CASES)}"
        ) from None


def split_sizes(n: int) -> tuple[int, int, int]:
    n_train, n_val = int(np.floor(0.4 * n)), int(np.floor(0.1 * n))
    return n_train, n_val, n - n_train - n_val


def split(dataset: Dataset, rng: np.random.Generator) -> Dataset:
    """Seeded shuffle, then contiguous 40/10/50 train/val/test assignment."""
    n = len(dataset)
    if n < 10:
        raise UsageError("need at least 10 rows to split")
    n_train, n_val, _ = split_sizes(n)
    order = rng.permutation(n)
    assignment = np.empty(n, dtype=object)
    assignment[order[:n_train]] = "train"
    assignment[order[n_train:n_train + n_val]] = "val"
    assignment[order[n_train + n_val:]] = "test"
    dataset.split_assignment = assignment.astype(str)
    return dataset


def generate(case_id: str, rng: np.random.Generator | None = None) -> Dataset:
    ds = get_case(case_id).generator()
    return split(ds, rng) if rng is not None else ds


# figure-style emitters; a predictor maps an (n, S) array to n outputs

def emit_psychometric(predictor, baselines, source: str, points: int = 100, upper: float = 5.0):
    rows = []
    for i0 in baselines:
        i1 = np.linspace(i0, upper, points)
        X = np.column_stack([np.full(points, i0), i1])
        for x1, p in zip(i1, np.ravel(predictor(X))):
            rows.append((float(i0), float(x1), float(p), source))
    return rows


def emit_learning_curves(predictor, conditions, source: str, points: int = 100):
    rows = []
    t = np.linspace(0.0, 1.0, points)
    for p0, pinf in conditions:
        X = np.column_stack([t, np.full(points, p0), np.full(points, pinf)])
        for tt, pn in zip(t, np.ravel(predictor(X))):
            rows.append((float(tt), float(p0), float(pinf), float(pn), source))
    return rows


def simulate_lca(predictor, x0, steps: int = 100, dt: float = 0.1, source: str = "model",
                 limit: float = 1e6):
    """Euler trajectory; each unit's rate is ``predictor`` with that unit in the x1 slot.

    Returns ``(rows, diverged)``; on divergence the trajectory is truncated.
    """
    if steps < 1 or dt <= 0:
        raise UsageError("steps must be >= 1 and dt > 0")
    x = np.asarray(x0, dtype=float).copy()
    rows = [(0, *map(float, x), source)]
    perms = [(0, 1, 2), (1, 0, 2), (2, 0, 1)]
    for step in range(1, steps + 1):
        dx = np.ravel(predictor(np.array([x[list(p)] for p in perms])))
        x = x + dt * dx
        if not np.all(np.isfinite(x)) or np.any(np.abs(x) > limit):
            return rows, True
        rows.append((step, *map(float, x), source))
    return rows, False


PSYCHOMETRIC_COLUMNS = ("I0", "I1", "P", "source")
LEARNING_COLUMNS = ("t", "P0", "Pinf", "Pn", "source")
LCA_COLUMNS = ("step", "x1", "x2", "x3", "source")
