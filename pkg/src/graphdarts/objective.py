"""Loss terms: data fit, expected complexity and the fair-mode zero-one term."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .autodiff import Tape, logistic
from .errors import ConfigurationError, UsageError
from .graph import Genotype, SuperGraph, build_relaxed, forward_genotype, mixture_weights
from .ops import OP_KINDS

COMPLEXITIES = np.array([k.complexity for k in OP_KINDS], dtype=float)
ZERO_ONE_VARIANTS = ("as-printed", "magnitude")
W01 = 1.0


@dataclass
class LossBreakdown:
    mse: float
    complexity: float
    zero_one: float
    total: float
    gamma: float = 0.0
    w01: float = W01

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: float(d[k]) for k in ("mse", "complexity", "zero_one", "total", "gamma", "w01")})


def mse(predictions, targets) -> float:
    p = np.asarray(predictions, dtype=float)
    t = np.asarray(targets, dtype=float)
    if p.shape != t.shape:
        raise UsageError(f"length mismatch: {p.shape} vs {t.shape}")
    if p.size == 0:
        raise UsageError("mse of empty arrays")
    return float(np.mean((p - t) ** 2))


def complexity_loss(graph, gamma: float) -> float:
    """gamma times the expected (relaxed) or exact (genotype) complexity."""
    if gamma < 0:
        raise UsageError("gamma must be >= 0")
    if isinstance(graph, Genotype):
        return float(gamma * graph.complexity())
    total = 0.0
    for row in graph.alpha_matrix():
        total += float(mixture_weights(row, graph.mode) @ COMPLEXITIES)
    return float(gamma * total)


def zero_one_loss(alpha, w01: float = W01, variant: str = "as-printed") -> float:
    a = np.ravel(np.asarray(alpha, dtype=float))
    if a.size == 0:
        raise UsageError("zero-one loss needs at least one architecture weight")
    dev = logistic(a) - 0.5
    if variant == "magnitude":
        dev = np.abs(dev)
    elif variant != "as-printed":
        raise ConfigurationError(f"unknown zero-one variant {variant!r}")
    return float(-w01 * dev.mean())


def split_inputs(input_names, X) -> dict:
    X = np.asarray(X, dtype=float)
    return {name: X[:, i] for i, name in enumerate(input_names)}


def _mse_node(tape: Tape, outputs, Y) -> int:
    Y = np.asarray(Y, dtype=float).reshape(-1, len(outputs))
    sq = []
    for j, out in enumerate(outputs):
        diff = tape.add(out, tape.constant(-Y[:, j]))
        sq.append(tape.mean(tape.square(diff)))
    # mean over outputs as well as rows
    node = tape.sum(sq)
    if len(sq) > 1:
        node = tape.mul(node, tape.constant(1.0 / len(sq)))
    return node


def build_loss(tape: Tape, graph, X, Y, gamma: float = 0.0, w01: float = W01,
               zero_one_variant: str = "as-printed", include_zero_one=None) -> dict:
    """Add the total-loss expression for ``graph`` on (X, Y) to ``tape``.

    Returns the node ids of each component under keys mse, complexity,
    zero_one (None when absent) and total. ``tape.params`` must hold the
    graph's parameters; ``tape.inputs`` is filled from X.
    """
    if gamma < 0:
        raise UsageError("gamma must be >= 0")
    tape.inputs = split_inputs(graph.input_names, X)
    if isinstance(graph, Genotype):
        outputs = forward_genotype(graph, tape)
        mse_node = _mse_node(tape, outputs, Y)
        cx = tape.constant(gamma * graph.complexity())
        return {"mse": mse_node, "complexity": cx, "zero_one": None, "total": tape.add(mse_node, cx)}

    outputs, weights = build_relaxed(graph, tape)
    mse_node = _mse_node(tape, outputs, Y)
    terms = []
    for w in weights:
        for wn, c in zip(w, COMPLEXITIES):
            if c:
                terms.append(tape.mul(wn, tape.constant(c)))
    cx = tape.mul(tape.sum(terms), tape.constant(gamma))
    parts = [mse_node, cx]
    z = None
    if include_zero_one is None:
        include_zero_one = graph.mode == "fair"
    if include_zero_one:
        devs = []
        for row in graph.alpha_ids:
            for pid in row:
                s = tape.logistic(tape.param(pid))
                d = tape.add(s, tape.constant(-0.5))
                if zero_one_variant == "magnitude":
                    # |d| = relu(d) + relu(-d)
                    d = tape.add(tape.max0(d), tape.max0(tape.neg(d)))
                elif zero_one_variant != "as-printed":
                    raise ConfigurationError(f"unknown zero-one variant {zero_one_variant!r}")
                devs.append(d)
        z = tape.mul(tape.sum(devs), tape.constant(-w01 / len(devs)))
        parts.append(z)
    return {"mse": mse_node, "complexity": cx, "zero_one": z, "total": tape.sum(parts)}


def breakdown(tape: Tape, nodes: dict, gamma: float, w01: float = W01) -> LossBreakdown:
    def val(key):
        return 0.0 if nodes.get(key) is None else float(tape.value(nodes[key]))

    return LossBreakdown(val("mse"), val("complexity"), val("zero_one"), val("total"), float(gamma), float(w01))


def total_loss(graph, X, Y, gamma: float = 0.0, w01: float = W01,
               zero_one_variant: str = "as-printed", with_grads: bool = False):
    """Loss breakdown on one split; with ``with_grads`` also the parameter gradients."""
    params = graph.params if isinstance(graph, SuperGraph) else graph.to_store()
    tape = Tape(params=params)
    nodes = build_loss(tape, graph, X, Y, gamma, w01, zero_one_variant)
    lb = breakdown(tape, nodes, gamma, w01)
    if with_grads:
        return lb, tape.backward(nodes["total"])
    return lb
