"""Reverse-mode differentiation over scalar expression graphs.

Every tape node holds one scalar per dataset row (a 1-d array) or a single
scalar (parameters, constants, reductions), so a whole batch of rows is
evaluated with one tape. Gradients with respect to scalar parameters are the
sums of their per-row contributions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

import numpy as np

from .errors import ConfigurationError, NumericOverflowError, UsageError

# exp arguments above this are clamped in the forward pass
EXP_CLAMP = 20.0

ROLES = ("w", "alpha", "v")

# None means n-ary
ARITY = {
    "constant": 0,
    "input": 0,
    "param": 0,
    "add": 2,
    "sum": None,
    "mul": 2,
    "neg": 1,
    "exp": 1,
    "max0": 1,
    "logistic": 1,
    "reciprocal": 1,
    "mean": 1,
}


def logistic(x):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(x, dtype=float)))


@dataclass(slots=True)
class TapeNode:
    id: int
    kind: str
    parent_ids: tuple
    value: np.ndarray
    local_partials: tuple
    label: str | None = None


@dataclass
class Param:
    value: float
    role: str
    grad: float = 0.0
    state: dict = field(default_factory=dict)


class ParamStore:
    """Named scalar parameters, each tagged with a role (w, alpha or v)."""

    def __init__(self):
        self.entries: dict[str, Param] = {}

    def add(self, pid: str, value: float, role: str) -> str:
        if role not in ROLES:
            raise ConfigurationError(f"unknown parameter role {role!r}")
        if pid in self.entries:
            raise ConfigurationError(f"duplicate parameter id {pid!r}")
        self.entries[pid] = Param(float(value), role)
        return pid

    def __contains__(self, pid):
        return pid in self.entries

    def __getitem__(self, pid) -> Param:
        try:
            return self.entries[pid]
        except KeyError:
            raise ConfigurationError(f"unknown parameter {pid!r}") from None

    def __len__(self):
        return len(self.entries)

    def value(self, pid: str) -> float:
        return self[pid].value

    def set_value(self, pid: str, value: float):
        self[pid].value = float(value)

    def ids(self, roles: Iterable[str] | None = None) -> list[str]:
        if roles is None:
            return list(self.entries)
        roles = set(roles)
        return [pid for pid, p in self.entries.items() if p.role in roles]

    def values(self, roles=None) -> dict[str, float]:
        return {pid: self.entries[pid].value for pid in self.ids(roles)}

    def set_grads(self, grads: Mapping[str, float]):
        for pid, p in self.entries.items():
            p.grad = float(grads.get(pid, 0.0))

    def reset_state(self):
        for p in self.entries.values():
            p.state.clear()


class Tape:
    """A dynamically built expression DAG.

    Nodes are appended in evaluation order, so every parent id is smaller
    than its child id and the reversed node list is a valid backward order.
    """

    def __init__(self, inputs: Mapping | None = None, params: ParamStore | None = None):
        self.nodes: list[TapeNode] = []
        self.inputs = inputs if inputs is not None else {}
        self.params = params
        self.adjoints: list | None = None
        self.clamped = False
        self._param_nodes: dict[str, int] = {}
        self._input_nodes: dict[str, int] = {}

    def _push(self, kind, parents, value, partials, label=None) -> int:
        node_id = len(self.nodes)
        if not np.isfinite(value).all():
            raise NumericOverflowError(node_id, kind)
        self.nodes.append(TapeNode(node_id, kind, tuple(parents), value, tuple(partials), label))
        return node_id

    def value(self, node_id: int):
        return self.nodes[node_id].value

    # leaves

    def constant(self, value) -> int:
        return self._push("constant", (), np.asarray(value, dtype=float), ())

    def var(self, name: str) -> int:
        if name not in self._input_nodes:
            if name not in self.inputs:
                raise ConfigurationError(f"missing input variable {name!r}")
            value = np.asarray(self.inputs[name], dtype=float)
            self._input_nodes[name] = self._push("input", (), value, (), name)
        return self._input_nodes[name]

    def param(self, pid: str) -> int:
        if pid not in self._param_nodes:
            if self.params is None or pid not in self.params:
                raise ConfigurationError(f"missing parameter {pid!r}")
            value = np.asarray(self.params.value(pid), dtype=float)
            self._param_nodes[pid] = self._push("param", (), value, (), pid)
        return self._param_nodes[pid]

    # primitives

    def add(self, a: int, b: int) -> int:
        va, vb = self.nodes[a].value, self.nodes[b].value
        return self._push("add", (a, b), va + vb, (1.0, 1.0))

    def sum(self, ids: Iterable[int]) -> int:
        ids = tuple(ids)
        if not ids:
            return self.constant(0.0)
        if len(ids) == 1:
            return ids[0]
        total = self.nodes[ids[0]].value
        for i in ids[1:]:
            total = total + self.nodes[i].value
        return self._push("sum", ids, total, (1.0,) * len(ids))

    def mul(self, a: int, b: int) -> int:
        va, vb = self.nodes[a].value, self.nodes[b].value
        return self._push("mul", (a, b), va * vb, (vb, va))

    def neg(self, a: int) -> int:
        return self._push("neg", (a,), -self.nodes[a].value, (-1.0,))

    def sub(self, a: int, b: int) -> int:
        return self.add(a, self.neg(b))

    def exp(self, a: int) -> int:
        x = self.nodes[a].value
        over = x > EXP_CLAMP
        if np.any(over):
            self.clamped = True
        y = np.exp(np.minimum(x, EXP_CLAMP))
        return self._push("exp", (a,), y, (np.where(over, 0.0, y),))

    def max0(self, a: int) -> int:
        x = self.nodes[a].value
        # subgradient at exactly 0 is 0
        return self._push("max0", (a,), np.maximum(x, 0.0), ((x > 0).astype(float),))

    def logistic(self, a: int) -> int:
        s = logistic(self.nodes[a].value)
        return self._push("logistic", (a,), s, (s * (1.0 - s),))

    def reciprocal(self, a: int) -> int:
        x = self.nodes[a].value
        with np.errstate(divide="ignore"):
            y = 1.0 / x
        return self._push("reciprocal", (a,), y, (-(y * y),))

    def div(self, a: int, b: int) -> int:
        return self.mul(a, self.reciprocal(b))

    def mean(self, a: int) -> int:
        x = self.nodes[a].value
        n = max(np.size(x), 1)
        return self._push("mean", (a,), np.asarray(np.mean(x)), (1.0 / n,))

    def square(self, a: int) -> int:
        return self.mul(a, a)

    # reverse pass

    def backward(self, output_id: int) -> dict[str, float]:
        """Adjoints of every node with respect to ``output_id``.

        Returns the gradient for each parameter on the tape (0.0 where the
        parameter does not reach the output).
        """
        if not isinstance(output_id, (int, np.integer)) or not 0 <= output_id < len(self.nodes):
            raise UsageError(f"invalid output node id {output_id!r}")
        adj: list = [0.0] * len(self.nodes)
        adj[output_id] = np.ones_like(self.nodes[output_id].value)
        for node in reversed(self.nodes[: output_id + 1]):
            g = adj[node.id]
            if node.id != output_id and np.ndim(g) == 0 and g == 0.0:
                continue
            for pid, partial in zip(node.parent_ids, node.local_partials):
                contrib = g * partial
                if np.ndim(self.nodes[pid].value) == 0 and np.ndim(contrib) > 0:
                    contrib = contrib.sum()
                adj[pid] = adj[pid] + contrib
        self.adjoints = adj
        return {pid: float(np.sum(adj[nid])) for pid, nid in self._param_nodes.items()}


def evaluate(builder: Callable[[Tape], object], inputs: Mapping, params: ParamStore):
    """Run ``builder`` on a fresh tape; returns ``(tape, outputs)``."""
    tape = Tape(inputs, params)
    outputs = builder(tape)
    return tape, outputs


def backward(tape: Tape, output_id: int) -> dict[str, float]:
    return tape.backward(output_id)


def finite_diff(loss_fn: Callable[[ParamStore], float], params: ParamStore, pid: str, h: float = 1e-5) -> float:
    """Central difference of ``loss_fn`` in parameter ``pid``; restores the value."""
    if h <= 0:
        raise UsageError("finite-difference step must be positive")
    p = params[pid]
    orig = p.value
    try:
        p.value = orig + h
        up = float(loss_fn(params))
        p.value = orig - h
        down = float(loss_fn(params))
    finally:
        p.value = orig
    return (up - down) / (2.0 * h)
