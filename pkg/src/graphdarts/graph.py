"""Relaxed search cell (SuperGraph) and discrete architectures (Genotype)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import ParamStore, Tape, logistic
from .errors import ConfigurationError
from .ops import (
    NUM_OPS,
    OP_KINDS,
    OpInstance,
    apply,
    apply_numeric,
    get_kind,
    init_params,
    make_instance,
    op_param_id,
)

MODES = ("regular", "fair")
ACTIVATIONS = ("identity", "logistic")


@dataclass(frozen=True)
class GraphShape:
    S: int
    K: int
    D: int = 1
    activation: str = "identity"

    def __post_init__(self):
        if min(self.S, self.K, self.D) < 1:
            raise ConfigurationError(f"S, K and D must all be >= 1, got {self.S}, {self.K}, {self.D}")
        if self.activation not in ACTIVATIONS:
            raise ConfigurationError(f"unknown output activation {self.activation!r}")

    @property
    def n_edges(self) -> int:
        return edge_count(self.S, self.K)

    def edges(self) -> list[tuple[int, int]]:
        """(source, target) node indices; inputs are 0..S-1, intermediates S..S+K-1."""
        return [(i, self.S + j) for j in range(self.K) for i in range(self.S + j)]

    def to_dict(self):
        return {"S": self.S, "K": self.K, "D": self.D, "activation": self.activation}

    @classmethod
    def from_dict(cls, d):
        return cls(int(d["S"]), int(d["K"]), int(d.get("D", 1)), d.get("activation", "identity"))


def edge_count(S: int, K: int) -> int:
    if S < 1 or K < 1:
        raise ConfigurationError("S and K must be >= 1")
    return sum(S + j for j in range(K))


def search_space_size(S: int, K: int, M: int = NUM_OPS) -> int:
    """Number of discrete architectures, as an exact (arbitrary precision) int."""
    if M < 1:
        raise ConfigurationError("M must be >= 1")
    return M ** edge_count(S, K)


def mixture_weights(alpha, mode: str = "regular") -> np.ndarray:
    alpha = np.asarray(alpha, dtype=float)
    if mode == "regular":
        e = np.exp(alpha - alpha.max())
        return e / e.sum()
    if mode == "fair":
        return logistic(alpha)
    raise ConfigurationError(f"unknown mode {mode!r}")


def alpha_id(edge: int, kind) -> str:
    return f"alpha:e{edge}:{get_kind(kind).tag}"


def out_weight_id(i: int, j: int) -> str:
    return f"v:{i}:{j}"


def default_input_names(S):
    return [f"x{i}" for i in range(S)]


def _activate(tape: Tape, node: int, activation: str) -> int:
    return tape.logistic(node) if activation == "logistic" else node


def _combine_outputs(tape, shape, hidden, weight_node) -> list[int]:
    outputs = []
    for j in range(shape.D):
        terms = [tape.mul(weight_node(i, j), h) for i, h in enumerate(hidden)]
        pre = tape.sum(terms)
        outputs.append(_activate(tape, pre, shape.activation))
    return outputs


@dataclass
class SuperGraph:
    shape: GraphShape
    mode: str
    params: ParamStore
    input_names: list[str]
    alpha_ids: list[list[str]] = field(default_factory=list)
    ops: list[list[OpInstance]] = field(default_factory=list)
    out_ids: list[list[str]] = field(default_factory=list)

    @classmethod
    def create(cls, shape: GraphShape, mode: str, rng: np.random.Generator, input_names=None):
        """Fresh cell: alpha = 0, op parameters and output weights drawn from ``rng``."""
        if mode not in MODES:
            raise ConfigurationError(f"unknown mode {mode!r}")
        names = list(input_names) if input_names is not None else default_input_names(shape.S)
        if len(names) != shape.S:
            raise ConfigurationError("input_names must have S entries")
        store = ParamStore()
        graph = cls(shape, mode, store, names)
        for e in range(shape.n_edges):
            graph.alpha_ids.append([store.add(alpha_id(e, k), 0.0, "alpha") for k in OP_KINDS])
            graph.ops.append([make_instance(store, e, k, rng) for k in OP_KINDS])
        for i in range(shape.K):
            graph.out_ids.append(
                [store.add(out_weight_id(i, j), rng.uniform(-1.0, 1.0), "v") for j in range(shape.D)]
            )
        return graph

    def alpha_matrix(self) -> np.ndarray:
        return np.array([[self.params.value(pid) for pid in row] for row in self.alpha_ids])

    def set_alpha(self, alpha):
        alpha = np.asarray(alpha, dtype=float)
        for row, values in zip(self.alpha_ids, alpha):
            for pid, value in zip(row, values):
                self.params.set_value(pid, value)

    def edge_weights(self, tape: Tape, edge: int) -> list[int]:
        """Tape nodes for the mixture weights of one edge."""
        nodes = [tape.param(pid) for pid in self.alpha_ids[edge]]
        if self.mode == "fair":
            return [tape.logistic(n) for n in nodes]
        shift = tape.constant(-max(float(tape.value(n)) for n in nodes))
        exps = [tape.exp(tape.add(n, shift)) for n in nodes]
        inv = tape.reciprocal(tape.sum(exps))
        return [tape.mul(e, inv) for e in exps]


def build_relaxed(graph: SuperGraph, tape: Tape):
    """Returns ``(output_nodes, weight_nodes)`` with per-edge mixture weights."""
    shape = graph.shape
    nodes = [tape.var(name) for name in graph.input_names]
    weights = []
    edge = 0
    for j in range(shape.K):
        terms = []
        for i in range(shape.S + j):
            w = graph.edge_weights(tape, edge)
            weights.append(w)
            x = nodes[i]
            for op, wn in zip(graph.ops[edge], w):
                out = apply(op, x, tape)
                if out is not None:
                    terms.append(tape.mul(wn, out))
            edge += 1
        nodes.append(tape.sum(terms))
    hidden = nodes[shape.S:]
    outputs = _combine_outputs(tape, shape, hidden, lambda i, j: tape.param(graph.out_ids[i][j]))
    return outputs, weights


def forward_relaxed(graph: SuperGraph, tape: Tape) -> list[int]:
    return build_relaxed(graph, tape)[0]


@dataclass
class Genotype:
    shape: GraphShape
    chosen: list[str]
    op_params: list[list[float]]
    out_weights: list[list[float]]
    input_names: list[str] = None
    output_names: list[str] = None

    def __post_init__(self):
        if len(self.chosen) != self.shape.n_edges:
            raise ConfigurationError(
                f"genotype needs {self.shape.n_edges} edges, got {len(self.chosen)}"
            )
        self.chosen = [get_kind(c).tag for c in self.chosen]
        if self.input_names is None:
            self.input_names = default_input_names(self.shape.S)
        if self.output_names is None:
            self.output_names = [f"y{j}" for j in range(self.shape.D)]
        self.op_params = [[float(p) for p in ps] for ps in self.op_params]
        self.out_weights = [[float(v) for v in row] for row in self.out_weights]

    def complexity(self) -> int:
        return sum(get_kind(c).complexity for c in self.chosen)

    def encoding(self) -> tuple[int, ...]:
        return tuple(get_kind(c).index for c in self.chosen)

    @classmethod
    def random_init(cls, shape, chosen, rng, input_names=None, output_names=None):
        """Genotype with freshly initialized op parameters and output weights."""
        op_params = [init_params(c, rng) for c in chosen]
        out = [[float(rng.uniform(-1.0, 1.0)) for _ in range(shape.D)] for _ in range(shape.K)]
        return cls(shape, list(chosen), op_params, out, input_names, output_names)

    def param_ids(self, edge: int) -> tuple[str, ...]:
        kind = get_kind(self.chosen[edge])
        return tuple(op_param_id(edge, kind, n) for n in ("a", "b")[: kind.param_count])

    def to_store(self) -> ParamStore:
        store = ParamStore()
        for e in range(len(self.chosen)):
            for pid, value in zip(self.param_ids(e), self.op_params[e]):
                store.add(pid, value, "w")
        for i, row in enumerate(self.out_weights):
            for j, value in enumerate(row):
                store.add(out_weight_id(i, j), value, "v")
        return store

    def with_store(self, store: ParamStore) -> "Genotype":
        op_params = [[store.value(pid) for pid in self.param_ids(e)] for e in range(len(self.chosen))]
        out = [[store.value(out_weight_id(i, j)) for j in range(self.shape.D)] for i in range(self.shape.K)]
        return Genotype(self.shape, list(self.chosen), op_params, out,
                        list(self.input_names), list(self.output_names))

    def predict(self, X) -> np.ndarray:
        """Plain numpy evaluation on an (n, S) array; returns (n, D)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        nodes = [X[:, i] for i in range(self.shape.S)]
        for e, (src, dst) in enumerate(self.shape.edges()):
            if dst == len(nodes):
                nodes.append(np.zeros(X.shape[0]))
            nodes[dst] = nodes[dst] + apply_numeric(self.chosen[e], nodes[src], self.op_params[e])
        hidden = np.stack(nodes[self.shape.S:], axis=1)
        pre = hidden @ np.asarray(self.out_weights)
        return logistic(pre) if self.shape.activation == "logistic" else pre

    def to_dict(self):
        edges = [
            {"from": src, "to": dst, "op": tag, "params": list(ps)}
            for (src, dst), tag, ps in zip(self.shape.edges(), self.chosen, self.op_params)
        ]
        return {
            "shape": self.shape.to_dict(),
            "inputs": list(self.input_names),
            "outputs": list(self.output_names),
            "edges": edges,
            "out_weights": [list(r) for r in self.out_weights],
        }

    @classmethod
    def from_dict(cls, d):
        shape = GraphShape.from_dict(d["shape"])
        edges = d["edges"]
        if [(e["from"], e["to"]) for e in edges] != shape.edges():
            raise ConfigurationError("genotype edges do not match the declared shape")
        return cls(shape, [e["op"] for e in edges], [e["params"] for e in edges],
                   d["out_weights"], d.get("inputs"), d.get("outputs"))


def discretize(graph: SuperGraph, exclude_zero: bool = False, output_names=None) -> Genotype:
    """Argmax of raw alpha per edge; ties go to the lowest op index."""
    alpha = graph.alpha_matrix()
    if exclude_zero:
        alpha = alpha.copy()
        alpha[:, 0] = -np.inf
    chosen, op_params = [], []
    for e, row in enumerate(alpha):
        k = int(np.argmax(row))
        chosen.append(OP_KINDS[k].tag)
        op_params.append([graph.params.value(pid) for pid in graph.ops[e][k].param_ids])
    out = [[graph.params.value(pid) for pid in row] for row in graph.out_ids]
    return Genotype(graph.shape, chosen, op_params, out, list(graph.input_names), output_names)


def forward_genotype(genotype: Genotype, tape: Tape) -> list[int]:
    """Tape evaluation of a genotype; parameters come from ``tape.params``.

    ``tape.params`` must be laid out as by ``Genotype.to_store``.
    """
    shape = genotype.shape
    nodes = [tape.var(name) for name in genotype.input_names]
    edge = 0
    for j in range(shape.K):
        terms = []
        for i in range(shape.S + j):
            op = OpInstance(get_kind(genotype.chosen[edge]), genotype.param_ids(edge))
            out = apply(op, nodes[i], tape)
            if out is not None:
                terms.append(out)
            edge += 1
        nodes.append(tape.sum(terms))
    hidden = nodes[shape.S:]
    return _combine_outputs(tape, shape, hidden, lambda i, j: tape.param(out_weight_id(i, j)))
