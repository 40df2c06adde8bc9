"""The eight candidate edge operations and their metadata."""

from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal

import numpy as np

from .autodiff import ParamStore, Tape, logistic


@dataclass(frozen=True)
class OpKind:
    index: int
    tag: str
    name: str
    param_count: int
    complexity: int


# Fixed order: defines discretization tie-breaks and serialization.
OP_KINDS = (
    OpKind(0, "zero", "zero", 0, 0),
    OpKind(1, "add", "addition", 0, 1),
    OpKind(2, "sub", "subtraction", 0, 1),
    OpKind(3, "mul", "multiplication", 1, 2),
    OpKind(4, "linear", "linear", 2, 3),
    OpKind(5, "exp", "exponential", 2, 3),
    OpKind(6, "relu", "relu", 0, 1),
    OpKind(7, "logistic", "logistic", 0, 1),
)
OP_TAGS = tuple(k.tag for k in OP_KINDS)
NUM_OPS = len(OP_KINDS)
PARAM_NAMES = ("a", "b")

_BY_KEY = {k.tag: k for k in OP_KINDS}
_BY_KEY.update({k.name: k for k in OP_KINDS})


def get_kind(key) -> OpKind:
    if isinstance(key, OpKind):
        return key
    if isinstance(key, (int, np.integer)):
        return OP_KINDS[int(key)]
    try:
        return _BY_KEY[key]
    except KeyError:
        raise KeyError(f"unknown operation {key!r}; expected one of {', '.join(OP_TAGS)}") from None


def complexity(kind) -> int:
    return get_kind(kind).complexity


@dataclass(frozen=True)
class OpInstance:
    """An operation on one edge together with the ids of its own parameters."""

    kind: OpKind
    param_ids: tuple[str, ...] = ()

    @property
    def a(self):
        return self.param_ids[0] if self.param_ids else None

    @property
    def b(self):
        return self.param_ids[1] if len(self.param_ids) > 1 else None


def op_param_id(edge: int, kind, name: str) -> str:
    return f"w:e{edge}:{get_kind(kind).tag}:{name}"


def init_params(kind, rng: np.random.Generator) -> list[float]:
    """Initial (a, b) values: a ~ U(-1, 1), b = 0."""
    kind = get_kind(kind)
    if kind.param_count == 0:
        return []
    values = [float(rng.uniform(-1.0, 1.0))]
    if kind.param_count == 2:
        values.append(0.0)
    return values


def make_instance(store: ParamStore, edge: int, kind, rng: np.random.Generator) -> OpInstance:
    """Allocate the parameters for ``kind`` on ``edge`` in ``store``."""
    kind = get_kind(kind)
    ids = []
    for name, value in zip(PARAM_NAMES, init_params(kind, rng)):
        ids.append(store.add(op_param_id(edge, kind, name), value, "w"))
    return OpInstance(kind, tuple(ids))


def apply(op: OpInstance, x: int, tape: Tape) -> int | None:
    """Tape node for ``o(x)``; ``None`` for the zero operation."""
    tag = op.kind.tag
    if tag == "zero":
        return None
    if tag == "add":
        return x
    if tag == "sub":
        return tape.neg(x)
    if tag == "mul":
        return tape.mul(tape.param(op.a), x)
    if tag == "linear":
        return tape.add(tape.mul(tape.param(op.a), x), tape.param(op.b))
    if tag == "exp":
        return tape.exp(tape.add(tape.mul(tape.param(op.a), x), tape.param(op.b)))
    if tag == "relu":
        return tape.max0(x)
    if tag == "logistic":
        return tape.logistic(x)
    raise AssertionError(tag)


def apply_numeric(kind, x, params=()):
    """Closed-form ``o(x)`` on plain numbers or arrays."""
    tag = get_kind(kind).tag
    x = np.asarray(x, dtype=float)
    if tag == "zero":
        return np.zeros_like(x)
    if tag == "add":
        return x
    if tag == "sub":
        return -x
    if tag == "mul":
        return params[0] * x
    if tag == "linear":
        return params[0] * x + params[1]
    if tag == "exp":
        return np.exp(params[0] * x + params[1])
    if tag == "relu":
        return np.maximum(x, 0.0)
    return logistic(x)


def fmt_num(value: float, decimals: int = 2) -> str:
    """Round half away from zero and format with a fixed number of decimals."""
    q = Decimal(1).scaleb(-decimals)
    d = Decimal(repr(float(value))).quantize(q, rounding=ROUND_HALF_UP)
    if d == 0:
        d = abs(d)
    return f"{d:.{decimals}f}"


def render_term(kind, arg: str, params=(), decimals: int = 2) -> str:
    """Human-readable ``o(arg)`` given plain parameter values."""
    tag = get_kind(kind).tag
    if tag == "zero":
        return "0"
    if tag == "add":
        return arg
    if tag == "sub":
        return f"-{arg}"
    if tag == "relu":
        return f"relu({arg})"
    if tag == "logistic":
        return f"logistic({arg})"
    a = fmt_num(params[0], decimals)
    if tag == "mul":
        return f"{a} * {arg}"
    b = params[1]
    sign = "-" if fmt_num(b, decimals).startswith("-") else "+"
    affine = f"{a} * {arg} {sign} {fmt_num(abs(b), decimals)}"
    return affine if tag == "linear" else f"exp({affine})"


def render(op: OpInstance, arg: str, params: ParamStore, decimals: int = 2) -> str:
    values = [params.value(pid) for pid in op.param_ids]
    return render_term(op.kind, arg, values, decimals)
