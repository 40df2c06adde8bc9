"""SGD with momentum, Adam, cosine annealing and the bi-level controller."""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field

from .autodiff import ParamStore, Tape
from .errors import ConfigurationError, UsageError
from .objective import W01, breakdown, build_loss

W_ROLES = ("w", "v")
ALPHA_ROLES = ("alpha",)


@dataclass
class SgdConfig:
    lr_init: float = 0.025
    lr_min: float = 1e-2
    momentum: float = 0.9
    weight_decay: float = 3e-4
    epochs: int = 500

    def __post_init__(self):
        if min(self.lr_init, self.lr_min, self.momentum, self.weight_decay) < 0:
            raise ConfigurationError("SGD settings must be nonnegative")
        if self.lr_min > self.lr_init:
            raise ConfigurationError("lr_min must not exceed lr_init")


@dataclass
class AdamConfig:
    lr: float = 3e-3
    beta1: float = 0.5
    beta2: float = 0.999
    weight_decay: float = 1e-4
    epochs: int = 300
    eps: float = 1e-8

    def __post_init__(self):
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigurationError("Adam betas must lie in [0, 1)")


@dataclass
class BilevelConfig:
    w_epochs: int = 500
    alpha_epochs: int = 300
    rounds: int = 1
    schedule: str = "sequential"

    def __post_init__(self):
        if self.w_epochs < 1 or self.alpha_epochs < 1:
            raise ConfigurationError("epoch counts must be >= 1")
        if self.rounds < 0:
            raise ConfigurationError("rounds must be >= 0")
        if self.schedule not in ("sequential", "interleaved"):
            raise ConfigurationError(f"unknown schedule {self.schedule!r}")


def cosine_lr(t: float, T: float, lr_init: float, lr_min: float) -> float:
    if T < 1 or not 0 <= t <= T:
        raise UsageError(f"cosine schedule needs 0 <= t <= T and T >= 1 (t={t}, T={T})")
    return lr_min + 0.5 * (lr_init - lr_min) * (1.0 + math.cos(math.pi * t / T))


def sgd_step(params: ParamStore, grads: dict, config: SgdConfig, lr: float, ids=None):
    """One momentum step; weight decay enters the gradient as an L2 term."""
    ids = params.ids(W_ROLES) if ids is None else ids
    for pid in ids:
        p = params[pid]
        g = grads.get(pid, 0.0) + config.weight_decay * p.value
        buf = config.momentum * p.state.get("momentum", 0.0) + g
        p.state["momentum"] = buf
        p.value -= lr * buf


def adam_step(params: ParamStore, grads: dict, config: AdamConfig, ids=None):
    """One bias-corrected Adam step with L2 weight decay added to the gradient."""
    ids = params.ids(ALPHA_ROLES) if ids is None else ids
    b1, b2 = config.beta1, config.beta2
    for pid in ids:
        p = params[pid]
        g = grads.get(pid, 0.0) + config.weight_decay * p.value
        t = p.state.get("step", 0) + 1
        m = b1 * p.state.get("m", 0.0) + (1 - b1) * g
        v = b2 * p.state.get("v", 0.0) + (1 - b2) * g * g
        p.state.update(step=t, m=m, v=v)
        m_hat = m / (1 - b1**t)
        v_hat = v / (1 - b2**t)
        p.value -= config.lr * m_hat / (math.sqrt(v_hat) + config.eps)


@dataclass
class TraceEntry:
    epoch: int
    phase: str
    mse: float
    complexity: float
    zero_one: float
    total: float


@dataclass
class LossTrace:
    entries: list[TraceEntry] = field(default_factory=list)
    clamped: bool = False

    def __len__(self):
        return len(self.entries)

    def add(self, phase, lb):
        self.entries.append(TraceEntry(len(self.entries), phase, lb.mse, lb.complexity, lb.zero_one, lb.total))

    def write_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["epoch", "phase", "mse", "complexity", "zero_one", "total"])
            for e in self.entries:
                writer.writerow([e.epoch, e.phase, repr(e.mse), repr(e.complexity), repr(e.zero_one), repr(e.total)])

    def to_list(self):
        return [asdict(e) for e in self.entries]


def loss_and_grads(model, params: ParamStore, X, Y, gamma, w01=W01, zero_one_variant="as-printed"):
    tape = Tape(params=params)
    nodes = build_loss(tape, model, X, Y, gamma, w01, zero_one_variant)
    grads = tape.backward(nodes["total"])
    return breakdown(tape, nodes, gamma, w01), grads, tape.clamped


def train_weights(model, params: ParamStore, X, Y, sgd: SgdConfig, epochs: int, gamma=0.0,
                  trace: LossTrace | None = None, phase="w", **loss_kw):
    """Full-batch SGD on the w/v parameters with a cosine learning-rate schedule."""
    ids = params.ids(W_ROLES)
    lb = None
    for t in range(epochs):
        lb, grads, clamped = loss_and_grads(model, params, X, Y, gamma, **loss_kw)
        if trace is not None:
            trace.add(phase, lb)
            trace.clamped |= clamped
        sgd_step(params, grads, sgd, cosine_lr(t, epochs, sgd.lr_init, sgd.lr_min), ids)
    return lb


def _alpha_epoch(graph, X, Y, adam, gamma, trace, **loss_kw):
    lb, grads, clamped = loss_and_grads(graph, graph.params, X, Y, gamma, **loss_kw)
    trace.add("alpha", lb)
    trace.clamped |= clamped
    adam_step(graph.params, grads, adam, graph.params.ids(ALPHA_ROLES))


def bilevel_optimize(graph, train, val, bilevel: BilevelConfig | None = None,
                     sgd: SgdConfig | None = None, adam: AdamConfig | None = None,
                     gamma: float = 0.0, w01: float = W01, zero_one_variant: str = "as-printed"):
    """First-order coordinate descent: w/v on the training split, alpha on validation.

    ``train`` and ``val`` are ``(X, Y)`` pairs. Returns ``(graph, trace)``;
    the graph's parameters are updated in place.
    """
    bilevel = bilevel or BilevelConfig()
    sgd = sgd or SgdConfig()
    adam = adam or AdamConfig()
    loss_kw = {"w01": w01, "zero_one_variant": zero_one_variant}
    trace = LossTrace()
    Xt, Yt = train
    Xv, Yv = val
    W, A = bilevel.w_epochs, bilevel.alpha_epochs
    w_ids = graph.params.ids(W_ROLES)
    for _ in range(bilevel.rounds):
        if bilevel.schedule == "sequential":
            train_weights(graph, graph.params, Xt, Yt, sgd, W, gamma, trace, **loss_kw)
            for _ in range(A):
                _alpha_epoch(graph, Xv, Yv, adam, gamma, trace, **loss_kw)
            continue
        for t in range(max(W, A)):
            if t < W:
                lb, grads, clamped = loss_and_grads(graph, graph.params, Xt, Yt, gamma, **loss_kw)
                trace.add("w", lb)
                trace.clamped |= clamped
                sgd_step(graph.params, grads, sgd, cosine_lr(t, W, sgd.lr_init, sgd.lr_min), w_ids)
            if t < A:
                _alpha_epoch(graph, Xv, Yv, adam, gamma, trace, **loss_kw)
    return graph, trace
