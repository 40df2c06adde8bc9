"""Search strategies (regular/fair DARTS, random search), retraining and grids."""

from __future__ import annotations

import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from .cases import Dataset, generate, get_case
from .errors import ConfigurationError, GraphDartsError, NumericOverflowError
from .graph import Genotype, GraphShape, SuperGraph, discretize, search_space_size
from .objective import LossBreakdown, total_loss
from .ops import NUM_OPS, OP_KINDS
from .optim import AdamConfig, BilevelConfig, LossTrace, SgdConfig, bilevel_optimize, train_weights
from .report import render_equation

log = logging.getLogger(__name__)

METHODS = ("regular", "fair", "random")
K_GRID = (1, 2, 3)
GAMMA_GRID = (0.0, 0.25, 0.5, 0.75, 1.0)
SEED_GRID = tuple(range(10))

# named random substreams derived from one seed
STREAMS = {"data-split": 0, "w-init": 1, "random-search": 2, "retrain": 3}


def substream(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng([int(seed), STREAMS[name]])


@dataclass
class SearchConfig:
    method: str = "regular"
    case: str = "weber"
    k: int = 1
    gamma: float = 0.0
    seed: int = 0
    w_epochs: int = 500
    alpha_epochs: int = 300
    rounds: int = 1
    schedule: str = "sequential"
    retrain_inits: int = 5
    retrain_epochs: int = 1000
    lr_init: float = 0.025
    search_lr_min: float = 1e-2
    retrain_lr_min: float = 1e-3
    momentum: float = 0.9
    weight_decay: float = 3e-4
    adam_lr: float = 3e-3
    adam_beta1: float = 0.5
    adam_beta2: float = 0.999
    adam_weight_decay: float = 1e-4
    w01: float = 1.0
    zero_one_variant: str = "as-printed"
    exclude_zero: bool = False
    time_budget_s: float | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigurationError(f"unknown method {self.method!r}; expected one of {METHODS}")
        get_case(self.case)
        if self.k < 1:
            raise ConfigurationError("k must be >= 1")
        if self.gamma < 0:
            raise ConfigurationError("gamma must be >= 0")
        if self.retrain_inits < 1:
            raise ConfigurationError("retrain_inits must be >= 1")

    def search_sgd(self) -> SgdConfig:
        return SgdConfig(self.lr_init, self.search_lr_min, self.momentum, self.weight_decay, self.w_epochs)

    def retrain_sgd(self) -> SgdConfig:
        return SgdConfig(self.lr_init, self.retrain_lr_min, self.momentum, self.weight_decay,
                         self.retrain_epochs)

    def adam(self) -> AdamConfig:
        return AdamConfig(self.adam_lr, self.adam_beta1, self.adam_beta2, self.adam_weight_decay,
                          self.alpha_epochs)

    def bilevel(self) -> BilevelConfig:
        return BilevelConfig(self.w_epochs, self.alpha_epochs, self.rounds, self.schedule)

    def shape(self) -> GraphShape:
        case = get_case(self.case)
        return GraphShape(case.S, self.k, case.D, case.output_activation)

    def run_name(self) -> str:
        return f"{self.case}_{self.method}_k{self.k}_g{self.gamma:g}_s{self.seed}"

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


@dataclass
class SearchResult:
    config: SearchConfig
    status: str
    genotype: Genotype | None = None
    equation: str = ""
    losses: dict = field(default_factory=dict)
    retrain_summary: list = field(default_factory=list)
    dataset_checksum: str = ""
    clamped: bool = False
    sampled: list | None = None
    error: str | None = None
    wall_time_s: float = 0.0
    trace: LossTrace | None = field(default=None, repr=False, compare=False)

    @property
    def ok(self):
        return self.status == "ok"

    def loss(self, split: str, key: str = "mse") -> float:
        return getattr(self.losses[split], key)

    def to_dict(self):
        return {
            "config": self.config.to_dict(),
            "status": self.status,
            "error": self.error,
            "equation": self.equation,
            "genotype": self.genotype.to_dict() if self.genotype is not None else None,
            "losses": {s: lb.to_dict() for s, lb in self.losses.items()},
            "retrain_summary": self.retrain_summary,
            "dataset_checksum": self.dataset_checksum,
            "clamped": self.clamped,
            "sampled": self.sampled,
            "wall_time_s": self.wall_time_s,
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            config=SearchConfig.from_dict(d["config"]),
            status=d["status"],
            genotype=Genotype.from_dict(d["genotype"]) if d.get("genotype") else None,
            equation=d.get("equation", ""),
            losses={s: LossBreakdown.from_dict(v) for s, v in d.get("losses", {}).items()},
            retrain_summary=d.get("retrain_summary", []),
            dataset_checksum=d.get("dataset_checksum", ""),
            clamped=d.get("clamped", False),
            sampled=d.get("sampled"),
            error=d.get("error"),
            wall_time_s=d.get("wall_time_s", 0.0),
        )


def load_dataset(config: SearchConfig) -> Dataset:
    return generate(config.case, substream(config.seed, "data-split"))


def final_retrain(genotype: Genotype, dataset: Dataset, config: SearchConfig):
    """Retrain ``retrain_inits`` fresh initializations; keep the best by validation MSE.

    Returns ``(genotype, summary)``; ties keep the earliest init.
    """
    rng = substream(config.seed, "retrain")
    Xt, Yt = dataset.subset("train")
    Xv, Yv = dataset.subset("val")
    sgd = config.retrain_sgd()
    best, best_val, summary = None, math.inf, []
    for i in range(config.retrain_inits):
        g = Genotype.random_init(genotype.shape, genotype.chosen, rng,
                                 genotype.input_names, genotype.output_names)
        store = g.to_store()
        try:
            train_weights(g, store, Xt, Yt, sgd, config.retrain_epochs)
        except NumericOverflowError as exc:
            summary.append({"init": i, "status": "failed", "error": str(exc)})
            continue
        g = g.with_store(store)
        train_mse = total_loss(g, Xt, Yt).mse
        val_mse = total_loss(g, Xv, Yv).mse
        summary.append({"init": i, "status": "ok", "train_mse": train_mse, "val_mse": val_mse})
        if val_mse < best_val:
            best, best_val = g, val_mse
    if best is None:
        raise NumericOverflowError(-1, "retrain")
    return best, summary


def evaluate(genotype: Genotype, dataset: Dataset, gamma: float) -> dict:
    return {s: total_loss(genotype, *dataset.subset(s), gamma=gamma) for s in ("train", "val", "test")}


def _finish(result: SearchResult, genotype, dataset, config):
    genotype, summary = final_retrain(genotype, dataset, config)
    result.genotype = genotype
    result.retrain_summary = summary
    result.losses = evaluate(genotype, dataset, config.gamma)
    result.equation = render_equation(genotype)
    result.status = "ok"
    return result


def run_darts(config: SearchConfig) -> SearchResult:
    if config.method not in ("regular", "fair"):
        raise ConfigurationError("run_darts needs method 'regular' or 'fair'")
    start = time.perf_counter()
    dataset = load_dataset(config)
    result = SearchResult(config, "failed", dataset_checksum=dataset.checksum())
    try:
        graph = SuperGraph.create(config.shape(), config.method, substream(config.seed, "w-init"),
                                  dataset.iv_names)
        graph, trace = bilevel_optimize(
            graph, dataset.subset("train"), dataset.subset("val"), config.bilevel(),
            config.search_sgd(), config.adam(), config.gamma, config.w01, config.zero_one_variant,
        )
        result.trace = trace
        result.clamped = trace.clamped
        genotype = discretize(graph, config.exclude_zero, dataset.dv_names)
        result.genotype = genotype
        _finish(result, genotype, dataset, config)
    except GraphDartsError as exc:
        log.warning("%s failed: %s", config.run_name(), exc)
        result.status, result.error = "failed", str(exc)
    result.wall_time_s = time.perf_counter() - start
    return result


def _draw(rng, n_edges, seen):
    while True:
        code = tuple(int(c) for c in rng.integers(0, NUM_OPS, size=n_edges))
        if code not in seen:
            return code


def run_random(config: SearchConfig) -> SearchResult:
    """Sample genotypes without replacement until the time budget runs out.

    The budget covers the whole run, including the final retraining of the
    incumbent, whose cost is extrapolated from the incumbent's own training
    time. A new candidate starts only while the time used so far, half a mean
    candidate and that retraining estimate fit in the budget, which centres
    the expected finish on the budget. The first candidate always runs.
    """
    if config.time_budget_s is None or config.time_budget_s <= 0:
        raise ConfigurationError("random search needs a positive time_budget_s")
    start = time.perf_counter()
    dataset = load_dataset(config)
    result = SearchResult(config, "failed", dataset_checksum=dataset.checksum(), sampled=[])
    shape = config.shape()
    space = search_space_size(shape.S, shape.K, NUM_OPS)
    rng = substream(config.seed, "random-search")
    Xt, Yt = dataset.subset("train")
    Xv, Yv = dataset.subset("val")
    sgd = config.search_sgd()
    seen = set()
    best, best_val, best_time = None, math.inf, 0.0
    cand_time = 0.0
    retrain_ratio = config.retrain_inits * config.retrain_epochs / config.w_epochs
    while len(seen) < space:
        if seen:
            needed = 0.5 * cand_time / len(seen) + best_time * retrain_ratio
            if time.perf_counter() - start + needed > config.time_budget_s:
                break
        t0 = time.perf_counter()
        code = _draw(rng, shape.n_edges, seen)
        seen.add(code)
        result.sampled.append("".join(str(c) for c in code))
        chosen = [OP_KINDS[c].tag for c in code]
        g = Genotype.random_init(shape, chosen, rng, dataset.iv_names, dataset.dv_names)
        store = g.to_store()
        try:
            t_train = time.perf_counter()
            train_weights(g, store, Xt, Yt, sgd, config.w_epochs)
            train_time = time.perf_counter() - t_train
            g = g.with_store(store)
            val = total_loss(g, Xv, Yv, gamma=config.gamma).total
        except NumericOverflowError:
            val = math.inf
        cand_time += time.perf_counter() - t0
        if val < best_val:
            best, best_val, best_time = g, val, train_time
    log.debug("%s: %d candidates in %.3f s, retrain estimate %.3f s", config.run_name(),
              len(seen), time.perf_counter() - start, best_time * retrain_ratio)
    if best is None:
        result.error = "no candidate completed within the time budget"
    else:
        try:
            _finish(result, best, dataset, config)
        except GraphDartsError as exc:
            result.status, result.error = "failed", str(exc)
    result.wall_time_s = time.perf_counter() - start
    return result


def run_search(config: SearchConfig) -> SearchResult:
    return run_random(config) if config.method == "random" else run_darts(config)


# grids

def grid_configs(case, methods, k_set, gamma_set, seeds, base: SearchConfig | None = None):
    base = base or SearchConfig(case=case)
    return [
        replace(base, case=case, method=m, k=k, gamma=float(g), seed=s)
        for m in methods for k in k_set for g in gamma_set for s in seeds
    ]


def default_workers() -> int:
    env = os.environ.get("GD_WORKERS")
    return max(1, int(env)) if env else 1


def _map(configs, workers):
    if workers <= 1 or len(configs) <= 1:
        return [run_search(c) for c in configs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run_search, configs))


def run_grid(case, methods=METHODS, k_set=K_GRID, gamma_set=GAMMA_GRID, seeds=SEED_GRID,
             workers: int | None = None, base: SearchConfig | None = None, on_result=None):
    """Run every (method, k, gamma, seed) cell.

    Random-search cells run after the DARTS cells, with a budget equal to the
    slower of the matching regular/fair runs (``base.time_budget_s`` when no
    DARTS method is part of the grid). ``on_result`` is called once per
    finished run, from the calling process.
    """
    if not (methods and k_set and gamma_set and seeds):
        raise ConfigurationError("grid axes must be nonempty")
    for m in methods:
        if m not in METHODS:
            raise ConfigurationError(f"unknown method {m!r}")
    workers = default_workers() if workers is None else workers
    darts = [m for m in methods if m != "random"]
    results = []

    def collect(batch):
        for r in batch:
            results.append(r)
            if on_result is not None:
                on_result(r)

    collect(_map(grid_configs(case, darts, k_set, gamma_set, seeds, base), workers))
    if "random" in methods:
        budgets = {}
        for r in results:
            key = (r.config.k, r.config.gamma, r.config.seed)
            budgets[key] = max(budgets.get(key, 0.0), r.wall_time_s)
        rand = []
        for c in grid_configs(case, ["random"], k_set, gamma_set, seeds, base):
            budget = budgets.get((c.k, c.gamma, c.seed), c.time_budget_s)
            if not budget:
                raise ConfigurationError("random search in a grid needs DARTS runs or a time budget")
            rand.append(replace(c, time_budget_s=budget))
        collect(_map(rand, workers))
    return results, summarize(results)


@dataclass
class SummaryRow:
    case: str
    method: str
    k: int
    gamma: float
    n: int
    mean_test_mse: float
    sem_test_mse: float
    best_val_flag: int
    excluded: int


SUMMARY_COLUMNS = tuple(f.name for f in fields(SummaryRow))


def best_by_validation(results, method):
    ok = [r for r in results if r.ok and r.config.method == method]
    if not ok:
        return None
    return min(ok, key=lambda r: (r.loss("val", "total"), r.config.k, r.config.gamma, r.config.seed))


def summarize(results) -> list[SummaryRow]:
    """Mean and SEM of test MSE per (method, k, gamma); independent of result order."""
    groups = {}
    for r in results:
        c = r.config
        groups.setdefault((c.case, c.method, c.k, c.gamma), []).append(r)
    order = {m: i for i, m in enumerate(METHODS)}
    best = {m: best_by_validation(results, m) for m in {r.config.method for r in results}}
    rows = []
    for key in sorted(groups, key=lambda k: (k[0], order[k[1]], k[2], k[3])):
        runs = groups[key]
        ok = sorted(r.loss("test") for r in runs if r.ok)
        n = len(ok)
        mean = float(np.mean(ok)) if n else math.nan
        # n == 1 reports SEM 0
        sem = float(np.std(ok, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        b = best.get(key[1])
        flag = int(any(r is b for r in runs))
        rows.append(SummaryRow(key[0], key[1], key[2], key[3], n, mean, sem, flag, len(runs) - n))
    return rows
