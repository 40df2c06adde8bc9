"""Equation and DOT rendering, curve tables and JSON/CSV persistence helpers."""

from __future__ import annotations

import csv
import json
import platform
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .cases import (
    LCA_COLUMNS,
    LEARNING_COLUMNS,
    PSYCHOMETRIC_COLUMNS,
    emit_learning_curves,
    emit_psychometric,
    get_case,
    simulate_lca,
)
from .errors import UsageError
from .graph import Genotype
from .ops import fmt_num, render_term


def _is_atom(expr: str) -> bool:
    return " " not in expr


def _join_terms(terms) -> str:
    if not terms:
        return "0"
    out = " + ".join(terms)
    return out.replace(" + -", " - ")


def node_expressions(genotype: Genotype, decimals: int = 2) -> list[str]:
    """Rendered expression for every node, inputs first; zero-op branches dropped."""
    shape = genotype.shape
    exprs = list(genotype.input_names)
    edge = 0
    for j in range(shape.K):
        terms = []
        for i in range(shape.S + j):
            tag = genotype.chosen[edge]
            if tag != "zero" and exprs[i] != "0":
                arg = exprs[i] if _is_atom(exprs[i]) else f"({exprs[i]})"
                terms.append(render_term(tag, arg, genotype.op_params[edge], decimals))
            edge += 1
        exprs.append(_join_terms(terms))
    return exprs


def render_equation(genotype: Genotype, decimals: int = 2) -> str:
    """One line per output, e.g. ``P(detected) = logistic(-0.22 * (I0 - I1))``."""
    shape = genotype.shape
    hidden = node_expressions(genotype, decimals)[shape.S:]
    lines = []
    for j, name in enumerate(genotype.output_names):
        terms = []
        for i, expr in enumerate(hidden):
            if expr == "0":
                continue
            arg = expr if _is_atom(expr) else f"({expr})"
            terms.append(f"{fmt_num(genotype.out_weights[i][j], decimals)} * {arg}")
        rhs = _join_terms(terms)
        if shape.activation == "logistic":
            rhs = f"logistic({rhs})"
        lines.append(f"{name} = {rhs}")
    return "\n".join(lines)


def _q(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(genotype: Genotype, decimals: int = 2) -> str:
    shape = genotype.shape
    names = list(genotype.input_names) + [f"x{shape.S + i}" for i in range(shape.K)]
    lines = ["digraph genotype {", "  rankdir=LR;"]
    for name in genotype.input_names:
        lines.append(f"  {_q(name)} [shape=box];")
    for name in names[shape.S:]:
        lines.append(f"  {_q(name)} [shape=circle];")
    for j, name in enumerate(genotype.output_names):
        lines.append(f"  {_q('out:' + name)} [shape=doublecircle, label={_q(name)}];")
    for e, (src, dst) in enumerate(shape.edges()):
        tag = genotype.chosen[e]
        if tag == "zero":
            continue
        label = render_term(tag, names[src], genotype.op_params[e], decimals)
        lines.append(f"  {_q(names[src])} -> {_q(names[dst])} [label={_q(label)}];")
    for i in range(shape.K):
        for j, name in enumerate(genotype.output_names):
            w = fmt_num(genotype.out_weights[i][j], decimals)
            lines.append(f"  {_q(names[shape.S + i])} -> {_q('out:' + name)} [label={_q(w)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


# curve tables comparing the generating model with a recovered genotype

PSYCHOMETRIC_BASELINES = (0.0, 1.0, 2.0)
LEARNING_CONDITIONS = ((0.0, 1.0), (0.2, 0.75), (0.4, 0.5))
LCA_START = (0.5, 0.3, 0.1)


def curve_table(case_id: str, genotype: Genotype):
    """Returns ``(columns, rows)`` for the case's figure-style panel."""
    case = get_case(case_id)

    def recovered(X):
        return genotype.predict(X)[:, 0]

    if case_id == "weber":
        rows = emit_psychometric(case.ground_truth, PSYCHOMETRIC_BASELINES, "model")
        rows += emit_psychometric(recovered, PSYCHOMETRIC_BASELINES, "recovered")
        return PSYCHOMETRIC_COLUMNS, rows
    if case_id == "exp_learning":
        rows = emit_learning_curves(case.ground_truth, LEARNING_CONDITIONS, "model")
        rows += emit_learning_curves(recovered, LEARNING_CONDITIONS, "recovered")
        return LEARNING_COLUMNS, rows
    if case_id == "lca":
        truth, _ = simulate_lca(case.ground_truth, LCA_START, source="model")
        rec, _ = simulate_lca(recovered, LCA_START, source="recovered")
        return LCA_COLUMNS, truth + rec
    raise UsageError(f"no curve export for case {case_id!r}")


def write_csv(path, columns, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def dump_json(obj, path=None) -> str:
    text = json.dumps(obj, indent=2, ensure_ascii=False) + "\n"
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def load_json(path):
    return json.loads(Path(path).read_text(encoding="utf-8"))


def manifest(configs, dataset_checksum: str, started_at: datetime | None = None) -> dict:
    now = datetime.now(timezone.utc)
    return {
        "tool": "graphdarts",
        "version": __version__,
        "configs": configs,
        "dataset_checksum": dataset_checksum,
        "started_at": (started_at or now).isoformat(),
        "finished_at": now.isoformat(),
        "host": {"platform": platform.platform(), "python": sys.version.split()[0],
                 "node": platform.node()},
    }
