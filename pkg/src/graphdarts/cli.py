"""Command-line interface: generate, search, grid, export, summarize."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import asdict
from datetime import datetime, timezone
from pathlib import Path

from .cases import CASES, generate
from .errors import GraphDartsError
from .report import curve_table, dump_json, load_json, manifest, render_equation, to_dot, write_csv
from .search import (
    GAMMA_GRID,
    K_GRID,
    METHODS,
    SEED_GRID,
    SUMMARY_COLUMNS,
    SearchConfig,
    SearchResult,
    best_by_validation,
    run_grid,
    run_search,
    substream,
    summarize,
)

log = logging.getLogger("graphdarts")


def _int_list(text):
    out = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part[1:]:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def _float_list(text):
    out = [float(p) for p in text.split(",") if p.strip()]
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def _str_list(text):
    out = [p.strip() for p in text.split(",") if p.strip()]
    if not out:
        raise argparse.ArgumentTypeError("empty list")
    return out


def _add_schedule_flags(p):
    p.add_argument("--schedule", choices=("sequential", "interleaved"), default="sequential")
    p.add_argument("--rounds", type=int, default=1)
    p.add_argument("--w-epochs", type=int, default=500)
    p.add_argument("--alpha-epochs", type=int, default=300)
    p.add_argument("--retrain-epochs", type=int, default=1000)
    p.add_argument("--retrain-inits", type=int, default=5)
    p.add_argument("--zero-one-variant", choices=("as-printed", "magnitude"), default="as-printed")
    p.add_argument("--exclude-zero", action="store_true",
                   help="never pick the zero op when discretizing")


def _base_config(args, **kw) -> SearchConfig:
    return SearchConfig(
        schedule=args.schedule, rounds=args.rounds, w_epochs=args.w_epochs,
        alpha_epochs=args.alpha_epochs, retrain_epochs=args.retrain_epochs,
        retrain_inits=args.retrain_inits, zero_one_variant=args.zero_one_variant,
        exclude_zero=args.exclude_zero, **kw,
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="graphdarts", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a case dataset as CSV")
    p.add_argument("--case", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory or .csv path")

    p = sub.add_parser("search", help="run one architecture search")
    p.add_argument("--method", required=True, choices=METHODS)
    p.add_argument("--case", required=True)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--gamma", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--time-budget-s", type=float, default=None)
    _add_schedule_flags(p)

    p = sub.add_parser("grid", help="run a (method, k, gamma, seed) grid")
    p.add_argument("--case", required=True)
    p.add_argument("--methods", type=_str_list, default=list(METHODS))
    p.add_argument("--k-set", type=_int_list, default=list(K_GRID))
    p.add_argument("--gamma-set", type=_float_list, default=list(GAMMA_GRID))
    p.add_argument("--seeds", type=_int_list, default=list(SEED_GRID))
    p.add_argument("--workers", type=int, default=None, help="default: $GD_WORKERS or 1")
    p.add_argument("--time-budget-s", type=float, default=None,
                   help="random-search budget when no DARTS method is in the grid")
    p.add_argument("--out", required=True)
    _add_schedule_flags(p)

    p = sub.add_parser("export", help="export a stored run")
    p.add_argument("run_json")
    p.add_argument("--format", choices=("equation", "dot", "curves"), default="equation")
    p.add_argument("--out", default=None, help="output file (default: stdout, or a CSV next to the run)")

    p = sub.add_parser("summarize", help="rebuild summary.csv and best.json from run files")
    p.add_argument("results_dir")
    return parser


def _write_manifest(out_dir: Path, configs, checksum, started):
    path = out_dir / "manifest.json"
    known = []
    if path.exists():
        known = [c for c in load_json(path).get("configs", []) if c not in configs]
    dump_json(manifest(known + configs, checksum, started), path)


def _save_result(result: SearchResult, out_dir: Path) -> Path:
    path = out_dir / f"{result.config.run_name()}.json"
    dump_json(result.to_dict(), path)
    return path


def cmd_generate(args) -> int:
    ds = generate(args.case, substream(args.seed, "data-split"))
    out = Path(args.out)
    if out.suffix != ".csv":
        out.mkdir(parents=True, exist_ok=True)
        out = out / f"{args.case}.csv"
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(ds.to_csv(), encoding="utf-8")
    sizes = ds.split_sizes()
    print(f"{out}: {len(ds)} rows (train {sizes['train']}, val {sizes['val']}, test {sizes['test']})")
    return 0


def cmd_search(args, parser) -> int:
    if (args.method == "random") != (args.time_budget_s is not None):
        parser.error("--time-budget-s is required for, and only valid with, --method random")
    config = _base_config(args, method=args.method, case=args.case, k=args.k, gamma=args.gamma,
                          seed=args.seed, time_budget_s=args.time_budget_s)
    started = datetime.now(timezone.utc)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = run_search(config)
    path = _save_result(result, out)
    if result.trace is not None:
        result.trace.write_csv(out / f"{config.run_name()}_trace.csv")
    _write_manifest(out, [config.to_dict()], result.dataset_checksum, started)
    print(f"wrote {path}")
    if not result.ok:
        print(f"run failed: {result.error}", file=sys.stderr)
        return 1
    print(result.equation)
    for split, lb in result.losses.items():
        print(f"{split}: mse={lb.mse!r} complexity={lb.complexity!r} total={lb.total!r}")
    return 0


def write_summary(results, out_dir: Path):
    rows = summarize(results)
    write_csv(out_dir / "summary.csv", SUMMARY_COLUMNS, [tuple(asdict(r).values()) for r in rows])
    best = {}
    for method in METHODS:
        b = best_by_validation(results, method)
        if b is not None:
            best[method] = {
                "run": b.config.run_name(),
                "val_total": b.loss("val", "total"),
                "test_mse": b.loss("test"),
                "equation": b.equation,
                "result": b.to_dict(),
            }
    dump_json(best, out_dir / "best.json")
    return rows, best


def _print_summary(rows):
    print(",".join(SUMMARY_COLUMNS))
    for r in rows:
        print(",".join(repr(v) if isinstance(v, float) else str(v) for v in asdict(r).values()))


def cmd_grid(args) -> int:
    base = _base_config(args, case=args.case, time_budget_s=args.time_budget_s)
    started = datetime.now(timezone.utc)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    saved = []

    def on_result(r):
        saved.append(_save_result(r, out))

    results, _ = run_grid(args.case, args.methods, args.k_set, args.gamma_set, args.seeds,
                          args.workers, base, on_result)
    rows, _ = write_summary(results, out)
    _write_manifest(out, [asdict(base) | {"grid": {"methods": args.methods, "k_set": args.k_set,
                                                   "gamma_set": args.gamma_set, "seeds": args.seeds}}],
                    generate(args.case).checksum(), started)
    print(f"wrote {len(saved)} run files, summary.csv and best.json to {out}")
    _print_summary(rows)
    return 0


def load_results(results_dir: Path):
    results = []
    for path in sorted(results_dir.glob("*.json")):
        if path.name in ("manifest.json", "best.json"):
            continue
        results.append(SearchResult.from_dict(load_json(path)))
    return results


def cmd_summarize(args) -> int:
    out = Path(args.results_dir)
    results = load_results(out)
    if not results:
        print(f"no run files in {out}", file=sys.stderr)
        return 1
    rows, _ = write_summary(results, out)
    _print_summary(rows)
    return 0


def cmd_export(args, parser) -> int:
    result = SearchResult.from_dict(load_json(args.run_json))
    if not result.ok or result.genotype is None:
        parser.error(f"{args.run_json} is not a successful run")
    if args.format == "curves":
        try:
            columns, rows = curve_table(result.config.case, result.genotype)
        except GraphDartsError as exc:
            parser.error(str(exc))
        out = Path(args.out) if args.out else Path(args.run_json).with_suffix("").with_name(
            Path(args.run_json).stem + "_curves.csv")
        write_csv(out, columns, rows)
        print(f"wrote {out} ({len(rows)} rows)")
        return 0
    text = render_equation(result.genotype) + "\n" if args.format == "equation" else to_dot(result.genotype)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "case", None) is not None and args.case not in CASES:
        parser.error(f"unknown case {args.case!r}; valid ids: {', '.join(CASES)}")
    try:
        if args.command == "generate":
            return cmd_generate(args)
        if args.command == "search":
            return cmd_search(args, parser)
        if args.command == "grid":
            return cmd_grid(args)
        if args.command == "export":
            return cmd_export(args, parser)
        return cmd_summarize(args)
    except GraphDartsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
