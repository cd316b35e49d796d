"""Command-line entry point: ``bdabench {bench,validate,fom,campaign,model}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import harness, perfmodel, report, validate
from .comm import DEFAULT_TIMEOUT, run_ranks
from .dmat import GenMode, Workload


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _str_list(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def _tags(items: list[str] | None) -> dict[str, str]:
    tags = {}
    for item in items or []:
        key, sep, value = item.partition("=")
        if not sep or key not in harness.TAG_KEYS:
            raise argparse.ArgumentTypeError(f"--tag expects one of {harness.TAG_KEYS} as KEY=VALUE, got {item!r}")
        tags[key] = value
    return tags


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--cols", type=int, default=250, help="global column count (default 250)")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--kmeans-k", type=_int_list, default=[2, 3, 4], help="cluster counts, e.g. 2,3,4")
    p.add_argument("--kmeans-iters", type=int, default=30, help="Lloyd iteration cap per k (default 30)")
    p.add_argument("--svm-iters", type=int, default=500, help="Nelder-Mead iterations (default 500)")
    p.add_argument("--gen-mode", choices=["per-rank", "replicated"], default="replicated")
    p.add_argument("--tag", action="append", metavar="KEY=VALUE", help="factor tag recorded with each run")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bdabench", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bench", help="time one benchmark kernel")
    p.add_argument("--workload", required=True, choices=["pca", "kmeans", "svm"])
    p.add_argument("--ranks", type=int, required=True)
    size = p.add_mutually_exclusive_group(required=True)
    size.add_argument("--rows-per-rank", type=int)
    size.add_argument("--bytes-per-rank", type=harness.parse_size)
    p.add_argument("--full-scale", action="store_true", help="enforce the 1024 GB minimum problem size")
    p.add_argument("--repeats", type=int, default=1, help="sequential ensemble repeats (default 1)")
    p.add_argument("--out", type=Path, help="append records to this .jsonl file")
    _add_common(p)

    p = sub.add_parser("validate", help="run the iris validation tests")
    p.add_argument("--test", choices=["pca", "kmeans", "svm", "all"], default="all")
    p.add_argument("--ranks", type=int, default=2)
    p.add_argument("--json", action="store_true", help="print reports as JSON lines")

    p = sub.add_parser("fom", help="figure of merit in TB/s")
    p.add_argument("--ta", type=float, required=True, help="mean of per-job max wall time (s)")
    p.add_argument("--job-size-tb", type=float, default=1.024)
    p.add_argument("--total-nodes", type=int, required=True)
    p.add_argument("--job-nodes", type=int, required=True)

    p = sub.add_parser("campaign", help="weak or strong scaling sweep")
    p.add_argument("--mode", choices=["weak", "strong"], required=True)
    p.add_argument("--ranks", type=_int_list, required=True, help="rank counts, e.g. 1,2,4")
    p.add_argument("--size", type=harness.parse_size, required=True, help="bytes per rank (weak) or global (strong), e.g. 8MB")
    p.add_argument("--workloads", type=_str_list, default=["pca", "kmeans", "svm"])
    p.add_argument("--out", type=Path, required=True, help="records .jsonl; summaries and figure go beside it")
    p.add_argument("--no-figure", action="store_true")
    _add_common(p)

    p = sub.add_parser("model", help="stepwise AIC model and ANOVA of benchmark results")
    p.add_argument("--in", dest="infile", type=Path, required=True, help="CSV table (or .jsonl records)")
    p.add_argument("--response", default="log-throughput")
    p.add_argument("--factors", type=_str_list, required=True)
    p.add_argument("--no-stepwise", action="store_true", help="fit the full first-order model only")
    return parser


def _cmd_bench(args) -> int:
    cfg = harness.BenchmarkConfig(
        workload=Workload.parse(args.workload),
        ranks=args.ranks,
        rows_per_rank=args.rows_per_rank,
        bytes_per_rank=args.bytes_per_rank,
        ncols=args.cols,
        seed=args.seed,
        kmeans_k=tuple(args.kmeans_k),
        kmeans_max_iter=args.kmeans_iters,
        svm_iters=args.svm_iters,
        gen_mode=GenMode.parse(args.gen_mode),
        full_scale=args.full_scale,
        tags=_tags(args.tag),
    ).validate()
    records = [harness.run_distributed(cfg) for _ in range(max(args.repeats, 1))]
    print(report.summary_table(records).rstrip())
    if len(records) > 1:
        print(f"t_a = {harness.ensemble_ta(records):.6f} s over {len(records)} repeats")
    for rec in records:
        print("digest:", json.dumps(rec.digest, sort_keys=True))
    if args.out:
        existing = harness.read_records(args.out) if args.out.exists() else []
        harness.write_records(existing + records, args.out)
    return 0


def _cmd_validate(args) -> int:
    tests = ("pca", "kmeans", "svm") if args.test == "all" else (args.test,)
    reports = run_ranks(args.ranks, validate.validate_all, tests, timeout=DEFAULT_TIMEOUT)[0]
    for rep in reports:
        print(json.dumps(rep.to_dict()) if args.json else rep)
    return 0 if all(r.passed for r in reports) else 1


def _cmd_fom(args) -> int:
    inp = harness.FomInput(args.ta, args.job_size_tb, args.total_nodes, args.job_nodes)
    print(f"{harness.fom_tbs(inp):.4f} TB/s")
    return 0


def _cmd_campaign(args) -> int:
    plan = harness.ScalingPlan(
        mode=args.mode,
        ranks=args.ranks,
        size_bytes=args.size,
        workloads=[Workload.parse(w) for w in args.workloads],
        ncols=args.cols,
        seed=args.seed,
        kmeans_k=tuple(args.kmeans_k),
        kmeans_max_iter=args.kmeans_iters,
        svm_iters=args.svm_iters,
        gen_mode=GenMode.parse(args.gen_mode),
        tags=_tags(args.tag),
    )
    records = harness.campaign(plan, args.out, figures=not args.no_figure)
    print(report.summary_table(records, plan.mode).rstrip())
    return 0


def _cmd_model(args) -> int:
    if args.infile.suffix == ".jsonl":
        rows = [report.record_row(r) for r in harness.read_records(args.infile)]
        table = perfmodel.FactorTable({k: [r[k] for r in rows] for k in report.CSV_COLUMNS})
    else:
        table = perfmodel.FactorTable.read_csv(args.infile)
    print(perfmodel.model_report(table, args.response, args.factors, stepwise=not args.no_stepwise), end="")
    return 0


COMMANDS = {
    "bench": _cmd_bench,
    "validate": _cmd_validate,
    "fom": _cmd_fom,
    "campaign": _cmd_campaign,
    "model": _cmd_model,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except argparse.ArgumentTypeError as exc:
        parser.error(str(exc))
    except (ValueError, OSError, ArithmeticError) as exc:
        print(f"bdabench {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
