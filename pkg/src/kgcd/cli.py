"""Command-line front end: decode, validate, eval and select-topk subcommands.

Exit codes: 0 success, 1 usage error, 2 data error, 3 decode failure on every
instance.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .data import (
    DEFAULT_TEMPLATE,
    DatasetError,
    QaInstance,
    TemplateError,
    aggregate_metrics,
    check_template,
    load_dataset,
    read_traces,
    run_dataset,
    write_traces,
)
from .decode import DecodeConfig
from .kg import (
    GraphParseError,
    Triplet,
    UnknownEntityError,
    lexical_overlap_scorer,
    linearize,
    load_graph,
    save_graph,
    select_topk_connected,
)
from .metrics import hits_at_1, triplet_f1
from .scorers import parse_scorer_spec
from .subgraph import validate_chain

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_DECODE = 3


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse defaults to exit code 2
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="kgcd", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    dec = sub.add_parser("decode", help="run constrained decoding")
    src = dec.add_mutually_exclusive_group(required=True)
    src.add_argument("--graph", type=Path, help="triple TSV for a single ad-hoc question")
    src.add_argument("--dataset", type=Path, help="JSON Lines dataset")
    dec.add_argument("--question", help="question text (with --graph)")
    dec.add_argument("--query-entity", action="append", default=[], dest="query_entities")
    dec.add_argument("--answers", action="append", default=[], help="gold answers (with --graph)")
    dec.add_argument("--beam-size", type=int, default=1)
    dec.add_argument("--max-steps", type=int, default=4)
    dec.add_argument("--max-unconstrained-tokens", type=int, default=128)
    dec.add_argument("--scorer", required=True, help="table:PATH | scripted:PATH | random")
    dec.add_argument("--seed", type=int, default=0)
    dec.add_argument("--out", type=Path, help="trace JSONL output path")
    dec.add_argument("--template", type=Path, help="prompt template file")

    val = sub.add_parser("validate", help="validate a chain against a graph")
    val.add_argument("--graph", type=Path, required=True)
    val.add_argument("--chain", type=Path, required=True, help="JSON list of [h, r, t]")
    val.add_argument("--query-entity", action="append", default=[], dest="query_entities")

    ev = sub.add_parser("eval", help="aggregate metrics from traces and a dataset")
    ev.add_argument("--traces", type=Path, required=True)
    ev.add_argument("--dataset", type=Path, required=True)

    topk = sub.add_parser("select-topk", help="similarity-ranked connected subgraph")
    topk.add_argument("--graph", type=Path, required=True)
    topk.add_argument("--question", required=True)
    topk.add_argument("--query-entity", action="append", required=True, dest="query_entities")
    topk.add_argument("-k", type=int, default=120)
    topk.add_argument("--out", type=Path, help="output TSV (default: stdout)")
    return parser


def _cmd_decode(args: argparse.Namespace) -> int:
    try:
        spec = parse_scorer_spec(args.scorer)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    config = DecodeConfig(
        beam_size=args.beam_size,
        max_steps=args.max_steps,
        max_unconstrained_tokens=args.max_unconstrained_tokens,
        seed=args.seed,
    )
    template = DEFAULT_TEMPLATE
    if args.template:
        template = args.template.read_text(encoding="utf-8")
    check_template(template)
    if args.dataset:
        instances = load_dataset(args.dataset)
    else:
        if not args.question or not args.query_entities:
            raise UsageError("--graph mode requires --question and --query-entity")
        instances = [
            QaInstance(
                id="cli",
                question=args.question,
                query_entities=tuple(args.query_entities),
                answers=tuple(args.answers) or ("?",),
                graph=load_graph(args.graph),
            )
        ]
    report, traces = run_dataset(instances, config, spec, template)
    if args.out:
        write_traces(traces, args.out)
    else:
        for trace in traces:
            print(json.dumps(trace.to_dict(), ensure_ascii=False))
    print(json.dumps(report), file=sys.stderr)
    if report["decoded"] == 0:
        return EXIT_DECODE
    return EXIT_OK


def _cmd_validate(args: argparse.Namespace) -> int:
    graph = load_graph(args.graph)
    with open(args.chain, "r", encoding="utf-8") as fh:
        chain = [Triplet(*row) for row in json.load(fh)]
    report = validate_chain(chain, graph, args.query_entities)
    print(json.dumps(report.to_dict(), ensure_ascii=False, indent=2))
    return EXIT_OK


def _cmd_eval(args: argparse.Namespace) -> int:
    traces = read_traces(args.traces)
    instances = {i.id: i for i in load_dataset(args.dataset)}
    for trace in traces:
        instance = instances.get(trace.instance_id)
        if instance is None or trace.error is not None:
            continue
        predicted: list[str] = []
        for record in trace.candidates:
            if record["predicted_answers"]:
                predicted = record["predicted_answers"]
                break
        trace.metrics["hits_at_1"] = hits_at_1(predicted, instance.answers)
        if instance.gold_chain and trace.candidates:
            chain = [Triplet(*row) for row in trace.candidates[0]["chain"]]
            trace.metrics["triplet_f1"] = triplet_f1(chain, instance.gold_chain)
    report = aggregate_metrics(traces)
    width = max(len(k) for k in report)
    for key, value in report.items():
        print(f"{key:<{width}}  {value}")
    return EXIT_OK


def _cmd_select_topk(args: argparse.Namespace) -> int:
    graph = load_graph(args.graph)
    result = select_topk_connected(
        graph, args.query_entities, lexical_overlap_scorer, args.question, args.k
    )
    if args.out:
        save_graph(result, args.out)
    else:
        print(linearize(result))
    return EXIT_OK


_COMMANDS = {
    "decode": _cmd_decode,
    "validate": _cmd_validate,
    "eval": _cmd_eval,
    "select-topk": _cmd_select_topk,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except (UsageError, TemplateError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DatasetError, GraphParseError, UnknownEntityError, FileNotFoundError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
