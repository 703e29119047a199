"""Command-line interface.

Every command prints a single JSON report to stdout: the echoed command, the
resolved configuration (all defaults made explicit so any number can be
reproduced without reading source), the results payload, the wall time, and
the package version. Diagnostics go to stderr. Exit codes: 0 success,
1 usage/IO problems, 2 domain errors (a measure undefined for the inputs,
reported inside the JSON payload).

Floats are printed rounded to 9 significant digits to keep regression diffs
stable.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

from . import __version__
from .collection import ltsim_mmd, maxiou_collection, resolve_workers
from .errors import LayoutMetricsError, ParseError, ValidationError
from .harness import PerturbConfig, measure_correlation, perturb, retrieve
from .measures import (
    DEFAULT_GRID,
    DEFAULT_RESOLUTION,
    PAIR_MEASURE_NAMES,
    alignment,
    overlap,
    resolve_measure,
)
from .model import _parse_layout, load_collection, save_collection


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems as exceptions (exit code 1)."""

    def error(self, message):
        raise _UsageError(message)


def _nine_digits(obj):
    """Round every float in a JSON-able structure to 9 significant digits."""
    if isinstance(obj, float):
        return float(f"{obj:.9g}")
    if isinstance(obj, dict):
        return {k: _nine_digits(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_nine_digits(v) for v in obj]
    return obj


def _load(path, vocab, element_cap=None):
    kwargs = {} if element_cap is None else {"element_cap": element_cap}
    return load_collection(path, vocab_path=vocab, **kwargs)


def _pair_kwargs(args):
    return {"sigma": args.sigma, "resolution": args.resolution, "grid": args.grid}


def _add_measure_knobs(parser, with_sigma=True):
    if with_sigma:
        parser.add_argument("--sigma", type=float, default=1.0,
                            help="scaling for the ltsim exponent (default 1.0)")
    parser.add_argument("--resolution", type=int, default=DEFAULT_RESOLUTION,
                        help=f"meaniou raster resolution (default {DEFAULT_RESOLUTION})")
    parser.add_argument("--grid", type=int, default=DEFAULT_GRID,
                        help=f"docemd sampling grid (default {DEFAULT_GRID})")


def _cmd_compare(args):
    a = _load(args.a, args.vocab)
    b = _load(args.b, args.vocab)
    if len(a) != len(b):
        raise _UsageError(f"--a has {len(a)} layouts but --b has {len(b)}; "
                          "files must pair up index-wise")
    fn, higher_is_better = resolve_measure(args.measure, **_pair_kwargs(args))
    results = {"pairs": [], "higher_is_better": higher_is_better}
    code = 0
    for la, lb in zip(a.layouts, b.layouts):
        entry = {"a_id": la.id, "b_id": lb.id}
        try:
            mv = fn(la, lb)
            entry["value"] = mv.value
            entry["meta"] = dict(mv.meta)
        except LayoutMetricsError as exc:
            entry["error"] = str(exc)
            entry["error_type"] = type(exc).__name__
            code = 2
        results["pairs"].append(entry)
    config = {"measure": args.measure, "a": args.a, "b": args.b, "vocab": args.vocab,
              **_pair_kwargs(args)}
    return config, results, code


def _cmd_eval(args):
    real = _load(args.real, args.vocab)
    gen = _load(args.gen, args.vocab)
    workers = resolve_workers(args.workers)
    config = {"measure": args.measure, "real": args.real, "gen": args.gen,
              "vocab": args.vocab, "workers": workers, "streaming": args.streaming,
              "sigma": args.sigma, "save_matrix": args.save_matrix}
    if args.measure == "maxiou":
        if args.streaming or args.save_matrix:
            raise _UsageError("--streaming/--save-matrix only apply to ltsim-mmd")
        report = maxiou_collection(real, gen)
        results = {"score": report.score, "matched": report.matched,
                   "coverage": report.coverage}
    else:
        sigma = args.sigma if args.sigma == "auto" else float(args.sigma)
        if args.streaming and args.save_matrix:
            raise _UsageError("--save-matrix requires the dense mode (drop --streaming)")
        matrices = {} if args.save_matrix else None
        report = ltsim_mmd(real, gen, sigma=sigma, workers=workers,
                           streaming=args.streaming, matrices=matrices)
        if args.save_matrix:
            matrices["real_gen"].save(args.save_matrix, sigma=report.sigma)
        results = {"mmd2": report.mmd2, "sigma": report.sigma, "s": report.s,
                   "t": report.t, "pair_count": report.pair_count}
    if args.report_fid is not None:
        results["external_fid"] = args.report_fid
    return config, results, 0


def _cmd_perturb(args):
    collection = _load(args.input, args.vocab)
    kind = {"pos": "positional", "label": "label"}[args.kind]
    cfg = PerturbConfig(rate=args.rate, kind=kind, max_offset=args.max_offset, seed=args.seed)
    perturbed = perturb(collection, cfg)
    meta = {"seed": cfg.seed, "rate": cfg.rate, "kind": cfg.kind,
            "max_offset": cfg.max_offset, "offset_model": "per-axis-uniform"}
    save_collection(perturbed, args.out, meta=meta)
    config = {"input": args.input, "out": args.out, "vocab": args.vocab, **meta}
    results = {"out": args.out, "layouts": len(perturbed),
               "elements": sum(len(l.elements) for l in perturbed.layouts)}
    return config, results, 0


def _cmd_retrieve(args):
    collection = _load(args.collection, args.vocab)
    try:
        query = collection.by_id(args.query_id)
    except KeyError:
        raise _UsageError(f"query id {args.query_id!r} not found in {args.collection}") from None
    ranked = retrieve(query, collection, args.measure, args.k, **_pair_kwargs(args))
    config = {"query_id": args.query_id, "collection": args.collection,
              "vocab": args.vocab, "measure": args.measure, "k": args.k,
              **_pair_kwargs(args)}
    results = {"items": [{"id": i, "score": s} for i, s in ranked.items],
               "skipped": ranked.meta["skipped"], "candidates": ranked.meta["candidates"]}
    return config, results, 0


def _load_pairs(path, vocab):
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"line {line_no}: invalid JSON ({exc.msg})") from exc
            if not isinstance(obj, dict) or "a" not in obj or "b" not in obj:
                raise ParseError(f"line {line_no}: expected an object with 'a' and 'b' layouts")
            pairs.append((_parse_layout(obj["a"], line_no), _parse_layout(obj["b"], line_no)))
    return pairs


def _cmd_rankcorr(args):
    measures = [m.strip() for m in args.measures.split(",") if m.strip()]
    if len(measures) < 2:
        raise _UsageError("--measures needs at least two comma-separated names")
    pairs = _load_pairs(args.pairs, args.vocab)
    taus = measure_correlation(pairs, measures, **_pair_kwargs(args))
    config = {"pairs": args.pairs, "vocab": args.vocab, "measures": measures,
              **_pair_kwargs(args)}
    results = {"measures": measures, "tau": [list(map(float, row)) for row in taus],
               "pair_count": len(pairs)}
    return config, results, 0


def _cmd_principles(args):
    collection = _load(args.input, args.vocab)
    per_layout = []
    for layout in collection.layouts:
        per_layout.append({"id": layout.id,
                           "overlap": overlap(layout).value,
                           "alignment": alignment(layout).value})
    count = len(per_layout)
    results = {"layouts": per_layout,
               "mean_overlap": sum(r["overlap"] for r in per_layout) / count,
               "mean_alignment": sum(r["alignment"] for r in per_layout) / count}
    config = {"input": args.input, "vocab": args.vocab}
    return config, results, 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="layout-metrics",
                     description="Layout generation evaluation measures and harness.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compare", help="layout-pair measures over aligned files")
    p.add_argument("--measure", required=True, choices=sorted(PAIR_MEASURE_NAMES))
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--vocab")
    _add_measure_knobs(p)
    p.set_defaults(handler=_cmd_compare)

    p = sub.add_parser("eval", help="collection-level comparison")
    p.add_argument("--measure", required=True, choices=["ltsim-mmd", "maxiou"])
    p.add_argument("--real", required=True)
    p.add_argument("--gen", required=True)
    p.add_argument("--vocab")
    p.add_argument("--sigma", default="auto",
                   help="kernel bandwidth, a number or 'auto' (median of real pair EMDs)")
    p.add_argument("--workers", type=int, default=None,
                   help="pairwise engine threads (default: LAYOUT_METRICS_WORKERS or all cores)")
    p.add_argument("--save-matrix", default=None,
                   help="write the real-by-gen EMD matrix to this path (dense mode only)")
    p.add_argument("--streaming", action="store_true",
                   help="accumulate block sums without materializing matrices")
    p.add_argument("--report-fid", type=float, default=None,
                   help="externally computed FID, echoed for side-by-side display")
    p.set_defaults(handler=_cmd_eval)

    p = sub.add_parser("perturb", help="inject positional or label noise")
    p.add_argument("--input", required=True)
    p.add_argument("--rate", type=float, required=True)
    p.add_argument("--kind", required=True, choices=["pos", "label"])
    p.add_argument("--max-offset", type=float, default=0.1)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--vocab")
    p.set_defaults(handler=_cmd_perturb)

    p = sub.add_parser("retrieve", help="top-k nearest layouts to a query")
    p.add_argument("--query-id", required=True)
    p.add_argument("--collection", required=True)
    p.add_argument("--measure", required=True, choices=sorted(PAIR_MEASURE_NAMES))
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--vocab")
    _add_measure_knobs(p)
    p.set_defaults(handler=_cmd_retrieve)

    p = sub.add_parser("rankcorr", help="rank correlation between measures")
    p.add_argument("--pairs", required=True,
                   help="JSONL file of {'a': <layout>, 'b': <layout>} objects")
    p.add_argument("--measures", required=True, help="comma-separated measure names")
    p.add_argument("--vocab")
    _add_measure_knobs(p)
    p.set_defaults(handler=_cmd_rankcorr)

    p = sub.add_parser("principles", help="overlap/alignment scores for a collection")
    p.add_argument("--input", required=True)
    p.add_argument("--vocab")
    p.set_defaults(handler=_cmd_principles)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser = _build_parser()
    started = time.perf_counter()
    try:
        args = parser.parse_args(argv)
        config, results, code = args.handler(args)
    except _UsageError as exc:
        print(f"layout-metrics: error: {exc}", file=sys.stderr)
        return 1
    except (ParseError, ValidationError, OSError, ValueError) as exc:
        print(f"layout-metrics: error: {exc}", file=sys.stderr)
        return 1
    except LayoutMetricsError as exc:
        report = {
            "command": argv,
            "version": __version__,
            "results": {"error": str(exc), "error_type": type(exc).__name__},
            "wall_time_s": time.perf_counter() - started,
        }
        print(json.dumps(_nine_digits(report), indent=2, allow_nan=False))
        return 2
    report = {
        "command": argv,
        "version": __version__,
        "config": config,
        "results": results,
        "wall_time_s": time.perf_counter() - started,
    }
    print(json.dumps(_nine_digits(report), indent=2, allow_nan=False))
    return code


def entrypoint() -> None:
    sys.exit(main())
