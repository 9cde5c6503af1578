"""Command-line interface.

Subcommands: match, simulate, train-weights, train-inliner, convert, report.
Every command is a thin deterministic wrapper over the library: given the
same inputs, the same --seed, and any --threads value, two runs produce
byte-identical stdout and output files.

stdout discipline: one "key: value" line per reported quantity, then (when a
file was written) the output path on a line of its own.  Exit codes: 0 on
success, 2 on ingest or validation failure, 3 on internal error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from typing import Any, Sequence

from . import defaults
from .costs import WeightVector, load_weights, save_weights, weights_to_json_doc
from .formats import load_graph, save_graph
from .graph import BINARY, SOURCE, GraphError, retag_side
from .inlining import InlineModel, load_model, save_model
from .matching import (
    MatchOptions,
    MatchReport,
    match_pipeline,
    save_report,
    load_report,
)
from .simulate import (
    PROFILE_PRESETS,
    GraphShape,
    SimPair,
    emit_pair,
    load_pair,
    profile_from_json_doc,
    shape_from_json_doc,
    shape_to_json_doc,
    simulate,
)
from .training import (
    build_inline_corpus,
    build_pair_corpus,
    cross_validate_inliner,
    evaluate_inliner,
    load_inline_corpus,
    load_pair_corpus,
    save_inline_corpus,
    save_pair_corpus,
    train_inliner,
    train_weights,
)
from .whitelist import WhitelistConfig, load_whitelist


def _load_weights_flag(path: str | None) -> WeightVector:
    if path is None:
        return defaults.default_weights()
    return load_weights(path)


def _load_inline_model_flag(path: str | None) -> InlineModel | None:
    if path is None:
        return defaults.default_inline_model()
    if path == "none":
        return None
    return load_model(path)


def _load_whitelist_flag(path: str | None) -> WhitelistConfig | None:
    if path is None:
        return defaults.default_whitelist_config()
    if path == "none":
        return None
    return load_whitelist(path)


def _load_truth(path: str) -> dict[str, str]:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in doc.items()
    ):
        raise GraphError(f"{path}: ground truth must map binary ids to source names")
    return doc


def render_report_text(r: MatchReport) -> str:
    """Fixed-width text table over the report's headline numbers."""
    rows: list[tuple[str, str]] = [
        ("similarity", f"{r.similarity:.3f}"),
        ("iterations", str(r.iterations)),
    ]
    counts = {"matched": 0, "multi": 0, "unmatched": 0}
    for lab in r.labels.values():
        counts[lab.kind] += 1
    rows.append(("functions", str(len(r.labels))))
    for kind in ("matched", "multi", "unmatched"):
        rows.append((kind, str(counts[kind])))
    if r.avg_assigned_weight is not None:
        rows.append(("avg_assigned_weight", f"{r.avg_assigned_weight:.4f}"))
    if r.tallies is not None:
        t = r.tallies
        rows.append(("c_matched", f"{t.c_matched:.4f}"))
        rows.append(("ic_matched", f"{t.ic_matched:.4f}"))
        rows.append(("multi_frac", f"{t.multi:.4f}"))
        rows.append(("unmatched_frac", f"{t.unmatched:.4f}"))
    width = max(len(k) for k, _ in rows)
    return "\n".join(f"{k.ljust(width)}  {v}" for k, v in rows) + "\n"


# ---------------------------------------------------------------------------
# subcommands


def cmd_match(args: argparse.Namespace) -> int:
    bin_g = retag_side(load_graph(args.binary), BINARY)
    src_g = retag_side(load_graph(args.source), SOURCE)
    truth = _load_truth(args.truth) if args.truth else None
    report = match_pipeline(
        bin_g,
        src_g,
        weights=_load_weights_flag(args.weights),
        inline_model=_load_inline_model_flag(args.inline_model),
        whitelist=_load_whitelist_flag(args.whitelist),
        opts=MatchOptions(max_iterations=args.max_iter, threads=args.threads),
        truth=truth,
    )
    print(f"similarity: {report.similarity:.3f}")
    print(f"iterations: {report.iterations}")
    if report.tallies is not None:
        t = report.tallies
        print(f"c_matched: {t.c_matched:.6f}")
        print(f"ic_matched: {t.ic_matched:.6f}")
        print(f"multi: {t.multi:.6f}")
        print(f"unmatched: {t.unmatched:.6f}")
    if args.out:
        if args.format == "text":
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(render_report_text(report))
        else:
            save_report(args.out, report)
        print(args.out)
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    preset_name: str | None = None
    if args.profile in PROFILE_PRESETS:
        preset_name = args.profile
        seed = args.seed if args.seed is not None else 0
        profile = PROFILE_PRESETS[preset_name](seed)
    else:
        with open(args.profile, encoding="utf-8") as fh:
            doc = json.load(fh)
        if isinstance(doc, dict) and "profile" in doc:
            doc = doc["profile"]
        profile = profile_from_json_doc(doc)
        if args.seed is not None:
            profile = replace(profile, seed=args.seed)
        seed = profile.seed
    if args.shape:
        with open(args.shape, encoding="utf-8") as fh:
            shape = shape_from_json_doc(json.load(fh))
    else:
        shape = GraphShape()
    sp = simulate(seed, args.n, shape, profile)
    recipe: dict[str, Any] = {
        "n_functions": args.n,
        "shape": shape_to_json_doc(shape),
        "preset": preset_name,
    }
    emit_pair(sp, args.out, generator=recipe)
    print(f"functions_source: {len(sp.source.functions)}")
    print(f"functions_binary: {len(sp.binary.functions)}")
    print(f"inlined_edges: {len(sp.inlined_edges)}")
    print(args.out)
    return 0


def _load_pairs(dirs: Sequence[str]) -> list[SimPair]:
    return [load_pair(d) for d in dirs]


def cmd_train_weights(args: argparse.Namespace) -> int:
    if args.corpus:
        corpus = load_pair_corpus(args.corpus)
    elif args.pairs:
        whitelist = _load_whitelist_flag(args.whitelist)
        corpus = build_pair_corpus(_load_pairs(args.pairs), seed=args.seed, whitelist=whitelist)
    else:
        raise GraphError("give pair directories or --corpus")
    if args.save_corpus:
        save_pair_corpus(args.save_corpus, corpus)
    wv = train_weights(corpus, c=args.c, max_passes=args.passes)
    print(f"examples: {len(corpus)}")
    for key, value in weights_to_json_doc(wv).items():
        print(f"{key}: {value:.6f}")
    save_weights(args.out, wv)
    print(args.out)
    return 0


def cmd_train_inliner(args: argparse.Namespace) -> int:
    if args.corpus:
        corpus = load_inline_corpus(args.corpus)
    elif args.pairs:
        corpus = build_inline_corpus(_load_pairs(args.pairs), seed=args.seed)
    else:
        raise GraphError("give pair directories or --corpus")
    if args.save_corpus:
        save_inline_corpus(args.save_corpus, corpus)
    print(f"examples: {len(corpus)}")
    if args.folds:
        for k, (tpr, fpr) in enumerate(
            cross_validate_inliner(corpus, folds=args.folds, rounds=args.rounds), start=1
        ):
            print(f"fold_{k}_tpr: {tpr:.4f}")
            print(f"fold_{k}_fpr: {fpr:.4f}")
    model = train_inliner(corpus, rounds=args.rounds)
    tpr, fpr = evaluate_inliner(model, corpus)
    print(f"train_tpr: {tpr:.4f}")
    print(f"train_fpr: {fpr:.4f}")
    print(f"rules: {len(model.rules)}")
    save_model(args.out, model)
    print(args.out)
    return 0


def cmd_convert(args: argparse.Namespace) -> int:
    g = load_graph(args.input)
    save_graph(args.output, g)
    print(f"functions: {len(g.functions)}")
    print(args.output)
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    report = load_report(args.report)
    text = render_report_text(report)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(args.out)
    else:
        sys.stdout.write(text)
    return 0


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="provmatch",
        description="Source-to-binary provenance matching over feature graphs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("match", help="match a binary-side graph against a source-side graph")
    p.add_argument("binary", help="binary-side graph (.json or .dot)")
    p.add_argument("source", help="source-side graph (.json or .dot)")
    p.add_argument("--weights", help="weights JSON (default: shipped)")
    p.add_argument("--inline-model", help="inline model JSON, or 'none' (default: shipped)")
    p.add_argument("--whitelist", help="whitelist JSON, or 'none' (default: shipped)")
    p.add_argument("--max-iter", type=int, default=10, help="iteration cap (default 10)")
    p.add_argument("--truth", help="ground-truth JSON for scoring")
    p.add_argument("--out", help="write the match report here")
    p.add_argument("--format", choices=("json", "text"), default="json")
    p.add_argument("--threads", type=int, default=1, help="weight-matrix row parallelism")
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("simulate", help="generate a synthetic source/binary pair")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--n", type=int, default=50, help="number of source functions")
    p.add_argument(
        "--profile",
        default="o2",
        help="preset name (identity|o2|o3) or a profile JSON path (default o2)",
    )
    p.add_argument("--shape", help="generator shape JSON path")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train-weights", help="fit feature weights from simulated pairs")
    p.add_argument("pairs", nargs="*", help="pair directories from 'simulate'")
    p.add_argument("--corpus", help="load a JSONL pair corpus instead")
    p.add_argument("--save-corpus", help="also write the built corpus as JSONL")
    p.add_argument("--whitelist", help="whitelist JSON, or 'none' (default: shipped)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--c", type=float, default=1.0, help="soft-margin constant")
    p.add_argument("--passes", type=int, default=2000, help="optimization pass cap")
    p.add_argument("--out", required=True, help="output weights JSON")
    p.set_defaults(func=cmd_train_weights)

    p = sub.add_parser("train-inliner", help="fit the inline predictor from simulated pairs")
    p.add_argument("pairs", nargs="*", help="pair directories from 'simulate'")
    p.add_argument("--corpus", help="load a JSONL inline corpus instead")
    p.add_argument("--save-corpus", help="also write the built corpus as JSONL")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rounds", type=int, default=8, help="boosting rounds (default 8)")
    p.add_argument("--folds", type=int, help="also run grouped k-fold cross-validation")
    p.add_argument("--out", required=True, help="output model JSON")
    p.set_defaults(func=cmd_train_inliner)

    p = sub.add_parser("convert", help="convert a graph between .dot and .json")
    p.add_argument("input")
    p.add_argument("output")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("report", help="render a match report as a text table")
    p.add_argument("report")
    p.add_argument("--out", help="write the table here instead of stdout")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
