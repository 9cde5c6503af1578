"""Iterative whole-graph function matching.

Each round builds a weight matrix over (binary function, source function)
pairs and solves a minimum-cost assignment on it.  Call-graph neighbour
features only participate from round 1 onward: they compare name sets, and
binary-side names (addresses) first become comparable through the
address-to-name map induced by the previous round's confident matches.
Rounds repeat until the set of uniquely matched pairs stops changing (or a
previously seen state recurs, or the round budget runs out).

Labels per binary function:

* matched    - assigned pair's weight is unique in its row (within epsilon)
* multi      - other columns tie with the assigned weight
* unmatched  - assigned at the sentinel MAX_WEIGHT, or dropped by padding

The similarity score is the fraction of binary functions labelled matched.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .costs import (
    ALL_FEATURES,
    BOOTSTRAP_FEATURES,
    WeightVector,
    arg_cost,
    set_feature_cost,
)
from .graph import BINARY, SOURCE, FeatureGraph
from .hungarian import Assignment, solve
from .inlining import InlineModel, predict_all, synthesize_pseudo_inlined
from .whitelist import WhitelistConfig, apply_whitelists

LABEL_MATCHED = "matched"
LABEL_MULTI = "multi"
LABEL_UNMATCHED = "unmatched"

DEFAULT_MAX_ITERATIONS = 10
DEFAULT_TIE_EPSILON = 1e-9


class MatchError(ValueError):
    pass


@dataclass(frozen=True)
class Label:
    kind: str
    source: str | None = None
    candidates: tuple[str, ...] = ()
    weight: float | None = None


@dataclass(frozen=True)
class WeightMatrix:
    """One round's pair weights.  Rows are binary functions in id order,
    columns source functions in id order."""

    row_ids: tuple[str, ...]
    col_ids: tuple[str, ...]
    entries: np.ndarray
    max_weight: float
    iteration: int


@dataclass(frozen=True)
class Tallies:
    c_matched: float
    ic_matched: float
    multi: float
    unmatched: float
    total: int


@dataclass
class MatchReport:
    similarity: float
    iterations: int
    labels: dict[str, Label]
    trace: tuple[tuple[tuple[str, str], ...], ...]
    pseudo_origins: dict[str, tuple[str, str]] = field(default_factory=dict)
    avg_assigned_weight: float | None = None
    tallies: Tallies | None = None


@dataclass(frozen=True)
class MatchOptions:
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    tie_epsilon: float = DEFAULT_TIE_EPSILON
    threads: int = 1


def translate_fcg(ids: frozenset[str], amap: dict[str, str]) -> frozenset:
    """Rewrite binary-side neighbour ids into source names via the map.

    Unmapped ids become opaque ("unmapped", id) tokens.  Tokens are tuples,
    so they can never collide with a source-side name, but two unmapped
    references to the same binary function stay equal to each other.
    """
    return frozenset(amap.get(x, ("unmapped", x)) for x in ids)


class _MatrixBuilder:
    """Computes per-round weight matrices for one graph pair.

    The four call-graph-independent feature costs never change between
    rounds, so they are computed once and reused.
    """

    def __init__(self, bin_g: FeatureGraph, src_g: FeatureGraph, wv: WeightVector, threads: int = 1):
        self.wv = wv
        self.threads = max(1, int(threads))
        self.row_ids = tuple(sorted(bin_g.functions))
        self.col_ids = tuple(sorted(src_g.functions))
        self.bin_feats = [bin_g.functions[i].features for i in self.row_ids]
        self.src_feats = [src_g.functions[j].features for j in self.col_ids]
        nr, nc = len(self.row_ids), len(self.col_ids)
        self.c_strings = np.empty((nr, nc))
        self.c_ints = np.empty((nr, nc))
        self.c_libcalls = np.empty((nr, nc))
        self.c_args = np.empty((nr, nc))
        self._run_rows(self._static_row)

    def _run_rows(self, fill) -> None:
        rows = range(len(self.row_ids))
        if self.threads > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as ex:
                list(ex.map(fill, rows))
        else:
            for r in rows:
                fill(r)

    def _static_row(self, r: int) -> None:
        bf = self.bin_feats[r]
        for c, sf in enumerate(self.src_feats):
            self.c_strings[r, c] = set_feature_cost(bf.strings, sf.strings)
            self.c_ints[r, c] = set_feature_cost(bf.ints, sf.ints)
            self.c_libcalls[r, c] = set_feature_cost(bf.libcalls, sf.libcalls)
            self.c_args[r, c] = arg_cost(bf.num_args, sf.num_args)

    def matrix(self, amap: dict[str, str], iteration: int) -> WeightMatrix:
        wv = self.wv
        if iteration == 0:
            active = BOOTSTRAP_FEATURES
            entries = (
                wv.strings * self.c_strings
                + wv.ints * self.c_ints
                + wv.libcalls * self.c_libcalls
                + wv.num_args * self.c_args
            )
            all_ones = (
                (self.c_strings == 1.0)
                & (self.c_ints == 1.0)
                & (self.c_libcalls == 1.0)
                & (self.c_args == 1.0)
            )
        else:
            active = ALL_FEATURES
            c_callers, c_callees = self._fcg_costs(amap)
            entries = (
                wv.strings * self.c_strings
                + wv.ints * self.c_ints
                + wv.libcalls * self.c_libcalls
                + wv.callers * c_callers
                + wv.callees * c_callees
                + wv.num_args * self.c_args
            )
            all_ones = (
                (self.c_strings == 1.0)
                & (self.c_ints == 1.0)
                & (self.c_libcalls == 1.0)
                & (c_callers == 1.0)
                & (c_callees == 1.0)
                & (self.c_args == 1.0)
            )
        max_weight = wv.max_weight(active)
        entries = np.where(all_ones, max_weight, entries)
        return WeightMatrix(
            row_ids=self.row_ids,
            col_ids=self.col_ids,
            entries=entries,
            max_weight=max_weight,
            iteration=iteration,
        )

    def _fcg_costs(self, amap: dict[str, str]) -> tuple[np.ndarray, np.ndarray]:
        nr, nc = len(self.row_ids), len(self.col_ids)
        c_callers = np.empty((nr, nc))
        c_callees = np.empty((nr, nc))
        src_callers = [sf.callers for sf in self.src_feats]
        src_callees = [sf.callees for sf in self.src_feats]

        def fill(r: int) -> None:
            bf = self.bin_feats[r]
            t_callers = translate_fcg(bf.callers, amap)
            t_callees = translate_fcg(bf.callees, amap)
            for c in range(nc):
                c_callers[r, c] = set_feature_cost(t_callers, src_callers[c])
                c_callees[r, c] = set_feature_cost(t_callees, src_callees[c])

        rows = range(nr)
        if self.threads > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as ex:
                list(ex.map(fill, rows))
        else:
            for r in rows:
                fill(r)
        return c_callers, c_callees


def build_weight_matrix(
    bin_g: FeatureGraph,
    src_g: FeatureGraph,
    wv: WeightVector,
    amap: dict[str, str],
    iteration: int,
    threads: int = 1,
) -> WeightMatrix:
    return _MatrixBuilder(bin_g, src_g, wv, threads=threads).matrix(amap, iteration)


def label_assignment(
    m: WeightMatrix, a: Assignment, tie_epsilon: float = DEFAULT_TIE_EPSILON
) -> dict[str, Label]:
    labels: dict[str, Label] = {}
    for r, rid in enumerate(m.row_ids):
        if r not in a.pairs:
            labels[rid] = Label(LABEL_UNMATCHED)
            continue
        c = a.pairs[r]
        w = float(m.entries[r, c])
        if w >= m.max_weight:
            labels[rid] = Label(LABEL_UNMATCHED)
            continue
        ties = np.abs(m.entries[r] - w) <= tie_epsilon
        if int(ties.sum()) <= 1:
            labels[rid] = Label(LABEL_MATCHED, source=m.col_ids[c], weight=w)
        else:
            cands = tuple(m.col_ids[int(j)] for j in np.nonzero(ties)[0])
            labels[rid] = Label(LABEL_MULTI, candidates=cands, weight=w)
    return labels


def address_name_map(labels: dict[str, Label], src_g: FeatureGraph) -> dict[str, str]:
    """Binary id -> source name, from the uniquely matched labels.

    A match against a pseudo-inlined target maps to the ORIGINAL CALLER's
    name: that is the name other functions' neighbour sets actually contain.
    The map is injective; on a collision the smallest binary id wins.
    """
    out: dict[str, str] = {}
    taken: set[str] = set()
    for bid in sorted(labels):
        lab = labels[bid]
        if lab.kind != LABEL_MATCHED:
            continue
        entry = src_g.functions[lab.source]
        name = entry.pseudo_origin[0] if entry.is_pseudo else lab.source
        if name in taken:
            continue
        out[bid] = name
        taken.add(name)
    return out


def _matched_snapshot(labels: dict[str, Label]) -> tuple[tuple[str, str], ...]:
    return tuple(
        (bid, lab.source)
        for bid, lab in sorted(labels.items())
        if lab.kind == LABEL_MATCHED
    )


def match(
    bin_g: FeatureGraph,
    src_g: FeatureGraph,
    wv: WeightVector | None = None,
    opts: MatchOptions = MatchOptions(),
) -> MatchReport:
    if bin_g.side != BINARY or src_g.side != SOURCE:
        raise MatchError("match() needs a binary-side graph and a source-side graph")
    if not bin_g.functions:
        raise MatchError("binary graph has no functions")
    wv = wv or WeightVector()

    pseudo_origins = {
        name: e.pseudo_origin
        for name, e in src_g.functions.items()
        if e.pseudo_origin is not None
    }

    if not src_g.functions:
        labels = {bid: Label(LABEL_UNMATCHED) for bid in sorted(bin_g.functions)}
        return MatchReport(
            similarity=0.0,
            iterations=1,
            labels=labels,
            trace=(tuple(),),
            pseudo_origins=pseudo_origins,
        )

    builder = _MatrixBuilder(bin_g, src_g, wv, threads=opts.threads)
    amap: dict[str, str] = {}
    labels: dict[str, Label] = {}
    trace: list[tuple[tuple[str, str], ...]] = []
    seen: set[tuple[tuple[str, str], ...]] = set()
    last_matrix: WeightMatrix | None = None

    for iteration in range(max(1, opts.max_iterations)):
        m = builder.matrix(amap, iteration)
        a = solve(m.entries, pad_value=m.max_weight)
        labels = label_assignment(m, a, tie_epsilon=opts.tie_epsilon)
        last_matrix = m
        snapshot = _matched_snapshot(labels)
        trace.append(snapshot)
        if trace[:-1] and snapshot == trace[-2]:
            break  # steady state
        if snapshot in seen:
            break  # cycle guard: report the last state
        seen.add(snapshot)
        amap = address_name_map(labels, src_g)

    matched = sum(1 for lab in labels.values() if lab.kind == LABEL_MATCHED)
    similarity = matched / len(bin_g.functions)

    weights = [lab.weight for lab in labels.values() if lab.weight is not None]
    avg = sum(weights) / len(weights) if weights else None

    return MatchReport(
        similarity=similarity,
        iterations=len(trace),
        labels=labels,
        trace=tuple(trace),
        pseudo_origins=pseudo_origins,
        avg_assigned_weight=avg,
    )


def score_against_ground_truth(r: MatchReport, truth: dict[str, str]) -> Tallies:
    """Correct/incorrect/multi/unmatched split as fractions of binary
    functions.  A match against a pseudo-inlined target counts as naming the
    original caller."""
    missing = sorted(set(r.labels) - set(truth))
    if missing:
        raise MatchError(f"ground truth is missing binary ids: {missing[:5]}")
    total = len(r.labels)
    if total == 0:
        raise MatchError("report has no labels to score")
    c = ic = multi = un = 0
    for bid, lab in r.labels.items():
        if lab.kind == LABEL_MATCHED:
            origin = r.pseudo_origins.get(lab.source)
            effective = origin[0] if origin is not None else lab.source
            if effective == truth[bid]:
                c += 1
            else:
                ic += 1
        elif lab.kind == LABEL_MULTI:
            multi += 1
        else:
            un += 1
    return Tallies(
        c_matched=c / total,
        ic_matched=ic / total,
        multi=multi / total,
        unmatched=un / total,
        total=total,
    )


def match_pipeline(
    bin_g: FeatureGraph,
    src_g: FeatureGraph,
    *,
    weights: WeightVector | None = None,
    inline_model: InlineModel | None = None,
    whitelist: WhitelistConfig | None = None,
    opts: MatchOptions = MatchOptions(),
    truth: dict[str, str] | None = None,
) -> MatchReport:
    """Whole pipeline: whitelists, pseudo-inline synthesis, matching, and
    (when ground truth is supplied) scoring."""
    if whitelist is not None:
        bin_g = apply_whitelists(bin_g, whitelist)
        src_g = apply_whitelists(src_g, whitelist)
    if inline_model is not None:
        decisions = predict_all(src_g, inline_model)
        src_g = synthesize_pseudo_inlined(src_g, decisions)
    report = match(bin_g, src_g, weights, opts)
    if truth is not None:
        report.tallies = score_against_ground_truth(report, truth)
    return report


# ---------------------------------------------------------------------------
# report io


def report_to_json_doc(r: MatchReport) -> dict[str, Any]:
    labels: dict[str, Any] = {}
    counts = {LABEL_MATCHED: 0, LABEL_MULTI: 0, LABEL_UNMATCHED: 0}
    for bid in sorted(r.labels):
        lab = r.labels[bid]
        counts[lab.kind] += 1
        obj: dict[str, Any] = {"label": lab.kind}
        if lab.source is not None:
            obj["source"] = lab.source
        if lab.candidates:
            obj["candidates"] = sorted(lab.candidates)
        if lab.weight is not None:
            obj["weight"] = lab.weight
        labels[bid] = obj
    doc: dict[str, Any] = {
        "similarity": r.similarity,
        "iterations": r.iterations,
        "labels": labels,
        "counts": {
            "functions": len(r.labels),
            "matched": counts[LABEL_MATCHED],
            "multi": counts[LABEL_MULTI],
            "unmatched": counts[LABEL_UNMATCHED],
        },
        "avg_assigned_weight": r.avg_assigned_weight,
        "trace": [[[b, s] for b, s in snap] for snap in r.trace],
        "pseudo_origins": {
            k: list(v) for k, v in sorted(r.pseudo_origins.items())
        },
    }
    if r.tallies is not None:
        doc["tallies"] = {
            "c_matched": r.tallies.c_matched,
            "ic_matched": r.tallies.ic_matched,
            "multi": r.tallies.multi,
            "unmatched": r.tallies.unmatched,
            "total": r.tallies.total,
        }
    return doc


def report_from_json_doc(doc: Any) -> MatchReport:
    if not isinstance(doc, dict):
        raise MatchError("report document must be an object")
    try:
        labels: dict[str, Label] = {}
        for bid, obj in doc["labels"].items():
            labels[bid] = Label(
                kind=obj["label"],
                source=obj.get("source"),
                candidates=tuple(obj.get("candidates", ())),
                weight=obj.get("weight"),
            )
        tallies = None
        if "tallies" in doc:
            t = doc["tallies"]
            tallies = Tallies(
                c_matched=t["c_matched"],
                ic_matched=t["ic_matched"],
                multi=t["multi"],
                unmatched=t["unmatched"],
                total=t["total"],
            )
        return MatchReport(
            similarity=doc["similarity"],
            iterations=doc["iterations"],
            labels=labels,
            trace=tuple(
                tuple((b, s) for b, s in snap) for snap in doc.get("trace", [])
            ),
            pseudo_origins={
                k: (v[0], v[1]) for k, v in doc.get("pseudo_origins", {}).items()
            },
            avg_assigned_weight=doc.get("avg_assigned_weight"),
            tallies=tallies,
        )
    except (KeyError, TypeError, IndexError) as e:
        raise MatchError(f"malformed report document: {e}") from None


def save_report(path: str, r: MatchReport) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report_to_json_doc(r), fh, indent=2, ensure_ascii=False)
        fh.write("\n")


def load_report(path: str) -> MatchReport:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise MatchError(f"not valid JSON: {e}") from None
    return report_from_json_doc(doc)
