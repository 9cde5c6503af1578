"""Inlining prediction and pseudo-inlined function synthesis.

The predictor is a small additive rule model over the six source-only
boolean properties: each rule adds its score when its feature equals its
polarity; a function is predicted inline-prone when the total exceeds the
threshold.  For every call edge whose callee is predicted inline-prone a
pseudo-inlined variant of the caller is synthesized (caller and callee
features merged) and added to the source graph as an extra match target.
Originals are kept; a compiler that did NOT inline still finds them.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Any

from .graph import (
    PREDICTIVE_FIELDS,
    SOURCE,
    FeatureGraph,
    FunctionEntry,
    MatchingFeatures,
    PredictiveFeatures,
)

INLINE_ID_SEPARATOR = "+inl+"


class InlineError(ValueError):
    pass


@dataclass(frozen=True)
class InlineRule:
    feature: str
    polarity: bool
    score: float


@dataclass(frozen=True)
class InlineModel:
    base: float = 0.0
    threshold: float = 0.0
    rules: tuple[InlineRule, ...] = ()

    def __post_init__(self) -> None:
        for rule in self.rules:
            if rule.feature not in PREDICTIVE_FIELDS:
                raise InlineError(f"unknown predictive feature {rule.feature!r}")


def score_function(p: PredictiveFeatures, m: InlineModel) -> float:
    total = m.base
    for rule in m.rules:
        if getattr(p, rule.feature) == rule.polarity:
            total += rule.score
    return total


def predicts_inline(p: PredictiveFeatures, m: InlineModel) -> bool:
    return score_function(p, m) > m.threshold


def predict_all(g: FeatureGraph, m: InlineModel) -> dict[str, bool]:
    """One decision per function that carries predictive features.

    Functions without them (including pseudo-inlined ones) are implicitly
    not inline-prone.
    """
    if g.side != SOURCE:
        raise InlineError("inlining is predicted on source graphs only")
    out: dict[str, bool] = {}
    for name in sorted(g.functions):
        entry = g.functions[name]
        if entry.predictive is None or entry.is_pseudo:
            continue
        out[name] = predicts_inline(entry.predictive, m)
    return out


def merge_inlined_features(
    caller: MatchingFeatures, callee_name: str, callee: MatchingFeatures
) -> MatchingFeatures:
    """Features of 'caller with callee folded in': constants and libcalls
    union, the inlined call edge is replaced by the callee's own callees,
    callers and argument count stay the caller's."""
    return MatchingFeatures(
        strings=caller.strings | callee.strings,
        ints=caller.ints | callee.ints,
        libcalls=caller.libcalls | callee.libcalls,
        callers=caller.callers,
        callees=(caller.callees - {callee_name}) | callee.callees,
        num_args=caller.num_args,
    )


def pseudo_inline_id(caller: str, callee: str, existing: set[str]) -> str:
    base = f"{caller}{INLINE_ID_SEPARATOR}{callee}"
    pid = base
    n = 2
    while pid in existing:  # user ids could already spell the synthetic name
        pid = f"{base}#{n}"
        n += 1
    return pid


def synthesize_pseudo_inlined(g: FeatureGraph, decisions: dict[str, bool]) -> FeatureGraph:
    """Add one pseudo-inlined variant per (caller, callee) call edge whose
    callee is predicted inline-prone.  Depth 1: pseudo functions are never
    themselves inlined into anything, and self-call edges are skipped."""
    if g.side != SOURCE:
        raise InlineError("pseudo-inlined functions exist on source graphs only")
    functions = dict(g.functions)
    for caller_name in sorted(g.functions):
        caller = g.functions[caller_name]
        if caller.is_pseudo:
            continue
        for callee_name in sorted(caller.features.callees):
            if callee_name == caller_name:
                continue
            callee = g.functions[callee_name]
            if callee.is_pseudo or not decisions.get(callee_name, False):
                continue
            pid = pseudo_inline_id(caller_name, callee_name, set(functions))
            functions[pid] = FunctionEntry(
                features=merge_inlined_features(
                    caller.features, callee_name, callee.features
                ),
                predictive=None,
                pseudo_origin=(caller_name, callee_name),
            )
    return FeatureGraph(side=SOURCE, functions=functions)


# ---------------------------------------------------------------------------
# model io


def _real(value: Any, what: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise InlineError(f"{what} must be a number")
    return float(value)


def model_from_json_doc(doc: Any) -> InlineModel:
    if not isinstance(doc, dict):
        raise InlineError("inline model document must be an object")
    unknown = set(doc) - {"base", "threshold", "rules"}
    if unknown:
        raise InlineError(f"unknown inline model keys: {sorted(unknown)}")
    raw_rules = doc.get("rules", [])
    if not isinstance(raw_rules, list):
        raise InlineError("inline model rules must be a list")
    rules = []
    for raw in raw_rules:
        if not isinstance(raw, dict) or set(raw) != {"feature", "polarity", "score"}:
            raise InlineError("each rule needs feature/polarity/score and nothing else")
        if not isinstance(raw["polarity"], bool):
            raise InlineError("rule polarity must be a boolean")
        rules.append(
            InlineRule(
                feature=str(raw["feature"]),
                polarity=raw["polarity"],
                score=_real(raw["score"], "rule score"),
            )
        )
    return InlineModel(
        base=_real(doc.get("base", 0.0), "base"),
        threshold=_real(doc.get("threshold", 0.0), "threshold"),
        rules=tuple(rules),
    )


def model_to_json_doc(m: InlineModel) -> dict[str, Any]:
    return {
        "base": m.base,
        "threshold": m.threshold,
        "rules": [
            {"feature": r.feature, "polarity": r.polarity, "score": r.score}
            for r in m.rules
        ],
    }


def load_model(path: str) -> InlineModel:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise InlineError(f"not valid JSON: {e}") from None
    return model_from_json_doc(doc)


def save_model(path: str, m: InlineModel) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_json_doc(m), fh, indent=2)
        fh.write("\n")
