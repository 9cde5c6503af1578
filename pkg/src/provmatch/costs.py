"""Per-feature costs and weighted pair scores.

A candidate pair (binary function, source function) gets one cost in [0, 1]
per feature.  Set features use an asymmetric variant of Jaccard distance
that deliberately prices feature REMOVAL (the common direction under
optimizing compilers) below feature ADDITION:

* if the binary set is a strict subset of the source set, the cost is the
  fraction of source elements the binary is missing;
* otherwise it is the fraction of binary elements the source does not have;
* two empty sets cost 1: a pair sharing no features at all must stay
  eligible for the no-match sentinel weight.

The pair weight is the coefficient-weighted sum of the active feature costs.
When every active cost is 1 the pair is declared unmatchable and gets the
sentinel MAX_WEIGHT, which is strictly larger than any attainable weighted
sum (sum of active coefficients, plus one).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import AbstractSet, Any, Hashable

from .graph import VARIADIC, VARIADIC_ARG_EQUIVALENT, GraphError

# Canonical feature order; every iteration over features follows it.
FEATURES = ("strings", "ints", "libcalls", "callers", "callees", "num_args")

# Features compared before any call-graph information exists (iteration 0).
BOOTSTRAP_FEATURES = frozenset(("strings", "ints", "libcalls", "num_args"))
ALL_FEATURES = frozenset(FEATURES)

# Config-file key per feature coefficient.  cfg_branches is accepted for
# compatibility but never applied: no control-flow feature is extracted.
_CONFIG_KEYS = {
    "string_constants": "strings",
    "integer_constants": "ints",
    "library_calls": "libcalls",
    "fcg_callers": "callers",
    "fcg_callees": "callees",
    "num_function_args": "num_args",
    "cfg_branches": None,
}


@dataclass(frozen=True)
class WeightVector:
    """Per-feature coefficients for the weighted cost sum."""

    strings: float = 1.469
    ints: float = 0.6315
    libcalls: float = 0.2828
    callers: float = 2.9293
    callees: float = 2.9293
    num_args: float = 0.9296
    cfg_branches: float = 0.0002  # accepted, never applied

    def coefficient(self, feature: str) -> float:
        return float(getattr(self, feature))

    def max_weight(self, active: AbstractSet[str] = ALL_FEATURES) -> float:
        """Sentinel weight for unmatchable pairs under the given active set.

        Strictly exceeds every attainable weighted sum, and is recomputed
        whenever the active set changes.
        """
        return sum(self.coefficient(f) for f in FEATURES if f in active) + 1.0


@dataclass(frozen=True)
class CostVector:
    """Feature costs for one candidate pair plus the active-feature mask."""

    strings: float = 0.0
    ints: float = 0.0
    libcalls: float = 0.0
    callers: float = 0.0
    callees: float = 0.0
    num_args: float = 0.0
    active: frozenset[str] = ALL_FEATURES

    def cost(self, feature: str) -> float:
        return float(getattr(self, feature))

    def as_tuple(self) -> tuple[float, ...]:
        return tuple(self.cost(f) for f in FEATURES)


def standard_jaccard(b: AbstractSet[Hashable], s: AbstractSet[Hashable]) -> float:
    """Plain Jaccard similarity; both-empty pairs count as identical (1)."""
    if not b and not s:
        return 1.0
    return len(b & s) / len(b | s)


def set_feature_cost_with_branch(
    b: AbstractSet[Hashable], s: AbstractSet[Hashable]
) -> tuple[float, str]:
    """Asymmetric set cost plus which rule branch produced it.

    The branch tag exists so tests can verify branch membership directly
    instead of inferring it from numerically coincident values.
    """
    if not b and not s:
        return 1.0, "both-empty"
    if b < s:
        return len(s - b) / len(s), "strict-subset"
    return len(b - s) / len(b), "otherwise"


def set_feature_cost(b: AbstractSet[Hashable], s: AbstractSet[Hashable]) -> float:
    return set_feature_cost_with_branch(b, s)[0]


def _effective_args(value: int | str) -> int:
    return VARIADIC_ARG_EQUIVALENT if value == VARIADIC else int(value)


def arg_cost(b: int | str, s: int | str) -> float:
    """0 when the argument counts agree, 1 otherwise.  A variadic marker is
    compared as 6 (integer argument registers on x86-64)."""
    return 0.0 if _effective_args(b) == _effective_args(s) else 1.0


def pair_weight(cv: CostVector, wv: WeightVector) -> float:
    """Weighted sum of the active costs, or MAX_WEIGHT when all of them are 1.

    Inactive feature costs are ignored entirely.  The summation follows the
    canonical feature order so results are bit-reproducible.
    """
    total = 0.0
    all_ones = True
    for f in FEATURES:
        if f not in cv.active:
            continue
        c = cv.cost(f)
        total += wv.coefficient(f) * c
        if c != 1.0:
            all_ones = False
    if all_ones:
        return wv.max_weight(cv.active)
    return total


# ---------------------------------------------------------------------------
# weight config io


def weights_from_json_doc(doc: Any) -> WeightVector:
    if not isinstance(doc, dict):
        raise GraphError("weights document must be an object")
    unknown = set(doc) - set(_CONFIG_KEYS)
    if unknown:
        raise GraphError(f"unknown weight keys: {sorted(unknown)}")
    kwargs: dict[str, float] = {}
    for key, value in doc.items():
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise GraphError(f"weight {key!r} must be a number")
        if value < 0:
            raise GraphError(f"weight {key!r} must be non-negative")
        attr = _CONFIG_KEYS[key]
        kwargs[attr if attr is not None else "cfg_branches"] = float(value)
    return WeightVector(**kwargs)


def weights_to_json_doc(wv: WeightVector) -> dict[str, float]:
    return {
        "string_constants": wv.strings,
        "integer_constants": wv.ints,
        "library_calls": wv.libcalls,
        "fcg_callers": wv.callers,
        "fcg_callees": wv.callees,
        "num_function_args": wv.num_args,
        "cfg_branches": wv.cfg_branches,
    }


def load_weights(path: str) -> WeightVector:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise GraphError(f"not valid JSON: {e}") from None
    return weights_from_json_doc(doc)


def save_weights(path: str, wv: WeightVector) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(weights_to_json_doc(wv), fh, indent=2)
        fh.write("\n")
