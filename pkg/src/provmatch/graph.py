"""Feature-graph data model.

A feature graph is one side of a provenance comparison: either the functions
recovered from a stripped binary or the functions extracted from a source
tree.  Each function carries the feature sets the matcher compares (string
constants, integer constants, library calls, call-graph neighbours, argument
count) and, on the source side only, the boolean properties used to predict
compiler inlining.

Graphs are immutable.  Construction helpers return new graphs; nothing here
mutates in place.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

SOURCE = "source"
BINARY = "binary"
SIDES = (SOURCE, BINARY)

# Marker for a variadic argument list.  Compared against fixed counts it is
# treated as 6 (the number of integer argument registers on x86-64).
VARIADIC = "variadic"
VARIADIC_ARG_EQUIVALENT = 6

MAX_NUM_ARGS = 255

# Integer constants too common to discriminate anything; dropped on ingest.
IGNORED_INT_CONSTANTS = frozenset({0, 1, -1})

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1

PREDICTIVE_FIELDS = ("static", "extern", "virtual", "nested", "variadic", "recursive")


@dataclass(frozen=True)
class PredictiveFeatures:
    """Source-only boolean properties that correlate with inlining."""

    static: bool = False
    extern: bool = False
    virtual: bool = False
    nested: bool = False
    variadic: bool = False
    recursive: bool = False

    def as_dict(self) -> dict[str, bool]:
        return {name: getattr(self, name) for name in PREDICTIVE_FIELDS}

    @classmethod
    def from_dict(cls, raw: dict[str, bool]) -> "PredictiveFeatures":
        unknown = set(raw) - set(PREDICTIVE_FIELDS)
        if unknown:
            raise ValueError(f"unknown predictive feature keys: {sorted(unknown)}")
        return cls(**{k: bool(v) for k, v in raw.items()})


@dataclass(frozen=True)
class MatchingFeatures:
    """The comparable features of one function."""

    strings: frozenset[str] = frozenset()
    ints: frozenset[int] = frozenset()
    libcalls: frozenset[str] = frozenset()
    callers: frozenset[str] = frozenset()
    callees: frozenset[str] = frozenset()
    num_args: int | str = 0


@dataclass(frozen=True)
class FunctionEntry:
    features: MatchingFeatures
    predictive: PredictiveFeatures | None = None
    # Set only on synthesized pseudo-inlined functions: (caller id, callee id).
    pseudo_origin: tuple[str, str] | None = None

    @property
    def is_pseudo(self) -> bool:
        return self.pseudo_origin is not None


@dataclass(frozen=True)
class FeatureGraph:
    side: str
    functions: dict[str, FunctionEntry] = field(default_factory=dict)

    def ids(self) -> tuple[str, ...]:
        return tuple(sorted(self.functions))

    def __len__(self) -> int:
        return len(self.functions)


def fn(
    *,
    strings: tuple[str, ...] | frozenset[str] = (),
    ints: tuple[int, ...] | frozenset[int] = (),
    libcalls: tuple[str, ...] | frozenset[str] = (),
    callers: tuple[str, ...] | frozenset[str] = (),
    callees: tuple[str, ...] | frozenset[str] = (),
    num_args: int | str = 0,
    predictive: PredictiveFeatures | None = None,
    pseudo_origin: tuple[str, str] | None = None,
) -> FunctionEntry:
    """Convenience constructor used by tests and the simulator."""
    return FunctionEntry(
        features=MatchingFeatures(
            strings=frozenset(strings),
            ints=frozenset(ints),
            libcalls=frozenset(libcalls),
            callers=frozenset(callers),
            callees=frozenset(callees),
            num_args=num_args,
        ),
        predictive=predictive,
        pseudo_origin=pseudo_origin,
    )


@dataclass(frozen=True)
class Violation:
    """One validation failure, naming the function and the rule broken."""

    function_id: str
    rule: str
    detail: str

    def __str__(self) -> str:
        return f"{self.function_id}: [{self.rule}] {self.detail}"


RULE_SIDE = "side"
RULE_EMPTY_ID = "empty-id"
RULE_INT_CONSTANTS = "int-constants"
RULE_INT_RANGE = "int-range"
RULE_NUM_ARGS = "num-args"
RULE_UNKNOWN_REF = "unknown-ref"
RULE_SYMMETRY = "edge-symmetry"
RULE_PSEUDO_REFERENCED = "pseudo-referenced"
RULE_PREDICTIVE_SIDE = "predictive-side"
RULE_PSEUDO_SIDE = "pseudo-side"


def _valid_num_args(value: int | str) -> bool:
    if value == VARIADIC:
        return True
    return isinstance(value, int) and not isinstance(value, bool) and 0 <= value <= MAX_NUM_ARGS


def validate(g: FeatureGraph) -> list[Violation]:
    """Check every structural invariant; return all violations found.

    An empty list means the graph is well formed.  Ingestion runs this after
    normalization and refuses graphs with any violation; tests construct raw
    graphs directly to exercise individual rules.
    """
    out: list[Violation] = []
    if g.side not in SIDES:
        out.append(Violation("", RULE_SIDE, f"side must be one of {SIDES}, got {g.side!r}"))

    pseudo_ids = {name for name, e in g.functions.items() if e.is_pseudo}

    for name in sorted(g.functions):
        entry = g.functions[name]
        f = entry.features
        if not name:
            out.append(Violation(name, RULE_EMPTY_ID, "function id must be non-empty"))
        bad = f.ints & IGNORED_INT_CONSTANTS
        if bad:
            out.append(
                Violation(name, RULE_INT_CONSTANTS, f"constants {sorted(bad)} must be filtered")
            )
        oob = [v for v in f.ints if not INT64_MIN <= v <= INT64_MAX]
        if oob:
            out.append(Violation(name, RULE_INT_RANGE, f"constants outside 64-bit range: {sorted(oob)}"))
        if not _valid_num_args(f.num_args):
            out.append(
                Violation(
                    name,
                    RULE_NUM_ARGS,
                    f"num_args must be 0..{MAX_NUM_ARGS} or {VARIADIC!r}, got {f.num_args!r}",
                )
            )
        for kind, refs in (("caller", f.callers), ("callee", f.callees)):
            for ref in sorted(refs):
                if ref not in g.functions:
                    out.append(Violation(name, RULE_UNKNOWN_REF, f"{kind} {ref!r} not in graph"))
                elif ref in pseudo_ids:
                    out.append(
                        Violation(
                            name,
                            RULE_PSEUDO_REFERENCED,
                            f"{kind} {ref!r} is pseudo-inlined and may not be referenced",
                        )
                    )
        if entry.predictive is not None and g.side != SOURCE:
            out.append(Violation(name, RULE_PREDICTIVE_SIDE, "predictive features on non-source side"))
        if entry.is_pseudo and g.side != SOURCE:
            out.append(Violation(name, RULE_PSEUDO_SIDE, "pseudo-inlined function on non-source side"))

    # Caller/callee symmetry.  Pseudo functions are exempt: they reference
    # real functions one-directionally and are match targets only.
    for name in sorted(g.functions):
        if name in pseudo_ids:
            continue
        f = g.functions[name].features
        for callee in sorted(f.callees):
            other = g.functions.get(callee)
            if other is None or callee in pseudo_ids:
                continue
            if name not in other.features.callers:
                out.append(
                    Violation(name, RULE_SYMMETRY, f"callee {callee!r} does not list {name!r} as caller")
                )
        for caller in sorted(f.callers):
            other = g.functions.get(caller)
            if other is None or caller in pseudo_ids:
                continue
            if name not in other.features.callees:
                out.append(
                    Violation(name, RULE_SYMMETRY, f"caller {caller!r} does not list {name!r} as callee")
                )
    return out


class GraphError(ValueError):
    """Raised when a document cannot be ingested as a valid feature graph."""


def _repair_symmetry(functions: dict[str, FunctionEntry]) -> dict[str, FunctionEntry]:
    """Union both directions of every declared edge between real functions.

    Pseudo functions keep their one-directional neighbour sets untouched and
    are never inserted into other functions' sets.
    """
    pseudo = {name for name, e in functions.items() if e.is_pseudo}
    callees: dict[str, set[str]] = {}
    callers: dict[str, set[str]] = {}
    for name, entry in functions.items():
        if name in pseudo:
            continue
        callees.setdefault(name, set()).update(entry.features.callees)
        for c in entry.features.callers:
            callees.setdefault(c, set()).add(name)
    for src, dsts in callees.items():
        for dst in dsts:
            callers.setdefault(dst, set()).add(src)

    out: dict[str, FunctionEntry] = {}
    for name, entry in functions.items():
        if name in pseudo:
            out[name] = entry
            continue
        f = entry.features
        out[name] = replace(
            entry,
            features=replace(
                f,
                callers=frozenset(callers.get(name, set())),
                callees=frozenset(callees.get(name, set())),
            ),
        )
    return out


def normalize(side: str, functions: dict[str, FunctionEntry]) -> FeatureGraph:
    """Build a validated graph from raw entries.

    Applies the ingest normalizations: the non-discriminating integer
    constants are dropped, an unknown callee already recorded as a libcall is
    dropped from the callee set (external call), and caller/callee symmetry
    is repaired by union.  Raises GraphError if violations remain afterwards.
    """
    cleaned: dict[str, FunctionEntry] = {}
    for name, entry in functions.items():
        f = entry.features
        ints = frozenset(f.ints) - IGNORED_INT_CONSTANTS
        callees = set(f.callees)
        for ref in list(callees):
            if ref not in functions:
                if ref in f.libcalls:
                    callees.discard(ref)
                else:
                    raise GraphError(
                        f"function {name!r}: callee {ref!r} is not in the graph and has no libcall fallback"
                    )
        for ref in f.callers:
            if ref not in functions:
                raise GraphError(f"function {name!r}: caller {ref!r} is not in the graph")
        cleaned[name] = replace(
            entry, features=replace(f, ints=ints, callees=frozenset(callees))
        )

    g = FeatureGraph(side=side, functions=_repair_symmetry(cleaned))
    problems = validate(g)
    if problems:
        listing = "; ".join(str(p) for p in problems[:10])
        raise GraphError(f"{len(problems)} validation failure(s): {listing}")
    return g


def replace_functions(g: FeatureGraph, functions: dict[str, FunctionEntry]) -> FeatureGraph:
    return FeatureGraph(side=g.side, functions=dict(functions))


def retag_side(g: FeatureGraph, side: str) -> FeatureGraph:
    """Return the graph re-labelled as the given side.

    Moving a graph to the binary side strips source-only payload (predictive
    features, pseudo markers) and re-runs normalization so the result obeys
    the binary-side invariants.
    """
    if side == g.side:
        return g
    funcs: dict[str, FunctionEntry] = {}
    for name, entry in g.functions.items():
        if side == BINARY:
            entry = replace(entry, predictive=None, pseudo_origin=None)
        funcs[name] = entry
    return normalize(side, funcs)
