"""Synthetic project generator and compiler-effect simulator.

generate_source builds a random source-side feature graph: a call graph
leaning toward a DAG with a heavy-tailed degree distribution, plus string/
integer/libcall features drawn from configurable pools and per-function
boolean properties.  compile_graph applies an optimization profile to it and
produces the matching stripped-binary-side graph together with exact ground
truth.  Everything is driven by explicit seeds; identical inputs give
identical outputs, byte for byte.

Transforms, in order: (1) inlining of call edges whose callee satisfies the
profile's hidden rule, taken with the profile's probability (a callee whose
every call site was inlined disappears); (2) libcall substitution along the
profile's table; (3) compiler-added strings; (4) integer-constant drops;
(5) argument-count corruption; (6) insertion of compiler-own functions;
(7) renaming of every surviving function to a synthetic address.
"""

from __future__ import annotations

import json
import os
import random
from dataclasses import asdict, dataclass, replace
from typing import Any

from .formats import from_json, to_json
from .graph import (
    BINARY,
    PREDICTIVE_FIELDS,
    SOURCE,
    VARIADIC,
    VARIADIC_ARG_EQUIVALENT,
    FeatureGraph,
    FunctionEntry,
    GraphError,
    MatchingFeatures,
    PredictiveFeatures,
    normalize,
)
from .whitelist import substitution_groups

DEFAULT_LIBCALLS = (
    "printf", "puts", "vsprintf", "snprintf", "fprintf",
    "malloc", "calloc", "realloc", "free",
    "memcpy", "memmove", "memset", "memcmp",
    "strlen", "strcmp", "strncmp", "strcpy", "strncpy", "strchr", "strstr",
    "fopen", "fclose", "fread", "fwrite", "fseek",
    "open", "close", "read", "write", "lseek",
    "exit", "abort", "atoi", "strtol", "getenv",
    "qsort", "bsearch", "time", "rand", "isspace",
)

DEFAULT_INSERTED_FUNCTIONS = (
    "__stack_chk_fail",
    "_init",
    "_fini",
    "frame_dummy",
    "register_tm_clones",
    "deregister_tm_clones",
)


@dataclass(frozen=True)
class GraphShape:
    """Knobs for the synthetic source generator."""

    string_pool: int = 400
    int_pool: int = 240
    libcalls: tuple[str, ...] = DEFAULT_LIBCALLS
    mean_strings: float = 2.2
    mean_ints: float = 1.8
    mean_libcalls: float = 1.6
    mean_callees: float = 2.3
    back_edge_prob: float = 0.06
    unique_strings: bool = False
    p_static: float = 0.30
    p_extern: float = 0.20
    p_virtual: float = 0.06
    p_nested: float = 0.05
    p_variadic: float = 0.08
    p_recursive: float = 0.10


@dataclass(frozen=True)
class InlineRuleConfig:
    """Hidden ground-truth inlining rule: a conjunction over the predictive
    booleans.  The trained predictor never sees this, only its outcomes."""

    requires: tuple[tuple[str, bool], ...] = (
        ("static", True),
        ("recursive", False),
        ("variadic", False),
    )

    def __post_init__(self) -> None:
        for feature, _ in self.requires:
            if feature not in PREDICTIVE_FIELDS:
                raise GraphError(f"unknown predictive feature in inline rule: {feature!r}")

    def holds(self, p: PredictiveFeatures) -> bool:
        return all(getattr(p, feature) == value for feature, value in self.requires)


@dataclass(frozen=True)
class SimProfile:
    seed: int = 0
    inline_rule: InlineRuleConfig = InlineRuleConfig()
    inline_probability: float = 0.0
    libcall_substitutions: tuple[tuple[str, str], ...] = ()
    string_insertion_rate: float = 0.0
    int_drop_rate: float = 0.0
    arg_corruption_rate: float = 0.36
    insert_compiler_functions: tuple[str, ...] = ()
    feature_perturbation_rate: float = 0.0

    def __post_init__(self) -> None:
        for name in (
            "inline_probability",
            "string_insertion_rate",
            "int_drop_rate",
            "arg_corruption_rate",
            "feature_perturbation_rate",
        ):
            rate = getattr(self, name)
            if not 0.0 <= rate <= 1.0:
                raise GraphError(f"{name} must be in [0, 1], got {rate}")


def identity_profile(seed: int = 0) -> SimProfile:
    """No transforms at all beyond renaming: the binary is the source."""
    return SimProfile(seed=seed, arg_corruption_rate=0.0)


def o2_profile(seed: int = 0) -> SimProfile:
    """Moderate optimization: some inlining, printf folding, light noise."""
    return SimProfile(
        seed=seed,
        inline_probability=0.75,
        libcall_substitutions=(("printf", "puts"),),
        string_insertion_rate=0.06,
        int_drop_rate=0.10,
        arg_corruption_rate=0.36,
        insert_compiler_functions=DEFAULT_INSERTED_FUNCTIONS,
        feature_perturbation_rate=0.05,
    )


def o3_profile(seed: int = 0) -> SimProfile:
    """Aggressive optimization: the same hidden inline rule taken more often,
    more constant folding and noise."""
    return SimProfile(
        seed=seed,
        inline_probability=0.9,
        libcall_substitutions=(("printf", "puts"), ("printf", "vsprintf")),
        string_insertion_rate=0.09,
        int_drop_rate=0.15,
        arg_corruption_rate=0.36,
        insert_compiler_functions=DEFAULT_INSERTED_FUNCTIONS,
        feature_perturbation_rate=0.08,
    )


PROFILE_PRESETS = {
    "identity": identity_profile,
    "o2": o2_profile,
    "o3": o3_profile,
}


@dataclass(frozen=True)
class SimPair:
    source: FeatureGraph
    binary: FeatureGraph
    truth: dict[str, str]
    inlined_edges: tuple[tuple[str, str], ...]
    profile: SimProfile


# ---------------------------------------------------------------------------
# source generation


def _int_pool_values(size: int) -> list[int]:
    out = []
    for j in range(size):
        if j % 5 == 4:
            out.append(-(j + 2))
        elif j % 7 == 3:
            out.append((j + 1) * 4096)
        else:
            out.append(j + 2)
    return out


def _draw_count(rng: random.Random, mean: float, cap: int = 8) -> int:
    if mean <= 0:
        return 0
    return min(cap, int(rng.expovariate(1.0 / mean)))


def generate_source(seed: int, n_functions: int, shape: GraphShape = GraphShape()) -> FeatureGraph:
    if n_functions < 1:
        raise GraphError("n_functions must be at least 1")
    rng = random.Random(seed)
    names = [f"fn{seed}_{i:04d}" for i in range(n_functions)]
    int_pool = _int_pool_values(shape.int_pool)

    predictive: dict[str, PredictiveFeatures] = {}
    for name in names:
        predictive[name] = PredictiveFeatures(
            static=rng.random() < shape.p_static,
            extern=rng.random() < shape.p_extern,
            virtual=rng.random() < shape.p_virtual,
            nested=rng.random() < shape.p_nested,
            variadic=rng.random() < shape.p_variadic,
            recursive=rng.random() < shape.p_recursive,
        )

    # call edges: mostly forward (DAG-leaning), heavy-ish out-degree tail,
    # targets preferentially attached to already-popular functions
    callees: dict[str, set[str]] = {name: set() for name in names}
    indegree = [0] * n_functions
    for i, name in enumerate(names):
        k = rng.choices((0, 1, 2, 3, 4, 5, 6), weights=(8, 22, 26, 20, 12, 8, 4))[0]
        if rng.random() < 0.06:
            k += int(rng.paretovariate(1.5))
        k = min(k, n_functions - 1)
        for _ in range(k):
            if i < n_functions - 1 and rng.random() >= shape.back_edge_prob:
                pool = range(i + 1, n_functions)
            else:
                pool = range(n_functions)
            weights = [indegree[j] + 1 for j in pool]
            j = rng.choices(list(pool), weights=weights)[0]
            if j == i or names[j] in callees[name]:
                continue
            callees[name].add(names[j])
            indegree[j] += 1
        # a singleton graph has no call edges, not even a self-loop
        if predictive[name].recursive and n_functions > 1:
            callees[name].add(name)

    functions: dict[str, FunctionEntry] = {}
    for i, name in enumerate(names):
        k_str = _draw_count(rng, shape.mean_strings)
        strings = {f"str_{idx:04d}" for idx in rng.sample(range(shape.string_pool), k_str)}
        if shape.unique_strings:
            strings.add(f"uniq::{name}")
        k_int = _draw_count(rng, shape.mean_ints)
        ints = set(rng.sample(int_pool, min(k_int, len(int_pool))))
        k_lib = _draw_count(rng, shape.mean_libcalls, cap=6)
        libcalls = set(rng.sample(shape.libcalls, min(k_lib, len(shape.libcalls))))
        p = predictive[name]
        num_args: int | str
        if p.variadic:
            num_args = VARIADIC
        else:
            num_args = rng.choices((0, 1, 2, 3, 4, 5, 6), weights=(10, 22, 26, 18, 12, 8, 4))[0]
        functions[name] = FunctionEntry(
            features=MatchingFeatures(
                strings=frozenset(strings),
                ints=frozenset(ints),
                libcalls=frozenset(libcalls),
                callers=frozenset(),
                callees=frozenset(callees[name]),
                num_args=num_args,
            ),
            predictive=p,
        )
    return normalize(SOURCE, functions)


# ---------------------------------------------------------------------------
# compilation


def compile_graph(src: FeatureGraph, profile: SimProfile) -> SimPair:
    if src.side != SOURCE:
        raise GraphError("compile_graph takes a source-side graph")
    if any(e.is_pseudo for e in src.functions.values()):
        raise GraphError("compile_graph takes a raw source graph without pseudo functions")
    rng = random.Random(profile.seed)
    names = sorted(src.functions)

    # (1) inlining
    candidates: list[tuple[str, str]] = []
    for caller in names:
        for callee in sorted(src.functions[caller].features.callees):
            if callee == caller:
                continue
            p = src.functions[callee].predictive
            if p is not None and profile.inline_rule.holds(p):
                candidates.append((caller, callee))
    inlined: list[tuple[str, str]] = []
    as_inliner: set[str] = set()
    as_inlinee: set[str] = set()
    for caller, callee in candidates:
        take = rng.random() < profile.inline_probability
        # depth-1 consistency: an absorbed function cannot absorb, and an
        # absorbing function cannot itself be absorbed
        if take and caller not in as_inlinee and callee not in as_inliner:
            inlined.append((caller, callee))
            as_inliner.add(caller)
            as_inlinee.add(callee)

    call_sites: dict[str, set[str]] = {name: set() for name in names}
    for caller in names:
        for callee in src.functions[caller].features.callees:
            if callee != caller:
                call_sites[callee].add(caller)
    inlined_set = set(inlined)
    removed = {
        callee
        for callee in names
        if call_sites[callee]
        and callee not in src.functions[callee].features.callees
        and all((c, callee) in inlined_set for c in call_sites[callee])
    }

    surviving = [n for n in names if n not in removed]
    strings: dict[str, set[str]] = {}
    ints: dict[str, set[int]] = {}
    libcalls: dict[str, set[str]] = {}
    callees: dict[str, set[str]] = {}
    num_args: dict[str, int] = {}
    for name in surviving:
        f = src.functions[name].features
        s, iv, lc = set(f.strings), set(f.ints), set(f.libcalls)
        ce = set(f.callees)
        for caller, callee in inlined:
            if caller != name:
                continue
            cf = src.functions[callee].features
            s |= cf.strings
            iv |= cf.ints
            lc |= cf.libcalls
            ce.discard(callee)
            ce |= cf.callees
        ce -= removed
        strings[name], ints[name], libcalls[name], callees[name] = s, iv, lc, ce
        args = f.num_args
        num_args[name] = VARIADIC_ARG_EQUIVALENT if args == VARIADIC else int(args)

    # (2) libcall substitution: the compiler rewrites toward the
    # lexicographically greatest member of each substitution group
    rewrite: dict[str, str] = {}
    for group in substitution_groups(profile.libcall_substitutions):
        top = max(group)
        for member in group:
            rewrite[member] = top
    for name in surviving:
        libcalls[name] = {rewrite.get(x, x) for x in libcalls[name]}

    # (3) compiler-added strings
    for name in surviving:
        if rng.random() < profile.string_insertion_rate:
            strings[name].add(f"__file_{rng.randrange(64)}.c")

    # (4) integer-constant drops
    for name in surviving:
        for v in sorted(ints[name]):
            if rng.random() < profile.int_drop_rate:
                ints[name].discard(v)

    # (5) argument-count corruption (extraction noise); a clamped no-op draw
    # is nudged so the corrupted fraction tracks the configured rate
    for name in surviving:
        if rng.random() < profile.arg_corruption_rate:
            delta = rng.choice((1, -1, -2))
            new = min(255, max(0, num_args[name] + delta))
            if new == num_args[name]:
                new = num_args[name] + 1 if num_args[name] < 255 else num_args[name] - 1
            num_args[name] = new

    # feature noise, removal-biased
    for name in surviving:
        if rng.random() < profile.feature_perturbation_rate:
            if rng.random() < 0.75:
                pools = [
                    (label, pool)
                    for label, pool in (("s", strings[name]), ("i", ints[name]), ("l", libcalls[name]))
                    if pool
                ]
                if pools:
                    _, pool = rng.choice(pools)
                    pool.discard(rng.choice(sorted(pool)))
            else:
                strings[name].add(f"__pad_{rng.randrange(64)}")

    # (6) compiler-own functions, called from a sample of real functions
    inserted = list(profile.insert_compiler_functions)
    inserted_callers: dict[str, set[str]] = {f: set() for f in inserted}
    for fname in inserted:
        for name in surviving:
            if rng.random() < 0.3:
                callees[name].add(fname)
                inserted_callers[fname].add(name)

    # (7) rename survivors to synthetic addresses
    addr = 0x401000
    rename: dict[str, str] = {}
    for name in surviving:
        rename[name] = f"0x{addr:06x}"
        addr += rng.randrange(0x10, 0x200, 0x10)
    for fname in inserted:
        rename[fname] = fname  # toolchain names survive stripping via dynsym

    bin_functions: dict[str, FunctionEntry] = {}
    truth: dict[str, str] = {}
    for name in surviving:
        bid = rename[name]
        truth[bid] = name
        bin_functions[bid] = FunctionEntry(
            features=MatchingFeatures(
                strings=frozenset(strings[name]),
                ints=frozenset(ints[name]),
                libcalls=frozenset(libcalls[name]),
                callers=frozenset(),
                callees=frozenset(rename[c] for c in callees[name]),
                num_args=num_args[name],
            )
        )
    for fname in inserted:
        truth[fname] = fname
        bin_functions[fname] = FunctionEntry(
            features=MatchingFeatures(
                callers=frozenset(rename[c] for c in inserted_callers[fname]),
                num_args=0,
            )
        )

    binary = normalize(BINARY, bin_functions)
    return SimPair(
        source=src,
        binary=binary,
        truth=truth,
        inlined_edges=tuple(sorted(inlined)),
        profile=profile,
    )


def simulate(
    seed: int, n_functions: int, shape: GraphShape = GraphShape(), profile: SimProfile | None = None
) -> SimPair:
    """generate_source + compile_graph with a shared seed."""
    if profile is None:
        profile = identity_profile(seed)
    return compile_graph(generate_source(seed, n_functions, shape), profile)


# ---------------------------------------------------------------------------
# profile / pair serialization


def profile_to_json_doc(p: SimProfile) -> dict[str, Any]:
    return {
        "seed": p.seed,
        "inline_rule": {"requires": [[f, v] for f, v in p.inline_rule.requires]},
        "inline_probability": p.inline_probability,
        "libcall_substitutions": [list(pair) for pair in p.libcall_substitutions],
        "string_insertion_rate": p.string_insertion_rate,
        "int_drop_rate": p.int_drop_rate,
        "arg_corruption_rate": p.arg_corruption_rate,
        "insert_compiler_functions": list(p.insert_compiler_functions),
        "feature_perturbation_rate": p.feature_perturbation_rate,
    }


def profile_from_json_doc(doc: Any) -> SimProfile:
    if not isinstance(doc, dict):
        raise GraphError("profile document must be an object")
    known = set(profile_to_json_doc(SimProfile()))
    unknown = set(doc) - known
    if unknown:
        raise GraphError(f"unknown profile keys: {sorted(unknown)}")
    rule = InlineRuleConfig()
    if "inline_rule" in doc:
        rule = InlineRuleConfig(
            requires=tuple((f, bool(v)) for f, v in doc["inline_rule"]["requires"])
        )
    base = SimProfile(seed=int(doc.get("seed", 0)), inline_rule=rule)
    return replace(
        base,
        inline_probability=float(doc.get("inline_probability", 0.0)),
        libcall_substitutions=tuple(
            (a, b) for a, b in doc.get("libcall_substitutions", [])
        ),
        string_insertion_rate=float(doc.get("string_insertion_rate", 0.0)),
        int_drop_rate=float(doc.get("int_drop_rate", 0.0)),
        arg_corruption_rate=float(doc.get("arg_corruption_rate", 0.36)),
        insert_compiler_functions=tuple(doc.get("insert_compiler_functions", [])),
        feature_perturbation_rate=float(doc.get("feature_perturbation_rate", 0.0)),
    )


def emit_pair(sp: SimPair, out_dir: str, generator: dict[str, Any] | None = None) -> None:
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "source.json"), "w", encoding="utf-8") as fh:
        fh.write(to_json(sp.source))
    with open(os.path.join(out_dir, "binary.json"), "w", encoding="utf-8") as fh:
        fh.write(to_json(sp.binary))
    with open(os.path.join(out_dir, "truth.json"), "w", encoding="utf-8") as fh:
        json.dump(dict(sorted(sp.truth.items())), fh, indent=2, ensure_ascii=False)
        fh.write("\n")
    with open(os.path.join(out_dir, "inlined.json"), "w", encoding="utf-8") as fh:
        json.dump({"inlined_edges": [list(e) for e in sp.inlined_edges]}, fh, indent=2)
        fh.write("\n")
    with open(os.path.join(out_dir, "profile.json"), "w", encoding="utf-8") as fh:
        doc = {"profile": profile_to_json_doc(sp.profile), "generator": generator}
        json.dump(doc, fh, indent=2, ensure_ascii=False)
        fh.write("\n")


def load_pair(in_dir: str) -> SimPair:
    def read(name: str) -> str:
        with open(os.path.join(in_dir, name), encoding="utf-8") as fh:
            return fh.read()

    source = from_json(read("source.json"))
    binary = from_json(read("binary.json"))
    truth_doc = json.loads(read("truth.json"))
    if not isinstance(truth_doc, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in truth_doc.items()
    ):
        raise GraphError("truth.json must map binary ids to source names")
    inlined_doc = json.loads(read("inlined.json"))
    edges = tuple((a, b) for a, b in inlined_doc.get("inlined_edges", []))
    profile_doc = json.loads(read("profile.json"))
    profile = profile_from_json_doc(profile_doc.get("profile", {}))
    return SimPair(
        source=source, binary=binary, truth=truth_doc, inlined_edges=edges, profile=profile
    )


def shape_to_json_doc(s: GraphShape) -> dict[str, Any]:
    doc = asdict(s)
    doc["libcalls"] = list(s.libcalls)
    return doc


def shape_from_json_doc(doc: Any) -> GraphShape:
    if not isinstance(doc, dict):
        raise GraphError("shape document must be an object")
    unknown = set(doc) - set(asdict(GraphShape()))
    if unknown:
        raise GraphError(f"unknown shape keys: {sorted(unknown)}")
    kwargs = dict(doc)
    if "libcalls" in kwargs:
        kwargs["libcalls"] = tuple(kwargs["libcalls"])
    return GraphShape(**kwargs)
