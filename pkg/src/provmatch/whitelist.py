"""Compiler-effect whitelists.

Two independent mechanisms:

* libcall substitutions: unordered name pairs declaring that a compiler may
  rewrite one library call into another (printf -> puts being the classic
  case).  Applied by canonicalizing every member of a substitution group to
  its lexicographically least name, on both sides, so the rewrite can no
  longer produce a cost.

* compiler-inserted functions: function names the toolchain adds on its own
  (stack protector glue, init/fini scaffolding).  On binary graphs these are
  deleted outright, together with their edges and any libcall references to
  them.  Source graphs are left alone: the names simply do not occur there.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Any, Iterable

from .graph import BINARY, FeatureGraph, FunctionEntry, GraphError

DEFAULT_COMPILER_INSERTED = frozenset(
    {
        "__stack_chk_fail",
        "__stack_chk_fail_local",
        "_init",
        "_fini",
        "__libc_csu_init",
        "__libc_csu_fini",
        "frame_dummy",
        "register_tm_clones",
        "deregister_tm_clones",
    }
)


@dataclass(frozen=True)
class WhitelistConfig:
    libcall_substitutions: tuple[tuple[str, str], ...] = ()
    compiler_inserted_functions: frozenset[str] = frozenset()

    @classmethod
    def empty(cls) -> "WhitelistConfig":
        return cls()


def default_whitelist() -> WhitelistConfig:
    return WhitelistConfig(
        libcall_substitutions=(("printf", "puts"), ("printf", "vsprintf")),
        compiler_inserted_functions=DEFAULT_COMPILER_INSERTED,
    )


def substitution_groups(pairs: Iterable[tuple[str, str]]) -> list[set[str]]:
    """Transitive closure of the unordered substitution pairs."""
    parent: dict[str, str] = {}

    def find(x: str) -> str:
        parent.setdefault(x, x)
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in pairs:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
    groups: dict[str, set[str]] = {}
    for name in parent:
        groups.setdefault(find(name), set()).add(name)
    return list(groups.values())


def _canonical_map(pairs: Iterable[tuple[str, str]]) -> dict[str, str]:
    """Map every substitutable name to the least member of its group."""
    out: dict[str, str] = {}
    for members in substitution_groups(pairs):
        canon = min(members)
        for m in members:
            out[m] = canon
    return out


def apply_whitelists(g: FeatureGraph, w: WhitelistConfig) -> FeatureGraph:
    """Return a new graph with substitutions canonicalized and, on the binary
    side, compiler-inserted functions removed.  Idempotent."""
    canon = _canonical_map(w.libcall_substitutions)
    doomed = w.compiler_inserted_functions if g.side == BINARY else frozenset()

    functions: dict[str, FunctionEntry] = {}
    for name, entry in g.functions.items():
        if name in doomed:
            continue
        f = entry.features
        libcalls = frozenset(canon.get(x, x) for x in f.libcalls) - doomed
        functions[name] = replace(
            entry,
            features=replace(
                f,
                libcalls=libcalls,
                callers=f.callers - doomed,
                callees=f.callees - doomed,
            ),
        )
    return FeatureGraph(side=g.side, functions=functions)


def from_json_doc(doc: Any) -> WhitelistConfig:
    if not isinstance(doc, dict):
        raise GraphError("whitelist document must be an object")
    unknown = set(doc) - {"libcall_substitutions", "compiler_inserted_functions"}
    if unknown:
        raise GraphError(f"unknown whitelist keys: {sorted(unknown)}")
    pairs = doc.get("libcall_substitutions", [])
    if not isinstance(pairs, list) or not all(
        isinstance(p, list) and len(p) == 2 and all(isinstance(x, str) for x in p)
        for p in pairs
    ):
        raise GraphError("libcall_substitutions must be a list of name pairs")
    inserted = doc.get("compiler_inserted_functions", [])
    if not isinstance(inserted, list) or not all(isinstance(x, str) for x in inserted):
        raise GraphError("compiler_inserted_functions must be a list of names")
    return WhitelistConfig(
        libcall_substitutions=tuple((a, b) for a, b in pairs),
        compiler_inserted_functions=frozenset(inserted),
    )


def to_json_doc(w: WhitelistConfig) -> dict[str, Any]:
    return {
        "libcall_substitutions": sorted([sorted(p) for p in w.libcall_substitutions]),
        "compiler_inserted_functions": sorted(w.compiler_inserted_functions),
    }


def load_whitelist(path: str) -> WhitelistConfig:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise GraphError(f"not valid JSON: {e}") from None
    return from_json_doc(doc)


def save_whitelist(path: str, w: WhitelistConfig) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(to_json_doc(w), fh, indent=2, ensure_ascii=False)
        fh.write("\n")
