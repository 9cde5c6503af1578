"""Graph interchange: canonical JSON and a DOT dialect.

Both formats round-trip exactly: ingest(serialize(g)) == g for every valid
graph.  JSON is the canonical form.  The DOT dialect stores feature lists as
"|"-separated node attributes (a literal "|" inside an item is escaped as
"\\|", a literal backslash as "\\\\", and an empty item as "\\z") and call
edges as DOT edges.  Pseudo-inlined functions are the one exception: their
neighbour sets are one-directional, so they are stored as explicit callers=/
callees= attributes instead of edges.

Strictness: unknown keys and attributes are rejected, malformed values raise
GraphError.  Absent feature attributes default to empty sets and num_args 0.
"""

from __future__ import annotations

import json
from typing import Any

from .graph import (
    BINARY,
    SIDES,
    SOURCE,
    VARIADIC,
    FeatureGraph,
    FunctionEntry,
    GraphError,
    MatchingFeatures,
    PredictiveFeatures,
    normalize,
)

_FUNCTION_KEYS = {
    "id",
    "strings",
    "ints",
    "libcalls",
    "callers",
    "callees",
    "num_args",
    "predictive",
    "pseudo_origin",
}

_NODE_ATTRS = {
    "strings",
    "ints",
    "libcalls",
    "num_args",
    "predictive",
    "pseudo_caller",
    "pseudo_callee",
    "callers",
    "callees",
}


# ---------------------------------------------------------------------------
# JSON


def _str_list(raw: Any, where: str) -> frozenset[str]:
    if not isinstance(raw, list) or not all(isinstance(x, str) for x in raw):
        raise GraphError(f"{where} must be a list of strings")
    return frozenset(raw)


def _int_list(raw: Any, where: str) -> frozenset[int]:
    if not isinstance(raw, list) or not all(
        isinstance(x, int) and not isinstance(x, bool) for x in raw
    ):
        raise GraphError(f"{where} must be a list of integers")
    return frozenset(raw)


def _num_args(raw: Any, where: str) -> int | str:
    if raw == VARIADIC:
        return VARIADIC
    if isinstance(raw, int) and not isinstance(raw, bool):
        return raw
    raise GraphError(f"{where} num_args must be an integer or {VARIADIC!r}")


def from_json_doc(doc: Any) -> FeatureGraph:
    if not isinstance(doc, dict):
        raise GraphError("top-level document must be an object")
    unknown = set(doc) - {"side", "functions"}
    if unknown:
        raise GraphError(f"unknown top-level keys: {sorted(unknown)}")
    side = doc.get("side")
    if side not in SIDES:
        raise GraphError(f"side must be one of {SIDES}, got {side!r}")
    raw_functions = doc.get("functions")
    if not isinstance(raw_functions, list):
        raise GraphError("functions must be a list")

    functions: dict[str, FunctionEntry] = {}
    for raw in raw_functions:
        if not isinstance(raw, dict):
            raise GraphError("each function must be an object")
        unknown = set(raw) - _FUNCTION_KEYS
        if unknown:
            raise GraphError(f"unknown function keys: {sorted(unknown)}")
        name = raw.get("id")
        if not isinstance(name, str) or not name:
            raise GraphError("function id must be a non-empty string")
        if name in functions:
            raise GraphError(f"duplicate function id {name!r}")
        where = f"function {name!r}"
        predictive = None
        if "predictive" in raw:
            p = raw["predictive"]
            if not isinstance(p, dict) or not all(isinstance(v, bool) for v in p.values()):
                raise GraphError(f"{where}: predictive must map feature names to booleans")
            try:
                predictive = PredictiveFeatures.from_dict(p)
            except ValueError as e:
                raise GraphError(f"{where}: {e}") from None
        pseudo_origin = None
        if "pseudo_origin" in raw:
            po = raw["pseudo_origin"]
            if (
                not isinstance(po, list)
                or len(po) != 2
                or not all(isinstance(x, str) for x in po)
            ):
                raise GraphError(f"{where}: pseudo_origin must be a [caller, callee] pair")
            pseudo_origin = (po[0], po[1])
        functions[name] = FunctionEntry(
            features=MatchingFeatures(
                strings=_str_list(raw.get("strings", []), f"{where} strings"),
                ints=_int_list(raw.get("ints", []), f"{where} ints"),
                libcalls=_str_list(raw.get("libcalls", []), f"{where} libcalls"),
                callers=_str_list(raw.get("callers", []), f"{where} callers"),
                callees=_str_list(raw.get("callees", []), f"{where} callees"),
                num_args=_num_args(raw.get("num_args", 0), where),
            ),
            predictive=predictive,
            pseudo_origin=pseudo_origin,
        )
    return normalize(side, functions)


def from_json(text: str) -> FeatureGraph:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise GraphError(f"not valid JSON: {e}") from None
    return from_json_doc(doc)


def to_json_doc(g: FeatureGraph) -> dict[str, Any]:
    functions = []
    for name in sorted(g.functions):
        entry = g.functions[name]
        f = entry.features
        obj: dict[str, Any] = {
            "id": name,
            "strings": sorted(f.strings),
            "ints": sorted(f.ints),
            "libcalls": sorted(f.libcalls),
            "callers": sorted(f.callers),
            "callees": sorted(f.callees),
            "num_args": f.num_args,
        }
        if entry.predictive is not None:
            obj["predictive"] = entry.predictive.as_dict()
        if entry.pseudo_origin is not None:
            obj["pseudo_origin"] = list(entry.pseudo_origin)
        functions.append(obj)
    return {"side": g.side, "functions": functions}


def to_json(g: FeatureGraph) -> str:
    return json.dumps(to_json_doc(g), indent=2, ensure_ascii=False) + "\n"


# ---------------------------------------------------------------------------
# list encoding shared by DOT attribute values

_EMPTY_ITEM = "\\z"


def _escape_item(item: str) -> str:
    if item == "":
        return _EMPTY_ITEM
    return item.replace("\\", "\\\\").replace("|", "\\|")


def _join_items(items: list[str]) -> str:
    return "|".join(_escape_item(i) for i in items)


def _split_items(value: str) -> list[str]:
    if value == "":
        return []
    segments: list[str] = []
    buf: list[str] = []
    i = 0
    while i < len(value):
        ch = value[i]
        if ch == "\\" and i + 1 < len(value):
            buf.append(value[i : i + 2])
            i += 2
        elif ch == "|":
            segments.append("".join(buf))
            buf = []
            i += 1
        else:
            buf.append(ch)
            i += 1
    segments.append("".join(buf))

    items: list[str] = []
    for seg in segments:
        if seg == _EMPTY_ITEM:
            items.append("")
            continue
        out: list[str] = []
        j = 0
        while j < len(seg):
            if seg[j] == "\\" and j + 1 < len(seg):
                out.append(seg[j + 1])
                j += 2
            else:
                out.append(seg[j])
                j += 1
        items.append("".join(out))
    return items


# ---------------------------------------------------------------------------
# DOT writing


def _quote(value: str) -> str:
    escaped = (
        value.replace("\\", "\\\\")
        .replace('"', '\\"')
        .replace("\n", "\\n")
        .replace("\r", "\\r")
    )
    return f'"{escaped}"'


def to_dot(g: FeatureGraph) -> str:
    lines = ["digraph provmatch {", f"  side={_quote(g.side)};"]
    for name in sorted(g.functions):
        entry = g.functions[name]
        f = entry.features
        attrs: list[str] = []
        if f.strings:
            attrs.append(f"strings={_quote(_join_items(sorted(f.strings)))}")
        if f.ints:
            attrs.append(f"ints={_quote(_join_items([str(v) for v in sorted(f.ints)]))}")
        if f.libcalls:
            attrs.append(f"libcalls={_quote(_join_items(sorted(f.libcalls)))}")
        attrs.append(f"num_args={_quote(str(f.num_args))}")
        if entry.predictive is not None:
            on = [k for k, v in sorted(entry.predictive.as_dict().items()) if v]
            attrs.append(f"predictive={_quote(_join_items(on))}")
        if entry.pseudo_origin is not None:
            attrs.append(f"pseudo_caller={_quote(entry.pseudo_origin[0])}")
            attrs.append(f"pseudo_callee={_quote(entry.pseudo_origin[1])}")
            if f.callers:
                attrs.append(f"callers={_quote(_join_items(sorted(f.callers)))}")
            if f.callees:
                attrs.append(f"callees={_quote(_join_items(sorted(f.callees)))}")
        lines.append(f"  {_quote(name)} [{', '.join(attrs)}];")
    for name in sorted(g.functions):
        entry = g.functions[name]
        if entry.pseudo_origin is not None:
            continue
        for callee in sorted(entry.features.callees):
            lines.append(f"  {_quote(name)} -> {_quote(callee)};")
    lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# DOT parsing


class _Tokenizer:
    _SYMBOLS = {"{", "}", "[", "]", "=", ";", ","}

    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.tokens: list[tuple[str, str]] = []
        self._scan()
        self.index = 0

    def _scan(self) -> None:
        text, n = self.text, len(self.text)
        i = 0
        while i < n:
            ch = text[i]
            if ch.isspace():
                i += 1
            elif text.startswith("//", i) or ch == "#":
                while i < n and text[i] != "\n":
                    i += 1
            elif text.startswith("/*", i):
                end = text.find("*/", i + 2)
                if end < 0:
                    raise GraphError("unterminated comment")
                i = end + 2
            elif text.startswith("->", i):
                self.tokens.append(("arrow", "->"))
                i += 2
            elif ch in self._SYMBOLS:
                self.tokens.append(("sym", ch))
                i += 1
            elif ch == '"':
                i += 1
                buf: list[str] = []
                while i < n and text[i] != '"':
                    if text[i] == "\\" and i + 1 < n:
                        nxt = text[i + 1]
                        buf.append({"n": "\n", "r": "\r"}.get(nxt, nxt))
                        i += 2
                    else:
                        buf.append(text[i])
                        i += 1
                if i >= n:
                    raise GraphError("unterminated quoted string")
                i += 1
                # quoted strings are never keywords, so they get their own kind
                self.tokens.append(("qid", "".join(buf)))
            elif ch.isalnum() or ch in "_-.":
                j = i
                while j < n and (text[j].isalnum() or text[j] in "_-."):
                    j += 1
                self.tokens.append(("id", text[i:j]))
                i = j
            else:
                raise GraphError(f"unexpected character {ch!r} in DOT input")

    def peek(self) -> tuple[str, str] | None:
        return self.tokens[self.index] if self.index < len(self.tokens) else None

    def next(self) -> tuple[str, str]:
        tok = self.peek()
        if tok is None:
            raise GraphError("unexpected end of DOT input")
        self.index += 1
        return tok

    def expect(self, kind: str, value: str | None = None) -> str:
        k, v = self.next()
        if k != kind or (value is not None and v != value):
            raise GraphError(f"expected {value or kind}, got {v!r}")
        return v

    def expect_name(self) -> str:
        k, v = self.next()
        if k not in ("id", "qid"):
            raise GraphError(f"expected a name, got {v!r}")
        return v


def _parse_attr_list(tz: _Tokenizer) -> dict[str, str]:
    attrs: dict[str, str] = {}
    tz.expect("sym", "[")
    while True:
        tok = tz.peek()
        if tok is None:
            raise GraphError("unterminated attribute list")
        if tok == ("sym", "]"):
            tz.next()
            break
        key = tz.expect_name()
        tz.expect("sym", "=")
        value = tz.expect_name()
        attrs[key] = value
        if tz.peek() in (("sym", ","), ("sym", ";")):
            tz.next()
    return attrs


def _parse_int_items(value: str, where: str) -> frozenset[int]:
    out = set()
    for item in _split_items(value):
        try:
            out.add(int(item, 10))
        except ValueError:
            raise GraphError(f"{where}: unparseable integer constant {item!r}") from None
    return frozenset(out)


def from_dot(text: str) -> FeatureGraph:
    tz = _Tokenizer(text)
    kind, value = tz.next()
    if (kind, value) != ("id", "digraph"):
        raise GraphError("input must be a digraph")
    if tz.peek() is not None and tz.peek()[0] in ("id", "qid"):
        tz.next()  # optional graph name
    tz.expect("sym", "{")

    side = SOURCE
    nodes: dict[str, dict[str, str]] = {}
    edges: list[tuple[str, str]] = []

    while True:
        tok = tz.peek()
        if tok is None:
            raise GraphError("unterminated digraph body")
        if tok == ("sym", "}"):
            tz.next()
            break
        if tok == ("sym", ";"):
            tz.next()
            continue
        kind, name = tz.next()
        if kind not in ("id", "qid"):
            raise GraphError(f"unexpected token {name!r}")
        nxt = tz.peek()
        # bare (unquoted) node/edge/graph are reserved words in this position
        if kind == "id" and name.lower() in ("node", "edge") and nxt == ("sym", "["):
            raise GraphError(f"default {name} attributes are not supported")
        if kind == "id" and name.lower() == "graph" and nxt == ("sym", "["):
            for k, v in _parse_attr_list(tz).items():
                if k != "side":
                    raise GraphError(f"unknown graph attribute {k!r}")
                side = v
            continue
        if nxt == ("sym", "="):
            tz.next()
            v = tz.expect_name()
            if name != "side":
                raise GraphError(f"unknown graph attribute {name!r}")
            side = v
            continue
        if nxt == ("arrow", "->"):
            prev = name
            nodes.setdefault(prev, {})
            while tz.peek() == ("arrow", "->"):
                tz.next()
                nxt_name = tz.expect_name()
                nodes.setdefault(nxt_name, {})
                edges.append((prev, nxt_name))
                prev = nxt_name
            if tz.peek() == ("sym", "["):
                _parse_attr_list(tz)  # edge attributes carry no graph content
            continue
        attrs = _parse_attr_list(tz) if nxt == ("sym", "[") else {}
        unknown = set(attrs) - _NODE_ATTRS
        if unknown:
            raise GraphError(f"node {name!r}: unknown attributes {sorted(unknown)}")
        merged = nodes.setdefault(name, {})
        merged.update(attrs)

    if side not in SIDES:
        raise GraphError(f"side must be one of {SIDES}, got {side!r}")

    functions: dict[str, FunctionEntry] = {}
    callee_map: dict[str, set[str]] = {name: set() for name in nodes}
    caller_map: dict[str, set[str]] = {name: set() for name in nodes}
    for a, b in edges:
        callee_map[a].add(b)
        caller_map[b].add(a)

    for name, attrs in nodes.items():
        where = f"node {name!r}"
        pseudo_origin = None
        if "pseudo_caller" in attrs or "pseudo_callee" in attrs:
            if not ("pseudo_caller" in attrs and "pseudo_callee" in attrs):
                raise GraphError(f"{where}: pseudo_caller and pseudo_callee must appear together")
            pseudo_origin = (attrs["pseudo_caller"], attrs["pseudo_callee"])
        raw_args = attrs.get("num_args", "0")
        if raw_args == VARIADIC:
            num_args: int | str = VARIADIC
        else:
            try:
                num_args = int(raw_args, 10)
            except ValueError:
                raise GraphError(f"{where}: unparseable num_args {raw_args!r}") from None
        predictive = None
        if "predictive" in attrs:
            flags = _split_items(attrs["predictive"])
            try:
                predictive = PredictiveFeatures.from_dict({f: True for f in flags})
            except ValueError as e:
                raise GraphError(f"{where}: {e}") from None
        callers = set(_split_items(attrs.get("callers", ""))) | caller_map[name]
        callees = set(_split_items(attrs.get("callees", ""))) | callee_map[name]
        functions[name] = FunctionEntry(
            features=MatchingFeatures(
                strings=frozenset(_split_items(attrs.get("strings", ""))),
                ints=_parse_int_items(attrs.get("ints", ""), where),
                libcalls=frozenset(_split_items(attrs.get("libcalls", ""))),
                callers=frozenset(callers),
                callees=frozenset(callees),
                num_args=num_args,
            ),
            predictive=predictive,
            pseudo_origin=pseudo_origin,
        )
    return normalize(side, functions)


# ---------------------------------------------------------------------------
# file-level helpers


def load_graph(path: str) -> FeatureGraph:
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if path.endswith(".dot") or path.endswith(".gv"):
        return from_dot(text)
    return from_json(text)


def save_graph(path: str, g: FeatureGraph) -> None:
    text = to_dot(g) if path.endswith((".dot", ".gv")) else to_json(g)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


__all__ = [
    "from_json",
    "from_json_doc",
    "to_json",
    "to_json_doc",
    "from_dot",
    "to_dot",
    "load_graph",
    "save_graph",
    "BINARY",
    "SOURCE",
]
