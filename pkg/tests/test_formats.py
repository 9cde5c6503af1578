"""Interchange formats: strict JSON and the DOT dialect."""

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from provmatch.formats import (
    from_dot,
    from_json,
    from_json_doc,
    load_graph,
    save_graph,
    to_dot,
    to_json,
    to_json_doc,
)
from provmatch.graph import (
    BINARY,
    SOURCE,
    VARIADIC,
    GraphError,
    PredictiveFeatures,
    fn,
    normalize,
)


def doc(functions, side="source"):
    return {"side": side, "functions": functions}


def test_json_ingest_filters_ints():
    g = from_json_doc(doc([{"id": "f", "ints": [0, 1, 5]}]))
    assert g.functions["f"].features.ints == frozenset({5})


def test_json_ingest_empty_functions():
    g = from_json_doc(doc([]))
    assert len(g) == 0
    assert g.side == SOURCE


def test_json_ingest_repairs_symmetry():
    g = from_json_doc(doc([{"id": "f", "callees": ["g"]}, {"id": "g"}]))
    assert g.functions["g"].features.callers == frozenset({"f"})


def test_json_rejects_unknown_keys():
    with pytest.raises(GraphError):
        from_json_doc({"side": "source", "functions": [], "extra": 1})
    with pytest.raises(GraphError):
        from_json_doc(doc([{"id": "f", "colour": "red"}]))
    with pytest.raises(GraphError):
        from_json_doc(doc([{"id": "f", "predictive": {"static": True, "inline_me": True}}]))


def test_json_rejects_duplicate_ids():
    with pytest.raises(GraphError):
        from_json_doc(doc([{"id": "f"}, {"id": "f"}]))


def test_json_rejects_bad_side_and_types():
    with pytest.raises(GraphError):
        from_json_doc({"side": "middle", "functions": []})
    with pytest.raises(GraphError):
        from_json_doc(doc([{"id": ""}]))
    with pytest.raises(GraphError):
        from_json_doc(doc([{"id": "f", "ints": [True]}]))
    with pytest.raises(GraphError):
        from_json_doc(doc([{"id": "f", "num_args": True}]))
    with pytest.raises(GraphError):
        from_json_doc(doc([{"id": "f", "strings": "not-a-list"}]))
    with pytest.raises(GraphError):
        from_json("{broken")


def test_json_error_names_offending_function():
    with pytest.raises(GraphError) as err:
        from_json_doc(doc([{"id": "troublemaker", "num_args": -2}]))
    assert "troublemaker" in str(err.value)


def test_json_num_args_variadic():
    g = from_json_doc(doc([{"id": "f", "num_args": "variadic"}]))
    assert g.functions["f"].features.num_args == VARIADIC


def test_json_predictive_parsing():
    g = from_json_doc(
        doc([{"id": "f", "predictive": {"static": True, "recursive": False}}])
    )
    assert g.functions["f"].predictive == PredictiveFeatures(static=True)


def test_json_roundtrip_exact():
    g = normalize(
        SOURCE,
        {
            "f": fn(strings=("a b", "c|d"), ints=(5, -9), libcalls=("puts",),
                    callees=("g",), num_args=VARIADIC,
                    predictive=PredictiveFeatures(static=True, variadic=True)),
            "g": fn(num_args=3),
            "f+inl+g": fn(strings=("a b",), pseudo_origin=("f", "g")),
        },
    )
    assert from_json(to_json(g)) == g


def test_json_output_is_canonical():
    g = normalize(SOURCE, {"b": fn(), "a": fn(strings=("z", "a"))})
    text = to_json(g)
    assert text.endswith("\n")
    parsed = json.loads(text)
    assert [f["id"] for f in parsed["functions"]] == ["a", "b"]
    assert parsed["functions"][0]["strings"] == ["a", "z"]
    # every feature key is explicit, even when empty
    assert parsed["functions"][0]["libcalls"] == []
    assert "predictive" not in parsed["functions"][0]


def test_dot_basic_example():
    g = from_dot('digraph { f [strings="a|b"]; f -> g; }')
    assert g.functions["g"].features.callers == frozenset({"f"})
    assert g.functions["f"].features.strings == frozenset({"a", "b"})
    assert g.side == SOURCE


def test_dot_edgeless_graph():
    g = from_dot('digraph { f [num_args="2"]; g; }')
    assert all(
        e.features.callers == frozenset() and e.features.callees == frozenset()
        for e in g.functions.values()
    )


def test_dot_variadic():
    g = from_dot('digraph { f [num_args="variadic"]; }')
    assert g.functions["f"].features.num_args == VARIADIC


def test_dot_side_attribute():
    g = from_dot('digraph { side="binary"; "0x10"; }')
    assert g.side == BINARY
    g = from_dot('digraph g { graph [side="binary"]; "0x10"; }')
    assert g.side == BINARY


def test_dot_escaping_roundtrip():
    g = normalize(
        SOURCE,
        {
            "f": fn(strings=("a|b", "back\\slash", "", "plain"), ints=(7,)),
        },
    )
    text = to_dot(g)
    assert from_dot(text) == g


def test_dot_reserved_words_as_quoted_node_ids():
    # quoting lifts the reserved meaning, so these ids must round-trip
    g = normalize(SOURCE, {
        "edge": fn(strings=("e",), callees=("node",)),
        "node": fn(ints=(9,)),
        "graph": fn(),
    })
    assert from_dot(to_dot(g)) == g


def test_dot_bare_default_attributes_are_rejected():
    with pytest.raises(GraphError):
        from_dot('digraph { node [shape="box"]; }')
    with pytest.raises(GraphError):
        from_dot('digraph { EDGE [color="red"]; }')


def test_dot_rejects_non_digraph():
    with pytest.raises(GraphError):
        from_dot("graph { a -- b; }")


def test_dot_rejects_unknown_attr():
    with pytest.raises(GraphError):
        from_dot('digraph { f [shape="box"]; }')


def test_dot_rejects_bad_num_args():
    with pytest.raises(GraphError):
        from_dot('digraph { f [num_args="lots"]; }')


def test_dot_comments_and_chains():
    g = from_dot(
        """
        digraph demo {
            // line comment
            # hash comment
            /* block
               comment */
            a -> b -> c;
        }
        """
    )
    assert g.functions["b"].features.callers == frozenset({"a"})
    assert g.functions["b"].features.callees == frozenset({"c"})


def test_dot_pseudo_nodes_roundtrip():
    g = normalize(
        SOURCE,
        {
            "f": fn(callees=("g",)),
            "g": fn(),
            "f+inl+g": fn(strings=("s",), callers=("x",), callees=("g",),
                          pseudo_origin=("f", "g")),
            "x": fn(),
        },
    )
    out = from_dot(to_dot(g))
    assert out == g
    assert out.functions["f+inl+g"].pseudo_origin == ("f", "g")


def test_dot_predictive_roundtrip():
    g = normalize(
        SOURCE,
        {"f": fn(predictive=PredictiveFeatures(static=True, recursive=True))},
    )
    text = to_dot(g)
    assert from_dot(text) == g


def test_load_save_by_extension(tmp_path):
    g = normalize(SOURCE, {"f": fn(strings=("a",), callees=("g",)), "g": fn()})
    for name in ("g.json", "g.dot", "g.gv"):
        path = tmp_path / name
        save_graph(str(path), g)
        assert load_graph(str(path)) == g
    # anything that is not DOT is treated as JSON
    other = tmp_path / "g.data"
    save_graph(str(other), g)
    assert json.loads(other.read_text())["side"] == "source"
    assert load_graph(str(other)) == g


ident = st.text(alphabet="abcdefgh0123456789_", min_size=1, max_size=6)
feature_text = st.text(
    alphabet=st.characters(min_codepoint=32, max_codepoint=126), max_size=8
)


@settings(max_examples=60, deadline=None)
@given(data=st.data())
def test_roundtrip_property_both_formats(data):
    names = data.draw(st.lists(ident, min_size=1, max_size=5, unique=True))
    functions = {}
    for name in names:
        callees = data.draw(st.frozensets(st.sampled_from(names), max_size=3))
        functions[name] = fn(
            strings=data.draw(st.frozensets(feature_text, max_size=4)),
            ints=data.draw(
                st.frozensets(st.integers(min_value=-(2**63), max_value=2**63 - 1), max_size=3)
            ),
            libcalls=data.draw(st.frozensets(ident, max_size=3)),
            callees=callees,
            num_args=data.draw(
                st.one_of(st.integers(min_value=0, max_value=255), st.just(VARIADIC))
            ),
            predictive=data.draw(
                st.one_of(
                    st.none(),
                    st.builds(
                        PredictiveFeatures,
                        static=st.booleans(),
                        recursive=st.booleans(),
                        variadic=st.booleans(),
                    ),
                )
            ),
        )
    g = normalize(SOURCE, functions)
    assert from_json(to_json(g)) == g
    assert from_dot(to_dot(g)) == g
