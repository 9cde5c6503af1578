"""Synthetic build pipeline: source generation and the binary-side transforms."""

import json

import pytest

from provmatch.graph import (
    SOURCE,
    VARIADIC,
    GraphError,
    PredictiveFeatures,
    fn,
    normalize,
    validate,
)
from provmatch.matching import match
from provmatch.simulate import (
    DEFAULT_INSERTED_FUNCTIONS,
    GraphShape,
    SimProfile,
    compile_graph,
    emit_pair,
    generate_source,
    identity_profile,
    load_pair,
    o2_profile,
    o3_profile,
    profile_from_json_doc,
    profile_to_json_doc,
    shape_from_json_doc,
    shape_to_json_doc,
    simulate,
)


def effective_args(v):
    return 6 if v == VARIADIC else int(v)


# ---------------------------------------------------------------------------
# source generation


def test_generation_is_deterministic():
    a = generate_source(1, 10)
    b = generate_source(1, 10)
    assert a == b
    assert len(a) == 10


def test_single_function_has_no_edges():
    g = generate_source(3, 1)
    (entry,) = g.functions.values()
    assert entry.features.callers == frozenset()
    assert entry.features.callees == frozenset()


def test_different_seeds_differ():
    a = generate_source(1, 12)
    b = generate_source(2, 12)
    feature_sets = lambda g: sorted(
        (e.features.strings, e.features.ints, e.features.libcalls)
        for e in g.functions.values()
    )
    assert feature_sets(a) != feature_sets(b)


def test_generated_graphs_validate():
    for seed in (4, 5, 6):
        g = generate_source(seed, 30)
        assert g.side == SOURCE
        assert validate(g) == []
        assert all(e.predictive is not None for e in g.functions.values())


def test_unique_strings_shape():
    g = generate_source(8, 20, GraphShape(unique_strings=True))
    marked = [e for e in g.functions.values()
              if any(s.startswith("uniq::") for s in e.features.strings)]
    assert len(marked) == 20


def test_n_must_be_positive():
    with pytest.raises(GraphError):
        generate_source(1, 0)


# ---------------------------------------------------------------------------
# the identity transform


def test_identity_build_is_a_renamed_copy():
    src = generate_source(11, 25)
    pair = compile_graph(src, identity_profile(seed=11))
    assert pair.inlined_edges == ()
    assert set(pair.truth.values()) == set(src.functions)
    assert len(pair.binary) == len(src)
    rename = {v: k for k, v in pair.truth.items()}
    for bid, sname in pair.truth.items():
        bf = pair.binary.functions[bid].features
        sf = src.functions[sname].features
        assert bf.strings == sf.strings
        assert bf.ints == sf.ints
        assert bf.libcalls == sf.libcalls
        assert bf.callers == frozenset(rename[x] for x in sf.callers)
        assert bf.callees == frozenset(rename[x] for x in sf.callees)
        # the binary records a concrete register count, never a marker
        assert bf.num_args == effective_args(sf.num_args)


def test_identity_build_with_unique_features_matches_perfectly():
    pair = simulate(21, 20, GraphShape(unique_strings=True), identity_profile(21))
    report = match(pair.binary, pair.source)
    assert report.similarity == 1.0
    for bid, lab in report.labels.items():
        assert lab.source == pair.truth[bid]


def test_identity_build_never_matches_incorrectly():
    from provmatch.matching import score_against_ground_truth

    for seed in (31, 32, 33):
        pair = simulate(seed, 60, GraphShape(), identity_profile(seed))
        report = match(pair.binary, pair.source)
        t = score_against_ground_truth(report, pair.truth)
        assert t.ic_matched == 0.0
        assert t.c_matched + t.multi == pytest.approx(1.0)


# ---------------------------------------------------------------------------
# individual transforms


def rule_features(static=True, recursive=False, variadic=False):
    return PredictiveFeatures(static=static, recursive=recursive, variadic=variadic)


def test_full_inlining_removes_the_callee():
    src = normalize(SOURCE, {
        "caller": fn(strings=("a",), callees=("helper",), predictive=rule_features(static=False)),
        "helper": fn(strings=("b",), ints=(9,), predictive=rule_features()),
    })
    pair = compile_graph(src, SimProfile(seed=1, inline_probability=1.0, arg_corruption_rate=0.0))
    assert pair.inlined_edges == (("caller", "helper"),)
    assert set(pair.truth.values()) == {"caller"}
    (bf,) = [e.features for e in pair.binary.functions.values()]
    assert bf.strings == frozenset({"a", "b"})
    assert bf.ints == frozenset({9})


def test_partially_inlined_callee_is_retained():
    # a_top absorbs b_mid first, so b_mid may not absorb d_leaf (depth 1);
    # d_leaf keeps one live call site and must survive
    src = normalize(SOURCE, {
        "a_top": fn(callees=("b_mid",), predictive=rule_features(static=False)),
        "b_mid": fn(callees=("d_leaf",), predictive=rule_features()),
        "c_other": fn(callees=("d_leaf",), predictive=rule_features(static=False)),
        "d_leaf": fn(strings=("leaf",), predictive=rule_features()),
    })
    pair = compile_graph(src, SimProfile(seed=1, inline_probability=1.0, arg_corruption_rate=0.0))
    assert pair.inlined_edges == (("a_top", "b_mid"), ("c_other", "d_leaf"))
    assert set(pair.truth.values()) == {"a_top", "c_other", "d_leaf"}


def test_self_recursive_callee_is_never_removed():
    src = normalize(SOURCE, {
        "main": fn(callees=("rec",), predictive=rule_features(static=False)),
        "rec": fn(callees=("rec",), strings=("r",), predictive=rule_features()),
    })
    pair = compile_graph(src, SimProfile(seed=2, inline_probability=1.0, arg_corruption_rate=0.0))
    assert pair.inlined_edges == (("main", "rec"),)
    assert set(pair.truth.values()) == {"main", "rec"}


def test_substitution_rewrites_exactly_the_listed_pairs():
    src = normalize(SOURCE, {
        "a": fn(libcalls=("printf", "memcpy"), predictive=rule_features(static=False)),
        "b": fn(libcalls=("puts",), predictive=rule_features(static=False)),
        "c": fn(libcalls=("strlen",), predictive=rule_features(static=False)),
    })
    profile = SimProfile(seed=3, libcall_substitutions=(("printf", "puts"),),
                         arg_corruption_rate=0.0)
    pair = compile_graph(src, profile)
    by_src = {pair.truth[bid]: e.features for bid, e in pair.binary.functions.items()}
    assert by_src["a"].libcalls == frozenset({"puts", "memcpy"})
    assert by_src["b"].libcalls == frozenset({"puts"})
    assert by_src["c"].libcalls == frozenset({"strlen"})


def test_substitution_closure_goes_to_one_canonical_name():
    src = normalize(SOURCE, {
        "a": fn(libcalls=("printf",), predictive=rule_features(static=False)),
        "b": fn(libcalls=("puts",), predictive=rule_features(static=False)),
        "c": fn(libcalls=("vsprintf",), predictive=rule_features(static=False)),
    })
    profile = SimProfile(
        seed=3,
        libcall_substitutions=(("printf", "puts"), ("printf", "vsprintf")),
        arg_corruption_rate=0.0,
    )
    pair = compile_graph(src, profile)
    names = {x for e in pair.binary.functions.values() for x in e.features.libcalls}
    assert names == {"vsprintf"}


def test_arg_corruption_rate_is_respected():
    src = generate_source(41, 1000)
    pair = compile_graph(src, SimProfile(seed=41, arg_corruption_rate=0.36))
    changed = sum(
        1
        for bid, sname in pair.truth.items()
        if pair.binary.functions[bid].features.num_args
        != effective_args(src.functions[sname].features.num_args)
    )
    assert abs(changed / 1000 - 0.36) <= 0.05


def test_inserted_functions_keep_their_names():
    profile = SimProfile(seed=5, arg_corruption_rate=0.0,
                         insert_compiler_functions=DEFAULT_INSERTED_FUNCTIONS)
    pair = compile_graph(generate_source(5, 15), profile)
    for name in DEFAULT_INSERTED_FUNCTIONS:
        assert name in pair.binary.functions
        assert pair.truth[name] == name
    # inserted functions are extra binary functions beyond the real ones
    assert len(pair.binary) == 15 + len(DEFAULT_INSERTED_FUNCTIONS)


def test_compiled_graph_validates():
    for seed in (6, 7):
        pair = simulate(seed, 50, profile=o3_profile(seed))
        assert validate(pair.binary) == []
        assert validate(pair.source) == []


def test_truth_keys_are_exactly_the_binary_ids():
    pair = simulate(9, 40, profile=o2_profile(9))
    assert set(pair.truth) == set(pair.binary.functions)


def test_two_builds_of_one_source_differ_by_seed():
    src = generate_source(12, 40)
    a = compile_graph(src, o2_profile(seed=1))
    b = compile_graph(src, o2_profile(seed=2))
    assert a.binary != b.binary


# ---------------------------------------------------------------------------
# emission and serialization


def test_emit_then_load_round_trips(tmp_path):
    pair = simulate(13, 30, profile=o2_profile(13))
    emit_pair(pair, str(tmp_path))
    back = load_pair(str(tmp_path))
    assert back.source == pair.source
    assert back.binary == pair.binary
    assert back.truth == pair.truth
    assert back.inlined_edges == pair.inlined_edges
    assert back.profile == pair.profile


def test_emitted_files_are_byte_reproducible(tmp_path):
    for d in ("one", "two"):
        emit_pair(simulate(14, 25, profile=o2_profile(14)), str(tmp_path / d))
    for name in ("source.json", "binary.json", "truth.json", "inlined.json", "profile.json"):
        a = (tmp_path / "one" / name).read_bytes()
        b = (tmp_path / "two" / name).read_bytes()
        assert a == b, name


def test_emitted_truth_covers_binary(tmp_path):
    pair = simulate(15, 20, profile=o3_profile(15))
    emit_pair(pair, str(tmp_path))
    truth = json.loads((tmp_path / "truth.json").read_text())
    binary = json.loads((tmp_path / "binary.json").read_text())
    assert set(truth) == {f["id"] for f in binary["functions"]}


def test_profile_doc_roundtrip():
    for make in (identity_profile, o2_profile, o3_profile):
        p = make(seed=77)
        assert profile_from_json_doc(profile_to_json_doc(p)) == p


def test_profile_doc_rejects_unknown_keys():
    doc = profile_to_json_doc(o2_profile())
    doc["optimization_level"] = 2
    with pytest.raises(GraphError):
        profile_from_json_doc(doc)


def test_profile_rates_are_validated():
    with pytest.raises(GraphError):
        SimProfile(arg_corruption_rate=1.5)
    with pytest.raises(GraphError):
        SimProfile(inline_probability=-0.1)


def test_shape_doc_roundtrip():
    s = GraphShape(unique_strings=True, mean_strings=3.5)
    assert shape_from_json_doc(shape_to_json_doc(s)) == s
    with pytest.raises(GraphError):
        shape_from_json_doc({"string_pool": 10, "mystery": 1})