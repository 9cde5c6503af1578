"""End-to-end checks of the command-line interface via subprocess."""

import json
import os
import subprocess
import sys

import pytest

from provmatch import defaults
from provmatch.costs import WeightVector, load_weights, save_weights
from provmatch.formats import load_graph, save_graph
from provmatch.graph import SOURCE, fn, normalize
from provmatch.inlining import load_model
from provmatch.matching import load_report
from provmatch.training import load_inline_corpus, load_pair_corpus


def run_cli(*args):
    env = os.environ.copy()
    env.pop(defaults.ENV_CONFIG_DIR, None)
    return subprocess.run(
        [sys.executable, "-m", "provmatch.cli", *args],
        capture_output=True,
        text=True,
        env=env,
    )


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    fns = {}
    for i in range(1, 7):
        callees = (f"f{i+1}",) if i < 6 else ()
        fns[f"f{i}"] = fn(
            strings=(f"s{i}",),
            ints=(i, 100 + i),
            libcalls=("puts",),
            callees=callees,
            num_args=i,
        )
    save_graph(str(d / "chain.json"), normalize(SOURCE, fns))
    (d / "truth.json").write_text(json.dumps({f"f{i}": f"f{i}" for i in range(1, 7)}))
    doc = json.loads((d / "chain.json").read_text())
    doc["functions"][0]["callees"] = ["ghost"]
    (d / "bad.json").write_text(json.dumps(doc))
    return d


@pytest.fixture(scope="module")
def sim_pairs(tmp_path_factory):
    d = tmp_path_factory.mktemp("pairs")
    dirs = []
    for seed in (901, 902):
        out = str(d / f"pair{seed}")
        r = run_cli("simulate", "--seed", str(seed), "--n", "40", "--out", out)
        assert r.returncode == 0, r.stderr
        dirs.append(out)
    return dirs


# ---------------------------------------------------------------------------
# match


def test_match_self_similarity(workdir):
    g = str(workdir / "chain.json")
    r = run_cli("match", g, g)
    assert r.returncode == 0
    assert "similarity: 1.000" in r.stdout
    assert "iterations:" in r.stdout


def test_match_with_truth_reports_tallies(workdir):
    g = str(workdir / "chain.json")
    out = str(workdir / "report.json")
    r = run_cli("match", g, g, "--truth", str(workdir / "truth.json"), "--out", out)
    assert r.returncode == 0
    assert "c_matched: 1.000000" in r.stdout
    assert "ic_matched: 0.000000" in r.stdout
    assert out in r.stdout
    report = load_report(out)
    assert report.tallies is not None
    assert report.tallies.c_matched == 1.0


def test_match_rejects_malformed_graph(workdir):
    r = run_cli("match", str(workdir / "bad.json"), str(workdir / "chain.json"))
    assert r.returncode == 2
    assert "error:" in r.stderr
    assert "ghost" in r.stderr and "f1" in r.stderr


def test_match_missing_file_is_an_ingest_error(workdir):
    r = run_cli("match", str(workdir / "nope.json"), str(workdir / "chain.json"))
    assert r.returncode == 2
    assert "error:" in r.stderr


def test_match_threads_do_not_change_output(workdir):
    g = str(workdir / "chain.json")
    outs = []
    stdouts = []
    for threads, name in ((1, "t1.json"), (4, "t4.json")):
        out = str(workdir / name)
        r = run_cli("match", g, g, "--threads", str(threads), "--out", out)
        assert r.returncode == 0
        outs.append(open(out, "rb").read())
        stdouts.append(r.stdout.replace(name, "OUT"))
    assert outs[0] == outs[1]
    assert stdouts[0] == stdouts[1]


def test_match_disabling_optional_models(workdir):
    g = str(workdir / "chain.json")
    r = run_cli("match", g, g, "--inline-model", "none", "--whitelist", "none")
    assert r.returncode == 0
    assert "similarity: 1.000" in r.stdout


def test_match_text_format(workdir):
    g = str(workdir / "chain.json")
    out = str(workdir / "table.txt")
    r = run_cli("match", g, g, "--format", "text", "--out", out)
    assert r.returncode == 0
    text = open(out).read()
    assert text.startswith("similarity")
    assert "matched" in text


# ---------------------------------------------------------------------------
# simulate


def test_simulate_is_byte_reproducible(tmp_path):
    a, b = str(tmp_path / "a"), str(tmp_path / "b")
    for out in (a, b):
        r = run_cli("simulate", "--seed", "7", "--n", "50", "--out", out)
        assert r.returncode == 0
        assert "functions_binary:" in r.stdout
    names_a, names_b = sorted(os.listdir(a)), sorted(os.listdir(b))
    assert names_a == names_b and names_a
    for name in names_a:
        assert open(os.path.join(a, name), "rb").read() == \
            open(os.path.join(b, name), "rb").read()


def test_simulate_unknown_profile_path(tmp_path):
    r = run_cli("simulate", "--profile", str(tmp_path / "ghost.json"),
                "--out", str(tmp_path / "o"))
    assert r.returncode == 2


# ---------------------------------------------------------------------------
# convert


def test_convert_roundtrips_between_formats(workdir, tmp_path):
    src = str(workdir / "chain.json")
    dot = str(tmp_path / "chain.dot")
    back = str(tmp_path / "chain2.json")
    r = run_cli("convert", src, dot)
    assert r.returncode == 0
    assert "functions: 6" in r.stdout
    r = run_cli("convert", dot, back)
    assert r.returncode == 0
    assert load_graph(back) == load_graph(src)


# ---------------------------------------------------------------------------
# training commands


def test_train_weights_produces_loadable_artifact(sim_pairs, tmp_path):
    out = str(tmp_path / "weights.json")
    corpus = str(tmp_path / "pairs.jsonl")
    r = run_cli("train-weights", *sim_pairs, "--out", out, "--save-corpus", corpus)
    assert r.returncode == 0, r.stderr
    assert "examples:" in r.stdout and out in r.stdout
    wv = load_weights(out)
    assert isinstance(wv, WeightVector)
    assert load_pair_corpus(corpus)


def test_train_inliner_produces_loadable_artifact(sim_pairs, tmp_path):
    out = str(tmp_path / "model.json")
    corpus = str(tmp_path / "inline.jsonl")
    r = run_cli("train-inliner", *sim_pairs, "--rounds", "4",
                "--out", out, "--save-corpus", corpus)
    assert r.returncode == 0, r.stderr
    assert "rules:" in r.stdout and "train_tpr:" in r.stdout
    model = load_model(out)
    assert model.rules
    assert load_inline_corpus(corpus)


def test_train_without_inputs_is_an_error(tmp_path):
    r = run_cli("train-weights", "--out", str(tmp_path / "w.json"))
    assert r.returncode == 2
    assert "error:" in r.stderr


# ---------------------------------------------------------------------------
# report


def test_report_renders_the_table(workdir):
    g = str(workdir / "chain.json")
    rp = str(workdir / "render.json")
    assert run_cli("match", g, g, "--truth", str(workdir / "truth.json"),
                   "--out", rp).returncode == 0
    r = run_cli("report", rp)
    assert r.returncode == 0
    assert r.stdout.startswith("similarity")
    assert "c_matched" in r.stdout


def test_report_rejects_garbage(tmp_path):
    p = tmp_path / "junk.json"
    p.write_text("{}")
    r = run_cli("report", str(p))
    assert r.returncode == 2


# ---------------------------------------------------------------------------
# config resolution


def test_resolve_prefers_override_per_file(monkeypatch, tmp_path):
    override = tmp_path / "conf"
    override.mkdir()
    save_weights(str(override / defaults.WEIGHTS_FILE), WeightVector())
    monkeypatch.setenv(defaults.ENV_CONFIG_DIR, str(override))
    assert defaults.resolve(defaults.WEIGHTS_FILE) == \
        str(override / defaults.WEIGHTS_FILE)
    # files absent from the override directory fall back to the shipped copy
    assert defaults.resolve(defaults.INLINE_MODEL_FILE) == \
        os.path.join(defaults.shipped_dir(), defaults.INLINE_MODEL_FILE)


def test_default_weights_honor_the_override(monkeypatch, tmp_path):
    override = tmp_path / "conf"
    override.mkdir()
    custom = WeightVector(strings=9.25)
    save_weights(str(override / defaults.WEIGHTS_FILE), custom)
    monkeypatch.setenv(defaults.ENV_CONFIG_DIR, str(override))
    assert defaults.default_weights().strings == 9.25


def test_no_override_uses_shipped_files(monkeypatch):
    monkeypatch.delenv(defaults.ENV_CONFIG_DIR, raising=False)
    path = defaults.resolve(defaults.WEIGHTS_FILE)
    assert path == os.path.join(defaults.shipped_dir(), defaults.WEIGHTS_FILE)
    assert os.path.exists(path)