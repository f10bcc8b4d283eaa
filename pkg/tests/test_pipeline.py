import json
import os

import numpy as np
import pytest

from termnet import ml
from termnet.cli import main
from termnet.ingest import build_corpus, parse_records, read_terms_file
from termnet.pipeline import (
    CLASSIFIER_ORDER,
    FEATURE_SET_ORDER,
    PipelineError,
    compute_features,
    filter_records_window,
    parse_window_bound,
    read_features_csv,
    read_networks,
    slugify_terms,
    write_features_csv,
    write_networks,
)
from termnet.ranking import read_labels_csv
from termnet.synth import SynthSpec, generate_corpus, write_corpus


# ---------------------------------------------------------------- helpers


def run_cli(*argv) -> int:
    return main([str(a) for a in argv])


@pytest.fixture()
def corpus_dir(tmp_path):
    """A small synthetic corpus on disk (6 terms, strong signal)."""
    d = tmp_path / "corpus"
    write_corpus(SynthSpec(n_terms=6, records_per_term=40, seed=21, signal=1.0), d)
    return d


# ---------------------------------------------------------------- windowing


def test_parse_window_bound():
    assert parse_window_bound("2020-11-09", end_of_day=False).isoformat() == "2020-11-09T00:00:00+00:00"
    assert parse_window_bound("2020-11-09", end_of_day=True).isoformat() == "2020-11-09T23:59:59+00:00"
    assert parse_window_bound("2020-11-09T05:06:07Z", end_of_day=True).isoformat() == "2020-11-09T05:06:07+00:00"


def test_filter_records_window_inclusive():
    lines = [
        json.dumps({"post_id": str(i), "author": "a", "text": "x", "timestamp": f"2020-11-{9 + i:02d}T12:00:00Z"})
        for i in range(5)
    ]
    records = parse_records("\n".join(lines)).records
    lo = parse_window_bound("2020-11-10T12:00:00Z", False)
    hi = parse_window_bound("2020-11-12T12:00:00Z", True)
    kept = filter_records_window(records, lo, hi)
    assert [r.post_id for r in kept] == ["1", "2", "3"]
    assert len(filter_records_window(records, None, None)) == 5
    assert [r.post_id for r in filter_records_window(records, lo, None)] == ["1", "2", "3", "4"]


# ---------------------------------------------------------------- slugs


def test_slugify_terms():
    slugs = slugify_terms(["#Great Reset", "great reset", "tag-great-reset", "Терм"])
    assert slugs["#Great Reset"] == "tag-great-reset"
    assert slugs["great reset"] == "great-reset"
    assert slugs["tag-great-reset"] == "tag-great-reset-2"  # collision
    assert slugs["Терм"] == "term"  # nothing survives -> fallback
    assert len(set(slugs.values())) == 4


# ---------------------------------------------------------------- networks io


def test_write_read_networks_round_trip(tmp_path, corpus_dir):
    records = parse_records((corpus_dir / "records.jsonl").read_text()).records
    terms = read_terms_file(corpus_dir / "terms.txt")
    corpus = build_corpus(records, terms)
    outdir = tmp_path / "nets"
    rows = write_networks(corpus, outdir, manifest_hash="f" * 64)
    assert len(rows) == len(terms) * 3

    refs = read_networks(outdir)
    assert len(refs) == len(rows)
    by_key = {(r.term, r.kind): r for r in refs}
    for ts in corpus:
        for kind, g in ts.graphs.items():
            ref = by_key[(ts.term, kind.value)]
            assert ref.graph.node_count == g.node_count
            assert ref.graph.edge_count == g.edge_count
            want = {(g.handle(u), g.handle(v)) for u, v in g.edges}
            got = {(ref.graph.handle(u), ref.graph.handle(v)) for u, v in ref.graph.edges}
            assert got == want
            assert ref.matched_records == ts.matched_records


def test_read_networks_detects_tampering(tmp_path, corpus_dir):
    records = parse_records((corpus_dir / "records.jsonl").read_text()).records
    corpus = build_corpus(records, read_terms_file(corpus_dir / "terms.txt"))
    outdir = tmp_path / "nets"
    write_networks(corpus, outdir, manifest_hash="f" * 64)
    summary = outdir / "summary.csv"
    text = summary.read_text()
    # corrupt one edge count in the summary
    lines = text.splitlines()
    parts = lines[2].split(",")
    parts[3] = str(int(parts[3]) + 1)
    lines[2] = ",".join(parts)
    summary.write_text("\n".join(lines) + "\n")
    with pytest.raises(PipelineError, match="edge"):
        read_networks(outdir)


# ---------------------------------------------------------------- features io


def test_features_csv_round_trip(tmp_path, corpus_dir):
    records = parse_records((corpus_dir / "records.jsonl").read_text()).records
    corpus = build_corpus(records, read_terms_file(corpus_dir / "terms.txt"))
    outdir = tmp_path / "nets"
    write_networks(corpus, outdir, manifest_hash="e" * 64)
    refs = read_networks(outdir)
    rows = compute_features(refs, include_global=True, include_local=True)
    path = tmp_path / "features.csv"
    write_features_csv(rows, path, manifest_hash="e" * 64)

    global_vecs, local_vecs = read_features_csv(path)
    assert set(global_vecs) == set(local_vecs) == {(r.term, r.kind) for r in rows}
    for row in rows:
        key = (row.term, row.kind)
        # repr round trip is exact, not approximate
        assert global_vecs[key] == list(row.global_features.as_vector())
        assert local_vecs[key] == list(row.census.normalized)
        assert len(local_vecs[key]) == 212


def test_features_csv_header_layout(tmp_path, corpus_dir):
    records = parse_records((corpus_dir / "records.jsonl").read_text()).records
    corpus = build_corpus(records, read_terms_file(corpus_dir / "terms.txt"))
    outdir = tmp_path / "nets"
    write_networks(corpus, outdir, manifest_hash="d" * 64)
    rows = compute_features(read_networks(outdir), True, True)
    path = tmp_path / "features.csv"
    write_features_csv(rows, path, manifest_hash="d" * 64)
    lines = path.read_text().splitlines()
    assert lines[0] == "# manifest_sha256=" + "d" * 64
    header = lines[1].split(",")
    assert header[:2] == ["term", "interaction"]
    assert header[2:11] == [
        "density",
        "reciprocity",
        "transitivity",
        "in_mean",
        "in_max",
        "in_min",
        "out_mean",
        "out_max",
        "out_min",
    ]
    assert header[11:20] == [m + "_defined" for m in header[2:11]]
    assert header[20] == "total"
    assert header[21] == "c000" and header[232] == "c211"
    assert header[233] == "n000" and header[-1] == "n211"
    assert len(header) == 2 + 9 + 9 + 1 + 212 + 212


def test_read_features_rejects_garbage(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("nope,really\n1,2\n")
    with pytest.raises(PipelineError):
        read_features_csv(p)
    p.write_text("term,interaction,other\nfoo,mention,1\n")
    with pytest.raises(PipelineError, match="neither"):
        read_features_csv(p)


def test_read_features_rejects_bad_cell(tmp_path, corpus_dir):
    records = parse_records((corpus_dir / "records.jsonl").read_text()).records
    corpus = build_corpus(records, read_terms_file(corpus_dir / "terms.txt"))
    outdir = tmp_path / "nets"
    write_networks(corpus, outdir, manifest_hash="a" * 64)
    rows = compute_features(read_networks(outdir), True, False)
    path = tmp_path / "features.csv"
    write_features_csv(rows, path, manifest_hash="a" * 64)
    text = path.read_text().splitlines()
    text[2] = text[2].replace(text[2].split(",")[2], "not-a-number", 1)
    path.write_text("\n".join(text) + "\n")
    with pytest.raises(PipelineError, match="bad numeric cell"):
        read_features_csv(path)


# ---------------------------------------------------------------- cli flows


def test_cli_version_and_usage(capsys):
    assert run_cli("--version") == 0
    assert "termnet" in capsys.readouterr().out
    assert run_cli() == 1  # missing subcommand
    assert run_cli("networks") == 1  # missing positionals
    assert run_cli("no-such-command") == 1


def test_cli_missing_input_is_exit_1(tmp_path, capsys):
    rc = run_cli("networks", tmp_path / "absent.jsonl", tmp_path / "absent.txt", "-o", tmp_path / "out")
    assert rc == 1
    assert "error" in capsys.readouterr().err


def test_cli_full_flow(tmp_path, capsys):
    corpus = tmp_path / "corpus"
    nets = tmp_path / "nets"
    outdir = tmp_path / "cls"
    features = tmp_path / "features.csv"
    labels = tmp_path / "labels.csv"

    assert run_cli("synth", "-o", corpus, "--terms", 6, "--records", 40, "--seed", 21) == 0
    assert run_cli("networks", corpus / "records.jsonl", corpus / "terms.txt", "-o", nets) == 0
    assert run_cli("features", nets, "-o", features, "--workers", 1) == 0
    assert run_cli("rank", corpus / "ratings.csv", "-o", labels) == 0
    assert run_cli("classify", features, labels, "-o", outdir, "--folds", 3) == 0
    capsys.readouterr()

    # network artifacts
    assert (nets / "summary.csv").exists() and (nets / "manifest.json").exists()
    edge_files = [f for f in os.listdir(nets) if f.endswith(".edges.csv")]
    assert len(edge_files) == 18

    # labels match the generator's ground truth
    truth = dict(
        line.split(",") for line in (corpus / "ground_truth.csv").read_text().splitlines()[1:]
    )
    got = {lab.term: lab.label for lab in read_labels_csv(labels)}
    assert got == truth

    # classification report: full grid in fixed order
    report = json.loads((outdir / "report.json").read_text())
    assert len(report["entries"]) == 24
    grid = [(e["feature_set"], e["classifier"]) for e in report["entries"]]
    assert grid == [(s, c) for s in FEATURE_SET_ORDER for c in CLASSIFIER_ORDER]
    assert report["positive_class"] == "controversial"
    assert report["folds"] == 3
    for e in report["entries"]:
        assert sum(e["confusion"].values()) == 6
    # PCA exports for every feature set
    for set_name in FEATURE_SET_ORDER:
        assert (outdir / f"pca-{set_name}-projection.csv").exists()
        assert (outdir / f"pca-{set_name}-loadings.csv").exists()
        assert report["pca"][set_name]["error"] is None


def test_cli_classify_matches_library(tmp_path, capsys):
    corpus = tmp_path / "corpus"
    nets = tmp_path / "nets"
    features = tmp_path / "features.csv"
    labels = tmp_path / "labels.csv"
    outdir = tmp_path / "cls"
    for argv in (
        ("synth", "-o", corpus, "--terms", 8, "--records", 30, "--seed", 5),
        ("networks", corpus / "records.jsonl", corpus / "terms.txt", "-o", nets),
        ("features", nets, "-o", features),
        ("rank", corpus / "ratings.csv", "-o", labels),
        ("classify", features, labels, "-o", outdir, "--folds", 4, "--seed", 3),
    ):
        assert run_cli(*argv) == 0
    capsys.readouterr()
    report = json.loads((outdir / "report.json").read_text())

    global_vecs, local_vecs = read_features_csv(features)
    datasets = ml.assemble_feature_sets(global_vecs, local_vecs, read_labels_csv(labels))
    for entry in report["entries"]:
        ref = ml.cross_validate(datasets[entry["feature_set"]], entry["classifier"], folds=4, seed=3)
        tp, fp, tn, fn = ref.confusion
        assert entry["confusion"] == {"tp": tp, "fp": fp, "tn": tn, "fn": fn}
        assert entry["metrics"] == {k: ref.metrics[k] for k in ml.METRIC_KEYS}


def test_cli_features_byte_identical_across_workers(tmp_path, capsys):
    corpus = tmp_path / "corpus"
    nets = tmp_path / "nets"
    run_cli("synth", "-o", corpus, "--terms", 3, "--records", 25, "--seed", 2)
    run_cli("networks", corpus / "records.jsonl", corpus / "terms.txt", "-o", nets)
    f1, f4 = tmp_path / "f1.csv", tmp_path / "f4.csv"
    assert run_cli("features", nets, "-o", f1, "--workers", 1) == 0
    assert run_cli("features", nets, "-o", f4, "--workers", 4) == 0
    capsys.readouterr()
    assert f1.read_bytes() == f4.read_bytes()
    m1 = json.loads((tmp_path / "f1.csv.manifest.json").read_text())
    m4 = json.loads((tmp_path / "f4.csv.manifest.json").read_text())
    assert m1 == m4  # worker count must not enter the manifest


def test_cli_window_excludes_everything(tmp_path, capsys):
    corpus = tmp_path / "corpus"
    nets = tmp_path / "nets"
    run_cli("synth", "-o", corpus, "--terms", 2, "--records", 10, "--seed", 1)
    rc = run_cli(
        "networks", corpus / "records.jsonl", corpus / "terms.txt", "-o", nets, "--from", "2030-01-01"
    )
    capsys.readouterr()
    assert rc == 0
    refs = read_networks(nets)
    assert all(r.graph.node_count == 0 and r.matched_records == 0 for r in refs)


def test_cli_manifest_dry_run(tmp_path, capsys):
    corpus = tmp_path / "corpus"
    run_cli("synth", "-o", corpus, "--terms", 2, "--records", 5, "--seed", 0)
    capsys.readouterr()
    out = tmp_path / "never"
    rc = run_cli("networks", corpus / "records.jsonl", corpus / "terms.txt", "-o", out, "--manifest")
    assert rc == 0
    printed = json.loads(capsys.readouterr().out)
    assert printed["command"] == "networks"
    assert len(printed["manifest_sha256"]) == 64
    assert set(printed["input_hashes"]) == {"records", "terms"}
    assert not out.exists()  # dry run writes nothing


def test_cli_manifest_tracks_content_not_path(tmp_path, capsys):
    a = tmp_path / "a"
    b = tmp_path / "b"
    run_cli("synth", "-o", a, "--terms", 2, "--records", 5, "--seed", 0)
    run_cli("synth", "-o", b, "--terms", 2, "--records", 5, "--seed", 0)
    capsys.readouterr()
    run_cli("networks", a / "records.jsonl", a / "terms.txt", "-o", tmp_path / "oa", "--manifest")
    out_a = capsys.readouterr().out
    run_cli("networks", b / "records.jsonl", b / "terms.txt", "-o", tmp_path / "ob", "--manifest")
    out_b = capsys.readouterr().out
    assert json.loads(out_a) == json.loads(out_b)


def test_cli_classify_deterministic_bytes(tmp_path, capsys):
    corpus = tmp_path / "corpus"
    nets = tmp_path / "nets"
    features = tmp_path / "features.csv"
    labels = tmp_path / "labels.csv"
    run_cli("synth", "-o", corpus, "--terms", 6, "--records", 30, "--seed", 8)
    run_cli("networks", corpus / "records.jsonl", corpus / "terms.txt", "-o", nets)
    run_cli("features", nets, "-o", features)
    run_cli("rank", corpus / "ratings.csv", "-o", labels)
    d1, d2 = tmp_path / "c1", tmp_path / "c2"
    assert run_cli("classify", features, labels, "-o", d1, "--folds", 3) == 0
    assert run_cli("classify", features, labels, "-o", d2, "--folds", 3) == 0
    capsys.readouterr()
    for name in sorted(os.listdir(d1)):
        assert (d1 / name).read_bytes() == (d2 / name).read_bytes(), name


def test_cli_classify_needs_both_blocks(tmp_path, capsys):
    corpus = tmp_path / "corpus"
    nets = tmp_path / "nets"
    features = tmp_path / "features.csv"
    labels = tmp_path / "labels.csv"
    run_cli("synth", "-o", corpus, "--terms", 4, "--records", 20, "--seed", 3)
    run_cli("networks", corpus / "records.jsonl", corpus / "terms.txt", "-o", nets)
    run_cli("features", nets, "-o", features, "--global")  # census block omitted
    run_cli("rank", corpus / "ratings.csv", "-o", labels)
    rc = run_cli("classify", features, labels, "-o", tmp_path / "cls", "--folds", 2)
    assert rc == 1
    assert "error" in capsys.readouterr().err


def test_cli_internal_error_is_exit_2(tmp_path, capsys, monkeypatch):
    corpus = tmp_path / "corpus"
    run_cli("synth", "-o", corpus, "--terms", 2, "--records", 5, "--seed", 0)
    capsys.readouterr()
    import termnet.cli as cli_mod

    def boom(*a, **kw):
        raise ValueError("invariant violated")

    monkeypatch.setattr(cli_mod, "build_corpus", boom)
    rc = run_cli("networks", corpus / "records.jsonl", corpus / "terms.txt", "-o", tmp_path / "out")
    assert rc == 2
    assert "internal error" in capsys.readouterr().err


def test_cli_rank_threshold_flag(tmp_path, capsys):
    ratings = tmp_path / "ratings.csv"
    ratings.write_text("term,participant,score\nhot,p1,2\nhot,p2,2\nmild,p1,1\nmild,p2,1\n")
    labels = tmp_path / "labels.csv"
    assert run_cli("rank", ratings, "-o", labels, "--threshold", "1.5") == 0
    capsys.readouterr()
    got = {lab.term: lab.label for lab in read_labels_csv(labels)}
    assert got == {"hot": "controversial", "mild": "non-controversial"}


def test_cli_class_table(tmp_path, capsys):
    out = tmp_path / "classes.csv"
    assert run_cli("class-table", "-o", out) == 0
    capsys.readouterr()
    lines = out.read_text().splitlines()
    data = [l for l in lines if not l.startswith("# ")]
    assert data[0] == "class_id,k,canonical_code_hex,edge_list"
    assert len(data) == 1 + 212
    assert (tmp_path / "classes.csv.manifest.json").exists()


def test_cli_synth_rejects_bad_params(tmp_path, capsys):
    assert run_cli("synth", "-o", tmp_path / "x", "--terms", 0) == 1
    assert "error" in capsys.readouterr().err


def test_compute_features_order(tmp_path, corpus_dir):
    records = parse_records((corpus_dir / "records.jsonl").read_text()).records
    corpus = build_corpus(records, read_terms_file(corpus_dir / "terms.txt"))
    outdir = tmp_path / "nets"
    write_networks(corpus, outdir, manifest_hash="b" * 64)
    rows = compute_features(read_networks(outdir), True, False)
    keys = [(r.term, r.kind) for r in rows]
    terms = sorted({r.term for r in rows})
    assert keys == [(t, k) for t in terms for k in ("mention", "reply", "quote")]
