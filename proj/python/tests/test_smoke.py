import json
import math

import pytest

import kbtrust


def record(e, w, s, p, o, conf=1.0):
    return json.dumps({"extractor": e, "website": w, "subject": s, "predicate": p, "object": o, "confidence": conf})


def test_ingest_reports_bad_lines():
    text = "\n".join([
        record("E1", "a.com", "Obama", "nationality", "USA"),
        "not json",
        record("E1", "b.com", "Obama", "nationality", "Kenya", 1.3),
    ])
    store, errors = kbtrust.ingest(text)
    assert store.n_records == 1
    assert [line for line, _ in errors] == [2, 3]


def test_votes_and_posteriors():
    q = kbtrust.derive_q(0.5, 0.5, 0.25)
    assert q == pytest.approx(1 / 6)
    pre, absent = kbtrust.compute_vote(0.5, q)
    assert pre == pytest.approx(math.log(0.5) - math.log(q))
    assert absent == pytest.approx(math.log(0.5) - math.log(1 - q))
    c = kbtrust.extraction_posterior([(0.5, q, 1.0)], alpha=0.5)
    assert c == pytest.approx(1 / (1 + math.exp(-pre)))
    probs, residual = kbtrust.value_posterior([(0, 1.0, 0.5)], k=1, n=10)
    assert probs[0] == pytest.approx(10 / 20)
    assert residual == pytest.approx(1 / 20)
    assert kbtrust.update_alpha(1.0, 0.7) == pytest.approx(0.7)


def test_synth_fuse_evaluate(tmp_path):
    files = kbtrust.synth(sources=5, extractors=3, triples=40, seed=3)
    store, errors = kbtrust.ingest(files["records.jsonl"])
    assert not errors and store.n_records > 0
    out = kbtrust.fuse(store, "multi", iters=3)
    assert "source_kbt.tsv" in out and "triple_truth.tsv" in out
    kbtrust.commit(str(tmp_path), out)
    report = kbtrust.evaluate(str(tmp_path), files["truth.json"])
    assert 0.0 <= report["sqv"] <= 1.0
    assert report["cov"] == pytest.approx(1.0)
    again = kbtrust.fuse(store, "multi", iters=3, workers=2)
    assert again == out


def test_layers_and_options():
    files = kbtrust.synth(sources=4, extractors=2, triples=30, seed=1)
    store, _ = kbtrust.ingest(files["records.jsonl"])
    pairs = kbtrust.single_layer(store)
    assert pairs and all(0.0 <= a <= 1.0 for a in pairs.values())
    q = kbtrust.multi_layer(store, t_max=2)
    assert set(q) == {"A", "P", "R", "Q", "iterations"}
    with pytest.raises(KeyError):
        kbtrust.fuse(store, "multi", bogus=1)
    with pytest.raises(ValueError):
        kbtrust.fuse(store, "nope")


def test_split_and_merge():
    nodes = kbtrust.split_and_merge([f"site.com|nationality|p{i}" for i in range(1000)], 5, 500)
    assert sorted(size for _, size in nodes) == [500, 500]


def test_metrics():
    assert kbtrust.square_loss({"a": 0.6}, {"a": 1.0}) == pytest.approx(0.16)
    assert kbtrust.wdev([(0.95, False)] * 10) == pytest.approx(0.9025)
    assert kbtrust.auc_pr([(0.9, True), (0.1, False)]) == pytest.approx(1.0)
    assert kbtrust.auc_pr([(0.9, False)]) is None
    assert kbtrust.coverage(3, 4) == 0.75
