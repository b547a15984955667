import itertools
import json
import random

import pytest

from registerdex.eval_harness import (AblatedRecognizer, BenchReport, EvalQuery,
                                      FixedMappingRecognizer,
                                      RandomViewRecognizer, ablate_tree,
                                      adversarial_mapping,
                                      attach_root_abstracts,
                                      generate_planted_corpus,
                                      generate_planted_queries,
                                      load_eval_queries, planted_token,
                                      recall_at_k, run_benchmark,
                                      run_layer_ablation, write_eval_queries)
from registerdex.index_tree import IndexKind, build_index_tree
from registerdex.recognizer import RecognizerOutput, View
from registerdex.retrieval import search
from registerdex.schema import NodePath, PaperType, all_paths, leaf_paths


# --- recall ----------------------------------------------------------------

def test_recall_trivials():
    assert recall_at_k(["a", "b", "c"], {"a"}, 1) == 1.0
    assert recall_at_k(["a", "b", "c"], {"c"}, 2) == 0.0
    assert recall_at_k(["a", "b", "c"], {"a", "c"}, 3) == 1.0
    assert recall_at_k(["a", "b"], {"a", "z"}, 10) == 0.5
    assert recall_at_k([], {"a"}, 5) == 0.0


def test_recall_validation():
    with pytest.raises(ValueError):
        recall_at_k(["a"], {"a"}, 0)
    with pytest.raises(ValueError):
        recall_at_k(["a"], set(), 1)


def test_recall_monte_carlo_uniform_permutations():
    # k=10 over a 50-doc corpus with one relevant doc: expected recall 0.2
    rng = random.Random(13)
    ids = [f"d{i}" for i in range(50)]
    total = 0.0
    trials = 400
    for _ in range(trials):
        perm = ids[:]
        rng.shuffle(perm)
        total += recall_at_k(perm, {"d7"}, 10)
    assert abs(total / trials - 0.2) < 0.05


# --- benchmark -------------------------------------------------------------

QUERIES = [
    EvalQuery(query="qa", relevant_ids=frozenset({"a"}), granularity_tag="coarse"),
    EvalQuery(query="qb", relevant_ids=frozenset({"b"}), granularity_tag="fine-1"),
]


def test_run_benchmark_perfect_and_useless_systems():
    report = run_benchmark(QUERIES, {
        "perfect": lambda q: ["a"] if q == "qa" else ["b"],
        "useless": lambda q: ["z"],
    }, ks=(1,))
    assert report.cells["perfect"]["overall"]["r@1"] == 1.0
    assert report.cells["useless"]["overall"]["r@1"] == 0.0
    assert report.cells["perfect"]["coarse"]["r@1"] == 1.0
    assert report.query_counts == {"coarse": 1, "fine-1": 1, "overall": 2}


def test_run_benchmark_hand_summed_average():
    # system gets qa right at rank 1, qb right only at rank 2
    report = run_benchmark(QUERIES, {
        "half": lambda q: ["a", "b"] if q == "qa" else ["x", "b"],
    }, ks=(1, 2))
    assert report.cells["half"]["overall"]["r@1"] == 0.5
    assert report.cells["half"]["overall"]["r@2"] == 1.0


def test_run_benchmark_failing_system_reported_not_fatal():
    def boom(query):
        raise RuntimeError("ranker exploded")

    report = run_benchmark(QUERIES, {"ok": lambda q: ["a", "b"], "bad": boom}, ks=(1,))
    assert "bad" in report.errors and "exploded" in report.errors["bad"]
    assert "bad" not in report.cells
    assert "ok" in report.cells


def test_run_benchmark_requires_queries():
    with pytest.raises(ValueError):
        run_benchmark([], {"s": lambda q: []})


def test_report_serialization_deterministic_and_runtime_excluded():
    def build():
        return run_benchmark(QUERIES, {"s": lambda q: ["a"]}, ks=(1,), seed=3)

    a, b = build(), build()
    assert a.to_json() == b.to_json()
    assert "runtime" not in a.to_json()
    assert "runtime_seconds" in a.to_json(include_runtime=True)
    payload = json.loads(a.to_json())
    assert payload["seed"] == 3


def test_report_table_contains_all_systems():
    report = run_benchmark(QUERIES, {"alpha": lambda q: ["a"],
                                     "beta": lambda q: ["b"]}, ks=(1,))
    table = report.to_table()
    assert "alpha" in table and "beta" in table and "R@1" in table


def test_golden_report_regenerates_byte_identical(data_dir, fixture_corpus,
                                                  fixture_registers, fixture_tree,
                                                  schemas, algo_schema):
    from registerdex.retrieval import baseline_search, build_baseline_index

    queries, golden = generate_planted_queries(fixture_registers, algo_schema, seed=7)
    oracle = FixedMappingRecognizer(golden)
    abstract_index = build_baseline_index(fixture_corpus, "abstract")
    systems = {
        "hierarchical": lambda q: [d.paper_id for d in
                                   search(q, fixture_tree, oracle, schemas,
                                          k=1, m=10).ranked],
        "abstract": lambda q: [d.paper_id for d in
                               baseline_search(q, abstract_index, m=10).ranked],
    }
    report = run_benchmark(queries, systems)
    expected = (data_dir / "golden_report.json").read_text()
    assert report.to_json() + "\n" == expected


# --- eval query files ------------------------------------------------------

def test_eval_query_round_trip(tmp_path):
    path = tmp_path / "q.jsonl"
    write_eval_queries(QUERIES, str(path))
    loaded = load_eval_queries(str(path))
    assert loaded == QUERIES


def test_load_eval_queries_unknown_ids_rejected(tmp_path):
    path = tmp_path / "q.jsonl"
    write_eval_queries(QUERIES, str(path))
    with pytest.raises(ValueError, match="line 2"):
        load_eval_queries(str(path), corpus_ids={"a"})


def test_eval_query_requires_relevant_ids():
    with pytest.raises(ValueError):
        EvalQuery(query="q", relevant_ids=frozenset())


def test_fixture_eval_queries_loadable(data_dir, fixture_corpus):
    ids = {d.id for d in fixture_corpus}
    queries = load_eval_queries(str(data_dir / "eval_queries_20.jsonl"), ids)
    assert len(queries) == 80
    tags = {q.granularity_tag for q in queries}
    assert tags == {"coarse", "fine-1", "fine-2", "fine-3"}


# --- ablation --------------------------------------------------------------

def test_ablate_tree_keeps_only_requested_depths(fixture_tree):
    ablated = ablate_tree(fixture_tree, {1})
    assert all(p.depth == 1 for p in ablated.views)
    assert ablated.corpus_ids == fixture_tree.corpus_ids
    full = ablate_tree(fixture_tree, {1, 2, 3, 4})
    assert set(full.views) == set(fixture_tree.views)


def test_ablated_recognizer_filters_and_falls_back(algo_schema):
    root = View(NodePath.parse("Abstract"), PaperType.ALGORITHM_INNOVATION)
    deep = View(NodePath.parse("Abstract/Method"), PaperType.ALGORITHM_INNOVATION)

    class Fixed:
        def identify(self, query, k):
            return RecognizerOutput(views=(deep, root))

    kept = AblatedRecognizer(Fixed(), [root]).identify("q", 5)
    assert kept.views == (root,)
    # nothing survives -> catch-all
    other = View(NodePath.parse("Abstract/Experiment"), PaperType.ALGORITHM_INNOVATION)
    fallback = AblatedRecognizer(Fixed(), [other]).identify("q", 5)
    assert fallback.views == (other,)


def test_noop_ablation_matches_unablated(fixture_registers, fixture_tree, schemas,
                                         algo_schema):
    queries, golden = generate_planted_queries(fixture_registers, algo_schema, seed=7)
    oracle = FixedMappingRecognizer(golden)
    full = run_layer_ablation(queries, fixture_tree, {1, 2, 3, 4}, oracle, schemas)
    direct = run_benchmark(queries, {
        "layers=1,2,3,4": lambda q: [d.paper_id for d in
                                     search(q, fixture_tree, oracle, schemas,
                                            k=5, m=10).ranked]})
    assert full.cells == direct.cells


def test_layer_ablation_rejects_empty(fixture_tree, schemas):
    with pytest.raises(ValueError):
        run_layer_ablation(QUERIES, fixture_tree, set(), None, schemas)


# --- planted corpus --------------------------------------------------------

def test_generate_planted_corpus_shape(algo_schema):
    docs = generate_planted_corpus(5, algo_schema, seed=1)
    assert [d.id for d in docs] == [f"p{i:04d}" for i in range(5)]
    leaves = leaf_paths(algo_schema)
    for doc in docs:
        for j, leaf in enumerate(leaves):
            assert f"== path: {leaf} ==" in doc.full_text
            assert f"zz{doc.id}q{j}" in doc.full_text


def test_generate_planted_corpus_deterministic(algo_schema):
    a = generate_planted_corpus(4, algo_schema, seed=2)
    b = generate_planted_corpus(4, algo_schema, seed=2)
    assert a == b
    c = generate_planted_corpus(4, algo_schema, seed=3)
    assert a != c


def test_planted_token_extraction():
    assert planted_token("foo zzp0001q3 bar") == "zzp0001q3"
    assert planted_token("agg0123456789 synthesis of 2 parts") == "agg0123456789"
    assert planted_token("no special token here") is None


def test_planted_tokens_unique_per_register_node(golden_registers):
    seen = set()
    for register in golden_registers:
        for path, content in register.contents.items():
            token = planted_token(content)
            assert token is not None, (register.paper_id, str(path))
            assert (token not in seen) or token.startswith("agg"), token
            seen.add(token)


def test_generate_planted_queries_golden_views_valid(fixture_registers, algo_schema):
    queries, golden = generate_planted_queries(fixture_registers, algo_schema, seed=7)
    assert len(queries) == len(golden)
    valid = {str(p) for p in all_paths(algo_schema)}
    for query in queries:
        assert query.query in golden
        assert str(golden[query.query].path) in valid
        assert len(query.relevant_ids) == 1


def test_attach_root_abstracts(fixture_corpus, golden_registers, algo_schema):
    root = NodePath.parse("Abstract")
    by_id = {r.paper_id: r for r in golden_registers}
    for doc in attach_root_abstracts(fixture_corpus, golden_registers, algo_schema):
        assert doc.abstract == by_id[doc.id].contents[root]


# --- reference recognizers -------------------------------------------------

def test_fixed_mapping_recognizer():
    view = View(NodePath.parse("Abstract"), PaperType.ALGORITHM_INNOVATION)
    recognizer = FixedMappingRecognizer({"known": view})
    assert recognizer.identify("known", 3).views == (view,)
    assert recognizer.identify("unknown", 3).views == ()


def test_adversarial_mapping_never_golden(fixture_registers, algo_schema):
    _, golden = generate_planted_queries(fixture_registers, algo_schema, seed=7)
    wrong = adversarial_mapping(golden, algo_schema)
    assert set(wrong) == set(golden)
    for query in golden:
        assert str(wrong[query].path) != str(golden[query].path)


def test_random_view_recognizer_seeded_and_spread(algo_schema):
    recognizer = RandomViewRecognizer(algo_schema, seed=5)
    picks = {str(recognizer.identify(f"query {i}", 1).views[0].path)
             for i in range(60)}
    assert len(picks) > 3  # spreads over the tree
    again = RandomViewRecognizer(algo_schema, seed=5)
    for i in range(10):
        assert recognizer.identify(f"query {i}", 1) == again.identify(f"query {i}", 1)
