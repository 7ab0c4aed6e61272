import json
import math
import random

import pytest

from divsearch.errors import DataError
from divsearch.intentgen import (
    CountLM,
    IntentSet,
    beam_search,
    filter_intents,
    generate,
    read_intents_jsonl,
    write_intents_jsonl,
)
from divsearch.querylog import QueryCollection, build_prefix_tree, node_at
from divsearch.tokens import EOQ


# --- oracles -----------------------------------------------------------------


def enumerate_completions(tree, query):
    """Exhaustive enumeration of every completion below the query node.

    Log-probabilities are accumulated in path order, mirroring how a decoder
    would sum per-step conditionals.
    """
    start = node_at(tree, query)
    if start is None:
        return []
    results = []

    def rec(node, continuation, lp):
        if node.end_count:
            results.append((continuation, lp + math.log(node.end_count / node.count)))
        for tok, child in node.children.items():
            rec(child, continuation + [tok], lp + math.log(child.count / node.count))

    rec(start, [], 0.0)
    results.sort(key=lambda r: (-r[1], r[0]))
    return results


def greedy_decode(model, query, max_tokens=10):
    """Independent greedy decoder: argmax token each step, stop on EOQ."""
    tokens = []
    lp = 0.0
    for _ in range(max_tokens):
        dist = model.next_distribution(list(query) + tokens)
        if not dist:
            break
        best = min(dist.items(), key=lambda kv: (-kv[1], kv[0]))
        lp += math.log(best[1])
        if best[0] == EOQ:
            return tokens, lp
        tokens.append(best[0])
    return tokens, lp


def count_leaves_and_ends(node):
    leaves = 0 if node.children else 1
    ends = 1 if node.end_count else 0
    for child in node.children.values():
        sub_leaves, sub_ends = count_leaves_and_ends(child)
        leaves += sub_leaves
        ends += sub_ends
    return leaves, ends


def random_collection(rng, n_queries, vocab_size=6, max_len=4):
    vocab = [f"w{i}" for i in range(vocab_size)]
    return QueryCollection(
        [" ".join(rng.choices(vocab, k=rng.randint(1, max_len))) for _ in range(n_queries)]
    )


# --- CountLM -----------------------------------------------------------------


def test_countlm_distribution(toy_queries):
    tree = build_prefix_tree(QueryCollection(toy_queries))
    lm = CountLM(tree)
    dist = lm.next_distribution(["penguins"])
    assert dist == {"adaptations": 0.25, "animals": 0.5, "hockey": 0.25}
    dist = lm.next_distribution(["penguins", "animals"])
    assert dist == {EOQ: 0.5, "facts": 0.5}
    assert lm.next_distribution(["unknown"]) == {}


def test_countlm_sums_to_one(toy_queries):
    tree = build_prefix_tree(QueryCollection(toy_queries))
    lm = CountLM(tree)
    for prefix in (["penguins"], ["penguins", "animals"], ["penguins", "hockey"]):
        assert sum(lm.next_distribution(prefix).values()) == pytest.approx(1.0)


# --- beam search --------------------------------------------------------------


def test_single_path_tree():
    tree = build_prefix_tree(QueryCollection(["a b c"]))
    result = beam_search(CountLM(tree), ["a"], beam=5)
    assert result == [(["b", "c"], 0.0)]


def test_beam_matches_exhaustive_enumeration(toy_queries):
    tree = build_prefix_tree(QueryCollection(toy_queries))
    expected = enumerate_completions(tree, ["penguins"])
    leaves, ends = count_leaves_and_ends(tree.root)
    got = beam_search(CountLM(tree), ["penguins"], beam=leaves + ends)
    assert len(got) == len(expected)
    for (g_toks, g_lp), (e_toks, e_lp) in zip(got, expected):
        assert g_toks == e_toks
        assert g_lp == pytest.approx(e_lp, abs=1e-12)


def test_beam_matches_enumeration_on_random_tries():
    rng = random.Random(99)
    for trial in range(20):
        collection = random_collection(rng, n_queries=rng.randint(5, 60))
        tree = build_prefix_tree(collection)
        lm = CountLM(tree)
        query = [rng.choice(list(tree.root.children.keys()))]
        expected = enumerate_completions(tree, query)
        leaves, ends = count_leaves_and_ends(tree.root)
        got = beam_search(lm, query, beam=leaves + ends)
        assert [t for t, _ in got] == [t for t, _ in expected]
        for (_, g_lp), (_, e_lp) in zip(got, expected):
            assert g_lp == pytest.approx(e_lp, abs=1e-12)


def test_beam_one_is_greedy():
    rng = random.Random(5)
    for _ in range(10):
        tree = build_prefix_tree(random_collection(rng, n_queries=rng.randint(3, 40)))
        lm = CountLM(tree)
        query = [rng.choice(list(tree.root.children.keys()))]
        result = beam_search(lm, query, beam=1)
        assert len(result) == 1
        toks, lp = greedy_decode(lm, query)
        assert result[0][0] == toks
        assert result[0][1] == pytest.approx(lp, abs=1e-12)


def test_larger_beam_never_hurts_best():
    rng = random.Random(17)
    tree = build_prefix_tree(random_collection(rng, n_queries=40))
    lm = CountLM(tree)
    query = [sorted(tree.root.children)[0]]
    previous = -math.inf
    for beam in (1, 2, 4, 8, 16, 64):
        result = beam_search(lm, query, beam=beam)
        best = result[0][1]
        assert best >= previous - 1e-12
        previous = best


def test_empty_distribution_at_step_zero():
    tree = build_prefix_tree(QueryCollection(["a b"]))
    assert beam_search(CountLM(tree), ["unseen"], beam=3) == []


def test_ten_token_cap():
    query = " ".join(f"t{i:02d}" for i in range(10))
    tree = build_prefix_tree(QueryCollection([query]))
    result = beam_search(CountLM(tree), ["t00"], beam=2, max_tokens=10)
    # the nine remaining tokens end the stored query; the cap is not hit
    assert result == [([f"t{i:02d}" for i in range(1, 10)], 0.0)]


class LoopModel:
    """Never emits EOQ; forces the token cap."""

    def next_distribution(self, prefix):
        return {"again": 1.0}


def test_cap_limits_generation():
    result = beam_search(LoopModel(), ["seed"], beam=1, max_tokens=10)
    assert result == [(["again"] * 10, 0.0)]


# --- filtering ----------------------------------------------------------------


def test_filter_discards_short_candidates():
    iset = filter_intents([(["com"], -0.1)], ["penguins"], n=5)
    assert iset.intents == []
    iset = filter_intents([([".com"], -0.1)], ["penguins"], n=5)
    assert iset.intents == []


def test_filter_removes_query_terms():
    iset = filter_intents([(["penguins", "habitat"], -0.5)], ["penguins"], n=5)
    assert len(iset.intents) == 1
    intent = iset.intents[0]
    assert intent.continuation == ("habitat",)
    assert intent.full_text == "penguins habitat"


def test_filter_six_char_boundary():
    # five characters out, six characters in
    assert filter_intents([(["abcde"], -1.0)], ["q"], n=5).intents == []
    kept = filter_intents([(["abcdef"], -1.0)], ["q"], n=5).intents
    assert len(kept) == 1
    # spaces between tokens do not count
    assert filter_intents([(["abc", "de"], -1.0)], ["q"], n=5).intents == []
    assert len(filter_intents([(["abc", "def"], -1.0)], ["q"], n=5).intents) == 1


def test_filter_dedupes_keeping_higher_logprob():
    iset = filter_intents(
        [(["panels"], -2.0), (["panels"], -1.0)], ["solar"], n=5
    )
    assert len(iset.intents) == 1
    assert iset.intents[0].logprob == -1.0


def test_filter_caps_at_n_and_sorts():
    raw = [(["zwords"], -1.0), (["awords"], -1.0), (["mwords"], -0.5)]
    iset = filter_intents(raw, ["q"], n=2)
    assert [i.continuation for i in iset.intents] == [("mwords",), ("awords",)]


def test_filter_idempotent():
    raw = [(["habitat"], -0.3), (["hockey"], -0.9), (["tiny"], -0.1)]
    first = filter_intents(raw, ["penguins"], n=5)
    again = filter_intents(
        [(list(i.continuation), i.logprob) for i in first.intents], ["penguins"], n=5
    )
    assert [(i.continuation, i.logprob) for i in first.intents] == [
        (i.continuation, i.logprob) for i in again.intents
    ]


def test_filter_rejects_bad_n():
    with pytest.raises(ValueError):
        filter_intents([], ["q"], n=0)


# --- generate -----------------------------------------------------------------


def test_generate_deterministic(toy_queries):
    tree = build_prefix_tree(QueryCollection(toy_queries))
    lm = CountLM(tree)
    a = generate(lm, "penguins", n=3, beam=10)
    b = generate(lm, "penguins", n=3, beam=10)
    assert json.dumps(
        [(i.full_text, i.logprob) for i in a.intents]
    ) == json.dumps([(i.full_text, i.logprob) for i in b.intents])


def test_generate_toy_tree_expected_intents(toy_queries):
    tree = build_prefix_tree(QueryCollection(toy_queries))
    iset = generate(CountLM(tree), "penguins", n=3, beam=10)
    # every completion ties at p = 0.25; the declared tie-break is lexicographic
    assert [i.full_text for i in iset.intents] == [
        "penguins adaptations",
        "penguins animals",
        "penguins animals facts",
    ]


def test_generate_no_continuations():
    tree = build_prefix_tree(QueryCollection(["penguins"]))
    iset = generate(CountLM(tree), "penguins", n=3)
    assert iset.intents == []


def test_generate_rejects_empty_query(toy_queries):
    tree = build_prefix_tree(QueryCollection(toy_queries))
    with pytest.raises(ValueError):
        generate(CountLM(tree), "   ", n=3)


# --- intents file format --------------------------------------------------------


def test_intents_jsonl_roundtrip(tmp_path, toy_queries):
    tree = build_prefix_tree(QueryCollection(toy_queries))
    lm = CountLM(tree)
    sets = [("1", generate(lm, "penguins", n=3, beam=10))]
    path = tmp_path / "intents.jsonl"
    write_intents_jsonl(sets, str(path))
    loaded = read_intents_jsonl(str(path))
    assert list(loaded) == ["1"]
    assert [i.full_text for i in loaded["1"].intents] == [
        i.full_text for i in sets[0][1].intents
    ]
    assert [i.logprob for i in loaded["1"].intents] == [
        i.logprob for i in sets[0][1].intents
    ]


def test_intents_jsonl_rejects_bad_records(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"qid": "1"}\n')
    with pytest.raises(DataError, match="bad.jsonl:1"):
        read_intents_jsonl(str(path))
    path.write_text(
        '{"qid": "1", "intents": []}\n{"qid": "1", "intents": []}\n'
    )
    with pytest.raises(DataError, match="duplicate qid"):
        read_intents_jsonl(str(path))
