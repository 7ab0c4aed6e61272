import pytest

from conftest import clm_rows, dclm_rows, write_jsonl
from intentserver.data import SampleError, load_rows
from intentserver.vocab import EOQ, Vocab, chunk_word, chunk_words, tokenize


def test_chunking_is_deterministic():
    assert chunk_word("fishing") == ["fish", "@@ing"]
    assert chunk_word("bass") == ["bass"]
    assert chunk_word("abcdefghij") == ["abcd", "@@efgh", "@@ij"]
    assert chunk_words(["bass", "fishing"]) == ["bass", "fish", "@@ing"]


def test_tokenize_policy():
    assert tokenize("Jaguar, Car!") == ["jaguar", "car"]
    assert tokenize("  many   spaces ") == ["many", "spaces"]


def test_vocab_roundtrip():
    vocab = Vocab(["beta", "alpha", "beta"])
    assert vocab.itos[:2] == ["<pad>", "<unk>"]
    assert vocab.encode(["alpha", "missing"]) == [vocab.id("alpha"), 1]
    clone = Vocab.from_list(vocab.to_list())
    assert clone.stoi == vocab.stoi


def test_load_rows_clm_and_dclm(tmp_path):
    clm = write_jsonl(clm_rows(["a b c"]), tmp_path / "clm.jsonl")
    rows = load_rows(clm, objective="clm")
    assert [(r.prefix, r.targets) for r in rows] == [
        (["a"], ["b"]),
        (["a", "b"], ["c"]),
        (["a", "b", "c"], [EOQ]),
    ]
    dclm = write_jsonl(dclm_rows(["a b", "a c"]), tmp_path / "dclm.jsonl")
    rows = load_rows(dclm, objective="dclm")
    # one row per query position; the shared prefix repeats with the full set
    assert [(r.prefix, r.targets) for r in rows] == [
        (["a"], ["b", "c"]),
        (["a"], ["b", "c"]),
    ]


def test_single_path_dclm_degenerates_to_clm(tmp_path):
    # a chain of queries: every target set is a singleton, matching the
    # per-position rows apart from the end markers
    queries = ["one two three four"]
    dclm = load_rows(write_jsonl(dclm_rows(queries), tmp_path / "d.jsonl"))
    clm = load_rows(write_jsonl(clm_rows(queries), tmp_path / "c.jsonl"))
    clm_no_end = [r for r in clm if r.targets != [EOQ]]
    assert [(r.prefix, r.targets) for r in dclm] == [
        (r.prefix, r.targets) for r in clm_no_end
    ]


def test_malformed_lines_abort_with_line_number(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"prefix": ["a"], "next": "b"}\nnot json\n')
    with pytest.raises(SampleError, match="bad.jsonl:2"):
        load_rows(str(path))
    path.write_text('{"prefix": [], "next": "b"}\n')
    with pytest.raises(SampleError, match="bad.jsonl:1"):
        load_rows(str(path))
    path.write_text('{"prefix": ["a"]}\n')
    with pytest.raises(SampleError, match="targets.*next|next.*targets"):
        load_rows(str(path))


def test_objective_mismatch_rejected(tmp_path):
    path = write_jsonl(clm_rows(["a b"]), tmp_path / "clm.jsonl")
    with pytest.raises(SampleError, match="clm sample in a dclm run"):
        load_rows(path, objective="dclm")
