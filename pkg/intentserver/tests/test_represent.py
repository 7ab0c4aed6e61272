import json

import numpy as np
import pytest

from conftest import write_jsonl
from intentserver.represent import extract_representations


def read_vectors(path):
    return [json.loads(line) for line in open(path) if line.strip()]


def test_identical_passages_give_identical_vectors(jaguar_checkpoint, tmp_path):
    passages = write_jsonl(
        [
            {"passage_id": "x1", "text": "the jaguar car is parked"},
            {"passage_id": "x2", "text": "the jaguar car is parked"},
        ],
        tmp_path / "p.jsonl",
    )
    out = tmp_path / "v.jsonl"
    count = extract_representations(
        jaguar_checkpoint.checkpoint, "jaguar", passages, str(out)
    )
    assert count == 2
    rows = read_vectors(out)
    assert rows[0]["vector"] == rows[1]["vector"]


def test_vector_width_is_subword_concatenation(jaguar_checkpoint, tmp_path):
    # "jaguar" splits into two chunks, so vectors carry 2 * d_model floats
    passages = write_jsonl(
        [{"passage_id": "x", "text": "a jaguar car"}], tmp_path / "p.jsonl"
    )
    out = tmp_path / "v.jsonl"
    extract_representations(jaguar_checkpoint.checkpoint, "jaguar", passages, str(out))
    cfg = json.load(open(f"{jaguar_checkpoint.checkpoint}/config.json"))
    rows = read_vectors(out)
    assert len(rows[0]["vector"]) == 2 * cfg["d_model"]


def test_budget_sampling_is_seed_reproducible(jaguar_checkpoint, tmp_path):
    passages = write_jsonl(
        [
            {"passage_id": f"p{i:03d}", "text": f"jaguar car number{i}"}
            for i in range(100)
        ],
        tmp_path / "p.jsonl",
    )
    out_a, out_b, out_c = (tmp_path / n for n in ("a.jsonl", "b.jsonl", "c.jsonl"))
    assert extract_representations(
        jaguar_checkpoint.checkpoint, "jaguar", passages, str(out_a), budget=10, seed=4
    ) == 10
    extract_representations(
        jaguar_checkpoint.checkpoint, "jaguar", passages, str(out_b), budget=10, seed=4
    )
    extract_representations(
        jaguar_checkpoint.checkpoint, "jaguar", passages, str(out_c), budget=10, seed=5
    )
    ids_a = [r["passage_id"] for r in read_vectors(out_a)]
    ids_b = [r["passage_id"] for r in read_vectors(out_b)]
    ids_c = [r["passage_id"] for r in read_vectors(out_c)]
    assert ids_a == ids_b
    assert ids_a != ids_c


def test_distinct_senses_are_farther_apart(
    jaguar_checkpoint, jaguar_passages_path, tmp_path
):
    out = tmp_path / "v.jsonl"
    extract_representations(
        jaguar_checkpoint.checkpoint, "jaguar", jaguar_passages_path, str(out)
    )
    vectors = {r["passage_id"]: np.array(r["vector"]) for r in read_vectors(out)}

    def cosine_distance(a, b):
        return 1 - float(np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b)))

    same_sense = cosine_distance(vectors["p1"], vectors["p2"])  # both car
    cross_sense = cosine_distance(vectors["p1"], vectors["p3"])  # car vs animal
    assert cross_sense > same_sense


def test_missing_term_writes_empty_file_with_warning(
    jaguar_checkpoint, tmp_path, capsys
):
    passages = write_jsonl(
        [{"passage_id": "q", "text": "nothing of interest here"}],
        tmp_path / "p.jsonl",
    )
    out = tmp_path / "v.jsonl"
    count = extract_representations(
        jaguar_checkpoint.checkpoint, "jaguar", passages, str(out)
    )
    assert count == 0
    assert out.read_text() == ""
    assert "not found" in capsys.readouterr().err
