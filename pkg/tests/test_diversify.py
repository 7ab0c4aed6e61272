import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from divsearch.diversify import ProbMatrix, XquadConfig, normalize, pm2, xquad
from divsearch.errors import DataError
from divsearch.scoring import ScoreMatrix
from oracles import pm2_step_simulator, xquad_step_simulator


def make_probs(docnos, q0, intent_cols):
    labels = ["q0"] + [f"i{j}" for j in range(1, len(intent_cols) + 1)]
    columns = {"q0": list(q0)}
    for j, col in enumerate(intent_cols, 1):
        columns[f"i{j}"] = list(col)
    return ProbMatrix(qid="t", docnos=list(docnos), labels=labels, columns=columns)


# --- normalize -------------------------------------------------------------------


def test_normalize_minmax():
    matrix = ScoreMatrix(qid="1", docnos=["a", "b"], labels=["q0"],
                         columns={"q0": [2.0, 4.0]})
    assert normalize(matrix).columns["q0"] == [0.0, 1.0]


def test_normalize_constant_column():
    matrix = ScoreMatrix(qid="1", docnos=["a", "b"], labels=["q0"],
                         columns={"q0": [3.0, 3.0]})
    assert normalize(matrix).columns["q0"] == [0.0, 0.0]


@settings(max_examples=80)
@given(
    st.lists(st.floats(min_value=-100, max_value=100), min_size=2, max_size=8),
    st.floats(min_value=0.1, max_value=10),
    st.floats(min_value=-50, max_value=50),
)
def test_normalize_affine_invariance(values, a, b):
    from hypothesis import assume

    # exclude spreads so small that a*v + b cancels them in float arithmetic
    assume(max(values) - min(values) >= 1e-3 or max(values) == min(values))
    base = ScoreMatrix(qid="1", docnos=[f"d{i}" for i in range(len(values))],
                       labels=["q0"], columns={"q0": values})
    scaled = ScoreMatrix(qid="1", docnos=base.docnos, labels=["q0"],
                         columns={"q0": [a * v + b for v in values]})
    got = normalize(scaled).columns["q0"]
    expected = normalize(base).columns["q0"]
    assert got == pytest.approx(expected, abs=1e-6)


# --- xQuAD -------------------------------------------------------------------------


def test_xquad_lambda_zero_sorts_by_relevance():
    probs = make_probs(["a", "b", "c", "d"], [0.2, 0.9, 0.5, 0.9], [[1, 0, 1, 0]])
    ranking = xquad(probs, XquadConfig(lam=0.0), depth=None)
    assert ranking == ["b", "d", "c", "a"]  # ties broken by pool order


def test_xquad_lambda_one_three_docs():
    probs = make_probs(
        ["A", "B", "C"], [0.9, 0.8, 0.1], [[1, 1, 0], [0, 0, 1]]
    )
    ranking = xquad(probs, XquadConfig(lam=1.0), depth=None)
    assert ranking == ["A", "C", "B"]


def test_xquad_single_intent_discounting():
    # first pick: argmax of i1; later picks discounted by (1 - P)
    probs = make_probs(
        ["a", "b", "c", "d"], [0.0, 0.0, 0.0, 0.0],
        [[0.5, 0.9, 0.8, 0.1]],
    )
    ranking = xquad(probs, XquadConfig(lam=1.0), depth=None)
    assert ranking[0] == "b"
    expected = xquad_step_simulator(["a", "b", "c", "d"], [0.0] * 4, [[0.5, 0.9, 0.8, 0.1]],
                               1.0, 4)
    assert ranking == expected


def test_xquad_ignores_q0_at_lambda_one():
    intent_cols = [[0.3, 0.7, 0.2]]
    base = make_probs(["a", "b", "c"], [0.9, 0.1, 0.5], intent_cols)
    messed = make_probs(["a", "b", "c"], [0.0, 0.0, 0.99], intent_cols)
    cfg = XquadConfig(lam=1.0)
    assert xquad(base, cfg, depth=None) == xquad(messed, cfg, depth=None)


def test_xquad_priors_validation():
    probs = make_probs(["a"], [1.0], [[1.0], [0.0]])
    with pytest.raises(DataError):
        xquad(probs, XquadConfig(lam=0.5, priors=[0.9, 0.2]))
    with pytest.raises(DataError):
        xquad(probs, XquadConfig(lam=0.5, priors=[1.0]))
    ranking = xquad(probs, XquadConfig(lam=0.5, priors=[0.7, 0.3]), depth=None)
    assert ranking == ["a"]


def test_xquad_matches_simulator_on_random_pools():
    rng = random.Random(23)
    for _ in range(50):
        n_docs = rng.randint(1, 6)
        n_intents = rng.randint(0, 3)
        docnos = [f"d{i}" for i in range(n_docs)]
        q0 = [round(rng.random(), 3) for _ in range(n_docs)]
        cols = [
            [round(rng.random(), 3) for _ in range(n_docs)] for _ in range(n_intents)
        ]
        lam = rng.choice([0.0, 0.3, 0.5, 0.8, 1.0])
        probs = make_probs(docnos, q0, cols)
        assert xquad(probs, XquadConfig(lam=lam), depth=None) == xquad_step_simulator(
            docnos, q0, cols, lam, n_docs
        )


def test_xquad_outputs_permutation():
    probs = make_probs(["a", "b", "c"], [0.1, 0.2, 0.3], [[1.0, 0.5, 0.0]])
    ranking = xquad(probs, XquadConfig(lam=0.7), depth=None)
    assert sorted(ranking) == ["a", "b", "c"]
    top2 = xquad(probs, XquadConfig(lam=0.7), depth=2)
    assert top2 == ranking[:2]


def test_xquad_empty_pool():
    probs = make_probs([], [], [[]])
    assert xquad(probs, XquadConfig(lam=0.5), depth=None) == []


# --- PM2 -----------------------------------------------------------------------------


def test_pm2_single_intent_sorts_by_probability():
    probs = make_probs(["a", "b", "c", "d"], [0.0] * 4, [[0.2, 0.9, 0.5, 0.7]])
    for lam in (0.3, 0.5, 1.0):
        assert pm2(probs, lam=lam, depth=None) == ["b", "d", "c", "a"]


def test_pm2_two_disjoint_intents_alternate():
    probs = make_probs(
        ["a1", "a2", "b1", "b2"],
        [0.0] * 4,
        [[1.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 1.0]],
    )
    ranking = pm2(probs, lam=1.0, depth=None)
    groups = ["a" if d.startswith("a") else "b" for d in ranking]
    assert groups == ["a", "b", "a", "b"]


def test_pm2_all_zero_scores_preserve_pool_order():
    probs = make_probs(["x", "y", "z"], [0.0] * 3, [[0.0, 0.0, 0.0]])
    assert pm2(probs, lam=0.5, depth=None) == ["x", "y", "z"]


def test_pm2_requires_intent_columns():
    probs = ProbMatrix(qid="1", docnos=["a"], labels=["q0"], columns={"q0": [1.0]})
    with pytest.raises(DataError):
        pm2(probs, lam=0.5)


def test_pm2_matches_simulator_on_random_pools():
    rng = random.Random(31)
    for _ in range(50):
        n_docs = rng.randint(1, 6)
        n_intents = rng.randint(1, 3)
        docnos = [f"d{i}" for i in range(n_docs)]
        cols = [
            [round(rng.random(), 3) for _ in range(n_docs)] for _ in range(n_intents)
        ]
        lam = rng.choice([0.0, 0.3, 0.5, 0.8, 1.0])
        probs = make_probs(docnos, [0.0] * n_docs, cols)
        assert pm2(probs, lam=lam, depth=None) == pm2_step_simulator(
            docnos, cols, lam, n_docs
        )


def test_pm2_seats_conserved():
    rng = random.Random(7)
    n_docs, n_intents = 6, 3
    docnos = [f"d{i}" for i in range(n_docs)]
    # every document has at least one nonzero intent probability
    cols = [[rng.uniform(0.1, 1.0) for _ in range(n_docs)] for _ in range(n_intents)]
    trace: list = []
    pm2(make_probs(docnos, [0.0] * n_docs, cols), lam=0.8, depth=None, trace=trace)
    # re-simulate to read the seats: after r steps the seats sum to r
    votes = [1.0 / n_intents] * n_intents
    seats = [0.0] * n_intents
    order = [docnos.index(step["docno"]) for step in trace]
    for r, idx in enumerate(order, 1):
        denom = sum(col[idx] for col in cols)
        for j in range(n_intents):
            seats[j] += cols[j][idx] / denom
        assert sum(seats) == pytest.approx(r)


def test_aggregators_invariant_to_affine_raw_rescaling():
    rng = random.Random(3)
    docnos = [f"d{i}" for i in range(5)]
    raw_cols = {
        "q0": [rng.uniform(-5, 5) for _ in range(5)],
        "i1": [rng.uniform(0, 10) for _ in range(5)],
        "i2": [rng.uniform(0, 10) for _ in range(5)],
    }
    base = ScoreMatrix(qid="1", docnos=docnos, labels=["q0", "i1", "i2"],
                       columns=raw_cols)
    scaled = ScoreMatrix(
        qid="1", docnos=docnos, labels=["q0", "i1", "i2"],
        columns={k: [3.5 * v + 2.0 for v in vs] for k, vs in raw_cols.items()},
    )
    for lam in (0.0, 0.5, 1.0):
        assert xquad(normalize(base), XquadConfig(lam=lam), depth=None) == xquad(
            normalize(scaled), XquadConfig(lam=lam), depth=None
        )
        assert pm2(normalize(base), lam=lam, depth=None) == pm2(
            normalize(scaled), lam=lam, depth=None
        )
