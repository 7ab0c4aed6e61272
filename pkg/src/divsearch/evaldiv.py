"""Intent-aware diversity metrics and the associated statistical tests.

Metrics follow the TREC diversity task conventions: per-intent novelty decay
(1 - alpha) per previously seen relevant document, a greedy ideal ranking for
normalization, and graded relevance mapped to stopping probabilities via
(2^g - 1) / 2^g_max. Topics with no relevant document score 0 and are flagged.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as scipy_stats

from .errors import DataError

METRICS = ("alpha_ndcg", "err_ia", "nrbp", "judged")


@dataclass
class MetricConfig:
    alpha: float = 0.5  # probability a positive judgment is wrong (novelty decay)
    beta: float = 0.5  # persistence of the simulated user
    cutoff: int = 20

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError("alpha must be in (0, 1]")
        if not 0.0 < self.beta < 1.0:
            raise ValueError("beta must be in (0, 1)")
        if self.cutoff < 1:
            raise ValueError("cutoff must be >= 1")


@dataclass
class TopicQrels:
    intents: list[int]  # subtopics with >= 1 positive judgment, ascending
    grades: dict[str, dict[int, int]]  # docno -> subtopic -> grade (> 0 only)
    judged: set[str]  # docnos with any judgment line, grade 0 included
    max_grade: int = 1


@dataclass
class DiversityQrels:
    topics: dict[str, TopicQrels] = field(default_factory=dict)
    max_grade: int = 1


def load_qrels(path: str) -> DiversityQrels:
    """Parse whitespace-separated `topic subtopic docno judgment` lines.

    Subtopic-0 lines mark documents as judged for the whole topic but carry
    no intent; duplicate (topic, subtopic, docno) keys are rejected.
    """
    topics: dict[str, TopicQrels] = {}
    seen: set[tuple[str, int, str]] = set()
    max_grade = 1
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 4:
                raise DataError(f"{path}:{lineno}: expected 4 columns, got {len(parts)}")
            topic, sub_str, docno, grade_str = parts
            try:
                subtopic = int(sub_str)
                grade = int(grade_str)
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: bad subtopic/judgment: {exc}") from exc
            if subtopic < 0:
                raise DataError(f"{path}:{lineno}: negative subtopic id")
            if grade < 0:
                raise DataError(f"{path}:{lineno}: negative judgment grade")
            key = (topic, subtopic, docno)
            if key in seen:
                raise DataError(f"{path}:{lineno}: duplicate qrels key {key}")
            seen.add(key)
            tq = topics.setdefault(
                topic, TopicQrels(intents=[], grades={}, judged=set())
            )
            tq.judged.add(docno)
            if subtopic > 0 and grade > 0:
                tq.grades.setdefault(docno, {})[subtopic] = grade
                if subtopic not in tq.intents:
                    tq.intents.append(subtopic)
                max_grade = max(max_grade, grade)
    for tq in topics.values():
        tq.intents.sort()
        tq.max_grade = max_grade
    return DiversityQrels(topics=topics, max_grade=max_grade)


def _novelty_gains(ranking: list[str], tq: TopicQrels, alpha: float):
    """Per-rank gain sum_i J(d, i) * (1 - alpha)^(prior relevant for i)."""
    seen = {i: 0 for i in tq.intents}
    gains = []
    for docno in ranking:
        doc_intents = tq.grades.get(docno, {})
        gain = 0.0
        for i in tq.intents:
            if i in doc_intents:
                gain += (1.0 - alpha) ** seen[i]
                seen[i] += 1
        gains.append(gain)
    return gains


def _ideal_alpha_dcg(tq: TopicQrels, alpha: float, k: int) -> float:
    """Greedy ideal: at each rank pick the judged doc with maximal marginal gain."""
    candidates = sorted(tq.grades.keys())
    seen = {i: 0 for i in tq.intents}
    dcg = 0.0
    for rank in range(1, k + 1):
        best_doc = None
        best_gain = 0.0
        for docno in candidates:
            gain = sum(
                (1.0 - alpha) ** seen[i] for i in tq.grades[docno] if i in seen
            )
            if gain > best_gain:
                best_gain = gain
                best_doc = docno
        if best_doc is None:
            break
        candidates.remove(best_doc)
        for i in tq.grades[best_doc]:
            if i in seen:
                seen[i] += 1
        dcg += best_gain / math.log2(rank + 1)
    return dcg


def alpha_ndcg(ranking: list[str], tq: TopicQrels, cfg: MetricConfig) -> float:
    """Novelty-discounted nDCG normalized by the greedy ideal, clamped to [0, 1]."""
    if not tq.intents:
        return 0.0
    k = cfg.cutoff
    gains = _novelty_gains(ranking[:k], tq, cfg.alpha)
    dcg = sum(g / math.log2(r + 1) for r, g in enumerate(gains, 1))
    ideal = _ideal_alpha_dcg(tq, cfg.alpha, k)
    if ideal <= 0.0:
        return 0.0
    return min(1.0, max(0.0, dcg / ideal))


def err_ia(ranking: list[str], tq: TopicQrels, cfg: MetricConfig) -> float:
    """Mean over intents of the expected reciprocal rank at the cutoff."""
    if not tq.intents:
        return 0.0
    top = ranking[: cfg.cutoff]
    denom = 2 ** tq.max_grade
    total = 0.0
    for i in tq.intents:
        not_stopped = 1.0
        err = 0.0
        for rank, docno in enumerate(top, 1):
            grade = tq.grades.get(docno, {}).get(i, 0)
            if grade > 0:
                r = (2**grade - 1) / denom
                err += not_stopped * r / rank
                not_stopped *= 1.0 - r
        total += err
    return total / len(tq.intents)


def nrbp(ranking: list[str], tq: TopicQrels, cfg: MetricConfig) -> float:
    """Novelty- and rank-biased precision over the full ranking (no cutoff)."""
    if not tq.intents:
        return 0.0
    gains = _novelty_gains(list(ranking), tq, cfg.alpha)
    total = sum(cfg.beta ** (r - 1) * g for r, g in enumerate(gains, 1))
    return (1.0 - (1.0 - cfg.alpha) * cfg.beta) / len(tq.intents) * total


def judged(ranking: list[str], tq: TopicQrels, k: int = 20) -> float:
    """Fraction of the top-k documents with any judgment entry (grade 0 counts)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    top = ranking[:k]
    if not top:
        return 0.0
    return sum(1 for d in top if d in tq.judged) / len(top)


@dataclass
class EvalResult:
    per_topic: dict[str, dict[str, float]]
    means: dict[str, float]
    undefined_topics: list[str]  # no relevant documents; scored 0 but flagged


def evaluate_run(
    run: dict[str, list[str]], qrels: DiversityQrels, cfg: MetricConfig
) -> EvalResult:
    """Evaluate every qrels topic; topics missing from the run score 0."""
    per_topic: dict[str, dict[str, float]] = {}
    undefined: list[str] = []
    for topic in sorted(qrels.topics):
        tq = qrels.topics[topic]
        ranking = run.get(topic, [])
        if not tq.intents:
            undefined.append(topic)
        per_topic[topic] = {
            "alpha_ndcg": alpha_ndcg(ranking, tq, cfg),
            "err_ia": err_ia(ranking, tq, cfg),
            "nrbp": nrbp(ranking, tq, cfg),
            "judged": judged(ranking, tq, cfg.cutoff),
        }
    n = len(per_topic)
    means = {
        metric: (sum(v[metric] for v in per_topic.values()) / n if n else 0.0)
        for metric in METRICS
    }
    return EvalResult(per_topic=per_topic, means=means, undefined_topics=undefined)


# --- statistical tests ------------------------------------------------------


@dataclass
class TTestResult:
    t: float
    p: float
    p_bonferroni: float
    flagged: bool = False  # zero-variance differences: no evidence either way


def paired_ttest(a, b, tests: int = 1) -> TTestResult:
    """Two-sided paired t-test with optional Bonferroni correction."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or len(a) < 2:
        raise ValueError("need two equal-length samples with n >= 2")
    if tests < 1:
        raise ValueError("tests must be >= 1")
    diffs = a - b
    if np.ptp(diffs) == 0.0:
        return TTestResult(t=0.0, p=1.0, p_bonferroni=1.0, flagged=True)
    t, p = scipy_stats.ttest_rel(a, b)
    return TTestResult(
        t=float(t), p=float(p), p_bonferroni=min(1.0, float(p) * tests)
    )


@dataclass
class TostResult:
    p_lower: float
    p_upper: float
    equivalent: bool
    flagged: bool = False


def tost_equivalence(a, b, bound: float = 0.01, level: float = 0.05) -> TostResult:
    """Two one-sided paired t-tests against +/- bound; equivalent iff both p < level."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1 or len(a) < 2:
        raise ValueError("need two equal-length samples with n >= 2")
    if bound <= 0:
        raise ValueError("bound must be positive")
    diffs = a - b
    n = len(diffs)
    mean = float(np.mean(diffs))
    sd = float(np.std(diffs, ddof=1))
    if sd == 0.0:
        inside = abs(mean) < bound
        p = 0.0 if inside else 1.0
        return TostResult(p_lower=p, p_upper=p, equivalent=inside, flagged=True)
    se = sd / math.sqrt(n)
    t_lower = (mean + bound) / se  # H0: mean <= -bound
    t_upper = (mean - bound) / se  # H0: mean >= +bound
    p_lower = float(scipy_stats.t.sf(t_lower, n - 1))
    p_upper = float(scipy_stats.t.cdf(t_upper, n - 1))
    return TostResult(
        p_lower=p_lower,
        p_upper=p_upper,
        equivalent=p_lower < level and p_upper < level,
    )


# --- report writers ---------------------------------------------------------


def write_pertopic_tsv(result: EvalResult, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("topic\t" + "\t".join(METRICS) + "\n")
        for topic in sorted(result.per_topic):
            values = result.per_topic[topic]
            fh.write(
                topic + "\t" + "\t".join(f"{values[m]:.6f}" for m in METRICS) + "\n"
            )


def read_pertopic_tsv(path: str) -> dict[str, dict[str, float]]:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
        if not header or header[0] != "topic":
            raise DataError(f"{path}:1: expected a 'topic<TAB>metric...' header")
        metrics = header[1:]
        out: dict[str, dict[str, float]] = {}
        for lineno, line in enumerate(fh, 2):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} columns")
            try:
                out[parts[0]] = {m: float(v) for m, v in zip(metrics, parts[1:])}
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: bad metric value: {exc}") from exc
    return out


def write_summary_json(result: EvalResult, path: str) -> None:
    payload = {
        "means": result.means,
        "topics": len(result.per_topic),
        "undefined_topics": result.undefined_topics,
        "per_topic": result.per_topic,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
