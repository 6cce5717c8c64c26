"""Token-level text metrics: sentence BLEU, BLEU variance across summary
sets, and ROUGE-1/2/L F-measures.

Every metric consumes token sequences produced by :func:`tokenize`, the
single normalization path for the whole package. Scores are plain floats
in [0, 1].

BLEU here is the sentence-level variant with uniform weights over n-gram
orders 1..4 and a multiplicative brevity penalty. Two smoothing rules
make it total and keep its fixed points exact:

* orders the candidate is too short to populate are dropped and the
  weights renormalize over the remaining orders, so ``bleu(x, x) == 1.0``
  for any non-empty ``x``;
* a modified precision with zero matches is floored at ``1e-9`` so the
  log-space mean stays defined, except when *no* order matches at all,
  in which case the score is exactly ``0.0``.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

MAX_BLEU_ORDER = 4
BLEU_SMOOTHING_EPSILON = 1e-9

_TOKEN_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)

TokenSequence = Sequence[str]


def tokenize(text: str) -> tuple[str, ...]:
    """Lowercase ``text`` and split it into word and punctuation tokens.

    Splits on Unicode whitespace; punctuation characters become tokens of
    their own ("Hello, world!" -> ("hello", ",", "world", "!")). The empty
    string tokenizes to the empty tuple.
    """
    return tuple(_TOKEN_RE.findall(text.lower()))


def _ngram_counts(tokens: TokenSequence, n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu(candidate: TokenSequence, reference: TokenSequence) -> float:
    """Sentence BLEU of ``candidate`` against a single ``reference``.

    Both arguments are token sequences from :func:`tokenize`. Asymmetric:
    precision is measured on the candidate side and the brevity penalty
    punishes candidates shorter than the reference.
    """
    cand = tuple(candidate)
    ref = tuple(reference)
    if not cand and not ref:
        return 1.0
    if not cand:
        return 0.0

    max_order = min(MAX_BLEU_ORDER, len(cand))
    log_sum = 0.0
    any_match = False
    for n in range(1, max_order + 1):
        cand_counts = _ngram_counts(cand, n)
        ref_counts = _ngram_counts(ref, n)
        matches = sum(min(count, ref_counts[gram]) for gram, count in cand_counts.items())
        if matches > 0:
            any_match = True
            precision = matches / sum(cand_counts.values())
        else:
            precision = BLEU_SMOOTHING_EPSILON
        log_sum += math.log(precision)
    if not any_match:
        return 0.0

    score = math.exp(log_sum / max_order)
    if len(cand) < len(ref):
        score *= math.exp(1.0 - len(ref) / len(cand))
    return min(1.0, max(0.0, score))


@dataclass(frozen=True)
class BleuVarScore:
    """BLEU-variance of one stochastic summary set."""

    value: float
    n_summaries: int


def bleuvar(summaries: Sequence[TokenSequence]) -> BleuVarScore:
    """Disagreement of a summary set as mean squared BLEU distance.

    Averages ``(1 - bleu(y_i, y_j))**2`` over all N*(N-1) ordered pairs;
    both directions of each pair count because BLEU is asymmetric.
    Identical summaries give 0.0, fully token-disjoint ones give 1.0.

    Raises:
        ValueError: if fewer than two summaries are given.
    """
    n = len(summaries)
    if n < 2:
        raise ValueError(f"bleuvar needs at least 2 summaries, got {n}")
    tokens = [tuple(s) for s in summaries]
    total = 0.0
    for i in range(n):
        for j in range(n):
            if i != j:
                total += (1.0 - bleu(tokens[i], tokens[j])) ** 2
    return BleuVarScore(value=total / (n * (n - 1)), n_summaries=n)


def _f1(matches: float, cand_total: int, ref_total: int) -> float:
    if ref_total == 0 or cand_total == 0 or matches == 0:
        return 0.0
    recall = matches / ref_total
    precision = matches / cand_total
    return 2.0 * precision * recall / (precision + recall)


def rouge_n(candidate: TokenSequence, reference: TokenSequence, n: int = 1) -> float:
    """ROUGE-N F1 with clipped multiset n-gram matching, n in {1, 2}."""
    if n not in (1, 2):
        raise ValueError(f"rouge_n supports n in {{1, 2}}, got {n}")
    cand = tuple(candidate)
    ref = tuple(reference)
    cand_counts = _ngram_counts(cand, n)
    ref_counts = _ngram_counts(ref, n)
    matches = sum(min(count, ref_counts[gram]) for gram, count in cand_counts.items())
    return _f1(matches, sum(cand_counts.values()), sum(ref_counts.values()))


def _lcs_length(a: tuple[str, ...], b: tuple[str, ...]) -> int:
    # Rolling single-row DP: O(len(a)*len(b)) time, O(len(b)) space.
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for tok_a in a:
        curr = [0] * (len(b) + 1)
        for j, tok_b in enumerate(b, start=1):
            if tok_a == tok_b:
                curr[j] = prev[j - 1] + 1
            else:
                curr[j] = max(prev[j], curr[j - 1])
        prev = curr
    return prev[-1]


def rouge_l(candidate: TokenSequence, reference: TokenSequence) -> float:
    """ROUGE-L F1 from the longest common subsequence of the two sequences."""
    cand = tuple(candidate)
    ref = tuple(reference)
    lcs = _lcs_length(cand, ref)
    return _f1(lcs, len(cand), len(ref))


def rouge_scores(candidate_text: str, reference_text: str) -> tuple[float, float, float]:
    """Tokenize two raw texts once and return (ROUGE-1, ROUGE-2, ROUGE-L)."""
    cand = tokenize(candidate_text)
    ref = tokenize(reference_text)
    return rouge_n(cand, ref, 1), rouge_n(cand, ref, 2), rouge_l(cand, ref)
