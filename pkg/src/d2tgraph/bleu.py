"""Corpus-level BLEU (up to 4-grams, uniform weights, brevity penalty)."""
from __future__ import annotations

import math
from collections import Counter
from typing import Sequence


def ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu_stats(hyp: Sequence[str], ref: Sequence[str], max_n: int = 4):
    """Clipped matches and candidate counts per order, plus lengths."""
    matches, totals = [], []
    for n in range(1, max_n + 1):
        h, r = ngrams(hyp, n), ngrams(ref, n)
        matches.append(sum(min(c, r[g]) for g, c in h.items()))
        totals.append(max(len(hyp) - n + 1, 0))
    return matches, totals, len(hyp), len(ref)


def corpus_bleu(hypotheses: Sequence[str], references: Sequence[str], max_n: int = 4, smooth: bool = False) -> float:
    """BLEU in [0, 1] over whitespace-tokenized strings.

    Unsmoothed, any zero n-gram precision yields 0. ``smooth`` adds one to the
    numerator and denominator of every order above 1.
    """
    if len(hypotheses) != len(references):
        raise ValueError(f"length mismatch: {len(hypotheses)} hypotheses vs {len(references)} references")
    if not hypotheses:
        raise ValueError("need at least one hypothesis")
    m = [0] * max_n
    t = [0] * max_n
    c = r = 0
    for hyp, ref in zip(hypotheses, references):
        mm, tt, hl, rl = bleu_stats(hyp.split(), ref.split(), max_n)
        m = [a + b for a, b in zip(m, mm)]
        t = [a + b for a, b in zip(t, tt)]
        c += hl
        r += rl
    if c == 0:
        return 0.0
    log_p = 0.0
    for n in range(max_n):
        num, den = m[n], t[n]
        if smooth and n > 0:
            num, den = num + 1, den + 1
        if num == 0 or den == 0:
            return 0.0
        log_p += math.log(num / den) / max_n
    bp = 1.0 if c > r else math.exp(1.0 - r / c)
    return bp * math.exp(log_p)
