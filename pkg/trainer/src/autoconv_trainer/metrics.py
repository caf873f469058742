"""Word-level F1 for validation-time checkpoint selection.

Standard QA convention: lowercase, strip punctuation, drop articles,
multiset token overlap. Final scores should come from the pipeline's
eval command; this copy only ranks checkpoints during training.
"""

from __future__ import annotations

import string
from collections import Counter

_ARTICLES = {"a", "an", "the"}
_PUNCT = str.maketrans("", "", string.punctuation)


def normalize(s: str) -> list[str]:
    return [t for t in s.lower().translate(_PUNCT).split() if t not in _ARTICLES]


def token_f1(pred: str, gold: str) -> float:
    p, g = normalize(pred), normalize(gold)
    if not p and not g:
        return 1.0
    if not p or not g:
        return 0.0
    overlap = sum((Counter(p) & Counter(g)).values())
    if overlap == 0:
        return 0.0
    precision, recall = overlap / len(p), overlap / len(g)
    return 2 * precision * recall / (precision + recall)


def mean_f1(pairs) -> float:
    pairs = list(pairs)
    if not pairs:
        return 0.0
    return sum(token_f1(p, g) for p, g in pairs) / len(pairs)
