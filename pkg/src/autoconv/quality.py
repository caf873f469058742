"""Diversity scoring, rank-based filtering, grounding checks, and
answer-quality flags for synthetic dialogues.

rep-n is the percentage of repeated n-grams, 100 * (1 - unique/total),
over whitespace tokens of the full transcript; the diversity score is
the product of (1 - rep_n/100) for n = 2..4.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, replace

from .corpus import (
    COQA_NO_ANSWER,
    QUAC_NO_ANSWER,
    Dialogue,
    Document,
    Role,
    Turn,
    with_quality,
)
from .evaluation import normalize_text

NGRAM_ORDERS = (2, 3, 4)

HALLUCINATION_THRESHOLD = 0.5
LOW_OVERLAP_THRESHOLD = 0.8

NO_ANSWER = "no_answer"
HALLUCINATION = "hallucination"
LOW_OVERLAP = "low_overlap"
FLAGS = (NO_ANSWER, HALLUCINATION, LOW_OVERLAP)

_NO_ANSWER_NORMALIZED = tuple(normalize_text(lit) for lit in (QUAC_NO_ANSWER, COQA_NO_ANSWER))


def ngram_repetition(tokens, n: int) -> float:
    """Percentage of repeated n-grams; 0.0 when fewer than n tokens."""
    if n < 1:
        raise ValueError("n must be >= 1")
    tokens = list(tokens)
    total = len(tokens) - n + 1
    if total < 1:
        return 0.0
    unique = len({tuple(tokens[i : i + n]) for i in range(total)})
    return 100.0 * (1.0 - unique / total)


def dialogue_tokens(dialogue: Dialogue) -> list[str]:
    """Whitespace tokens of all turn texts in order, role tags excluded."""
    return [tok for turn in dialogue.turns for tok in turn.text.split()]


def diversity_of_tokens(tokens) -> float:
    tokens = list(tokens)
    score = 1.0
    for n in NGRAM_ORDERS:
        score *= 1.0 - ngram_repetition(tokens, n) / 100.0
    return score


def diversity_score(dialogue: Dialogue) -> float:
    """Product over n = 2..4 of (1 - rep_n/100) for the full transcript."""
    if not dialogue.turns:
        raise ValueError(f"dialogue {dialogue.id} has no turns")
    return diversity_of_tokens(dialogue_tokens(dialogue))


@dataclass(frozen=True)
class QualityReport:
    """Repetition/diversity scores plus per-System-turn grounding metadata.

    ``diversity`` is always exactly the product of (1 - rep_n/100); use
    :meth:`from_reps` rather than passing it explicitly.
    """

    rep2: float
    rep3: float
    rep4: float
    diversity: float
    grounding_overlap: tuple[float, ...] | None = None
    flags: tuple[frozenset[str], ...] | None = None
    kept: bool = True

    def __post_init__(self):
        for name in ("rep2", "rep3", "rep4"):
            value = getattr(self, name)
            if not 0.0 <= value <= 100.0:
                raise ValueError(f"{name} must be in [0, 100]")
        expected = (1 - self.rep2 / 100) * (1 - self.rep3 / 100) * (1 - self.rep4 / 100)
        if self.diversity != expected:
            raise ValueError("diversity must equal the product of (1 - rep_n/100)")
        if self.grounding_overlap is not None:
            overlaps = tuple(float(v) for v in self.grounding_overlap)
            if any(not 0.0 <= v <= 1.0 for v in overlaps):
                raise ValueError("grounding overlaps must be in [0, 1]")
            object.__setattr__(self, "grounding_overlap", overlaps)
        if self.flags is not None:
            flags = tuple(frozenset(f) for f in self.flags)
            for flagset in flags:
                unknown = flagset - set(FLAGS)
                if unknown:
                    raise ValueError(f"unknown flags {sorted(unknown)}")
            object.__setattr__(self, "flags", flags)

    @classmethod
    def from_reps(cls, rep2: float, rep3: float, rep4: float, **kwargs) -> "QualityReport":
        diversity = (1 - rep2 / 100) * (1 - rep3 / 100) * (1 - rep4 / 100)
        return cls(rep2=rep2, rep3=rep3, rep4=rep4, diversity=diversity, **kwargs)

    def to_dict(self) -> dict:
        out: dict = {
            "rep2": self.rep2,
            "rep3": self.rep3,
            "rep4": self.rep4,
            "diversity": self.diversity,
            "kept": self.kept,
        }
        if self.grounding_overlap is not None:
            out["grounding_overlap"] = list(self.grounding_overlap)
        if self.flags is not None:
            out["flags"] = [sorted(f) for f in self.flags]
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "QualityReport":
        # diversity is recomputed from the reps so the exact-product
        # invariant survives the round trip
        flags = data.get("flags")
        overlap = data.get("grounding_overlap")
        return cls.from_reps(
            data["rep2"],
            data["rep3"],
            data["rep4"],
            grounding_overlap=tuple(overlap) if overlap is not None else None,
            flags=tuple(frozenset(f) for f in flags) if flags is not None else None,
            kept=data.get("kept", True),
        )


def grounding_overlap(answer_text: str, document_text: str) -> float:
    """Fraction of the answer's normalized tokens present in the document.

    An answer that normalizes to nothing counts as fully grounded (1.0).
    """
    answer_tokens = normalize_text(answer_text)
    if not answer_tokens:
        return 1.0
    document_tokens = set(normalize_text(document_text))
    hits = sum(1 for tok in answer_tokens if tok in document_tokens)
    return hits / len(answer_tokens)


def classify_answer(
    turn: Turn,
    document: Document,
    hallucination_threshold: float = HALLUCINATION_THRESHOLD,
    low_overlap_threshold: float = LOW_OVERLAP_THRESHOLD,
) -> frozenset[str]:
    """Advisory answer-quality flags for one System turn.

    ``no_answer`` when the text is a no-answer literal; otherwise
    ``hallucination`` below the hallucination threshold and ``low_overlap``
    between the two thresholds. Flags never trigger removal by themselves.
    """
    if turn.role is not Role.SYSTEM:
        raise ValueError("classify_answer requires a System turn")
    normalized = normalize_text(turn.text)
    if normalized in _NO_ANSWER_NORMALIZED:
        return frozenset({NO_ANSWER})
    overlap = grounding_overlap(turn.text, document.text)
    if overlap < hallucination_threshold:
        return frozenset({HALLUCINATION})
    if overlap < low_overlap_threshold:
        return frozenset({LOW_OVERLAP})
    return frozenset()


def build_quality_report(
    dialogue: Dialogue,
    document: Document,
    hallucination_threshold: float = HALLUCINATION_THRESHOLD,
    low_overlap_threshold: float = LOW_OVERLAP_THRESHOLD,
) -> QualityReport:
    """Full quality report: transcript repetition plus per-answer grounding."""
    if dialogue.doc_id != document.id:
        raise ValueError(
            f"dialogue {dialogue.id} is grounded on {dialogue.doc_id}, not {document.id}"
        )
    tokens = dialogue_tokens(dialogue)
    overlaps = []
    flags = []
    for turn in dialogue.turns:
        if turn.role is not Role.SYSTEM:
            continue
        overlaps.append(grounding_overlap(turn.text, document.text))
        flags.append(
            classify_answer(turn, document, hallucination_threshold, low_overlap_threshold)
        )
    return QualityReport.from_reps(
        ngram_repetition(tokens, 2),
        ngram_repetition(tokens, 3),
        ngram_repetition(tokens, 4),
        grounding_overlap=tuple(overlaps),
        flags=tuple(flags),
    )


def filter_by_diversity(dialogues, keep_fraction: float) -> tuple[list[Dialogue], list[Dialogue]]:
    """Keep the ceil(keep_fraction * N) highest-diversity dialogues.

    Ties break by ascending dialogue id. The ``kept`` flag is written into
    every returned dialogue's quality report; dialogues without a report get
    a diversity-only one.
    """
    dialogues = list(dialogues)
    if not dialogues:
        raise ValueError("cannot filter an empty dialogue list")
    if not 0.0 < keep_fraction <= 1.0:
        raise ValueError("keep_fraction must be in (0, 1]")

    scored = []
    for dialogue in dialogues:
        report = dialogue.quality
        if report is None:
            tokens = dialogue_tokens(dialogue)
            report = QualityReport.from_reps(
                ngram_repetition(tokens, 2),
                ngram_repetition(tokens, 3),
                ngram_repetition(tokens, 4),
            )
        scored.append((dialogue, report))

    n_keep = math.ceil(keep_fraction * len(dialogues))
    scored.sort(key=lambda pair: (-pair[1].diversity, pair[0].id))
    kept: list[Dialogue] = []
    removed: list[Dialogue] = []
    for rank, (dialogue, report) in enumerate(scored):
        keep = rank < n_keep
        target = kept if keep else removed
        target.append(with_quality(dialogue, replace(report, kept=keep)))
    return kept, removed


def batch_summary(dialogues) -> dict:
    """Aggregate statistics for a dialogue batch: counts, flag histogram,
    diversity histogram (10 bins over [0, 1])."""
    dialogues = list(dialogues)
    flag_counts = Counter()
    diversities = []
    kept = 0
    turn_total = 0
    for dialogue in dialogues:
        turn_total += len(dialogue.turns)
        report = dialogue.quality
        if report is None:
            diversities.append(diversity_score(dialogue))
            kept += 1
            continue
        diversities.append(report.diversity)
        kept += int(report.kept)
        for flagset in report.flags or ():
            flag_counts.update(flagset)

    histogram = [0] * 10
    for value in diversities:
        histogram[min(int(value * 10), 9)] += 1
    return {
        "n_dialogues": len(dialogues),
        "n_kept": kept,
        "mean_turns": turn_total / len(dialogues) if dialogues else 0.0,
        "flag_counts": {flag: flag_counts.get(flag, 0) for flag in FLAGS},
        "diversity_histogram": histogram,
        "diversity_mean": sum(diversities) / len(diversities) if diversities else 0.0,
        "diversity_min": min(diversities) if diversities else 0.0,
        "diversity_max": max(diversities) if diversities else 0.0,
    }
