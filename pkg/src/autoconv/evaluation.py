"""Conversational-QA evaluation: answer normalization, word-level F1,
Exact Match, and corpus-level aggregation.

Normalization and the max-over-references rule follow the official
SQuAD/QuAC evaluation convention: lowercase, strip punctuation, drop
articles, split on whitespace.
"""

from __future__ import annotations

import json
import string
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

_ARTICLES = frozenset({"a", "an", "the"})
_PUNCT_TABLE = str.maketrans("", "", string.punctuation)

PREDICTIONS_SCHEMA = "autoconv-predictions/1"


def normalize_text(s: str) -> list[str]:
    """Lowercase, strip punctuation, drop articles, split on whitespace."""
    tokens = s.lower().translate(_PUNCT_TABLE).split()
    return [t for t in tokens if t not in _ARTICLES]


def token_f1(pred: str, gold: str) -> float:
    """Harmonic mean of token precision and recall over normalized multisets.

    Both empty after normalization scores 1.0 (no-answer agreement);
    exactly one empty scores 0.0.
    """
    pred_tokens = normalize_text(pred)
    gold_tokens = normalize_text(gold)
    if not pred_tokens and not gold_tokens:
        return 1.0
    if not pred_tokens or not gold_tokens:
        return 0.0
    overlap = sum((Counter(pred_tokens) & Counter(gold_tokens)).values())
    if overlap == 0:
        return 0.0
    precision = overlap / len(pred_tokens)
    recall = overlap / len(gold_tokens)
    return 2 * precision * recall / (precision + recall)


def exact_match(pred: str, golds) -> int:
    """1 iff the normalized prediction equals any normalized reference."""
    golds = list(golds)
    if not golds:
        raise ValueError("reference list must be non-empty")
    pred_tokens = normalize_text(pred)
    return int(any(pred_tokens == normalize_text(g) for g in golds))


def max_f1(pred: str, golds) -> float:
    """token_f1 maximized over the reference answers."""
    golds = list(golds)
    if not golds:
        raise ValueError("reference list must be non-empty")
    return max(token_f1(pred, g) for g in golds)


@dataclass(frozen=True)
class Prediction:
    dialogue_id: str
    turn_index: int
    text: str


@dataclass(frozen=True)
class EvalResult:
    """Corpus means (x100) plus the per-question breakdown."""

    f1: float
    em: float
    n_questions: int
    per_question: tuple[tuple[str, float, int], ...]


def evaluate(predictions, gold_dialogues) -> EvalResult:
    """Score predictions against gold dialogues.

    Every gold question (the System turn at index 2i+1 of QA pair i) must
    have a prediction keyed by (dialogue_id, turn_index); a missing one is
    an error naming the slot. Prediction order is irrelevant.
    """
    by_key: dict[tuple[str, int], Prediction] = {}
    for pred in predictions:
        key = (pred.dialogue_id, pred.turn_index)
        if key in by_key:
            raise ValueError(f"duplicate prediction for dialogue {key[0]} turn {key[1]}")
        by_key[key] = pred

    per_question: list[tuple[str, float, int]] = []
    for dialogue in gold_dialogues:
        if dialogue.gold is None:
            raise ValueError(f"dialogue {dialogue.id} carries no gold annotations")
        for i, qa in enumerate(dialogue.gold):
            turn_index = 2 * i + 1
            key = (dialogue.id, turn_index)
            if key not in by_key:
                raise ValueError(
                    f"missing prediction for dialogue {dialogue.id} turn {turn_index}"
                )
            text = by_key[key].text
            per_question.append(
                (
                    f"{dialogue.id}:{turn_index}",
                    max_f1(text, qa.reference_answers),
                    exact_match(text, qa.reference_answers),
                )
            )

    if not per_question:
        raise ValueError("no gold questions to evaluate")
    n = len(per_question)
    return EvalResult(
        f1=100.0 * sum(f1 for _, f1, _ in per_question) / n,
        em=100.0 * sum(em for _, _, em in per_question) / n,
        n_questions=n,
        per_question=tuple(per_question),
    )


def write_predictions(predictions, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        for pred in predictions:
            record = {
                "dialogue_id": pred.dialogue_id,
                "turn_index": pred.turn_index,
                "text": pred.text,
            }
            handle.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")


def read_predictions(path) -> list[Prediction]:
    path = Path(path)
    predictions = []
    with path.open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
                predictions.append(
                    Prediction(
                        dialogue_id=record["dialogue_id"],
                        turn_index=int(record["turn_index"]),
                        text=record["text"],
                    )
                )
            except (json.JSONDecodeError, KeyError, TypeError) as err:
                raise ValueError(f"{path}:{lineno}: bad prediction record: {err}") from err
    return predictions
