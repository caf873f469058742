"""Readers for the autoconv dataset file formats and training-example
construction.

The trainer talks to the generation pipeline through files only: dialogue
datasets (schema ``autoconv/1``), document sets (``autoconv-docs/1``), and
the predictions format consumed by the pipeline's eval command.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

logger = logging.getLogger(__name__)

DATASET_SCHEMA = "autoconv/1"
DOCUMENTS_SCHEMA = "autoconv-docs/1"

USER = "user"
SYSTEM = "system"
ROLE_TAGS = {USER: "User", SYSTEM: "System"}


@dataclass(frozen=True)
class DocumentRecord:
    id: str
    title: str
    text: str


@dataclass(frozen=True)
class GoldAnswer:
    question: str
    references: tuple[str, ...]
    is_unanswerable: bool


@dataclass(frozen=True)
class DialogueRecord:
    id: str
    doc_id: str
    turns: tuple[tuple[str, str], ...]  # (role, text)
    gold: tuple[GoldAnswer, ...] | None = None


@dataclass(frozen=True)
class TrainingExample:
    """Input is 'dialogue history, newline, document'; target is the answer."""

    input_text: str
    target_text: str


def _read_jsonl(path: Path, expected_schema: str):
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        record = json.loads(line)
        schema = record.get("schema")
        if schema != expected_schema:
            raise ValueError(
                f"{path}:{lineno}: schema {schema!r}, expected {expected_schema!r}"
            )
        yield record


def read_documents(path) -> dict[str, DocumentRecord]:
    docs = {}
    for record in _read_jsonl(Path(path), DOCUMENTS_SCHEMA):
        doc = DocumentRecord(id=record["id"], title=record["title"], text=record["text"])
        docs[doc.id] = doc
    return docs


def read_dialogues(path) -> list[DialogueRecord]:
    dialogues = []
    for record in _read_jsonl(Path(path), DATASET_SCHEMA):
        turns = tuple(
            (t["role"], t["text"]) for t in sorted(record["turns"], key=lambda t: t["index"])
        )
        gold = None
        if record.get("gold") is not None:
            gold = tuple(
                GoldAnswer(
                    question=g["question"],
                    references=tuple(g["reference_answers"]),
                    is_unanswerable=g.get("is_unanswerable", False),
                )
                for g in record["gold"]
            )
        dialogues.append(
            DialogueRecord(id=record["id"], doc_id=record["doc_id"], turns=turns, gold=gold)
        )
    return dialogues


def render_history(turns) -> str:
    return " ".join(f"{ROLE_TAGS[role]}: {text}" for role, text in turns)


def build_examples(
    dialogues: list[DialogueRecord], documents: dict[str, DocumentRecord]
) -> list[TrainingExample]:
    """One example per system turn: prior turns with role tags, a newline,
    then the document text; the target is that system answer.

    Dialogues with no system turn (or an unknown document) are skipped
    with a warning.
    """
    examples: list[TrainingExample] = []
    for dialogue in dialogues:
        doc = documents.get(dialogue.doc_id)
        if doc is None:
            logger.warning("dialogue %s: unknown document %s, skipped", dialogue.id, dialogue.doc_id)
            continue
        n_system = sum(1 for role, _ in dialogue.turns if role == SYSTEM)
        if n_system == 0:
            logger.warning("dialogue %s: no system turn, skipped", dialogue.id)
            continue
        for i, (role, text) in enumerate(dialogue.turns):
            if role != SYSTEM:
                continue
            history = render_history(dialogue.turns[:i])
            examples.append(TrainingExample(input_text=f"{history}\n{doc.text}", target_text=text))
    return examples
