"""Data model for grounding documents and dialogues, QuAC/CoQA ingestion,
and canonical line-delimited dataset serialization.

All types are immutable values; the same logical content always serializes
to identical bytes.
"""

from __future__ import annotations

import enum
import json
import math
import random
from dataclasses import dataclass, replace
from pathlib import Path
from typing import TYPE_CHECKING, Any

from .backend import DecodingConfig

if TYPE_CHECKING:
    from .quality import QualityReport

DATASET_SCHEMA = "autoconv/1"
DOCUMENTS_SCHEMA = "autoconv-docs/1"

QUAC_NO_ANSWER = "CANNOTANSWER"
COQA_NO_ANSWER = "unknown"
NO_ANSWER_LITERALS = (QUAC_NO_ANSWER, COQA_NO_ANSWER)

SOURCES = ("quac", "coqa", "custom")
ORIGINS = ("human", "synthetic")


class IngestError(ValueError):
    """A source corpus file is missing, empty, or structurally invalid."""


class SchemaVersionError(ValueError):
    """A dataset file declares an unknown schema version."""


class Role(str, enum.Enum):
    USER = "user"
    SYSTEM = "system"

    @property
    def tag(self) -> str:
        """Literal transcript tag, e.g. ``User`` in ``User: ...``."""
        return "User" if self is Role.USER else "System"

    @property
    def other(self) -> "Role":
        return Role.SYSTEM if self is Role.USER else Role.USER


@dataclass(frozen=True)
class Document:
    """A grounding passage with title/section metadata."""

    id: str
    title: str
    text: str
    section_title: str | None = None
    source: str = "custom"

    def __post_init__(self):
        if not self.id:
            raise ValueError("document id must be non-empty")
        if not self.text.strip():
            raise ValueError(f"document {self.id}: text is empty")
        if self.source not in SOURCES:
            raise ValueError(f"document {self.id}: unknown source {self.source!r}")


@dataclass(frozen=True)
class Turn:
    """One utterance. Empty text marks a terminal sentinel turn."""

    index: int
    role: Role
    text: str
    token_logprobs: tuple[tuple[str, float], ...] | None = None
    decoding: DecodingConfig | None = None

    def __post_init__(self):
        object.__setattr__(self, "role", Role(self.role))
        if self.index < 0:
            raise ValueError("turn index must be >= 0")
        if self.token_logprobs is not None:
            pairs = tuple((str(t), float(lp)) for t, lp in self.token_logprobs)
            if any(lp > 0 for _, lp in pairs):
                raise ValueError("token logprobs must be <= 0")
            object.__setattr__(self, "token_logprobs", pairs)

    @property
    def is_sentinel(self) -> bool:
        return not self.text.strip()


@dataclass(frozen=True)
class GoldQA:
    """Reference answers for one question of a human dialogue."""

    question: str
    reference_answers: tuple[str, ...]
    is_unanswerable: bool = False

    def __post_init__(self):
        object.__setattr__(self, "reference_answers", tuple(self.reference_answers))
        if not self.reference_answers:
            raise ValueError("reference_answers must be non-empty")
        if self.is_unanswerable and not any(
            ref in NO_ANSWER_LITERALS for ref in self.reference_answers
        ):
            raise ValueError("unanswerable question lacks a no-answer reference literal")


@dataclass(frozen=True)
class Dialogue:
    """Ordered turns over one document, with optional quality and gold metadata."""

    id: str
    doc_id: str
    turns: tuple[Turn, ...]
    origin: str = "synthetic"
    generator_meta: dict[str, Any] | None = None
    quality: "QualityReport | None" = None
    gold: tuple[GoldQA, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "turns", tuple(self.turns))
        if self.gold is not None:
            object.__setattr__(self, "gold", tuple(self.gold))
        if not self.id:
            raise ValueError("dialogue id must be non-empty")
        if self.origin not in ORIGINS:
            raise ValueError(f"dialogue {self.id}: unknown origin {self.origin!r}")
        for i, turn in enumerate(self.turns):
            if turn.index != i:
                raise ValueError(f"dialogue {self.id}: turn indices must run 0..n-1")
            expected = Role.USER if i % 2 == 0 else Role.SYSTEM
            if turn.role is not expected:
                raise ValueError(
                    f"dialogue {self.id}: turn {i} must have role {expected.value}"
                )

    @property
    def n_qa_pairs(self) -> int:
        return len(self.turns) // 2


# ---------------------------------------------------------------------------
# ingestion


def _load_json(path, kind: str) -> Any:
    path = Path(path)
    if not path.exists():
        raise IngestError(f"{kind} file not found: {path}")
    raw = path.read_text(encoding="utf-8")
    if not raw.strip():
        raise IngestError(f"{kind} file is empty: {path}")
    try:
        return json.loads(raw)
    except json.JSONDecodeError as err:
        raise IngestError(f"{kind} file {path} is not valid JSON: {err}") from err


def ingest_quac(path) -> tuple[list[Document], list[Dialogue]]:
    """Load a QuAC release file into documents and gold-annotated dialogues.

    One Document per context paragraph, one Dialogue per paragraph's QA
    sequence. All human reference answers are preserved; questions whose
    references contain the ``CANNOTANSWER`` literal are marked unanswerable.
    """
    payload = _load_json(path, "QuAC")
    entries = payload.get("data") if isinstance(payload, dict) else None
    if not isinstance(entries, list) or not entries:
        raise IngestError(f"QuAC file {path}: missing or empty 'data' list")

    documents: list[Document] = []
    dialogues: list[Dialogue] = []
    seen_ids: set[str] = set()
    for ei, entry in enumerate(entries):
        if not isinstance(entry, dict):
            raise IngestError(f"QuAC entry {ei}: not a record")
        title = entry.get("title") or f"entry-{ei}"
        section = entry.get("section_title")
        paragraphs = entry.get("paragraphs")
        if not isinstance(paragraphs, list) or not paragraphs:
            raise IngestError(f"QuAC entry {title!r}: missing 'paragraphs'")
        for pi, paragraph in enumerate(paragraphs):
            if not isinstance(paragraph, dict):
                raise IngestError(f"QuAC entry {title!r} paragraph {pi}: not a record")
            pid = paragraph.get("id") or f"quac-{ei}-{pi}"
            if pid in seen_ids:
                raise IngestError(f"QuAC paragraph {pid!r}: duplicate id")
            seen_ids.add(pid)
            context = paragraph.get("context")
            if not isinstance(context, str) or not context.strip():
                raise IngestError(f"QuAC paragraph {pid!r}: empty context")
            qas = paragraph.get("qas")
            if not isinstance(qas, list) or not qas:
                raise IngestError(f"QuAC paragraph {pid!r}: no QA pairs")

            turns: list[Turn] = []
            gold: list[GoldQA] = []
            for qi, qa in enumerate(qas):
                if not isinstance(qa, dict):
                    raise IngestError(f"QuAC paragraph {pid!r} qa {qi}: not a record")
                qa_id = qa.get("id") or f"{pid}#q{qi}"
                question = qa.get("question")
                if not question:
                    raise IngestError(f"QuAC qa {qa_id!r}: missing question")
                references = [a.get("text", "") for a in qa.get("answers", []) if a.get("text")]
                orig = (qa.get("orig_answer") or {}).get("text")
                if not references:
                    if not orig:
                        raise IngestError(f"QuAC qa {qa_id!r}: no answers")
                    references = [orig]
                answer_text = orig or references[0]
                turns.append(Turn(index=2 * qi, role=Role.USER, text=question))
                turns.append(Turn(index=2 * qi + 1, role=Role.SYSTEM, text=answer_text))
                gold.append(
                    GoldQA(
                        question=question,
                        reference_answers=tuple(references),
                        is_unanswerable=QUAC_NO_ANSWER in references,
                    )
                )
            documents.append(
                Document(id=pid, title=title, section_title=section, text=context, source="quac")
            )
            dialogues.append(
                Dialogue(id=pid, doc_id=pid, turns=tuple(turns), origin="human", gold=tuple(gold))
            )
    return documents, dialogues


def ingest_coqa(path) -> tuple[list[Document], list[Dialogue]]:
    """Load a CoQA release file; same contract as :func:`ingest_quac` with
    CoQA's story/questions/answers schema and the ``unknown`` literal."""
    payload = _load_json(path, "CoQA")
    entries = payload.get("data") if isinstance(payload, dict) else None
    if not isinstance(entries, list) or not entries:
        raise IngestError(f"CoQA file {path}: missing or empty 'data' list")

    documents: list[Document] = []
    dialogues: list[Dialogue] = []
    seen_ids: set[str] = set()
    for ei, entry in enumerate(entries):
        if not isinstance(entry, dict):
            raise IngestError(f"CoQA entry {ei}: not a record")
        sid = entry.get("id") or f"coqa-{ei}"
        if sid in seen_ids:
            raise IngestError(f"CoQA story {sid!r}: duplicate id")
        seen_ids.add(sid)
        story = entry.get("story")
        if not isinstance(story, str) or not story.strip():
            raise IngestError(f"CoQA story {sid!r}: empty story text")
        questions = entry.get("questions")
        answers = entry.get("answers")
        if not questions or not answers or len(questions) != len(answers):
            raise IngestError(f"CoQA story {sid!r}: questions/answers missing or misaligned")
        additional = entry.get("additional_answers") or {}

        turns: list[Turn] = []
        gold: list[GoldQA] = []
        for qi, (question, answer) in enumerate(zip(questions, answers)):
            if not isinstance(question, dict) or not isinstance(answer, dict):
                raise IngestError(f"CoQA story {sid!r} turn {qi + 1}: not a record")
            q_text = question.get("input_text")
            a_text = answer.get("input_text")
            if not q_text or not a_text:
                raise IngestError(f"CoQA story {sid!r} turn {qi + 1}: empty question or answer")
            references = [a_text]
            for key in sorted(additional):
                extra = additional[key]
                if isinstance(extra, list) and qi < len(extra):
                    text = extra[qi].get("input_text")
                    if text:
                        references.append(text)
            turns.append(Turn(index=2 * qi, role=Role.USER, text=q_text))
            turns.append(Turn(index=2 * qi + 1, role=Role.SYSTEM, text=a_text))
            gold.append(
                GoldQA(
                    question=q_text,
                    reference_answers=tuple(references),
                    is_unanswerable=COQA_NO_ANSWER in references,
                )
            )
        documents.append(
            Document(id=sid, title=entry.get("filename") or sid, text=story, source="coqa")
        )
        dialogues.append(
            Dialogue(id=sid, doc_id=sid, turns=tuple(turns), origin="human", gold=tuple(gold))
        )
    return documents, dialogues


# ---------------------------------------------------------------------------
# deterministic sampling and splitting


def sample_documents(docs: list[Document], n: int, seed: int) -> list[Document]:
    """Sample ``n`` distinct documents; a pure function of (docs order, n, seed)."""
    if n > len(docs):
        raise ValueError(f"cannot sample {n} documents from {len(docs)}")
    return random.Random(seed).sample(list(docs), n)


def split_validation(
    dialogues: list[Dialogue], ratio: float, seed: int
) -> tuple[list[Dialogue], list[Dialogue]]:
    """Partition dialogues into (train, validation) with |validation| =
    round-half-up(ratio * N). Deterministic under seed; order-preserving."""
    if not dialogues:
        raise ValueError("cannot split an empty dialogue list")
    if not 0.0 < ratio < 1.0:
        raise ValueError("ratio must be in (0, 1)")
    n_val = math.floor(ratio * len(dialogues) + 0.5)
    order = list(range(len(dialogues)))
    random.Random(seed).shuffle(order)
    val_indices = set(order[:n_val])
    validation = [d for i, d in enumerate(dialogues) if i in val_indices]
    train = [d for i, d in enumerate(dialogues) if i not in val_indices]
    return train, validation


# ---------------------------------------------------------------------------
# serialization (canonical: sorted keys, compact separators, "\n" line ends)


def _canonical(record: dict) -> str:
    return json.dumps(record, ensure_ascii=False, sort_keys=True, separators=(",", ":"))


def turn_to_record(turn: Turn) -> dict:
    record: dict = {"index": turn.index, "role": turn.role.value, "text": turn.text}
    if turn.token_logprobs is not None:
        record["logprobs"] = [[t, lp] for t, lp in turn.token_logprobs]
    if turn.decoding is not None:
        record["decoding"] = turn.decoding.to_dict()
    return record


def turn_from_record(record: dict) -> Turn:
    logprobs = record.get("logprobs")
    decoding = record.get("decoding")
    return Turn(
        index=record["index"],
        role=Role(record["role"]),
        text=record["text"],
        token_logprobs=tuple((t, lp) for t, lp in logprobs) if logprobs is not None else None,
        decoding=DecodingConfig.from_dict(decoding) if decoding is not None else None,
    )


def dialogue_to_record(dialogue: Dialogue) -> dict:
    record: dict = {
        "schema": DATASET_SCHEMA,
        "id": dialogue.id,
        "doc_id": dialogue.doc_id,
        "origin": dialogue.origin,
        "turns": [turn_to_record(t) for t in dialogue.turns],
    }
    if dialogue.quality is not None:
        record["quality"] = dialogue.quality.to_dict()
    if dialogue.generator_meta is not None:
        record["generator_meta"] = dialogue.generator_meta
    if dialogue.gold is not None:
        record["gold"] = [
            {
                "question": g.question,
                "reference_answers": list(g.reference_answers),
                "is_unanswerable": g.is_unanswerable,
            }
            for g in dialogue.gold
        ]
    return record


def dialogue_from_record(record: dict) -> Dialogue:
    from .quality import QualityReport  # deferred to avoid a module cycle

    version = record.get("schema")
    if version != DATASET_SCHEMA:
        raise SchemaVersionError(f"unknown dataset schema {version!r} (expected {DATASET_SCHEMA})")
    quality = record.get("quality")
    gold = record.get("gold")
    return Dialogue(
        id=record["id"],
        doc_id=record["doc_id"],
        turns=tuple(turn_from_record(t) for t in record["turns"]),
        origin=record["origin"],
        generator_meta=record.get("generator_meta"),
        quality=QualityReport.from_dict(quality) if quality is not None else None,
        gold=tuple(
            GoldQA(
                question=g["question"],
                reference_answers=tuple(g["reference_answers"]),
                is_unanswerable=g["is_unanswerable"],
            )
            for g in gold
        )
        if gold is not None
        else None,
    )


def dialogue_to_line(dialogue: Dialogue) -> str:
    return _canonical(dialogue_to_record(dialogue))


def write_dataset(dialogues, path) -> None:
    """Write dialogues as line-delimited records; canonical bytes."""
    dialogues = list(dialogues)
    ids = [d.id for d in dialogues]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate dialogue ids in dataset")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        for dialogue in dialogues:
            handle.write(dialogue_to_line(dialogue) + "\n")


def read_dataset(path) -> list[Dialogue]:
    """Read a line-delimited dialogue dataset written by :func:`write_dataset`."""
    path = Path(path)
    dialogues = []
    with path.open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as err:
                raise ValueError(f"{path}:{lineno}: invalid JSON: {err}") from err
            dialogues.append(dialogue_from_record(record))
    return dialogues


def write_documents(documents, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        for doc in documents:
            record: dict = {
                "schema": DOCUMENTS_SCHEMA,
                "id": doc.id,
                "title": doc.title,
                "text": doc.text,
                "source": doc.source,
            }
            if doc.section_title is not None:
                record["section_title"] = doc.section_title
            handle.write(_canonical(record) + "\n")


def read_documents(path) -> list[Document]:
    path = Path(path)
    documents = []
    with path.open("r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            version = record.get("schema")
            if version != DOCUMENTS_SCHEMA:
                raise SchemaVersionError(
                    f"{path}:{lineno}: unknown documents schema {version!r}"
                )
            documents.append(
                Document(
                    id=record["id"],
                    title=record["title"],
                    text=record["text"],
                    section_title=record.get("section_title"),
                    source=record.get("source", "custom"),
                )
            )
    return documents


def with_quality(dialogue: Dialogue, report: "QualityReport") -> Dialogue:
    """Return a copy of ``dialogue`` carrying ``report``."""
    return replace(dialogue, quality=report)
