"""Role-conditioned dialogue generation: prompt rendering, alternating
user/system completions, and per-utterance NLL scoring.

User questions are sampled with nucleus decoding; system answers use
maximization-based decoding (greedy by default, beam optionally), which
keeps answers anchored to the document.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

from .backend import BEAM, GREEDY, NUCLEUS, BackendError, DecodingConfig, complete
from .corpus import Dialogue, Document, Role, Turn

#: role tags prefixed by a newline terminate a completion
STOP_SEQUENCES = ("\nUser:", "\nSystem:")

DEFAULT_QUESTION_CONFIG = DecodingConfig.nucleus(
    top_p=0.9, max_new_tokens=64, stop_sequences=STOP_SEQUENCES
)
DEFAULT_ANSWER_CONFIG = DecodingConfig.greedy(
    max_new_tokens=128, stop_sequences=STOP_SEQUENCES
)


class GenerationError(Exception):
    """Backend failure during generation, annotated with the turn reached.

    ``partial_turns`` carries the transcript generated so far; partial
    dialogues are diagnostic only and never enter datasets.
    """

    def __init__(self, message: str, turn_index: int, partial_turns: tuple[Turn, ...] = ()):
        super().__init__(message)
        self.turn_index = turn_index
        self.partial_turns = partial_turns


class EmptyDialogueError(Exception):
    """Generation ended before the first system answer; nothing to keep."""


@dataclass(frozen=True)
class GenerationParams:
    """Per-dialogue generation settings.

    ``turn_budget`` counts single utterances, so a budget of 14 yields up
    to 7 question/answer pairs.
    """

    turn_budget: int = 14
    question_config: DecodingConfig = DEFAULT_QUESTION_CONFIG
    answer_config: DecodingConfig = DEFAULT_ANSWER_CONFIG
    replicate_index: int = 0

    def __post_init__(self):
        if self.turn_budget < 2 or self.turn_budget % 2 != 0:
            raise ValueError("turn_budget must be an even integer >= 2")
        if self.question_config.strategy != NUCLEUS:
            raise ValueError("question_config must use nucleus decoding")
        if self.answer_config.strategy not in (GREEDY, BEAM):
            raise ValueError("answer_config must use greedy or beam decoding")
        if self.replicate_index < 0:
            raise ValueError("replicate_index must be >= 0")

    def config_for(self, role: Role) -> DecodingConfig:
        return self.question_config if role is Role.USER else self.answer_config


def render_prompt(document: Document, history, next_role: Role) -> str:
    """Deterministic prompt: title/section lines, document text, transcript
    with literal ``User:`` / ``System:`` tags, ending in the next role's tag."""
    history = list(history)
    expected = Role.USER if len(history) % 2 == 0 else Role.SYSTEM
    for i, turn in enumerate(history):
        want = Role.USER if i % 2 == 0 else Role.SYSTEM
        if turn.role is not want:
            raise ValueError(f"history turn {i} must have role {want.value}")
    if next_role is not expected:
        raise ValueError(
            f"next_role {next_role.value} inconsistent with history of length {len(history)}"
        )

    lines = [f"Title: {document.title}"]
    if document.section_title:
        lines.append(f"Section: {document.section_title}")
    lines.append(f"Document: {document.text}")
    lines.append("")
    for turn in history:
        lines.append(f"{turn.role.tag}: {turn.text}")
    lines.append(f"{next_role.tag}:")
    return "\n".join(lines)


def _trim_completion(text: str) -> str:
    text = text.strip()
    # models occasionally echo a role tag at the start of the continuation
    changed = True
    while changed:
        changed = False
        for tag in ("User:", "System:"):
            if text.startswith(tag):
                text = text[len(tag) :].lstrip()
                changed = True
    return text


def generate_turn(backend, document: Document, history, role: Role, config: DecodingConfig) -> Turn:
    """Generate the next utterance for ``role``.

    A whitespace-only completion produces a sentinel empty turn, which
    signals end of dialogue to the caller.
    """
    if role is Role.USER and config.strategy != NUCLEUS:
        raise ValueError("user turns must be generated with nucleus decoding")
    if role is Role.SYSTEM and config.strategy not in (GREEDY, BEAM):
        raise ValueError("system turns must be generated with greedy or beam decoding")

    history = list(history)
    prompt = render_prompt(document, history, role)
    try:
        completion = complete(backend, prompt, config)
    except BackendError as err:
        raise GenerationError(
            f"backend failed at turn {len(history)} ({role.value}): {err}",
            turn_index=len(history),
        ) from err

    logprobs = None
    if completion.tokens is not None and completion.token_logprobs is not None:
        logprobs = tuple(zip(completion.tokens, completion.token_logprobs))
    return Turn(
        index=len(history),
        role=role,
        text=_trim_completion(completion.text),
        token_logprobs=logprobs,
        decoding=config,
    )


def dialogue_id_for(manifest_id: str, doc_id: str, replicate_index: int) -> str:
    digest = hashlib.sha256(f"{manifest_id}\x1f{doc_id}\x1f{replicate_index}".encode("utf-8"))
    return digest.hexdigest()[:16]


def generate_dialogue(
    backend,
    document: Document,
    params: GenerationParams,
    *,
    manifest_id: str = "",
    seed: int | None = None,
) -> Dialogue:
    """Generate one dialogue of at most ``params.turn_budget`` alternating
    turns, starting with a user question.

    Generation stops early on a sentinel (empty) completion; the sentinel is
    not stored, and a trailing unanswered question is dropped. A dialogue
    that ends before its first system answer raises
    :class:`EmptyDialogueError` and is never emitted.
    """
    turns: list[Turn] = []
    for i in range(params.turn_budget):
        role = Role.USER if i % 2 == 0 else Role.SYSTEM
        config = params.config_for(role)
        try:
            turn = generate_turn(backend, document, turns, role, config)
        except GenerationError as err:
            err.partial_turns = tuple(turns)
            raise
        if turn.is_sentinel:
            break
        turns.append(turn)

    if turns and turns[-1].role is Role.USER:
        turns.pop()
    if len(turns) < 2:
        raise EmptyDialogueError(
            f"dialogue on document {document.id} ended before its first system answer"
        )

    meta: dict = {
        "model_id": getattr(backend, "model_id", None),
        "manifest_id": manifest_id,
        "replicate_index": params.replicate_index,
    }
    if seed is not None:
        meta["seed"] = seed
    return Dialogue(
        id=dialogue_id_for(manifest_id, document.id, params.replicate_index),
        doc_id=document.id,
        turns=tuple(turns),
        origin="synthetic",
        generator_meta=meta,
    )


def utterance_nll(turn: Turn) -> float | None:
    """Negative sum of the turn's token logprobs; None when unavailable."""
    if turn.token_logprobs is None:
        return None
    return -sum(lp for _, lp in turn.token_logprobs)
