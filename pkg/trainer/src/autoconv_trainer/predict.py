"""Emit predictions for gold dialogues in the eval command's file format."""

from __future__ import annotations

import json
import logging
from pathlib import Path

import torch

from .data import DialogueRecord, DocumentRecord, render_history
from .model import PAD, load_artifact

logger = logging.getLogger(__name__)


def predict(
    artifact_dir,
    gold_dialogues: list[DialogueRecord],
    documents: dict[str, DocumentRecord],
    out_path,
) -> int:
    """Write one prediction per gold question; returns the prediction count.

    Questions whose generation fails are recorded as empty predictions so
    the evaluation stays complete.
    """
    model, vocab, spec = load_artifact(artifact_dir)
    device = torch.device(spec.device)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)

    count = 0
    with out_path.open("w", encoding="utf-8", newline="\n") as handle:
        for dialogue in gold_dialogues:
            if dialogue.gold is None:
                raise ValueError(f"dialogue {dialogue.id} carries no gold annotations")
            doc = documents.get(dialogue.doc_id)
            for i in range(len(dialogue.gold)):
                turn_index = 2 * i + 1
                text = ""
                try:
                    if doc is None:
                        raise KeyError(f"unknown document {dialogue.doc_id}")
                    history = render_history(dialogue.turns[: 2 * i + 1])
                    ids = vocab.encode(
                        f"{history}\n{doc.text}", spec.max_input_tokens, keep_tail=True
                    ) or [PAD]
                    src = torch.tensor([ids], dtype=torch.long, device=device)
                    text = vocab.decode(model.greedy_decode(src, spec.max_target_tokens))
                except Exception as err:  # per-question failures become empty predictions
                    logger.warning(
                        "prediction failed for %s turn %d: %s", dialogue.id, turn_index, err
                    )
                record = {"dialogue_id": dialogue.id, "turn_index": turn_index, "text": text}
                handle.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")
                count += 1
    return count
