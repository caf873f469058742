import json

import pytest

DOCS = [
    {
        "schema": "autoconv-docs/1",
        "id": "doc-light",
        "title": "Harbor Lighthouse",
        "text": (
            "The harbor lighthouse was painted red in 1990. The keeper logged "
            "nine storms that winter. Visitors climb eighty steps to the lamp."
        ),
        "source": "custom",
    },
    {
        "schema": "autoconv-docs/1",
        "id": "doc-mill",
        "title": "Grain Mill",
        "text": (
            "The grain mill by the harbor opened in 1990. The mill ground "
            "wheat for nine villages. A storm broke the north sail once."
        ),
        "source": "custom",
    },
]

# question/answer text pools; answers reuse document wording so even a
# lightly trained model overlaps with the references
QA = {
    "doc-light": [
        ("When was the lighthouse painted?", "the lighthouse was painted red in 1990"),
        ("What did the keeper log?", "the keeper logged nine storms"),
        ("How many steps?", "visitors climb eighty steps"),
        ("What color was it painted?", "painted red in 1990"),
        ("Who logged the storms?", "the keeper logged nine storms"),
    ],
    "doc-mill": [
        ("When did the mill open?", "the mill opened in 1990"),
        ("What did the mill grind?", "the mill ground wheat for nine villages"),
        ("What broke the sail?", "a storm broke the north sail"),
        ("How many villages?", "wheat for nine villages"),
        ("Where is the mill?", "the grain mill by the harbor"),
    ],
}


def _turn(index, role, text):
    return {"index": index, "role": role, "text": text}


def _dialogue(idx, doc_id, pairs, with_gold):
    turns = []
    gold = []
    for i, (question, answer) in enumerate(pairs):
        turns.append(_turn(2 * i, "user", question))
        turns.append(_turn(2 * i + 1, "system", answer))
        gold.append(
            {"question": question, "reference_answers": [answer], "is_unanswerable": False}
        )
    record = {
        "schema": "autoconv/1",
        "id": idx,
        "doc_id": doc_id,
        "origin": "synthetic" if not with_gold else "human",
        "turns": turns,
    }
    if with_gold:
        record["gold"] = gold
    return record


def _write_jsonl(path, records):
    path.write_text("".join(json.dumps(r) + "\n" for r in records), encoding="utf-8")
    return path


@pytest.fixture
def toy_corpus(tmp_path):
    """10 synthetic + 5 human (gold-annotated) dialogues over two documents."""
    synthetic = []
    for i in range(10):
        doc_id = "doc-light" if i % 2 == 0 else "doc-mill"
        pool = QA[doc_id]
        pairs = [pool[i % len(pool)], pool[(i + 2) % len(pool)]]
        synthetic.append(_dialogue(f"syn-{i}", doc_id, pairs, with_gold=False))
    human = []
    for i in range(5):
        doc_id = "doc-light" if i % 2 == 0 else "doc-mill"
        pool = QA[doc_id]
        pairs = [pool[(i + 1) % len(pool)], pool[(i + 3) % len(pool)]]
        human.append(_dialogue(f"hum-{i}", doc_id, pairs, with_gold=True))

    return {
        "docs": _write_jsonl(tmp_path / "documents.jsonl", DOCS),
        "synthetic": _write_jsonl(tmp_path / "synthetic.jsonl", synthetic),
        "human": _write_jsonl(tmp_path / "human.jsonl", human),
        "dir": tmp_path,
    }
