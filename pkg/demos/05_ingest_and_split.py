"""Ingest a QuAC-style release file, sample documents, split train/validation,
and round-trip a dataset file.

The ingested dialogues keep every human reference answer, so they work as
gold sets for the eval command; the documents feed the generation pipeline.
"""

import json
import tempfile
from pathlib import Path

from autoconv import ingest_quac, read_dataset, sample_documents, split_validation, write_dataset

RELEASE = {
    "data": [
        {
            "title": "Meridian",
            "section_title": "1998 release",
            "paragraphs": [
                {
                    "id": "C_meridian_0",
                    "context": (
                        "Meridian was released on 5 March 1998. The album reached "
                        "number one in several countries. CANNOTANSWER"
                    ),
                    "qas": [
                        {
                            "id": "q0",
                            "question": "When was Meridian released?",
                            "answers": [
                                {"text": "5 March 1998", "answer_start": 25},
                                {"text": "on 5 March 1998", "answer_start": 22},
                            ],
                            "orig_answer": {"text": "5 March 1998", "answer_start": 25},
                        },
                        {
                            "id": "q1",
                            "question": "Who mixed the record?",
                            "answers": [{"text": "CANNOTANSWER", "answer_start": 100}],
                            "orig_answer": {"text": "CANNOTANSWER", "answer_start": 100},
                        },
                    ],
                }
            ],
        },
        {
            "title": "Harbor Lights",
            "section_title": "Touring years",
            "paragraphs": [
                {
                    "id": "C_harbor_0",
                    "context": "Harbor Lights toured for two years after 2003. CANNOTANSWER",
                    "qas": [
                        {
                            "id": "q0",
                            "question": "How long did they tour?",
                            "answers": [{"text": "two years", "answer_start": 25}],
                            "orig_answer": {"text": "two years", "answer_start": 25},
                        }
                    ],
                }
            ],
        },
    ]
}


def main():
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        release_path = tmp / "quac_dev.json"
        release_path.write_text(json.dumps(RELEASE))

        documents, dialogues = ingest_quac(release_path)
        print(f"ingested {len(documents)} documents, {len(dialogues)} dialogues")
        first = dialogues[0]
        print(f"  {first.id}: {len(first.turns)} turns, gold references per question: "
              f"{[len(g.reference_answers) for g in first.gold]}")
        print(f"  unanswerable flags: {[g.is_unanswerable for g in first.gold]}")

        sampled = sample_documents(documents, n=1, seed=7)
        print(f"\nsampled (seed=7): {[d.id for d in sampled]}")
        print(f"sampled again:    {[d.id for d in sample_documents(documents, 1, 7)]}")

        # 20% of dialogues held out for validation, round-half-up
        train, validation = split_validation(dialogues * 5, ratio=0.2, seed=3)
        print(f"\nsplit 10 dialogues at 0.2 -> train={len(train)} validation={len(validation)}")

        gold_path = tmp / "gold.jsonl"
        write_dataset(dialogues, gold_path)
        assert read_dataset(gold_path) == dialogues
        print(f"\nround trip through {gold_path.name}: identical structures")
        print("first serialized line starts with:",
              gold_path.read_text().splitlines()[0][:60], "...")


if __name__ == "__main__":
    main()
