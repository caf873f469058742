"""Evaluate predictions with word-level F1 and Exact Match.

Shows the normalization rules, single-pair scores, the max-over-references
rule, and a corpus-level evaluation round trip through the predictions
file format (the same format the eval CLI consumes).
"""

import tempfile
from pathlib import Path

from autoconv import (
    Dialogue,
    GoldQA,
    Prediction,
    Role,
    Turn,
    evaluate,
    exact_match,
    max_f1,
    normalize_text,
    read_predictions,
    token_f1,
    write_predictions,
)


def main():
    print("=== normalization ===")
    for s in ("The Cat!", "a an the", "It's a semi-final, U.S.A."):
        print(f"  {s!r} -> {normalize_text(s)}")

    print("\n=== token F1 / EM ===")
    pairs = [
        ("the cat sat", "cat sat down"),
        ("5 March 1998", "on 5 March 1998"),
        ("purple elephants", "nine countries"),
        ("CANNOTANSWER", "CANNOTANSWER"),
    ]
    for pred, gold in pairs:
        print(f"  f1={token_f1(pred, gold):.3f} em={exact_match(pred, [gold])} "
              f"pred={pred!r} gold={gold!r}")

    print("\n=== max over references ===")
    refs = ["forty cities", "The tour visited forty cities."]
    print(f"  refs={refs}")
    print(f"  max_f1('forty cities', refs) = {max_f1('forty cities', refs):.3f}")

    print("\n=== corpus evaluation through the predictions file ===")
    gold = [
        Dialogue(
            id="g1",
            doc_id="doc",
            origin="human",
            turns=(
                Turn(index=0, role=Role.USER, text="How long did they tour?"),
                Turn(index=1, role=Role.SYSTEM, text="two years"),
                Turn(index=2, role=Role.USER, text="How many cities?"),
                Turn(index=3, role=Role.SYSTEM, text="forty cities"),
            ),
            gold=(
                GoldQA(question="How long did they tour?", reference_answers=("two years",)),
                GoldQA(question="How many cities?",
                       reference_answers=("forty cities", "The tour visited forty cities.")),
            ),
        )
    ]
    predictions = [
        Prediction("g1", 1, "two years"),
        Prediction("g1", 3, "the tour visited forty cities"),
    ]
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "preds.jsonl"
        write_predictions(predictions, path)
        result = evaluate(read_predictions(path), gold)
    print(f"  f1={result.f1:.1f} em={result.em:.1f} n_questions={result.n_questions}")
    for qid, f1, em in result.per_question:
        print(f"    {qid}: f1={f1:.3f} em={em}")


if __name__ == "__main__":
    main()
