"""Score dialogue quality: n-gram repetition, the diversity product,
grounding overlap, and the answer-quality flags.

Repetitive transcripts score low and get filtered; answers that share no
content tokens with the document are flagged as hallucinations.
"""

from autoconv import (
    Dialogue,
    Document,
    Role,
    Turn,
    classify_answer,
    diversity_score,
    filter_by_diversity,
    grounding_overlap,
    ngram_repetition,
)

DOC = Document(
    id="doc",
    title="Glass Harbor",
    text=(
        "Glass Harbor opened its tidal observatory in 1987. The observatory "
        "recorded nine thousand wave events in its first decade. A small "
        "museum now occupies the original building."
    ),
)


def dialogue(idx, *texts):
    turns = tuple(
        Turn(index=i, role=Role.USER if i % 2 == 0 else Role.SYSTEM, text=t)
        for i, t in enumerate(texts)
    )
    return Dialogue(id=idx, doc_id=DOC.id, turns=turns)


def main():
    print("=== n-gram repetition ===")
    for tokens in (["the", "sea", "rose", "slowly"], ["wave"] * 6):
        for n in (2, 3, 4):
            print(f"  rep-{n}{tokens}: {ngram_repetition(tokens, n):.1f}%")

    print("\n=== diversity score ===")
    varied = dialogue("varied", "When did it open?", "It opened its observatory in 1987.")
    loopy = dialogue("loopy", "What what what what?", "wave wave wave wave wave wave")
    for d in (varied, loopy):
        print(f"  {d.id}: {diversity_score(d):.4f}")

    print("\n=== quarter filtering (keep 0.75) ===")
    batch = [
        varied,
        loopy,
        dialogue("mid", "What was recorded?", "events events events were recorded there"),
        dialogue("flat", "Tell me more more more?", "more more more more more"),
    ]
    kept, removed = filter_by_diversity(batch, keep_fraction=0.75)
    print(f"  kept:    {[d.id for d in kept]}")
    print(f"  removed: {[d.id for d in removed]}")

    print("\n=== grounding and flags ===")
    answers = [
        "The observatory recorded nine thousand wave events.",  # grounded
        "A museum occupies the original building today.",       # mostly grounded
        "The harbor exports bioluminescent kelp to the moon.",  # hallucinated
        "CANNOTANSWER",                                         # explicit no-answer
    ]
    for text in answers:
        turn = Turn(index=1, role=Role.SYSTEM, text=text)
        overlap = grounding_overlap(text, DOC.text)
        flags = sorted(classify_answer(turn, DOC))
        print(f"  overlap={overlap:.2f} flags={flags or ['-']}: {text}")


if __name__ == "__main__":
    main()
