"""Acceptance suite: one test per release criterion, each printing a
PASS line (run with ``pytest tests/test_acceptance.py -v -s``).

Oracles here are written independently of the library code paths they
check: character-loop normalization, list-removal multiset overlap, and
zip-based n-gram sets.
"""

import string
import threading
import time

import pytest

from autoconv.backend import ScriptedBackend, scripted_backend
from autoconv.corpus import Dialogue, Role, Turn, read_dataset, write_dataset
from autoconv.evaluation import exact_match, max_f1, normalize_text, token_f1
from autoconv.generator import GenerationParams, generate_dialogue
from autoconv.pipeline import RunAborted, run, training_schedule
from autoconv.quality import (
    HALLUCINATION,
    classify_answer,
    diversity_of_tokens,
    filter_by_diversity,
    ngram_repetition,
)

from test_pipeline import _manifest, flaky_factory, make_script, scripted_factory

# ---------------------------------------------------------------------------
# independent metric oracle


def oracle_normalize(s):
    words = []
    current = []
    for ch in s.lower():
        if ch in string.punctuation:
            continue
        if ch.isspace():
            if current:
                words.append("".join(current))
                current = []
        else:
            current.append(ch)
    if current:
        words.append("".join(current))
    return [w for w in words if w not in ("a", "an", "the")]


def oracle_f1(pred, gold):
    p = oracle_normalize(pred)
    g = oracle_normalize(gold)
    if not p and not g:
        return 1.0
    if not p or not g:
        return 0.0
    pool = list(g)
    overlap = 0
    for token in p:
        if token in pool:
            pool.remove(token)
            overlap += 1
    if overlap == 0:
        return 0.0
    precision = overlap / len(p)
    recall = overlap / len(g)
    return 2 * precision * recall / (precision + recall)


def oracle_em(pred, golds):
    return int(any(oracle_normalize(pred) == oracle_normalize(g) for g in golds))


def oracle_max_f1(pred, golds):
    return max(oracle_f1(pred, g) for g in golds)


# (pred, references) covering case, punctuation, articles, no-answer,
# and multi-reference max
METRIC_FIXTURES = [
    ("The Cat!", ["cat"]),
    ("a an the", ["the an a"]),
    ("Hello,   World??", ["hello world"]),
    ("it's", ["its"]),
    ("U.S.A.", ["USA"]),
    ("CANNOTANSWER", ["CANNOTANSWER"]),
    ("unknown", ["unknown"]),
    ("The THE the an A", ["an"]),
    ("semi-final", ["semifinal"]),
    (" multiple   spaces\there ", ["multiple spaces here"]),
    ("the cat sat", ["cat sat down"]),
    ("exactly the same", ["exactly the same"]),
    ("x y", ["z w"]),
    ("x x y", ["x y y"]),
    ("the", ["an"]),
    ("the", ["cat"]),
    ("went to seventeen clubs", ["the tour went to seventeen different clubs"]),
    ("cat sat", ["sat cat"]),
    ("x y", ["z", "x y"]),
    ("x", ["y", "x z"]),
    ("x y", ["x y", "unrelated tokens"]),
    ("x y", ["x y z", "x y"]),
    ("blue whale", ["Blue Whale!"]),
    ("no", ["No."]),
    ("5 March 1998", ["on 5 March 1998", "5 March 1998"]),
    ("", ["anything"]),
]


def test_criterion_metric_oracle_suite():
    assert len(METRIC_FIXTURES) >= 20
    started = time.monotonic()
    for pred, references in METRIC_FIXTURES:
        for ref in references:
            assert token_f1(pred, ref) == oracle_f1(pred, ref), (pred, ref)
        assert max_f1(pred, references) == oracle_max_f1(pred, references), pred
        assert exact_match(pred, references) == oracle_em(pred, references), pred
        assert normalize_text(pred) == oracle_normalize(pred), pred
    elapsed = time.monotonic() - started
    assert elapsed < 1.0
    print(
        f"\nACCEPTANCE PASS: metric oracle suite "
        f"({len(METRIC_FIXTURES)} fixtures, exact equality, {elapsed:.3f}s)"
    )


# ---------------------------------------------------------------------------
# diversity oracle


def oracle_rep(tokens, n):
    grams = list(zip(*(tokens[i:] for i in range(n))))
    if not grams:
        return 0.0
    return 100.0 * (1.0 - len(set(grams)) / len(grams))


def oracle_diversity(tokens):
    value = 1.0
    for n in (2, 3, 4):
        value = value * (1.0 - oracle_rep(tokens, n) / 100.0)
    return value


def test_criterion_diversity_oracle():
    import random

    started = time.monotonic()
    rng = random.Random(98234)
    for case in range(100):
        alphabet = rng.randint(1, 10)
        length = rng.randint(0, 200)
        tokens = [f"w{rng.randrange(alphabet)}" for _ in range(length)]
        got = diversity_of_tokens(tokens)
        want = oracle_diversity(tokens)
        assert abs(got - want) <= 1e-9, (case, length, alphabet)

    # closed form for a constant token repeated L >= n times
    for length in range(1, 41):
        for n in (2, 3, 4):
            expected = 100.0 * (1.0 - 1.0 / (length - n + 1)) if length >= n else 0.0
            assert ngram_repetition(["tok"] * length, n) == expected

    elapsed = time.monotonic() - started
    assert elapsed < 5.0
    print(
        f"\nACCEPTANCE PASS: diversity oracle "
        f"(100 random sequences at 1e-9 + closed form, {elapsed:.3f}s)"
    )


# ---------------------------------------------------------------------------
# filtering


def _transcript_dialogue(idx, tokens):
    half = max(1, len(tokens) // 2)
    return Dialogue(
        id=idx,
        doc_id="doc",
        turns=(
            Turn(index=0, role=Role.USER, text=" ".join(tokens[:half])),
            Turn(index=1, role=Role.SYSTEM, text=" ".join(tokens[half:]) or "tail"),
        ),
    )


def test_criterion_quarter_filtering():
    vocab = "abcdefghijklmnopqrst"
    batch = []
    for i in range(8):
        reps = i + 3
        batch.append(_transcript_dialogue(f"d{i}", list(vocab[: 20 - reps]) + ["rep"] * reps))
    scores = {d.id: diversity_of_tokens([t for turn in d.turns for t in turn.text.split()])
              for d in batch}
    assert len(set(scores.values())) == 8

    kept, removed = filter_by_diversity(batch, 0.75)
    assert len(kept) == 6 and len(removed) == 2
    assert min(d.quality.diversity for d in kept) >= max(d.quality.diversity for d in removed)
    assert sorted(d.id for d in removed) == ["d6", "d7"]

    # tie case: equal scores resolve by ascending id, greatest id removed
    ties = [_transcript_dialogue(f"t{i}", list("same same words words")) for i in range(4)]
    kept_t, removed_t = filter_by_diversity(ties, 0.75)
    assert len(kept_t) == 3 and [d.id for d in removed_t] == ["t3"]
    print("\nACCEPTANCE PASS: quarter filtering (6 of 8 kept, ordered, tie by id)")


# ---------------------------------------------------------------------------
# generation-loop replay


def test_criterion_generation_replay(album_doc, fourteen_turn_script, tmp_path):
    params = GenerationParams(turn_budget=14)
    outputs = []
    for run_index in range(2):
        backend = scripted_backend(fourteen_turn_script)
        dialogue = generate_dialogue(backend, album_doc, params, manifest_id="replay")
        assert len(dialogue.turns) == 14
        for i, turn in enumerate(dialogue.turns):
            assert turn.role is (Role.USER if i % 2 == 0 else Role.SYSTEM)
        strategies = [cfg.strategy for _, cfg in backend.requests]
        assert strategies == ["nucleus", "greedy"] * 7
        path = tmp_path / f"replay-{run_index}.jsonl"
        write_dataset([dialogue], path)
        outputs.append(path.read_bytes())
    assert outputs[0] == outputs[1]
    print("\nACCEPTANCE PASS: generation replay (14 alternating turns, byte-identical)")


# ---------------------------------------------------------------------------
# schedule table


def test_criterion_schedule_table():
    expected = {
        (50, 250): (1000, 200),
        (100, 500): (2000, 400),
        (50, 1000): (2000, 200),
        (50, 2000): (4000, 200),
        (50, 4000): (8000, 200),
        (50, 10000): (20000, 200),
        (50, 20000): (40000, 200),
        (200, 500): (2000, 800),
        (500, 500): (2000, 2000),
    }
    for (human, synthetic), (pretrain, finetune) in expected.items():
        schedule = training_schedule(human, synthetic)
        assert (schedule.pretrain_steps, schedule.finetune_steps) == (pretrain, finetune), (
            human,
            synthetic,
        )
        assert not schedule.extrapolated
    print(f"\nACCEPTANCE PASS: schedule table ({len(expected)} pairs exact)")


# ---------------------------------------------------------------------------
# robustness: transient failures and kill/resume


def test_criterion_robustness(tmp_path):
    # 10% transient failures, retry budget 3: the 16-dialogue run completes
    flaky = _manifest(tmp_path, out_name="flaky")
    report = run(flaky, backend_factory=flaky_factory(every=10))
    assert report["generated"] == 16
    assert report["failed"] == 0
    dialogues = read_dataset(tmp_path / "flaky" / "kept.jsonl") + read_dataset(
        tmp_path / "flaky" / "removed.jsonl"
    )
    assert len(dialogues) == 16
    assert len({d.id for d in dialogues}) == 16
    pairs = {(d.doc_id, d.generator_meta["replicate_index"]) for d in dialogues}
    assert pairs == {(f"doc-{c}", r) for c in "ab" for r in range(8)}

    # kill after ~5 dialogues, resume, compare bytes with an uninterrupted run
    reference = _manifest(tmp_path, out_name="ref")
    run(reference, backend_factory=scripted_factory())
    want = (tmp_path / "ref" / "kept.jsonl").read_bytes()

    killed = _manifest(tmp_path, out_name="killed")
    budget = {"left": 20}
    lock = threading.Lock()

    class Killing:
        def __init__(self, inner):
            self._inner = inner
            self.retry = inner.retry
            self.model_id = inner.model_id

        def attempt(self, prompt, config):
            with lock:
                if budget["left"] <= 0:
                    raise RuntimeError("killed")
                budget["left"] -= 1
            return self._inner.attempt(prompt, config)

    base = scripted_factory()
    with pytest.raises(RunAborted):
        run(killed, backend_factory=lambda doc, r: Killing(base(doc, r)))
    resumed = run(killed, backend_factory=scripted_factory(), resume=True)
    assert resumed["generated"] == 16
    assert (tmp_path / "killed" / "kept.jsonl").read_bytes() == want
    print("\nACCEPTANCE PASS: robustness (flaky run complete, resume byte-identical)")


# ---------------------------------------------------------------------------
# grounding flags


def test_criterion_grounding_flags(album_doc):
    copied = [
        "Night Signal released their second album Driftwork on 5 March 1998.",
        "The record sold eighty thousand copies in its first week.",
        "The band toured nine countries.",
        "The lead single reached number four on the national chart.",
        "Critics praised the drumming and the restrained production.",
    ]
    disjoint = [
        "purple elephants juggle quietly",
        "submarine lettuce overture",
        "twelve glaciers hum backwards",
        "paprika vendetta waltz",
        "quantum biscuits forever",
    ]
    flagged = []
    for text in copied + disjoint:
        turn = Turn(index=1, role=Role.SYSTEM, text=text)
        flags = classify_answer(turn, album_doc, hallucination_threshold=0.5)
        if HALLUCINATION in flags:
            flagged.append(text)
    assert flagged == disjoint
    print("\nACCEPTANCE PASS: grounding flags (exactly the 5 disjoint answers)")
