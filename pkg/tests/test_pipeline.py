import json
import threading

import pytest

from autoconv.backend import BackendSpec, RetryPolicy, ScriptedBackend
from autoconv.corpus import Document, read_dataset, write_documents
from autoconv.generator import GenerationParams
from autoconv.pipeline import (
    CorruptCheckpointError,
    JobManifest,
    PlanError,
    RunAborted,
    TrainingSchedule,
    plan,
    run,
    training_schedule,
)

# ---------------------------------------------------------------------------
# training_schedule


class TestTrainingSchedule:
    @pytest.mark.parametrize(
        "human,synthetic,pretrain,finetune",
        [
            (50, 250, 1000, 200),
            (100, 500, 2000, 400),
            (200, 20000, 40000, 800),
            (50, 1000, 2000, 200),
            (50, 2000, 4000, 200),
            (50, 4000, 8000, 200),
            (50, 10000, 20000, 200),
            (500, 500, 2000, 2000),
        ],
    )
    def test_lookup_table(self, human, synthetic, pretrain, finetune):
        schedule = training_schedule(human, synthetic)
        assert schedule.pretrain_steps == pretrain
        assert schedule.finetune_steps == finetune
        assert not schedule.extrapolated

    def test_fallback_is_flagged(self):
        schedule = training_schedule(75, 300)
        assert schedule.finetune_steps == 300  # 4 x human
        assert schedule.pretrain_steps == 1000  # floor of max(1000, 2 x synthetic)
        assert schedule.extrapolated

    def test_fallback_scales_synthetic(self):
        schedule = training_schedule(50, 40000)
        assert schedule.pretrain_steps == 80000
        assert schedule.extrapolated

    def test_zero_counts_error(self):
        with pytest.raises(ValueError):
            training_schedule(0, 250)
        with pytest.raises(ValueError):
            training_schedule(50, 0)

    def test_schedule_type_validates(self):
        with pytest.raises(ValueError):
            TrainingSchedule(pretrain_steps=0, finetune_steps=10)


# ---------------------------------------------------------------------------
# plan


def _config(tmp_path, **overrides):
    cfg = {
        "schema": "autoconv-config/1",
        "dataset": "quac",
        "corpus_path": str(tmp_path / "quac_dev.json"),
        "output_dir": str(tmp_path / "out"),
        "backend": {"endpoint": "http://localhost:8000/v1/completions", "model_id": "m13b"},
    }
    cfg.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


class TestPlan:
    def test_quac_defaults(self, tmp_path):
        manifest = plan(_config(tmp_path))
        assert manifest.params.turn_budget == 14
        assert manifest.dialogues_per_doc == 8
        assert manifest.keep_fraction == 0.75
        assert manifest.n_documents == 5000
        assert manifest.params.question_config.top_p == 0.9
        assert manifest.params.answer_config.strategy == "greedy"
        assert manifest.backend.retry.max_attempts == 3

    def test_coqa_turn_budget(self, tmp_path):
        manifest = plan(_config(tmp_path, dataset="coqa"))
        assert manifest.params.turn_budget == 30

    def test_explicit_budget_wins(self, tmp_path):
        manifest = plan(_config(tmp_path, turn_budget=6))
        assert manifest.params.turn_budget == 6

    def test_beam_answer_config(self, tmp_path):
        manifest = plan(_config(tmp_path, answer={"strategy": "beam", "width": 8}))
        assert manifest.params.answer_config.strategy == "beam"
        assert manifest.params.answer_config.beam_width == 8

    def test_keep_fraction_zero_rejected(self, tmp_path):
        with pytest.raises(PlanError, match="keep_fraction"):
            plan(_config(tmp_path, keep_fraction=0))

    def test_errors_enumerated(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"schema": "autoconv-config/1", "keep_fraction": 0}))
        with pytest.raises(PlanError) as excinfo:
            plan(path)
        assert len(excinfo.value.errors) >= 4

    def test_custom_dataset_requires_budget(self, tmp_path):
        with pytest.raises(PlanError, match="turn_budget"):
            plan(_config(tmp_path, dataset="custom"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(PlanError, match="not found"):
            plan(tmp_path / "nope.json")

    def test_stable_derived_id(self, tmp_path):
        path = _config(tmp_path)
        assert plan(path).id == plan(path).id


# ---------------------------------------------------------------------------
# run


def make_script(doc_id: str, replicate: int, n_turns: int = 4) -> list[str]:
    """Deterministic per-dialogue script; repetition grows with replicate."""
    entries = []
    for i in range(n_turns // 2):
        entries.append(f"question {i} about {doc_id} piece {replicate}?")
        filler = " ".join(["loop"] * (replicate + 2 * i))
        entries.append(f"answer {i} covering {doc_id} piece {replicate} {filler}".strip())
    return entries


def scripted_factory(n_turns: int = 4):
    def factory(doc: Document, replicate: int) -> ScriptedBackend:
        return ScriptedBackend(make_script(doc.id, replicate, n_turns))

    return factory


def flaky_factory(every: int, n_turns: int = 4):
    """Every Nth request across the whole run fails once, then succeeds."""
    counter = {"n": 0}
    lock = threading.Lock()

    class Flaky:
        def __init__(self, inner):
            self._inner = inner
            self.retry = inner.retry
            self.model_id = inner.model_id

        def attempt(self, prompt, config):
            with lock:
                counter["n"] += 1
                ordinal = counter["n"]
            if ordinal % every == 0:
                from autoconv.backend import TransientBackendError

                raise TransientBackendError(f"injected failure at global request {ordinal}")
            return self._inner.attempt(prompt, config)

    def factory(doc, replicate):
        return Flaky(ScriptedBackend(make_script(doc.id, replicate, n_turns) * 2))

    return factory


def _manifest(tmp_path, out_name="out", **overrides):
    docs = [
        Document(id="doc-a", title="Alpha", text="Alpha text about pieces and loops."),
        Document(id="doc-b", title="Beta", text="Beta text about pieces and loops."),
    ]
    docs_path = tmp_path / "docs.jsonl"
    write_documents(docs, docs_path)
    fields = dict(
        id="job-1",
        dataset="custom",
        corpus_path=str(docs_path),
        n_documents=2,
        dialogues_per_doc=8,
        params=GenerationParams(turn_budget=4),
        keep_fraction=0.75,
        seed=11,
        backend=BackendSpec(
            endpoint="http://unused.invalid/v1/completions",
            model_id="placeholder",
            retry=RetryPolicy(max_attempts=3, base_backoff=0.0, jitter=0.0),
        ),
        output_dir=str(tmp_path / out_name),
    )
    fields.update(overrides)
    return JobManifest(**fields)


class TestRun:
    def test_generates_and_filters(self, tmp_path):
        manifest = _manifest(tmp_path)
        report = run(manifest, backend_factory=scripted_factory())
        assert report["generated"] == 16
        assert report["kept"] == 12  # ceil(0.75 * 16)
        assert report["removed"] == 4
        assert report["failed"] == 0
        kept = read_dataset(tmp_path / "out" / "kept.jsonl")
        removed = read_dataset(tmp_path / "out" / "removed.jsonl")
        assert len(kept) == 12 and len(removed) == 4
        ids = [d.id for d in kept + removed]
        assert len(set(ids)) == 16
        assert all(d.quality is not None for d in kept + removed)
        assert all(d.quality.kept for d in kept)
        assert (tmp_path / "out" / "documents.jsonl").exists()
        assert (tmp_path / "out" / "report.json").exists()

    def test_byte_identical_across_runs(self, tmp_path):
        m1 = _manifest(tmp_path, out_name="out1")
        m2 = _manifest(tmp_path, out_name="out2")
        run(m1, backend_factory=scripted_factory(), concurrency=8)
        run(m2, backend_factory=scripted_factory(), concurrency=2)
        for name in ("kept.jsonl", "removed.jsonl"):
            b1 = (tmp_path / "out1" / name).read_bytes()
            b2 = (tmp_path / "out2" / name).read_bytes()
            assert b1 == b2

    def test_transient_failures_recovered(self, tmp_path):
        manifest = _manifest(tmp_path)
        report = run(manifest, backend_factory=flaky_factory(every=10))
        assert report["generated"] == 16
        assert report["failed"] == 0
        kept = read_dataset(tmp_path / "out" / "kept.jsonl")
        removed = read_dataset(tmp_path / "out" / "removed.jsonl")
        assert len(set(d.id for d in kept + removed)) == 16

    def test_hard_failure_dropped_and_counted(self, tmp_path):
        base = scripted_factory()

        def factory(doc, replicate):
            if (doc.id, replicate) == ("doc-a", 1):
                return ScriptedBackend(
                    ["x"],
                    fail_once_every=1,
                    retry=RetryPolicy(max_attempts=1, base_backoff=0.0, jitter=0.0),
                )
            return base(doc, replicate)

        manifest = _manifest(tmp_path)
        report = run(manifest, backend_factory=factory)
        assert report["generated"] == 15
        assert report["failed"] == 1
        assert report["failures"][0]["doc_id"] == "doc-a"
        assert report["kept"] + report["removed"] == 15

    def test_kill_and_resume_matches_uninterrupted(self, tmp_path):
        uninterrupted = _manifest(tmp_path, out_name="ref")
        run(uninterrupted, backend_factory=scripted_factory())
        reference = (tmp_path / "ref" / "kept.jsonl").read_bytes()

        killed = _manifest(tmp_path, out_name="killed")
        switch = {"left": 20}
        lock = threading.Lock()
        base = scripted_factory()

        class Killing:
            def __init__(self, inner):
                self._inner = inner
                self.retry = inner.retry
                self.model_id = inner.model_id

            def attempt(self, prompt, config):
                with lock:
                    if switch["left"] <= 0:
                        raise RuntimeError("killed")
                    switch["left"] -= 1
                return self._inner.attempt(prompt, config)

        with pytest.raises(RunAborted):
            run(killed, backend_factory=lambda d, r: Killing(base(d, r)))
        checkpoint = (tmp_path / "killed" / "checkpoint.log").read_text()
        assert 1 <= len(checkpoint.splitlines()) < 16
        assert not (tmp_path / "killed" / "kept.jsonl").exists()

        report = run(killed, backend_factory=scripted_factory(), resume=True)
        assert report["generated"] == 16
        assert (tmp_path / "killed" / "kept.jsonl").read_bytes() == reference

    def test_refuses_rerun_without_resume(self, tmp_path):
        manifest = _manifest(tmp_path)
        run(manifest, backend_factory=scripted_factory())
        with pytest.raises(RunAborted, match="resume"):
            run(manifest, backend_factory=scripted_factory())

    def test_resume_noop_when_complete(self, tmp_path):
        manifest = _manifest(tmp_path)
        run(manifest, backend_factory=scripted_factory())
        before = (tmp_path / "out" / "kept.jsonl").read_bytes()
        report = run(manifest, backend_factory=scripted_factory(), resume=True)
        assert report["generated"] == 16
        assert (tmp_path / "out" / "kept.jsonl").read_bytes() == before

    def test_corrupted_checkpoint_refused(self, tmp_path):
        manifest = _manifest(tmp_path)
        run(manifest, backend_factory=scripted_factory())
        data_path = tmp_path / "out" / "generated.jsonl"
        lines = data_path.read_text().splitlines()
        lines[0] = lines[0].replace("question", "tampered", 1)
        data_path.write_text("\n".join(lines) + "\n")
        with pytest.raises(CorruptCheckpointError):
            run(manifest, backend_factory=scripted_factory(), resume=True)

    def test_partial_trailing_line_tolerated(self, tmp_path):
        manifest = _manifest(tmp_path)
        run(manifest, backend_factory=scripted_factory())
        # simulate a crash mid-append: trailing garbage without checkpoint entry
        with (tmp_path / "out" / "generated.jsonl").open("a") as handle:
            handle.write('{"doc_id": "doc-a", "generator')
        (tmp_path / "out" / "kept.jsonl").unlink()
        report = run(manifest, backend_factory=scripted_factory(), resume=True)
        assert report["generated"] == 16

    def test_output_ordering_deterministic(self, tmp_path):
        manifest = _manifest(tmp_path)
        run(manifest, backend_factory=scripted_factory())
        kept = read_dataset(tmp_path / "out" / "kept.jsonl")
        keys = [(d.doc_id, d.generator_meta["replicate_index"]) for d in kept]
        assert keys == sorted(keys)
