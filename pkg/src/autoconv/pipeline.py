"""Job manifests, the concurrent generation run with checkpoint/resume,
and the two-stage training-step schedule.

A run is replayable: the manifest plus a deterministic backend produce
byte-identical ``kept.jsonl`` / ``removed.jsonl`` across runs and across
resume boundaries.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import FIRST_EXCEPTION, ThreadPoolExecutor, wait
from dataclasses import dataclass, replace
from pathlib import Path

from .backend import BackendError, BackendSpec, DecodingConfig, RetryPolicy, validate_config
from .corpus import (
    Dialogue,
    Document,
    dialogue_from_record,
    dialogue_to_line,
    ingest_coqa,
    ingest_quac,
    read_documents,
    sample_documents,
    write_dataset,
    write_documents,
)
from .generator import (
    STOP_SEQUENCES,
    EmptyDialogueError,
    GenerationError,
    GenerationParams,
    generate_dialogue,
)
from .quality import batch_summary, build_quality_report, filter_by_diversity

CONFIG_SCHEMA = "autoconv-config/1"
REPORT_SCHEMA = "autoconv-report/1"

DEFAULT_CONCURRENCY = 8
DEFAULT_TURN_BUDGETS = {"quac": 14, "coqa": 30}
DEFAULT_N_DOCUMENTS = 5000
DEFAULT_DIALOGUES_PER_DOC = 8
DEFAULT_KEEP_FRACTION = 0.75

# training-step schedules; off-table sizes fall back to 4x human /
# max(1000, 2x synthetic) and are flagged as extrapolated
FINETUNE_STEPS = {50: 200, 100: 400, 200: 800, 500: 2000}
PRETRAIN_STEPS = {
    250: 1000,
    500: 2000,
    1000: 2000,
    2000: 4000,
    4000: 8000,
    10000: 20000,
    20000: 40000,
}


class PlanError(ValueError):
    """Invalid run configuration; ``errors`` lists every violation."""

    def __init__(self, errors: list[str]):
        super().__init__("invalid configuration: " + "; ".join(errors))
        self.errors = list(errors)


class CorruptCheckpointError(RuntimeError):
    """Checkpoint and generated records disagree; refusing to resume."""


class RunAborted(RuntimeError):
    """The run stopped on an unrecoverable failure; checkpoint retained."""


@dataclass(frozen=True)
class TrainingSchedule:
    """Gradient-step counts for the two-stage small-model training."""

    pretrain_steps: int
    finetune_steps: int
    extrapolated: bool = False

    def __post_init__(self):
        if self.pretrain_steps < 1 or self.finetune_steps < 1:
            raise ValueError("step counts must be >= 1")

    def to_dict(self) -> dict:
        return {
            "pretrain_steps": self.pretrain_steps,
            "finetune_steps": self.finetune_steps,
            "extrapolated": self.extrapolated,
        }


def training_schedule(n_human: int, n_synthetic: int) -> TrainingSchedule:
    """Look up the step schedule for the given dialogue counts."""
    if n_human < 1 or n_synthetic < 1:
        raise ValueError("dialogue counts must be >= 1")
    extrapolated = False
    finetune = FINETUNE_STEPS.get(n_human)
    if finetune is None:
        finetune = 4 * n_human
        extrapolated = True
    pretrain = PRETRAIN_STEPS.get(n_synthetic)
    if pretrain is None:
        pretrain = max(1000, 2 * n_synthetic)
        extrapolated = True
    return TrainingSchedule(pretrain, finetune, extrapolated)


@dataclass(frozen=True)
class JobManifest:
    """A full, replayable description of one generation run."""

    id: str
    dataset: str
    corpus_path: str
    n_documents: int
    dialogues_per_doc: int
    params: GenerationParams
    keep_fraction: float
    seed: int
    backend: BackendSpec
    output_dir: str

    def __post_init__(self):
        if self.dataset not in ("quac", "coqa", "custom"):
            raise ValueError(f"unknown dataset {self.dataset!r}")
        if self.n_documents < 1:
            raise ValueError("n_documents must be >= 1")
        if self.dialogues_per_doc < 1:
            raise ValueError("dialogues_per_doc must be >= 1")
        if not 0.0 < self.keep_fraction <= 1.0:
            raise ValueError("keep_fraction must be in (0, 1]")


def plan(config_path) -> JobManifest:
    """Parse and validate a run config file into a fully resolved manifest.

    Defaults follow the reference generation recipe: 5K documents, 8
    dialogues per document, keep fraction 0.75, turn budget 14 for QuAC
    and 30 for CoQA.
    """
    config_path = Path(config_path)
    errors: list[str] = []
    if not config_path.exists():
        raise PlanError([f"config file not found: {config_path}"])
    try:
        cfg = json.loads(config_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as err:
        raise PlanError([f"config is not valid JSON: {err}"]) from err
    if not isinstance(cfg, dict):
        raise PlanError(["config must be a JSON object"])
    if cfg.get("schema") != CONFIG_SCHEMA:
        errors.append(f"unknown config schema {cfg.get('schema')!r} (expected {CONFIG_SCHEMA})")

    dataset = cfg.get("dataset")
    if dataset not in ("quac", "coqa", "custom"):
        errors.append("dataset must be one of quac, coqa, custom")
    corpus_path = cfg.get("corpus_path")
    if not corpus_path:
        errors.append("corpus_path is required")
    output_dir = cfg.get("output_dir")
    if not output_dir:
        errors.append("output_dir is required")

    turn_budget = cfg.get("turn_budget")
    if turn_budget is None:
        turn_budget = DEFAULT_TURN_BUDGETS.get(dataset)
        if turn_budget is None:
            errors.append("turn_budget is required for a custom dataset")
    n_documents = cfg.get("n_documents", DEFAULT_N_DOCUMENTS)
    dialogues_per_doc = cfg.get("dialogues_per_doc", DEFAULT_DIALOGUES_PER_DOC)
    keep_fraction = cfg.get("keep_fraction", DEFAULT_KEEP_FRACTION)
    seed = cfg.get("seed", 0)

    if not isinstance(n_documents, int) or n_documents < 1:
        errors.append("n_documents must be an integer >= 1")
    if not isinstance(dialogues_per_doc, int) or dialogues_per_doc < 1:
        errors.append("dialogues_per_doc must be an integer >= 1")
    if not isinstance(keep_fraction, (int, float)) or not 0.0 < keep_fraction <= 1.0:
        errors.append("keep_fraction must be in (0, 1]")
    if not isinstance(seed, int):
        errors.append("seed must be an integer")

    question_cfg = cfg.get("question", {})
    answer_cfg = cfg.get("answer", {})
    params = None
    if turn_budget is not None:
        try:
            question = DecodingConfig.nucleus(
                top_p=question_cfg.get("top_p", 0.9),
                max_new_tokens=question_cfg.get("max_new_tokens", 64),
                temperature=question_cfg.get("temperature", 1.0),
                stop_sequences=STOP_SEQUENCES,
            )
            strategy = answer_cfg.get("strategy", "greedy")
            if strategy == "beam":
                answer = DecodingConfig.beam(
                    width=answer_cfg.get("width", 4),
                    max_new_tokens=answer_cfg.get("max_new_tokens", 128),
                    stop_sequences=STOP_SEQUENCES,
                )
            else:
                answer = DecodingConfig.greedy(
                    max_new_tokens=answer_cfg.get("max_new_tokens", 128),
                    stop_sequences=STOP_SEQUENCES,
                )
            errors.extend(f"question config: {v}" for v in validate_config(question))
            errors.extend(f"answer config: {v}" for v in validate_config(answer))
            params = GenerationParams(
                turn_budget=int(turn_budget),
                question_config=question,
                answer_config=answer,
            )
        except (TypeError, ValueError) as err:
            errors.append(str(err))

    backend_cfg = cfg.get("backend", {})
    backend = None
    if not backend_cfg.get("endpoint"):
        errors.append("backend.endpoint is required")
    if not backend_cfg.get("model_id"):
        errors.append("backend.model_id is required")
    if backend_cfg.get("endpoint") and backend_cfg.get("model_id"):
        retry_cfg = backend_cfg.get("retry", {})
        try:
            backend = BackendSpec(
                endpoint=backend_cfg["endpoint"],
                model_id=backend_cfg["model_id"],
                auth_env=backend_cfg.get("auth_env", "AUTOCONV_API_KEY"),
                timeout=backend_cfg.get("timeout", 60.0),
                retry=RetryPolicy(
                    max_attempts=retry_cfg.get("max_attempts", 3),
                    base_backoff=retry_cfg.get("base_backoff", 1.0),
                    jitter=retry_cfg.get("jitter", 0.1),
                ),
            )
        except (TypeError, ValueError) as err:
            errors.append(str(err))

    if errors:
        raise PlanError(errors)

    manifest_id = cfg.get("id") or hashlib.sha256(
        json.dumps(cfg, sort_keys=True).encode("utf-8")
    ).hexdigest()[:12]
    return JobManifest(
        id=manifest_id,
        dataset=dataset,
        corpus_path=str(corpus_path),
        n_documents=n_documents,
        dialogues_per_doc=dialogues_per_doc,
        params=params,
        keep_fraction=float(keep_fraction),
        seed=seed,
        backend=backend,
        output_dir=str(output_dir),
    )


def load_corpus_documents(manifest: JobManifest) -> list[Document]:
    if manifest.dataset == "quac":
        docs, _ = ingest_quac(manifest.corpus_path)
    elif manifest.dataset == "coqa":
        docs, _ = ingest_coqa(manifest.corpus_path)
    else:
        docs = read_documents(manifest.corpus_path)
    return docs


class _Checkpoint:
    """Append-only completion log paired with the raw generated records.

    Each completed dialogue appends its serialized record to
    ``generated.jsonl`` and a ``{doc_id, replicate, sha256}`` line to
    ``checkpoint.log``; a record is considered committed only when both
    are present and the hash matches.
    """

    def __init__(self, output_dir: Path):
        self.log_path = output_dir / "checkpoint.log"
        self.data_path = output_dir / "generated.jsonl"

    def exists(self) -> bool:
        return self.log_path.exists() or self.data_path.exists()

    @staticmethod
    def _read_lines(path: Path, kind: str) -> list[dict]:
        """Parse JSONL, tolerating only a partially written final line."""
        entries = []
        raw_lines = [l for l in path.read_text(encoding="utf-8").splitlines() if l.strip()]
        for i, raw in enumerate(raw_lines):
            try:
                entries.append((raw, json.loads(raw)))
            except json.JSONDecodeError as err:
                if i == len(raw_lines) - 1:
                    break  # crash artifact: drop the uncommitted tail
                raise CorruptCheckpointError(f"bad {kind} line {i + 1}: {err}") from err
        return entries

    def load_verified(self) -> dict[tuple[str, int], Dialogue]:
        """Replay the checkpoint; raise CorruptCheckpointError on any mismatch."""
        lines_by_pair: dict[tuple[str, int], str] = {}
        if self.data_path.exists():
            for raw, record in self._read_lines(self.data_path, "generated record"):
                try:
                    pair = (record["doc_id"], record["generator_meta"]["replicate_index"])
                except (KeyError, TypeError) as err:
                    raise CorruptCheckpointError(f"bad generated record: {err}") from err
                lines_by_pair[pair] = raw

        completed: dict[tuple[str, int], Dialogue] = {}
        if self.log_path.exists():
            for _, entry in self._read_lines(self.log_path, "checkpoint entry"):
                try:
                    pair = (entry["doc_id"], entry["replicate"])
                    digest = entry["sha256"]
                except (KeyError, TypeError) as err:
                    raise CorruptCheckpointError(f"bad checkpoint entry: {err}") from err
                if pair in completed:
                    raise CorruptCheckpointError(f"duplicate checkpoint entry for {pair}")
                line = lines_by_pair.get(pair)
                if line is None:
                    raise CorruptCheckpointError(f"checkpointed dialogue missing for {pair}")
                if hashlib.sha256(line.encode("utf-8")).hexdigest() != digest:
                    raise CorruptCheckpointError(f"hash mismatch for {pair}")
                completed[pair] = dialogue_from_record(json.loads(line))

        # rewrite both files down to the committed set so uncommitted
        # crash artifacts cannot accumulate across resumes
        self._compact(completed, lines_by_pair)
        return completed

    def _compact(self, completed, lines_by_pair) -> None:
        with self.data_path.open("w", encoding="utf-8", newline="\n") as handle:
            for pair in sorted(completed):
                handle.write(lines_by_pair[pair] + "\n")
        with self.log_path.open("w", encoding="utf-8", newline="\n") as handle:
            for pair in sorted(completed):
                entry = {
                    "doc_id": pair[0],
                    "replicate": pair[1],
                    "sha256": hashlib.sha256(lines_by_pair[pair].encode("utf-8")).hexdigest(),
                }
                handle.write(json.dumps(entry, sort_keys=True) + "\n")

    def append(self, dialogue: Dialogue, doc_id: str, replicate: int) -> None:
        line = dialogue_to_line(dialogue)
        with self.data_path.open("a", encoding="utf-8", newline="\n") as handle:
            handle.write(line + "\n")
            handle.flush()
        entry = {
            "doc_id": doc_id,
            "replicate": replicate,
            "sha256": hashlib.sha256(line.encode("utf-8")).hexdigest(),
        }
        with self.log_path.open("a", encoding="utf-8", newline="\n") as handle:
            handle.write(json.dumps(entry, sort_keys=True) + "\n")
            handle.flush()


def _derived_seed(seed: int, doc_id: str, replicate: int) -> int:
    digest = hashlib.sha256(f"{seed}\x1f{doc_id}\x1f{replicate}".encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "big") & 0x7FFFFFFF

def _generate_one(manifest: JobManifest, backend_factory, doc: Document, replicate: int) -> Dialogue:
    backend = backend_factory(doc, replicate) if backend_factory else manifest.backend
    params = replace(manifest.params, replicate_index=replicate)
    question = params.question_config
    if question.seed is None:
        # stamp a per-dialogue sampling seed so nucleus decoding is replayable
        question = replace(question, seed=_derived_seed(manifest.seed, doc.id, replicate))
        params = replace(params, question_config=question)
    return generate_dialogue(
        backend, doc, params, manifest_id=manifest.id, seed=manifest.seed
    )


def run(
    manifest: JobManifest,
    *,
    backend_factory=None,
    concurrency: int = DEFAULT_CONCURRENCY,
    resume: bool = False,
) -> dict:
    """Execute a generation run and write the dataset files.

    Generates ``n_documents x dialogues_per_doc`` dialogues with at most
    ``concurrency`` in flight, checkpointing each completed dialogue. With
    ``resume=True`` completed (doc_id, replicate) pairs are skipped. After
    generation, diversity filtering splits the batch into ``kept.jsonl``
    and ``removed.jsonl`` (ordered by (doc_id, replicate)) and a run report
    is written to ``report.json``.

    Backend failures that survive the retry policy drop the affected
    dialogue and are counted in the report. Any non-backend failure aborts
    the run with the checkpoint retained.
    """
    output_dir = Path(manifest.output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)

    documents = load_corpus_documents(manifest)
    documents = sample_documents(documents, manifest.n_documents, manifest.seed)
    doc_by_id = {doc.id: doc for doc in documents}
    write_documents(documents, output_dir / "documents.jsonl")

    checkpoint = _Checkpoint(output_dir)
    completed: dict[tuple[str, int], Dialogue] = {}
    if checkpoint.exists():
        if not resume:
            raise RunAborted(
                f"{output_dir} already contains a checkpoint; rerun with resume enabled"
                " (--resume) to continue, or point the run at a fresh output_dir"
            )
        completed = checkpoint.load_verified()
        unknown = [pair for pair in completed if pair[0] not in doc_by_id]
        if unknown:
            raise CorruptCheckpointError(f"checkpoint references unknown documents: {unknown}")

    tasks = [
        (doc, r)
        for doc in documents
        for r in range(manifest.dialogues_per_doc)
        if (doc.id, r) not in completed
    ]

    failures: list[dict] = []
    discarded: list[dict] = []
    abort_cause: BaseException | None = None
    with ThreadPoolExecutor(max_workers=max(1, concurrency)) as pool:
        futures = {
            pool.submit(_generate_one, manifest, backend_factory, doc, r): (doc.id, r)
            for doc, r in tasks
        }
        pending = set(futures)
        while pending:
            done, pending = wait(pending, return_when=FIRST_EXCEPTION)
            for future in done:
                doc_id, r = futures[future]
                try:
                    dialogue = future.result()
                except EmptyDialogueError as err:
                    discarded.append({"doc_id": doc_id, "replicate": r, "error": str(err)})
                except (GenerationError, BackendError) as err:
                    failures.append({"doc_id": doc_id, "replicate": r, "error": str(err)})
                except BaseException as err:  # unrecoverable: stop scheduling
                    abort_cause = err
                else:
                    checkpoint.append(dialogue, doc_id, r)
                    completed[(doc_id, r)] = dialogue
            if abort_cause is not None:
                for future in pending:
                    future.cancel()
                break
    if abort_cause is not None:
        raise RunAborted(f"run aborted: {abort_cause}") from abort_cause
    if not completed:
        raise RunAborted(
            f"no dialogues were generated ({len(failures)} failures, "
            f"{len(discarded)} discards); checkpoint retained"
        )

    # deterministic batch order, then quality + filtering
    ordered = [completed[pair] for pair in sorted(completed)]
    with_reports = [
        d if d.quality is not None else _with_report(d, doc_by_id[d.doc_id])
        for d in ordered
    ]
    kept, removed = filter_by_diversity(with_reports, manifest.keep_fraction)
    kept.sort(key=_output_key)
    removed.sort(key=_output_key)
    write_dataset(kept, output_dir / "kept.jsonl")
    write_dataset(removed, output_dir / "removed.jsonl")

    summary = batch_summary(kept + removed)
    report = {
        "schema": REPORT_SCHEMA,
        "manifest_id": manifest.id,
        "n_documents": manifest.n_documents,
        "dialogues_per_doc": manifest.dialogues_per_doc,
        "generated": len(completed),
        "failed": len(failures),
        "discarded": len(discarded),
        "kept": len(kept),
        "removed": len(removed),
        "flag_counts": summary["flag_counts"],
        "diversity": {
            "mean": summary["diversity_mean"],
            "min": summary["diversity_min"],
            "max": summary["diversity_max"],
        },
        "failures": sorted(failures, key=lambda f: (f["doc_id"], f["replicate"])),
        "discards": sorted(discarded, key=lambda f: (f["doc_id"], f["replicate"])),
    }
    (output_dir / "report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return report


def _with_report(dialogue: Dialogue, document: Document) -> Dialogue:
    from .corpus import with_quality

    return with_quality(dialogue, build_quality_report(dialogue, document))


def _output_key(dialogue: Dialogue):
    meta = dialogue.generator_meta or {}
    return (dialogue.doc_id, meta.get("replicate_index", 0), dialogue.id)
