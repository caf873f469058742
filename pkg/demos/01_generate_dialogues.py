"""Generate synthetic dialogues offline with a scripted backend.

Walks through the two levels of the API: a single dialogue via
generate_dialogue, then a full checkpointed pipeline run that samples
documents, generates replicates concurrently, and diversity-filters the
batch into kept/removed files.
"""

import tempfile
from pathlib import Path

from autoconv import (
    BackendSpec,
    Document,
    GenerationParams,
    JobManifest,
    RetryPolicy,
    ScriptedBackend,
    generate_dialogue,
    read_dataset,
    run,
    utterance_nll,
    write_documents,
)

DOC = Document(
    id="demo-doc",
    title="Night Signal",
    section_title="Second album",
    text=(
        "Night Signal released their second album Driftwork on 5 March 1998. "
        "The record sold eighty thousand copies in its first week. "
        "The band toured nine countries in support of the release. "
        "The lead single reached number four on the national chart."
    ),
)

# a scripted backend replays canned completions: even entries are user
# questions, odd entries are system answers copied from the document
SCRIPT = [
    "What was the second album?",
    "Night Signal released their second album Driftwork on 5 March 1998.",
    "How did it sell?",
    "The record sold eighty thousand copies in its first week.",
    "Did they tour?",
    "The band toured nine countries in support of the release.",
]


def main():
    print("=== one dialogue ===")
    backend = ScriptedBackend(SCRIPT)
    params = GenerationParams(turn_budget=6)
    dialogue = generate_dialogue(backend, DOC, params, manifest_id="demo")
    for turn in dialogue.turns:
        nll = utterance_nll(turn)
        suffix = f"  (nll={nll:.2f})" if nll is not None else ""
        print(f"  {turn.role.tag}: {turn.text}{suffix}")
    print(f"  -> id={dialogue.id} strategy per role: "
          f"{[t.decoding.strategy for t in dialogue.turns]}")

    print("\n=== full pipeline run ===")
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        docs = [DOC, Document(id="demo-doc-2", title="Harbor Lights",
                              text="Harbor Lights toured for two years. "
                                   "The tour visited forty cities.")]
        write_documents(docs, tmp / "docs.jsonl")
        manifest = JobManifest(
            id="demo-run",
            dataset="custom",
            corpus_path=str(tmp / "docs.jsonl"),
            n_documents=2,
            dialogues_per_doc=4,
            params=GenerationParams(turn_budget=6),
            keep_fraction=0.75,
            seed=7,
            backend=BackendSpec(
                endpoint="http://unused.invalid",  # factory below overrides it
                model_id="scripted",
                retry=RetryPolicy(max_attempts=3, base_backoff=0.0, jitter=0.0),
            ),
            output_dir=str(tmp / "out"),
        )

        # per-dialogue scripted backends keep the run fully deterministic;
        # extra repetition in later replicates gives the filter work to do
        def factory(doc, replicate):
            entries = []
            for i in range(3):
                entries.append(f"question {i} on {doc.id} take {replicate}?")
                filler = " ".join(["again"] * (replicate + i))
                entries.append(f"answer {i} from {doc.id} take {replicate} {filler}".strip())
            return ScriptedBackend(entries)

        report = run(manifest, backend_factory=factory)
        print(f"  generated={report['generated']} kept={report['kept']} "
              f"removed={report['removed']}")
        kept = read_dataset(tmp / "out" / "kept.jsonl")
        print(f"  kept diversity range: "
              f"{min(d.quality.diversity for d in kept):.3f}"
              f" .. {max(d.quality.diversity for d in kept):.3f}")
        print(f"  files: {sorted(p.name for p in (tmp / 'out').iterdir())}")


if __name__ == "__main__":
    main()
