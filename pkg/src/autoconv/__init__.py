"""autoconv: document-grounded synthetic conversation generation.

Generates information-seeking dialogues by driving a finetuned LLM behind
a completions endpoint (nucleus sampling for user questions, greedy or
beam search for system answers), then diversity-filters, quality-flags,
packages, and evaluates the result.
"""

from .backend import (
    BackendError,
    BackendSpec,
    Completion,
    DecodingConfig,
    RetryPolicy,
    ScriptedBackend,
    complete,
    scripted_backend,
    validate_config,
)
from .corpus import (
    Dialogue,
    Document,
    GoldQA,
    Role,
    Turn,
    ingest_coqa,
    ingest_quac,
    read_dataset,
    read_documents,
    sample_documents,
    split_validation,
    write_dataset,
    write_documents,
)
from .evaluation import (
    EvalResult,
    Prediction,
    evaluate,
    exact_match,
    max_f1,
    normalize_text,
    read_predictions,
    token_f1,
    write_predictions,
)
from .generator import (
    GenerationParams,
    generate_dialogue,
    generate_turn,
    render_prompt,
    utterance_nll,
)
from .pipeline import JobManifest, TrainingSchedule, plan, run, training_schedule
from .quality import (
    QualityReport,
    build_quality_report,
    classify_answer,
    diversity_score,
    filter_by_diversity,
    grounding_overlap,
    ngram_repetition,
)

__version__ = "0.1.0"
