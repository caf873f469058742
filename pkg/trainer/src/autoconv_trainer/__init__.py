"""autoconv-trainer: reference two-stage trainer for autoconv datasets.

Consumes the generation pipeline's dataset and document files, trains a
small text-to-text model (pretrain on synthetic, finetune on human), and
writes predictions in the format the pipeline's eval command accepts.
"""

from .data import (
    DialogueRecord,
    DocumentRecord,
    TrainingExample,
    build_examples,
    read_dialogues,
    read_documents,
)
from .model import ModelSpec, load_artifact
from .predict import predict
from .train import two_stage_train

__version__ = "0.1.0"
