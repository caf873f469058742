"""Two-stage training: pretrain on synthetic examples, then finetune on
human examples, keeping the checkpoint with the best validation F1.

Stage boundaries are visible in the log and the saved history (step
counters reset between stages).
"""

from __future__ import annotations

import copy
import logging
import math
import random

import torch
from torch import nn

from .data import TrainingExample
from .metrics import mean_f1
from .model import BOS, EOS, PAD, ModelSpec, Seq2Seq, Vocab, save_artifact

logger = logging.getLogger(__name__)


def _encode_batch(examples, vocab: Vocab, spec: ModelSpec, device):
    srcs = [vocab.encode(e.input_text, spec.max_input_tokens, keep_tail=True) for e in examples]
    tgts = [vocab.encode(e.target_text, spec.max_target_tokens) for e in examples]
    src_len = max(len(s) for s in srcs)
    tgt_len = max(len(t) for t in tgts) + 1
    src = torch.full((len(examples), src_len), PAD, dtype=torch.long, device=device)
    tgt_in = torch.full((len(examples), tgt_len), PAD, dtype=torch.long, device=device)
    tgt_out = torch.full((len(examples), tgt_len), PAD, dtype=torch.long, device=device)
    for i, (s, t) in enumerate(zip(srcs, tgts)):
        src[i, : len(s)] = torch.tensor(s, dtype=torch.long)
        tgt_in[i, : len(t) + 1] = torch.tensor([BOS] + t, dtype=torch.long)
        tgt_out[i, : len(t) + 1] = torch.tensor(t + [EOS], dtype=torch.long)
    return src, tgt_in, tgt_out


def _batches(examples, batch_size, rng):
    order = list(range(len(examples)))
    while True:
        rng.shuffle(order)
        for start in range(0, len(order), batch_size):
            yield [examples[i] for i in order[start : start + batch_size]]


def _predict_text(model: Seq2Seq, vocab: Vocab, spec: ModelSpec, text: str, device) -> str:
    ids = vocab.encode(text, spec.max_input_tokens, keep_tail=True) or [PAD]
    src = torch.tensor([ids], dtype=torch.long, device=device)
    return vocab.decode(model.greedy_decode(src, spec.max_target_tokens))


def _validate(model, vocab, spec, examples, device) -> float:
    model.eval()
    pairs = [
        (_predict_text(model, vocab, spec, e.input_text, device), e.target_text)
        for e in examples
    ]
    model.train()
    return mean_f1(pairs)


def two_stage_train(
    synthetic_examples: list[TrainingExample],
    human_examples: list[TrainingExample],
    schedule,
    spec: ModelSpec,
    artifact_dir,
    *,
    validation_ratio: float = 0.2,
):
    """Run both stages and save the best-validation-F1 checkpoint.

    ``schedule`` is anything with ``pretrain_steps`` and ``finetune_steps``
    attributes (or a dict with those keys), matching the pipeline's
    schedule record. Stage 2 on human examples is mandatory.
    """
    if isinstance(schedule, dict):
        pretrain_steps = int(schedule["pretrain_steps"])
        finetune_steps = int(schedule["finetune_steps"])
    else:
        pretrain_steps = schedule.pretrain_steps
        finetune_steps = schedule.finetune_steps
    if pretrain_steps < 1 or finetune_steps < 1:
        raise ValueError("schedule step counts must be >= 1")
    if not synthetic_examples:
        raise ValueError("stage 1 needs synthetic examples")
    if not human_examples:
        raise ValueError("stage 2 needs human examples; it is mandatory")

    device = torch.device(spec.device)
    torch.manual_seed(spec.seed)
    rng = random.Random(spec.seed)

    # 20% of human examples (round-half-up) are held out for validation
    human = list(human_examples)
    rng.shuffle(human)
    n_val = max(1, math.floor(validation_ratio * len(human) + 0.5))
    validation, human_train = human[:n_val], human[n_val:]
    if not human_train:
        human_train = validation  # degenerate tiny sets: validate on train

    corpus = [e.input_text for e in synthetic_examples + human] + [
        e.target_text for e in synthetic_examples + human
    ]
    vocab = Vocab([tok for text in corpus for tok in text.split()])
    model = Seq2Seq(len(vocab), spec.embed_dim, spec.hidden_dim).to(device)
    model.train()
    loss_fn = nn.CrossEntropyLoss(ignore_index=PAD)
    optimizer = torch.optim.Adam(model.parameters(), lr=spec.lr)
    total_steps = pretrain_steps + finetune_steps
    warmup_steps = max(1, int(spec.warmup_ratio * total_steps))

    best = {"f1": -1.0, "stage": None, "step": None, "state": None}
    history: dict = {"stages": [], "validations": []}
    global_step = 0

    def lr_for(step_overall: int) -> float:
        if step_overall <= warmup_steps:
            return spec.lr * step_overall / warmup_steps
        return spec.lr

    def validate(stage: str, step: int):
        f1 = _validate(model, vocab, spec, validation, device)
        history["validations"].append({"stage": stage, "step": step, "f1": f1})
        logger.info("stage=%s step=%d val_f1=%.4f", stage, step, f1)
        if f1 > best["f1"]:
            best.update(
                f1=f1, stage=stage, step=step, state=copy.deepcopy(model.state_dict())
            )

    for stage, examples, steps in (
        ("pretrain", list(synthetic_examples), pretrain_steps),
        ("finetune", human_train, finetune_steps),
    ):
        # step counter resets here: stage boundaries stay observable
        epoch_len = max(1, math.ceil(len(examples) / spec.batch_size))
        batches = _batches(examples, spec.batch_size, rng)
        for step in range(1, steps + 1):
            global_step += 1
            for group in optimizer.param_groups:
                group["lr"] = lr_for(global_step)
            src, tgt_in, tgt_out = _encode_batch(next(batches), vocab, spec, device)
            logits = model(src, tgt_in)
            loss = loss_fn(logits.reshape(-1, logits.size(-1)), tgt_out.reshape(-1))
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            loss_value = loss.item()
            history["stages"].append({"stage": stage, "step": step, "loss": loss_value})
            logger.info("stage=%s step=%d/%d loss=%.4f", stage, step, steps, loss_value)
            if step % epoch_len == 0:
                validate(stage, step)
        validate(stage, steps)

    if best["state"] is not None:
        model.load_state_dict(best["state"])
    history["best"] = {"stage": best["stage"], "step": best["step"], "f1": best["f1"]}
    history["schedule"] = {"pretrain_steps": pretrain_steps, "finetune_steps": finetune_steps}
    save_artifact(artifact_dir, model, vocab, spec, history)
    return artifact_dir
