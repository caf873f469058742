"""A tiny word-level sequence-to-sequence model.

This is the reference text-to-text model for smoke runs and small
experiments; any model honoring the same artifact layout can stand in
for it. Whitespace tokens, shared embeddings, GRU encoder/decoder.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import torch
from torch import nn

PAD, BOS, EOS, UNK = 0, 1, 2, 3
SPECIALS = ["<pad>", "<bos>", "<eos>", "<unk>"]


@dataclass(frozen=True)
class ModelSpec:
    """Training/model hyperparameters; defaults follow the reference recipe
    (lr 3e-4, batch 32, warmup ratio 0.1, validation every epoch)."""

    embed_dim: int = 64
    hidden_dim: int = 128
    lr: float = 3e-4
    batch_size: int = 32
    warmup_ratio: float = 0.1
    max_input_tokens: int = 256
    max_target_tokens: int = 24
    seed: int = 0
    device: str = "cpu"


class Vocab:
    def __init__(self, tokens: list[str]):
        self.itos = list(SPECIALS) + sorted(set(tokens) - set(SPECIALS))
        self.stoi = {tok: i for i, tok in enumerate(self.itos)}

    def __len__(self):
        return len(self.itos)

    def encode(self, text: str, limit: int, *, keep_tail: bool = False) -> list[int]:
        tokens = text.split()
        if len(tokens) > limit:
            # keep_tail keeps the most recent history when inputs overflow
            tokens = tokens[-limit:] if keep_tail else tokens[:limit]
        return [self.stoi.get(tok, UNK) for tok in tokens]

    def decode(self, ids) -> str:
        return " ".join(self.itos[i] for i in ids if i not in (PAD, BOS, EOS))

    def to_dict(self) -> dict:
        return {"itos": self.itos}

    @classmethod
    def from_dict(cls, data: dict) -> "Vocab":
        vocab = cls([])
        vocab.itos = list(data["itos"])
        vocab.stoi = {tok: i for i, tok in enumerate(vocab.itos)}
        return vocab


class Seq2Seq(nn.Module):
    def __init__(self, vocab_size: int, embed_dim: int, hidden_dim: int):
        super().__init__()
        self.embedding = nn.Embedding(vocab_size, embed_dim, padding_idx=PAD)
        self.encoder = nn.GRU(embed_dim, hidden_dim, batch_first=True)
        self.decoder = nn.GRU(embed_dim, hidden_dim, batch_first=True)
        self.head = nn.Linear(hidden_dim, vocab_size)

    def _encode(self, src: torch.Tensor) -> torch.Tensor:
        _, hidden = self.encoder(self.embedding(src))
        return hidden

    def forward(self, src: torch.Tensor, tgt_in: torch.Tensor) -> torch.Tensor:
        hidden = self._encode(src)
        out, _ = self.decoder(self.embedding(tgt_in), hidden)
        return self.head(out)

    @torch.no_grad()
    def greedy_decode(self, src: torch.Tensor, max_len: int) -> list[int]:
        hidden = self._encode(src)
        token = torch.tensor([[BOS]], dtype=torch.long, device=src.device)
        output: list[int] = []
        for _ in range(max_len):
            step, hidden = self.decoder(self.embedding(token), hidden)
            token = self.head(step)[:, -1, :].argmax(dim=-1, keepdim=True)
            tok_id = int(token.item())
            if tok_id == EOS:
                break
            output.append(tok_id)
        return output


def save_artifact(path, model: Seq2Seq, vocab: Vocab, spec: ModelSpec, history: dict) -> None:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    torch.save(model.state_dict(), path / "weights.pt")
    (path / "vocab.json").write_text(json.dumps(vocab.to_dict()), encoding="utf-8")
    (path / "config.json").write_text(
        json.dumps({"spec": asdict(spec), "vocab_size": len(vocab)}, indent=2, sort_keys=True),
        encoding="utf-8",
    )
    (path / "history.json").write_text(
        json.dumps(history, indent=2, sort_keys=True), encoding="utf-8"
    )


def load_artifact(path) -> tuple[Seq2Seq, Vocab, ModelSpec]:
    path = Path(path)
    config = json.loads((path / "config.json").read_text(encoding="utf-8"))
    spec = ModelSpec(**config["spec"])
    vocab = Vocab.from_dict(json.loads((path / "vocab.json").read_text(encoding="utf-8")))
    model = Seq2Seq(len(vocab), spec.embed_dim, spec.hidden_dim)
    model.load_state_dict(torch.load(path / "weights.pt", map_location=spec.device))
    model.eval()
    return model, vocab, spec
