"""Fine-tuning on query-log samples.

The distributional objective is cross-entropy against the uniform
distribution over each sample's target set (soft labels at the branching
position); plain next-token samples are the singleton case of the same loss.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import torch
import torch.nn.functional as F

from .data import Row, load_rows
from .model import NextWordModel
from .vocab import PAD, Vocab, chunk_words


@dataclass
class TrainConfig:
    objective: str = "dclm"  # dclm | clm
    lr: float = 5e-5
    epochs: int = 3
    batch_size: int = 16
    d_model: int = 48
    nhead: int = 4
    enc_layers: int = 2
    dim_ff: int = 96
    seed: int = 0

    def __post_init__(self):
        if self.objective not in ("dclm", "clm"):
            raise ValueError("objective must be 'dclm' or 'clm'")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


@dataclass
class TrainResult:
    checkpoint: str
    history: list[list[float]]  # per-epoch batch losses

    @property
    def first_epoch(self) -> list[float]:
        return self.history[0]


def build_vocabs(rows: list[Row]) -> tuple[Vocab, Vocab]:
    words = set()
    for row in rows:
        words.update(row.prefix)
        words.update(row.targets)
    chunk_vocab = Vocab(chunk_words(sorted(words)))
    word_vocab = Vocab(sorted(words))
    return chunk_vocab, word_vocab


def _batch_tensors(rows: list[Row], chunk_vocab: Vocab, device):
    encoded = [chunk_vocab.encode(chunk_words(r.prefix)) for r in rows]
    width = max(len(e) for e in encoded)
    ids = torch.full((len(rows), width), PAD, dtype=torch.long, device=device)
    for i, e in enumerate(encoded):
        ids[i, : len(e)] = torch.tensor(e, dtype=torch.long, device=device)
    pad_mask = ids.eq(PAD)
    return ids, pad_mask


def _batch_loss(model, rows, chunk_vocab, word_vocab, device):
    ids, pad_mask = _batch_tensors(rows, chunk_vocab, device)
    log_probs = F.log_softmax(model(ids, pad_mask), dim=-1)
    total = 0.0
    for i, row in enumerate(rows):
        target_ids = torch.tensor(
            word_vocab.encode(row.targets), dtype=torch.long, device=device
        )
        total = total - log_probs[i, target_ids].mean()
    return total / len(rows)


def finetune(samples_path: str, cfg: TrainConfig, out_dir: str) -> TrainResult:
    """Train on a sample file and write a checkpoint directory."""
    rows = load_rows(samples_path, objective=cfg.objective)
    torch.manual_seed(cfg.seed)
    device = torch.device("cpu")
    chunk_vocab, word_vocab = build_vocabs(rows)
    model = NextWordModel(
        len(chunk_vocab), len(word_vocab), d_model=cfg.d_model, nhead=cfg.nhead,
        enc_layers=cfg.enc_layers, dim_ff=cfg.dim_ff,
    ).to(device)
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.lr)

    history: list[list[float]] = []
    model.train()
    for _ in range(cfg.epochs):
        epoch_losses: list[float] = []
        for start in range(0, len(rows), cfg.batch_size):
            batch = rows[start : start + cfg.batch_size]
            optimizer.zero_grad()
            loss = _batch_loss(model, batch, chunk_vocab, word_vocab, device)
            loss.backward()
            optimizer.step()
            epoch_losses.append(float(loss.detach()))
        history.append(epoch_losses)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    torch.save(model.state_dict(), out / "model.pt")
    with open(out / "vocab.json", "w", encoding="utf-8") as fh:
        json.dump(
            {"chunks": chunk_vocab.to_list(), "words": word_vocab.to_list()}, fh
        )
    with open(out / "config.json", "w", encoding="utf-8") as fh:
        json.dump(asdict(cfg), fh, indent=2, sort_keys=True)
    return TrainResult(checkpoint=str(out), history=history)


def load_checkpoint(path: str) -> tuple[NextWordModel, Vocab, Vocab, dict]:
    root = Path(path)
    with open(root / "config.json", encoding="utf-8") as fh:
        cfg = json.load(fh)
    with open(root / "vocab.json", encoding="utf-8") as fh:
        vocabs = json.load(fh)
    chunk_vocab = Vocab.from_list(vocabs["chunks"])
    word_vocab = Vocab.from_list(vocabs["words"])
    model = NextWordModel(
        len(chunk_vocab), len(word_vocab), d_model=cfg["d_model"],
        nhead=cfg["nhead"], enc_layers=cfg["enc_layers"], dim_ff=cfg["dim_ff"],
    )
    model.load_state_dict(torch.load(root / "model.pt", weights_only=True))
    model.eval()
    return model, chunk_vocab, word_vocab, cfg
