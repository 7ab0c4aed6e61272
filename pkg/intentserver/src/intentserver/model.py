"""Next-word prediction model.

The encoder contextualizes the chunk sequence of the current prefix; a
single-position decoder readout cross-attends into that memory and projects
to word-vocabulary logits. Dropout is zero throughout so evaluation and
extraction are deterministic.
"""

from __future__ import annotations

import torch
import torch.nn as nn

MAX_CHUNKS = 128


class NextWordModel(nn.Module):
    def __init__(
        self,
        chunk_vocab_size: int,
        word_vocab_size: int,
        d_model: int = 48,
        nhead: int = 4,
        enc_layers: int = 2,
        dim_ff: int = 96,
    ):
        super().__init__()
        self.d_model = d_model
        self.chunk_emb = nn.Embedding(chunk_vocab_size, d_model, padding_idx=0)
        self.pos_emb = nn.Embedding(MAX_CHUNKS, d_model)
        enc_layer = nn.TransformerEncoderLayer(
            d_model, nhead, dim_ff, dropout=0.0, batch_first=True
        )
        self.encoder = nn.TransformerEncoder(
            enc_layer, enc_layers, enable_nested_tensor=False
        )
        dec_layer = nn.TransformerDecoderLayer(
            d_model, nhead, dim_ff, dropout=0.0, batch_first=True
        )
        self.decoder = nn.TransformerDecoder(dec_layer, 1)
        self.readout = nn.Parameter(torch.randn(1, 1, d_model) * 0.02)
        self.out = nn.Linear(d_model, word_vocab_size)

    def encode(self, chunk_ids: torch.Tensor, pad_mask: torch.Tensor) -> torch.Tensor:
        """chunk_ids (B, L) -> memory (B, L, d)."""
        length = chunk_ids.shape[1]
        positions = torch.arange(length, device=chunk_ids.device)
        hidden = self.chunk_emb(chunk_ids) + self.pos_emb(positions)[None, :, :]
        return self.encoder(hidden, src_key_padding_mask=pad_mask)

    def word_logits(self, memory: torch.Tensor, pad_mask: torch.Tensor) -> torch.Tensor:
        """memory (B, L, d) -> next-word logits (B, V)."""
        query = self.readout.expand(memory.shape[0], 1, self.d_model)
        hidden = self.decoder(query, memory, memory_key_padding_mask=pad_mask)
        return self.out(hidden[:, 0])

    def forward(self, chunk_ids: torch.Tensor, pad_mask: torch.Tensor) -> torch.Tensor:
        return self.word_logits(self.encode(chunk_ids, pad_mask), pad_mask)
