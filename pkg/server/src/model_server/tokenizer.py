"""Char-level tokenizer backing the offline tiny model.

Vocabulary is printable ASCII plus four specials. Interface mirrors the
slice of the hub tokenizers the engine actually uses: batch encode to
padded id/mask tensors, decode skipping specials.
"""

from __future__ import annotations

from typing import Sequence

import torch


class CharTokenizer:
    pad_id = 0
    bos_id = 1
    eos_id = 2
    unk_id = 3

    def __init__(self) -> None:
        chars = [chr(code) for code in range(32, 127)]
        self._id_of = {ch: i + 4 for i, ch in enumerate(chars)}
        self._char_of = {i: ch for ch, i in self._id_of.items()}

    @property
    def vocab_size(self) -> int:
        return len(self._id_of) + 4

    def encode(self, text: str, max_len: int) -> list[int]:
        body = [self._id_of.get(ch, self.unk_id) for ch in text][: max_len - 2]
        return [self.bos_id, *body, self.eos_id]

    def decode(self, ids: Sequence[int]) -> str:
        return "".join(self._char_of.get(int(i), "") for i in ids if int(i) > self.unk_id)

    def batch(self, texts: Sequence[str], max_len: int) -> tuple[torch.Tensor, torch.Tensor]:
        """Padded (input_ids, attention_mask) int64 tensors."""
        encoded = [self.encode(text, max_len) for text in texts]
        width = max(len(e) for e in encoded)
        ids = torch.full((len(encoded), width), self.pad_id, dtype=torch.long)
        mask = torch.zeros((len(encoded), width), dtype=torch.long)
        for row, e in enumerate(encoded):
            ids[row, : len(e)] = torch.tensor(e, dtype=torch.long)
            mask[row, : len(e)] = 1
        return ids, mask
