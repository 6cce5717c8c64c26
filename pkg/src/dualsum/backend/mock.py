"""Deterministic mock backend for driving the selection engine without a
model server.

Every document carries a latent noise level in [0, 1], either supplied
as fixture metadata or hashed from its id. Stochastic generation returns
the reference summary with each token independently replaced by a random
token with probability equal to that noise level, so noise 0 yields n
identical summaries (BLEU variance 0) and noise 1 yields token-disjoint
ones (BLEU variance ~1), monotonically in between.

Replacement decisions use common random numbers: the per-token uniform
draws depend on (state, seed, doc, pass) but not on the noise level, so
raising the noise level strictly grows the replaced-token set and the
monotonicity is exact per seed rather than only in expectation.

All outputs are pure functions of (inputs, state fingerprint, seeds); no
call mutates state except ``reset_and_finetune``.
"""

from __future__ import annotations

import hashlib
from typing import Sequence

import numpy as np

from ..corpus import Document
from ..embedspace import EmbeddingMatrix
from ..errors import TrainingError
from ..seeding import derive_rng, stable_seed
from . import StochasticBatch

_JUNK_VOCAB = 10**9
_INITIAL_STATE = "pretrained"


def _uniform_from_hash(*parts: object) -> float:
    return (stable_seed(*parts) % 10**12) / 10**12


class MockBackend:
    """Simulated summarization model; see module docstring for the contract."""

    def __init__(
        self,
        seed: int = 0,
        embedding_dim: int = 32,
        noise_levels: dict[str, float] | None = None,
        embeddings: EmbeddingMatrix | None = None,
        max_summary_tokens: int = 16,
        record_calls: bool = False,
    ) -> None:
        self.seed = seed
        self.embedding_dim = embedding_dim
        self.max_summary_tokens = max_summary_tokens
        self._noise_levels = dict(noise_levels or {})
        self._fixture_embeddings = embeddings
        self._state_fingerprint = _INITIAL_STATE
        self._finetune_count = 0
        self._trained_pair_count = 0
        self.call_log: list[tuple[str, str]] | None = [] if record_calls else None

    # -- introspection -------------------------------------------------

    @property
    def state_fingerprint(self) -> str:
        return self._state_fingerprint

    @property
    def finetune_count(self) -> int:
        return self._finetune_count

    def noise_for(self, doc_id: str) -> float:
        """Latent noise level of a doc: fixture value or id-hash in [0, 1)."""
        if doc_id in self._noise_levels:
            return self._noise_levels[doc_id]
        return _uniform_from_hash("mock-noise", doc_id)

    def _log(self, op: str, key: str) -> None:
        if self.call_log is not None:
            self.call_log.append((op, key))

    # -- protocol ------------------------------------------------------

    @property
    def _effective_dim(self) -> int:
        # Fixture embeddings win over the configured width so mixed
        # fixture/generated rows stay stackable.
        if self._fixture_embeddings is not None:
            return self._fixture_embeddings.dimension
        return self.embedding_dim

    def embed(self, texts: Sequence[str], *, ids: Sequence[str] | None = None) -> EmbeddingMatrix:
        if ids is not None and len(ids) != len(texts):
            raise ValueError(f"{len(ids)} ids for {len(texts)} texts")
        keys = list(ids) if ids is not None else [str(i) for i in range(len(texts))]
        dim = self._effective_dim
        rows = np.empty((len(texts), dim))
        for i, key in enumerate(keys):
            self._log("embed", key)
            if self._fixture_embeddings is not None and key in self._fixture_embeddings:
                rows[i] = self._fixture_embeddings.row(key)
                continue
            rng = np.random.default_rng(stable_seed("mock-embed", key))
            vec = rng.standard_normal(dim)
            rows[i] = vec / np.linalg.norm(vec)
        return EmbeddingMatrix(keys, rows)

    def generate_stochastic(self, doc: Document, n: int, noise_seed: int) -> StochasticBatch:
        if n < 2:
            raise ValueError(f"stochastic generation needs n >= 2 passes, got {n}")
        self._log("generate", doc.id)
        noise = self.noise_for(doc.id)
        base = doc.reference.split()
        summaries = []
        for pass_idx in range(n):
            rng = derive_rng("mock-mc", self._state_fingerprint, noise_seed, doc.id, pass_idx)
            tokens = []
            for token in base:
                u = rng.random()
                junk = f"w{rng.randrange(_JUNK_VOCAB)}"
                tokens.append(junk if u < noise else token)
            summaries.append(" ".join(tokens))
        return StochasticBatch(doc_id=doc.id, summaries=tuple(summaries))

    def reset_and_finetune(self, labeled: Sequence[tuple[str, str]]) -> str:
        if not labeled:
            raise TrainingError("cannot finetune on an empty labeled set")
        pair_hashes = sorted(
            hashlib.sha256(f"{src}\x1f{ref}".encode("utf-8")).hexdigest()
            for src, ref in labeled
        )
        digest = hashlib.sha256(
            ("mock-ft\x1f" + str(self.seed) + "\x1f" + "\x1f".join(pair_hashes)).encode("utf-8")
        ).hexdigest()
        self._state_fingerprint = digest[:16]
        self._finetune_count += 1
        self._trained_pair_count = len(labeled)
        self._log("finetune", self._state_fingerprint)
        return self._state_fingerprint

    def summarize(self, texts: Sequence[str]) -> list[str]:
        out = []
        for text in texts:
            self._log("summarize", text[:32])
            tokens = text.split()[: self.max_summary_tokens]
            # Corruption fades as the trained set grows, so evaluation
            # curves move the way a learning model's would.
            noise = _uniform_from_hash("mock-eval-noise", text)
            rate = noise / (1.0 + self._trained_pair_count / 5.0)
            rng = derive_rng("mock-sum", self._state_fingerprint, text)
            rendered = [
                f"w{rng.randrange(_JUNK_VOCAB)}" if rng.random() < rate else token
                for token in tokens
            ]
            out.append(" ".join(rendered))
        return out

    def health(self) -> dict:
        return {"ok": True, "model": "mock", "dim": self._effective_dim}
