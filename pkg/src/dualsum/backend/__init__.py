"""Summarization backends: the protocol the selection engine talks to,
plus the deterministic mock simulator and the HTTP client for a real
model server.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence, runtime_checkable

from ..corpus import Document
from ..embedspace import EmbeddingMatrix
from ..errors import ConfigError


@dataclass(frozen=True)
class StochasticBatch:
    """Output of one multi-pass stochastic generation call."""

    doc_id: str
    summaries: tuple[str, ...]


@dataclass(frozen=True)
class BackendDescriptor:
    """Declarative backend selection carried inside experiment configs."""

    kind: str = "mock"
    endpoint: str = ""
    embedding_dim: int = 32
    max_summary_tokens: int = 16
    mc_passes_default: int = 10
    timeout_s: float = 60.0

    def __post_init__(self) -> None:
        if self.kind not in ("mock", "remote"):
            raise ConfigError(f"backend kind must be 'mock' or 'remote', got {self.kind!r}")
        if self.kind == "remote" and not self.endpoint.startswith(("http://", "https://")):
            raise ConfigError(f"remote backend needs an http(s) endpoint, got {self.endpoint!r}")
        if self.embedding_dim < 1:
            raise ConfigError(f"embedding_dim must be >= 1, got {self.embedding_dim}")
        if self.max_summary_tokens < 1:
            raise ConfigError(f"max_summary_tokens must be >= 1, got {self.max_summary_tokens}")


@runtime_checkable
class SummarizationBackend(Protocol):
    """What the selection engine and harness require of any backend."""

    def embed(self, texts: Sequence[str], *, ids: Sequence[str] | None = None) -> EmbeddingMatrix:
        """Embed texts into row vectors, keyed by ``ids`` or positional indices."""
        ...

    def generate_stochastic(self, doc: Document, n: int, noise_seed: int) -> StochasticBatch:
        """n stochastic summaries of one document under the current model state."""
        ...

    def reset_and_finetune(self, labeled: Sequence[tuple[str, str]]) -> str:
        """Reset to the initial model state, train on (source, reference) pairs,
        return a state-version fingerprint."""
        ...

    def summarize(self, texts: Sequence[str]) -> list[str]:
        """Deterministic summaries under the current model state, in input order."""
        ...

    def health(self) -> dict:
        """Liveness and identity: {"ok": bool, "model": str, "dim": int}."""
        ...


def make_backend(descriptor: BackendDescriptor, seed: int = 0, **mock_kwargs) -> SummarizationBackend:
    """Instantiate the backend a descriptor asks for."""
    if descriptor.kind == "mock":
        from .mock import MockBackend

        return MockBackend(
            seed=seed,
            embedding_dim=descriptor.embedding_dim,
            max_summary_tokens=descriptor.max_summary_tokens,
            **mock_kwargs,
        )
    from .remote import RemoteBackend

    return RemoteBackend(descriptor.endpoint, seed=seed, timeout_s=descriptor.timeout_s)


__all__ = [
    "BackendDescriptor",
    "StochasticBatch",
    "SummarizationBackend",
    "make_backend",
]
