"""HTTP client for a model server speaking the backend wire protocol.

Endpoints: POST /embed, /generate, /finetune, /summarize and GET
/health. Every response is shape-checked here so malformed payloads
surface as :class:`ProtocolError` before reaching strategy code; network
and non-2xx failures surface as :class:`TransportError`.
"""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np
import requests

from ..corpus import Document
from ..embedspace import EmbeddingMatrix
from ..errors import ProtocolError, TransportError
from . import StochasticBatch


class RemoteBackend:
    def __init__(self, endpoint: str, seed: int = 0, timeout_s: float = 60.0) -> None:
        self.endpoint = endpoint.rstrip("/")
        self.seed = seed
        self.timeout_s = timeout_s
        self._session = requests.Session()

    def _request(self, method: str, path: str, payload: dict | None = None) -> dict:
        url = f"{self.endpoint}{path}"
        try:
            if method == "GET":
                resp = self._session.get(url, timeout=self.timeout_s)
            else:
                resp = self._session.post(url, json=payload, timeout=self.timeout_s)
        except requests.RequestException as exc:
            raise TransportError(f"{method} {url}: {exc}") from exc
        if resp.status_code != 200:
            raise TransportError(f"{method} {url}: HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            body = resp.json()
        except ValueError:
            raise ProtocolError(f"{method} {url}: response is not JSON") from None
        if not isinstance(body, dict):
            raise ProtocolError(f"{method} {url}: response is not an object")
        return body

    @staticmethod
    def _string_list(body: dict, key: str, expected_len: int, context: str) -> list[str]:
        values = body.get(key)
        if not isinstance(values, list) or len(values) != expected_len:
            raise ProtocolError(
                f"{context}: expected {expected_len} entries under {key!r}, "
                f"got {len(values) if isinstance(values, list) else type(values).__name__}"
            )
        if not all(isinstance(v, str) for v in values):
            raise ProtocolError(f"{context}: non-string entry under {key!r}")
        return values

    def embed(self, texts: Sequence[str], *, ids: Sequence[str] | None = None) -> EmbeddingMatrix:
        if ids is not None and len(ids) != len(texts):
            raise ValueError(f"{len(ids)} ids for {len(texts)} texts")
        keys = list(ids) if ids is not None else [str(i) for i in range(len(texts))]
        if not texts:
            return EmbeddingMatrix([], np.zeros((0, 1)))
        body = self._request("POST", "/embed", {"texts": list(texts)})
        dim = body.get("dim")
        vectors = body.get("vectors")
        if not isinstance(dim, int) or dim < 1:
            raise ProtocolError(f"/embed: bad dim {dim!r}")
        if not isinstance(vectors, list) or len(vectors) != len(texts):
            raise ProtocolError(
                f"/embed: expected {len(texts)} vectors, got "
                f"{len(vectors) if isinstance(vectors, list) else type(vectors).__name__}"
            )
        rows = np.empty((len(texts), dim))
        for i, vec in enumerate(vectors):
            if not isinstance(vec, list) or len(vec) != dim:
                raise ProtocolError(f"/embed: vector {i} does not have dim {dim}")
            try:
                rows[i] = [float(v) for v in vec]
            except (TypeError, ValueError):
                raise ProtocolError(f"/embed: vector {i} has a non-numeric entry") from None
            if not all(math.isfinite(v) for v in rows[i]):
                raise ProtocolError(f"/embed: vector {i} has a non-finite entry")
        return EmbeddingMatrix(keys, rows)

    def generate_stochastic(self, doc: Document, n: int, noise_seed: int) -> StochasticBatch:
        if n < 2:
            raise ValueError(f"stochastic generation needs n >= 2 passes, got {n}")
        body = self._request(
            "POST",
            "/generate",
            {"text": doc.source, "n": n, "seed": noise_seed, "dropout": True},
        )
        summaries = self._string_list(body, "summaries", n, "/generate")
        return StochasticBatch(doc_id=doc.id, summaries=tuple(summaries))

    def reset_and_finetune(self, labeled: Sequence[tuple[str, str]]) -> str:
        if not labeled:
            raise TransportError("refusing to request a finetune on an empty labeled set")
        body = self._request(
            "POST",
            "/finetune",
            {
                "pairs": [{"source": src, "summary": ref} for src, ref in labeled],
                "seed": self.seed,
                "reset": True,
            },
        )
        version = body.get("state_version")
        if not isinstance(version, str) or not version:
            raise ProtocolError(f"/finetune: bad state_version {version!r}")
        return version

    def summarize(self, texts: Sequence[str]) -> list[str]:
        if not texts:
            return []
        body = self._request("POST", "/summarize", {"texts": list(texts)})
        return self._string_list(body, "summaries", len(texts), "/summarize")

    def health(self) -> dict:
        body = self._request("GET", "/health")
        if body.get("ok") is not True:
            raise ProtocolError(f"/health: backend reports not ok: {body!r}")
        return body
