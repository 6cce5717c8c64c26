"""Model lifecycle behind the wire endpoints.

One engine owns one summarization model: it snapshots the freshly loaded
weights, so every reset-and-finetune restarts from the same initial
state; stochastic generation runs the model with dropout active and a
per-pass seed; evaluation summaries use deterministic beam search; and
embeddings are the encoder's leading-token representation.

The state-version fingerprint returned by :meth:`ModelEngine.finetune`
is a pure function of (model id, pair multiset, seed), which makes
repeat training calls comparable across processes. Training itself is
seeded and iterates the pairs in hash order, so equal fingerprints come
from bitwise-equal training runs on equal hardware.
"""

from __future__ import annotations

import hashlib
import logging
import threading
from typing import Iterable, Sequence

import torch
from transformers import BartConfig, BartForConditionalGeneration
from transformers.optimization import Adafactor, get_linear_schedule_with_warmup

from .config import ServerConfig
from .tokenizer import CharTokenizer

logger = logging.getLogger(__name__)

_SEED_SPAN = 2**63
_TINY_D_MODEL = 64


class ModelLoadError(RuntimeError):
    """Model weights could not be loaded."""


class TrainingError(RuntimeError):
    """A finetune request could not be served."""


def _pair_hash(source: str, summary: str) -> str:
    return hashlib.sha256(f"{source}\x1f{summary}".encode("utf-8")).hexdigest()


def finetune_fingerprint(model_id: str, pairs: Sequence[tuple[str, str]], seed: int) -> str:
    """Deterministic state version: model id + sorted pair hashes + seed."""
    hashes = sorted(_pair_hash(src, ref) for src, ref in pairs)
    digest = hashlib.sha256("\x1f".join([model_id, str(seed), *hashes]).encode("utf-8"))
    return f"ft-{digest.hexdigest()[:16]}"


def _derived_seed(*parts: object) -> int:
    payload = "\x1f".join(str(p) for p in parts).encode("utf-8")
    return int.from_bytes(hashlib.sha256(payload).digest()[:8], "little") % _SEED_SPAN


def _batches(items: list, size: int) -> Iterable[list]:
    for start in range(0, len(items), size):
        yield items[start : start + size]


def _build_tiny(config: ServerConfig) -> tuple[BartForConditionalGeneration, CharTokenizer]:
    tokenizer = CharTokenizer()
    torch.manual_seed(config.init_seed)
    model_config = BartConfig(
        vocab_size=tokenizer.vocab_size,
        d_model=_TINY_D_MODEL,
        encoder_layers=2,
        decoder_layers=2,
        encoder_attention_heads=2,
        decoder_attention_heads=2,
        encoder_ffn_dim=128,
        decoder_ffn_dim=128,
        max_position_embeddings=256,
        dropout=0.1,
        attention_dropout=0.1,
        activation_dropout=0.1,
        pad_token_id=tokenizer.pad_id,
        bos_token_id=tokenizer.bos_id,
        eos_token_id=tokenizer.eos_id,
        decoder_start_token_id=tokenizer.bos_id,
        forced_eos_token_id=tokenizer.eos_id,
    )
    return BartForConditionalGeneration(model_config), tokenizer


class ModelEngine:
    """Loads one model and serves the five wire operations.

    All methods assume the caller holds :attr:`lock`; the HTTP layer
    serializes access with it so train/eval mode flips and the global
    torch RNG never interleave between requests.
    """

    def __init__(self, config: ServerConfig) -> None:
        self.config = config
        self.lock = threading.Lock()
        self._load()
        self._initial_state = {
            key: value.detach().clone() for key, value in self.model.state_dict().items()
        }
        self._state_version = "initial"
        self._finetunes = 0

    def _load(self) -> None:
        if self.config.model_id == "tiny":
            self.model, self._tokenizer = _build_tiny(self.config)
            self._embedder = None
        else:
            try:
                from transformers import AutoModel, AutoModelForSeq2SeqLM, AutoTokenizer

                self._tokenizer = AutoTokenizer.from_pretrained(
                    self.config.model_id, cache_dir=self.config.cache_dir
                )
                self.model = AutoModelForSeq2SeqLM.from_pretrained(
                    self.config.model_id, cache_dir=self.config.cache_dir
                )
                self._embedder = None
                if self.config.embedding_model:
                    self._embed_tokenizer = AutoTokenizer.from_pretrained(
                        self.config.embedding_model, cache_dir=self.config.cache_dir
                    )
                    self._embedder = AutoModel.from_pretrained(
                        self.config.embedding_model, cache_dir=self.config.cache_dir
                    )
            except Exception as exc:
                raise ModelLoadError(f"cannot load {self.config.model_id!r}: {exc}") from exc
        self.model.to(self.config.device)
        self.model.eval()
        if self._embedder is not None:
            self._embedder.to(self.config.device)
            self._embedder.eval()
        self.dim = int(
            self._embedder.config.hidden_size
            if self._embedder is not None
            else getattr(self.model.config, "d_model", None)
            or self.model.config.hidden_size
        )
        logger.info("loaded %s (embed dim %d)", self.config.model_id, self.dim)

    # -- shared encode/decode over the tiny and hub tokenizers --

    def _encode_batch(self, texts: Sequence[str]) -> tuple[torch.Tensor, torch.Tensor]:
        if isinstance(self._tokenizer, CharTokenizer):
            ids, mask = self._tokenizer.batch(texts, self.config.max_input_tokens)
        else:
            enc = self._tokenizer(
                list(texts),
                padding=True,
                truncation=True,
                max_length=self.config.max_input_tokens,
                return_tensors="pt",
            )
            ids, mask = enc["input_ids"], enc["attention_mask"]
        return ids.to(self.config.device), mask.to(self.config.device)

    def _decode(self, ids: torch.Tensor) -> str:
        if isinstance(self._tokenizer, CharTokenizer):
            return self._tokenizer.decode(ids.tolist())
        return self._tokenizer.decode(ids, skip_special_tokens=True).strip()

    def _prefixed(self, text: str) -> str:
        return self.config.instruction_prefix + text

    # -- wire operations --

    def health(self) -> dict:
        return {
            "ok": True,
            "model": self.config.model_id,
            "dim": self.dim,
            "device": self.config.device,
            "state_version": self._state_version,
            "finetunes": self._finetunes,
        }

    def embed(self, texts: Sequence[str]) -> tuple[int, list[list[float]]]:
        if not texts:
            return self.dim, []
        with torch.no_grad():
            if self._embedder is not None:
                enc = self._embed_tokenizer(
                    list(texts), padding=True, truncation=True,
                    max_length=self.config.max_input_tokens, return_tensors="pt",
                ).to(self.config.device)
                out = self._embedder(**enc)
                pooled = getattr(out, "pooler_output", None)
                vectors = pooled if pooled is not None else out.last_hidden_state[:, 0, :]
            else:
                ids, mask = self._encode_batch(texts)
                out = self.model.get_encoder()(input_ids=ids, attention_mask=mask)
                vectors = out.last_hidden_state[:, 0, :]
        return self.dim, vectors.cpu().double().tolist()

    def generate(self, text: str, n: int, seed: int, dropout: bool = True) -> list[str]:
        """n decode passes; with dropout active each pass is an MC sample."""
        if n < 1:
            raise ValueError(f"need n >= 1 passes, got {n}")
        ids, mask = self._encode_batch([self._prefixed(text)])
        if dropout:
            self.model.train()
        summaries = []
        try:
            with torch.no_grad():
                for i in range(n):
                    torch.manual_seed((seed + 7919 * i) % _SEED_SPAN)
                    out = self.model.generate(
                        input_ids=ids,
                        attention_mask=mask,
                        num_beams=1,
                        do_sample=False,
                        max_new_tokens=self.config.max_output_tokens,
                    )
                    summaries.append(self._decode(out[0]))
        finally:
            self.model.eval()
        return summaries

    def summarize(self, texts: Sequence[str]) -> list[str]:
        """Deterministic beam-search summaries, one text at a time.

        Per-text decoding keeps the output for each text independent of
        what else is in the batch (padding widths change batched float
        reductions), which the protocol's determinism checks rely on.
        """
        self.model.eval()
        summaries = []
        with torch.no_grad():
            for text in texts:
                ids, mask = self._encode_batch([self._prefixed(text)])
                out = self.model.generate(
                    input_ids=ids,
                    attention_mask=mask,
                    num_beams=self.config.num_beams,
                    do_sample=False,
                    max_new_tokens=self.config.max_output_tokens,
                )
                summaries.append(self._decode(out[0]))
        return summaries

    def _encode_labels(self, summaries: Sequence[str]) -> torch.Tensor:
        ids, mask = self._encode_batch(summaries)
        return ids.masked_fill(mask == 0, -100)

    def finetune(self, pairs: Sequence[tuple[str, str]], seed: int, reset: bool = True) -> str:
        """Train on the pairs, from the initial weights when reset is set."""
        if not pairs:
            raise TrainingError("refusing to train on an empty pair list")
        if reset:
            self.model.load_state_dict(self._initial_state)
            version = finetune_fingerprint(self.config.model_id, pairs, seed)
        else:
            version = finetune_fingerprint(
                f"{self.config.model_id}@{self._state_version}", pairs, seed
            )
        # Hash order fixes the batch schedule, so the trained weights are
        # a function of the pair multiset, matching the fingerprint.
        ordered = sorted(pairs, key=lambda pair: _pair_hash(*pair))
        total = self.config.training_steps(len(ordered))
        torch.manual_seed(_derived_seed(self.config.model_id, "finetune", seed))
        self.model.train()
        if self.config.optimizer == "adamw":
            optimizer = torch.optim.AdamW(
                self.model.parameters(),
                lr=self.config.learning_rate,
                weight_decay=self.config.weight_decay,
            )
        else:
            optimizer = Adafactor(
                self.model.parameters(),
                lr=self.config.learning_rate,
                weight_decay=self.config.weight_decay,
                scale_parameter=False,
                relative_step=False,
                warmup_init=False,
            )
        scheduler = get_linear_schedule_with_warmup(
            optimizer, int(self.config.warmup_ratio * total), total
        )
        step = 0
        try:
            while step < total:
                for batch in _batches(ordered, self.config.batch_size):
                    if step >= total:
                        break
                    ids, mask = self._encode_batch([self._prefixed(src) for src, _ in batch])
                    labels = self._encode_labels([ref for _, ref in batch])
                    out = self.model(input_ids=ids, attention_mask=mask, labels=labels)
                    if not torch.isfinite(out.loss):
                        raise TrainingError(
                            f"loss diverged at step {step}: {out.loss.item()!r}"
                        )
                    out.loss.backward()
                    torch.nn.utils.clip_grad_norm_(self.model.parameters(), 1.0)
                    optimizer.step()
                    scheduler.step()
                    optimizer.zero_grad()
                    step += 1
        except RuntimeError as exc:
            raise TrainingError(f"training failed at step {step}: {exc}") from exc
        finally:
            self.model.eval()
        self._finetunes += 1
        self._state_version = version
        logger.info("finetune %d: %d pairs, %d steps -> %s", self._finetunes, len(pairs), step, version)
        return version
