"""Model access: a remote completion endpoint and a deterministic synthetic model.

Remote wire protocol (one POST per call, JSON body)::

    request  {"model": str, "prompt": str, "max_tokens": int, "temperature": 0,
              "echo": bool, "logprobs": int | null}
    response {"choices": [{"text": str,
                           "logprobs": {"tokens": [str], "token_logprobs": [float],
                                        "text_offset": [int]} | null}]}

Generation sends ``echo=false``.  Option scoring sends ``prompt + option``
with ``echo=true, max_tokens=0, logprobs=0`` and sums the log-probabilities
of the echoed tokens that end past the prompt.  Any gateway speaking this
shape (e.g. legacy completions APIs) works.
"""
from __future__ import annotations

import hashlib
import json
import logging
import math
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import httpx
import numpy as np
from scipy import stats

from .errors import CapabilityError, ConfigurationError, EvaluationError, ProtocolError, TransportError

log = logging.getLogger(__name__)

TOKEN_ENV = "PROMPTSPREAD_API_TOKEN"
_RETRY_STATUS = {408, 409, 425, 429, 500, 502, 503, 504}


def stable_uniform(seed, *parts) -> float:
    """Uniform [0, 1) value derived from a hash of ``(seed, *parts)``.

    Platform-independent, unlike library RNG streams.
    """
    key = json.dumps([seed, *parts], ensure_ascii=False, separators=(",", ":"))
    digest = hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") / 2**64


def synthetic_oracle_draw(format_id, instance_id, true_acc: float, seed) -> int:
    """Deterministic Bernoulli(true_acc) outcome keyed by (seed, format, instance)."""
    if not 0.0 <= true_acc <= 1.0:
        raise ValueError(f"true accuracy {true_acc} outside [0, 1]")
    return int(stable_uniform(seed, "draw", str(format_id), str(instance_id)) < true_acc)


def synthetic_oracle_row(format_id, n_instances: int, true_acc: float, seed) -> np.ndarray:
    """``synthetic_oracle_draw`` for instance ids 0..n-1, as an int8 array.

    Builds the same hash keys from a shared prefix instead of encoding each one.
    """
    if not 0.0 <= true_acc <= 1.0:
        raise ValueError(f"true accuracy {true_acc} outside [0, 1]")
    head = json.dumps([seed, "draw", str(format_id)], ensure_ascii=False,
                      separators=(",", ":"))[:-1].encode("utf-8")
    out = np.empty(n_instances, dtype=np.int8)
    for j in range(n_instances):
        digest = hashlib.blake2b(head + b',"%d"]' % j, digest_size=8).digest()
        out[j] = int.from_bytes(digest, "big") / 2**64 < true_acc
    return out


@dataclass(frozen=True)
class EvalContext:
    """What the synthetic model needs to know about the prompt it answers.

    Remote models ignore it.
    """

    format_id: str
    instance_id: str
    gold: str
    options: tuple[str, ...] = ()


@dataclass
class EvaluatorConfig:
    kind: str = "synthetic"
    # remote
    endpoint: str | None = None
    model: str = "synthetic"
    token: str | None = None
    max_tokens: int = 16
    timeout: float = 60.0
    max_retries: int = 3
    backoff: float = 1.0
    parallelism: int = 1
    length_normalize: bool = False
    cache_path: str | None = None
    # synthetic
    seed: int = 0
    accuracies: dict[str, float] = field(default_factory=dict)
    beta_a: float = 2.0
    beta_b: float = 2.0

    def __post_init__(self):
        if self.kind not in ("remote", "synthetic"):
            raise ConfigurationError(f"evaluator kind must be remote or synthetic, got {self.kind!r}")
        if self.max_tokens < 1:
            raise ConfigurationError("max_tokens must be at least 1")
        if self.max_retries < 0:
            raise ConfigurationError("max_retries must be non-negative")
        if self.parallelism < 1:
            raise ConfigurationError("parallelism must be at least 1")
        if self.kind == "remote" and not self.endpoint:
            raise ConfigurationError("remote evaluator needs an endpoint")

    def to_dict(self) -> dict:
        out = {k: v for k, v in self.__dict__.items() if k != "token"}
        return out


def _check_options(options: Sequence[str]) -> None:
    if not options:
        raise EvaluationError("no options to score")
    if len(set(options)) != len(options):
        raise EvaluationError(f"options are not distinct: {list(options)}")


class SyntheticModel:
    """A model whose per-format accuracy is fixed in advance.

    Each format's accuracy comes from ``cfg.accuracies`` or, failing that, a
    Beta(beta_a, beta_b) quantile of a hash of the format id.  Whether an
    instance is answered correctly is :func:`synthetic_oracle_draw`.
    """

    def __init__(self, cfg: EvaluatorConfig):
        self.cfg = cfg
        self.model_id = cfg.model
        self.calls = 0
        self._lock = threading.Lock()

    def accuracy(self, format_id: str) -> float:
        if format_id in self.cfg.accuracies:
            return float(self.cfg.accuracies[format_id])
        u = stable_uniform(self.cfg.seed, "surface", format_id)
        return float(stats.beta.ppf(u, self.cfg.beta_a, self.cfg.beta_b))

    def _count(self):
        with self._lock:
            self.calls += 1

    def _correct(self, ctx: EvalContext) -> bool:
        return bool(synthetic_oracle_draw(ctx.format_id, ctx.instance_id,
                                          self.accuracy(ctx.format_id), self.cfg.seed))

    def _wrong_option(self, ctx: EvalContext) -> str | None:
        wrong = [o for o in ctx.options if o != ctx.gold]
        if not wrong:
            return None
        u = stable_uniform(self.cfg.seed, "wrong", ctx.format_id, ctx.instance_id)
        return wrong[int(u * len(wrong))]

    def generate(self, prompt: str, context: EvalContext | None = None) -> str:
        if not prompt:
            raise EvaluationError("empty prompt")
        self._count()
        if context is None:
            return "synthetic-" + hashlib.blake2b(
                f"{self.cfg.seed}:{prompt}".encode("utf-8"), digest_size=4).hexdigest()
        if self._correct(context):
            return context.gold + "\n"
        wrong = self._wrong_option(context)
        return (wrong if wrong is not None else "") + "\n"

    def score_options(self, prompt: str, options: Sequence[str],
                      context: EvalContext | None = None) -> dict[str, float]:
        if not prompt:
            raise EvaluationError("empty prompt")
        _check_options(options)
        self._count()
        scores = {o: -1.0 - stable_uniform(self.cfg.seed, "score", prompt, o) for o in options}
        if context is not None and context.gold in scores:
            winner = context.gold if self._correct(context) else self._wrong_option(context)
            if winner is not None:
                scores[winner] = max(scores.values()) + 0.5
        return scores


class RemoteModel:
    """Completion endpoint client with retries and an optional response cache."""

    def __init__(self, cfg: EvaluatorConfig, transport: httpx.BaseTransport | None = None,
                 sleep=time.sleep):
        self.cfg = cfg
        self.model_id = cfg.model
        token = cfg.token or os.environ.get(TOKEN_ENV)
        headers = {"Authorization": f"Bearer {token}"} if token else {}
        self._http = httpx.Client(timeout=cfg.timeout, headers=headers, transport=transport)
        self._sleep = sleep
        self.cache = ResponseCache(cfg.cache_path) if cfg.cache_path else None
        self.calls = 0  # requests actually sent, including retries
        self._lock = threading.Lock()

    def close(self):
        self._http.close()

    def _post(self, body: dict) -> dict:
        last: Exception | None = None
        for attempt in range(self.cfg.max_retries + 1):
            if attempt:
                self._sleep(self.cfg.backoff * 2 ** (attempt - 1))
            with self._lock:
                self.calls += 1
            try:
                resp = self._http.post(self.cfg.endpoint, json=body)
            except httpx.TransportError as exc:
                last = exc
                log.warning("request failed (attempt %d): %s", attempt + 1, exc)
                continue
            if resp.status_code in _RETRY_STATUS:
                last = TransportError(f"HTTP {resp.status_code}")
                log.warning("retryable status %d (attempt %d)", resp.status_code, attempt + 1)
                continue
            if resp.status_code >= 400:
                raise ProtocolError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                data = resp.json()
            except ValueError as exc:
                raise ProtocolError(f"response is not JSON: {exc}") from exc
            if not isinstance(data, dict) or not isinstance(data.get("choices"), list) or not data["choices"]:
                raise ProtocolError("response has no choices")
            return data
        raise TransportError(f"giving up after {self.cfg.max_retries + 1} attempts: {last}")

    def generate(self, prompt: str, context: EvalContext | None = None) -> str:
        if not prompt:
            raise EvaluationError("empty prompt")
        if self.cache is not None:
            hit = self.cache.get(self.model_id, "generate", prompt)
            if hit is not None:
                return hit
        data = self._post({
            "model": self.cfg.model, "prompt": prompt, "max_tokens": self.cfg.max_tokens,
            "temperature": 0, "echo": False, "logprobs": None,
        })
        choice = data["choices"][0]
        if not isinstance(choice, dict) or not isinstance(choice.get("text"), str):
            raise ProtocolError("choice has no text")
        out = choice["text"]
        if self.cache is not None:
            self.cache.put(self.model_id, "generate", prompt, out)
        return out

    def _option_logprob(self, prompt: str, option: str) -> float:
        data = self._post({
            "model": self.cfg.model, "prompt": prompt + option, "max_tokens": 0,
            "temperature": 0, "echo": True, "logprobs": 0,
        })
        lp = data["choices"][0].get("logprobs") if isinstance(data["choices"][0], dict) else None
        if not lp or lp.get("token_logprobs") is None:
            raise CapabilityError(
                "endpoint returned no token logprobs; use the prefix metric instead of ranking")
        try:
            tokens, logprobs, offsets = lp["tokens"], lp["token_logprobs"], lp["text_offset"]
        except KeyError as exc:
            raise ProtocolError(f"logprobs missing {exc}") from exc
        picked = [l for t, l, o in zip(tokens, logprobs, offsets) if o + len(t) > len(prompt)]
        if not picked or any(l is None or not math.isfinite(l) for l in picked):
            raise ProtocolError(f"no finite logprobs for option {option!r}")
        total = float(sum(picked))
        return total / len(picked) if self.cfg.length_normalize else total

    def score_options(self, prompt: str, options: Sequence[str],
                      context: EvalContext | None = None) -> dict[str, float]:
        if not prompt:
            raise EvaluationError("empty prompt")
        _check_options(options)
        if self.cache is not None:
            hit = self.cache.get(self.model_id, "score", prompt, options)
            if hit is not None:
                return hit
        out = {o: self._option_logprob(prompt, o) for o in options}
        if self.cache is not None:
            self.cache.put(self.model_id, "score", prompt, out, options)
        return out


class ResponseCache:
    """Append-only JSONL cache keyed by (model id, prompt hash, options hash)."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._entries: dict[str, object] = {}
        self._lock = threading.Lock()
        if self.path.exists():
            with open(self.path, encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        row = json.loads(line)
                        self._entries[row["key"]] = row["result"]

    @staticmethod
    def key(model: str, kind: str, prompt: str, options: Sequence[str] | None = None) -> str:
        prompt_hash = hashlib.sha256(prompt.encode("utf-8")).hexdigest()
        options_hash = hashlib.sha256(
            json.dumps(list(options) if options is not None else None).encode("utf-8")).hexdigest()
        return f"{model}|{kind}|{prompt_hash}|{options_hash}"

    def get(self, model, kind, prompt, options=None):
        return self._entries.get(self.key(model, kind, prompt, options))

    def put(self, model, kind, prompt, result, options=None) -> None:
        k = self.key(model, kind, prompt, options)
        with self._lock:
            if k in self._entries:
                return
            self._entries[k] = result
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(json.dumps({"key": k, "model": model, "result": result},
                                    ensure_ascii=False) + "\n")

    def __len__(self):
        return len(self._entries)


def make_model(cfg: EvaluatorConfig, **kwargs):
    if cfg.kind == "remote":
        return RemoteModel(cfg, **kwargs)
    return SyntheticModel(cfg)


def scores_for(model, prompt: str, options: Sequence[str],
               context: EvalContext | None = None) -> Mapping[str, float]:
    scores = model.score_options(prompt, options, context)
    missing = [o for o in options if o not in scores]
    if missing:
        raise EvaluationError(f"model returned no score for {missing}")
    return scores
