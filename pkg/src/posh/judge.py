"""Judge clients: presence scoring and identifier rewriting.

The HTTP client talks to any OpenAI-compatible completions or chat endpoint,
requesting per-token alternative log-probabilities. A presence score is the
probability-weighted average over the answer digits 1-5, read off the first
generated token whose alternatives contain any of those digits. Responses
are cached on disk by content hash so reruns are free and bit-reproducible.

Two network-free judges ship alongside for tests and dry runs: a verbatim
oracle (scores 5 exactly when the component's span text occurs in the target
text) and a hash-based mock with stable pseudo-random scores.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import re
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol

import requests

from .errors import JudgeUnavailable, NoDigitToken
from .rubric import RubricQuestion, TEMPLATE_VERSION

_DIGITS = ("1", "2", "3", "4", "5")


@dataclass
class JudgeConfig:
    url: str
    model: str = ""
    timeout: float = 60.0
    max_retries: int = 3
    concurrency: int = 4
    temperature: float = 0.0
    top_logprobs: int = 20
    max_tokens: int = 8
    seed: int | None = 0
    cache_dir: str | None = None
    api: str = "chat"  # "chat" (chat/completions) or "completions"
    api_key_env: str = "JUDGE_API_KEY"
    template_version: str = TEMPLATE_VERSION

    def __post_init__(self) -> None:
        if self.concurrency < 1:
            raise ValueError("concurrency must be >= 1")
        if self.top_logprobs < 5:
            raise ValueError("top_logprobs must be >= 5 (one alternative per answer digit)")
        if self.api not in ("chat", "completions"):
            raise ValueError(f"api must be 'chat' or 'completions', got {self.api!r}")


@dataclass
class ScoreDistribution:
    """Probability mass over the answer digits 1-5 and its expectation."""

    masses: dict[int, float]
    expected: float
    top_token: str | None = None

    def __post_init__(self) -> None:
        total = sum(self.masses.values())
        if not math.isclose(total, 1.0, abs_tol=1e-9):
            raise ValueError(f"digit masses must sum to 1, got {total}")
        if not 1.0 <= self.expected <= 5.0:
            raise ValueError(f"expected score {self.expected} outside [1, 5]")

    @classmethod
    def from_weights(cls, weights: dict[int, float], top_token: str | None = None) -> "ScoreDistribution":
        total = sum(weights.values())
        if total <= 0:
            raise ValueError("weights must have positive total mass")
        masses = {d: weights.get(d, 0.0) / total for d in range(1, 6)}
        expected = sum(d * m for d, m in masses.items())
        return cls(masses=masses, expected=expected, top_token=top_token)

    @classmethod
    def point(cls, digit: int) -> "ScoreDistribution":
        return cls.from_weights({digit: 1.0}, top_token=str(digit))

    @property
    def top_digit(self) -> int:
        return max(self.masses, key=lambda d: (self.masses[d], d))

    def to_dict(self) -> dict:
        return {
            "masses": {str(d): self.masses[d] for d in range(1, 6)},
            "expected": self.expected,
            "top_token": self.top_token,
        }


def _digit_of(token: str) -> int | None:
    stripped = token.strip().strip('"').strip("'")
    return int(stripped) if stripped in _DIGITS else None


def _alternative_positions(response: dict) -> list[tuple[str, list[tuple[str, float]]]]:
    """Normalize chat and legacy completion logprob layouts.

    Returns, per generated token position, the chosen token string and its
    alternative (token, logprob) pairs (the chosen token included).
    """
    choice = response["choices"][0]
    logprobs = choice.get("logprobs") or {}
    positions: list[tuple[str, list[tuple[str, float]]]] = []
    if "content" in logprobs and isinstance(logprobs["content"], list):  # chat format
        for entry in logprobs["content"]:
            # top_logprobs usually repeats the sampled token; key by token string
            # so nothing is double-counted.
            table: dict[str, float] = {entry["token"]: entry["logprob"]}
            for alt in entry.get("top_logprobs", []):
                table.setdefault(alt["token"], alt["logprob"])
            positions.append((entry["token"], list(table.items())))
    elif "top_logprobs" in logprobs and isinstance(logprobs["top_logprobs"], list):  # legacy format
        tokens = logprobs.get("tokens", [])
        for i, table in enumerate(logprobs["top_logprobs"]):
            chosen = tokens[i] if i < len(tokens) else ""
            alts = list((table or {}).items())
            if chosen and chosen not in (table or {}):
                lps = logprobs.get("token_logprobs", [])
                if i < len(lps) and lps[i] is not None:
                    alts.append((chosen, lps[i]))
            positions.append((chosen, alts))
    return positions


def _completion_text(response: dict) -> str:
    choice = response["choices"][0]
    if "message" in choice:
        return choice["message"].get("content") or ""
    return choice.get("text") or ""


def distribution_from_response(response: dict) -> ScoreDistribution:
    """Extract the answer-digit distribution from a raw endpoint response.

    Scans generated tokens left to right and uses the first position whose
    alternatives include at least one digit in 1-5; the exponentiated
    log-probabilities of those digits are renormalized over the five digits.
    Falls back to parsing the completion text when no logprobs are usable.
    """
    for chosen, alts in _alternative_positions(response):
        weights: dict[int, float] = {}
        for token, logprob in alts:
            digit = _digit_of(token)
            if digit is not None:
                weights[digit] = weights.get(digit, 0.0) + math.exp(logprob)
        if weights:
            return ScoreDistribution.from_weights(weights, top_token=chosen)

    text = _completion_text(response)
    match = re.search(r"[1-5]", text)
    if match:
        return ScoreDistribution.point(int(match.group()))
    raise NoDigitToken(f"no answer digit in response text {text!r}")


def _first_line(completion: str) -> str:
    for line in completion.splitlines():
        stripped = line.strip().strip('"').strip("'").strip()
        if stripped:
            return stripped
    return ""


class Judge(Protocol):
    def score_presence(
        self, question: RubricQuestion, component_text: str = "", target_text: str = ""
    ) -> ScoreDistribution: ...

    def rewrite(self, prompt: str) -> str: ...


class HttpJudge:
    """OpenAI-compatible HTTP judge with on-disk response caching."""

    def __init__(self, config: JudgeConfig):
        self.config = config
        self.stats = {"requests": 0, "cache_hits": 0, "retries": 0}
        self._cache_dir = Path(config.cache_dir) if config.cache_dir else None
        if self._cache_dir is not None:
            self._cache_dir.mkdir(parents=True, exist_ok=True)

    # -- caching ---------------------------------------------------------

    def _cache_key(self, payload: dict) -> str:
        material = json.dumps(
            {"payload": payload, "template_version": self.config.template_version},
            sort_keys=True,
            ensure_ascii=False,
        )
        return hashlib.sha256(material.encode("utf-8")).hexdigest()

    def _cache_path(self, key: str) -> Path | None:
        return self._cache_dir / f"{key}.json" if self._cache_dir is not None else None

    def _cache_read(self, key: str) -> dict | None:
        path = self._cache_path(key)
        if path is None or not path.exists():
            return None
        try:
            entry = json.loads(path.read_text(encoding="utf-8"))
            return entry["response"]
        except (json.JSONDecodeError, KeyError, OSError):
            return None  # corrupted entry: ignore and re-fetch

    def _cache_write(self, key: str, payload: dict, response: dict) -> None:
        path = self._cache_path(key)
        if path is None:
            return
        body = json.dumps({"request": payload, "response": response}, ensure_ascii=False, indent=2)
        fd, tmp = tempfile.mkstemp(dir=str(path.parent), suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as handle:
                handle.write(body)
            os.replace(tmp, path)
        except OSError:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    def flush_cache(self) -> int:
        """Remove every cached response; returns the number of entries removed."""
        if self._cache_dir is None:
            return 0
        removed = 0
        for path in sorted(self._cache_dir.glob("*.json")):
            path.unlink()
            removed += 1
        return removed

    # -- transport ---------------------------------------------------------

    def _payload(self, prompt: str, *, logprobs: bool, max_tokens: int) -> dict:
        cfg = self.config
        payload: dict = {
            "model": cfg.model,
            "temperature": cfg.temperature,
            "max_tokens": max_tokens,
        }
        if cfg.seed is not None:
            payload["seed"] = cfg.seed
        if cfg.api == "chat":
            payload["messages"] = [{"role": "user", "content": prompt}]
            if logprobs:
                payload["logprobs"] = True
                payload["top_logprobs"] = cfg.top_logprobs
        else:
            payload["prompt"] = prompt
            if logprobs:
                payload["logprobs"] = cfg.top_logprobs
        return payload

    def _endpoint(self) -> str:
        url = self.config.url.rstrip("/")
        if url.endswith("/completions"):  # full path already given
            return url
        suffix = "/chat/completions" if self.config.api == "chat" else "/completions"
        if not url.endswith("/v1"):
            url += "/v1"
        return url + suffix

    def _request(self, prompt: str, *, logprobs: bool, max_tokens: int) -> dict:
        payload = self._payload(prompt, logprobs=logprobs, max_tokens=max_tokens)
        key = self._cache_key(payload)
        cached = self._cache_read(key)
        if cached is not None:
            self.stats["cache_hits"] += 1
            return cached

        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(self.config.api_key_env)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"

        last_error: Exception | None = None
        for attempt in range(self.config.max_retries + 1):
            try:
                self.stats["requests"] += 1
                reply = requests.post(
                    self._endpoint(), json=payload, headers=headers, timeout=self.config.timeout
                )
                reply.raise_for_status()
                response = reply.json()
                self._cache_write(key, payload, response)
                return response
            except (requests.RequestException, ValueError) as exc:
                last_error = exc
                if attempt < self.config.max_retries:
                    self.stats["retries"] += 1
                    time.sleep(min(0.5 * 2**attempt, 8.0))
        raise JudgeUnavailable(f"judge endpoint failed after {self.config.max_retries + 1} attempts: {last_error}")

    # -- public API ---------------------------------------------------------

    def score_presence(
        self, question: RubricQuestion, component_text: str = "", target_text: str = ""
    ) -> ScoreDistribution:
        response = self._request(question.prompt, logprobs=True, max_tokens=self.config.max_tokens)
        return distribution_from_response(response)

    def rewrite(self, prompt: str) -> str:
        response = self._request(prompt, logprobs=False, max_tokens=64)
        return _first_line(_completion_text(response))

    def warm_cache(self, prompts: list[str]) -> dict[str, int]:
        """Pre-issue scoring requests (pass 1/2 of a plan) so later runs hit cache."""
        from concurrent.futures import ThreadPoolExecutor

        before = dict(self.stats)
        if prompts:
            with ThreadPoolExecutor(max_workers=self.config.concurrency) as pool:
                list(pool.map(lambda p: self._request(p, logprobs=True, max_tokens=self.config.max_tokens), prompts))
        return {
            "prompts": len(prompts),
            "requests": self.stats["requests"] - before["requests"],
            "cache_hits": self.stats["cache_hits"] - before["cache_hits"],
        }


class VerbatimOracleJudge:
    """Deterministic stub: 5 when the component text occurs verbatim in the target."""

    def score_presence(
        self, question: RubricQuestion, component_text: str = "", target_text: str = ""
    ) -> ScoreDistribution:
        present = bool(component_text) and component_text in target_text
        return ScoreDistribution.point(5 if present else 1)

    def rewrite(self, prompt: str) -> str:
        match = re.search(r'"([^"]+)"', prompt)
        if match is None:
            raise JudgeUnavailable("no phrase found in rewrite prompt")
        return match.group(1)


class HashMockJudge:
    """Stable pseudo-random scores derived from a hash of the prompt."""

    def __init__(self, seed: int = 0):
        self.seed = seed

    def score_presence(
        self, question: RubricQuestion, component_text: str = "", target_text: str = ""
    ) -> ScoreDistribution:
        digest = hashlib.sha256(f"{self.seed}:{question.prompt}".encode("utf-8")).digest()
        weights = {d: 1 + digest[d] for d in range(1, 6)}
        return ScoreDistribution.from_weights(weights)

    def rewrite(self, prompt: str) -> str:
        match = re.search(r'"([^"]+)"', prompt)
        return match.group(1) if match else ""


def judge_from_url(url: str, **config) -> Judge:
    """Build a judge from a URL; `verbatim:` and `mock:[seed]` select the stubs."""
    if url.startswith("verbatim:"):
        return VerbatimOracleJudge()
    if url.startswith("mock:"):
        seed_text = url.split(":", 1)[1]
        return HashMockJudge(seed=int(seed_text) if seed_text else 0)
    return HttpJudge(JudgeConfig(url=url, **config))
