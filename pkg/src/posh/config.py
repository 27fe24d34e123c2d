"""Run configuration shared by the CLI commands."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .judge import Judge, JudgeConfig, judge_from_url
from .rubric import TEMPLATE_VERSION
from .scoring import EngineConfig


@dataclass
class RunConfig:
    judge_url: str = "mock:0"
    model: str = ""
    presence_threshold: float = 2.0
    overall: str = "harmonic"
    overlap_rule: str = "half_overlap"
    tie_threshold: float = 0.0
    jobs: int = 1
    cache_dir: str | None = None
    preprocess: str | None = None
    api: str = "chat"
    timeout: float = 60.0
    max_retries: int = 3
    top_logprobs: int = 20
    seed: int | None = 0

    # Fields that must not change results; excluded from the config hash.
    _PLUMBING = ("jobs", "cache_dir", "preprocess", "timeout", "max_retries")

    @classmethod
    def from_file(cls, path: str | Path, overrides: dict | None = None) -> "RunConfig":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        known = {f.name for f in fields(cls)}
        unknown = [k for k in raw if k not in known]
        if unknown:
            raise ValueError(f"unknown config fields: {unknown}")
        merged = {**raw, **(overrides or {})}
        return cls(**merged)

    def engine_config(self) -> EngineConfig:
        return EngineConfig(
            presence_threshold=self.presence_threshold,
            overall=self.overall,
            jobs=self.jobs,
        )

    def judge(self) -> Judge:
        return judge_from_url(
            self.judge_url,
            model=self.model,
            timeout=self.timeout,
            max_retries=self.max_retries,
            concurrency=self.jobs,
            top_logprobs=self.top_logprobs,
            seed=self.seed,
            cache_dir=self.cache_dir,
            api=self.api,
        )

    def hash(self) -> str:
        """Hash of everything that can change scores (plumbing excluded)."""
        material = {
            k: v for k, v in asdict(self).items() if k not in self._PLUMBING
        }
        material["template_version"] = TEMPLATE_VERSION
        blob = json.dumps(material, sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]
