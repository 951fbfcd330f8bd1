"""Declarative pipeline configuration.

One YAML (or JSON) file drives every command; unknown keys are rejected
and numeric fields are range-checked before any training starts. All
randomness flows from the single top-level seed; subsystem seeds are
derived from it by name so full runs replay exactly.
"""

from __future__ import annotations

import hashlib

import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator


def derive_seed(base: int, *labels) -> int:
    """Stable nested seed: hash of the base seed and a label path."""
    text = ":".join([str(int(base))] + [str(l) for l in labels])
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:4], "little")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class TokenizerConfig(_Strict):
    drop_prefixes: list[str] = ["@", "#"]
    drop_exact: list[str] = ["rt"]
    url_prefixes: list[str] = ["http://", "https://", "www."]


class EmbeddingConfig(_Strict):
    dim: int = Field(default=20, ge=1)
    window: int = Field(default=5, ge=1)
    negatives: int = Field(default=5, ge=1)
    epochs: int = Field(default=5, ge=1)
    learning_rate: float = Field(default=0.05, gt=0)
    min_ngram: int = Field(default=3, ge=1)
    max_ngram: int = Field(default=6, ge=1)
    buckets: int = Field(default=2_000_000, ge=1)
    min_count: int = Field(default=1, ge=1)
    threads: int = Field(default=1, ge=1)
    message_bounded: bool = False

    @field_validator("max_ngram")
    @classmethod
    def _ngram_range(cls, v, info):
        if "min_ngram" in info.data and v < info.data["min_ngram"]:
            raise ValueError("max_ngram must be >= min_ngram")
        return v


class ClassifierConfig(_Strict):
    mode: str = "logistic"
    reg_grid: list[float] = [0.01, 0.1, 1.0, 10.0]
    cv_folds: int = Field(default=5, ge=2)

    @field_validator("mode")
    @classmethod
    def _mode(cls, v):
        if v not in ("logistic", "least_squares"):
            raise ValueError("mode must be 'logistic' or 'least_squares'")
        return v

    @field_validator("reg_grid")
    @classmethod
    def _grid(cls, v):
        if not v or any(r <= 0 for r in v):
            raise ValueError("reg_grid must be non-empty with positive values")
        return v


class EnsembleConfig(_Strict):
    weight_step: float = Field(default=0.05, gt=0, le=0.5)


class TransferConfig(_Strict):
    upsample_factor: int = Field(default=6, ge=1)


class ActiveConfig(_Strict):
    seed_size: int = Field(default=100, ge=1)
    batch_size: int = Field(default=100, ge=1)
    target_total: int = Field(default=400, ge=1)

    @field_validator("target_total")
    @classmethod
    def _total(cls, v, info):
        if "seed_size" in info.data and v < info.data["seed_size"]:
            raise ValueError("target_total must be >= seed_size")
        return v


class EvalConfig(_Strict):
    trials: int = Field(default=10, ge=2)
    train_fraction: float = Field(default=0.9, gt=0, lt=1)


class PipelineConfig(_Strict):
    seed: int = 7
    keywords: list[str] = [
        "hit", "help", "kill", "injure", "strand",
        "miss", "urgent", "die", "need", "food",
    ]
    tokenizer: TokenizerConfig = TokenizerConfig()
    embedding: EmbeddingConfig = EmbeddingConfig()
    classifier: ClassifierConfig = ClassifierConfig()
    ensemble: EnsembleConfig = EnsembleConfig()
    transfer: TransferConfig = TransferConfig()
    active: ActiveConfig = ActiveConfig()
    eval: EvalConfig = EvalConfig()

    @field_validator("keywords")
    @classmethod
    def _keywords(cls, v):
        if not v or any(not k for k in v):
            raise ValueError("keywords must be non-empty strings")
        return v

    def drop_rules(self):
        from .preprocess import DropRules

        return DropRules(
            drop_prefixes=tuple(self.tokenizer.drop_prefixes),
            drop_exact=tuple(k.lower() for k in self.tokenizer.drop_exact),
            url_prefixes=tuple(p.lower() for p in self.tokenizer.url_prefixes),
        )

    def embedding_hyperparams(self):
        from .embedding import SubwordHyperparams

        e = self.embedding
        return SubwordHyperparams(
            dim=e.dim,
            window=e.window,
            negatives=e.negatives,
            epochs=e.epochs,
            learning_rate=e.learning_rate,
            min_ngram=e.min_ngram,
            max_ngram=e.max_ngram,
            buckets=e.buckets,
            min_count=e.min_count,
            threads=e.threads,
            message_bounded=e.message_bounded,
        )


def load_config(path: str | None) -> PipelineConfig:
    """Parse and validate a config file; None gives the documented defaults."""
    if path is None:
        return PipelineConfig()
    with open(path, "r", encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    if raw is None:
        return PipelineConfig()
    if not isinstance(raw, dict):
        raise ValueError(f"{path}: config root must be a mapping")
    return PipelineConfig(**raw)
