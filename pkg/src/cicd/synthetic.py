"""Seeded synthetic corpus generator with planted per-class evidence patterns.

Each instance draws a label and N articles. A random nonempty subset of the
articles is "informative": it carries the label's marker-token pattern (each
marker token independently corrupted to filler with probability ``noise``).
The remaining articles hold filler plus occasional contradictory tokens
borrowed from other classes' patterns. Which articles are informative is
recorded as gold metadata.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .data import ClaimInstance
from .errors import ConfigError


@dataclass
class SyntheticParams:
    n_instances: int = 200
    n_classes: int = 2
    seed: int = 7
    n_articles_min: int = 2
    n_articles_max: int = 4
    filler_vocab: int = 60
    claim_len_min: int = 4
    claim_len_max: int = 8
    article_len_min: int = 6
    article_len_max: int = 12
    pattern_len: int = 3
    noise: float = 0.1
    contradict_prob: float = 0.5
    class_prior: Optional[list[float]] = None

    def validate(self) -> None:
        for name in ("n_instances", "n_classes", "filler_vocab", "pattern_len",
                     "n_articles_min", "claim_len_min", "article_len_min"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                raise ConfigError(f"synthetic field '{name}' must be a positive integer, got {v!r}")
        if self.n_articles_max < self.n_articles_min:
            raise ConfigError("synthetic field 'n_articles_max' below 'n_articles_min'")
        if self.claim_len_max < self.claim_len_min:
            raise ConfigError("synthetic field 'claim_len_max' below 'claim_len_min'")
        if self.article_len_max < self.article_len_min:
            raise ConfigError("synthetic field 'article_len_max' below 'article_len_min'")
        if not (0.0 <= self.noise <= 1.0):
            raise ConfigError(f"synthetic field 'noise' must be in [0, 1], got {self.noise!r}")
        if not (0.0 <= self.contradict_prob <= 1.0):
            raise ConfigError("synthetic field 'contradict_prob' must be in [0, 1]")
        if self.class_prior is not None:
            if len(self.class_prior) != self.n_classes:
                raise ConfigError("synthetic field 'class_prior' length must equal 'n_classes'")
            if any(w < 0 for w in self.class_prior) or sum(self.class_prior) <= 0:
                raise ConfigError("synthetic field 'class_prior' must be nonnegative with positive sum")

    def label_names(self) -> list[str]:
        return [f"class_{c}" for c in range(self.n_classes)]

    def pattern(self, cls: int) -> list[str]:
        return [f"mark{cls}{chr(ord('a') + j)}" for j in range(self.pattern_len)]


@dataclass
class GoldRecord:
    id: str
    label: int
    informative: list[int] = field(default_factory=list)
    corrupted_tokens: int = 0


def params_from_dict(data: dict) -> SyntheticParams:
    names = {f.name for f in dataclasses.fields(SyntheticParams)}
    for key in data:
        if key not in names:
            raise ConfigError(f"unknown synthetic field '{key}'")
    params = SyntheticParams(**data)
    params.validate()
    return params


def gen_synthetic(params: SyntheticParams) -> tuple[list[ClaimInstance], list[GoldRecord]]:
    params.validate()
    rng = np.random.default_rng(params.seed)
    prior = params.class_prior
    if prior is None:
        prior = [1.0 / params.n_classes] * params.n_classes
    prior = np.asarray(prior, dtype=float)
    prior = prior / prior.sum()
    fillers = [f"word{i:03d}" for i in range(params.filler_vocab)]

    def filler_seq(n: int) -> list[str]:
        return [fillers[j] for j in rng.integers(0, params.filler_vocab, size=n)]

    corpus: list[ClaimInstance] = []
    gold: list[GoldRecord] = []
    for idx in range(params.n_instances):
        label = int(rng.choice(params.n_classes, p=prior))
        n_articles = int(rng.integers(params.n_articles_min, params.n_articles_max + 1))
        n_informative = int(rng.integers(1, n_articles + 1))
        informative = sorted(rng.choice(n_articles, size=n_informative, replace=False).tolist())
        informative_set = set(informative)
        claim = " ".join(filler_seq(int(rng.integers(params.claim_len_min,
                                                     params.claim_len_max + 1))))
        record = GoldRecord(id=f"syn{idx:05d}", label=label, informative=informative)
        articles = []
        for ai in range(n_articles):
            length = int(rng.integers(params.article_len_min, params.article_len_max + 1))
            tokens = filler_seq(length)
            if ai in informative_set:
                pattern = list(params.pattern(label))
                for j in range(len(pattern)):
                    if params.noise > 0 and rng.random() < params.noise:
                        pattern[j] = fillers[int(rng.integers(0, params.filler_vocab))]
                        record.corrupted_tokens += 1
                pos = int(rng.integers(0, max(1, length - len(pattern) + 1)))
                tokens[pos:pos + len(pattern)] = pattern
            elif params.n_classes > 1 and rng.random() < params.contradict_prob:
                other = int(rng.integers(0, params.n_classes - 1))
                if other >= label:
                    other += 1
                tok = params.pattern(other)[int(rng.integers(0, params.pattern_len))]
                tokens[int(rng.integers(0, length))] = tok
            articles.append(" ".join(tokens))
        corpus.append(ClaimInstance(id=record.id, claim_text=claim,
                                    articles=articles, label=label))
        gold.append(record)
    return corpus, gold


def save_gold(gold: list[GoldRecord], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for rec in gold:
            fh.write(json.dumps(dataclasses.asdict(rec), sort_keys=True))
            fh.write("\n")


def load_gold(path: str | Path) -> list[GoldRecord]:
    records = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records.append(GoldRecord(**json.loads(line)))
    return records
