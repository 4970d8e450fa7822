"""Tokenization, vocabulary, JSONL corpus IO, and fixed-length batching."""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from .config import ModelConfig
from .errors import EmptyCorpus, MissingField, ParseError, UnknownLabel, UnknownLabelName

log = logging.getLogger(__name__)

PAD_ID = 0
UNK_ID = 1
BOS_ID = 2
RESERVED_TOKENS = ["<pad>", "<unk>", "<bos>"]

_TOKEN_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercase and split on whitespace with punctuation detached."""
    return _TOKEN_RE.findall(text.lower())


@dataclass
class ClaimInstance:
    id: str
    claim_text: str
    articles: list[str]
    label: int


class Vocab:
    """token -> id map with reserved PAD/UNK/BOS ids and a min-freq cut."""

    def __init__(self, tokens: Iterable[str], min_freq: int = 1):
        self.min_freq = min_freq
        self.id_to_token: list[str] = list(RESERVED_TOKENS)
        self.token_to_id: dict[str, int] = {t: i for i, t in enumerate(self.id_to_token)}
        for tok in tokens:
            if tok in self.token_to_id:
                raise ValueError(f"token '{tok}' collides with a reserved id")
            self.token_to_id[tok] = len(self.id_to_token)
            self.id_to_token.append(tok)

    def __len__(self) -> int:
        return len(self.id_to_token)

    def encode_token(self, tok: str) -> int:
        return self.token_to_id.get(tok, UNK_ID)

    def encode(self, tokens: Iterable[str]) -> list[int]:
        get = self.token_to_id.get
        return [get(t, UNK_ID) for t in tokens]

    def decode(self, ids: Iterable[int]) -> list[str]:
        return [self.id_to_token[i] for i in ids]

    @classmethod
    def from_tokens_in_order(cls, tokens: list[str], min_freq: int = 1) -> "Vocab":
        # tokens must already exclude the reserved entries
        return cls(tokens, min_freq=min_freq)


def build_vocab(corpus: list[ClaimInstance], min_freq: int = 1) -> Vocab:
    """Index tokens with frequency >= min_freq, ordered by (freq desc, token)."""
    if not corpus:
        raise EmptyCorpus("cannot build a vocabulary from an empty corpus")
    freq: dict[str, int] = {}
    for inst in corpus:
        for text in [inst.claim_text, *inst.articles]:
            for tok in tokenize(text):
                freq[tok] = freq.get(tok, 0) + 1
    kept = sorted((t for t, c in freq.items() if c >= min_freq),
                  key=lambda t: (-freq[t], t))
    return Vocab(kept, min_freq=min_freq)


@dataclass
class EncodedBatch:
    claim_ids: np.ndarray      # [B, p] int
    claim_mask: np.ndarray     # [B, p] bool
    article_ids: np.ndarray    # [B, N_max, l] int
    article_mask: np.ndarray   # [B, N_max, l] bool
    article_count: np.ndarray  # [B] int
    labels: np.ndarray         # [B] int
    ids: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return self.claim_ids.shape[0]


def _pad_ids(ids: list[int], length: int) -> tuple[np.ndarray, np.ndarray]:
    ids = ids[:length]
    out = np.full(length, PAD_ID, dtype=np.int64)
    mask = np.zeros(length, dtype=bool)
    out[:len(ids)] = ids
    mask[:len(ids)] = True
    return out, mask


def encode_batch(instances: list[ClaimInstance], vocab: Vocab,
                 cfg: ModelConfig) -> EncodedBatch:
    """Truncate/pad claims to p and articles to l; keep at most n_cap articles."""
    if not instances:
        raise EmptyCorpus("cannot encode an empty batch")
    b = len(instances)
    counts = [min(len(inst.articles), cfg.n_cap) for inst in instances]
    n_max = max(counts)
    claim_ids = np.full((b, cfg.p), PAD_ID, dtype=np.int64)
    claim_mask = np.zeros((b, cfg.p), dtype=bool)
    article_ids = np.full((b, n_max, cfg.l), PAD_ID, dtype=np.int64)
    article_mask = np.zeros((b, n_max, cfg.l), dtype=bool)
    labels = np.zeros(b, dtype=np.int64)
    for bi, inst in enumerate(instances):
        if inst.label < 0 or inst.label >= cfg.n_classes:
            raise UnknownLabel(
                f"instance '{inst.id}': label index {inst.label} out of range "
                f"for {cfg.n_classes} classes")
        labels[bi] = inst.label
        claim_ids[bi], claim_mask[bi] = _pad_ids(vocab.encode(tokenize(inst.claim_text)), cfg.p)
        for ai, article in enumerate(inst.articles[:cfg.n_cap]):
            article_ids[bi, ai], article_mask[bi, ai] = _pad_ids(
                vocab.encode(tokenize(article)), cfg.l)
    return EncodedBatch(claim_ids, claim_mask, article_ids, article_mask,
                        np.asarray(counts, dtype=np.int64), labels,
                        ids=[inst.id for inst in instances])


def load_jsonl(path: str | Path, label_table: dict[str, int]) -> list[ClaimInstance]:
    """Read one JSON object per line: id, claim, articles (nonempty), label."""
    path = Path(path)
    instances: list[ClaimInstance] = []
    seen_ids: set[str] = set()
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}:{lineno}: invalid JSON ({exc.msg})")
            for fname in ("id", "claim", "articles", "label"):
                if fname not in obj:
                    raise MissingField(f"{path}:{lineno}: missing field '{fname}'")
            articles = obj["articles"]
            if not isinstance(articles, list) or not articles:
                raise MissingField(
                    f"{path}:{lineno}: field 'articles' must be a nonempty array")
            if not isinstance(obj["claim"], str) or not obj["claim"].strip():
                raise MissingField(f"{path}:{lineno}: field 'claim' must be nonempty text")
            label_name = obj["label"]
            if label_name not in label_table:
                raise UnknownLabelName(
                    f"{path}:{lineno}: label '{label_name}' not in table "
                    f"{sorted(label_table)}")
            iid = str(obj["id"])
            if iid in seen_ids:
                log.warning("%s:%d: duplicate instance id '%s' (ids are advisory)",
                            path, lineno, iid)
            seen_ids.add(iid)
            instances.append(ClaimInstance(
                id=iid, claim_text=obj["claim"],
                articles=[str(a) for a in articles],
                label=label_table[label_name]))
    return instances


def save_jsonl(corpus: list[ClaimInstance], path: str | Path,
               label_names: list[str]) -> None:
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for inst in corpus:
            fh.write(json.dumps({
                "id": inst.id,
                "claim": inst.claim_text,
                "articles": inst.articles,
                "label": label_names[inst.label],
            }, sort_keys=True))
            fh.write("\n")
