"""Named trainable parameters and the binary checkpoint format.

Checkpoint layout (all integers little-endian; see README for the same table):
magic ``CICDCKPT`` (8 bytes), format version u32, config JSON (u32 length +
UTF-8 bytes), vocabulary (u32 token count, then u16 length + UTF-8 per token
in id order), parameters (u32 count, then per parameter: u16 name length +
UTF-8 name, u8 ndim, u32 extents, float64 values in row-major order).
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Iterator, Optional

import numpy as np

from .config import ModelConfig
from .errors import CheckpointMismatch, ShapeMismatch
from .tensor import Tensor

INIT_SCALE = 0.08

CKPT_MAGIC = b"CICDCKPT"
CKPT_VERSION = 1


class ParamSet:
    """Ordered mapping of parameter names to grad-requiring tensors."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}

    def add(self, name: str, shape: tuple[int, ...],
            rng: Optional[np.random.Generator] = None) -> Tensor:
        if name in self._params:
            raise ValueError(f"duplicate parameter '{name}'")
        if rng is not None:
            data = rng.uniform(-INIT_SCALE, INIT_SCALE, size=shape)
        else:
            data = np.zeros(shape)
        t = Tensor(data, requires_grad=True)
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def items(self) -> Iterator[tuple[str, Tensor]]:
        return iter(self._params.items())

    def n_values(self) -> int:
        return sum(t.data.size for t in self._params.values())

    def zero_grads(self) -> None:
        for t in self._params.values():
            if t.grad is None:
                t.grad = np.zeros_like(t.data)
            else:
                t.grad.fill(0.0)

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self._params.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        missing = set(self._params) - set(state)
        extra = set(state) - set(self._params)
        if missing or extra:
            raise CheckpointMismatch(
                f"parameter names differ: missing {sorted(missing)}, unexpected {sorted(extra)}")
        for name, t in self._params.items():
            arr = np.asarray(state[name], dtype=np.float64)
            if arr.shape != t.data.shape:
                raise CheckpointMismatch(
                    f"parameter '{name}': expected shape {t.data.shape}, found {arr.shape}")
            t.data = arr.copy()


def _add_lstm(ps: ParamSet, prefix: str, in_dim: int, hidden: int,
              rng: np.random.Generator) -> None:
    ps.add(f"{prefix}.wx", (in_dim, 4 * hidden), rng)
    ps.add(f"{prefix}.wh", (hidden, 4 * hidden), rng)
    ps.add(f"{prefix}.b", (1, 4 * hidden))


def _add_bilstm(ps: ParamSet, prefix: str, in_dim: int, hidden: int,
                rng: np.random.Generator) -> None:
    _add_lstm(ps, f"{prefix}.fw", in_dim, hidden, rng)
    _add_lstm(ps, f"{prefix}.bw", in_dim, hidden, rng)


def build_params(cfg: ModelConfig, rng: np.random.Generator) -> ParamSet:
    """Construct all parameters for a config; ablation toggles drop subtrees.

    Weights are uniform(-0.08, 0.08), biases zero, from the given generator.
    """
    if cfg.vocab_size is None:
        raise ShapeMismatch("config vocab_size must be resolved before building parameters")
    ps = ParamSet()
    sw = cfg.state_width
    ps.add("embedding", (cfg.vocab_size, cfg.d), rng)
    _add_bilstm(ps, "claim_enc", cfg.d, cfg.d_h, rng)

    if not cfg.no_ced:
        _add_bilstm(ps, "article_enc", cfg.d, cfg.d_h, rng)
        if not cfg.no_matching:
            ps.add("match_w", (sw, sw), rng)
        _add_lstm(ps, "decoder", sw, sw, rng)
        ps.add("decoder.init_w", (sw, sw), rng)
        ps.add("decoder.init_b", (1, sw))
        ps.add("decoder.start", (1, sw), rng)
        if not cfg.no_sentence_attention:
            ps.add("sent_score_w", (sw, sw), rng)
        if not cfg.no_word_attention:
            ps.add("word_score_w", (sw, sw), rng)
        ps.add("combine_w", (sw, 2 * sw), rng)
        if cfg.d != sw:
            ps.add("vocab_bridge", (cfg.d, sw), rng)
        ps.add("vocab_b", (1, cfg.vocab_size))

    if not cfg.no_isi:
        if not cfg.share_isi_encoder:
            _add_bilstm(ps, "isi_enc", cfg.d, cfg.d_h, rng)
        elif cfg.no_ced:
            raise ShapeMismatch("share_isi_encoder requires the CED article encoder")
        if not cfg.no_selection:
            ps.add("diff_row_w", (sw, sw), rng)
            ps.add("diff_row_b", (1, sw))
            ps.add("diff_col_w", (sw, sw), rng)
            ps.add("diff_col_b", (1, sw))

    if cfg.projection_mode and not cfg.no_ced and not cfg.no_isi:
        ps.add("proj_global_w", (cfg.projection_dim, cfg.global_width), rng)
        ps.add("proj_local_w", (cfg.projection_dim, cfg.local_width), rng)

    ps.add("classify_w", (cfg.n_classes, cfg.classifier_width()), rng)
    ps.add("classify_b", (1, cfg.n_classes))
    return ps


def save_checkpoint(path: str | Path, cfg: ModelConfig, params: ParamSet,
                    vocab_tokens: list[str]) -> None:
    buf = bytearray()
    buf += CKPT_MAGIC
    buf += struct.pack("<I", CKPT_VERSION)
    cfg_bytes = json.dumps(cfg.to_dict(), sort_keys=True).encode("utf-8")
    buf += struct.pack("<I", len(cfg_bytes))
    buf += cfg_bytes
    buf += struct.pack("<I", len(vocab_tokens))
    for tok in vocab_tokens:
        tb = tok.encode("utf-8")
        buf += struct.pack("<H", len(tb))
        buf += tb
    buf += struct.pack("<I", len(params))
    for name, t in params.items():
        nb = name.encode("utf-8")
        buf += struct.pack("<H", len(nb))
        buf += nb
        buf += struct.pack("<B", t.data.ndim)
        for extent in t.data.shape:
            buf += struct.pack("<I", extent)
        buf += t.data.astype("<f8").tobytes(order="C")
    Path(path).write_bytes(bytes(buf))


def load_checkpoint(path: str | Path) -> tuple[ModelConfig, dict[str, np.ndarray], list[str]]:
    raw = Path(path).read_bytes()
    if raw[:8] != CKPT_MAGIC:
        raise CheckpointMismatch(f"{path}: bad magic, not a checkpoint file")
    pos = 8
    (version,) = struct.unpack_from("<I", raw, pos)
    pos += 4
    if version != CKPT_VERSION:
        raise CheckpointMismatch(f"{path}: unsupported checkpoint version {version}")
    (cfg_len,) = struct.unpack_from("<I", raw, pos)
    pos += 4
    cfg_dict = json.loads(raw[pos:pos + cfg_len].decode("utf-8"))
    pos += cfg_len
    cfg = ModelConfig(**cfg_dict)
    (n_tokens,) = struct.unpack_from("<I", raw, pos)
    pos += 4
    tokens = []
    for _ in range(n_tokens):
        (tl,) = struct.unpack_from("<H", raw, pos)
        pos += 2
        tokens.append(raw[pos:pos + tl].decode("utf-8"))
        pos += tl
    (n_params,) = struct.unpack_from("<I", raw, pos)
    pos += 4
    state: dict[str, np.ndarray] = {}
    for _ in range(n_params):
        (nl,) = struct.unpack_from("<H", raw, pos)
        pos += 2
        name = raw[pos:pos + nl].decode("utf-8")
        pos += nl
        (ndim,) = struct.unpack_from("<B", raw, pos)
        pos += 1
        shape = []
        for _ in range(ndim):
            (extent,) = struct.unpack_from("<I", raw, pos)
            pos += 4
            shape.append(extent)
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(raw, dtype="<f8", count=count, offset=pos).reshape(shape)
        pos += 8 * count
        state[name] = arr.astype(np.float64)
    return cfg, state, tokens
