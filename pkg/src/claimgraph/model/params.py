"""Model parameters and the binary checkpoint format.

Checkpoint layout (little-endian):
    magic "CGCKPT1" | version: u32 | json_len: u32 | config JSON utf-8
    n_tensors: u32
    then per tensor (sorted by name):
        name_len: u16 | name utf-8 | rank: u8 | dims: rank * u32 | float32 data

The config JSON is canonical (sorted keys, compact separators) so that
load -> save reproduces a checkpoint byte for byte.  Tensors are stored as
float32 and widened to float64 in memory.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from ..schema import ATTRIBUTE_TYPES, ENTITY_TYPES, RELATION_TYPES

CKPT_MAGIC = b"CGCKPT1"
CKPT_VERSION = 1

WIDTH_DIM = 25

STANDARD_ENTITY_LABELS = tuple(t.value for t in ENTITY_TYPES)
RELATION_LABELS = tuple(t.value for t in RELATION_TYPES)
ATTRIBUTE_LABELS = tuple(t.value for t in ATTRIBUTE_TYPES)


@dataclass
class ModelParams:
    """All trainable tensors plus the structural metadata needed to use them.

    ``entity_labels`` are the real classes; the "none" class is implicitly
    appended as the last logit.  In attrs-as-ents mode the entity labels are
    collapsed "etype|attr|..." strings and the attribute head is unused.
    """

    dim: int
    max_span_size: int
    entity_labels: tuple[str, ...]
    tensors: dict[str, np.ndarray]
    label_mode: str = "standard"  # "standard" | "attrs_as_ents"
    width_dim: int = WIDTH_DIM
    vocab: dict[str, int] | None = None
    config_echo: dict = field(default_factory=dict)

    @property
    def n_entity_classes(self) -> int:
        return len(self.entity_labels) + 1  # + "none"

    @property
    def none_index(self) -> int:
        return len(self.entity_labels)

    def entity_input_dim(self) -> int:
        return 2 * self.dim + self.width_dim

    def relation_input_dim(self) -> int:
        return 3 * self.dim + 2 * self.width_dim

    def copy(self) -> "ModelParams":
        return ModelParams(
            dim=self.dim, max_span_size=self.max_span_size,
            entity_labels=tuple(self.entity_labels),
            tensors={k: v.copy() for k, v in self.tensors.items()},
            label_mode=self.label_mode, width_dim=self.width_dim,
            vocab=dict(self.vocab) if self.vocab is not None else None,
            config_echo=dict(self.config_echo))

    def zero_grads(self) -> dict[str, np.ndarray]:
        return {name: np.zeros_like(t) for name, t in self.tensors.items()}


def init_params(dim: int, max_span_size: int, entity_labels, rng: np.random.Generator,
                label_mode: str = "standard", width_dim: int = WIDTH_DIM,
                provider=None, config_echo: dict | None = None) -> ModelParams:
    """Seeded random initialization; weight scales follow 1/sqrt(fan-in)."""
    entity_labels = tuple(entity_labels)
    n_ent = len(entity_labels) + 1
    n_rel = len(RELATION_LABELS)
    n_attr = len(ATTRIBUTE_LABELS)
    e_in = 2 * dim + width_dim
    r_in = 3 * dim + 2 * width_dim

    def linear(n_out, n_in):
        return rng.normal(0.0, 1.0 / np.sqrt(n_in), size=(n_out, n_in))

    tensors = {
        "attn.w": rng.normal(0.0, 1.0 / np.sqrt(dim), size=dim),
        "attn.b": np.zeros(()),
        "width.table": rng.normal(0.0, 0.1, size=(max_span_size, width_dim)),
        "entity.W": linear(n_ent, e_in),
        "entity.b": np.zeros(n_ent),
        "relation.W": linear(n_rel, r_in),
        "relation.b": np.zeros(n_rel),
        "attribute.W": linear(n_attr, dim),
        "attribute.b": np.zeros(n_attr),
    }
    vocab = None
    if provider is not None and provider.trainable:
        tensors.update(provider.init_params(rng))
        vocab = dict(provider.vocab)
    return ModelParams(dim=dim, max_span_size=max_span_size,
                       entity_labels=entity_labels, tensors=tensors,
                       label_mode=label_mode, width_dim=width_dim, vocab=vocab,
                       config_echo=dict(config_echo or {}))


def save_checkpoint(params: ModelParams) -> bytes:
    config = {
        "dim": params.dim,
        "max_span_size": params.max_span_size,
        "width_dim": params.width_dim,
        "entity_labels": list(params.entity_labels),
        "label_mode": params.label_mode,
        "vocab": params.vocab,
        "echo": params.config_echo,
    }
    config_bytes = json.dumps(config, sort_keys=True, separators=(",", ":"),
                              ensure_ascii=False).encode("utf-8")
    out = [CKPT_MAGIC, struct.pack("<II", CKPT_VERSION, len(config_bytes)), config_bytes,
           struct.pack("<I", len(params.tensors))]
    for name in sorted(params.tensors):
        # np.ascontiguousarray would promote rank-0 tensors to rank 1.
        tensor = np.asarray(params.tensors[name], dtype=np.float32)
        if tensor.ndim and not tensor.flags.c_contiguous:
            tensor = np.ascontiguousarray(tensor)
        name_bytes = name.encode("utf-8")
        out.append(struct.pack("<H", len(name_bytes)))
        out.append(name_bytes)
        out.append(struct.pack("<B", tensor.ndim))
        out.append(struct.pack(f"<{tensor.ndim}I", *tensor.shape))
        out.append(tensor.tobytes())
    return b"".join(out)


def load_checkpoint(data: bytes) -> ModelParams:
    if data[:7] != CKPT_MAGIC:
        raise ValueError("not a checkpoint file (bad magic)")
    version, json_len = struct.unpack_from("<II", data, 7)
    if version != CKPT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    offset = 15
    config = json.loads(data[offset:offset + json_len].decode("utf-8"))
    offset += json_len
    (n_tensors,) = struct.unpack_from("<I", data, offset)
    offset += 4
    tensors: dict[str, np.ndarray] = {}
    for _ in range(n_tensors):
        (name_len,) = struct.unpack_from("<H", data, offset)
        offset += 2
        name = data[offset:offset + name_len].decode("utf-8")
        offset += name_len
        (rank,) = struct.unpack_from("<B", data, offset)
        offset += 1
        dims = struct.unpack_from(f"<{rank}I", data, offset)
        offset += 4 * rank
        count = int(np.prod(dims)) if rank else 1
        flat = np.frombuffer(data, dtype="<f4", count=count, offset=offset)
        offset += 4 * count
        tensors[name] = flat.reshape(dims).astype(np.float64)
    if offset != len(data):
        raise ValueError("trailing bytes after last tensor")
    return ModelParams(
        dim=config["dim"], max_span_size=config["max_span_size"],
        entity_labels=tuple(config["entity_labels"]),
        tensors=tensors, label_mode=config["label_mode"],
        width_dim=config["width_dim"], vocab=config["vocab"],
        config_echo=config.get("echo", {}))


def checkpoint_hash(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def save_checkpoint_file(params: ModelParams, path) -> str:
    data = save_checkpoint(params)
    with open(path, "wb") as fh:
        fh.write(data)
    return checkpoint_hash(data)


def load_checkpoint_file(path) -> tuple[ModelParams, str]:
    with open(path, "rb") as fh:
        data = fh.read()
    return load_checkpoint(data), checkpoint_hash(data)
