"""Token embedding providers.

The extraction heads sit on top of a pluggable source of per-token vectors.
Two concrete providers are shipped:

* :class:`TokenLookupProvider` -- a trainable lookup table over a fixed
  vocabulary, for desk-scale experiments and tests;
* :class:`PrecomputedEmbeddingProvider` -- frozen contextual embeddings read
  from a binary file keyed by sentence id (any external encoder process can
  emit the format).

Embedding file layout (little-endian):
    magic "CGEMB1" | d: u32 | count: u32
    then per sentence: id_len: u32 | id utf-8 | n: u32 | n*d float32 row-major
"""

from __future__ import annotations

import struct

import numpy as np

EMBED_MAGIC = b"CGEMB1"
UNK_TOKEN = "<unk>"


class ProviderError(RuntimeError):
    """The provider cannot produce embeddings for the requested sentence."""


class EmbeddingProvider:
    """Interface: map a token sequence to an (n, dim) float64 matrix."""

    dim: int
    trainable: bool = False

    def embed(self, tokens, params=None, sid: str | None = None) -> np.ndarray:
        raise NotImplementedError

    def init_params(self, rng: np.random.Generator) -> dict[str, np.ndarray]:
        """Trainable tensors this provider contributes to the model."""
        return {}

    def backward(self, tokens, d_h: np.ndarray, grads: dict) -> None:
        """Accumulate d(loss)/d(provider tensors) given d(loss)/d(embeddings)."""


class TokenLookupProvider(EmbeddingProvider):
    """Context-free trainable embeddings; unknown tokens map to <unk>."""

    trainable = True

    def __init__(self, vocab: dict[str, int], dim: int):
        if UNK_TOKEN not in vocab:
            raise ValueError(f"vocabulary must contain {UNK_TOKEN!r}")
        self.vocab = dict(vocab)
        self.dim = dim

    @classmethod
    def from_corpus(cls, corpus, dim: int) -> "TokenLookupProvider":
        vocab = {UNK_TOKEN: 0}
        for sent in corpus:
            for tok in sent.graph.tokens:
                vocab.setdefault(tok, len(vocab))
        return cls(vocab, dim)

    def token_ids(self, tokens) -> np.ndarray:
        unk = self.vocab[UNK_TOKEN]
        return np.array([self.vocab.get(t, unk) for t in tokens], dtype=np.int64)

    def embed(self, tokens, params=None, sid=None) -> np.ndarray:
        if params is None or "embed.table" not in params.tensors:
            raise ProviderError("lookup provider needs the model's embedding table")
        table = params.tensors["embed.table"]
        return table[self.token_ids(tokens)]

    def init_params(self, rng: np.random.Generator) -> dict[str, np.ndarray]:
        table = rng.normal(0.0, 1.0, size=(len(self.vocab), self.dim))
        return {"embed.table": table}

    def backward(self, tokens, d_h, grads) -> None:
        np.add.at(grads["embed.table"], self.token_ids(tokens), d_h)


class PrecomputedEmbeddingProvider(EmbeddingProvider):
    """Frozen per-sentence embeddings loaded from an embedding file."""

    trainable = False

    def __init__(self, matrices: dict[str, np.ndarray], dim: int):
        self.matrices = matrices
        self.dim = dim

    @classmethod
    def from_file(cls, path) -> "PrecomputedEmbeddingProvider":
        with open(path, "rb") as fh:
            dim, matrices = read_embedding_file(fh.read())
        return cls(matrices, dim)

    def embed(self, tokens, params=None, sid=None) -> np.ndarray:
        if sid is None:
            raise ProviderError("precomputed provider requires a sentence id")
        if sid not in self.matrices:
            raise ProviderError(f"no embeddings stored for sentence {sid!r}")
        h = self.matrices[sid]
        if h.shape[0] != len(tokens):
            raise ProviderError(
                f"stored embeddings for {sid!r} have {h.shape[0]} rows, "
                f"sentence has {len(tokens)} tokens")
        return h.astype(np.float64)


def write_embedding_file(matrices: dict[str, np.ndarray], dim: int) -> bytes:
    out = [EMBED_MAGIC, struct.pack("<II", dim, len(matrices))]
    for sid, mat in matrices.items():
        mat = np.ascontiguousarray(mat, dtype=np.float32)
        if mat.ndim != 2 or mat.shape[1] != dim:
            raise ValueError(f"matrix for {sid!r} must be (n, {dim})")
        sid_bytes = sid.encode("utf-8")
        out.append(struct.pack("<I", len(sid_bytes)))
        out.append(sid_bytes)
        out.append(struct.pack("<I", mat.shape[0]))
        out.append(mat.tobytes())
    return b"".join(out)


def read_embedding_file(data: bytes) -> tuple[int, dict[str, np.ndarray]]:
    if data[:6] != EMBED_MAGIC:
        raise ValueError("not an embedding file (bad magic)")
    dim, count = struct.unpack_from("<II", data, 6)
    offset = 14
    matrices: dict[str, np.ndarray] = {}
    for _ in range(count):
        (sid_len,) = struct.unpack_from("<I", data, offset)
        offset += 4
        sid = data[offset:offset + sid_len].decode("utf-8")
        offset += sid_len
        (n,) = struct.unpack_from("<I", data, offset)
        offset += 4
        mat = np.frombuffer(data, dtype="<f4", count=n * dim, offset=offset)
        offset += 4 * n * dim
        matrices[sid] = mat.reshape(n, dim).copy()
    if offset != len(data):
        raise ValueError("trailing bytes after last embedding record")
    return dim, matrices
