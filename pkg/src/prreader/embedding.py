"""Fixed word vectors with deterministic out-of-vocabulary fallbacks."""

from __future__ import annotations

import hashlib

import numpy as np


class EmbeddingTable:
    """Word -> d-vector lookup. Vectors are never trained.

    Words missing from ``vectors`` get a vector drawn from a generator seeded by
    a hash of ``(oov_seed, word)``, so lookups are stable across processes.
    Lookup is case-insensitive.
    """

    def __init__(self, dim, vectors=None, oov_seed=0, source=None):
        self.dim = int(dim)
        self.oov_seed = int(oov_seed)
        self.source = source
        self.vectors = {}
        for w, v in (vectors or {}).items():
            v = np.asarray(v, dtype=np.float64)
            if v.shape != (self.dim,):
                raise ValueError(f"vector for {w!r} has shape {v.shape}, expected ({self.dim},)")
            self.vectors[w.lower()] = v
        self._oov = {}

    def __contains__(self, word):
        return word.lower() in self.vectors

    def __len__(self):
        return len(self.vectors)

    def oov_vector(self, word):
        v = self._oov.get(word)
        if v is None:
            digest = hashlib.sha256(f"{self.oov_seed}\x00{word}".encode("utf-8")).digest()
            rng = np.random.default_rng(int.from_bytes(digest[:8], "little"))
            v = rng.normal(0.0, 1.0 / np.sqrt(self.dim), self.dim)
            self._oov[word] = v
        return v

    def vector(self, word):
        w = word.lower()
        v = self.vectors.get(w)
        return v if v is not None else self.oov_vector(w)

    def matrix(self, words):
        """Stack vectors for ``words`` into an ``(len(words), dim)`` array."""
        if len(words) == 0:
            return np.zeros((0, self.dim))
        return np.stack([self.vector(w) for w in words])

    @classmethod
    def load(cls, path, oov_seed=0):
        vectors, dim = {}, None
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                parts = line.rstrip("\n").split(" ")
                if len(parts) < 2:
                    continue
                vals = [float(x) for x in parts[1:]]
                if dim is None:
                    dim = len(vals)
                elif len(vals) != dim:
                    raise ValueError(f"{path}:{lineno}: expected {dim} values, got {len(vals)}")
                vectors[parts[0]] = vals
        if dim is None:
            raise ValueError(f"{path}: no vectors")
        return cls(dim, vectors, oov_seed=oov_seed, source=str(path))

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            for w in sorted(self.vectors):
                fh.write(w + " " + " ".join(repr(float(x)) for x in self.vectors[w]) + "\n")
