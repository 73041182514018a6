"""Sparse storage for triple-product tensors.

Entries are kept in canonical form ``i <= j`` since the integrand
``e^i e^j conj(e^k)`` is symmetric in its first two slots.  The text dump is::

    N vol source threshold
    i j k re im
    ...

with entries sorted lexicographically and floats written with ``repr`` so a
dump/load round trip is bit-exact.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np


@dataclass(frozen=True, eq=False)
class TripleTensor:
    """Sparse map ``(i, j, k) -> M^{i,j,k}`` for indices below ``cutoff``."""

    cutoff: int
    index: np.ndarray  # (nnz, 3) int64, canonical i <= j, lexicographically sorted
    values: np.ndarray  # (nnz,) complex128
    vol: float
    eigenvalues: np.ndarray | None = None
    threshold: float = 0.0
    source: str = "exact"
    # exact sources only: integer weight coordinates and the embedding m -> w
    coords: np.ndarray | None = None
    embedding: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        idx = np.asarray(self.index, dtype=np.int64).reshape(-1, 3)
        vals = np.asarray(self.values, dtype=np.complex128).reshape(-1)
        if idx.shape[0] != vals.shape[0]:
            raise ValueError("index and values have different lengths")
        if idx.size and (idx.min() < 0 or idx.max() >= self.cutoff):
            raise ValueError("tensor index out of range for cutoff")
        if np.any(idx[:, 0] > idx[:, 1]):
            raise ValueError("tensor entries must be stored with i <= j")
        order = np.lexsort((idx[:, 2], idx[:, 1], idx[:, 0]))
        idx = idx[order]
        vals = vals[order]
        if idx.shape[0] > 1 and np.any(np.all(idx[1:] == idx[:-1], axis=1)):
            raise ValueError("duplicate tensor entries")
        object.__setattr__(self, "index", idx)
        object.__setattr__(self, "values", vals)
        if self.eigenvalues is not None:
            ev = np.asarray(self.eigenvalues, dtype=float)
            object.__setattr__(self, "eigenvalues", ev)

    @classmethod
    def from_triples(cls, triples, values, cutoff, vol, **meta):
        """Build from arbitrary ``(i, j, k)`` triples, folding ``j < i`` onto ``i <= j``.

        Both orders of an off-diagonal pair may be given; they must agree.
        """
        idx = np.asarray(triples, dtype=np.int64).reshape(-1, 3).copy()
        vals = np.asarray(values, dtype=np.complex128).reshape(-1)
        swap = idx[:, 0] > idx[:, 1]
        idx[swap, 0], idx[swap, 1] = idx[swap, 1], idx[swap, 0].copy()
        keyed = {}
        for (i, j, k), v in zip(map(tuple, idx), vals):
            if (i, j, k) in keyed and keyed[(i, j, k)] != v:
                raise ValueError(f"asymmetric input at {(i, j, k)}")
            keyed[(i, j, k)] = v
        if keyed:
            idx = np.array(list(keyed.keys()), dtype=np.int64)
            vals = np.array(list(keyed.values()), dtype=np.complex128)
        else:
            idx = np.zeros((0, 3), dtype=np.int64)
            vals = np.zeros(0, dtype=np.complex128)
        return cls(cutoff=cutoff, index=idx, values=vals, vol=vol, **meta)

    @property
    def nnz(self):
        return self.index.shape[0]

    def __len__(self):
        return self.nnz

    def __getitem__(self, ijk):
        i, j, k = ijk
        if i > j:
            i, j = j, i
        pos = self._lookup().get((int(i), int(j), int(k)))
        return 0j if pos is None else complex(self.values[pos])

    def _lookup(self):
        cache = self.__dict__.get("_lookup_cache")
        if cache is None:
            cache = {tuple(map(int, t)): n for n, t in enumerate(self.index)}
            object.__setattr__(self, "_lookup_cache", cache)
        return cache

    def expanded(self):
        """All stored entries with the ``(j, i, k)`` mirror of every ``i < j`` entry."""
        off = self.index[:, 0] != self.index[:, 1]
        mirror = self.index[off][:, [1, 0, 2]]
        idx = np.vstack([self.index, mirror])
        vals = np.concatenate([self.values, self.values[off]])
        return idx, vals

    def dense(self):
        """Dense ``N x N x N`` array; intended for verification at small cutoffs."""
        out = np.zeros((self.cutoff,) * 3, dtype=np.complex128)
        idx, vals = self.expanded()
        out[idx[:, 0], idx[:, 1], idx[:, 2]] = vals
        return out

    def contract(self, f, g):
        """Return ``h(k) = sum_{i,j} f(i) g(j) M^{i,j,k}``."""
        f = np.asarray(f)
        g = np.asarray(g)
        i, j, k = self.index.T
        w = f[i] * g[j]
        off = i != j
        w = w + np.where(off, f[j] * g[i], 0.0)
        out = np.zeros(self.cutoff, dtype=np.complex128)
        np.add.at(out, k, w * self.values)
        return out

    def is_real(self, tol=0.0):
        return bool(np.all(np.abs(self.values.imag) <= tol))

    def conj(self):
        return replace(self, values=self.values.conj())

    def truncate(self, n):
        """Restrict to indices below ``n``."""
        if n > self.cutoff:
            raise ValueError("cannot truncate beyond the cutoff")
        keep = np.all(self.index < n, axis=1)
        ev = None if self.eigenvalues is None else self.eigenvalues[:n]
        coords = None if self.coords is None else self.coords[:n]
        return replace(
            self, cutoff=n, index=self.index[keep], values=self.values[keep], eigenvalues=ev, coords=coords
        )

    def with_values(self, index, values):
        return replace(self, index=index, values=values)

    # -- text dump -----------------------------------------------------------

    def dumps(self):
        buf = io.StringIO()
        buf.write(f"{self.cutoff} {float(self.vol)!r} {self.source} {float(self.threshold)!r}\n")
        for (i, j, k), v in zip(self.index.tolist(), self.values.tolist()):
            buf.write(f"{i} {j} {k} {v.real!r} {v.imag!r}\n")
        return buf.getvalue()

    def dump(self, path):
        Path(path).write_text(self.dumps())

    @classmethod
    def loads(cls, text):
        lines = text.splitlines()
        if not lines:
            raise ValueError("empty tensor dump")
        head = lines[0].split()
        if len(head) != 4:
            raise ValueError("malformed tensor dump header")
        cutoff, vol, source, threshold = int(head[0]), float(head[1]), head[2], float(head[3])
        idx, vals = [], []
        for n, line in enumerate(lines[1:], start=2):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 5:
                raise ValueError(f"malformed tensor dump line {n}")
            idx.append([int(p) for p in parts[:3]])
            vals.append(complex(float(parts[3]), float(parts[4])))
        index = np.array(idx, dtype=np.int64).reshape(-1, 3)
        return cls(
            cutoff=cutoff,
            index=index,
            values=np.array(vals, dtype=np.complex128),
            vol=vol,
            threshold=threshold,
            source=source,
        )

    @classmethod
    def load(cls, path):
        return cls.loads(Path(path).read_text())
