"""Dense tensor arithmetic and entanglement measures.

Tensors are plain C-ordered ``float64`` numpy arrays: the shape is the list of
index extents and ``t.ravel()`` is the row-major data.  Site indices of a
partition are 0-based.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Partition",
    "as_tensor",
    "contract",
    "delta_tensor",
    "matricize",
    "dematricize",
    "entanglement_entropy",
    "schmidt_rank",
    "singular_values",
    "DEFAULT_REL_TOL",
]

DEFAULT_REL_TOL = 1e-9


def as_tensor(data, shape: Sequence[int] | None = None) -> np.ndarray:
    """Return ``data`` as a C-contiguous float64 array, optionally reshaped."""
    arr = np.require(np.asarray(data, dtype=np.float64), requirements="C")
    if shape is not None:
        shape = tuple(int(s) for s in shape)
        if any(s < 1 for s in shape):
            raise ValueError(f"extents must be positive, got {shape}")
        if arr.size != int(np.prod(shape, dtype=np.int64)):
            raise ValueError(
                f"data has {arr.size} entries but shape {shape} needs "
                f"{int(np.prod(shape, dtype=np.int64))}"
            )
        arr = arr.reshape(shape)
    return arr


@dataclass(frozen=True)
class Partition:
    """Bipartition (A, B) of the sites ``0..n_sites-1``."""

    a_indices: tuple[int, ...]
    b_indices: tuple[int, ...]

    def __post_init__(self):
        a, b = tuple(sorted(self.a_indices)), tuple(sorted(self.b_indices))
        object.__setattr__(self, "a_indices", a)
        object.__setattr__(self, "b_indices", b)
        if not a or not b:
            raise ValueError("both sides of a partition must be non-empty")
        if set(a) & set(b):
            raise ValueError(f"partition sides overlap: {sorted(set(a) & set(b))}")
        n = len(a) + len(b)
        if len(set(a)) != len(a) or len(set(b)) != len(b) or set(a) | set(b) != set(range(n)):
            raise ValueError(f"partition must cover sites 0..{n - 1} exactly once")

    @property
    def n_sites(self) -> int:
        return len(self.a_indices) + len(self.b_indices)

    @classmethod
    def from_a(cls, a_indices: Iterable[int], n_sites: int) -> "Partition":
        a = sorted(set(int(i) for i in a_indices))
        if a and (a[0] < 0 or a[-1] >= n_sites):
            raise ValueError(f"site index out of range for {n_sites} sites: {a}")
        return cls(tuple(a), tuple(i for i in range(n_sites) if i not in set(a)))

    @classmethod
    def suffix(cls, size: int, n_sites: int) -> "Partition":
        """A = the last ``size`` sites (A to the right of B)."""
        return cls.from_a(range(n_sites - size, n_sites), n_sites)

    @classmethod
    def prefix(cls, size: int, n_sites: int) -> "Partition":
        return cls.from_a(range(size), n_sites)

    @classmethod
    def middle(cls, n_sites: int) -> "Partition":
        """Contiguous cut with A the right half (the smaller half when odd)."""
        return cls.suffix(n_sites // 2, n_sites)

    @classmethod
    def rect(cls, side: int, row: int, col: int, size: int) -> "Partition":
        """A = ``size`` x ``size`` square with top-left ``(row, col)`` on a
        ``side`` x ``side`` grid with row-major site order."""
        if row < 0 or col < 0 or row + size > side or col + size > side:
            raise ValueError("rectangle does not fit on the grid")
        a = [(row + i) * side + col + j for i in range(size) for j in range(size)]
        return cls.from_a(a, side * side)

    def swapped(self) -> "Partition":
        return Partition(self.b_indices, self.a_indices)


def contract(t1: np.ndarray, t2: np.ndarray, pairs: Sequence[tuple[int, int]]) -> np.ndarray:
    """Sum over paired indices of ``t1`` and ``t2``.

    The free indices of ``t1`` come first, then those of ``t2``, each in
    their original relative order.
    """
    t1, t2 = np.asarray(t1, dtype=np.float64), np.asarray(t2, dtype=np.float64)
    left, right = [], []
    for a, b in pairs:
        if not (0 <= a < t1.ndim) or not (0 <= b < t2.ndim):
            raise IndexError(f"pair {(a, b)} out of range for orders {t1.ndim}, {t2.ndim}")
        if t1.shape[a] != t2.shape[b]:
            raise ValueError(
                f"dimension mismatch on pair {(a, b)}: {t1.shape[a]} != {t2.shape[b]}"
            )
        left.append(a)
        right.append(b)
    if len(set(left)) != len(left) or len(set(right)) != len(right):
        raise ValueError(f"an index appears in more than one pair: {list(pairs)}")
    return np.ascontiguousarray(np.tensordot(t1, t2, axes=(left, right)))


def delta_tensor(order: int, dim: int) -> np.ndarray:
    """Order-``order`` tensor with 1 where all indices agree, 0 elsewhere."""
    if order < 1 or dim < 1:
        raise ValueError(f"order and dim must be >= 1, got {order}, {dim}")
    t = np.zeros((dim,) * order)
    idx = np.arange(dim)
    t[(idx,) * order] = 1.0
    return t


def _check_partition(t: np.ndarray, p: Partition) -> None:
    if t.ndim != p.n_sites:
        raise ValueError(f"partition covers {p.n_sites} sites but tensor has order {t.ndim}")


def matricize(t: np.ndarray, p: Partition) -> np.ndarray:
    """Rows enumerate A-configurations, columns B-configurations, both in
    lexicographic order of the sorted site indices."""
    t = np.asarray(t, dtype=np.float64)
    _check_partition(t, p)
    rows = int(np.prod([t.shape[i] for i in p.a_indices], dtype=np.int64))
    return np.ascontiguousarray(t.transpose(p.a_indices + p.b_indices)).reshape(rows, -1)


def dematricize(m: np.ndarray, p: Partition, shape: Sequence[int]) -> np.ndarray:
    """Inverse of :func:`matricize` for a tensor of the given ``shape``."""
    shape = tuple(shape)
    perm = p.a_indices + p.b_indices
    t = np.asarray(m, dtype=np.float64).reshape([shape[i] for i in perm])
    return np.ascontiguousarray(t.transpose(np.argsort(perm)))


def singular_values(t: np.ndarray, p: Partition) -> np.ndarray:
    return np.linalg.svd(matricize(t, p), compute_uv=False)


def entanglement_entropy(t: np.ndarray, p: Partition) -> float:
    """Von Neumann entropy (nats) of the normalized state across ``p``."""
    t = np.asarray(t, dtype=np.float64)
    norm = np.linalg.norm(t)
    if norm == 0.0:
        raise ValueError("entanglement entropy of the zero tensor is undefined")
    s = singular_values(t / norm, p)
    lam = s * s
    lam = lam[lam > np.finfo(np.float64).eps * lam.max()]
    return max(0.0, float(-np.sum(lam * np.log(lam))))


def schmidt_rank(t: np.ndarray, p: Partition, rel_tol: float = DEFAULT_REL_TOL) -> int:
    """Number of singular values above ``rel_tol * sigma_max``."""
    if not 0.0 < rel_tol < 1.0:
        raise ValueError(f"rel_tol must lie in (0, 1), got {rel_tol}")
    s = singular_values(t, p)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > rel_tol * s[0]))


def iter_configs(n_sites: int, dim: int):
    """All configurations of ``n_sites`` sites in lexicographic order."""
    return product(range(dim), repeat=n_sites)
