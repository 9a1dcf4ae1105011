"""Zero/nonzero sparsity patterns, the objects all structural analysis works on."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .errors import DimensionError


@dataclass(frozen=True)
class SparsityPattern:
    """Boolean mask of a matrix: which entries are free nonzero parameters.

    Index pairs are 0-indexed (row, col). Duplicates collapse by set semantics.
    """

    rows: int
    cols: int
    nonzeros: frozenset[tuple[int, int]] = field(default_factory=frozenset)

    def __post_init__(self):
        if self.rows < 0 or self.cols < 0:
            raise DimensionError(f"negative shape ({self.rows}, {self.cols})")
        nz = frozenset((int(r), int(c)) for r, c in self.nonzeros)
        for r, c in nz:
            if not (0 <= r < self.rows and 0 <= c < self.cols):
                raise DimensionError(
                    f"nonzero ({r}, {c}) out of bounds for {self.rows}x{self.cols} pattern"
                )
        object.__setattr__(self, "nonzeros", nz)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    @property
    def nnz(self) -> int:
        return len(self.nonzeros)

    def __contains__(self, idx: tuple[int, int]) -> bool:
        return tuple(idx) in self.nonzeros

    def row_support(self, r: int) -> set[int]:
        return {c for (i, c) in self.nonzeros if i == r}

    def col_support(self, c: int) -> set[int]:
        return {r for (r, j) in self.nonzeros if j == c}

    def to_dense(self) -> np.ndarray:
        mask = np.zeros((self.rows, self.cols), dtype=bool)
        for r, c in self.nonzeros:
            mask[r, c] = True
        return mask

    @classmethod
    def from_coords(cls, rows: int, cols: int, coords: Iterable[tuple[int, int]]) -> "SparsityPattern":
        return cls(rows, cols, frozenset((int(r), int(c)) for r, c in coords))

    @classmethod
    def from_matrix(cls, m: np.ndarray, tol: float = 0.0) -> "SparsityPattern":
        """Support of a numeric matrix; entries with |m| > tol count as nonzero."""
        m = np.asarray(m)
        if m.ndim != 2:
            raise DimensionError(f"expected 2-d array, got shape {m.shape}")
        rr, cc = np.nonzero(np.abs(m) > tol)
        return cls(m.shape[0], m.shape[1], frozenset(zip(rr.tolist(), cc.tolist())))

    @classmethod
    def identity(cls, n: int) -> "SparsityPattern":
        return cls(n, n, frozenset((i, i) for i in range(n)))

    @classmethod
    def empty(cls, rows: int, cols: int) -> "SparsityPattern":
        return cls(rows, cols, frozenset())

    @classmethod
    def full(cls, rows: int, cols: int) -> "SparsityPattern":
        return cls(rows, cols, frozenset((r, c) for r in range(rows) for c in range(cols)))


def stack_patterns(*patterns: SparsityPattern) -> SparsityPattern:
    """Vertical stack; all patterns must share a column count."""
    if not patterns:
        raise DimensionError("nothing to stack")
    cols = patterns[0].cols
    nz: set[tuple[int, int]] = set()
    offset = 0
    for p in patterns:
        if p.cols != cols:
            raise DimensionError(f"column mismatch in stack: {p.cols} != {cols}")
        nz.update((offset + r, c) for r, c in p.nonzeros)
        offset += p.rows
    return SparsityPattern(offset, cols, frozenset(nz))
