"""Fuzzy cell counts as generalized natural numbers.

A cell count is built from the per-observation joint inclusion degrees
through Zadeh's FGCount/FLCount, evaluated with the Heaviside-matrix
construction.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import AllZeroMembership, LengthMismatch
from .fuzzy import FuzzyNumber, FuzzyPartition, inclusion_degrees, sample_range, validate_partition

FORMAT = "fuzzcor/1"


def joint_inclusion(eps_row, eps_col) -> np.ndarray:
    eps_row = np.asarray(eps_row, dtype=float)
    eps_col = np.asarray(eps_col, dtype=float)
    if eps_row.shape != eps_col.shape:
        raise LengthMismatch(f"inclusion vectors differ in length: {eps_row.shape} vs {eps_col.shape}")
    return np.minimum(eps_row, eps_col)


def _heaviside(x):
    return (x >= 0).astype(float)


def counting_functions(eps) -> tuple[np.ndarray, np.ndarray]:
    """FGC(n) and FLC(n) for n = 0..I.

    z_i counts the entries not smaller than eps_i (column sums of H(Z)),
    FGC(n) = max(H(z - n) * eps) and FLC(n) = 1 - max(H(z - (n + 1)) * eps).
    FGC(0) is fixed at 1: at least zero elements always belong.
    """
    eps = np.asarray(eps, dtype=float).reshape(-1)
    n_obs = eps.size
    ns = np.arange(n_obs + 1)
    if n_obs == 0:
        return np.ones(1), np.ones(1)
    Z = eps[:, None] - eps[None, :]  # Z[j, i] = eps_j - eps_i
    z = _heaviside(Z).sum(axis=0)
    # max over an empty selection is 0
    fgc = (_heaviside(z[None, :] - ns[:, None]) * eps[None, :]).max(axis=1)
    flc = 1.0 - (_heaviside(z[None, :] - (ns[:, None] + 1)) * eps[None, :]).max(axis=1)
    fgc[0] = 1.0
    return fgc, flc


def zadeh_counts(eps, n: int) -> tuple[float, float]:
    """(FGC(n), FLC(n)) for a single n."""
    fgc, flc = counting_functions(eps)
    if not 0 <= n < fgc.size:
        raise ValueError(f"n={n} outside 0..{fgc.size - 1}")
    return float(fgc[n]), float(flc[n])


@dataclass(frozen=True)
class FuzzyCount:
    """Membership vector over n = 0..I."""

    memberships: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.memberships, dtype=float).reshape(-1)
        if m.size == 0 or np.any(m < 0) or np.any(m > 1) or not np.all(np.isfinite(m)):
            raise ValueError("fuzzy count memberships must be finite values in [0, 1]")
        m.setflags(write=False)
        object.__setattr__(self, "memberships", m)

    @classmethod
    def crisp(cls, n: int, size: int) -> "FuzzyCount":
        m = np.zeros(size + 1)
        m[n] = 1.0
        return cls(m)

    @property
    def size(self) -> int:
        """Largest representable count I."""
        return self.memberships.size - 1

    @property
    def is_degenerate(self) -> bool:
        return int(np.count_nonzero(self.memberships)) == 1 and self.memberships.max() == 1.0

    @property
    def height(self) -> float:
        return float(self.memberships.max())

    def normalized(self) -> "FuzzyCount":
        h = self.height
        if h == 0:
            raise AllZeroMembership("cannot normalize an all-zero count")
        return FuzzyCount(self.memberships / h)

    def __repr__(self):
        return f"FuzzyCount(I={self.size}, height={self.height:.3g}, mean={defuzzify(self, 'mean'):.4g})"


def fuzzy_count(eps, normalize: bool = False) -> FuzzyCount:
    """Generalized natural number min(FLC(n), FGC(n))."""
    fgc, flc = counting_functions(eps)
    m = np.clip(np.minimum(flc, fgc), 0.0, 1.0)
    c = FuzzyCount(m)
    return c.normalized() if normalize else c


def defuzzify(c: FuzzyCount, mode: str = "mean"):
    """Mean: membership-weighted average count.  Max: largest maximiser."""
    m = c.memberships
    total = m.sum()
    if total <= 0:
        raise AllZeroMembership("fuzzy count has no positive membership")
    if mode == "mean":
        return float(np.dot(np.arange(m.size), m) / total)
    if mode == "max":
        return int(np.flatnonzero(m == m.max())[-1])
    raise ValueError(f"unknown defuzzification mode {mode!r}")


class FuzzyFrequencyTable:
    """R x C grid of fuzzy counts sharing the sample size I."""

    def __init__(self, cells: Sequence[Sequence[FuzzyCount]], sample_size: int | None = None,
                 row_labels=None, col_labels=None, meta: dict | None = None):
        self.cells = [[c if isinstance(c, FuzzyCount) else FuzzyCount(c) for c in row] for row in cells]
        if not self.cells or not self.cells[0]:
            raise ValueError("table needs at least one cell")
        n_cols = len(self.cells[0])
        if any(len(row) != n_cols for row in self.cells):
            raise LengthMismatch("ragged fuzzy frequency table")
        sizes = {c.size for row in self.cells for c in row}
        if len(sizes) != 1:
            raise LengthMismatch(f"cells have different supports: {sorted(sizes)}")
        size = sizes.pop()
        if sample_size is not None and sample_size != size:
            raise LengthMismatch(f"membership vectors have length {size + 1}, expected I+1={sample_size + 1}")
        self.sample_size = size
        self.row_labels = list(row_labels) if row_labels is not None else None
        self.col_labels = list(col_labels) if col_labels is not None else None
        self.meta = dict(meta or {})
        self._arr = None

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.cells), len(self.cells[0])

    def membership_array(self) -> np.ndarray:
        """(R, C, I+1) read-only array of memberships."""
        if self._arr is None:
            arr = np.array([[c.memberships for c in row] for row in self.cells])
            arr.setflags(write=False)
            self._arr = arr
        return self._arr

    def defuzzified(self, mode: str = "mean") -> np.ndarray:
        return np.array([[defuzzify(c, mode) for c in row] for row in self.cells], dtype=float)

    @property
    def is_degenerate(self) -> bool:
        return all(c.is_degenerate for row in self.cells for c in row)

    @classmethod
    def from_crisp(cls, counts) -> "FuzzyFrequencyTable":
        counts = np.asarray(counts)
        if np.any(counts < 0) or np.any(counts != np.round(counts)):
            raise ValueError("crisp counts must be non-negative integers")
        counts = counts.astype(int)
        size = int(counts.sum())
        return cls([[FuzzyCount.crisp(n, size) for n in row] for row in counts], size)

    @classmethod
    def from_array(cls, memberships, **kw) -> "FuzzyFrequencyTable":
        arr = np.asarray(memberships, dtype=float)
        return cls([[FuzzyCount(arr[r, c]) for c in range(arr.shape[1])] for r in range(arr.shape[0])], **kw)

    def to_dict(self) -> dict:
        R, C = self.shape
        d = {
            "format": FORMAT,
            "I": self.sample_size,
            "R": R,
            "C": C,
            "cells": [[c.memberships.tolist() for c in row] for row in self.cells],
        }
        if self.row_labels is not None:
            d["row_labels"] = self.row_labels
        if self.col_labels is not None:
            d["col_labels"] = self.col_labels
        if self.meta:
            d["meta"] = self.meta
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "FuzzyFrequencyTable":
        t = cls([[FuzzyCount(np.asarray(m)) for m in row] for row in d["cells"]], d.get("I"),
                row_labels=d.get("row_labels"), col_labels=d.get("col_labels"), meta=d.get("meta"))
        if "R" in d and "C" in d and t.shape != (d["R"], d["C"]):
            raise LengthMismatch(f"declared shape {(d['R'], d['C'])} does not match cells {t.shape}")
        return t

    def to_long_csv(self) -> str:
        """Long format (r, c, n, membership), 1-based r and c; zero memberships skipped."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["r", "c", "n", "membership"])
        for r, row in enumerate(self.cells, start=1):
            for c, cell in enumerate(row, start=1):
                for n in np.flatnonzero(cell.memberships):
                    w.writerow([r, c, int(n), repr(float(cell.memberships[n]))])
        return buf.getvalue()

    def __repr__(self):
        R, C = self.shape
        return f"FuzzyFrequencyTable({R}x{C}, I={self.sample_size})"


def build_table(
    xs_j: Sequence[FuzzyNumber],
    xs_k: Sequence[FuzzyNumber],
    g_j: FuzzyPartition,
    g_k: FuzzyPartition,
    normalize: bool = False,
    validate: bool = True,
    tol: float = 1e-8,
    jobs: int = 1,
) -> FuzzyFrequencyTable:
    """Fuzzy frequency table of two samples over two granule banks.

    Rows follow the granules of ``g_j``, columns those of ``g_k``.
    """
    xs_j = [FuzzyNumber.from_obj(a) for a in xs_j]
    xs_k = [FuzzyNumber.from_obj(a) for a in xs_k]
    if len(xs_j) != len(xs_k):
        raise LengthMismatch(f"samples differ in size: {len(xs_j)} vs {len(xs_k)}")
    if validate:
        for part, xs in ((g_j, xs_j), (g_k, xs_k)):
            validate_partition(FuzzyPartition(part.granules, sample_range(xs)), tol=tol)
    eps_rows = [inclusion_degrees(xs_j, g) for g in g_j]
    eps_cols = [inclusion_degrees(xs_k, g) for g in g_k]

    def cell(rc):
        r, c = rc
        return fuzzy_count(joint_inclusion(eps_rows[r], eps_cols[c]), normalize=normalize)

    idx = [(r, c) for r in range(len(g_j)) for c in range(len(g_k))]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as ex:
            flat = list(ex.map(cell, idx))
    else:
        flat = [cell(rc) for rc in idx]
    C = len(g_k)
    cells = [flat[r * C:(r + 1) * C] for r in range(len(g_j))]
    return FuzzyFrequencyTable(cells, len(xs_j))
