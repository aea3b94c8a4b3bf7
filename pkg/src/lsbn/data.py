"""Datasets, empirical frequencies, family sufficient statistics and forward sampling.

Sampling uses numpy's PCG64 bit generator seeded through ``SeedSequence(seed)``.
Only the raw 64-bit stream is consumed (``random_raw``), whose output is fixed
by the PCG64 definition, so draws do not depend on numpy's ``Generator``
distribution code. Each raw word ``w`` becomes the double ``(w >> 11) * 2**-53``
in ``[0, 1)``. Row ``r`` consumes words ``r * n .. r * n + n - 1`` and the
``j``-th node in topological order uses word ``r * n + j``. A value is chosen by
inverse CDF over the value order: the smallest ``x`` with ``u < cdf[x]``.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import EmptyDataset, MalformedRow, SchemaMismatch, UnknownValue
from .model import BayesianNetwork, FullTable, LocalStructure, VariableTable

_TOKEN = re.compile(r"^[A-Za-z0-9_-]+$")
_SAMPLE_CHUNK = 1 << 16


def index_dtype(cards) -> np.dtype:
    return np.dtype(np.uint8) if max(cards, default=2) <= 255 else np.dtype(np.int32)


@dataclass(frozen=True, eq=False)
class Dataset:
    vars: VariableTable
    rows: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows)
        n = len(self.vars)
        if rows.size == 0:
            rows = rows.reshape(0, n)
        if rows.ndim != 2 or rows.shape[1] != n:
            raise SchemaMismatch(f"rows must have shape (N, {n}), got {rows.shape}")
        cards = np.array(self.vars.cards)
        if rows.size and ((rows < 0).any() or (rows >= cards).any()):
            raise SchemaMismatch("row contains an out-of-range value index")
        rows = rows.astype(index_dtype(self.vars.cards), copy=False)
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)

    @property
    def n_rows(self) -> int:
        return self.rows.shape[0]

    def __len__(self) -> int:
        return self.rows.shape[0]

    def column(self, var: int) -> np.ndarray:
        return self.rows[:, var]

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Dataset)
            and self.vars == other.vars
            and self.rows.shape == other.rows.shape
            and bool(np.array_equal(self.rows, other.rows))
        )

    __hash__ = None


def _resolve_event(vars: VariableTable, event: Mapping) -> dict[int, int]:
    out = {}
    for k, v in event.items():
        i = vars.index(k) if isinstance(k, str) else int(k)
        out[i] = vars.value_index(i, v) if isinstance(v, str) else int(v)
    return out


def empirical_prob(ds: Dataset, event: Mapping) -> float:
    """Fraction of rows consistent with a partial assignment (names or indices)."""
    if ds.n_rows == 0:
        raise EmptyDataset("empirical probability of an empty dataset")
    mask = np.ones(ds.n_rows, dtype=bool)
    for i, v in _resolve_event(ds.vars, event).items():
        mask &= ds.rows[:, i] == v
    return float(mask.sum()) / ds.n_rows


@dataclass(frozen=True)
class FamilyCounts:
    """Count of (partition, child value) pairs; ``counts[p, x]``."""

    child: int
    parents: tuple[int, ...]
    structure: LocalStructure
    counts: np.ndarray

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def n_partitions(self) -> int:
        return self.counts.shape[0]


def partition_column(ds: Dataset, parents, ls: LocalStructure) -> np.ndarray:
    parents = tuple(parents)
    if not parents:
        return np.zeros(ds.n_rows, dtype=np.int64)
    return ls.partitions(ds.rows[:, parents])


def family_counts(ds: Dataset, child: int, parents, ls: LocalStructure | None = None) -> FamilyCounts:
    parents = tuple(parents)
    pcards = tuple(ds.vars.card(p) for p in parents)
    if ls is None:
        ls = FullTable(pcards)
    if ls.parent_cards != pcards:
        raise SchemaMismatch("local structure does not match the parent cardinalities")
    r = ds.vars.card(child)
    part = partition_column(ds, parents, ls)
    flat = np.bincount(part * r + ds.rows[:, child], minlength=ls.n_partitions * r)
    return FamilyCounts(child, parents, ls, flat.reshape(ls.n_partitions, r))


# ---------------------------------------------------------------------------
# sampling


def uniform_stream(seed: int, n_rows: int, width: int):
    """Yield (rows, width) blocks of doubles in [0, 1) from the PCG64 raw stream."""
    bitgen = np.random.PCG64(seed)
    done = 0
    while done < n_rows:
        m = min(_SAMPLE_CHUNK, n_rows - done)
        raw = bitgen.random_raw(m * width).reshape(m, width)
        yield (raw >> np.uint64(11)).astype(np.float64) * (2.0**-53)
        done += m


def _draw(cdf_rows: np.ndarray, last_ok: np.ndarray, u: np.ndarray) -> np.ndarray:
    x = (cdf_rows <= u[:, None]).sum(axis=1)
    # rounding can leave cdf[-1] slightly under u; fall back to the last positive value
    return np.minimum(x, last_ok)


def sample_columns(net: BayesianNetwork, n: int, seed: int) -> np.ndarray:
    n_vars = net.n
    out = np.zeros((n, n_vars), dtype=index_dtype(net.vars.cards))
    order = net.order
    cdfs = [np.cumsum(net.params[i], axis=1) for i in range(n_vars)]
    last_ok = [
        np.array([np.flatnonzero(row > 0)[-1] for row in net.params[i]], dtype=np.int64) for i in range(n_vars)
    ]
    start = 0
    for block in uniform_stream(seed, n, n_vars):
        m = block.shape[0]
        chunk = out[start : start + m]
        for j, i in enumerate(order):
            ps = net.dag.parents[i]
            part = net.locals[i].partitions(chunk[:, ps]) if ps else np.zeros(m, dtype=np.int64)
            chunk[:, i] = _draw(cdfs[i][part], last_ok[i][part], block[:, j])
        start += m
    return out


def ancestral_sample(net: BayesianNetwork, n: int, seed: int) -> Dataset:
    if n < 0:
        raise ValueError("sample size must be nonnegative")
    return Dataset(net.vars, sample_columns(net, n, seed))


# ---------------------------------------------------------------------------
# CSV


def save_csv(ds: Dataset, path) -> None:
    lines = [",".join(ds.vars.names)]
    vals = ds.vars.values
    for row in ds.rows.tolist():
        lines.append(",".join(vals[i][v] for i, v in enumerate(row)))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="")


def load_csv(path, vars: VariableTable) -> Dataset:
    text = Path(path).read_text(encoding="utf-8")
    reader = csv.reader(text.splitlines())
    try:
        header = next(reader)
    except StopIteration:
        raise SchemaMismatch("CSV file is empty (no header row)") from None
    if tuple(h.strip() for h in header) != vars.names:
        raise SchemaMismatch(f"CSV header {header} does not match variables {list(vars.names)}")
    lookup = [{v: k for k, v in enumerate(vals)} for vals in vars.values]
    n = len(vars)
    rows = []
    for lineno, rec in enumerate(reader, start=2):
        if not rec:
            continue
        if len(rec) != n:
            raise MalformedRow(lineno, f"expected {n} fields, got {len(rec)}")
        row = []
        for j, cell in enumerate(rec):
            if not _TOKEN.match(cell):
                raise MalformedRow(lineno, f"illegal characters in field {j + 1}: {cell!r}")
            try:
                row.append(lookup[j][cell])
            except KeyError:
                raise UnknownValue(lineno, vars.names[j], cell) from None
        rows.append(row)
    arr = np.array(rows, dtype=index_dtype(vars.cards)).reshape(len(rows), n)
    return Dataset(vars, arr)
