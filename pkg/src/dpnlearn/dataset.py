"""Sequence data, observation regimes, and complete-data sufficient statistics."""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np

from .model import (
    HIDDEN,
    OBSERVED,
    PRIOR,
    TRANSITION,
    DpnStructure,
    VariableSpec,
    config_strides,
)

MISSING = -1


class DataError(ValueError):
    """Malformed dataset, file, or missing value where one is not allowed."""


@dataclass(frozen=True, eq=False)
class SequenceDataset:
    """Variable-length sequences of slices; ``-1`` marks a missing cell."""

    variables: tuple
    sequences: tuple

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        seqs = []
        n = len(self.variables)
        cards = np.array([v.cardinality for v in self.variables])
        for i, s in enumerate(self.sequences):
            a = np.array(s, dtype=np.int16)
            if a.ndim != 2 or a.shape[1] != n:
                raise DataError(f"sequence {i}: expected slices of length {n}")
            if a.shape[0] < 1:
                raise DataError(f"sequence {i}: empty")
            if np.any(a < MISSING) or np.any(a >= cards[None, :]):
                bad = np.argwhere((a < MISSING) | (a >= cards[None, :]))[0]
                raise DataError(
                    f"sequence {i}, slice {bad[0]}: value {a[bad[0], bad[1]]} out of range "
                    f"for {self.variables[bad[1]].name}"
                )
            for j, v in enumerate(self.variables):
                if v.role == HIDDEN and np.any(a[:, j] != MISSING):
                    raise DataError(f"hidden variable {v.name} has observed cells")
            a.setflags(write=False)
            seqs.append(a)
        object.__setattr__(self, "sequences", tuple(seqs))

    @property
    def names(self) -> tuple:
        return tuple(v.name for v in self.variables)

    @property
    def n_seq(self) -> int:
        return len(self.sequences)

    @property
    def n_transitions(self) -> int:
        return sum(len(s) - 1 for s in self.sequences)

    @property
    def n_slices(self) -> int:
        return sum(len(s) for s in self.sequences)

    def is_complete(self) -> bool:
        return all(not np.any(s == MISSING) for s in self.sequences)

    def __len__(self) -> int:
        return len(self.sequences)

    def __eq__(self, other):
        if not isinstance(other, SequenceDataset):
            return NotImplemented
        return self.variables == other.variables and len(self.sequences) == len(
            other.sequences
        ) and all(np.array_equal(a, b) for a, b in zip(self.sequences, other.sequences))

    def concat(self, other: "SequenceDataset") -> "SequenceDataset":
        if self.variables != other.variables:
            raise DataError("cannot concatenate datasets over different variables")
        return SequenceDataset(self.variables, self.sequences + other.sequences)

    def subset(self, indices) -> "SequenceDataset":
        return SequenceDataset(self.variables, [self.sequences[i] for i in indices])

    def align(self, structure: DpnStructure) -> "SequenceDataset":
        """Reorder columns to ``structure`` and add all-missing columns for
        variables the data does not carry (they must be hidden in the model).
        """
        if self.names == structure.names:
            return self
        own = {v.name: j for j, v in enumerate(self.variables)}
        cols = []
        for v in structure.variables:
            if v.name in own:
                cols.append(own[v.name])
            elif v.role == HIDDEN:
                cols.append(None)
            else:
                raise DataError(f"observed variable {v.name} absent from data")
        seqs = []
        for s in self.sequences:
            out = np.full((len(s), structure.n), MISSING, dtype=np.int16)
            for k, j in enumerate(cols):
                if j is not None:
                    out[:, k] = s[:, j]
            seqs.append(out)
        variables = []
        for v, j in zip(structure.variables, cols):
            variables.append(v if j is not None else VariableSpec(v.name, v.cardinality, HIDDEN))
        return SequenceDataset(variables, seqs)


# ---------------------------------------------------------------------------
# sufficient statistics


@dataclass(eq=False)
class SufficientStats:
    """Family-indexed count tables ``(parent configs, child values)``.

    Counts are reals so expected counts share the type.
    """

    structure: DpnStructure
    prior: dict = field(default_factory=dict)
    transition: dict = field(default_factory=dict)
    n_seq: float = 0
    n_transitions: float = 0

    def counts(self, child: str, segment: str) -> np.ndarray:
        return (self.prior if segment == PRIOR else self.transition)[child]

    def __add__(self, other: "SufficientStats") -> "SufficientStats":
        if self.structure != other.structure:
            raise ValueError("stats over different structures")
        return SufficientStats(
            self.structure,
            {k: v + other.prior[k] for k, v in self.prior.items()},
            {k: v + other.transition[k] for k, v in self.transition.items()},
            self.n_seq + other.n_seq,
            self.n_transitions + other.n_transitions,
        )


def family_index(values: np.ndarray, cards: Sequence[int]) -> np.ndarray:
    """Mixed-radix index of parent configurations, rows of ``values``."""
    if len(cards) == 0:
        return np.zeros(len(values), dtype=np.int64)
    return values.astype(np.int64) @ config_strides(cards)


def _stacked(data: SequenceDataset):
    first = np.array([s[0] for s in data.sequences], dtype=np.int64).reshape(-1, len(data.variables))
    prev = [s[:-1] for s in data.sequences]
    nxt = [s[1:] for s in data.sequences]
    n = len(data.variables)
    prev = np.concatenate(prev).astype(np.int64) if prev else np.zeros((0, n), np.int64)
    nxt = np.concatenate(nxt).astype(np.int64) if nxt else np.zeros((0, n), np.int64)
    return first, prev, nxt


def _missing_error(data: SequenceDataset, cols, segment: str):
    for i, s in enumerate(data.sequences):
        rows = s[:1] if segment == PRIOR else s
        for t, row in enumerate(rows):
            for j in cols:
                if row[j] == MISSING:
                    name = data.variables[j].name
                    return DataError(
                        f"missing value in sequence {i}, slice {t}, variable {name}"
                    )
    return DataError("missing value")


class CompleteCounts:
    """Per-family tallies over a complete dataset, computed on demand."""

    def __init__(self, data: SequenceDataset, structure: DpnStructure):
        self.data = data.align(structure)
        self.structure = structure
        self._first, self._prev, self._next = _stacked(self.data)
        self.n_seq = self.data.n_seq
        self.n_transitions = self.data.n_transitions

    def family_counts(self, child: str, parents, segment: str) -> np.ndarray:
        s = self.structure
        ci = s.index(child)
        cards = [s.cardinality(p[0]) for p in parents]
        card = s.cardinality(child)
        if segment == PRIOR:
            cols = [s.index(p[0]) for p in parents]
            pa = self._first[:, cols]
            ch = self._first[:, ci]
            if np.any(pa < 0) or np.any(ch < 0):
                raise _missing_error(self.data, cols + [ci], PRIOR)
        else:
            pa = np.empty((len(self._prev), len(parents)), dtype=np.int64)
            for k, (name, t) in enumerate(parents):
                pa[:, k] = (self._prev if t == 0 else self._next)[:, s.index(name)]
            ch = self._next[:, ci]
            if np.any(pa < 0) or np.any(ch < 0):
                cols = [s.index(p[0]) for p in parents] + [ci]
                raise _missing_error(self.data, cols, TRANSITION)
        rows = int(np.prod(cards)) if cards else 1
        idx = family_index(pa, cards) * card + ch
        return np.bincount(idx, minlength=rows * card).reshape(rows, card).astype(float)


def count_complete(data: SequenceDataset, structure: DpnStructure) -> SufficientStats:
    """Sufficient statistics of every family of ``structure`` from complete data."""
    cc = CompleteCounts(data, structure)
    prior = {c: cc.family_counts(c, pa, PRIOR) for c, pa in structure.families(PRIOR)}
    trans = {c: cc.family_counts(c, pa, TRANSITION) for c, pa in structure.families(TRANSITION)}
    return SufficientStats(structure, prior, trans, cc.n_seq, cc.n_transitions)


# ---------------------------------------------------------------------------
# observation regimes


class Regime(NamedTuple):
    kind: str  # "complete" | "hide" | "two-obs"
    h: float = 0.0

    def __str__(self):
        return f"hide:{self.h:g}" if self.kind == "hide" else self.kind


def parse_regime(text) -> Regime:
    if isinstance(text, Regime):
        return text
    text = str(text).strip()
    if text == "complete":
        return Regime("complete")
    if text in ("two-obs", "two_observation"):
        return Regime("two-obs")
    if text.startswith("hide:") or text.startswith("hide_slices:"):
        h = float(text.split(":", 1)[1])
        if not 0.0 <= h <= 1.0:
            raise DataError(f"hide probability {h} outside [0, 1]")
        return Regime("hide", h)
    raise DataError(f"unknown regime {text!r}")


def apply_regime(data: SequenceDataset, regime, rng_seed: int = 0) -> SequenceDataset:
    """Hide whole slices per ``regime``; slice 0 is always kept."""
    regime = parse_regime(regime)
    if regime.kind == "complete" or (regime.kind == "hide" and regime.h == 0.0):
        return data
    rng = np.random.default_rng(rng_seed)
    seqs = []
    for s in data.sequences:
        out = np.array(s)
        L = len(s)
        if regime.kind == "hide":
            mask = rng.random(L) < regime.h
            mask[0] = False
        else:
            mask = np.ones(L, dtype=bool)
            mask[0] = False
            mask[L - 1] = False
        out[mask, :] = MISSING
        seqs.append(out)
    return SequenceDataset(data.variables, seqs)


# ---------------------------------------------------------------------------
# file format


def save_dataset(data: SequenceDataset, path) -> None:
    lines = [
        " ".join(
            f"{v.name}:{v.cardinality}" + (":hidden" if v.role == HIDDEN else "")
            for v in data.variables
        )
    ]
    for s in data.sequences:
        lines.append("")
        for row in s:
            lines.append(" ".join("?" if x == MISSING else str(int(x)) for x in row))
    Path(path).write_text("\n".join(lines) + "\n")


def _parse_header(line: str):
    variables = []
    for tok in line.split():
        parts = tok.split(":")
        if len(parts) not in (2, 3):
            raise DataError(f"bad header token {tok!r}")
        role = OBSERVED
        if len(parts) == 3:
            if parts[2] != HIDDEN:
                raise DataError(f"bad role in header token {tok!r}")
            role = HIDDEN
        try:
            card = int(parts[1])
        except ValueError:
            raise DataError(f"bad cardinality in header token {tok!r}") from None
        variables.append(VariableSpec(parts[0], card, role))
    return variables


def load_dataset(path) -> SequenceDataset:
    text = Path(path).read_text()
    lines = text.splitlines()
    while lines and not lines[0].strip():
        lines.pop(0)
    if not lines:
        raise DataError(f"{path}: empty file")
    variables = _parse_header(lines[0])
    n = len(variables)
    seqs, cur = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            if cur:
                seqs.append(cur)
                cur = []
            continue
        cells = line.split()
        if len(cells) != n:
            raise DataError(f"{path}:{lineno}: expected {n} cells, got {len(cells)}")
        row = []
        for c in cells:
            if c == "?":
                row.append(MISSING)
            else:
                try:
                    row.append(int(c))
                except ValueError:
                    raise DataError(f"{path}:{lineno}: bad cell {c!r}") from None
        cur.append(row)
    if cur:
        seqs.append(cur)
    try:
        return SequenceDataset(variables, seqs)
    except DataError as exc:
        raise DataError(f"{path}: {exc}") from None


def describe_missing(data: SequenceDataset) -> str:
    total = data.n_slices * len(data.variables)
    miss = sum(int(np.sum(s == MISSING)) for s in data.sequences)
    return f"{miss}/{total} cells missing"


__all__ = [
    "MISSING",
    "DataError",
    "SequenceDataset",
    "SufficientStats",
    "CompleteCounts",
    "count_complete",
    "Regime",
    "parse_regime",
    "apply_regime",
    "save_dataset",
    "load_dataset",
    "family_index",
]
