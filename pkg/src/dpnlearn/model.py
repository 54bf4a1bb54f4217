"""Variables, DPN structures, conditional distributions and trajectory probabilities.

A DPN is a prior network over slice 0 plus a transition network whose
families live in slice 1 and may draw parents from slices 0 and 1.
Parents are always written as nodes ``(name, slice)``; prior-network
parents carry slice 0.

Parent configurations are enumerated in mixed-radix order with the last
listed parent varying fastest. Compound slice states use the same rule over
the structure's variable order.
"""
from __future__ import annotations

import graphlib
import itertools
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Mapping, Union

import numpy as np

OBSERVED = "observed"
HIDDEN = "hidden"
PRIOR = "prior"
TRANSITION = "transition"
SEGMENTS = (PRIOR, TRANSITION)

Node = tuple  # (variable name, slice index)

ROW_TOL = 1e-9


class ModelError(ValueError):
    """Raised when a model or trajectory is malformed."""


def parse_node(text: str, default_slice: int | None = None) -> Node:
    """Parse ``"A[0]"`` into ``("A", 0)``; a bare name takes ``default_slice``."""
    text = text.strip()
    if text.endswith("]") and "[" in text:
        name, _, rest = text.partition("[")
        return (name, int(rest[:-1]))
    if default_slice is None:
        raise ModelError(f"node {text!r} needs a slice suffix")
    return (text, default_slice)


def format_node(node: Node) -> str:
    return f"{node[0]}[{node[1]}]"


def _node(x, default_slice: int) -> Node:
    if isinstance(x, str):
        return parse_node(x, default_slice)
    name, t = x
    return (str(name), int(t))


def config_strides(cards: Iterable[int]) -> np.ndarray:
    cards = list(cards)
    strides = np.ones(len(cards), dtype=np.int64)
    for i in range(len(cards) - 2, -1, -1):
        strides[i] = strides[i + 1] * cards[i + 1]
    return strides


def config_index(values, cards) -> int:
    idx = 0
    for v, c in zip(values, cards):
        idx = idx * c + int(v)
    return idx


def _log(p: float) -> float:
    return math.log(p) if p > 0.0 else -math.inf


@dataclass(frozen=True)
class VariableSpec:
    name: str
    cardinality: int = 2
    role: str = OBSERVED

    @property
    def hidden(self) -> bool:
        return self.role == HIDDEN


@dataclass(frozen=True)
class DpnStructure:
    """The pair (prior DAG, transition graph) over a fixed variable list.

    ``transition_edges`` holds pairs ``(source node, target node)``; a bare
    string target means slice 1. Construction normalizes but does not
    validate, so malformed structures can still be reported by
    :func:`structure_problems`.
    """

    variables: tuple
    prior_edges: frozenset = frozenset()
    transition_edges: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        object.__setattr__(
            self, "prior_edges", frozenset((str(a), str(b)) for a, b in self.prior_edges)
        )
        object.__setattr__(
            self,
            "transition_edges",
            frozenset((_node(a, 0), _node(b, 1)) for a, b in self.transition_edges),
        )

    @cached_property
    def names(self) -> tuple:
        return tuple(v.name for v in self.variables)

    @cached_property
    def _index(self) -> dict:
        return {v.name: i for i, v in enumerate(self.variables)}

    @cached_property
    def cards(self) -> tuple:
        return tuple(v.cardinality for v in self.variables)

    @property
    def n(self) -> int:
        return len(self.variables)

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise ModelError(f"unknown variable {name!r}") from None

    def variable(self, name: str) -> VariableSpec:
        return self.variables[self.index(name)]

    def cardinality(self, name: str) -> int:
        return self.variables[self.index(name)].cardinality

    def node_key(self, node: Node):
        return (node[1], self.index(node[0]))

    def sort_parents(self, parents: Iterable[Node]) -> tuple:
        return tuple(sorted(parents, key=self.node_key))

    @cached_property
    def _parent_map(self) -> dict:
        out = {(PRIOR, name): [] for name in self.names}
        out.update({(TRANSITION, name): [] for name in self.names})
        for a, b in self.prior_edges:
            out.setdefault((PRIOR, b), []).append((a, 0))
        for src, dst in self.transition_edges:
            out.setdefault((TRANSITION, dst[0]), []).append(src)
        return {k: self.sort_parents(v) for k, v in out.items()}

    def parents(self, child: str, segment: str) -> tuple:
        return self._parent_map[(segment, child)]

    def families(self, segment: str):
        for name in self.names:
            yield name, self.parents(name, segment)

    def edges(self, segment: str) -> frozenset:
        """Edges of one segment as ``(source node, child name)`` pairs."""
        if segment == PRIOR:
            return frozenset(((a, 0), b) for a, b in self.prior_edges)
        return frozenset((src, dst[0]) for src, dst in self.transition_edges)

    def with_edges(self, segment: str, edges: Iterable) -> "DpnStructure":
        """Replace one segment's edges, given as ``(source node, child name)`` pairs."""
        if segment == PRIOR:
            return replace(self, prior_edges=frozenset((src[0], dst) for src, dst in edges))
        return replace(self, transition_edges=frozenset((src, (dst, 1)) for src, dst in edges))

    def with_variables(self, extra: Iterable[VariableSpec]) -> "DpnStructure":
        return replace(self, variables=self.variables + tuple(extra))

    def drop_variables(self, names: Iterable[str]) -> "DpnStructure":
        drop = set(names)
        return DpnStructure(
            tuple(v for v in self.variables if v.name not in drop),
            frozenset(e for e in self.prior_edges if e[0] not in drop and e[1] not in drop),
            frozenset(
                e for e in self.transition_edges if e[0][0] not in drop and e[1][0] not in drop
            ),
        )

    def edge_count(self) -> int:
        return len(self.prior_edges) + len(self.transition_edges)

    def topological_order(self, segment: str) -> tuple:
        """Variable order for sampling one slice of the given segment."""
        ts = graphlib.TopologicalSorter({n: () for n in self.names})
        if segment == PRIOR:
            for a, b in self.prior_edges:
                ts.add(b, a)
        else:
            for src, dst in self.transition_edges:
                if src[1] == 1:
                    ts.add(dst[0], src[0])
        return tuple(ts.static_order())


def _acyclic(names, edges) -> bool:
    ts = graphlib.TopologicalSorter({n: () for n in names})
    for a, b in edges:
        ts.add(b, a)
    try:
        tuple(ts.static_order())
    except graphlib.CycleError:
        return False
    return True


def structure_problems(structure: DpnStructure) -> str | None:
    """Return the first violated structural invariant, or None."""
    names = [v.name for v in structure.variables]
    if len(set(names)) != len(names):
        return "duplicate variable names"
    for v in structure.variables:
        if int(v.cardinality) < 2:
            return f"variable {v.name}: cardinality < 2"
        if v.role not in (OBSERVED, HIDDEN):
            return f"variable {v.name}: unknown role {v.role!r}"
    known = set(names)
    for a, b in structure.prior_edges:
        if a not in known or b not in known:
            return f"prior edge {a}->{b}: unknown variable"
        if a == b:
            return f"prior edge {a}->{b}: self loop"
    if not _acyclic(names, structure.prior_edges):
        return "prior edges contain a cycle"
    intra = []
    for src, dst in structure.transition_edges:
        if src[0] not in known or dst[0] not in known:
            return f"transition edge {format_node(src)}->{format_node(dst)}: unknown variable"
        if dst[1] != 1:
            return f"transition edge {format_node(src)}->{format_node(dst)}: slice-0 target"
        if src[1] not in (0, 1):
            return f"transition edge {format_node(src)}->{format_node(dst)}: bad source slice"
        if src[1] == 1:
            if src[0] == dst[0]:
                return f"transition edge {format_node(src)}->{format_node(dst)}: self loop"
            intra.append((src[0], dst[0]))
    if not _acyclic(names, intra):
        return "intra-slice transition edges contain a cycle"
    return None


# ---------------------------------------------------------------------------
# conditional distributions


def _freeze(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TableCpd:
    """Conditional probability table, one row per parent configuration."""

    child: str
    parents: tuple
    parent_cards: tuple
    probs: np.ndarray
    frozen: bool = False

    def __post_init__(self):
        object.__setattr__(self, "parents", tuple(_node(p, 0) for p in self.parents))
        object.__setattr__(self, "parent_cards", tuple(int(c) for c in self.parent_cards))
        probs = _freeze(self.probs)
        if probs.ndim == 1:
            probs = _freeze(probs[None, :])
        object.__setattr__(self, "probs", probs)

    @property
    def card(self) -> int:
        return self.probs.shape[1]

    def table(self) -> np.ndarray:
        return self.probs

    def row(self, parent_values) -> np.ndarray:
        return self.probs[config_index(parent_values, self.parent_cards)]


@dataclass(frozen=True, eq=False)
class NoisyOrCpd:
    """Binary noisy-OR: ``P(child=0) = leak_q * prod(q_i for active parents)``.

    ``fixed`` marks inhibition parameters excluded from learning (strict
    persistence arcs use ``q = 0`` with ``fixed=True``).
    """

    child: str
    parents: tuple
    q: tuple
    leak_q: float = 1.0
    fixed: tuple = ()
    leak_fixed: bool = False

    def __post_init__(self):
        object.__setattr__(self, "parents", tuple(_node(p, 0) for p in self.parents))
        object.__setattr__(self, "q", tuple(float(x) for x in self.q))
        object.__setattr__(self, "leak_q", float(self.leak_q))
        fixed = tuple(bool(f) for f in self.fixed) or (False,) * len(self.q)
        object.__setattr__(self, "fixed", fixed)

    card = 2

    @property
    def parent_cards(self) -> tuple:
        return (2,) * len(self.parents)

    @cached_property
    def _table(self) -> np.ndarray:
        k = len(self.q)
        q = np.array(self.q)
        rows = np.empty((2**k, 2))
        for j, cfg in enumerate(itertools.product((0, 1), repeat=k)):
            active = np.array(cfg, dtype=bool)
            p0 = self.leak_q * float(np.prod(q[active]))
            rows[j] = (p0, 1.0 - p0)
        return _freeze(rows)

    def table(self) -> np.ndarray:
        return self._table

    def row(self, parent_values) -> np.ndarray:
        return noisy_or_row(self, parent_values)


@dataclass(frozen=True, eq=False)
class FrozenSwitchCpd:
    """Transition family gated by a binary switch parent.

    With the switch off the child follows ``base``; with it on the child
    copies its own previous value. The switch is the slowest-varying parent.
    """

    child: str
    switch: str
    base: Union[TableCpd, NoisyOrCpd]

    def __post_init__(self):
        if (self.child, 0) not in self.base.parents:
            raise ModelError(f"switched family {self.child} needs {self.child}[0] as a parent")

    @property
    def parents(self) -> tuple:
        return ((self.switch, 0),) + tuple(self.base.parents)

    @property
    def parent_cards(self) -> tuple:
        return (2,) + tuple(self.base.parent_cards)

    @property
    def card(self) -> int:
        return self.base.card

    @property
    def self_position(self) -> int:
        return self.base.parents.index((self.child, 0))

    @cached_property
    def _table(self) -> np.ndarray:
        base = self.base.table()
        copy = np.zeros_like(base)
        pos = self.self_position
        for j, cfg in enumerate(itertools.product(*[range(c) for c in self.base.parent_cards])):
            copy[j, cfg[pos]] = 1.0
        return _freeze(np.vstack([base, copy]))

    def table(self) -> np.ndarray:
        return self._table

    def row(self, parent_values) -> np.ndarray:
        return self._table[config_index(parent_values, self.parent_cards)]


Cpd = Union[TableCpd, NoisyOrCpd, FrozenSwitchCpd]


def noisy_or_row(cpd: NoisyOrCpd, parent_values) -> np.ndarray:
    """Distribution over {0, 1} for one parent assignment."""
    if len(parent_values) != len(cpd.q):
        raise ModelError(f"{cpd.child}: expected {len(cpd.q)} parent values")
    p0 = cpd.leak_q
    for v, q in zip(parent_values, cpd.q):
        if v:
            p0 *= q
    return np.array([p0, 1.0 - p0])


def expand_table(cpd: Cpd) -> TableCpd:
    """Equivalent :class:`TableCpd` for any CPD kind."""
    if isinstance(cpd, TableCpd):
        return cpd
    return TableCpd(cpd.child, cpd.parents, cpd.parent_cards, cpd.table())


def uniform_table(child: str, parents, parent_cards, card: int) -> TableCpd:
    rows = int(np.prod(parent_cards)) if len(parent_cards) else 1
    return TableCpd(child, parents, parent_cards, np.full((rows, card), 1.0 / card))


# ---------------------------------------------------------------------------
# the DPN


@dataclass(frozen=True, eq=False)
class Dpn:
    structure: DpnStructure
    prior_cpds: Mapping = field(default_factory=dict)
    transition_cpds: Mapping = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "prior_cpds", dict(self.prior_cpds))
        object.__setattr__(self, "transition_cpds", dict(self.transition_cpds))

    def cpd(self, child: str, segment: str) -> Cpd:
        return (self.prior_cpds if segment == PRIOR else self.transition_cpds)[child]

    def cpds(self, segment: str) -> dict:
        return self.prior_cpds if segment == PRIOR else self.transition_cpds

    def with_cpds(self, segment: str, updates: Mapping) -> "Dpn":
        cpds = dict(self.cpds(segment))
        cpds.update(updates)
        if segment == PRIOR:
            return Dpn(self.structure, cpds, self.transition_cpds)
        return Dpn(self.structure, self.prior_cpds, cpds)


def uniform_dpn(structure: DpnStructure) -> Dpn:
    """Every family a uniform table."""
    cpds = {}
    for seg in SEGMENTS:
        cpds[seg] = {
            name: uniform_table(
                name,
                pa,
                tuple(structure.cardinality(p[0]) for p in pa),
                structure.cardinality(name),
            )
            for name, pa in structure.families(seg)
        }
    return Dpn(structure, cpds[PRIOR], cpds[TRANSITION])


def validate(dpn: Dpn) -> str | None:
    """Return the first violated invariant of ``dpn`` as a message, or None."""
    s = dpn.structure
    problem = structure_problems(s)
    if problem:
        return problem
    for seg in SEGMENTS:
        cpds = dpn.cpds(seg)
        for name, pa in s.families(seg):
            if name not in cpds:
                return f"{seg} {name}: missing CPD"
            cpd = cpds[name]
            if cpd.child != name:
                return f"{seg} {name}: CPD child is {cpd.child}"
            if set(cpd.parents) != set(pa) or len(cpd.parents) != len(pa):
                return f"{seg} {name}: CPD parents do not match structure"
            cards = tuple(s.cardinality(p[0]) for p in cpd.parents)
            if tuple(cpd.parent_cards) != cards:
                return f"{seg} {name}: parent cardinalities do not match"
            if cpd.card != s.cardinality(name):
                return f"{seg} {name}: child cardinality does not match"
            if isinstance(cpd, NoisyOrCpd) or (
                isinstance(cpd, FrozenSwitchCpd) and isinstance(cpd.base, NoisyOrCpd)
            ):
                nor = cpd if isinstance(cpd, NoisyOrCpd) else cpd.base
                if any(c != 2 for c in cards) or cpd.card != 2:
                    return f"{seg} {name}: noisy-OR family must be binary"
                if len(nor.q) != len(nor.parents) or len(nor.fixed) != len(nor.q):
                    return f"{seg} {name}: q length does not match parent count"
                if any(not 0.0 <= x <= 1.0 for x in nor.q + (nor.leak_q,)):
                    return f"{seg} {name}: probability outside [0, 1]"
            table = cpd.table()
            rows = int(np.prod(cards)) if cards else 1
            if table.shape != (rows, s.cardinality(name)):
                return f"{seg} {name}: table shape {table.shape} != {(rows, s.cardinality(name))}"
            if np.any(table < 0.0) or np.any(table > 1.0):
                return f"{seg} {name}: entry outside [0, 1]"
            if np.any(np.abs(table.sum(axis=1) - 1.0) > ROW_TOL):
                return f"{seg} {name}: row not normalized"
        extra = set(cpds) - set(s.names)
        if extra:
            return f"{seg}: CPDs for unknown variables {sorted(extra)}"
    return None


def unroll(structure: DpnStructure, T: int):
    """Static DAG over slices ``0..T`` as ``(nodes, edges)``.

    Nodes are ``(name, t)``; edges are ``(parent node, child node)``.
    """
    if T < 0:
        raise ModelError("T must be >= 0")
    nodes = [(name, t) for t in range(T + 1) for name in structure.names]
    edges = {((a, 0), (b, 0)) for a, b in structure.prior_edges}
    for t in range(T):
        for src, dst in structure.transition_edges:
            edges.add(((src[0], t + src[1]), (dst[0], t + 1)))
    return nodes, edges


def _check_trajectory(structure: DpnStructure, trajectory) -> np.ndarray:
    traj = np.asarray(trajectory)
    if traj.ndim != 2 or traj.shape[1] != structure.n:
        raise ModelError(f"trajectory must have shape (T+1, {structure.n})")
    cards = np.array(structure.cards)
    if np.any(traj < 0) or np.any(traj >= cards[None, :]):
        raise ModelError("trajectory value out of range")
    return traj.astype(np.int64)


def joint_log_prob(dpn: Dpn, trajectory) -> float:
    """Log-probability of a fully observed trajectory, ``-inf`` if impossible."""
    s = dpn.structure
    traj = _check_trajectory(s, trajectory)
    total = 0.0
    for name in s.names:
        cpd = dpn.prior_cpds[name]
        vals = [traj[0, s.index(p[0])] for p in cpd.parents]
        total += _log(cpd.table()[config_index(vals, cpd.parent_cards), traj[0, s.index(name)]])
    for t in range(traj.shape[0] - 1):
        for name in s.names:
            cpd = dpn.transition_cpds[name]
            vals = [traj[t + p[1], s.index(p[0])] for p in cpd.parents]
            p = cpd.table()[config_index(vals, cpd.parent_cards), traj[t + 1, s.index(name)]]
            total += _log(p)
        if total == -math.inf:
            break
    return total
