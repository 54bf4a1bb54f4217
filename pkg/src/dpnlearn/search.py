"""Greedy hill-climbing over DPN structures with decomposed, cached family scores.

The prior and transition graphs are searched independently. Arcs are
written ``(segment, source node, child name)``; a transition arc's source
node is ``(name, 0)`` for an inter-slice arc and ``(name, 1)`` for an
intra-slice one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

from .model import PRIOR, SEGMENTS, TRANSITION, DpnStructure, format_node, parse_node

ADD, DELETE, REVERSE = "add", "delete", "reverse"
_RANK = {ADD: 0, DELETE: 1, REVERSE: 2}
EPS = 1e-9
DEFAULT_MAX_PARENTS = 5

FamilyScorer = Callable[[str, tuple, str], float]


def arc(segment: str, source, child: str) -> tuple:
    """Normalize an arc; ``source`` may be ``"A[0]"`` or ``("A", 0)``."""
    if isinstance(source, str):
        source = parse_node(source, 0)
    return (segment, (str(source[0]), int(source[1])), str(child))


def persistence_arcs(names: Iterable[str]) -> frozenset:
    return frozenset(arc(TRANSITION, (n, 0), n) for n in names)


@dataclass(frozen=True)
class SearchConstraints:
    max_parents: int | None = DEFAULT_MAX_PARENTS
    forced_arcs: frozenset = frozenset()
    forbidden_arcs: frozenset = frozenset()
    allow_intra_slice1: bool = True

    def __post_init__(self):
        object.__setattr__(self, "forced_arcs", frozenset(arc(*a) for a in self.forced_arcs))
        object.__setattr__(self, "forbidden_arcs", frozenset(arc(*a) for a in self.forbidden_arcs))
        both = self.forced_arcs & self.forbidden_arcs
        if both:
            raise ValueError(f"arcs both forced and forbidden: {sorted(both)}")

    def apply_forced(self, structure: DpnStructure) -> DpnStructure:
        """Add any missing forced arcs to ``structure``."""
        for seg in SEGMENTS:
            want = {(a[1], a[2]) for a in self.forced_arcs if a[0] == seg}
            have = structure.edges(seg)
            if not want <= have:
                structure = structure.with_edges(seg, have | want)
        return structure


@dataclass(frozen=True)
class Move:
    kind: str
    segment: str
    source: tuple  # node
    child: str

    def key(self, structure: DpnStructure) -> tuple:
        return (
            _RANK[self.kind],
            structure.index(self.child),
            structure.index(self.source[0]),
            self.source[1],
        )

    def __str__(self):
        return f"{self.kind} {self.segment} {format_node(self.source)}->{self.child}"


def _reaches(adj: dict, start: str, goal: str) -> bool:
    stack, seen = [start], {start}
    while stack:
        u = stack.pop()
        if u == goal:
            return True
        for v in adj.get(u, ()):
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return False


def _same_slice_adj(edges, segment: str) -> dict:
    adj = {}
    for src, dst in edges:
        if segment == PRIOR or src[1] == 1:
            adj.setdefault(src[0], set()).add(dst)
    return adj


def _is_same_slice(segment: str, source) -> bool:
    return segment == PRIOR or source[1] == 1


def apply_move(structure: DpnStructure, move: Move) -> DpnStructure:
    edges = set(structure.edges(move.segment))
    e = (move.source, move.child)
    if move.kind == ADD:
        edges.add(e)
    elif move.kind == DELETE:
        edges.discard(e)
    else:
        edges.discard(e)
        edges.add(((move.child, move.source[1]), move.source[0]))
    return structure.with_edges(move.segment, edges)


def moves(structure: DpnStructure, constraints: SearchConstraints, segment: str) -> list:
    """All single-arc moves in ``segment`` that keep the structure valid."""
    edges = structure.edges(segment)
    adj = _same_slice_adj(edges, segment)
    nparents = {n: len(structure.parents(n, segment)) for n in structure.names}
    cap = constraints.max_parents
    out = []
    slices = (0,) if segment == PRIOR else ((0, 1) if constraints.allow_intra_slice1 else (0,))
    for child in structure.names:
        for t in slices:
            for src in structure.names:
                node = (src, t)
                if (node, child) in edges:
                    continue
                if _is_same_slice(segment, node) and src == child:
                    continue
                if arc(segment, node, child) in constraints.forbidden_arcs:
                    continue
                if cap is not None and nparents[child] >= cap:
                    continue
                if _is_same_slice(segment, node) and _reaches(adj, child, src):
                    continue
                out.append(Move(ADD, segment, node, child))
    for node, child in edges:
        a = arc(segment, node, child)
        if a in constraints.forced_arcs:
            continue
        out.append(Move(DELETE, segment, node, child))
        if not _is_same_slice(segment, node):
            continue
        rev_node = (child, node[1])
        if arc(segment, rev_node, node[0]) in constraints.forbidden_arcs:
            continue
        if cap is not None and nparents[node[0]] >= cap:
            continue
        # after removing node->child, a path child ~> node would close a cycle
        adj2 = {k: set(v) for k, v in adj.items()}
        adj2[node[0]].discard(child)
        if _reaches(adj2, node[0], child):
            continue
        out.append(Move(REVERSE, segment, node, child))
    out.sort(key=lambda m: m.key(structure))
    return out


def neighbors(structure: DpnStructure, constraints: SearchConstraints | None = None) -> list:
    """Structures one arc addition, deletion, or reversal away."""
    constraints = constraints or SearchConstraints()
    return [apply_move(structure, m) for seg in SEGMENTS for m in moves(structure, constraints, seg)]


class FamilyScoreCache:
    """Memoizes a family scorer by ``(child, parent set, segment)``."""

    def __init__(self, scorer: FamilyScorer):
        self.scorer = scorer
        self._store = {}
        self.hits = 0
        self.misses = 0

    def __call__(self, child: str, parents: tuple, segment: str) -> float:
        key = (child, frozenset(parents), segment)
        val = self._store.get(key)
        if val is None:
            self.misses += 1
            val = self.scorer(child, tuple(parents), segment)
            self._store[key] = val
        else:
            self.hits += 1
        return val

    def __len__(self):
        return len(self._store)


def structure_score(structure: DpnStructure, scorer: FamilyScorer, segments=SEGMENTS) -> float:
    return sum(scorer(c, pa, seg) for seg in segments for c, pa in structure.families(seg))


@dataclass
class SearchResult:
    structure: DpnStructure
    score: float
    trace: list = field(default_factory=list)
    moves: list = field(default_factory=list)
    structures: list = field(default_factory=list)


def move_delta(structure: DpnStructure, move: Move, scorer: FamilyScorer) -> float:
    """Score change of ``move`` from the affected family terms only."""
    after = apply_move(structure, move)
    children = [move.child] + ([move.source[0]] if move.kind == REVERSE else [])
    seg = move.segment
    new = sum(scorer(c, after.parents(c, seg), seg) for c in children)
    old = sum(scorer(c, structure.parents(c, seg), seg) for c in children)
    if new == old:
        return 0.0
    delta = new - old
    return -math.inf if math.isnan(delta) else delta


def hill_climb(initial: DpnStructure, family_scorer: FamilyScorer,
               constraints: SearchConstraints | None = None, segments=SEGMENTS,
               eps: float = EPS) -> SearchResult:
    """Apply the best strictly improving move until none exceeds ``eps``.

    Ties (moves within ``eps`` of the best delta) are broken by
    ``(kind, child index, parent index, parent slice)``, adds before deletes
    before reversals.
    """
    constraints = constraints or SearchConstraints()
    scorer = family_scorer if isinstance(family_scorer, FamilyScoreCache) else FamilyScoreCache(family_scorer)
    current = constraints.apply_forced(initial)
    total = structure_score(current, scorer)
    result = SearchResult(current, total, [total], [], [current])
    for seg in segments:
        while True:
            best, best_delta = None, None
            scored = [(move_delta(current, m, scorer), m) for m in moves(current, constraints, seg)]
            if not scored:
                break
            best_delta = max(d for d, _ in scored)
            if not best_delta > eps:
                break
            tied = (m for d, m in scored if d > eps and d >= best_delta - eps)
            best = min(tied, key=lambda m: m.key(current))
            current = apply_move(current, best)
            total = structure_score(current, scorer)
            result.moves.append(best)
            result.trace.append(total)
            result.structures.append(current)
    result.structure = current
    result.score = total
    return result
