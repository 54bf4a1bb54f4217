"""Pathway models, their DPN encoding, and seeded ancestral sampling."""
from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .dataset import MISSING, DataError, SequenceDataset
from .model import (
    PRIOR,
    TRANSITION,
    Dpn,
    DpnStructure,
    NoisyOrCpd,
    TableCpd,
    VariableSpec,
)

REFERENCE_PATHWAY = "reference_pathway.txt"


@dataclass(frozen=True)
class PathwayModel:
    """Binary sites with trigger arcs ``(u, v) -> q`` and spontaneous-on rates.

    ``q`` is the probability that an active ``u`` fails to switch ``v`` on in
    one step. Cycles are allowed.
    """

    vertices: tuple
    edges: dict = field(default_factory=dict)
    spontaneous: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "vertices", tuple(self.vertices))
        vs = set(self.vertices)
        if len(vs) != len(self.vertices):
            raise ValueError("duplicate vertex names")
        for (u, v), q in self.edges.items():
            if u not in vs or v not in vs:
                raise ValueError(f"edge {u}->{v} uses an unknown vertex")
            if u == v:
                raise ValueError(f"self-trigger on {u}")
            if not 0.0 <= q <= 1.0:
                raise ValueError(f"edge {u}->{v}: q = {q} outside [0, 1]")
        for v, p in self.spontaneous.items():
            if v not in vs:
                raise ValueError(f"spontaneous rate for unknown vertex {v}")
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"spontaneous rate of {v} outside [0, 1]")

    def with_spontaneous(self, rates: dict) -> "PathwayModel":
        return PathwayModel(self.vertices, dict(self.edges), {**self.spontaneous, **rates})


def parse_pathway(text: str, source: str = "<pathway>") -> PathwayModel:
    vertices, edges, spont = None, {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tok = line.split()
        try:
            if tok[0] == "vertices":
                vertices = tok[1:]
            elif tok[0] == "edge" and len(tok) == 4:
                edges[(tok[1], tok[2])] = float(tok[3])
            elif tok[0] == "spontaneous" and len(tok) == 3:
                spont[tok[1]] = float(tok[2])
            else:
                raise DataError(f"{source}:{lineno}: cannot parse {raw!r}")
        except ValueError as exc:
            raise DataError(f"{source}:{lineno}: {exc}") from None
    if vertices is None:
        raise DataError(f"{source}: missing 'vertices' line")
    try:
        return PathwayModel(vertices, edges, spont)
    except ValueError as exc:
        raise DataError(f"{source}: {exc}") from None


def load_pathway(path) -> PathwayModel:
    return parse_pathway(Path(path).read_text(), str(path))


def save_pathway(model: PathwayModel, path) -> None:
    lines = ["vertices " + " ".join(model.vertices)]
    lines += [f"edge {u} {v} {q!r}" for (u, v), q in model.edges.items()]
    lines += [f"spontaneous {v} {p!r}" for v, p in model.spontaneous.items()]
    Path(path).write_text("\n".join(lines) + "\n")


def make_reference_model(spontaneous: float | None = None) -> PathwayModel:
    """The shipped five-site pathway; ``spontaneous`` overrides the root rate."""
    text = resources.files("dpnlearn.data").joinpath(REFERENCE_PATHWAY).read_text()
    model = parse_pathway(text, REFERENCE_PATHWAY)
    if spontaneous is not None:
        roots = [v for v, p in model.spontaneous.items() if p > 0]
        model = model.with_spontaneous({v: spontaneous for v in roots})
    return model


def pathway_structure(model: PathwayModel) -> DpnStructure:
    names = model.vertices
    trans = {((v, 0), (v, 1)) for v in names}
    trans |= {((u, 0), (v, 1)) for (u, v) in model.edges}
    return DpnStructure(tuple(VariableSpec(v) for v in names), frozenset(), frozenset(trans))


def pathway_to_dpn(model: PathwayModel) -> Dpn:
    """Noisy-OR DPN with strict persistence, starting from all sites off."""
    structure = pathway_structure(model)
    prior = {v: TableCpd(v, [], [], [[1.0, 0.0]]) for v in model.vertices}
    trans = {}
    for v in model.vertices:
        parents = structure.parents(v, TRANSITION)
        q = [0.0 if p == (v, 0) else model.edges[(p[0], v)] for p in parents]
        fixed = [p == (v, 0) for p in parents]
        trans[v] = NoisyOrCpd(v, parents, q, 1.0 - model.spontaneous.get(v, 0.0), fixed)
    return Dpn(structure, prior, trans)


# ---------------------------------------------------------------------------
# sampling


def _plan(dpn: Dpn, segment: str):
    s = dpn.structure
    plan = []
    for name in s.topological_order(segment):
        cpd = dpn.cpd(name, segment)
        cum = np.cumsum(cpd.table(), axis=1)
        cum[:, -1] = np.inf
        # slice tag 1 reads the slice being drawn; prior parents live there
        cols = [(s.index(p[0]), 1 if segment == PRIOR else p[1]) for p in cpd.parents]
        strides = np.ones(len(cols), dtype=np.int64)
        for k in range(len(cols) - 2, -1, -1):
            strides[k] = strides[k + 1] * cpd.parent_cards[k + 1]
        plan.append((s.index(name), cols, strides, cum))
    return plan


def _draw(plan, prev, cur, u):
    for ci, cols, strides, cum in plan:
        j = 0
        for (col, t), st in zip(cols, strides):
            j += st * (prev[col] if t == 0 else cur[col])
        cur[ci] = int(np.searchsorted(cum[j], u[ci], side="right"))


def sample_trajectory(dpn: Dpn, T: int, rng, plans=None) -> np.ndarray:
    """One trajectory of ``T + 1`` slices, all variables filled in."""
    p0, pt = plans or (_plan(dpn, PRIOR), _plan(dpn, TRANSITION))
    n = dpn.structure.n
    u = rng.random((T + 1, n))
    out = np.zeros((T + 1, n), dtype=np.int16)
    _draw(p0, None, out[0], u[0])
    for t in range(1, T + 1):
        _draw(pt, out[t - 1], out[t], u[t])
    return out


def sample(dpn: Dpn, T: int, n_sequences: int, rng_seed: int = 0, keep_hidden: bool = False) -> SequenceDataset:
    """``n_sequences`` trajectories of ``T + 1`` slices.

    Sequence ``i`` draws from its own stream seeded by ``(rng_seed, i)``.
    Hidden-role variables are blanked unless ``keep_hidden``.
    """
    if T < 0:
        raise ValueError("T must be >= 0")
    if n_sequences < 0:
        raise ValueError("n_sequences must be >= 0")
    plans = (_plan(dpn, PRIOR), _plan(dpn, TRANSITION))
    s = dpn.structure
    hidden = [j for j, v in enumerate(s.variables) if v.hidden]
    seqs = []
    for i in range(n_sequences):
        rng = np.random.default_rng([rng_seed, i])
        traj = sample_trajectory(dpn, T, rng, plans)
        if hidden and not keep_hidden:
            traj[:, hidden] = MISSING
        seqs.append(traj)
    variables = s.variables
    if keep_hidden:
        variables = tuple(VariableSpec(v.name, v.cardinality) for v in variables)
    return SequenceDataset(variables, seqs)
