"""DPN files: JSON documents holding variables, both graphs, and every CPD.

Floats are written with ``repr`` precision, so save/load round-trips
exactly.
"""
from __future__ import annotations

import json
from pathlib import Path

from .model import (
    PRIOR,
    SEGMENTS,
    TRANSITION,
    Dpn,
    DpnStructure,
    FrozenSwitchCpd,
    ModelError,
    NoisyOrCpd,
    TableCpd,
    VariableSpec,
    format_node,
    parse_node,
    validate,
)

FORMAT = "dpnlearn-dpn"
VERSION = 1


def _cpd_to_json(cpd) -> dict:
    if isinstance(cpd, FrozenSwitchCpd):
        return {"kind": "switch", "switch": cpd.switch, "base": _cpd_to_json(cpd.base)}
    parents = [format_node(p) for p in cpd.parents]
    if isinstance(cpd, NoisyOrCpd):
        return {
            "kind": "noisy-or",
            "parents": parents,
            "q": list(cpd.q),
            "fixed": list(cpd.fixed),
            "leak_q": cpd.leak_q,
            "leak_fixed": cpd.leak_fixed,
        }
    out = {"kind": "table", "parents": parents, "probs": cpd.probs.tolist()}
    if cpd.frozen:
        out["frozen"] = True
    return out


def _cpd_from_json(child: str, obj: dict, structure: DpnStructure):
    kind = obj.get("kind")
    if kind == "switch":
        return FrozenSwitchCpd(child, obj["switch"], _cpd_from_json(child, obj["base"], structure))
    parents = [parse_node(p) for p in obj.get("parents", [])]
    if kind == "noisy-or":
        return NoisyOrCpd(
            child, parents, obj["q"], obj.get("leak_q", 1.0),
            obj.get("fixed", [False] * len(parents)), obj.get("leak_fixed", False),
        )
    if kind == "table":
        cards = [structure.cardinality(p[0]) for p in parents]
        return TableCpd(child, parents, cards, obj["probs"], bool(obj.get("frozen", False)))
    raise ModelError(f"{child}: unknown CPD kind {kind!r}")


def structure_to_json(structure: DpnStructure) -> dict:
    return {
        "variables": [
            {"name": v.name, "cardinality": v.cardinality, "role": v.role} for v in structure.variables
        ],
        "prior_edges": sorted([a, b] for a, b in structure.prior_edges),
        "transition_edges": sorted(
            [format_node(a), format_node(b)] for a, b in structure.transition_edges
        ),
    }


def structure_from_json(obj: dict) -> DpnStructure:
    variables = tuple(VariableSpec(v["name"], int(v["cardinality"]), v.get("role", "observed"))
                      for v in obj["variables"])
    prior = frozenset((a, b) for a, b in obj.get("prior_edges", []))
    trans = frozenset((parse_node(a, 0), parse_node(b, 1)) for a, b in obj.get("transition_edges", []))
    return DpnStructure(variables, prior, trans)


def dpn_to_json(dpn: Dpn) -> dict:
    out = {"format": FORMAT, "version": VERSION}
    out.update(structure_to_json(dpn.structure))
    for seg in SEGMENTS:
        out[f"{seg}_cpds"] = {c: _cpd_to_json(cpd) for c, cpd in dpn.cpds(seg).items()}
    return out


def dpn_from_json(obj: dict) -> Dpn:
    if obj.get("format") != FORMAT:
        raise ModelError("not a DPN document")
    structure = structure_from_json(obj)
    cpds = {}
    for seg in SEGMENTS:
        raw = obj.get(f"{seg}_cpds", {})
        cpds[seg] = {c: _cpd_from_json(c, raw[c], structure) for c in raw}
    dpn = Dpn(structure, cpds[PRIOR], cpds[TRANSITION])
    problem = validate(dpn)
    if problem:
        raise ModelError(problem)
    return dpn


def save_dpn(dpn: Dpn, path) -> None:
    Path(path).write_text(json.dumps(dpn_to_json(dpn), indent=1) + "\n")


def load_dpn(path) -> Dpn:
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ModelError(f"{path}: {exc}") from None
    return dpn_from_json(obj)
