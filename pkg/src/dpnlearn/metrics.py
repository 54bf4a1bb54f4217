"""Logloss per slice, structural Hamming distance, and relative logloss."""
from __future__ import annotations

import math

from .dataset import SequenceDataset
from .inference import sequence_log_likelihoods
from .model import PRIOR, SEGMENTS, TRANSITION, Dpn, DpnStructure


def logloss_bits_per_slice(dpn: Dpn, test: SequenceDataset, cap: int | None = None) -> float:
    """Bits needed per slice: total negative log2-likelihood over total slices.

    Every slice counts, including slice 0. A zero-probability sequence gives
    ``inf``.
    """
    slices = test.n_slices
    if slices == 0:
        raise ValueError("empty test set")
    lls = sequence_log_likelihoods(dpn, test, cap)
    if any(ll == -math.inf for ll in lls):
        return math.inf
    return -sum(lls) / math.log(2) / slices


def _strip(structure: DpnStructure, ignore) -> dict:
    out = {}
    for seg in SEGMENTS:
        out[seg] = {
            (src, child) for src, child in structure.edges(seg)
            if src[0] not in ignore and child not in ignore
        }
    return out


def hamming_breakdown(a: DpnStructure, b: DpnStructure, ignore=()) -> dict:
    """Symmetric-difference sizes per segment plus ``total``.

    Arcs touching a variable in ``ignore`` (e.g. a switch) are dropped first.
    """
    ignore = set(ignore)
    if [n for n in a.names if n not in ignore] != [n for n in b.names if n not in ignore]:
        raise ValueError("structures are over different variables")
    ea, eb = _strip(a, ignore), _strip(b, ignore)
    out = {seg: len(ea[seg] ^ eb[seg]) for seg in SEGMENTS}
    out["total"] = out[PRIOR] + out[TRANSITION]
    return out


def hamming(a: DpnStructure, b: DpnStructure, ignore=()) -> int:
    return hamming_breakdown(a, b, ignore)["total"]


def relative_logloss(learned: Dpn, generating: Dpn, test: SequenceDataset, cap: int | None = None) -> float:
    return logloss_bits_per_slice(learned, test, cap) - logloss_bits_per_slice(generating, test, cap)
