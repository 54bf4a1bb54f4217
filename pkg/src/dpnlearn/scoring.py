"""BIC and BDe scores over (possibly expected) sufficient statistics.

Logs are natural. Both scores decompose into one term per family, keyed
``(segment, child)`` in the returned breakdowns.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .dataset import SufficientStats
from .model import (
    PRIOR,
    SEGMENTS,
    TRANSITION,
    Dpn,
    DpnStructure,
    FrozenSwitchCpd,
    NoisyOrCpd,
    TableCpd,
)

BIC = "bic"
BDE = "bde"


class ScoreError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ScoreConfig:
    kind: str = BIC
    prior_dpn: Dpn | None = None
    ess_prior: float = 1.0
    ess_transition: float = 1.0
    structure_penalty_per_edge: float = 0.0

    def __post_init__(self):
        if self.kind not in (BIC, BDE):
            raise ScoreError(f"unknown score {self.kind!r}")
        if self.kind == BDE:
            if self.ess_prior <= 0 or self.ess_transition <= 0:
                raise ScoreError("equivalent sample sizes must be > 0")
            if self.structure_penalty_per_edge < 0:
                raise ScoreError("edge penalty must be >= 0")

    def ess(self, segment: str) -> float:
        return self.ess_prior if segment == PRIOR else self.ess_transition


# ---------------------------------------------------------------------------
# likelihood pieces


def family_loglik(counts: np.ndarray, table: np.ndarray) -> float:
    """``sum N log theta`` with ``0 log 0 = 0``; ``-inf`` if data hits a zero."""
    counts = np.asarray(counts, dtype=float)
    hit = counts > 0
    if not hit.any():
        return 0.0
    theta = np.asarray(table)[hit]
    if np.any(theta <= 0.0):
        return -math.inf
    return float(np.sum(counts[hit] * np.log(theta)))


def mle_table(counts: np.ndarray) -> np.ndarray:
    """Row-normalized counts; rows without data become uniform."""
    counts = np.asarray(counts, dtype=float)
    tot = counts.sum(axis=1, keepdims=True)
    out = np.full_like(counts, 1.0 / counts.shape[1])
    seen = tot[:, 0] > 0
    out[seen] = counts[seen] / tot[seen]
    return out


def family_loglik_mle(counts: np.ndarray) -> float:
    return family_loglik(counts, mle_table(counts))


def mle_params(stats: SufficientStats, structure: DpnStructure | None = None) -> Dpn:
    """Table CPDs at the multinomial maximum-likelihood estimate."""
    structure = structure or stats.structure
    cpds = {}
    for seg in SEGMENTS:
        cpds[seg] = {}
        for child, pa in structure.families(seg):
            cards = tuple(structure.cardinality(p[0]) for p in pa)
            cpds[seg][child] = TableCpd(child, pa, cards, mle_table(stats.counts(child, seg)))
    return Dpn(structure, cpds[PRIOR], cpds[TRANSITION])


def table_dimension(parent_cards, card: int) -> int:
    return int(np.prod(parent_cards)) * (card - 1) if len(parent_cards) else card - 1


def family_dimension(cpd) -> int:
    """Free parameters of one family's CPD."""
    if isinstance(cpd, FrozenSwitchCpd):
        return family_dimension(cpd.base)
    if isinstance(cpd, NoisyOrCpd):
        return len(cpd.q) + (0 if cpd.leak_fixed else 1)
    if getattr(cpd, "frozen", False):
        return 0
    return table_dimension(cpd.parent_cards, cpd.card)


def dimension(structure: DpnStructure, dpn: Dpn | None = None) -> tuple:
    """``(#G0, #G->)``: table parameter counts, or the CPDs' own counts if ``dpn``."""
    out = []
    for seg in SEGMENTS:
        d = 0
        for child, pa in structure.families(seg):
            if dpn is not None:
                d += family_dimension(dpn.cpd(child, seg))
            else:
                d += table_dimension([structure.cardinality(p[0]) for p in pa], structure.cardinality(child))
        out.append(d)
    return tuple(out)


def bic_weight(segment: str, n_seq: float, n_transitions: float) -> float:
    """Penalty per parameter, ``log(n)/2``; zero when the segment saw no data."""
    n = n_seq if segment == PRIOR else n_transitions
    return math.log(n) / 2.0 if n > 0 else 0.0


def bic_score(stats: SufficientStats, structure: DpnStructure | None = None,
              n_seq: float | None = None, n_transitions: float | None = None,
              dpn: Dpn | None = None):
    """BIC of ``structure`` from ``stats``.

    With ``dpn`` the log-likelihood is taken at its parameters (and its CPD
    kinds set the dimension); otherwise at the table MLE.

    Returns ``(total, breakdown)`` where ``breakdown[(segment, child)]`` is
    that family's log-likelihood minus its penalty.
    """
    structure = structure or stats.structure
    n_seq = stats.n_seq if n_seq is None else n_seq
    n_transitions = stats.n_transitions if n_transitions is None else n_transitions
    breakdown = {}
    for seg in SEGMENTS:
        w = bic_weight(seg, n_seq, n_transitions)
        for child, pa in structure.families(seg):
            counts = stats.counts(child, seg)
            if dpn is None:
                ll = family_loglik_mle(counts)
                dim = table_dimension([structure.cardinality(p[0]) for p in pa], structure.cardinality(child))
            else:
                cpd = dpn.cpd(child, seg)
                ll = family_loglik(counts, cpd.table())
                dim = family_dimension(cpd)
            if seg == TRANSITION and n_transitions == 0:
                breakdown[(seg, child)] = 0.0
            else:
                breakdown[(seg, child)] = ll - w * dim
    return sum(breakdown.values()), breakdown


# ---------------------------------------------------------------------------
# BDe


class BdePrior:
    """Dirichlet hyperparameters for any family, derived from a prior DPN.

    ``N'(j, k) = ESS * P'(child = k, parents = j)`` under the prior DPN; the
    transition joint puts the prior network's slice-0 distribution on
    ``X[0]``.
    """

    def __init__(self, config: ScoreConfig, structure: DpnStructure):
        from .inference import compile_dpn

        if config.prior_dpn is None:
            from .model import uniform_dpn

            prior = uniform_dpn(DpnStructure(structure.variables))
        else:
            prior = config.prior_dpn
        ps = prior.structure
        if ps.names != structure.names or ps.cards != structure.cards:
            raise ScoreError("prior DPN must be over the same variables")
        self.config = config
        self.chain = compile_dpn(prior)
        self._pair = self.chain.initial_dist[:, None] * self.chain.transition_matrix
        self._cache = {}

    def hyper(self, child: str, parents, segment: str) -> np.ndarray:
        key = (child, tuple(parents), segment)
        out = self._cache.get(key)
        if out is None:
            w = self.chain.initial_dist if segment == PRIOR else self._pair
            out = self.config.ess(segment) * self.chain.marginalize(w, child, parents, segment)
            self._cache[key] = out
        return out


def bde_hyperparams(structure: DpnStructure, config: ScoreConfig) -> SufficientStats:
    bp = BdePrior(config, structure)
    prior = {c: bp.hyper(c, pa, PRIOR) for c, pa in structure.families(PRIOR)}
    trans = {c: bp.hyper(c, pa, TRANSITION) for c, pa in structure.families(TRANSITION)}
    return SufficientStats(structure, prior, trans, config.ess_prior, config.ess_transition)


def bde_family_score(counts: np.ndarray, hyper: np.ndarray) -> float:
    """Log marginal likelihood of one family's counts under Dirichlet ``hyper``."""
    hyper = np.asarray(hyper, dtype=float)
    counts = np.asarray(counts, dtype=float)
    if np.any(hyper <= 0.0):
        raise ScoreError("BDe hyperparameters must be strictly positive")
    a = hyper.sum(axis=1)
    n = counts.sum(axis=1)
    return float(
        np.sum(gammaln(a) - gammaln(a + n)) + np.sum(gammaln(hyper + counts) - gammaln(hyper))
    )


def bde_score(stats: SufficientStats, structure: DpnStructure | None = None,
              config: ScoreConfig | None = None):
    """Log BDe score plus per-edge structure penalty, with per-family breakdown."""
    structure = structure or stats.structure
    config = config or ScoreConfig(BDE)
    bp = BdePrior(config, structure)
    breakdown = {}
    for seg in SEGMENTS:
        for child, pa in structure.families(seg):
            term = bde_family_score(stats.counts(child, seg), bp.hyper(child, pa, seg))
            breakdown[(seg, child)] = term - config.structure_penalty_per_edge * len(pa)
    return sum(breakdown.values()), breakdown
