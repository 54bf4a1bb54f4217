"""Parametric EM, noisy-OR learning, and Structural EM for incomplete data.

Noisy-OR families are learned through the auxiliary-cause construction:
each arc ``j -> child`` gets a hidden binary cause that copies its parent
with probability ``1 - q_j`` and the child is the deterministic OR of the
causes plus a leak cause. The causes of one family are independent of the
rest of the network given the family's own values, so their posteriors
follow in closed form from the family's (expected) counts and EM on the
augmented model needs nothing beyond those counts. :func:`noisy_or_augmented`
builds the augmented table model explicitly as a cross-check.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .dataset import CompleteCounts, SequenceDataset
from .inference import Posterior, log_likelihood
from .model import (
    HIDDEN,
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
)
from .scoring import (
    BDE,
    BIC,
    BdePrior,
    ScoreConfig,
    ScoreError,
    bde_family_score,
    bic_weight,
    family_dimension,
    family_loglik,
    mle_table,
)
from .search import SearchConstraints, arc, hill_climb

log = logging.getLogger(__name__)

TABLE = "table"
NOISY_OR = "noisy-or"
CPD_KINDS = (TABLE, NOISY_OR)

NOISY_OR_FIT_ITERS = 1000
NOISY_OR_FIT_TOL = 1e-9


# ---------------------------------------------------------------------------
# noisy-OR parameter updates


def _active(k: int) -> np.ndarray:
    return np.array(list(itertools.product((0, 1), repeat=k)), dtype=float).reshape(2**k, k)


def noisy_or_step(cpd: NoisyOrCpd, counts: np.ndarray) -> NoisyOrCpd:
    """One EM step of the auxiliary-cause model on a family's count table."""
    counts = np.asarray(counts, dtype=float)
    k = len(cpd.q)
    act = _active(k)
    q = np.array(cpd.q)
    p0 = cpd.leak_q * np.prod(np.where(act > 0, q[None, :], 1.0), axis=1)
    n0, n1 = counts[:, 0], counts[:, 1]
    off = 1.0 - p0
    # expected "cause on" mass per unit of (1 - q): N1 / P(child = 1)
    ratio = np.divide(n1, off, out=np.zeros_like(n1), where=off > 0)
    tot = act.T @ (n0 + n1)
    on = (act.T @ ratio) * (1.0 - q)
    new_q = q.copy()
    upd = (tot > 0) & ~np.array(cpd.fixed, dtype=bool)
    new_q[upd] = 1.0 - on[upd] / tot[upd]
    leak = cpd.leak_q
    total = counts.sum()
    if not cpd.leak_fixed and total > 0:
        leak = 1.0 - float(ratio.sum()) * (1.0 - cpd.leak_q) / total
    return replace(
        cpd, q=tuple(float(x) for x in np.clip(new_q, 0.0, 1.0)), leak_q=min(max(leak, 0.0), 1.0)
    )


def fit_noisy_or(cpd: NoisyOrCpd, counts: np.ndarray, max_iters: int = NOISY_OR_FIT_ITERS,
                 tol: float = NOISY_OR_FIT_TOL) -> NoisyOrCpd:
    """Iterate :func:`noisy_or_step` to a fixed point on fixed counts."""
    for _ in range(max_iters):
        new = noisy_or_step(cpd, counts)
        delta = max([abs(a - b) for a, b in zip(new.q, cpd.q)] + [abs(new.leak_q - cpd.leak_q)])
        cpd = new
        if delta < tol:
            break
    return cpd


def _m_step_cpd(cpd, counts, noisy_or_iters: int = 1):
    if isinstance(cpd, TableCpd):
        if cpd.frozen:
            return cpd
        return replace(cpd, probs=mle_table(counts))
    if isinstance(cpd, NoisyOrCpd):
        if noisy_or_iters == 1:
            return noisy_or_step(cpd, counts)
        return fit_noisy_or(cpd, counts, noisy_or_iters)
    if isinstance(cpd, FrozenSwitchCpd):
        half = counts.shape[0] // 2
        return replace(cpd, base=_m_step_cpd(cpd.base, counts[:half], noisy_or_iters))
    raise TypeError(f"unsupported CPD {type(cpd).__name__}")


def m_step(dpn: Dpn, counts_source, noisy_or_iters: int = 1) -> Dpn:
    """Re-estimate every family of ``dpn`` from ``counts_source`` family counts.

    Noisy-OR families take ``noisy_or_iters`` auxiliary-cause updates on the
    fixed counts; any number of them raises the expected log-likelihood.
    """
    new = {}
    for seg in SEGMENTS:
        new[seg] = {}
        for child, cpd in dpn.cpds(seg).items():
            counts = counts_source.family_counts(child, cpd.parents, seg)
            new[seg][child] = _m_step_cpd(cpd, counts, noisy_or_iters)
    return Dpn(dpn.structure, new[PRIOR], new[TRANSITION])


def _em(dpn: Dpn, data: SequenceDataset, max_iters: int, tol: float, cap=None, noisy_or_iters: int = 1):
    trace = []
    post = Posterior(dpn, data, cap)
    trace.append(post.log_likelihood)
    for _ in range(max_iters):
        cand = m_step(dpn, post, noisy_or_iters)
        cand_post = Posterior(cand, data, cap)
        trace.append(cand_post.log_likelihood)
        dpn, post = cand, cand_post
        if trace[-1] - trace[-2] < tol:
            break
    return dpn, trace, post


def parametric_em(dpn: Dpn, data: SequenceDataset, max_iters: int = 100, tol: float = 1e-8,
                  cap: int | None = None, noisy_or_iters: int = 1):
    """EM over the parameters of a fixed structure.

    Returns ``(dpn, trace)``; ``trace[i]`` is the log-likelihood after ``i``
    M-steps and is non-decreasing up to rounding.
    """
    dpn, trace, _ = _em(dpn, data, max_iters, tol, cap, noisy_or_iters)
    return dpn, trace


def _noisy_or_families(dpn: Dpn):
    for seg in SEGMENTS:
        for child, cpd in dpn.cpds(seg).items():
            base = cpd.base if isinstance(cpd, FrozenSwitchCpd) else cpd
            if isinstance(base, NoisyOrCpd):
                yield seg, child, cpd


def noisy_or_em(dpn: Dpn, data: SequenceDataset, max_iters: int = 100, tol: float = 1e-8,
                cap: int | None = None, family_iters: int = NOISY_OR_FIT_ITERS) -> Dpn:
    """EM for a DPN with noisy-OR families (tables elsewhere are re-estimated too).

    Each M-step runs up to ``family_iters`` auxiliary-cause updates per
    noisy-OR family; ``family_iters=1`` is plain EM on the augmented model.
    """
    s = dpn.structure
    for seg, child, cpd in _noisy_or_families(dpn):
        cards = [s.cardinality(p[0]) for p in cpd.parents] + [s.cardinality(child)]
        if any(c != 2 for c in cards):
            raise ModelError(f"noisy-OR family {child} is not binary")
    return parametric_em(dpn, data, max_iters, tol, cap, family_iters)[0]


def noisy_or_augmented(dpn: Dpn):
    """Table model with explicit auxiliary causes for every noisy-OR transition family.

    Returns ``(augmented dpn, aux)`` where ``aux[(child, parent node)]`` names
    the cause variable of that arc and ``aux[(child, None)]`` its leak cause.
    Cause ``A`` of arc ``j -> child`` has ``P(A = 0 | parent = 1) = q_j`` and
    ``P(A = 1 | parent = 0) = 0``; the child is the OR of its causes.
    """
    s = dpn.structure
    variables = list(s.variables)
    prior_edges = set(s.prior_edges)
    trans_edges = set(s.transition_edges)
    prior_cpds = dict(dpn.prior_cpds)
    trans_cpds = dict(dpn.transition_cpds)
    aux = {}
    for child, cpd in dpn.transition_cpds.items():
        if not isinstance(cpd, NoisyOrCpd):
            continue
        causes = []
        for j, (p, q) in enumerate(zip(cpd.parents, cpd.q)):
            name = f"_aux_{child}_{j}"
            aux[(child, p)] = name
            variables.append(VariableSpec(name, 2, HIDDEN))
            trans_edges.discard((p, (child, 1)))
            trans_edges.add((p, (name, 1)))
            trans_cpds[name] = TableCpd(name, [p], [2], [[1.0, 0.0], [q, 1.0 - q]])
            causes.append(name)
        name = f"_aux_{child}_leak"
        aux[(child, None)] = name
        variables.append(VariableSpec(name, 2, HIDDEN))
        trans_cpds[name] = TableCpd(name, [], [], [[cpd.leak_q, 1.0 - cpd.leak_q]])
        causes.append(name)
        for c in causes:
            trans_edges.add(((c, 1), (child, 1)))
        rows = [
            [1.0, 0.0] if not any(cfg) else [0.0, 1.0]
            for cfg in itertools.product((0, 1), repeat=len(causes))
        ]
        trans_cpds[child] = TableCpd(child, [(c, 1) for c in causes], [2] * len(causes), rows, frozen=True)
    for v in variables[s.n:]:
        prior_cpds[v.name] = TableCpd(v.name, [], [], [[0.5, 0.5]])
    structure = DpnStructure(tuple(variables), frozenset(prior_edges), frozenset(trans_edges))
    return Dpn(structure, prior_cpds, trans_cpds), aux


# ---------------------------------------------------------------------------
# family scoring on (expected) counts


class FamilyFitter:
    """Scores and fits candidate families from a counts source.

    ``counts_source`` is anything with ``family_counts(child, parents,
    segment)`` plus ``n_seq`` and ``n_transitions``: a
    :class:`~dpnlearn.inference.Posterior` for expected counts or a
    :class:`~dpnlearn.dataset.CompleteCounts`.

    Results are cached per ``(child, parent set, segment)`` together with the
    fitted CPD, so the DPN assembled after a search carries exactly the
    parameters its score was computed with.
    """

    def __init__(self, counts_source, structure: DpnStructure, score: ScoreConfig | None = None,
                 cpd_kind: str = TABLE, warm: Dpn | None = None, strict_persistence: bool = False,
                 switch: str | None = None):
        if cpd_kind not in CPD_KINDS:
            raise ValueError(f"unknown CPD kind {cpd_kind!r}")
        self.source = counts_source
        self.structure = structure
        self.score = score or ScoreConfig()
        self.cpd_kind = cpd_kind
        self.warm = warm
        self.strict_persistence = strict_persistence
        self.switch = switch
        if self.score.kind == BDE:
            if cpd_kind != TABLE:
                raise ScoreError("BDe is defined for table CPDs only; use BIC for noisy-OR")
            if switch is not None:
                raise ScoreError("BDe is not supported with a switch variable")
            self.bde = BdePrior(self.score, structure)
        self._fixed = {}
        if warm is not None:
            for seg in SEGMENTS:
                for child, cpd in warm.cpds(seg).items():
                    if isinstance(cpd, TableCpd) and cpd.frozen:
                        self._fixed[(seg, child)] = cpd
        self._cache = {}

    def __call__(self, child: str, parents, segment: str) -> float:
        return self.fit(child, parents, segment)[0]

    def cpd(self, child: str, parents, segment: str):
        return self.fit(child, parents, segment)[1]

    def fit(self, child: str, parents, segment: str):
        parents = self.structure.sort_parents(parents)
        key = (child, frozenset(parents), segment)
        hit = self._cache.get(key)
        if hit is None:
            hit = self._fit(child, parents, segment)
            self._cache[key] = hit
        return hit

    def _penalty(self, segment: str, cpd) -> float:
        return bic_weight(segment, self.source.n_seq, self.source.n_transitions) * family_dimension(cpd)

    def _fit(self, child, parents, segment):
        s = self.structure
        counts = self.source.family_counts(child, parents, segment)
        fixed = self._fixed.get((segment, child))
        if fixed is not None:
            if set(fixed.parents) != set(parents):
                return -math.inf, fixed
            return family_loglik(counts, fixed.table()), fixed
        cards = tuple(s.cardinality(p[0]) for p in parents)
        if self.score.kind == BDE:
            cpd = TableCpd(child, parents, cards, mle_table(counts))
            term = bde_family_score(counts, self.bde.hyper(child, parents, segment))
            return term - self.score.structure_penalty_per_edge * len(parents), cpd
        if segment == TRANSITION and self.switch is not None and (self.switch, 0) in parents:
            base_parents = tuple(p for p in parents if p != (self.switch, 0))
            if (child, 0) not in base_parents:
                return -math.inf, None
            # the switch is the slowest parent of a switched table
            counts = self.source.family_counts(child, ((self.switch, 0),) + base_parents, segment)
            half = counts.shape[0] // 2
            base_cards = tuple(s.cardinality(p[0]) for p in base_parents)
            base = self._fit_base(child, base_parents, base_cards, counts[:half], segment)
            cpd = FrozenSwitchCpd(child, self.switch, base)
        else:
            cpd = self._fit_base(child, parents, cards, counts, segment)
        ll = family_loglik(counts, cpd.table())
        if segment == TRANSITION and self.source.n_transitions == 0:
            return 0.0, cpd
        return ll - self._penalty(segment, cpd), cpd

    def _fit_base(self, child, parents, cards, counts, segment):
        s = self.structure
        if segment == PRIOR or self.cpd_kind == TABLE:
            return TableCpd(child, parents, cards, mle_table(counts))
        if s.cardinality(child) != 2 or any(c != 2 for c in cards):
            raise ModelError(f"noisy-OR family {child} is not binary")
        init = self._warm_noisy_or(child)
        q, fixed = [], []
        for p in parents:
            if self.strict_persistence and p == (child, 0):
                q.append(0.0)
                fixed.append(True)
            else:
                q.append(init.get(p, 0.5))
                fixed.append(False)
        leak = init.get(None, 0.5)
        cpd = NoisyOrCpd(child, parents, q, leak, fixed)
        return fit_noisy_or(cpd, counts)

    def _warm_noisy_or(self, child) -> dict:
        if self.warm is None or child not in self.warm.transition_cpds:
            return {}
        cpd = self.warm.transition_cpds[child]
        if isinstance(cpd, FrozenSwitchCpd):
            cpd = cpd.base
        if not isinstance(cpd, NoisyOrCpd):
            return {}
        out = dict(zip(cpd.parents, cpd.q))
        out[None] = cpd.leak_q
        return out

    def build(self, structure: DpnStructure) -> Dpn:
        cpds = {}
        for seg in SEGMENTS:
            cpds[seg] = {c: self.cpd(c, pa, seg) for c, pa in structure.families(seg)}
        return Dpn(structure, cpds[PRIOR], cpds[TRANSITION])

    def total(self, structure: DpnStructure) -> float:
        return sum(self(c, pa, seg) for seg in SEGMENTS for c, pa in structure.families(seg))


def bic_penalty(dpn: Dpn, n_seq: float, n_transitions: float) -> float:
    return sum(
        bic_weight(seg, n_seq, n_transitions) * family_dimension(cpd)
        for seg in SEGMENTS
        for cpd in dpn.cpds(seg).values()
    )


def true_bic(dpn: Dpn, data: SequenceDataset, cap=None) -> float:
    """Observed-data log-likelihood minus the BIC penalty at ``dpn``'s CPD kinds."""
    return log_likelihood(dpn, data, cap) - bic_penalty(dpn, data.n_seq, data.n_transitions)


def expected_bic(dpn: Dpn, counts_source) -> float:
    """Expected complete-data BIC of ``dpn`` under the counts source's completion model."""
    total = 0.0
    for seg in SEGMENTS:
        for child, cpd in dpn.cpds(seg).items():
            counts = counts_source.family_counts(child, cpd.parents, seg)
            total += family_loglik(counts, cpd.table())
    return total - bic_penalty(dpn, counts_source.n_seq, counts_source.n_transitions)


# ---------------------------------------------------------------------------
# initialization helpers


def random_params(structure: DpnStructure, rng, cpd_kind: str = TABLE,
                  strict_persistence: bool = False) -> Dpn:
    """Random CPDs: Dirichlet(1) table rows; uniform noisy-OR parameters."""
    rng = np.random.default_rng(rng)
    cpds = {PRIOR: {}, TRANSITION: {}}
    for seg in SEGMENTS:
        for child, pa in structure.families(seg):
            cards = tuple(structure.cardinality(p[0]) for p in pa)
            card = structure.cardinality(child)
            if seg == TRANSITION and cpd_kind == NOISY_OR:
                q = [0.0 if strict_persistence and p == (child, 0) else float(rng.uniform()) for p in pa]
                fixed = [strict_persistence and p == (child, 0) for p in pa]
                cpds[seg][child] = NoisyOrCpd(child, pa, q, float(rng.uniform()), fixed)
            else:
                rows = int(np.prod(cards)) if cards else 1
                cpds[seg][child] = TableCpd(child, pa, cards, rng.dirichlet(np.ones(card), size=rows))
    return Dpn(structure, cpds[PRIOR], cpds[TRANSITION])


def hidden_init(observed, n_hidden: int, hidden_cardinality: int = 2, rng_seed=0,
                prefix: str = "H") -> Dpn:
    """Initial model with hidden drivers.

    Each hidden ``H`` gets ``H[0] -> H[1]`` and ``H[t] -> O[t]`` for every
    observable ``O`` in both networks; observables carry no persistence
    arcs. CPD rows are Dirichlet(1) draws from ``rng_seed``.
    """
    if isinstance(observed, DpnStructure):
        observed = observed.variables
    observed = [v if isinstance(v, VariableSpec) else VariableSpec(str(v)) for v in observed]
    hidden = [VariableSpec(f"{prefix}{i}", hidden_cardinality, HIDDEN) for i in range(n_hidden)]
    prior_edges, trans_edges = set(), set()
    for h in hidden:
        trans_edges.add(((h.name, 0), (h.name, 1)))
        for o in observed:
            prior_edges.add((h.name, o.name))
            trans_edges.add(((h.name, 1), (o.name, 1)))
    structure = DpnStructure(tuple(observed) + tuple(hidden), frozenset(prior_edges), frozenset(trans_edges))
    return random_params(structure, rng_seed)


def switch_p_on(T: int = 20, confidence: float = 0.95) -> float:
    """Per-step switch-on probability making ``P(on by slice T) >= confidence``."""
    return 1.0 - (1.0 - confidence) ** (1.0 / T)


def add_switch(dpn: Dpn, p_on: float | None = None, name: str = "S") -> Dpn:
    """Augment ``dpn`` with a hidden switch that freezes the dynamics once on.

    The switch starts off, turns on with probability ``p_on`` per step and
    stays on. Every other transition family gains ``S[0]`` as its slowest
    parent; families without a persistence parent receive one that their
    original CPD ignores.
    """
    if p_on is None:
        p_on = switch_p_on()
    s = dpn.structure
    if name in s.names:
        raise ModelError(f"variable {name!r} already exists")
    variables = s.variables + (VariableSpec(name, 2, HIDDEN),)
    trans_edges = set(s.transition_edges)
    trans_cpds = {}
    for child, cpd in dpn.transition_cpds.items():
        if (child, 0) not in cpd.parents:
            cpd = _add_ignored_self_parent(cpd, s)
            trans_edges.add(((child, 0), (child, 1)))
        trans_cpds[child] = FrozenSwitchCpd(child, name, cpd)
        trans_edges.add(((name, 0), (child, 1)))
    trans_edges.add(((name, 0), (name, 1)))
    trans_cpds[name] = TableCpd(name, [(name, 0)], [2], [[1.0 - p_on, p_on], [0.0, 1.0]], frozen=True)
    prior_cpds = dict(dpn.prior_cpds)
    prior_cpds[name] = TableCpd(name, [], [], [[1.0, 0.0]], frozen=True)
    structure = DpnStructure(variables, s.prior_edges, frozenset(trans_edges))
    return Dpn(structure, prior_cpds, trans_cpds)


def _add_ignored_self_parent(cpd, structure: DpnStructure):
    child = cpd.child
    parents = structure.sort_parents(list(cpd.parents) + [(child, 0)])
    if isinstance(cpd, NoisyOrCpd):
        q = dict(zip(cpd.parents, cpd.q))
        fx = dict(zip(cpd.parents, cpd.fixed))
        return NoisyOrCpd(
            child, parents, [q.get(p, 1.0) for p in parents], cpd.leak_q,
            [fx.get(p, True) for p in parents], cpd.leak_fixed,
        )
    table = cpd.table() if not isinstance(cpd, TableCpd) else cpd.probs
    card = structure.cardinality(child)
    old = list(cpd.parents)
    cards = [structure.cardinality(p[0]) for p in parents]
    rows = []
    for cfg in itertools.product(*[range(c) for c in cards]):
        vals = dict(zip(parents, cfg))
        idx = 0
        for p, c in zip(old, cpd.parent_cards):
            idx = idx * c + vals[p]
        rows.append(table[idx])
    return TableCpd(child, parents, cards, np.array(rows).reshape(-1, card))


def switch_constraints(structure: DpnStructure, switch: str, base: SearchConstraints) -> SearchConstraints:
    """Forced and forbidden arcs that keep the switch's wiring out of the search."""
    forced = set(base.forced_arcs)
    forbidden = set(base.forbidden_arcs)
    for n in structure.names:
        forced.add(arc(TRANSITION, (switch, 0), n))
        if n != switch:
            forced.add(arc(TRANSITION, (n, 0), n))
            forbidden.add(arc(TRANSITION, (n, 0), switch))
            forbidden.add(arc(TRANSITION, (n, 1), switch))
            forbidden.add(arc(TRANSITION, (switch, 1), n))
            forbidden.add(arc(PRIOR, (switch, 0), n))
            forbidden.add(arc(PRIOR, (n, 0), switch))
    forbidden -= forced
    return replace(base, forced_arcs=frozenset(forced), forbidden_arcs=frozenset(forbidden),
                   max_parents=None if base.max_parents is None else base.max_parents + 1)


# ---------------------------------------------------------------------------
# Structural EM


@dataclass(frozen=True)
class SemConfig:
    max_outer_iterations: int = 30
    inner_em_iterations: int = 10
    loglik_tolerance: float = 1e-6
    score_config: ScoreConfig = field(default_factory=ScoreConfig)
    constraints: SearchConstraints = field(default_factory=SearchConstraints)
    rng_seed: int = 0
    cpd_kind: str = TABLE
    strict_persistence: bool = False
    switch: str | None = None
    check_bound: bool = True
    cap: int | None = None

    def __post_init__(self):
        if self.max_outer_iterations < 1 or self.inner_em_iterations < 1:
            raise ValueError("iteration caps must be >= 1")
        if self.loglik_tolerance <= 0:
            raise ValueError("tolerance must be > 0")


@dataclass
class BoundCheck:
    """Improvement bound for one structure reached by an accepted move."""

    outer: int
    move: str
    expected_gain: float
    true_gain: float

    @property
    def holds(self) -> bool:
        return self.true_gain >= self.expected_gain - 1e-8


@dataclass
class SemDiagnostics:
    loglik: list = field(default_factory=list)        # after each inner EM
    score: list = field(default_factory=list)         # true BIC (or expected BDe) per outer iteration
    expected_gap: list = field(default_factory=list)  # expected score of search result minus current
    structures: list = field(default_factory=list)
    bound_checks: list = field(default_factory=list)
    outer_checks: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False

    @property
    def final_score(self) -> float:
        return self.score[-1] if self.score else -math.inf


def structural_em(initial: Dpn, data: SequenceDataset, config: SemConfig | None = None):
    """Alternate parametric EM with a structure search on expected counts.

    Returns ``(dpn, diagnostics)``. Stops when the search leaves the structure
    unchanged and the log-likelihood moved less than the tolerance.
    """
    config = config or SemConfig()
    bic = config.score_config.kind == BIC
    constraints = config.constraints
    if config.switch is not None:
        constraints = switch_constraints(initial.structure, config.switch, constraints)
    data = data.align(initial.structure)
    diag = SemDiagnostics()
    dpn = initial
    prev_ll = None
    for outer in range(config.max_outer_iterations):
        diag.iterations = outer + 1
        dpn, trace, post = _em(dpn, data, config.inner_em_iterations, config.loglik_tolerance, config.cap,
                               NOISY_OR_FIT_ITERS)
        ll = trace[-1]
        diag.loglik.append(ll)
        diag.structures.append(dpn.structure)
        fitter = FamilyFitter(post, dpn.structure, config.score_config, config.cpd_kind, warm=dpn,
                              strict_persistence=config.strict_persistence, switch=config.switch)
        if bic:
            current_true = ll - bic_penalty(dpn, data.n_seq, data.n_transitions)
            current_expected = expected_bic(dpn, post)
        else:
            current_true = current_expected = fitter.total(dpn.structure)
        diag.score.append(current_true)
        result = hill_climb(dpn.structure, fitter, constraints)
        diag.expected_gap.append(result.score - current_expected)
        new = fitter.build(result.structure)
        if bic and config.check_bound:
            for move, st, sc in zip(result.moves, result.structures[1:], result.trace[1:]):
                cand = fitter.build(st)
                gain = true_bic(cand, data, config.cap) - current_true
                diag.bound_checks.append(BoundCheck(outer, str(move), sc - current_expected, gain))
            if result.moves:
                gain = true_bic(new, data, config.cap) - current_true
                diag.outer_checks.append(BoundCheck(outer, "outer", result.score - current_expected, gain))
        log.debug("outer %d: loglik %.6f score %.6f moves %d", outer, ll, current_true, len(result.moves))
        unchanged = result.structure == dpn.structure
        if unchanged and prev_ll is not None and abs(ll - prev_ll) < config.loglik_tolerance:
            diag.converged = True
            break
        prev_ll = ll
        dpn = new
    return dpn, diag


def learn_complete(data: SequenceDataset, initial: DpnStructure, score: ScoreConfig | None = None,
                   constraints: SearchConstraints | None = None, cpd_kind: str = TABLE,
                   strict_persistence: bool = False):
    """Count, search, and fit for fully observed data. Returns ``(dpn, search result)``."""
    counts = CompleteCounts(data, initial)
    fitter = FamilyFitter(counts, initial, score, cpd_kind, strict_persistence=strict_persistence)
    result = hill_climb(initial, fitter, constraints)
    return fitter.build(result.structure), result
