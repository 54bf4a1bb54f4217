"""Exact inference by compiling a DPN to a Markov chain over joint slice states.

Expected sufficient statistics for any family are marginals of two
aggregates: the summed slice-0 posterior and the pairwise posterior summed
over all transitions and sequences. One forward-backward pass per sequence
therefore serves every candidate family scored during a structure search.
"""
from __future__ import annotations

import itertools
import math
import os
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .dataset import MISSING, SequenceDataset, SufficientStats, family_index
from .model import PRIOR, Dpn, DpnStructure, config_strides

DEFAULT_STATE_CAP = 2**12
CAP_ENV = "DPNLEARN_STATE_CAP"
NORM_TOL = 1e-9


class StateSpaceError(RuntimeError):
    """The compound state space exceeds the configured cap."""

    def __init__(self, size: int, cap: int):
        super().__init__(f"compound state space has {size} states, cap is {cap}")
        self.size = size
        self.cap = cap


class InferenceError(RuntimeError):
    pass


def state_cap(cap: int | None = None) -> int:
    if cap is not None:
        return int(cap)
    env = os.environ.get(CAP_ENV)
    return int(env) if env else DEFAULT_STATE_CAP


def _table_lookup(table, states_pa, cards, child_vals):
    return table[family_index(states_pa, cards), child_vals]


@dataclass(frozen=True, eq=False)
class CompoundChain:
    structure: DpnStructure
    initial_dist: np.ndarray
    transition_matrix: np.ndarray
    states: np.ndarray  # (S, n) decode table

    @property
    def state_space_size(self) -> int:
        return len(self.initial_dist)

    def encode(self, assignment) -> int:
        return int(np.asarray(assignment, dtype=np.int64) @ config_strides(self.structure.cards))

    def decode(self, state: int) -> tuple:
        return tuple(int(x) for x in self.states[state])

    def evidence(self, sequence) -> np.ndarray:
        """Compatibility vectors, one row per slice."""
        seq = np.asarray(sequence)
        st = self.states[None, :, :]
        obs = seq[:, None, :]
        ok = (st == obs) | (obs == MISSING)
        return ok.all(axis=2).astype(float)

    def family_index(self, child: str, parents, segment: str) -> np.ndarray:
        """Flat (parent config, child value) cell for each state or state pair."""
        key = (child, tuple(parents), segment)
        cache = self.__dict__.setdefault("_fam_idx", {})
        if key in cache:
            return cache[key]
        s = self.structure
        card = s.cardinality(child)
        cards = [s.cardinality(p[0]) for p in parents]
        strides = config_strides(cards)
        X = self.states.astype(np.int64)
        ci = s.index(child)
        if segment == PRIOR:
            idx = family_index(X[:, [s.index(p[0]) for p in parents]], cards) * card + X[:, ci]
        else:
            S = len(X)
            idx = np.zeros((S, S), dtype=np.int64)
            for k, (name, t) in enumerate(parents):
                col = X[:, s.index(name)] * strides[k]
                idx += col[:, None] if t == 0 else col[None, :]
            idx = (idx * card + X[:, ci][None, :]).ravel()
        cache[key] = idx
        return idx

    def marginalize(self, weights, child: str, parents, segment: str) -> np.ndarray:
        """Project state weights (prior) or pair weights (transition) onto a family."""
        s = self.structure
        card = s.cardinality(child)
        rows = int(np.prod([s.cardinality(p[0]) for p in parents])) if parents else 1
        idx = self.family_index(child, parents, segment)
        w = np.asarray(weights, dtype=float).ravel()
        return np.bincount(idx, weights=w, minlength=rows * card).reshape(rows, card)


def compile_dpn(dpn: Dpn, cap: int | None = None) -> CompoundChain:
    """Compile ``dpn`` into its compound chain; noisy-OR families are expanded."""
    s = dpn.structure
    S = int(np.prod(s.cards))
    limit = state_cap(cap)
    if S > limit:
        raise StateSpaceError(S, limit)
    states = np.array(list(itertools.product(*[range(c) for c in s.cards])), dtype=np.int64)
    states = states.reshape(S, s.n)

    init = np.ones(S)
    for name in s.names:
        cpd = dpn.prior_cpds[name]
        cols = [s.index(p[0]) for p in cpd.parents]
        init *= _table_lookup(cpd.table(), states[:, cols], cpd.parent_cards, states[:, s.index(name)])

    trans = np.ones((S, S))
    for name in s.names:
        cpd = dpn.transition_cpds[name]
        strides = config_strides(cpd.parent_cards)
        idx = np.zeros((S, S), dtype=np.int64)
        for k, (pname, t) in enumerate(cpd.parents):
            col = states[:, s.index(pname)] * strides[k]
            idx += col[:, None] if t == 0 else col[None, :]
        trans *= cpd.table()[idx, states[:, s.index(name)][None, :]]
    states.setflags(write=False)
    init.setflags(write=False)
    trans.setflags(write=False)
    return CompoundChain(s, init, trans, states)


# public alias; shadows the builtin only inside this namespace
compile = compile_dpn


@dataclass(eq=False)
class SlicePosteriors:
    """Posteriors for one sequence.

    ``gamma[t]`` is the slice posterior; pairwise posteriors ``xi(t)`` are
    rebuilt from the scaled messages on request, only their sum over ``t`` is
    kept eagerly.
    """

    chain: CompoundChain
    evidence: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    scale: np.ndarray
    xi_sum: np.ndarray
    log_likelihood: float

    @property
    def gamma(self) -> np.ndarray:
        return self.alpha * self.beta

    def xi(self, t: int) -> np.ndarray:
        w = self.evidence[t + 1] * self.beta[t + 1] / self.scale[t + 1]
        return self.alpha[t][:, None] * self.chain.transition_matrix * w[None, :]


def forward_backward(chain: CompoundChain, sequence, want_xi: bool = True) -> SlicePosteriors:
    ev = chain.evidence(sequence)
    ll, alpha, beta, scale, xi_sum = _kernels.forward_backward(
        chain.initial_dist, chain.transition_matrix, ev, want_xi
    )
    return SlicePosteriors(chain, ev, alpha, beta, scale, xi_sum, ll)


class Posterior:
    """Aggregated posteriors of a dataset under one completion model.

    Family expected counts are computed lazily and cached by
    ``(child, parents, segment)``.
    """

    def __init__(self, dpn: Dpn, data: SequenceDataset, cap: int | None = None, strict: bool = True):
        self.dpn = dpn
        self.structure = dpn.structure
        self.chain = compile_dpn(dpn, cap)
        self.data = data.align(self.structure)
        S = self.chain.state_space_size
        self.gamma0 = np.zeros(S)
        self.xi = np.zeros((S, S))
        self.seq_loglik = []
        for i, seq in enumerate(self.data.sequences):
            post = forward_backward(self.chain, seq)
            self.seq_loglik.append(post.log_likelihood)
            if post.log_likelihood == -math.inf:
                if strict:
                    raise InferenceError(f"sequence {i} has probability 0 under the model")
                continue
            self.gamma0 += post.gamma[0]
            self.xi += post.xi_sum
        self.log_likelihood = float(sum(self.seq_loglik))
        self.n_seq = self.data.n_seq
        self.n_transitions = self.data.n_transitions
        self._cache = {}

    def family_counts(self, child: str, parents, segment: str) -> np.ndarray:
        key = (child, tuple(parents), segment)
        out = self._cache.get(key)
        if out is None:
            w = self.gamma0 if segment == PRIOR else self.xi
            out = self.chain.marginalize(w, child, parents, segment)
            out.setflags(write=False)
            self._cache[key] = out
        return out

    def stats(self, structure: DpnStructure | None = None) -> SufficientStats:
        structure = structure or self.structure
        if structure.names != self.structure.names:
            raise ValueError("target structure must use the model's variables")
        prior = {c: np.array(self.family_counts(c, pa, PRIOR)) for c, pa in structure.families(PRIOR)}
        trans = {
            c: np.array(self.family_counts(c, pa, "transition"))
            for c, pa in structure.families("transition")
        }
        return SufficientStats(structure, prior, trans, self.n_seq, self.n_transitions)


def expected_stats(dpn: Dpn, data: SequenceDataset, target_structure: DpnStructure | None = None,
                   cap: int | None = None) -> SufficientStats:
    """Expected sufficient statistics of ``target_structure``'s families under ``dpn``."""
    return Posterior(dpn, data, cap).stats(target_structure)


def log_likelihood(dpn: Dpn, data: SequenceDataset, cap: int | None = None) -> float:
    """Log-probability of the observed cells, summed over sequences."""
    if data.n_seq == 0:
        return 0.0
    chain = compile_dpn(dpn, cap)
    data = data.align(dpn.structure)
    total = 0.0
    for seq in data.sequences:
        total += forward_backward(chain, seq, want_xi=False).log_likelihood
    return total


def sequence_log_likelihoods(dpn: Dpn, data: SequenceDataset, cap: int | None = None) -> list:
    chain = compile_dpn(dpn, cap)
    data = data.align(dpn.structure)
    return [forward_backward(chain, s, want_xi=False).log_likelihood for s in data.sequences]
