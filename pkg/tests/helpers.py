"""Random models and data shared across tests."""

from dpnlearn.dataset import MISSING, SequenceDataset
from dpnlearn.model import DpnStructure, VariableSpec
from dpnlearn.sem import random_params


def random_structure(rng, n=3, cards=None, p_arc=0.4, intra=True, hidden=()):
    names = [f"X{i}" for i in range(n)]
    cards = cards or [2] * n
    variables = tuple(
        VariableSpec(nm, c, "hidden" if nm in hidden else "observed") for nm, c in zip(names, cards)
    )
    order = list(rng.permutation(n))
    prior = set()
    for a in range(n):
        for b in range(a + 1, n):
            if rng.random() < p_arc:
                prior.add((names[order[a]], names[order[b]]))
    trans = set()
    for u in names:
        for v in names:
            if rng.random() < p_arc:
                trans.add(((u, 0), (v, 1)))
    if intra:
        order = list(rng.permutation(n))
        for a in range(n):
            for b in range(a + 1, n):
                if rng.random() < p_arc / 2:
                    trans.add(((names[order[a]], 1), (names[order[b]], 1)))
    return DpnStructure(variables, frozenset(prior), frozenset(trans))


def random_dpn(rng, n=3, cards=None, **kw):
    return random_params(random_structure(rng, n, cards, **kw), rng)


def random_sequences(rng, dpn, n_seq, length, p_missing=0.0, min_len=None):
    """Sample from ``dpn`` and blank cells with probability ``p_missing``."""
    from dpnlearn.simulation import sample_trajectory

    seqs = []
    for _ in range(n_seq):
        L = length if min_len is None else int(rng.integers(min_len, length + 1))
        tr = sample_trajectory(dpn, L - 1, rng).astype(int)
        mask = rng.random(tr.shape) < p_missing
        tr[mask] = MISSING
        for j, v in enumerate(dpn.structure.variables):
            if v.hidden:
                tr[:, j] = MISSING
        seqs.append(tr)
    return SequenceDataset(dpn.structure.variables, seqs)
