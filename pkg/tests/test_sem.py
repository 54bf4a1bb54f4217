import numpy as np
import pytest
from hypothesis import given, strategies as st

from dpnlearn.dataset import MISSING, CompleteCounts, SequenceDataset, count_complete
from dpnlearn.inference import log_likelihood
from dpnlearn.model import (
    HIDDEN,
    PRIOR,
    TRANSITION,
    Dpn,
    DpnStructure,
    ModelError,
    NoisyOrCpd,
    TableCpd,
    VariableSpec,
    validate,
)
from dpnlearn.scoring import mle_params
from dpnlearn.sem import (
    FamilyFitter,
    SemConfig,
    add_switch,
    expected_bic,
    fit_noisy_or,
    hidden_init,
    learn_complete,
    noisy_or_augmented,
    noisy_or_em,
    noisy_or_step,
    parametric_em,
    random_params,
    structural_em,
    switch_p_on,
    true_bic,
)
from dpnlearn.pipeline import LearnOptions, learn
from dpnlearn.simulation import make_reference_model, pathway_to_dpn, sample, sample_trajectory

import oracles
from helpers import random_dpn, random_sequences


def test_noisy_or_closed_form_single_arc():
    # parent on in 40 transitions, child stays off in 9 of them
    counts = np.array([[25.0, 0.0], [9.0, 31.0]])
    cpd = NoisyOrCpd("C", [("P", 0)], [0.5], leak_q=1.0, leak_fixed=True)
    out = noisy_or_step(cpd, counts)
    assert out.q[0] == pytest.approx(9 / 40)
    assert out.leak_q == 1.0


def test_fixed_q_never_moves():
    counts = np.array([[5.0, 1.0], [2.0, 3.0], [0.0, 4.0], [1.0, 6.0]])
    cpd = NoisyOrCpd("C", [("C", 0), ("P", 0)], [0.0, 0.5], 0.9, fixed=[True, False])
    out = fit_noisy_or(cpd, counts)
    assert out.q[0] == 0.0 and out.q[1] != 0.5


@given(st.integers(0, 10_000))
def test_noisy_or_step_increases_family_likelihood(seed):
    rng = np.random.default_rng(seed)
    counts = rng.integers(0, 20, size=(4, 2)).astype(float)
    cpd = NoisyOrCpd("C", [("A", 0), ("B", 0)], rng.uniform(0.05, 0.95, 2), float(rng.uniform(0.05, 0.95)))

    def ll(c):
        return float(np.sum(counts * np.log(c.table())))

    nxt = noisy_or_step(cpd, counts)
    assert ll(nxt) >= ll(cpd) - 1e-9


def _two_arc_toy(rng):
    v = (VariableSpec("A"), VariableSpec("B"), VariableSpec("C"))
    s = DpnStructure(v, frozenset(), {(("A", 0), ("C", 1)), (("B", 0), ("C", 1)),
                                      (("A", 0), ("A", 1)), (("B", 0), ("B", 1))})
    gen = random_params(s, rng)
    gen = gen.with_cpds(TRANSITION, {"C": NoisyOrCpd("C", [("A", 0), ("B", 0)], [0.3, 0.6], 0.8)})
    return gen


def test_augmented_route_matches_noisy_or_em():
    rng = np.random.default_rng(4)
    gen = _two_arc_toy(rng)
    data = random_sequences(rng, gen, 12, 5, p_missing=0.3)
    start = gen.with_cpds(TRANSITION, {"C": NoisyOrCpd("C", [("A", 0), ("B", 0)], [0.5, 0.5], 0.5)})
    aug, aux = noisy_or_augmented(start)
    assert validate(aug) is None
    assert log_likelihood(aug, data) == pytest.approx(log_likelihood(start, data), abs=1e-9)
    for iters in (1, 4):
        a = noisy_or_em(start, data, max_iters=iters, tol=-1.0, family_iters=1)
        b, _ = parametric_em(aug, data, max_iters=iters, tol=-1.0)
        qa = a.transition_cpds["C"]
        for j, p in enumerate(qa.parents):
            assert b.transition_cpds[aux[("C", p)]].probs[1, 0] == pytest.approx(qa.q[j], abs=1e-9)
        assert b.transition_cpds[aux[("C", None)]].probs[0, 0] == pytest.approx(qa.leak_q, abs=1e-9)


def test_noisy_or_em_rejects_non_binary():
    v = (VariableSpec("A", 3), VariableSpec("C"))
    s = DpnStructure(v, frozenset(), {(("A", 0), ("C", 1))})
    d = random_params(s, 0)
    d = d.with_cpds(TRANSITION, {"C": NoisyOrCpd("C", [("A", 0)], [0.5])})
    data = SequenceDataset(v, [[[0, 0], [1, 1]]])
    with pytest.raises(ModelError):
        noisy_or_em(d, data)


def test_noisy_or_em_monotone():
    rng = np.random.default_rng(8)
    gen = _two_arc_toy(rng)
    data = random_sequences(rng, gen, 15, 6, p_missing=0.4)
    start = gen.with_cpds(TRANSITION, {"C": NoisyOrCpd("C", [("A", 0), ("B", 0)], [0.9, 0.1], 0.5)})
    _, trace = parametric_em(start, data, max_iters=30, tol=-1.0)
    assert all(b >= a - 1e-8 for a, b in zip(trace, trace[1:]))


def test_pathway_q_recovery_complete_data():
    gen = pathway_to_dpn(make_reference_model())
    start = random_params(gen.structure, 0, "noisy-or", strict_persistence=True)
    for n, per_q in ((100, False), (1000, True)):
        data = sample(gen, 20, n, 5)
        fit = noisy_or_em(start, data, max_iters=20)
        qs = [q for c in fit.transition_cpds.values() for p, q in zip(c.parents, c.q) if p[0] != c.child]
        assert len(qs) == 5
        if per_q:
            assert max(abs(q - 0.2) for q in qs) < 0.05
        else:
            assert abs(np.mean(qs) - 0.2) < 0.05


def test_parametric_em_complete_data_one_step():
    rng = np.random.default_rng(0)
    gen = random_dpn(rng, 2)
    data = random_sequences(rng, gen, 10, 5)
    fit, trace = parametric_em(random_params(gen.structure, 1), data)
    mle = mle_params(count_complete(data, gen.structure))
    for seg in (PRIOR, TRANSITION):
        for c in gen.structure.names:
            np.testing.assert_allclose(fit.cpd(c, seg).table(), mle.cpd(c, seg).table(), atol=1e-12)
    assert len(trace) == 3 and trace[2] == pytest.approx(trace[1])


def _hidden_driver(o_prior=None, o_trans=None):
    v = (VariableSpec("O"), VariableSpec("H", 2, HIDDEN))
    s = DpnStructure(v, {("H", "O")}, {(("H", 0), ("H", 1)), (("H", 1), ("O", 1))})
    if o_prior is None:
        return random_params(s, 3)
    prior = {"H": TableCpd("H", [], [], [[0.5, 0.5]]),
             "O": TableCpd("O", [("H", 0)], [2], [o_prior, o_prior])}
    trans = {"H": TableCpd("H", [("H", 0)], [2], [[0.5, 0.5], [0.5, 0.5]]),
             "O": TableCpd("O", [("H", 1)], [2], [o_trans, o_trans])}
    return Dpn(s, prior, trans)


def test_symmetric_init_is_fixed_point():
    rng = np.random.default_rng(1)
    seqs = [rng.integers(0, 2, (6, 1)) for _ in range(10)]
    data = SequenceDataset((VariableSpec("O"),), seqs)
    first = np.mean([s[0, 0] for s in seqs])
    rest = np.mean([s[1:, 0] for s in seqs])
    sym = _hidden_driver([1 - first, first], [1 - rest, rest])
    _, trace = parametric_em(sym, data, max_iters=5, tol=-1.0)
    assert max(trace) - min(trace) < 1e-12
    _, trace = parametric_em(_hidden_driver(), data, max_iters=5, tol=-1.0)
    assert all(b > a for a, b in zip(trace, trace[1:]))


def test_em_matches_enumeration_oracle():
    rng = np.random.default_rng(21)
    gen = random_dpn(rng, 2)
    data = random_sequences(rng, gen, 12, 4, p_missing=0.0)
    seqs = []
    for s_ in data.sequences:
        a = np.array(s_)
        hide = rng.random(len(a)) < 0.4
        hide[0] = False
        a[hide] = MISSING
        seqs.append(a)
    data = SequenceDataset(data.variables, seqs)
    ours, theirs = [], []
    for r in range(20):
        init = random_params(gen.structure, 100 + r)
        fit, trace = parametric_em(init, data, max_iters=3000, tol=1e-13)
        ours.append(trace[-1])
        if r < 3:
            ofit, otrace = oracles.enumeration_em(init, data, iters=3000, tol=1e-13)
            assert trace[-1] == pytest.approx(otrace[-1], abs=1e-6)
            theirs.append(otrace[-1])
    for r in range(3, 20):
        theirs.append(oracles.enumeration_em(random_params(gen.structure, 100 + r), data, 3000, 1e-13)[1][-1])
    assert max(ours) == pytest.approx(max(theirs), abs=1e-6)


@pytest.mark.parametrize("n_hidden, n_obs, arcs", [(0, 3, 0), (1, 3, 4), (2, 4, 10)])
def test_hidden_init_arc_counts(n_hidden, n_obs, arcs):
    d = hidden_init([f"O{i}" for i in range(n_obs)], n_hidden, rng_seed=0)
    assert len(d.structure.transition_edges) == arcs
    assert validate(d) is None
    assert not any(src == (dst[0], 0) for src, dst in d.structure.transition_edges if dst[0].startswith("O"))


def test_hidden_init_reproducible():
    a = hidden_init(["A", "B"], 1, rng_seed=7)
    b = hidden_init(["A", "B"], 1, rng_seed=7)
    for seg in (PRIOR, TRANSITION):
        for c in a.structure.names:
            np.testing.assert_array_equal(a.cpd(c, seg).table(), b.cpd(c, seg).table())


def test_switch_probability():
    p = switch_p_on(20, 0.95)
    assert p == pytest.approx(1 - 0.05 ** (1 / 20))
    assert 1 - (1 - p) ** 20 >= 0.95 - 1e-12


def test_switch_on_freezes_and_off_is_neutral():
    rng = np.random.default_rng(2)
    base = random_dpn(rng, 2)
    sw = add_switch(base, 0.2)
    assert validate(sw) is None
    on = sw.with_cpds(PRIOR, {"S": TableCpd("S", [], [], [[0.0, 1.0]], frozen=True)})
    for i in range(20):
        tr = sample_trajectory(on, 8, np.random.default_rng(i))
        assert np.all(tr == tr[0])
    off = add_switch(base, 0.0)
    data = random_sequences(rng, base, 5, 6, p_missing=0.3)
    assert log_likelihood(off, data) == pytest.approx(log_likelihood(base, data), abs=1e-10)


def test_structural_em_complete_data_equals_search():
    rng = np.random.default_rng(9)
    gen = random_dpn(rng, 3)
    data = random_sequences(rng, gen, 40, 6)
    empty = DpnStructure(gen.structure.variables)
    direct, res = learn_complete(data, empty)
    sem, diag = structural_em(random_params(empty, 0), data)
    assert sem.structure == direct.structure
    assert diag.converged
    assert diag.final_score == pytest.approx(res.score, abs=1e-6)


def test_structural_em_hidden_driver():
    v = (VariableSpec("O1"), VariableSpec("O2"), VariableSpec("H", 2, HIDDEN))
    s = DpnStructure(v, {("H", "O1"), ("H", "O2")},
                     {(("H", 0), ("H", 1)), (("H", 1), ("O1", 1)), (("H", 1), ("O2", 1))})
    gen = Dpn(s,
              {"H": TableCpd("H", [], [], [[0.5, 0.5]]),
               "O1": TableCpd("O1", [("H", 0)], [2], [[0.9, 0.1], [0.1, 0.9]]),
               "O2": TableCpd("O2", [("H", 0)], [2], [[0.85, 0.15], [0.2, 0.8]])},
              {"H": TableCpd("H", [("H", 0)], [2], [[0.9, 0.1], [0.1, 0.9]]),
               "O1": TableCpd("O1", [("H", 1)], [2], [[0.9, 0.1], [0.1, 0.9]]),
               "O2": TableCpd("O2", [("H", 1)], [2], [[0.85, 0.15], [0.2, 0.8]])})
    data = sample(gen, 15, 60, 3)
    res = learn(data, LearnOptions(hidden=1, restarts=6))
    learned, diag = res.dpn, res.diagnostics
    assert all(b.holds for b in diag.bound_checks)
    assert all(b >= a - 1e-8 for a, b in zip(diag.score, diag.score[1:]))
    gen_fit, _ = parametric_em(gen, data, max_iters=500, tol=1e-12)
    # slack covers the SEM run's own EM stopping tolerance
    assert true_bic(learned, data) >= true_bic(gen_fit, data) - 1e-3
    edges = learned.structure.transition_edges
    assert (("H0", 0), ("H0", 1)) in edges
    assert {(("H0", 1), ("O1", 1)), (("H0", 1), ("O2", 1))} <= edges


def test_family_fitter_reuses_fitted_params():
    rng = np.random.default_rng(6)
    gen = random_dpn(rng, 2)
    data = random_sequences(rng, gen, 8, 5)
    cc = CompleteCounts(data, gen.structure)
    f = FamilyFitter(cc, gen.structure)
    built = f.build(gen.structure)
    assert f.total(gen.structure) == pytest.approx(expected_bic(built, cc))


def test_sem_config_validation():
    with pytest.raises(ValueError):
        SemConfig(max_outer_iterations=0)
    with pytest.raises(ValueError):
        SemConfig(loglik_tolerance=0)
