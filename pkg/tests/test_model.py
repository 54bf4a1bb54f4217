import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dpnlearn.model import (
    PRIOR,
    TRANSITION,
    Dpn,
    DpnStructure,
    FrozenSwitchCpd,
    ModelError,
    NoisyOrCpd,
    TableCpd,
    VariableSpec,
    expand_table,
    joint_log_prob,
    noisy_or_row,
    parse_node,
    structure_problems,
    uniform_dpn,
    unroll,
    validate,
)

from helpers import random_dpn, random_structure
from oracles import trajectory_prob


def two_var():
    return DpnStructure(
        (VariableSpec("A"), VariableSpec("B")),
        {("A", "B")},
        {(("A", 0), ("A", 1)), (("A", 1), ("B", 1))},
    )


def test_parse_and_format_nodes():
    assert parse_node("A[0]") == ("A", 0)
    assert parse_node("B", 1) == ("B", 1)
    with pytest.raises(ModelError):
        parse_node("B")


def test_parent_order_is_slice_then_variable():
    s = DpnStructure(
        (VariableSpec("A"), VariableSpec("B"), VariableSpec("C")),
        transition_edges={(("C", 0), ("A", 1)), (("B", 1), ("A", 1)), (("A", 0), ("A", 1))},
    )
    assert s.parents("A", TRANSITION) == (("A", 0), ("C", 0), ("B", 1))


def test_structure_problems():
    v = (VariableSpec("A"), VariableSpec("B"))
    assert structure_problems(DpnStructure(v, {("A", "B"), ("B", "A")})) == "prior edges contain a cycle"
    assert "self loop" in structure_problems(DpnStructure(v, transition_edges={(("A", 1), ("A", 1))}))
    assert "slice-0" in structure_problems(DpnStructure(v, transition_edges={(("A", 0), ("B", 0))}))
    assert structure_problems(DpnStructure((VariableSpec("A"), VariableSpec("A")))) is not None
    # inter-slice self arcs and two-cycles across slices are fine
    ok = DpnStructure(v, transition_edges={(("A", 0), ("A", 1)), (("B", 0), ("A", 1)), (("A", 0), ("B", 1))})
    assert structure_problems(ok) is None


def test_validate_catches_bad_rows():
    s = DpnStructure((VariableSpec("A"),))
    good = uniform_dpn(s)
    assert validate(good) is None
    bad = good.with_cpds(PRIOR, {"A": TableCpd("A", [], [], [[0.6, 0.6]])})
    assert validate(bad) == "prior A: row not normalized"
    neg = good.with_cpds(PRIOR, {"A": TableCpd("A", [], [], [[1.5, -0.5]])})
    assert "outside" in validate(neg)


def test_validate_parent_mismatch():
    s = two_var()
    d = uniform_dpn(s)
    wrong = d.with_cpds(PRIOR, {"B": TableCpd("B", [], [], [[0.5, 0.5]])})
    assert "parents" in validate(wrong)


def test_noisy_or_rows():
    cpd = NoisyOrCpd("C", [("A", 0), ("B", 0)], [0.2, 0.5], leak_q=0.9)
    np.testing.assert_allclose(noisy_or_row(cpd, (0, 0)), [0.9, 0.1])
    np.testing.assert_allclose(noisy_or_row(cpd, (1, 1)), [0.09, 0.91])
    t = cpd.table()
    for cfg in itertools.product((0, 1), repeat=2):
        j = cfg[0] * 2 + cfg[1]
        np.testing.assert_allclose(t[j], noisy_or_row(cpd, cfg))
    assert expand_table(cpd).probs.shape == (4, 2)


def test_switch_table_copies_previous_value():
    base = TableCpd("A", [("A", 0)], [2], [[0.3, 0.7], [0.4, 0.6]])
    sw = FrozenSwitchCpd("A", "S", base)
    t = sw.table()
    np.testing.assert_allclose(t[:2], base.probs)
    np.testing.assert_allclose(t[2:], [[1, 0], [0, 1]])
    with pytest.raises(ModelError):
        FrozenSwitchCpd("B", "S", base)


def test_unroll_counts():
    s = two_var()
    nodes, edges = unroll(s, 3)
    assert len(nodes) == 8
    # one prior edge plus two transition edges per step
    assert len(edges) == 1 + 2 * 3


def test_joint_log_prob_handles_zero_and_range():
    s = DpnStructure((VariableSpec("A"),), transition_edges={(("A", 0), ("A", 1))})
    d = Dpn(s, {"A": TableCpd("A", [], [], [[1.0, 0.0]])},
            {"A": TableCpd("A", [("A", 0)], [2], [[0.5, 0.5], [0.0, 1.0]])})
    assert joint_log_prob(d, [[0], [1], [1]]) == pytest.approx(math.log(0.5))
    assert joint_log_prob(d, [[1], [1]]) == -math.inf
    with pytest.raises(ModelError):
        joint_log_prob(d, [[2]])


@given(st.integers(0, 10_000), st.integers(1, 3), st.integers(0, 2))
def test_joint_sums_to_one(seed, n, T):
    rng = np.random.default_rng(seed)
    d = random_dpn(rng, n, [int(c) for c in rng.integers(2, 4, size=n)])
    assert validate(d) is None
    total = 0.0
    for traj in itertools.product(*[range(c) for c in d.structure.cards] * (T + 1)):
        tr = np.array(traj).reshape(T + 1, n)
        lp = joint_log_prob(d, tr)
        assert lp == pytest.approx(math.log(trajectory_prob(d, tr.tolist())) if lp > -math.inf else lp)
        total += math.exp(lp)
    assert total == pytest.approx(1.0, abs=1e-9)


@given(st.integers(0, 10_000))
def test_random_structures_are_valid(seed):
    s = random_structure(np.random.default_rng(seed), 4)
    assert structure_problems(s) is None
    assert len(s.topological_order(PRIOR)) == 4
