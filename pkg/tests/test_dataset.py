import numpy as np
import pytest
from hypothesis import given, strategies as st

from dpnlearn.dataset import (
    MISSING,
    CompleteCounts,
    DataError,
    SequenceDataset,
    apply_regime,
    count_complete,
    load_dataset,
    parse_regime,
    save_dataset,
)
from dpnlearn.model import PRIOR, TRANSITION, DpnStructure, VariableSpec


def small():
    v = (VariableSpec("A"), VariableSpec("B", 3))
    return SequenceDataset(v, [[[0, 1], [1, 2], [1, 0]], [[1, 1]]])


def test_counts_by_hand():
    d = small()
    s = DpnStructure(d.variables, {("A", "B")}, {(("A", 0), ("B", 1)), (("B", 0), ("B", 1))})
    st_ = count_complete(d, s)
    np.testing.assert_array_equal(st_.counts("A", PRIOR), [[1, 1]])
    np.testing.assert_array_equal(st_.counts("B", PRIOR), [[0, 1, 0], [0, 1, 0]])
    tb = st_.counts("B", TRANSITION)
    assert tb.shape == (6, 3)
    # (A=0,B=1)->B=2 and (A=1,B=2)->B=0
    assert tb[0 * 3 + 1, 2] == 1 and tb[1 * 3 + 2, 0] == 1 and tb.sum() == 2
    assert st_.n_seq == 2 and st_.n_transitions == 2


def test_missing_value_is_reported_with_location():
    v = (VariableSpec("A"), VariableSpec("B"))
    d = SequenceDataset(v, [[[0, 1], [MISSING, 0]]])
    s = DpnStructure(v, transition_edges={(("A", 0), ("A", 1))})
    with pytest.raises(DataError, match="sequence 0, slice 1, variable A"):
        count_complete(d, s)


def test_validation():
    v = (VariableSpec("A"),)
    with pytest.raises(DataError):
        SequenceDataset(v, [[[2]]])
    with pytest.raises(DataError):
        SequenceDataset(v, [np.zeros((0, 1))])
    with pytest.raises(DataError):
        SequenceDataset((VariableSpec("H", 2, "hidden"),), [[[1]]])


def test_regimes():
    d = SequenceDataset((VariableSpec("A"),), [np.zeros((21, 1), int)] * 4)
    full = apply_regime(d, "hide:1.0", 0)
    for s in full.sequences:
        assert s[0, 0] == 0 and np.all(s[1:] == MISSING)
    two = apply_regime(d, "two-obs", 0)
    for s in two.sequences:
        assert np.all(s[[0, -1]] == 0) and np.all(s[1:-1] == MISSING)
    assert apply_regime(d, "complete") is d
    assert str(parse_regime("hide:0.4")) == "hide:0.4"
    with pytest.raises(DataError):
        parse_regime("hide:2")
    with pytest.raises(DataError):
        parse_regime("sometimes")


def test_regime_is_seeded():
    d = SequenceDataset((VariableSpec("A"),), [np.zeros((30, 1), int)] * 5)
    assert apply_regime(d, "hide:0.5", 3) == apply_regime(d, "hide:0.5", 3)


@given(st.integers(0, 1000), st.floats(0, 1))
def test_file_round_trip(seed, p):
    rng = np.random.default_rng(seed)
    v = (VariableSpec("A", 2), VariableSpec("B", 4), VariableSpec("H", 2, "hidden"))
    seqs = []
    for _ in range(int(rng.integers(1, 4))):
        L = int(rng.integers(1, 6))
        a = np.stack([rng.integers(0, 2, L), rng.integers(0, 4, L), np.full(L, MISSING)], axis=1)
        a[:, :2][rng.random((L, 2)) < p] = MISSING
        seqs.append(a)
    d = SequenceDataset(v, seqs)
    import tempfile, os

    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "d.txt")
        save_dataset(d, path)
        assert load_dataset(path) == d


def test_load_errors(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("A:2 B:2\n\n0 1\n0\n")
    with pytest.raises(DataError, match=":4"):
        load_dataset(p)
    p.write_text("A:x\n")
    with pytest.raises(DataError):
        load_dataset(p)


def test_align_adds_hidden_columns():
    d = small()
    s = DpnStructure(d.variables[::-1] + (VariableSpec("H", 2, "hidden"),))
    a = d.align(s)
    assert a.names == ("B", "A", "H")
    assert np.all(a.sequences[0][:, 2] == MISSING)
    np.testing.assert_array_equal(a.sequences[0][:, 1], d.sequences[0][:, 0])
    cc = CompleteCounts(d, DpnStructure(d.variables))
    assert cc.family_counts("A", (), PRIOR).sum() == 2
