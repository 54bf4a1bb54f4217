import importlib
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from dpnlearn import _kernels
from dpnlearn._kernels import fb_py

compiled = pytest.importorskip("dpnlearn._kernels._fb")


def problem(seed, S, L, zeros=0.3):
    rng = np.random.default_rng(seed)
    init = rng.dirichlet(np.ones(S))
    trans = rng.dirichlet(np.ones(S), size=S)
    trans[rng.random((S, S)) < zeros] = 0.0
    trans[np.arange(S), np.arange(S)] += 1e-3
    trans /= trans.sum(axis=1, keepdims=True)
    ev = (rng.random((L, S)) < 0.7).astype(float)
    return init, trans, ev


@given(st.integers(0, 10_000), st.integers(1, 24), st.integers(1, 8))
def test_backends_agree(seed, S, L):
    args = problem(seed, S, L)
    a = fb_py.forward_backward(*args)
    b = compiled.forward_backward(*args)
    if a[0] == -math.inf:
        assert b[0] == -math.inf
        return
    assert a[0] == pytest.approx(b[0], abs=1e-10)
    for x, y in zip(a[1:], b[1:]):
        np.testing.assert_allclose(x, y, atol=1e-12)


def test_read_only_inputs_accepted():
    init, trans, ev = problem(0, 6, 4)
    for a in (init, trans, ev):
        a.setflags(write=False)
    assert compiled.forward_backward(init, trans, ev)[0] < 0


def test_impossible_evidence():
    init = np.array([1.0, 0.0])
    trans = np.eye(2)
    ev = np.array([[1.0, 1.0], [0.0, 1.0]])
    for fb in (fb_py.forward_backward, compiled.forward_backward):
        assert fb(init, trans, ev)[0] == -math.inf


def test_pure_python_switch(monkeypatch):
    monkeypatch.setenv("DPNLEARN_PURE_PYTHON", "1")
    mod = importlib.reload(_kernels)
    try:
        assert mod.BACKEND == "python"
        assert mod.forward_backward is fb_py.forward_backward
    finally:
        monkeypatch.delenv("DPNLEARN_PURE_PYTHON")
        importlib.reload(_kernels)
