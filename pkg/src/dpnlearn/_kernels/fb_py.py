"""NumPy forward-backward over a compound chain (fallback backend)."""
import math

import numpy as np


def forward_backward(init, trans, evidence, want_xi=True):
    """Scaled forward-backward pass for one sequence.

    Parameters
    ----------
    init : ndarray (S,)
        Initial state distribution.
    trans : ndarray (S, S)
        Row-stochastic transition matrix.
    evidence : ndarray (L, S)
        Per-slice compatibility vectors (1 where a state agrees with the
        observed cells, 0 elsewhere).
    want_xi : bool
        Accumulate the pairwise posterior summed over time.

    Returns
    -------
    loglik : float
        ``sum(log(scale))``; ``-inf`` when the evidence is impossible.
    alpha, beta : ndarray (L, S)
        Scaled messages; ``alpha * beta`` is the slice posterior.
    scale : ndarray (L,)
    xi_sum : ndarray (S, S)
        ``sum_t P(state[t], state[t+1] | evidence)``; zeros if not requested.
    """
    init = np.asarray(init, dtype=float)
    trans = np.asarray(trans, dtype=float)
    evidence = np.asarray(evidence, dtype=float)
    L, S = evidence.shape
    alpha = np.zeros((L, S))
    beta = np.zeros((L, S))
    scale = np.zeros(L)
    xi_sum = np.zeros((S, S))

    a = init * evidence[0]
    c = a.sum()
    scale[0] = c
    if c <= 0.0:
        return -math.inf, alpha, beta, scale, xi_sum
    alpha[0] = a / c
    for t in range(1, L):
        a = (alpha[t - 1] @ trans) * evidence[t]
        c = a.sum()
        scale[t] = c
        if c <= 0.0:
            return -math.inf, alpha, beta, scale, xi_sum
        alpha[t] = a / c

    beta[L - 1] = 1.0
    for t in range(L - 2, -1, -1):
        w = evidence[t + 1] * beta[t + 1] / scale[t + 1]
        beta[t] = trans @ w
        if want_xi:
            xi_sum += alpha[t][:, None] * trans * w[None, :]
    return float(np.log(scale).sum()), alpha, beta, scale, xi_sum
