"""Linear-chain conditional random field over tag sequences.

The transition matrix ``A`` has shape (K+2, K+2) for K tags: row/column
indices 0..K-1 are tags, K is the start state, and K+1 is the end state.
A path ``y`` of length n over an emission matrix ``P`` (n positions by K
tags) scores

    sum_i A[y_i, y_{i+1}] + sum_i P[i, y_i]

where the transition sum includes start -> y_1 and y_n -> end.  All
probability arithmetic is carried out in log-space with max-subtraction
log-sum-exp; the log-partition uses the forward recursion, gradients come
from forward-backward marginals, and decoding is exact Viterbi.

Transitions into the start state and out of the end state are never read:
every recursion indexes only the legal sub-blocks of ``A``, so those
entries need no infinite masking and their gradients are exactly zero.
"""

from __future__ import annotations

import itertools

import numpy as np

# States appended after the K tag rows/columns of a transition matrix.
NUM_EXTRA_STATES = 2

# Enumeration guard for the exhaustive oracle.
MAX_BRUTE_FORCE_PATHS = 10**6


def zero_transitions(num_tags: int) -> np.ndarray:
    """Uniform (all-zero) transition matrix for ``num_tags`` tags."""
    if num_tags < 1:
        raise ValueError(f"num_tags must be positive, got {num_tags}")
    return np.zeros((num_tags + NUM_EXTRA_STATES, num_tags + NUM_EXTRA_STATES))


def _check_matrices(transitions, emissions) -> tuple[np.ndarray, np.ndarray]:
    A = np.asarray(transitions, dtype=float)
    P = np.asarray(emissions, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"transition matrix must be square, got shape {A.shape}")
    if P.ndim != 2 or P.shape[0] < 1:
        raise ValueError(f"emission matrix must be n x K with n >= 1, got shape {P.shape}")
    num_tags = A.shape[0] - NUM_EXTRA_STATES
    if num_tags < 1:
        raise ValueError(f"transition matrix of shape {A.shape} leaves no tag states")
    if P.shape[1] != num_tags:
        raise ValueError(f"emission matrix has {P.shape[1]} tags but transitions have {num_tags}")
    if not np.all(np.isfinite(A)):
        raise ValueError("transition matrix contains non-finite entries")
    if not np.all(np.isfinite(P)):
        raise ValueError("emission matrix contains non-finite entries")
    return A, P


def _check_path(path, length: int, num_tags: int) -> np.ndarray:
    y = np.asarray(path, dtype=int)
    if y.ndim != 1 or y.shape[0] != length:
        raise ValueError(f"tag path must have length {length}, got shape {y.shape}")
    if y.size and (y.min() < 0 or y.max() >= num_tags):
        raise ValueError(f"tag path entries must lie in [0, {num_tags})")
    return y


def _logsumexp(a: np.ndarray, axis: int) -> np.ndarray:
    """Log-sum-exp with max-subtraction, safe for all-(-inf) slices."""
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    out = np.log(np.sum(np.exp(a - m), axis=axis)) + np.squeeze(m, axis=axis)
    return out


def path_score(transitions, emissions, path) -> float:
    """Score of one tag path, including the start and end transitions."""
    A, P = _check_matrices(transitions, emissions)
    n, K = P.shape
    y = _check_path(path, n, K)
    start, end = K, K + 1
    score = A[start, y[0]] + A[y[-1], end] + P[np.arange(n), y].sum()
    if n > 1:
        score += A[y[:-1], y[1:]].sum()
    return float(score)


def _forward(A: np.ndarray, P: np.ndarray) -> np.ndarray:
    """Forward log-scores: alpha[i, t] sums all length-(i+1) prefixes ending in t."""
    n, K = P.shape
    start = K
    alpha = np.empty((n, K))
    alpha[0] = A[start, :K] + P[0]
    for i in range(1, n):
        alpha[i] = P[i] + _logsumexp(alpha[i - 1][:, np.newaxis] + A[:K, :K], axis=0)
    return alpha


def _backward(A: np.ndarray, P: np.ndarray) -> np.ndarray:
    """Backward log-scores: beta[i, t] sums all suffixes after position i in t."""
    n, K = P.shape
    end = K + 1
    beta = np.empty((n, K))
    beta[n - 1] = A[:K, end]
    for i in range(n - 2, -1, -1):
        beta[i] = _logsumexp(A[:K, :K] + (P[i + 1] + beta[i + 1])[np.newaxis, :], axis=1)
    return beta


def log_partition(transitions, emissions) -> float:
    """log of the summed exp-scores of all K^n tag paths (forward algorithm)."""
    A, P = _check_matrices(transitions, emissions)
    K = P.shape[1]
    alpha = _forward(A, P)
    return float(_logsumexp(alpha[-1] + A[:K, K + 1], axis=0))


def log_likelihood(transitions, emissions, path):
    """Log-probability of ``path`` and its analytic gradients.

    Returns ``(value, grad_transitions, grad_emissions)`` where the value is
    ``path_score - log_partition`` and each gradient entry is the empirical
    feature count minus its model expectation under forward-backward
    marginals.  Gradient rows for transitions into start or out of end are
    zero since those entries are never part of a path score.
    """
    A, P = _check_matrices(transitions, emissions)
    n, K = P.shape
    y = _check_path(path, n, K)
    start, end = K, K + 1

    alpha = _forward(A, P)
    beta = _backward(A, P)
    log_z = float(_logsumexp(alpha[-1] + A[:K, end], axis=0))
    value = path_score(A, P, y) - log_z

    # Position marginals: q[i, t] = p(y_i = t | X).
    q = np.exp(alpha + beta - log_z)

    grad_P = -q
    grad_P[np.arange(n), y] += 1.0

    grad_A = np.zeros_like(A)
    grad_A[start, :K] -= q[0]
    grad_A[start, y[0]] += 1.0
    grad_A[:K, end] -= q[n - 1]
    grad_A[y[-1], end] += 1.0
    for i in range(1, n):
        # Pairwise marginals for the transition into position i.
        xi = np.exp(
            alpha[i - 1][:, np.newaxis] + A[:K, :K] + (P[i] + beta[i])[np.newaxis, :] - log_z
        )
        grad_A[:K, :K] -= xi
        grad_A[y[i - 1], y[i]] += 1.0
    return value, grad_A, grad_P


def viterbi_decode(transitions, emissions) -> tuple[list[int], float]:
    """Highest-scoring tag path and its score.

    Score ties are broken toward the lowest tag index at every backtrack
    step, so the result is deterministic.
    """
    A, P = _check_matrices(transitions, emissions)
    n, K = P.shape
    start, end = K, K + 1

    delta = A[start, :K] + P[0]
    backpointers = np.empty((n, K), dtype=int)
    for i in range(1, n):
        candidates = delta[:, np.newaxis] + A[:K, :K]
        backpointers[i] = np.argmax(candidates, axis=0)
        delta = P[i] + candidates[backpointers[i], np.arange(K)]

    final = delta + A[:K, end]
    best = int(np.argmax(final))
    score = float(final[best])
    path = [best]
    for i in range(n - 1, 0, -1):
        best = int(backpointers[i, best])
        path.append(best)
    path.reverse()
    return path, score


def brute_force_oracle(transitions, emissions) -> tuple[float, list[int]]:
    """Exhaustive-enumeration reference for testing.

    Returns the log-partition computed by direct summation over all K^n
    paths and the argmax path under the same tie-break rule as
    :func:`viterbi_decode` (among equal-scoring paths, the one whose
    reversed tag sequence is lexicographically smallest).
    """
    A, P = _check_matrices(transitions, emissions)
    n, K = P.shape
    if K**n > MAX_BRUTE_FORCE_PATHS:
        raise ValueError(f"refusing to enumerate {K}^{n} paths")

    scores = []
    best_score = -np.inf
    best_path: tuple[int, ...] | None = None
    for path in itertools.product(range(K), repeat=n):
        s = path_score(A, P, path)
        scores.append(s)
        if s > best_score or (s == best_score and path[::-1] < best_path[::-1]):
            best_score = s
            best_path = path
    scores = np.asarray(scores)
    m = scores.max()
    log_z = float(np.log(np.exp(scores - m).sum()) + m)
    return log_z, list(best_path)
