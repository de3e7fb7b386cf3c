import itertools
import math

import numpy as np
import pytest

from crftag import crf


def oracle_path_score(A, P, path):
    # Independent plain-Python scorer: start -> y_1 -> ... -> y_n -> end.
    n, K = P.shape
    score = A[K][path[0]] + A[path[-1]][K + 1]
    for i, tag in enumerate(path):
        score += P[i][tag]
    for i in range(1, n):
        score += A[path[i - 1]][path[i]]
    return score


def oracle_enumerate(A, P):
    # Exhaustive log-partition and argmax with reversed-lex tie-breaking.
    n, K = P.shape
    best_path, best_score = None, -math.inf
    total = 0.0
    scores = []
    for path in itertools.product(range(K), repeat=n):
        s = oracle_path_score(A, P, path)
        scores.append(s)
        if s > best_score or (s == best_score and path[::-1] < best_path[::-1]):
            best_path, best_score = path, s
    m = max(scores)
    total = sum(math.exp(s - m) for s in scores)
    return math.log(total) + m, list(best_path), best_score


def random_instance(rng, n=None, num_tags=None):
    n = n if n is not None else int(rng.integers(1, 6))
    K = num_tags if num_tags is not None else int(rng.integers(1, 5))
    A = rng.uniform(-5, 5, (K + 2, K + 2))
    P = rng.uniform(-5, 5, (n, K))
    return A, P


def test_path_score_hand_computed():
    # K=2, n=2: score = A[start,0] + P[0,0] + A[0,1] + P[1,1] + A[1,end].
    A = np.arange(16, dtype=float).reshape(4, 4)
    P = np.array([[0.5, -1.0], [2.0, 0.25]])
    expected = A[2, 0] + 0.5 + A[0, 1] + 0.25 + A[1, 3]
    assert crf.path_score(A, P, [0, 1]) == pytest.approx(expected)


def test_path_score_matches_oracle():
    rng = np.random.default_rng(0)
    for _ in range(50):
        A, P = random_instance(rng)
        n, K = P.shape
        path = rng.integers(0, K, size=n)
        assert crf.path_score(A, P, path) == pytest.approx(oracle_path_score(A, P, list(path)), rel=1e-12)


def test_log_partition_single_position():
    # n=1: logZ = logsumexp_t(A[start,t] + P[0,t] + A[t,end]).
    A = np.zeros((4, 4))
    A[2] = [1.0, -2.0, 0.0, 0.0]
    A[:, 3] = [0.5, 0.5, 0.0, 0.0]
    P = np.array([[3.0, 4.0]])
    expected = np.logaddexp(1.0 + 3.0 + 0.5, -2.0 + 4.0 + 0.5)
    assert crf.log_partition(A, P) == pytest.approx(float(expected), rel=1e-12)


def test_log_partition_matches_enumeration():
    rng = np.random.default_rng(1)
    for _ in range(100):
        A, P = random_instance(rng)
        expected, _, _ = oracle_enumerate(A, P)
        assert crf.log_partition(A, P) == pytest.approx(expected, rel=1e-10, abs=1e-10)


def test_log_partition_emission_shift_invariance():
    # Adding c to every emission at one position shifts logZ by exactly c.
    rng = np.random.default_rng(2)
    A, P = random_instance(rng, n=4, num_tags=3)
    base = crf.log_partition(A, P)
    shifted = P.copy()
    shifted[2] += 7.5
    assert crf.log_partition(A, shifted) == pytest.approx(base + 7.5, rel=1e-12)


def test_log_partition_extreme_magnitudes():
    # Max-subtraction keeps large scores finite.
    A = crf.zero_transitions(2)
    P = np.array([[1000.0, -1000.0], [1000.0, -1000.0]])
    value = crf.log_partition(A, P)
    assert np.isfinite(value)
    assert value == pytest.approx(2000.0, abs=1e-6)


def test_viterbi_matches_enumeration():
    rng = np.random.default_rng(3)
    for _ in range(100):
        A, P = random_instance(rng)
        _, best_path, best_score = oracle_enumerate(A, P)
        path, score = crf.viterbi_decode(A, P)
        assert path == best_path
        assert score == pytest.approx(best_score, rel=1e-10, abs=1e-10)


def test_viterbi_tie_break_prefers_lowest_index():
    # All-equal scores: every path ties, so the all-zeros path must win.
    A = crf.zero_transitions(3)
    P = np.zeros((4, 3))
    path, score = crf.viterbi_decode(A, P)
    assert path == [0, 0, 0, 0]
    assert score == pytest.approx(0.0)


def test_viterbi_forced_transitions():
    # Strongly negative transitions forbid all but one path.
    K = 3
    A = np.full((K + 2, K + 2), -10000.0)
    A[K, 1] = 0.0
    A[1, 2] = 0.0
    A[2, 0] = 0.0
    A[0, K + 1] = 0.0
    P = np.zeros((3, K))
    path, score = crf.viterbi_decode(A, P)
    assert path == [1, 2, 0]
    assert score == pytest.approx(0.0)


def test_log_likelihood_value():
    rng = np.random.default_rng(4)
    for _ in range(30):
        A, P = random_instance(rng)
        n, K = P.shape
        y = rng.integers(0, K, size=n)
        value, _, _ = crf.log_likelihood(A, P, y)
        log_z, _, _ = oracle_enumerate(A, P)
        assert value == pytest.approx(oracle_path_score(A, P, list(y)) - log_z, rel=1e-10, abs=1e-10)
        assert value <= 1e-12


def test_log_likelihood_gradients_finite_difference():
    # Central differences on the oracle value function, every entry of A and P.
    rng = np.random.default_rng(5)
    step = 1e-5
    for _ in range(10):
        A, P = random_instance(rng, n=4, num_tags=3)
        n, K = P.shape
        y = list(rng.integers(0, K, size=n))

        def value(A_mod, P_mod):
            log_z, _, _ = oracle_enumerate(A_mod, P_mod)
            return oracle_path_score(A_mod, P_mod, y) - log_z

        _, grad_A, grad_P = crf.log_likelihood(A, P, y)
        for idx in np.ndindex(A.shape):
            plus, minus = A.copy(), A.copy()
            plus[idx] += step
            minus[idx] -= step
            numeric = (value(plus, P) - value(minus, P)) / (2 * step)
            assert grad_A[idx] == pytest.approx(numeric, rel=1e-5, abs=1e-8)
        for idx in np.ndindex(P.shape):
            plus, minus = P.copy(), P.copy()
            plus[idx] += step
            minus[idx] -= step
            numeric = (value(A, plus) - value(A, minus)) / (2 * step)
            assert grad_P[idx] == pytest.approx(numeric, rel=1e-5, abs=1e-8)


def test_log_likelihood_gradient_structure():
    # Entries that no path can use carry exactly zero gradient.
    rng = np.random.default_rng(6)
    A, P = random_instance(rng, n=3, num_tags=3)
    K = 3
    _, grad_A, _ = crf.log_likelihood(A, P, [0, 1, 2])
    assert np.all(grad_A[:, K] == 0.0)
    assert np.all(grad_A[K + 1, :] == 0.0)
    assert grad_A[K, K + 1] == 0.0


def test_log_likelihood_normalization():
    rng = np.random.default_rng(7)
    for _ in range(10):
        A, P = random_instance(rng, n=3, num_tags=3)
        total = sum(
            math.exp(crf.log_likelihood(A, P, path)[0])
            for path in itertools.product(range(3), repeat=3)
        )
        assert total == pytest.approx(1.0, abs=1e-12)


def test_gradient_is_empirical_minus_expected():
    # Expected counts under enumerated path probabilities.
    rng = np.random.default_rng(8)
    A, P = random_instance(rng, n=3, num_tags=2)
    n, K = P.shape
    y = [1, 0, 1]
    log_z, _, _ = oracle_enumerate(A, P)
    expected_P = np.zeros_like(P)
    expected_A = np.zeros_like(A)
    for path in itertools.product(range(K), repeat=n):
        prob = math.exp(oracle_path_score(A, P, path) - log_z)
        for i, tag in enumerate(path):
            expected_P[i, tag] += prob
        expected_A[K, path[0]] += prob
        expected_A[path[-1], K + 1] += prob
        for i in range(1, n):
            expected_A[path[i - 1], path[i]] += prob
    empirical_P = np.zeros_like(P)
    empirical_A = np.zeros_like(A)
    for i, tag in enumerate(y):
        empirical_P[i, tag] = 1.0
    empirical_A[K, y[0]] += 1.0
    empirical_A[y[-1], K + 1] += 1.0
    for i in range(1, n):
        empirical_A[y[i - 1], y[i]] += 1.0

    _, grad_A, grad_P = crf.log_likelihood(A, P, y)
    np.testing.assert_allclose(grad_P, empirical_P - expected_P, atol=1e-10)
    np.testing.assert_allclose(grad_A, empirical_A - expected_A, atol=1e-10)


def test_brute_force_oracle_agrees_with_in_test_enumeration():
    rng = np.random.default_rng(9)
    for _ in range(30):
        A, P = random_instance(rng)
        log_z, best = crf.brute_force_oracle(A, P)
        expected_z, expected_path, _ = oracle_enumerate(A, P)
        assert log_z == pytest.approx(expected_z, rel=1e-12)
        assert best == expected_path


def test_brute_force_oracle_refuses_large_instances():
    A = crf.zero_transitions(10)
    P = np.zeros((7, 10))
    with pytest.raises(ValueError, match="refusing"):
        crf.brute_force_oracle(A, P)


def test_zero_transitions_shape():
    A = crf.zero_transitions(5)
    assert A.shape == (7, 7)
    assert np.all(A == 0.0)
    with pytest.raises(ValueError):
        crf.zero_transitions(0)


@pytest.mark.parametrize(
    "transitions, emissions, message",
    [
        (np.zeros((4, 3)), np.zeros((2, 2)), "square"),
        (np.zeros((4, 4)), np.zeros((0, 2)), "n >= 1"),
        (np.zeros((4, 4)), np.zeros((2, 3)), "tags"),
        (np.zeros((2, 2)), np.zeros((2, 2)), "no tag states"),
    ],
)
def test_shape_validation(transitions, emissions, message):
    with pytest.raises(ValueError, match=message):
        crf.log_partition(transitions, emissions)


def test_non_finite_rejected():
    A = crf.zero_transitions(2)
    P = np.zeros((2, 2))
    A_bad = A.copy()
    A_bad[0, 0] = np.nan
    with pytest.raises(ValueError, match="non-finite"):
        crf.log_partition(A_bad, P)
    P_bad = P.copy()
    P_bad[0, 0] = np.inf
    with pytest.raises(ValueError, match="non-finite"):
        crf.log_partition(A, P_bad)


def test_path_validation():
    A = crf.zero_transitions(2)
    P = np.zeros((3, 2))
    with pytest.raises(ValueError, match="length"):
        crf.path_score(A, P, [0, 1])
    with pytest.raises(ValueError, match="lie in"):
        crf.path_score(A, P, [0, 1, 2])
