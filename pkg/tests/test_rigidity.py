import itertools

import numpy as np
import pytest

from divlam import DiscreteInclusion, discrete_divergence_fd, enumerate_exact, gradient_equivalence_2d, verify_hyperplane_hypothesis
from divlam.exceptions import DomainError, ShapeError
from divlam.rigidity import J, check_hyperplane_system


def brute_force(K, dims):
    """Count assignments with zero backward-difference divergence by trying all of them."""
    K = np.stack([np.asarray(a, dtype=float) for a in K])
    n = len(dims)
    count = 0
    for choice in itertools.product(range(len(K)), repeat=int(np.prod(dims))):
        B = K[np.array(choice).reshape(dims)]
        div = sum(B[..., k] - np.roll(B, 1, axis=k)[..., k] for k in range(n))
        if np.max(np.abs(div)) < 1e-9:
            count += 1
    return count


CASES = [
    ([np.zeros((2, 2)), np.eye(2)], (4, 4), 2),
    ([np.zeros((2, 2)), np.diag([1.0, 0.0])], (4, 4), 16),
    ([np.zeros((3, 3)), np.eye(3), np.diag([-0.5, 3.0, 2.0 / 3.0])], (2, 2, 2), 3),
]


@pytest.mark.parametrize("K,dims,expected", CASES)
def test_enumeration_against_brute_force(K, dims, expected):
    assert brute_force(K, dims) == expected
    res = enumerate_exact(K, dims)
    assert res.exhausted
    assert res.count == expected
    for sol in res.solutions:
        assert np.max(np.abs(discrete_divergence_fd(DiscreteInclusion(K, dims, sol)))) < 1e-12


def test_enumeration_rank_one_pair_3x3():
    K = [np.zeros((2, 2)), np.array([[0.0, 1.0], [0.0, 0.0]])]
    # column 2 only: free along x2-constant stripes, 2^3 choices on 3x3
    assert enumerate_exact(K, (3, 3)).count == brute_force(K, (3, 3)) == 8


def test_enumeration_order_and_limit():
    K = [np.zeros((2, 2)), np.diag([1.0, 0.0])]
    res = enumerate_exact(K, (4, 4))
    # first solution is the all-zero field, in the order of K
    assert not res.solutions[0].any()
    partial = enumerate_exact(K, (4, 4), limit=10)
    assert not partial.exhausted
    assert partial.nodes == 10
    d = partial.to_dict(witnesses=1)
    assert d["exhausted"] is False and len(d["witnesses"]) <= 1


def test_enumeration_errors():
    with pytest.raises(DomainError):
        enumerate_exact([np.zeros((2, 2)), np.eye(2)], (1, 4))
    with pytest.raises(ShapeError):
        enumerate_exact([np.zeros((2, 3)), np.ones((2, 3))], (4, 4))
    with pytest.raises(DomainError):
        enumerate_exact([np.eye(2), np.eye(2)], (2, 2))


def test_discrete_inclusion_validation():
    K = [np.zeros((2, 2)), np.eye(2)]
    with pytest.raises(ShapeError):
        DiscreteInclusion(K, (2, 2), np.zeros((3, 2)))
    with pytest.raises(DomainError):
        DiscreteInclusion(K, (2, 2), np.full((2, 2), 2))


def test_hyperplanes_canonical(canonical):
    sys = verify_hyperplane_hypothesis(canonical.K)
    assert sys is not None
    assert sys.rigid
    assert check_hyperplane_system(canonical.K, sys) < 1e-12
    for v, T in zip(sys.normals, sys.targets):
        # diagonal set: target of the plane orthogonal to e_i is itself
        assert T.shape == (3, 2)
        np.testing.assert_allclose(T.T @ v, 0, atol=1e-12)


def test_hyperplanes_random_conjugate():
    rng = np.random.default_rng(8)
    Q = rng.standard_normal((3, 3))
    D = [np.diag(rng.standard_normal(3)) for _ in range(4)]
    K = [np.linalg.solve(Q, d @ Q) for d in D]
    sys = verify_hyperplane_hypothesis(K)
    assert sys is not None
    rows = Q / np.linalg.norm(Q, axis=1, keepdims=True)
    for v in sys.normals:
        assert min(min(np.linalg.norm(v - r), np.linalg.norm(v + r)) for r in rows) < 1e-8


def test_hyperplanes_none_for_rotation():
    c, s = np.cos(1.0), np.sin(1.0)
    R = np.array([[c, -s, 0], [s, c, 0], [0, 0, 3.0]])
    assert verify_hyperplane_hypothesis([np.zeros((3, 3)), np.eye(3), R]) is None


def test_hyperplanes_2d():
    # n = 2 needs one common line
    K = [np.zeros((2, 2)), np.eye(2), np.array([[2.0, 1.0], [0.0, 5.0]])]
    sys = verify_hyperplane_hypothesis(K)
    assert sys is not None and len(sys.normals) == 1
    # the transpose has eigenvectors (3, -1) and (0, 1); the smaller eigenvalue comes first
    np.testing.assert_allclose(sys.normals[0], np.array([3.0, -1.0]) / np.sqrt(10), atol=1e-12)
    assert check_hyperplane_system(K, sys) < 1e-12


def test_gradient_equivalence():
    rng = np.random.default_rng(0)
    B = rng.standard_normal((6, 5, 3, 2))
    rep = gradient_equivalence_2d(B)
    assert rep.holds
    np.testing.assert_allclose(rep.curl_of_BJ, -rep.divergence, atol=1e-14)
    np.testing.assert_array_equal(J @ J, -np.eye(2))
    with pytest.raises(ShapeError):
        gradient_equivalence_2d(np.zeros((4, 4, 2, 3)))


def test_gradient_equivalence_on_solutions():
    K = [np.zeros((2, 2)), np.diag([1.0, 0.0])]
    for sol in enumerate_exact(K, (4, 4)).solutions:
        B = DiscreteInclusion(K, (4, 4), sol).field()
        assert np.max(np.abs(gradient_equivalence_2d(B).curl_of_BJ)) < 1e-14
