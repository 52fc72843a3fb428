import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from distlab import problem as pb


def f(p, i, y):
    return 0.5 * y @ p.A[i] @ y - p.b[i] @ y


def test_spectrum_and_symmetry(problem):
    for Ai in problem.A:
        assert np.max(np.abs(Ai - Ai.T)) <= 1e-12
        assert np.allclose(np.sort(np.linalg.eigvalsh(Ai)), [0.1, 0.55, 1.0], atol=1e-10, rtol=0)


def test_single_point_grid():
    p = pb.sample(1, 1, 9)
    assert p.A[0, 0, 0] == pytest.approx(0.1, abs=1e-15)


def test_sample_deterministic():
    a, b = pb.sample(5, 3, 42), pb.sample(5, 3, 42)
    assert np.array_equal(a.A, b.A) and np.array_equal(a.b, b.b)
    c = pb.sample(5, 3, 43)
    assert not np.array_equal(a.b, c.b)


def test_sample_seed_sequence():
    ss = np.random.SeedSequence([0, 3])
    assert np.array_equal(pb.sample(5, 3, ss).b, pb.sample(5, 3, np.random.SeedSequence([0, 3])).b)


def test_sample_rejects_empty():
    with pytest.raises(ValueError):
        pb.sample(0, 3, 0)


def test_haar_orthogonal():
    Q = pb.haar_orthogonal(np.random.default_rng(0), 4)
    assert np.allclose(Q.T @ Q, np.eye(4), atol=1e-14)


def test_gradient_zero_at_local_minimizer(problem):
    y = np.linalg.solve(problem.A[2], problem.b[2])
    assert np.allclose(pb.gradient(problem, 2, y), 0, atol=1e-14)


def test_gradient_identity():
    p = pb.QuadraticProblem(np.eye(3)[None], np.zeros((1, 3)))
    assert np.array_equal(pb.gradient(p, 0, [1, 2, 3]), [1, 2, 3])


def test_gradient_bad_index(problem):
    with pytest.raises(IndexError):
        pb.gradient(problem, 5, np.zeros(3))


def test_gradient_finite_difference(problem):
    rng = np.random.default_rng(0)
    h = 1e-5
    for _ in range(10):
        y = rng.standard_normal(3)
        i = int(rng.integers(5))
        fd = np.array([(f(problem, i, y + h * e) - f(problem, i, y - h * e)) / (2 * h) for e in np.eye(3)])
        assert np.allclose(pb.gradient(problem, i, y), fd, atol=1e-6, rtol=0)


def test_gradients_batch(problem):
    Y = np.random.default_rng(1).standard_normal((5, 3))
    G = pb.gradients(problem, Y)
    for i in range(5):
        assert np.allclose(G[i], pb.gradient(problem, i, Y[i]), atol=1e-15)


def test_optimum_average():
    b = np.array([[1.0, 2.0], [3.0, -2.0]])
    p = pb.QuadraticProblem(np.stack([np.eye(2)] * 2), b)
    assert np.allclose(pb.optimum(p), [2.0, 0.0])


def test_optimum_zero_b(problem):
    p = pb.QuadraticProblem(problem.A, np.zeros_like(problem.b))
    assert np.array_equal(pb.optimum(p), np.zeros(3))


def test_optimum_residual(problem):
    y = pb.optimum(problem)
    assert np.linalg.norm(pb.gradients(problem, np.tile(y, (5, 1))).sum(axis=0)) <= 1e-10


def test_optimum_active_subset(problem):
    y = pb.optimum(problem, active={1, 2, 3, 4})
    r = sum(pb.gradient(problem, i, y) for i in (1, 2, 3, 4))
    assert np.linalg.norm(r) <= 1e-10


def test_optimum_singular():
    p = pb.QuadraticProblem(np.zeros((2, 2, 2)), np.ones((2, 2)))
    with pytest.raises(ValueError, match="singular"):
        pb.optimum(p)


def test_errors_example():
    p = pb.QuadraticProblem(np.ones((2, 1, 1)), np.full((2, 1), 2.0))
    assert pb.errors(p, [[1.0], [3.0]]) == (0.0, 2.0)


def test_errors_at_optimum(problem):
    e_opt, e_con = pb.errors(problem, np.tile(pb.optimum(problem), (5, 1)))
    assert e_opt < 1e-12 and e_con == 0.0


def test_errors_consensus_not_optimal(problem):
    e_opt, e_con = pb.errors(problem, np.ones((5, 3)))
    assert e_con == 0.0 and e_opt > 0


def test_errors_ignore_inactive(problem):
    Y = np.tile(pb.optimum(problem, {1, 2, 3, 4}), (5, 1))
    Y[0] = 100.0
    e_opt, e_con = pb.errors(problem, Y, {1, 2, 3, 4})
    assert e_opt < 1e-12 and e_con == 0.0


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.permutations(range(5)))
def test_permutation_invariance(seed, perm):
    p = pb.sample(5, 3, seed)
    q = pb.QuadraticProblem(p.A[list(perm)], p.b[list(perm)])
    assert np.allclose(pb.optimum(p), pb.optimum(q), atol=1e-12)
    Y = np.random.default_rng(seed).standard_normal((5, 3))
    assert np.allclose(pb.errors(p, Y), pb.errors(q, Y[list(perm)]), atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1e-6, 10.0))
def test_zero_total_iff_optimal_consensus(seed, shift):
    p = pb.sample(5, 3, seed)
    y = pb.optimum(p)
    assert max(pb.errors(p, np.tile(y, (5, 1)))) <= 1e-12
    Y = np.tile(y, (5, 1))
    Y[0, 0] += shift
    assert max(pb.errors(p, Y)) > 1e-12


def test_error_trace():
    t = pb.ErrorTrace([3.0, 1.0, 1e-9, 1e-10], [0.5, 2.0, 1e-11, 1e-12])
    assert np.array_equal(t.e_total, [3.0, 2.0, 1e-9, 1e-10])
    assert len(t) == 4 and t.first_below(1e-8) == 2
    assert t.first_below(1e-12) is None
    bounce = pb.ErrorTrace([1.0, 1e-9, 1.0, 1e-9], [0, 0, 0, 0])
    assert bounce.first_below(1e-8) == 3


def test_dump_load_roundtrip(problem, tmp_path):
    path = tmp_path / "p.txt"
    pb.dump_problem(problem, path)
    q = pb.load_problem(path)
    assert np.array_equal(q.A, problem.A) and np.array_equal(q.b, problem.b)


def test_load_bad_shape(tmp_path):
    path = tmp_path / "p.txt"
    path.write_text("2 2\n1 0\n0 1\n")
    with pytest.raises(ValueError, match="expected"):
        pb.load_problem(path)


def test_problem_read_only(problem):
    with pytest.raises(ValueError):
        problem.b[0, 0] = 1.0
