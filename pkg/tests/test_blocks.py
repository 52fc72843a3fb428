import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from distlab import blocks as bl
from distlab import lti
from distlab.graph import normalize


def trajectory(e, g, signal, steps, init=None):
    return np.array([y for _, _, y in bl.simulate_estimator(e, g, signal, steps, init)])


def test_p_two_agents(pair):
    ys = trajectory(bl.p_estimator(), pair, lambda k: np.array([0.0, 2.0]), 3)
    assert np.array_equal(ys, [[0, 2], [1, 1], [1, 1]])


def test_p_transfer_rows():
    t = bl.p_estimator().transfer()
    for z in (2.0, 0.3 + 0.4j, -1.5):
        assert np.allclose(t(z), [[1, -1 / (z - 1)], [1, -1 / (z - 1)]])
    assert np.allclose(lti.realize(t).markov(6), bl.p_estimator().block().markov(6))


@pytest.mark.parametrize(
    "e", [bl.p_estimator(), bl.accelerated_estimator(0.1, 1.1), bl.pi_estimator(1, 0.5, 0.95)]
)
def test_identical_inputs(fig2, e):
    ys = trajectory(e, fig2, lambda k: np.full(5, 3.5), 600)
    assert np.allclose(ys[-1], 3.5, atol=1e-8)
    if e.kind != bl.PI:
        assert np.allclose(ys, 3.5, atol=1e-14)


def test_accelerated_degenerates_to_p(fig2):
    rng = np.random.default_rng(3)
    W = rng.standard_normal((50, 5))
    a = trajectory(bl.accelerated_estimator(0.0, 1.0), fig2, lambda k: W[k], 50)
    p = trajectory(bl.p_estimator(), fig2, lambda k: W[k], 50)
    assert np.allclose(a, p, atol=1e-14)


def test_accelerated_tracks_constant(fig2):
    w = np.random.default_rng(5).standard_normal(5)
    ys = trajectory(bl.accelerated_estimator(0.1, 1.1), fig2, lambda k: w, 500)
    err = np.abs(ys - w.mean()).max(axis=1)
    assert err[-1] < 1e-10
    # geometric decay before reaching machine precision
    assert err[20] < 1e-3 * err[1] and err[40] < 1e-3 * err[20]


def test_pi_average_mode(fig2):
    k_p, k_i, zeta = 1.0, 0.5, 0.95
    e = bl.pi_estimator(k_p, k_i, zeta)
    rng = np.random.default_rng(11)
    w = rng.standard_normal(5)
    init = rng.standard_normal((2, 5))
    gen = bl.simulate_estimator(e, fig2, lambda k: w, 50, init)
    prev = init[0].mean()
    for k, _, y in gen:
        if k:
            assert abs(y.mean() - (zeta * prev + (1 - zeta) * w.mean())) < 1e-12
        prev = y.mean()


@pytest.mark.parametrize("graph_name", ["fig2", "dropped"])
def test_pi_initialization_free(graph_name, fig2, dropped):
    g = fig2 if graph_name == "fig2" else dropped
    e = bl.pi_estimator(1, 0.5, 0.95)
    rng = np.random.default_rng(1)
    act = sorted(g.active)
    for _ in range(10):
        w = rng.standard_normal(5)
        init = rng.standard_normal((2, 5))
        ys = trajectory(e, g, lambda k: w, 2000, init)
        assert np.max(np.abs(ys[-1][act] - w[act].mean())) < 1e-8


@pytest.mark.parametrize("graph_name", ["fig2", "dropped"])
def test_pi_spectral_radius(graph_name, fig2, dropped):
    g = fig2 if graph_name == "fig2" else dropped
    M = bl.network_matrix(bl.pi_estimator(1, 0.5, 0.95), g)
    ev = np.linalg.eigvals(M)
    # fixed subspace: eigenvalue 1 (integral consensus mode); everything else strictly inside
    rest = ev[np.abs(ev - 1) > 1e-9]
    assert np.sum(np.abs(ev - 1) <= 1e-9) == 1
    assert np.max(np.abs(rest)) < 1


def test_average_preservation(fig2):
    rng = np.random.default_rng(2)
    W = rng.standard_normal((100, 5)).cumsum(axis=0)
    for e in (bl.p_estimator(), bl.accelerated_estimator(0.1, 1.1)):
        ys = trajectory(e, fig2, lambda k: W[k], 100)
        assert np.allclose(ys.mean(axis=1), W.mean(axis=1), atol=1e-12, rtol=0)


def test_order_checks(fig2):
    P = bl.p_estimator()
    assert bl.check_estimator_order(P, fig2, 1)
    assert not bl.check_estimator_order(P, fig2, 2)
    assert bl.check_estimator_order(bl.series_estimator(P, P), fig2, 2)
    assert bl.check_estimator_order(bl.accelerated_estimator(0.1, 1.1), fig2, 1)
    assert bl.check_estimator_order(bl.pi_estimator(1, 0.5, 0.95), fig2, 1)


def test_order_rejects_bad_graph():
    from distlab.graph import LaplacianGraph

    with pytest.raises(ValueError, match="balanced"):
        bl.check_estimator_order(bl.p_estimator(), LaplacianGraph.from_weights([[0, 1], [0, 0]]), 1)


def test_series_comm_dim():
    P, PI = bl.p_estimator(), bl.pi_estimator(1, 0.5, 0.95)
    s = bl.series_estimator(P, PI)
    assert (P.comm_dim, PI.comm_dim, s.comm_dim) == (1, 2, 3)
    blk = s.block()
    assert (blk.n_inputs, blk.n_outputs, blk.n_states) == (4, 4, 3)


def test_series_wiring(fig2):
    # series(P, P) estimate equals a second P run on the first P's estimate
    P = bl.p_estimator()
    rng = np.random.default_rng(4)
    W = rng.standard_normal((40, 5))
    y1 = trajectory(P, fig2, lambda k: W[k], 40)
    y2 = trajectory(P, fig2, lambda k: y1[k], 40)
    ys = trajectory(bl.series_estimator(P, P), fig2, lambda k: W[k], 40)
    assert np.allclose(ys, y2, atol=1e-13)


def test_gradient_method_quadratic():
    blk = bl.gradient_method(0.25).block()
    ys = []
    for _ in range(40):
        y = blk.output([0.0])[0]
        ys.append(y)
        blk.advance([y - 4.0])
    assert ys[:3] == [0.0, 1.0, 1.75]
    assert np.allclose(np.diff(np.array(ys) - 4)[1:] / np.diff(np.array(ys) - 4)[:-1], 0.75)


def test_gradient_method_ramp():
    blk = bl.gradient_method(0.25).block()
    ys = [blk.step([2.0])[0] for _ in range(6)]
    assert np.allclose(ys, -0.25 * 2.0 * np.arange(6), atol=0)


@pytest.mark.parametrize("o", [bl.gradient_method(0.25), bl.general_first_order(0.1, 0.8, 0)])
def test_optimizer_poles_and_properness(o):
    p = lti.poles(o.transfer())
    assert any(abs(z - 1) < 1e-12 for z in p)
    assert lti.is_strictly_proper(o.transfer())


def test_first_order_poles():
    assert np.allclose(lti.poles(bl.general_first_order(0.1, 0.8, 0).transfer()), [0.8, 1.0])


def test_first_order_reduces_to_gradient():
    a = bl.general_first_order(0.3, 0.0, 0.0).block()
    g = bl.gradient_method(0.3).block()
    u = np.random.default_rng(0).standard_normal(30)
    assert np.allclose([a.step([x])[0] for x in u], [g.step([x])[0] for x in u], atol=1e-14)


def test_heavy_ball_hand_recursion():
    alpha, beta, eps = 0.1, 0.8, 0.5
    blk = bl.general_first_order(alpha, beta, 0).block()
    blk.state = bl.hold_state(blk, 1.0)[:, None]
    ys = []
    for _ in range(200):
        y = blk.output([0.0])[0]
        ys.append(y)
        blk.advance([eps * y])
    ref = [1.0, 1.0]
    while len(ref) < 201:
        ref.append((1 + beta) * ref[-1] - beta * ref[-2] - alpha * eps * ref[-1])
    assert np.allclose(ys, ref[1:201], atol=1e-14)
    assert abs(ys[-1]) < 1e-6


def test_optimizer_validity():
    assert bl.check_optimizer_validity(bl.gradient_method(0.25), (0.1, 1.0))
    assert not bl.check_optimizer_validity(bl.gradient_method(0.25), (10.0,))
    assert bl.check_optimizer_validity(bl.general_first_order(0.1, 0.8, 0), (0.1, 1.0))


def test_optimizer_validity_rejects_empty():
    with pytest.raises(ValueError):
        bl.check_optimizer_validity(bl.gradient_method(0.25), ())


def test_heavy_ball_spectral_radius():
    # independent check: companion matrix of the closed loop on eps/2 y^2
    for eps in (0.1, 1.0):
        M = np.array([[1 + 0.8 - 0.1 * eps, -0.8], [1, 0]])
        assert np.max(np.abs(np.linalg.eigvals(M))) < 1


@pytest.mark.parametrize(
    "factory,args",
    [
        (bl.gradient_method, (0.0,)),
        (bl.gradient_method, (-1.0,)),
        (bl.general_first_order, (0.1, 1.0, 0.0)),
        (bl.general_first_order, (0.1, 0.5, -0.1)),
        (bl.accelerated_estimator, (1.0, 1.0)),
        (bl.accelerated_estimator, (0.1, 0.0)),
        (bl.pi_estimator, (1.0, 0.5, 1.0)),
        (bl.pi_estimator, (0.0, 0.5, 0.5)),
    ],
)
def test_parameter_ranges(factory, args):
    with pytest.raises(ValueError):
        factory(*args)


@settings(max_examples=40, deadline=None)
@given(
    st.floats(0.01, 2.0),
    st.floats(0.0, 0.95),
    st.floats(0.0, 3.0),
)
def test_optimizer_fixed_points_need_zero_input(alpha, beta, gamma):
    blk = bl.general_first_order(alpha, beta, gamma).block()
    # stationary x with constant u: (I - A) x = B u. With a pole at 1, [I - A, -B] has a kernel only at u = 0.
    M = np.hstack([np.eye(blk.n_states) - blk.A, -blk.B])
    _, s, vt = np.linalg.svd(M)
    null = vt[np.sum(s > 1e-10):]
    assert null.size
    assert np.allclose(null[:, -1], 0, atol=1e-10)


def test_str():
    assert str(bl.series_estimator(bl.p_estimator(), bl.p_estimator())) == "series(P, P)"
    assert str(bl.gradient_method(0.25)) == "gradient(alpha=0.25)"


def test_normalized_graph_keeps_contracts(fig2):
    g = normalize(fig2)
    P = bl.p_estimator()
    assert bl.check_estimator_order(bl.series_estimator(P, P), g, 2)
    assert not bl.check_estimator_order(P, g, 2)
