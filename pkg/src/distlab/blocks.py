"""Consensus estimators and optimization methods.

Every estimator compiles to a per-scalar-channel block with inputs
``[w, v_1..v_m]`` and outputs ``[y, z_1..z_m]``: ``w`` is the signal whose
network average is tracked, ``y`` the local estimate, ``z`` what gets
communicated and ``v = L z`` what comes back. Optimizers compile to a
single-input single-output block from gradient ``u`` to query point ``y``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import lti
from .graph import LaplacianGraph, is_balanced, is_connected

P, ACCELERATED, PI, SERIES = "P", "AcceleratedP", "PI", "Series"
GRADIENT, FIRST_ORDER = "Gradient", "GeneralFirstOrder"


@dataclass(frozen=True)
class EstimatorSpec:
    kind: str
    params: tuple = ()
    parts: tuple = ()

    @property
    def comm_dim(self) -> int:
        """Communicated channels per scalar coordinate of the tracked signal."""
        if self.kind == SERIES:
            return sum(p.comm_dim for p in self.parts)
        return 2 if self.kind == PI else 1

    def param(self, name: str) -> float:
        return dict(self.params)[name]

    def block(self) -> lti.StateSpaceBlock:
        if self.kind == P:
            return lti.StateSpaceBlock(
                A=[[1.0]], B=[[0.0, 1.0]], C=[[-1.0], [-1.0]], D=[[1.0, 0.0], [1.0, 0.0]]
            )
        if self.kind == ACCELERATED:
            zeta, k_i = self.param("zeta"), self.param("k_i")
            # states (x, previous x)
            return lti.StateSpaceBlock(
                A=[[1.0 + zeta, -zeta], [1.0, 0.0]],
                B=[[0.0, k_i], [0.0, 0.0]],
                C=[[-1.0, 0.0], [-1.0, 0.0]],
                D=[[1.0, 0.0], [1.0, 0.0]],
            )
        if self.kind == PI:
            k_p, k_i, zeta = self.param("k_p"), self.param("k_i"), self.param("zeta")
            # states (x, q); inputs (w, v_x, v_q); outputs (y, z_x, z_q)
            return lti.StateSpaceBlock(
                A=[[zeta, 0.0], [0.0, 1.0]],
                B=[[1.0 - zeta, -k_p, k_i], [0.0, -k_i, 0.0]],
                C=[[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
                D=np.zeros((3, 3)),
            )
        if self.kind == SERIES:
            return _series_block(*self.parts)
        raise ValueError(f"unknown estimator kind {self.kind!r}")

    def transfer(self) -> lti.TransferSpec:
        if self.kind != P:
            raise NotImplementedError(f"closed-form transfer matrix only provided for {P}")
        row = ((1.0, 1.0), (-1.0, (1.0, -1.0)))
        return lti.TransferSpec((row, row))

    def __str__(self):
        if self.kind == SERIES:
            return f"series({', '.join(map(str, self.parts))})"
        args = ", ".join(f"{k}={v:g}" for k, v in self.params)
        return f"{self.kind}({args})" if args else self.kind


def _series_block(first: EstimatorSpec, second: EstimatorSpec) -> lti.StateSpaceBlock:
    # first's estimate y1 drives second's w; communicated channels stack as (z1, z2)
    m1, m2 = first.comm_dim, second.comm_dim
    stage1 = lti.parallel(first.block(), lti.static(np.eye(m2)))  # [w, v1, v2] -> [y1, z1, v2]
    route = lti.permutation([0, *range(1 + m1, 1 + m1 + m2), *range(1, 1 + m1)])
    stage2 = lti.parallel(second.block(), lti.static(np.eye(m1)))  # [y1, v2, z1] -> [y, z2, z1]
    unroute = lti.permutation([0, *range(1 + m2, 1 + m2 + m1), *range(1, 1 + m2)])
    return lti.series(lti.series(lti.series(stage1, route), stage2), unroute)


@dataclass(frozen=True)
class OptimizerSpec:
    kind: str
    alpha: float
    beta: float = 0.0
    gamma: float = 0.0

    def transfer(self) -> lti.TransferSpec:
        """``-alpha (z + gamma (z - 1)) / ((z - beta)(z - 1))``; the gradient method is ``-alpha/(z-1)``."""
        if self.kind == GRADIENT:
            return lti.TransferSpec.siso([-self.alpha], [1.0, -1.0])
        num = [-self.alpha * (1.0 + self.gamma), self.alpha * self.gamma]
        den = np.polymul([1.0, -self.beta], [1.0, -1.0])
        return lti.TransferSpec.siso(num, den)

    def block(self) -> lti.StateSpaceBlock:
        return lti.realize(self.transfer())

    def __str__(self):
        if self.kind == GRADIENT:
            return f"gradient(alpha={self.alpha:g})"
        return f"first_order(alpha={self.alpha:g}, beta={self.beta:g}, gamma={self.gamma:g})"


def p_estimator() -> EstimatorSpec:
    return EstimatorSpec(P)


def accelerated_estimator(zeta: float, k_i: float) -> EstimatorSpec:
    if not k_i > 0:
        raise ValueError(f"k_i must be positive, got {k_i}")
    if not 0 <= zeta < 1:
        raise ValueError(f"zeta must lie in [0, 1), got {zeta}")
    return EstimatorSpec(ACCELERATED, (("zeta", float(zeta)), ("k_i", float(k_i))))


def pi_estimator(k_p: float, k_i: float, zeta: float) -> EstimatorSpec:
    if not (k_p > 0 and k_i > 0):
        raise ValueError(f"k_p and k_i must be positive, got k_p={k_p}, k_i={k_i}")
    if not 0 <= zeta < 1:
        raise ValueError(f"zeta must lie in [0, 1), got {zeta}")
    return EstimatorSpec(PI, (("k_p", float(k_p)), ("k_i", float(k_i)), ("zeta", float(zeta))))


def series_estimator(first: EstimatorSpec, second: EstimatorSpec) -> EstimatorSpec:
    return EstimatorSpec(SERIES, parts=(first, second))


def gradient_method(alpha: float) -> OptimizerSpec:
    if not alpha > 0:
        raise ValueError(f"stepsize alpha must be positive, got {alpha}")
    return OptimizerSpec(GRADIENT, float(alpha))


def general_first_order(alpha: float, beta: float, gamma: float) -> OptimizerSpec:
    if not alpha > 0:
        raise ValueError(f"stepsize alpha must be positive, got {alpha}")
    if not 0 <= beta < 1:
        raise ValueError(f"beta must lie in [0, 1), got {beta}")
    if not gamma >= 0:
        raise ValueError(f"gamma must be nonnegative, got {gamma}")
    return OptimizerSpec(FIRST_ORDER, float(alpha), float(beta), float(gamma))


def hold_state(block: lti.StateSpaceBlock, y0: float) -> np.ndarray:
    """A state at rest (``A x = x``) whose output is ``y0``."""
    nx = block.n_states
    M = np.vstack([block.A - np.eye(nx), block.C])
    rhs = np.concatenate([np.zeros(nx), np.full(block.n_outputs, y0)])
    x, *_ = np.linalg.lstsq(M, rhs, rcond=None)
    if not np.allclose(M @ x, rhs, atol=1e-12):
        raise ValueError("block has no equilibrium producing the requested output")
    return x


def check_optimizer_validity(
    o: OptimizerSpec,
    eps_list=(0.1, 1.0),
    targets=(-1.0, 0.0, 10.0),
    tol: float = 1e-8,
    max_iter: int = 100_000,
) -> bool:
    """Run the method on ``y -> eps/2 (y - target)^2`` from rest at ``y = 1``; true when every run converges."""
    if not eps_list:
        raise ValueError("eps_list must be nonempty")
    blk = o.block()
    x0 = hold_state(blk, 1.0)
    for eps in eps_list:
        if not eps > 0:
            raise ValueError(f"curvature eps must be positive, got {eps}")
        # strictly proper, so the loop closes as x+ = (A + eps B C) x - eps B target
        Acl = blk.A + eps * blk.B @ blk.C
        c = blk.C[0]
        for target in targets:
            drive = -eps * blk.B[:, 0] * target
            x = x0.copy()
            y_prev = c @ x
            ok = False
            for _ in range(max_iter):
                x = Acl @ x + drive
                y = c @ x
                if not np.isfinite(y) or abs(y) > 1e12:
                    break
                if abs(y - target) < tol and abs(y - y_prev) < tol:
                    ok = True
                    break
                y_prev = y
            if not ok:
                return False
    return True


def network_matrix(e: EstimatorSpec, g: LaplacianGraph) -> np.ndarray:
    """State-transition matrix of the estimator over the active agents (agent-major state order)."""
    blk = e.block()
    act = sorted(g.active)
    L = g.L[np.ix_(act, act)]
    Bv = blk.B[:, 1:]
    Cz = blk.C[1:, :]
    return np.kron(np.eye(len(act)), blk.A) + np.kron(L, Bv @ Cz)


def simulate_estimator(e: EstimatorSpec, g: LaplacianGraph, signal, steps: int, init=None):
    """Run ``e`` on a scalar signal ``signal(k) -> (n,)`` and yield ``(k, w, y)`` each iteration."""
    blk = e.block().reset(g.n)
    if init is not None:
        blk.state = np.array(init, dtype=float).reshape(blk.n_states, g.n)
    m = e.comm_dim
    for k in range(steps):
        w = np.asarray(signal(k), dtype=float)[None, :]
        z = blk.C[1:] @ blk.state + blk.D[1:, :1] @ w
        v = z @ g.L.T
        inp = np.vstack([w, v.reshape(m, g.n)])
        y = blk.output(inp)[0]
        blk.advance(inp)
        yield k, w[0], y


def tracking_converges(e, g, signal, tol=1e-8, steps=10_000, init=None, settle=10) -> bool:
    """True once every active estimate stays within ``tol`` of the active average for ``settle`` steps."""
    act = sorted(g.active)
    run = 0
    for _, w, y in simulate_estimator(e, g, signal, steps, init):
        err = np.max(np.abs(y[act] - w[act].mean()))
        run = run + 1 if err < tol else 0
        if run >= settle:
            return True
        if not np.isfinite(err):
            return False
    return False


def check_estimator_order(
    e: EstimatorSpec, g: LaplacianGraph, order: int, seed: int = 0, tol: float = 1e-8, steps: int = 10_000
) -> bool:
    """Zero-initialized tracking test: constant input (order 1) or ramp deviations (order 2)."""
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order}")
    if not (is_balanced(g) and is_connected(g)):
        raise ValueError("estimator order is only defined on balanced, strongly connected graphs")
    rng = np.random.default_rng(seed)
    c = rng.standard_normal(g.n)
    r = rng.standard_normal(g.n)
    mask = np.zeros(g.n)
    mask[sorted(g.active)] = 1.0
    r = (r - r[mask > 0].mean()) * mask
    if order == 1:
        return tracking_converges(e, g, lambda k: c, tol, steps)
    return tracking_converges(e, g, lambda k: c + k * r, tol, steps)


@lru_cache(maxsize=64)
def estimator_order_cached(e: EstimatorSpec, g: LaplacianGraph, order: int) -> bool:
    return check_estimator_order(e, g, order)


@lru_cache(maxsize=64)
def optimizer_valid_cached(o: OptimizerSpec, eps_list: tuple) -> bool:
    return check_optimizer_validity(o, eps_list)
