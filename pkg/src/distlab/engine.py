"""Distributed algorithms assembled from an optimizer and consensus estimators.

Two wirings are supported:

* :class:`General`: ``u -> Gopt -> w -> Gcon -> y`` with a second-order
  estimator ``Gcon``.
* :class:`Factored`: ``u -> right -> r -> Gopt -> w -> left -> y`` where the
  right estimator averages gradients before they reach the optimizer.

Each iteration runs in a fixed phase order: outputs, gradients, exchange
``v = L z``, state advance. Signals are ``(channels, n*d)`` arrays with
replica ``i*d + j`` holding coordinate ``j`` of agent ``i``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Union

import numpy as np

from . import blocks as bl
from . import lti
from . import problem as pb
from .graph import LaplacianGraph, drop_agent, is_balanced, is_connected

VALIDITY_EPS = (0.01, 0.1)


class AlgorithmError(ValueError):
    pass


@dataclass(frozen=True)
class General:
    optimizer: bl.OptimizerSpec
    estimator: bl.EstimatorSpec


@dataclass(frozen=True)
class Factored:
    left: bl.EstimatorSpec
    optimizer: bl.OptimizerSpec
    right: bl.EstimatorSpec


AlgorithmForm = Union[General, Factored]


@dataclass(frozen=True, order=True)
class NetworkEvent:
    iteration: int
    agent: int


def validate(form: AlgorithmForm, g: LaplacianGraph) -> None:
    """Raise :class:`AlgorithmError` naming the first failed structural check."""
    if not is_balanced(g):
        raise AlgorithmError("graph is not balanced")
    if not is_connected(g):
        raise AlgorithmError("graph is not strongly connected")
    opt = form.optimizer
    if not lti.is_strictly_proper(opt.transfer()):
        raise AlgorithmError(f"optimizer {opt} is not strictly proper")
    if not bl.optimizer_valid_cached(opt, VALIDITY_EPS):
        raise AlgorithmError(f"optimizer {opt} failed the validity check")
    if isinstance(form, General):
        checks = [("estimator", form.estimator, 2)]
    else:
        checks = [("left estimator", form.left, 1), ("right estimator", form.right, 1)]
    for label, est, order in checks:
        blk = est.block()
        if np.any(blk.D[1:, 1:]):
            raise AlgorithmError(f"{label} {est} has a direct path from v to z")
        if not bl.estimator_order_cached(est, g, order):
            raise AlgorithmError(f"{label} {est} failed the order-{order} tracking check")


class AlgorithmInstance:
    def __init__(self, form: AlgorithmForm, graph: LaplacianGraph, d: int):
        self.form = form
        self.graph = graph
        self.d = d
        self.k = 0
        self.gradient_calls = 0
        self.last_gradients = None
        self.pending: list[NetworkEvent] = []
        R = graph.n * d
        self.opt = form.optimizer.block().reset(R)
        if isinstance(form, General):
            self.estimators = {"con": form.estimator.block().reset(R)}
        else:
            self.estimators = {
                "left": form.left.block().reset(R),
                "right": form.right.block().reset(R),
            }
        self._set_graph(graph)

    @property
    def n(self) -> int:
        return self.graph.n

    def _set_graph(self, graph: LaplacianGraph) -> None:
        self.graph = graph
        self._Lt = np.kron(graph.L, np.eye(self.d)).T
        mask = np.zeros(graph.n, dtype=bool)
        mask[sorted(graph.active)] = True
        self._agents = mask
        self._replicas = np.repeat(mask, self.d)

    def blocks(self):
        yield "opt", self.opt
        yield from self.estimators.items()

    def state_norm(self, which: str | None = None) -> float:
        """Largest absolute internal state over active replicas (one block, or all)."""
        sel = [b for name, b in self.blocks() if which is None or name == which]
        return max(
            (float(np.max(np.abs(b.state[:, self._replicas]))) for b in sel if b.n_states), default=0.0
        )

    def _estimate(self, blk, w):
        """Return ``(y, inp)`` for an estimator fed with ``w``; ``inp`` stacks ``w`` and ``v = L z``."""
        z = blk.C[1:] @ blk.state + blk.D[1:, :1] @ w
        inp = np.vstack([w, z @ self._Lt])
        return blk.C[:1] @ blk.state + blk.D[:1] @ inp, inp

    def _gradients(self, problem: pb.QuadraticProblem, y: np.ndarray) -> np.ndarray:
        Y = y.reshape(self.n, self.d)
        U = pb.gradients(problem, Y)
        U[~self._agents] = 0.0
        self.gradient_calls += int(self._agents.sum())
        self.last_gradients = U
        return U.reshape(1, -1)

    def _advance(self, pairs) -> None:
        frozen = ~self._replicas
        partial = frozen.any()
        for blk, inp in pairs:
            if not blk.n_states:
                continue
            new = blk.A @ blk.state + blk.B @ inp
            if partial:
                new[:, frozen] = blk.state[:, frozen]
            blk.state = new

    def step(self, problem: pb.QuadraticProblem) -> np.ndarray:
        """One synchronized iteration; returns the iterates ``y^k`` as ``(n, d)``."""
        if problem.n != self.n or problem.d != self.d:
            raise ValueError(
                f"problem has n={problem.n}, d={problem.d}; instance expects n={self.n}, d={self.d}"
            )
        for e in [e for e in self.pending if e.iteration == self.k]:
            self._set_graph(drop_agent(self.graph, e.agent))
            self.pending.remove(e)

        w = self.opt.C @ self.opt.state
        if isinstance(self.form, General):
            con = self.estimators["con"]
            y, inp = self._estimate(con, w)
            u = self._gradients(problem, y)
            self._advance([(self.opt, u), (con, inp)])
        else:
            left, right = self.estimators["left"], self.estimators["right"]
            y, inp_l = self._estimate(left, w)
            u = self._gradients(problem, y)
            r, inp_r = self._estimate(right, u)
            self._advance([(self.opt, r), (left, inp_l), (right, inp_r)])
        self.k += 1
        return y.reshape(self.n, self.d)

    def metrics(self, y: np.ndarray) -> tuple[float, float]:
        """``(e_opt, e_con)`` of the latest iterates over active agents, reusing this step's gradients."""
        act = self._agents
        g = self.last_gradients[act].sum(axis=0)
        Y = y[act]
        dev = Y - Y.mean(axis=0)
        return float(np.sqrt(g @ g)), float(np.sqrt((dev * dev).sum(axis=1)).sum())


def build(form: AlgorithmForm, g: LaplacianGraph, d: int, check: bool = True) -> AlgorithmInstance:
    """Zero-initialized instance; ``check`` runs the structural validity checks first."""
    if d < 1:
        raise ValueError(f"dimension must be positive, got {d}")
    if check:
        validate(form, g)
    return AlgorithmInstance(form, g, d)


def apply_event(a: AlgorithmInstance, e: NetworkEvent) -> AlgorithmInstance:
    """Schedule an agent drop; one due at the current iteration takes effect immediately."""
    if e.iteration < a.k:
        raise AlgorithmError(f"event at iteration {e.iteration} is in the past (current k={a.k})")
    if not 0 <= e.agent < a.n:
        raise AlgorithmError(f"event agent {e.agent} out of range for {a.n} agents")
    if e.iteration == a.k:
        a._set_graph(drop_agent(a.graph, e.agent))
    else:
        a.pending.append(e)
    return a


def run(
    a: AlgorithmInstance,
    problem: pb.QuadraticProblem,
    iters: int,
    events: Iterable[NetworkEvent] = (),
    probe: Callable[[AlgorithmInstance, np.ndarray], None] | None = None,
) -> pb.ErrorTrace:
    """Step ``iters`` times and record ``(e_opt, e_con)`` of ``y^k`` over the active agents."""
    if iters < 1:
        raise ValueError(f"iters must be at least 1, got {iters}")
    for e in sorted(events):
        apply_event(a, e)
    e_opt = np.empty(iters)
    e_con = np.empty(iters)
    for k in range(iters):
        y = a.step(problem)
        e_opt[k], e_con[k] = a.metrics(y)
        if probe is not None:
            probe(a, y)
    return pb.ErrorTrace(e_opt, e_con)
