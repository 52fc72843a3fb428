"""Weighted communication digraphs stored as Laplacian matrices.

Entry ``L[i, j]`` (``i != j``) is ``-a_ij`` where ``a_ij >= 0`` is the weight
agent ``i`` places on information received from agent ``j``. Agents are
indexed from 0, so the network's "agent 1" is index 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations
from os import PathLike

import numpy as np
from scipy.sparse.csgraph import connected_components

BALANCE_TOL = 1e-12


class GraphError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class LaplacianGraph:
    L: np.ndarray
    active: frozenset = field(default=None)

    def __post_init__(self):
        L = np.array(self.L, dtype=float)
        if L.ndim != 2 or L.shape[0] != L.shape[1] or L.shape[0] == 0:
            raise GraphError(f"Laplacian must be a nonempty square matrix, got shape {L.shape}")
        off = L - np.diag(np.diag(L))
        if np.any(off > 0):
            raise GraphError("off-diagonal Laplacian entries must be <= 0")
        if np.max(np.abs(L.sum(axis=1))) > 1e-9:
            raise GraphError("each Laplacian row must sum to zero")
        L.setflags(write=False)
        object.__setattr__(self, "L", L)
        active = frozenset(range(L.shape[0])) if self.active is None else frozenset(self.active)
        for i in set(range(L.shape[0])) - active:
            if np.any(L[i]) or np.any(L[:, i]):
                raise GraphError(f"inactive agent {i} still has edges")
        object.__setattr__(self, "active", active)

    @classmethod
    def from_weights(cls, W, active=None) -> "LaplacianGraph":
        """Build from the weight matrix ``W[i, j] = a_ij`` (diagonal ignored)."""
        W = np.array(W, dtype=float)
        np.fill_diagonal(W, 0.0)
        return cls(np.diag(W.sum(axis=1)) - W, active)

    @property
    def n(self) -> int:
        return self.L.shape[0]

    @property
    def weights(self) -> np.ndarray:
        W = -self.L.copy()
        np.fill_diagonal(W, 0.0)
        return W

    def __eq__(self, other):
        if not isinstance(other, LaplacianGraph):
            return NotImplemented
        return self.active == other.active and np.array_equal(self.L, other.L)

    def __hash__(self):
        return hash((self.L.tobytes(), self.active))


def fig2_graph() -> LaplacianGraph:
    """Five-agent balanced digraph used throughout the experiments."""
    L = np.array(
        [
            [1.0, -0.5, 0.0, 0.0, -0.5],
            [0.0, 0.75, 0.0, -0.75, 0.0],
            [0.0, -0.25, 0.5, -0.25, 0.0],
            [-0.5, 0.0, -0.5, 1.5, -0.5],
            [-0.5, 0.0, 0.0, -0.5, 1.0],
        ]
    )
    return LaplacianGraph(L)


def normalize(g: LaplacianGraph) -> LaplacianGraph:
    """Divide every weight by the largest weighted in-degree.

    Afterwards ``I - L`` is nonnegative; for a balanced graph its rows and
    columns each sum to one.
    """
    top = float(np.max(np.diag(g.L)))
    if top <= 0:
        return g
    return LaplacianGraph(g.L / top, g.active)


def apply(g: LaplacianGraph, z, m: int = 1) -> np.ndarray:
    """``(L kron I_m) z`` for a stacked vector ``z = (z_1, ..., z_n)``, each ``z_i`` of length ``m``."""
    z = np.asarray(z, dtype=float)
    if z.size != g.n * m:
        raise ValueError(f"stacked vector has {z.size} entries, expected n*m = {g.n}*{m} = {g.n * m}")
    return (g.L @ z.reshape(g.n, m)).reshape(z.shape)


def is_balanced(g: LaplacianGraph, tol: float = BALANCE_TOL) -> bool:
    return bool(
        np.max(np.abs(g.L.sum(axis=1))) <= tol and np.max(np.abs(g.L.sum(axis=0))) <= tol
    )


def _strongly_connected(edges: np.ndarray, nodes: list[int]) -> bool:
    if len(nodes) <= 1:
        return True
    sub = edges[np.ix_(nodes, nodes)]
    count, _ = connected_components(sub, directed=True, connection="strong")
    return count == 1


def is_connected(g: LaplacianGraph) -> bool:
    """Strong connectivity of the active agents (edge ``j -> i`` whenever ``a_ij > 0``)."""
    return _strongly_connected(g.weights > 0, sorted(g.active))


def drop_agent(g: LaplacianGraph, i: int, weight: float = 0.5) -> LaplacianGraph:
    """Remove agent ``i`` and rebalance the survivors.

    Surviving agents keep the largest subset of their existing edges on which
    every node has equal in- and out-degree and that stays strongly connected;
    all kept edges then carry ``weight``. Unused edges get weight zero.
    """
    if not 0 <= i < g.n:
        raise GraphError(f"agent index {i} out of range for {g.n} agents")
    if i not in g.active:
        return g
    active = sorted(g.active - {i})
    edges = g.weights > 0
    edges[i, :] = False
    edges[:, i] = False
    candidates = [tuple(e) for e in np.argwhere(edges)]

    for k in range(len(candidates) + 1):
        for removed in combinations(candidates, k):
            kept = edges.copy()
            for r, c in removed:
                kept[r, c] = False
            if np.array_equal(kept.sum(axis=1), kept.sum(axis=0)) and _strongly_connected(kept, active):
                return LaplacianGraph.from_weights(weight * kept, active)
    raise GraphError(
        f"cannot rebalance after dropping agent {i}: no subset of surviving edges "
        "is both balanced and strongly connected"
    )


def load_graph(path: str | PathLike) -> LaplacianGraph:
    """Read a Laplacian written as whitespace-separated rows of decimals."""
    try:
        L = np.loadtxt(path, dtype=float, ndmin=2)
    except OSError as exc:
        raise GraphError(f"cannot read graph file {path}: {exc}") from exc
    return LaplacianGraph(L)


def save_graph(g: LaplacianGraph, path: str | PathLike) -> None:
    np.savetxt(path, g.L, fmt="%.17g")
