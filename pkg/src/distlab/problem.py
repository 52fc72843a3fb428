"""Distributed least-squares instances and error metrics.

Agent ``i`` holds ``f_i(y) = 0.5 y'A_i y - b_i'y`` with gradient ``A_i y - b_i``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from os import PathLike
from typing import Iterable

import numpy as np

EIG_LOW, EIG_HIGH = 0.1, 1.0


@dataclass(frozen=True, eq=False)
class QuadraticProblem:
    A: np.ndarray  # (n, d, d)
    b: np.ndarray  # (n, d)

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        b = np.array(self.b, dtype=float)
        if A.ndim != 3 or A.shape[1] != A.shape[2] or b.shape != A.shape[:2]:
            raise ValueError(f"inconsistent problem shapes A{A.shape}, b{b.shape}")
        A.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def d(self) -> int:
        return self.A.shape[2]


def eigen_grid(d: int) -> np.ndarray:
    """Evenly spaced spectrum on [0.1, 1]; a single point collapses to 0.1."""
    if d == 1:
        return np.array([EIG_LOW])
    return np.linspace(EIG_LOW, EIG_HIGH, d)


def haar_orthogonal(rng: np.random.Generator, d: int) -> np.ndarray:
    Q, R = np.linalg.qr(rng.standard_normal((d, d)))
    return Q * np.sign(np.diag(R))


def sample(n: int, d: int, rng_seed) -> QuadraticProblem:
    if n < 1 or d < 1:
        raise ValueError(f"need n >= 1 and d >= 1, got n={n}, d={d}")
    rng = np.random.default_rng(rng_seed)
    lam = eigen_grid(d)
    A = np.empty((n, d, d))
    b = np.empty((n, d))
    for i in range(n):
        Q = haar_orthogonal(rng, d)
        Ai = (Q * lam) @ Q.T
        A[i] = 0.5 * (Ai + Ai.T)
        b[i] = rng.standard_normal(d)
    return QuadraticProblem(A, b)


def gradient(p: QuadraticProblem, i: int, y) -> np.ndarray:
    if not 0 <= i < p.n:
        raise IndexError(f"agent index {i} out of range for {p.n} agents")
    return p.A[i] @ np.asarray(y, dtype=float) - p.b[i]


def gradients(p: QuadraticProblem, Y: np.ndarray) -> np.ndarray:
    """All local gradients at once; ``Y`` has shape ``(n, d)``."""
    return np.einsum("nij,nj->ni", p.A, Y) - p.b


def _rows(p: QuadraticProblem, active: Iterable[int] | None) -> list[int]:
    return list(range(p.n)) if active is None else sorted(active)


def optimum(p: QuadraticProblem, active: Iterable[int] | None = None) -> np.ndarray:
    """Minimizer of the summed objective over ``active`` agents."""
    rows = _rows(p, active)
    S = p.A[rows].sum(axis=0)
    try:
        return np.linalg.solve(S, p.b[rows].sum(axis=0))
    except np.linalg.LinAlgError as exc:
        raise ValueError("summed Hessian is singular; optimum is not unique") from exc


def errors(p: QuadraticProblem, Y, active: Iterable[int] | None = None) -> tuple[float, float]:
    """Return ``(e_opt, e_con)``: norm of the summed gradient, total deviation from the mean iterate."""
    rows = _rows(p, active)
    Y = np.asarray(Y, dtype=float)[rows]
    G = np.einsum("nij,nj->ni", p.A[rows], Y) - p.b[rows]
    e_opt = float(np.linalg.norm(G.sum(axis=0)))
    e_con = float(np.linalg.norm(Y - Y.mean(axis=0), axis=1).sum())
    return e_opt, e_con


@dataclass
class ErrorTrace:
    e_opt: np.ndarray
    e_con: np.ndarray
    meta: dict = field(default_factory=dict)
    total: np.ndarray | None = None  # set for aggregates, where the mean of maxima is not the max of means

    def __post_init__(self):
        self.e_opt = np.asarray(self.e_opt, dtype=float)
        self.e_con = np.asarray(self.e_con, dtype=float)
        if self.total is not None:
            self.total = np.asarray(self.total, dtype=float)

    @property
    def e_total(self) -> np.ndarray:
        if self.total is not None:
            return self.total
        return np.maximum(self.e_opt, self.e_con)

    @property
    def iterations(self) -> np.ndarray:
        return np.arange(self.e_opt.size)

    def __len__(self) -> int:
        return self.e_opt.size

    def first_below(self, tol: float) -> int | None:
        """First iteration from which ``e_total`` stays below ``tol`` to the end of the trace."""
        above = np.flatnonzero(self.e_total >= tol)
        k = 0 if above.size == 0 else above[-1] + 1
        return int(k) if k < len(self) else None


def dump_problem(p: QuadraticProblem, path: str | PathLike) -> None:
    """Plain text: ``n d`` header, then per agent ``d`` rows of ``A_i`` and one row of ``b_i``."""
    with open(path, "w") as fh:
        fh.write(f"{p.n} {p.d}\n")
        for i in range(p.n):
            for row in p.A[i]:
                fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")
            fh.write(" ".join(f"{v:.17g}" for v in p.b[i]) + "\n")


def load_problem(path: str | PathLike) -> QuadraticProblem:
    with open(path) as fh:
        lines = [ln.split() for ln in fh if ln.strip() and not ln.startswith("#")]
    n, d = int(lines[0][0]), int(lines[0][1])
    body = np.array([[float(v) for v in ln] for ln in lines[1:]])
    if body.shape != (n * (d + 1), d):
        raise ValueError(f"{path}: expected {n * (d + 1)} rows of {d} values")
    body = body.reshape(n, d + 1, d)
    return QuadraticProblem(body[:, :d, :], body[:, d, :])
