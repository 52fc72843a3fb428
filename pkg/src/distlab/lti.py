"""Discrete-time LTI blocks.

A :class:`StateSpaceBlock` holds ``(A, B, C, D)`` for a single scalar channel
and a state array of shape ``(n_x, R)`` where ``R`` counts replicas (one per
agent and per vector coordinate). Every replica evolves under the same
matrices, so the whole network is advanced with a handful of small matmuls.

Step semantics::

    y[k]   = C x[k] + D u[k]
    x[k+1] = A x[k] + B u[k]
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

CANCEL_TOL = 1e-10


def _trim(coeffs) -> np.ndarray:
    c = np.atleast_1d(np.asarray(coeffs, dtype=float))
    nz = np.flatnonzero(c)
    if nz.size == 0:
        return np.zeros(1)
    return c[nz[0]:]


@dataclass(frozen=True)
class TransferSpec:
    """Matrix of rational functions in ``z``.

    ``entries[i][j] = (num, den)`` maps input ``j`` to output ``i``;
    coefficients are listed highest degree first.
    """

    entries: tuple

    def __post_init__(self):
        rows = []
        for row in self.entries:
            cells = []
            for num, den in row:
                num, den = _trim(num), _trim(den)
                if den[0] == 0.0:
                    raise ValueError("denominator must have a nonzero leading coefficient")
                if num.size > den.size:
                    raise ValueError(
                        f"non-causal entry: numerator degree {num.size - 1} exceeds "
                        f"denominator degree {den.size - 1}"
                    )
                cells.append((num, den))
            rows.append(tuple(cells))
        if not rows or len({len(r) for r in rows}) != 1 or not rows[0]:
            raise ValueError("entries must form a nonempty rectangular matrix")
        object.__setattr__(self, "entries", tuple(rows))

    @classmethod
    def siso(cls, num, den) -> "TransferSpec":
        return cls((((num, den),),))

    @property
    def outputs(self) -> int:
        return len(self.entries)

    @property
    def inputs(self) -> int:
        return len(self.entries[0])

    def entry(self, i: int = 0, j: int = 0) -> tuple[np.ndarray, np.ndarray]:
        return self.entries[i][j]

    def __call__(self, z: complex) -> np.ndarray:
        """Evaluate the transfer matrix at a point ``z``."""
        out = np.empty((self.outputs, self.inputs), dtype=complex)
        for i, row in enumerate(self.entries):
            for j, (num, den) in enumerate(row):
                out[i, j] = np.polyval(num, z) / np.polyval(den, z)
        return out


@dataclass
class StateSpaceBlock:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    state: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        nx = self.A.shape[0] if self.A.size else 0
        self.A = self.A.reshape(nx, nx)
        self.D = np.atleast_2d(np.asarray(self.D, dtype=float))
        ny, nu = self.D.shape
        self.B = np.asarray(self.B, dtype=float).reshape(nx, nu)
        self.C = np.asarray(self.C, dtype=float).reshape(ny, nx)
        if self.state is None:
            self.state = np.zeros((nx, 1))
        else:
            self.state = np.asarray(self.state, dtype=float).reshape(nx, -1)

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.D.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.D.shape[0]

    @property
    def replicas(self) -> int:
        return self.state.shape[1]

    def reset(self, replicas: int = 1) -> "StateSpaceBlock":
        self.state = np.zeros((self.n_states, replicas))
        return self

    def copy(self) -> "StateSpaceBlock":
        return StateSpaceBlock(self.A.copy(), self.B.copy(), self.C.copy(), self.D.copy(), self.state.copy())

    def _inputs(self, u) -> tuple[np.ndarray, bool]:
        u = np.asarray(u, dtype=float)
        flat = u.ndim == 1
        if flat:
            u = u[:, None]
        if u.shape != (self.n_inputs, self.replicas):
            raise ValueError(
                f"input has shape {u.shape[:1] if flat else u.shape}, "
                f"block expects ({self.n_inputs}, {self.replicas})"
            )
        return u, flat

    def output(self, u) -> np.ndarray:
        """Current output for input ``u``; the state is not touched."""
        u, flat = self._inputs(u)
        y = self.C @ self.state + self.D @ u
        return y[:, 0] if flat else y

    def advance(self, u) -> None:
        u, _ = self._inputs(u)
        self.state = self.A @ self.state + self.B @ u

    def step(self, u) -> np.ndarray:
        y = self.output(u)
        self.advance(u)
        return y

    def markov(self, count: int) -> np.ndarray:
        """Impulse response ``D, CB, CAB, ...`` stacked as ``(count, n_y, n_u)``."""
        out = np.empty((count, self.n_outputs, self.n_inputs))
        if count:
            out[0] = self.D
        AkB = self.B
        for k in range(1, count):
            out[k] = self.C @ AkB
            AkB = self.A @ AkB
        return out


def static(gain) -> StateSpaceBlock:
    """Memoryless block ``y = K u``."""
    K = np.atleast_2d(np.asarray(gain, dtype=float))
    return StateSpaceBlock(np.zeros((0, 0)), np.zeros((0, K.shape[1])), np.zeros((K.shape[0], 0)), K)


def _realize_siso(num: np.ndarray, den: np.ndarray):
    a = den / den[0]
    n = a.size - 1
    b = np.concatenate([np.zeros(n + 1 - num.size), num]) / den[0]
    d = b[0]
    if n == 0:
        return np.zeros((0, 0)), np.zeros((0, 1)), np.zeros((1, 0)), d
    A = np.zeros((n, n))
    A[0, :] = -a[1:]
    A[1:, :-1] = np.eye(n - 1)
    B = np.zeros((n, 1))
    B[0, 0] = 1.0
    C = (b[1:] - d * a[1:])[None, :]
    return A, B, C, d


def realize(t: TransferSpec) -> StateSpaceBlock:
    """Controllable canonical realization, one sub-realization per entry."""
    parts = []
    for i, row in enumerate(t.entries):
        for j, (num, den) in enumerate(row):
            parts.append((i, j, *_realize_siso(num, den)))
    nx = sum(p[2].shape[0] for p in parts)
    A = np.zeros((nx, nx))
    B = np.zeros((nx, t.inputs))
    C = np.zeros((t.outputs, nx))
    D = np.zeros((t.outputs, t.inputs))
    pos = 0
    for i, j, Ae, Be, Ce, de in parts:
        k = Ae.shape[0]
        A[pos:pos + k, pos:pos + k] = Ae
        B[pos:pos + k, j] = Be[:, 0]
        C[i, pos:pos + k] = Ce[0]
        D[i, j] = de
        pos += k
    return StateSpaceBlock(A, B, C, D)


def expand(t: TransferSpec, count: int) -> np.ndarray:
    """Impulse response of ``t`` by polynomial long division in ``1/z``."""
    out = np.zeros((count, t.outputs, t.inputs))
    for i, row in enumerate(t.entries):
        for j, (num, den) in enumerate(row):
            a = den / den[0]
            n = a.size - 1
            b = np.concatenate([np.zeros(n + 1 - num.size), num]) / den[0]
            h = np.zeros(count)
            for k in range(count):
                acc = b[k] if k <= n else 0.0
                for m in range(1, min(k, n) + 1):
                    acc -= a[m] * h[k - m]
                h[k] = acc
            out[:, i, j] = h
    return out


def series(first: StateSpaceBlock, second: StateSpaceBlock) -> StateSpaceBlock:
    """Cascade: every output of ``first`` drives the matching input of ``second``."""
    if first.n_outputs != second.n_inputs:
        raise ValueError(
            f"cannot cascade: first block has {first.n_outputs} outputs, "
            f"second block has {second.n_inputs} inputs"
        )
    n1, n2 = first.n_states, second.n_states
    A = np.zeros((n1 + n2, n1 + n2))
    A[:n1, :n1] = first.A
    A[n1:, :n1] = second.B @ first.C
    A[n1:, n1:] = second.A
    B = np.vstack([first.B, second.B @ first.D])
    C = np.hstack([second.D @ first.C, second.C])
    D = second.D @ first.D
    return StateSpaceBlock(A, B, C, D)


def parallel(*blocks: StateSpaceBlock) -> StateSpaceBlock:
    """Block-diagonal stacking of independent blocks (inputs and outputs concatenated)."""
    nx = sum(b.n_states for b in blocks)
    nu = sum(b.n_inputs for b in blocks)
    ny = sum(b.n_outputs for b in blocks)
    A, B, C, D = np.zeros((nx, nx)), np.zeros((nx, nu)), np.zeros((ny, nx)), np.zeros((ny, nu))
    x = u = y = 0
    for b in blocks:
        sx, su, sy = b.n_states, b.n_inputs, b.n_outputs
        A[x:x + sx, x:x + sx] = b.A
        B[x:x + sx, u:u + su] = b.B
        C[y:y + sy, x:x + sx] = b.C
        D[y:y + sy, u:u + su] = b.D
        x, u, y = x + sx, u + su, y + sy
    return StateSpaceBlock(A, B, C, D)


def permutation(order: Sequence[int]) -> StateSpaceBlock:
    """Static block whose output ``i`` is input ``order[i]``."""
    return static(np.eye(len(order))[list(order)])


def poles(t: TransferSpec) -> list[complex]:
    """Poles of every entry after cancelling common numerator/denominator roots."""
    found = []
    for row in t.entries:
        for num, den in row:
            den_roots = list(np.roots(den))
            for r in (np.roots(num) if num.size > 1 else []):
                hit = [k for k, p in enumerate(den_roots) if abs(p - r) <= CANCEL_TOL]
                if hit:
                    den_roots.pop(hit[0])
            found.extend(complex(p) for p in den_roots)
    return sorted(found, key=lambda p: (p.real, p.imag))


def is_strictly_proper(t: TransferSpec, port: tuple[int, int] | None = None) -> bool:
    """``port=None`` checks every entry."""
    cells = [t.entry(*port)] if port is not None else [c for row in t.entries for c in row]
    for num, den in cells:
        if not np.any(num):
            continue
        if num.size >= den.size:
            return False
    return True
