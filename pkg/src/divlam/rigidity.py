"""Desk-scale rigidity oracles.

* Exhaustive search for K-valued fields on a small periodic grid whose
  backward-difference divergence vanishes identically.
* Detection of ``n - 1`` independent hyperplanes mapped by every element of
  ``K`` into fixed targets, which forces any divergence-free K-valued field to
  be constant.
* The two-dimensional dictionary between divergence-free and curl-free
  fields given by right multiplication with a quarter turn.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from .exceptions import DomainError, ShapeError
from .matkit import as_matrix_set, is_pairwise_rank_n, rank_of_difference

__all__ = [
    "DiscreteInclusion",
    "EnumerationResult",
    "HyperplaneSystem",
    "discrete_divergence_fd",
    "enumerate_exact",
    "verify_hyperplane_hypothesis",
    "check_hyperplane_system",
    "gradient_equivalence_2d",
    "J",
]

J = np.array([[0.0, -1.0], [1.0, 0.0]])


@dataclass(frozen=True)
class DiscreteInclusion:
    K: list
    dims: tuple
    assignment: np.ndarray

    def __post_init__(self):
        K = as_matrix_set(self.K)
        dims = tuple(int(d) for d in self.dims)
        if any(d < 2 for d in dims):
            raise DomainError("grid dims must be >= 2")
        a = np.asarray(self.assignment, dtype=np.int64)
        if a.shape != dims:
            raise ShapeError(f"assignment shape {a.shape} != dims {dims}")
        if a.size and (a.min() < 0 or a.max() >= len(K)):
            raise DomainError("assignment index out of range")
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "assignment", a)

    def field(self) -> np.ndarray:
        return np.stack(self.K)[self.assignment]


def discrete_divergence_fd(inc: DiscreteInclusion) -> np.ndarray:
    """``sum_k (B(x) - B(x - e_k)) e_k`` with periodic wrap; shape ``dims + (m,)``."""
    B = inc.field()
    nd = len(inc.dims)
    if B.shape[-1] != nd:
        raise ShapeError("matrix column count must equal the grid dimension")
    div = np.zeros(B.shape[:-1])
    for k in range(nd):
        div += B[..., k] - np.roll(B, 1, axis=k)[..., k]
    return div


@dataclass
class EnumerationResult:
    solutions: list
    exhausted: bool
    nodes: int

    @property
    def count(self) -> int:
        return len(self.solutions)

    def to_dict(self, witnesses: int = 8) -> dict:
        return {
            "solutions": self.count,
            "witnesses": [s.ravel().tolist() for s in self.solutions[:witnesses]],
            "exhausted": self.exhausted,
            "nodes": self.nodes,
        }


def enumerate_exact(K: Sequence, dims: Sequence[int], limit: int = 1_000_000, tol: float = 1e-9) -> EnumerationResult:
    """All K-valued assignments with vanishing discrete divergence.

    Depth-first over cells in odometer order (last axis fastest), values in
    the order of ``K``.  A cell's divergence involves the cell and its
    backward neighbours only, so it is tested as soon as the last of those
    is assigned.  ``limit`` bounds the number of search nodes; when it is hit
    the partial list is returned with ``exhausted=False``.
    """
    K = as_matrix_set(K)
    dims = tuple(int(d) for d in dims)
    nd = len(dims)
    if any(d < 2 for d in dims):
        raise DomainError("grid dims must be >= 2")
    m, n = K[0].shape
    if n != nd:
        raise ShapeError("matrix column count must equal the grid dimension")
    nv = len(K)
    stack = np.stack(K)
    # jump[a, b, k] = (K_a - K_b) e_k
    jump = stack[:, None, :, :] - stack[None, :, :, :]
    jump = np.moveaxis(jump, -1, 2)  # (a, b, k, m)
    scale = max(1.0, float(np.max(np.abs(stack))))

    ncell = int(np.prod(dims))
    idx = np.arange(ncell).reshape(dims)
    back = np.stack([np.roll(idx, 1, axis=k).ravel() for k in range(nd)], axis=1)
    ready = [[] for _ in range(ncell)]
    for c in range(ncell):
        ready[max(c, *back[c])].append(c)

    assign = np.zeros(ncell, dtype=np.int64)
    solutions = []
    nodes = 0
    complete = True

    def ok(c):
        v = assign[c]
        s = np.zeros(m)
        for k in range(nd):
            s += jump[v, assign[back[c, k]], k]
        return np.max(np.abs(s)) <= tol * scale

    def dfs(pos):
        nonlocal nodes, complete
        if pos == ncell:
            solutions.append(assign.reshape(dims).copy())
            return True
        for v in range(nv):
            if nodes >= limit:
                complete = False
                return False
            nodes += 1
            assign[pos] = v
            if all(ok(c) for c in ready[pos]):
                if not dfs(pos + 1):
                    return False
        return True

    dfs(0)
    return EnumerationResult(solutions, complete, nodes)


@dataclass
class HyperplaneSystem:
    """Normals ``v_r`` of hyperplanes ``pi_r`` and orthonormal bases of targets ``tau_r``."""

    normals: list
    targets: list
    rigid: bool
    reduced: bool = False
    residual: float = 0.0
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "normals": [v.tolist() for v in self.normals],
            "targets": [t.T.tolist() for t in self.targets],
            "rigid": self.rigid,
            "residual": self.residual,
        }


def _real_eigenvalues(M: np.ndarray, tol: float) -> list[float]:
    ev = np.linalg.eigvals(M)
    scale = max(1.0, np.linalg.norm(M))
    real = np.sort(ev.real[np.abs(ev.imag) <= 1e-7 * scale])
    out = []
    for x in real:
        if not out or abs(x - out[-1]) > 1e-7 * scale:
            out.append(float(x))
    return out


def _null(W: np.ndarray, atol: float) -> np.ndarray:
    _, s, vt = np.linalg.svd(W)
    rank = int(np.sum(s > atol))
    return vt[rank:].T


def _common_eigenspaces(mats: list[np.ndarray], tol: float) -> list[np.ndarray]:
    """Orthonormal bases of the subspaces on which every matrix acts as a scalar."""
    n = mats[0].shape[0]
    spaces = [np.eye(n)]
    for M in mats:
        scale = max(1.0, np.linalg.norm(M))
        if np.linalg.norm(M - M[0, 0] * np.eye(n)) <= tol * scale:
            continue
        new = []
        for V in spaces:
            for mu in _real_eigenvalues(M, tol):
                W = (M - mu * np.eye(n)) @ V
                C = _null(W, 1e-8 * scale)
                if C.size:
                    new.append(scipy.linalg.orth(V @ C))
        spaces = new
        if not spaces:
            break
    return spaces


def _sign_normalize(v: np.ndarray) -> np.ndarray:
    v = v / np.linalg.norm(v)
    big = np.flatnonzero(np.abs(v) > 1e-12)
    return -v if big.size and v[big[0]] < 0 else v


def check_hyperplane_system(K: Sequence, system: HyperplaneSystem, tol: float = 1e-9) -> float:
    """Largest relative component of ``A_i(pi_r)`` outside ``tau_r``."""
    worst = 0.0
    for v, T in zip(system.normals, system.targets):
        P = scipy.linalg.null_space(v[None, :])
        proj_out = np.eye(T.shape[0]) - T @ T.T
        for A in K:
            A = np.asarray(A, dtype=float)
            img = A @ P
            worst = max(worst, float(np.linalg.norm(proj_out @ img) / max(1.0, np.linalg.norm(A))))
    return worst


def verify_hyperplane_hypothesis(K: Sequence, tol: float = 1e-9) -> Optional[HyperplaneSystem]:
    """Search ``n - 1`` independent hyperplanes with ``A_i(pi_r) ⊆ tau_r``.

    When ``A2 - A1`` is invertible the set is first mapped to
    ``(A2 - A1)^{-1} A_i``; the condition then asks for hyperplanes invariant
    under every reduced matrix, i.e. common real eigenvectors of the
    transposes, and ``tau_r = (A2 - A1) pi_r``.  Returns ``None`` when fewer
    than ``n - 1`` independent normals exist.
    """
    K = as_matrix_set(K)
    n = K[0].shape[0]
    if K[0].shape != (n, n):
        raise ShapeError("hyperplane detector handles square matrices only")
    reduced = len(K) >= 2 and rank_of_difference(K[1], K[0], tol) == n
    if reduced:
        D = K[1] - K[0]
        F = np.linalg.inv(D)
        mats = [F @ A for A in K]
    else:
        D = np.eye(n)
        mats = list(K)
    spaces = _common_eigenspaces([M.T for M in mats], tol)
    normals = []
    for V in spaces:
        for col in V.T:
            cand = normals + [col]
            if np.linalg.matrix_rank(np.stack(cand), tol=1e-8) == len(cand):
                normals.append(col)
            if len(normals) == n - 1:
                break
        if len(normals) == n - 1:
            break
    if len(normals) < n - 1:
        return None
    normals = [_sign_normalize(v) for v in normals]
    targets = [scipy.linalg.orth(D @ scipy.linalg.null_space(v[None, :])) for v in normals]
    system = HyperplaneSystem(normals, targets, rigid=is_pairwise_rank_n(K, tol), reduced=reduced)
    system.residual = check_hyperplane_system(K, system, tol)
    if system.residual > 1e-7:
        return None
    if system.rigid:
        system.notes.append("pairwise rank-n and invariant hyperplanes: rigid for exact solutions")
    return system


@dataclass
class GradientReport:
    divergence: np.ndarray
    curl_of_BJ: np.ndarray
    residual: float

    @property
    def holds(self) -> bool:
        return self.residual <= 1e-12 * max(1.0, float(np.max(np.abs(self.divergence), initial=0.0)))


def gradient_equivalence_2d(raster) -> GradientReport:
    """Compare backward-difference ``curl(B J)`` with ``-Div B`` on a 2-d grid.

    ``curl g = d_1 g_2 - d_2 g_1`` row-wise.  Since ``(B J)_{i1} = B_{i2}``
    and ``(B J)_{i2} = -B_{i1}``, ``curl(B J) = -Div B`` cell by cell, so
    ``B`` is divergence-free exactly when ``B J`` is curl-free.
    """
    B = np.asarray(raster, dtype=float)
    if B.ndim != 4 or B.shape[-1] != 2:
        raise ShapeError("gradient_equivalence_2d needs a raster of shape (d1, d2, m, 2)")

    def back(a, axis):
        return a - np.roll(a, 1, axis=axis)

    div = back(B[..., 0], 0) + back(B[..., 1], 1)
    G = B @ J
    curl = back(G[..., 1], 0) - back(G[..., 0], 1)
    return GradientReport(div, curl, float(np.max(np.abs(curl + div), initial=0.0)))
