"""Dense 3x3 matrix algebra for three-matrix lamination sets.

Builds the one-parameter family of non-rigid sets ``K = {M, N + M, N A + M}``
together with the auxiliary lamination chain ``S1, S2, S3``, checks the
algebraic closure conditions, and provides the reductions used to move a
problem between ambient matrix spaces (affine normalization, rank-preserving
left factors, invariant-subspace rotations).

All matrices are plain ``numpy.ndarray`` objects of dtype float64.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg

from .exceptions import (
    DegenerateKernelError,
    DomainError,
    ExhaustionError,
    ShapeError,
    SingularMatrixError,
)

__all__ = [
    "InstanceParams",
    "LaminationInstance",
    "AffineReduction",
    "ConditionReport",
    "eigen_lambda",
    "build_instance",
    "verify_conditions",
    "rank_of_difference",
    "is_pairwise_rank_n",
    "kernel_direction",
    "normalize_triple",
    "find_rank_preserving_F",
    "invariant_block_rotation",
    "random_params",
    "as_matrix_set",
]

DEFAULT_TOL = 1e-9


def _as_mat(a, name="matrix") -> np.ndarray:
    a = np.array(a, dtype=float)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ShapeError(f"{name} must be a non-empty 2-d array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise DomainError(f"{name} has non-finite entries")
    a.setflags(write=False)
    return a


def as_matrix_set(mats) -> list[np.ndarray]:
    """Validate a finite matrix set: common shape, pairwise distinct."""
    out = [_as_mat(a, "K element") for a in mats]
    if not out:
        raise ShapeError("matrix set is empty")
    shape = out[0].shape
    if any(a.shape != shape for a in out):
        raise ShapeError("matrix set elements have different shapes")
    for a, b in itertools.combinations(out, 2):
        if np.array_equal(a, b):
            raise DomainError("matrix set elements must be pairwise distinct")
    return out


@dataclass(frozen=True)
class InstanceParams:
    """Parameters ``(q, G, M, N)`` of a lamination instance.

    ``q`` are the three lamination volume fractions, ``G`` conjugates the
    diagonal eigenvalue matrix, and ``X -> N X + M`` is the affine map that
    transports the normalized set ``{0, I, A}``.
    """

    q: tuple[float, float, float]
    G: np.ndarray = field(default_factory=lambda: np.eye(3))
    M: np.ndarray = field(default_factory=lambda: np.zeros((3, 3)))
    N: np.ndarray = field(default_factory=lambda: np.eye(3))

    def __post_init__(self):
        q = tuple(float(v) for v in self.q)
        if len(q) != 3:
            raise DomainError("q must have exactly three entries")
        for v in q:
            if not (0.0 < v < 1.0):
                raise DomainError(f"volume fraction {v!r} not in (0, 1)")
        object.__setattr__(self, "q", q)
        for name in ("G", "M", "N"):
            a = _as_mat(getattr(self, name), name)
            if a.shape != (3, 3):
                raise ShapeError(f"{name} must be 3x3")
            object.__setattr__(self, name, a)
        for name in ("G", "N"):
            a = getattr(self, name)
            if abs(np.linalg.det(a)) <= 1e-14 * max(1.0, np.linalg.norm(a)) ** 3:
                raise SingularMatrixError(f"{name} is singular")

    def to_dict(self) -> dict:
        return {
            "q": list(self.q),
            "G": self.G.ravel().tolist(),
            "M": self.M.ravel().tolist(),
            "N": self.N.ravel().tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "InstanceParams":
        def mat(key, default):
            v = d.get(key)
            return default if v is None else np.asarray(v, dtype=float).reshape(3, 3)

        return cls(
            q=tuple(d["q"]),
            G=mat("G", np.eye(3)),
            M=mat("M", np.zeros((3, 3))),
            N=mat("N", np.eye(3)),
        )


@dataclass(frozen=True)
class LaminationInstance:
    """Matrices ``A1..A3``, chain ``S1..S3`` and layering normals ``nu1..nu3``."""

    A: tuple[np.ndarray, np.ndarray, np.ndarray]
    S: tuple[np.ndarray, np.ndarray, np.ndarray]
    nu: tuple[np.ndarray, np.ndarray, np.ndarray]
    lambdas: tuple[float, float, float]
    params: InstanceParams

    @property
    def q(self) -> tuple[float, float, float]:
        return self.params.q

    @property
    def K(self) -> list[np.ndarray]:
        return list(self.A)

    def residual_factor(self) -> float:
        """Fraction of the ``S1`` region that survives one full lamination cycle."""
        q1, q2, q3 = self.q
        return (1 - q1) * (1 - q2) * (1 - q3)

    def to_dict(self) -> dict:
        d = self.params.to_dict()
        d["A"] = [a.ravel().tolist() for a in self.A]
        d["S"] = [s.ravel().tolist() for s in self.S]
        d["nu"] = [v.tolist() for v in self.nu]
        d["lambda"] = list(self.lambdas)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LaminationInstance":
        params = InstanceParams.from_dict(d)
        if "A" not in d:
            return build_instance(params)

        def mats(key):
            return tuple(_as_mat(np.reshape(v, (3, 3))) for v in d[key])

        nu = tuple(np.asarray(v, dtype=float) for v in d["nu"])
        return cls(mats("A"), mats("S"), nu, tuple(float(v) for v in d["lambda"]), params)


@dataclass(frozen=True)
class AffineReduction:
    """Change of variables ``B(x) -> R^T F (B(R y) + C) R``."""

    R: np.ndarray
    F: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        R = _as_mat(self.R, "R")
        if R.shape[0] != R.shape[1] or not np.allclose(R.T @ R, np.eye(len(R)), atol=1e-10):
            raise DomainError("R must be orthogonal")
        F = _as_mat(self.F, "F")
        C = _as_mat(self.C, "C")
        n = R.shape[0]
        if F.shape[0] != n or C.shape != (F.shape[1], n):
            raise ShapeError(f"incompatible shapes R{R.shape}, F{F.shape}, C{C.shape}")
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "C", C)

    @classmethod
    def identity(cls, m: int, n: int | None = None) -> "AffineReduction":
        n = m if n is None else n
        return cls(np.eye(n), np.eye(n, m), np.zeros((m, n)))

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Apply the value map to one matrix, or to a stack ``(..., m, n)``."""
        return self.R.T @ self.F @ (np.asarray(X) + self.C) @ self.R


@dataclass(frozen=True)
class ConditionReport:
    cond1: tuple[float, float, float]
    cond2: tuple[float, float, float]
    kernel: tuple[float, float, float]
    tol: float

    @property
    def passed(self) -> bool:
        return max(self.cond1 + self.cond2 + self.kernel) <= self.tol

    def to_dict(self) -> dict:
        return {
            "cond1": list(self.cond1),
            "cond2": list(self.cond2),
            "kernel": list(self.kernel),
            "tol": self.tol,
            "pass": self.passed,
        }


def eigen_lambda(q1: float, q2: float, q3: float) -> tuple[float, float, float]:
    """Eigenvalues of ``S1`` forced by the three determinant conditions."""
    for v in (q1, q2, q3):
        if not (0.0 < v < 1.0):
            raise DomainError(f"volume fraction {v!r} not in (0, 1)")
    return 0.0, 1.0 / (1.0 - q1), q2 / (q1 + q2 - q1 * q2)


def build_instance(p: InstanceParams, tol: float = DEFAULT_TOL) -> LaminationInstance:
    q1, q2, q3 = p.q
    lam = eigen_lambda(q1, q2, q3)
    try:
        Ginv = np.linalg.inv(p.G)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrixError("G is singular") from exc
    I = np.eye(3)
    S1 = Ginv @ np.diag(lam) @ p.G
    P = (1 - q1) * (1 - q2) * (1 - q3)
    A3 = ((1 - P) * S1 - q2 * (1 - q3) * I) / q3
    S2 = (1 - q1) * S1
    S3 = q2 * I + (1 - q2) * S2

    def transport(X):
        return _as_mat(p.N @ X + p.M)

    A = tuple(transport(X) for X in (np.zeros((3, 3)), I, A3))
    S = tuple(transport(X) for X in (S1, S2, S3))
    nu = []
    for a, s in zip(A, S):
        D = a - s
        sv = np.linalg.svd(D, compute_uv=False)
        if sv[0] == 0 or sv[1] <= tol * sv[0]:
            raise DegenerateKernelError("lamination kernel has dimension != 1")
        v = kernel_direction(D, tol=max(tol, 1e-7))
        v.setflags(write=False)
        nu.append(v)
    return LaminationInstance(A, S, tuple(nu), lam, p)


def verify_conditions(inst: LaminationInstance, tol: float = DEFAULT_TOL) -> ConditionReport:
    """Residuals of the rank-one-type closure conditions.

    ``cond1`` is ``|det(Ai - Si)| / |Ai - Si|_F^3``; ``cond2`` is the Frobenius
    residual of ``S_{i+1} = q_i A_i + (1 - q_i) S_i`` divided by
    ``max(1, |S_{i+1}|_F)``; ``kernel`` is ``|(Ai - Si) nu_i| / |Ai - Si|_F``.
    """
    A, S, nu, q = inst.A, inst.S, inst.nu, inst.q
    cond1, cond2, kern = [], [], []
    for i in range(3):
        D = A[i] - S[i]
        scale = np.linalg.norm(D)
        if scale == 0:
            cond1.append(0.0)
            kern.append(0.0)
        else:
            cond1.append(float(abs(np.linalg.det(D)) / scale**3))
            kern.append(float(np.linalg.norm(D @ nu[i]) / (scale * np.linalg.norm(nu[i]))))
        j = (i + 1) % 3
        target = q[i] * A[i] + (1 - q[i]) * S[i]
        cond2.append(float(np.linalg.norm(S[j] - target) / max(1.0, np.linalg.norm(S[j]))))
    return ConditionReport(tuple(cond1), tuple(cond2), tuple(kern), tol)


def rank_of_difference(A, B, tol: float = DEFAULT_TOL) -> int:
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != B.shape:
        raise ShapeError(f"shape mismatch {A.shape} vs {B.shape}")
    sv = np.linalg.svd(A - B, compute_uv=False)
    if sv.size == 0 or sv[0] == 0:
        return 0
    return int(np.sum(sv > tol * sv[0]))


def is_pairwise_rank_n(K: Sequence, tol: float = DEFAULT_TOL) -> bool:
    K = [np.asarray(a, dtype=float) for a in K]
    if not K:
        return True
    m, n = K[0].shape
    if m < n:
        raise ShapeError("pairwise rank-n test needs m >= n")
    return all(rank_of_difference(a, b, tol) == n for a, b in itertools.combinations(K, 2))


def kernel_direction(D, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Unit right singular vector of the smallest singular value of ``D``.

    The sign is fixed so that the first component that is not negligible is
    positive.
    """
    D = np.asarray(D, dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise ShapeError("kernel_direction needs a square matrix")
    _, sv, vt = np.linalg.svd(D)
    if sv[0] > 0 and sv[-1] > tol * sv[0]:
        raise SingularMatrixError("matrix is not singular within tolerance")
    v = vt[-1].copy()
    big = np.flatnonzero(np.abs(v) > 1e-12)
    if big.size and v[big[0]] < 0:
        v = -v
    return v


def normalize_triple(K: Sequence) -> tuple[AffineReduction, list[np.ndarray]]:
    """Affine change of values sending ``A1 -> 0`` and ``A2 -> I``.

    Works for any square set with at least two elements; the remaining
    elements map to ``(A2 - A1)^{-1} (Ai - A1)``.
    """
    K = as_matrix_set(K)
    n = K[0].shape[0]
    if K[0].shape != (n, n) or len(K) < 2:
        raise ShapeError("normalize_triple needs at least two square matrices")
    D = K[1] - K[0]
    if rank_of_difference(K[1], K[0]) < n:
        raise SingularMatrixError("A2 - A1 is singular")
    red = AffineReduction(np.eye(n), np.linalg.inv(D), -K[0])
    out = [red.apply(a) for a in K]
    out[0] = np.zeros((n, n))
    out[1] = np.eye(n)
    return red, out


def find_rank_preserving_F(
    K: Sequence,
    seed: int = 0,
    tol: float = DEFAULT_TOL,
    max_attempts: int = 10_000,
) -> np.ndarray:
    """Left factor ``F`` (n x m) keeping every pairwise difference of rank n."""
    K = as_matrix_set(K)
    m, n = K[0].shape
    if m <= n:
        raise ShapeError("find_rank_preserving_F needs m > n")
    if len(K) < 2:
        return np.eye(n, m)
    if not is_pairwise_rank_n(K, tol):
        raise SingularMatrixError("K is not pairwise rank-n connected")
    diffs = [a - b for a, b in itertools.combinations(K, 2)]

    def good(F):
        return all(rank_of_difference(F @ d, np.zeros((n, n)), tol) == n for d in diffs)

    F0 = np.linalg.pinv(K[1] - K[0])
    if good(F0):
        return F0
    rng = np.random.default_rng(seed)
    for _ in range(max_attempts):
        F = F0 + rng.uniform(-1.0, 1.0, size=(n, m))
        if good(F):
            return F
    raise ExhaustionError(f"no rank-preserving F found in {max_attempts} attempts")


def invariant_block_rotation(A, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Orthogonal ``R`` with the top-right ``2 x (n-2)`` block of ``R^T A R`` zero.

    The first two columns of ``R`` span a real two-dimensional invariant
    subspace of ``A^T``, taken from a real Schur form of ``A^T`` with complex
    conjugate pairs sorted to the front.
    """
    A = _as_mat(A, "A")
    n = A.shape[0]
    if A.shape != (n, n) or n < 3:
        raise ShapeError("invariant_block_rotation needs a square matrix with n >= 3")
    scale = max(np.linalg.norm(A), 1.0)
    if np.max(np.abs(A[:2, 2:])) <= tol * scale:
        return np.eye(n)
    At = A.T
    if np.any(np.abs(np.linalg.eigvals(At).imag) > tol * scale):
        _, Z, _ = scipy.linalg.schur(At, output="real", sort=lambda re, im: im != 0)
    else:
        _, Z = scipy.linalg.schur(At, output="real")
    return Z


def random_params(rng: np.random.Generator, q_range=(0.05, 0.95), cond=10.0, affine=False) -> InstanceParams:
    """Random instance parameters with ``|G|, |G^{-1}| <= cond``."""

    def well_conditioned():
        U, _ = np.linalg.qr(rng.standard_normal((3, 3)))
        V, _ = np.linalg.qr(rng.standard_normal((3, 3)))
        s = np.exp(rng.uniform(-np.log(cond), np.log(cond), size=3))
        return U @ np.diag(s) @ V.T

    q = tuple(rng.uniform(*q_range, size=3))
    G = well_conditioned()
    if not affine:
        return InstanceParams(q, G)
    return InstanceParams(q, G, M=rng.uniform(-1, 1, size=(3, 3)), N=well_conditioned())
