"""Multi-scale laminates on the unit torus.

A :class:`Field` is a piecewise-constant matrix field on ``[0, 1)^n`` given by
a vectorized point evaluator, optionally with a cell-centred raster.  The
hierarchical laminate starts from the constant ``S1`` and, level by level,
replaces the regions currently holding ``S1``, ``S3``, ``S2`` by the simple
laminates ``(A3, S3)``, ``(A2, S2)``, ``(A1, S1)`` at geometrically shrinking
periods.  After ``d`` cycles only a ``((1-q1)(1-q2)(1-q3))^d`` share of the
torus is outside ``K``.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .exceptions import DomainError, JumpConditionError, ResourceError, ShapeError
from .matkit import LaminationInstance, verify_conditions

__all__ = [
    "Field",
    "LaminateSchedule",
    "FractionReport",
    "constant_field",
    "raster_field",
    "simple_laminate",
    "hierarchical_laminate",
    "rasterize",
    "fraction_report",
    "VALUE_NAMES",
    "MAX_RASTER_ENTRIES",
]

# value codes used by hierarchical laminate labels: label = code + 8 * level
VALUE_NAMES = ("A1", "A2", "A3", "S1", "S2", "S3")
_S_CODES = (3, 4, 5)

MAX_RASTER_ENTRIES = 1 << 27
SAMPLE_CHUNK = 1 << 16


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get("DIVLAM_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class LaminateSchedule:
    instance: LaminationInstance
    depth: int
    ratio: int = 4
    base_period: float = 0.25

    def __post_init__(self):
        if int(self.depth) != self.depth or self.depth < 1:
            raise DomainError("depth must be an integer >= 1")
        if int(self.ratio) != self.ratio or self.ratio < 2:
            raise DomainError("ratio must be an integer >= 2")
        if not (0.0 < self.base_period <= 1.0):
            raise DomainError("base_period must lie in (0, 1]")
        if self.finest_period() <= 0.0:
            raise DomainError("finest lamination period underflows")

    @property
    def n_levels(self) -> int:
        return 3 * self.depth

    def period(self, level: int) -> float:
        return self.base_period * float(self.ratio) ** (-level)

    def finest_period(self) -> float:
        return self.period(self.n_levels - 1)

    def levels(self):
        """Per level: (source code, A code, S code, jump normal, fraction, period)."""
        inst = self.instance
        out = []
        for level in range(self.n_levels):
            # within a cycle: S1 -> (A3, S3), S3 -> (A2, S2), S2 -> (A1, S1)
            i = 2 - level % 3
            src = (3, 5, 4)[level % 3]
            out.append((src, i, 3 + i, inst.nu[i], inst.q[i], self.period(level)))
        return out

    def expected_residual(self) -> float:
        return self.instance.residual_factor() ** self.depth


@dataclass(frozen=True)
class Field:
    """Matrix-valued field on the unit torus ``[0, 1)^ndim``.

    ``evaluator`` maps points of shape ``(N, ndim)`` to values of shape
    ``(N, m, n)``; ``labeler``, when present, maps points to integer
    provenance labels.  ``raster``/``label_raster`` hold cell-centre samples on
    a grid ``dims`` (last axis fastest).
    """

    evaluator: Callable[[np.ndarray], np.ndarray]
    ndim: int
    mat_shape: tuple[int, int]
    labeler: Optional[Callable[[np.ndarray], np.ndarray]] = None
    label_names: Optional[dict] = None
    raster: Optional[np.ndarray] = None
    label_raster: Optional[np.ndarray] = None
    schedule: Optional[LaminateSchedule] = None
    meta: dict = field(default_factory=dict)

    @property
    def dims(self) -> Optional[tuple[int, ...]]:
        return None if self.raster is None else tuple(self.raster.shape[: self.ndim])

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return self.evaluator(x[None, :])[0]
        return self.evaluator(x)

    def labels(self, x) -> np.ndarray:
        if self.labeler is None:
            raise ValueError("field carries no provenance labels")
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return self.labeler(x[None, :])[0]
        return self.labeler(x)


def _phase(x: np.ndarray, nu: np.ndarray, period: float) -> np.ndarray:
    t = (x @ nu) / period
    return t - np.floor(t)


def constant_field(A, ndim: int = 3, name: str = "C") -> Field:
    A = np.array(A, dtype=float)
    if A.ndim != 2:
        raise ShapeError("constant value must be a matrix")

    def ev(x):
        return np.broadcast_to(A, (len(x),) + A.shape).copy()

    def lab(x):
        return np.zeros(len(x), dtype=np.uint8)

    return Field(ev, ndim, A.shape, lab, {0: name})


def raster_field(raster: np.ndarray, ndim: Optional[int] = None, label_raster=None) -> Field:
    """Wrap a bare raster; the evaluator returns the value of the containing cell."""
    raster = np.asarray(raster, dtype=float)
    if ndim is None:
        ndim = raster.ndim - 2
    dims = np.array(raster.shape[:ndim])
    mat_shape = raster.shape[ndim:]
    if len(mat_shape) != 2:
        raise ShapeError("raster must have shape dims + (m, n)")

    def cell(x):
        idx = np.floor(np.mod(x, 1.0) * dims).astype(np.int64)
        return tuple(np.minimum(idx, dims - 1).T)

    def ev(x):
        return raster[cell(x)]

    lab = None
    if label_raster is not None:
        label_raster = np.asarray(label_raster)

        def lab(x):
            return label_raster[cell(x)]

    return Field(ev, ndim, tuple(mat_shape), lab, None, raster, label_raster)


def simple_laminate(A, S, nu, q: float, period: float, tol: float = 1e-9, strict: bool = True) -> Field:
    """Two-phase laminate: ``A`` where ``frac(<x, nu> / period) < q``, else ``S``.

    Labels are 0 on ``A`` and 1 on ``S``.  With ``strict=False`` an
    incompatible pair is accepted, which gives a field with nonzero
    divergence concentrated on the layer interfaces.
    """
    A = np.array(A, dtype=float)
    S = np.array(S, dtype=float)
    nu = np.array(nu, dtype=float)
    if A.shape != S.shape or A.ndim != 2:
        raise ShapeError("A and S must be matrices of equal shape")
    if nu.shape != (A.shape[1],) or np.linalg.norm(nu) == 0:
        raise ShapeError("normal must be a nonzero vector of length n")
    nu = nu / np.linalg.norm(nu)
    if not (0.0 < q < 1.0):
        raise DomainError("q must lie in (0, 1)")
    if not (0.0 < period <= 1.0):
        raise DomainError("period must lie in (0, 1]")
    jump = np.linalg.norm((A - S) @ nu)
    if strict and jump > tol * max(1.0, np.linalg.norm(A - S)):
        raise JumpConditionError(f"(A - S) nu = {jump:.3g} != 0; layers are not compatible")
    values = np.stack([A, S])

    def lab(x):
        return (_phase(x, nu, period) >= q).astype(np.uint8)

    def ev(x):
        return values[lab(x)]

    return Field(ev, len(nu), A.shape, lab, {0: "A", 1: "S"}, meta={"nu": nu, "q": q, "period": period})


def _hier_codes(sched: LaminateSchedule, x: np.ndarray, record=None):
    codes = np.full(len(x), 3, dtype=np.uint8)
    level_of = np.zeros(len(x), dtype=np.uint8)
    for level, (src, a_code, s_code, nu, q, period) in enumerate(sched.levels()):
        idx = np.flatnonzero(codes == src)
        if idx.size:
            ph = _phase(x[idx], nu, period)
            codes[idx] = np.where(ph < q, a_code, s_code)
            level_of[idx] = level
        if record is not None:
            record.append(np.isin(codes, _S_CODES))
    return codes, level_of


def hierarchical_laminate(sched: LaminateSchedule, tol: float = 1e-9) -> Field:
    inst = sched.instance
    rep = verify_conditions(inst, tol)
    if not rep.passed:
        raise DomainError(f"instance fails the closure conditions: {rep.to_dict()}")
    values = np.stack(list(inst.A) + list(inst.S))

    def ev(x):
        codes, _ = _hier_codes(sched, x)
        return values[codes]

    def lab(x):
        codes, level_of = _hier_codes(sched, x)
        return codes + 8 * np.minimum(level_of, 31).astype(np.uint8)

    names = {c: VALUE_NAMES[c] for c in range(6)}
    return Field(ev, 3, (3, 3), lab, names, schedule=sched)


def rasterize(
    field: Field,
    dims: Sequence[int],
    max_entries: Optional[int] = None,
    threads: Optional[int] = None,
) -> Field:
    """Sample ``field`` at the cell centres of a periodic grid."""
    dims = tuple(int(d) for d in dims)
    if len(dims) != field.ndim:
        raise ShapeError(f"need {field.ndim} grid dims, got {len(dims)}")
    if any(d < 1 for d in dims):
        raise DomainError("grid dims must be positive")
    cap = MAX_RASTER_ENTRIES if max_entries is None else max_entries
    m, n = field.mat_shape
    total = int(np.prod(dims)) * m * n
    if total > cap:
        raise ResourceError(f"raster would hold {total} floats, cap is {cap}")

    axes = [(np.arange(d) + 0.5) / d for d in dims]
    inner = int(np.prod(dims[1:]))
    inner_pts = np.stack(np.meshgrid(*axes[1:], indexing="ij"), axis=-1).reshape(inner, -1)
    raster = np.empty(dims + (m, n))
    flat = raster.reshape(dims[0], inner, m, n)
    labels = None
    if field.labeler is not None:
        labels = np.empty(dims, dtype=np.uint8)
        flat_lab = labels.reshape(dims[0], inner)

    def slab(i):
        pts = np.empty((inner, len(dims)))
        pts[:, 0] = axes[0][i]
        pts[:, 1:] = inner_pts
        flat[i] = field.evaluator(pts)
        if labels is not None:
            flat_lab[i] = field.labeler(pts)

    workers = threads or default_threads()
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            list(pool.map(slab, range(dims[0])))
    else:
        for i in range(dims[0]):
            slab(i)
    return replace(field, raster=raster, label_raster=labels)


@dataclass
class FractionReport:
    fractions: dict
    stderr: dict
    residual: float
    residual_stderr: float
    expected_residual: Optional[float]
    residual_by_level: list
    expected_by_level: list
    samples: int

    def to_dict(self) -> dict:
        return {
            "samples": self.samples,
            "fractions": self.fractions,
            "stderr": self.stderr,
            "residual": self.residual,
            "residual_stderr": self.residual_stderr,
            "expected_residual": self.expected_residual,
            "residual_by_level": self.residual_by_level,
            "expected_by_level": self.expected_by_level,
        }


def sample_points(n_samples: int, ndim: int, seed: int, chunk: int = SAMPLE_CHUNK):
    """Yield uniform torus points in fixed-size chunks.

    Chunk ``j`` is drawn from a Philox stream keyed by ``seed`` with counter
    offset ``j``, so the sample set does not depend on how chunks are
    scheduled across workers.
    """
    for j, start in enumerate(range(0, n_samples, chunk)):
        size = min(chunk, n_samples - start)
        bitgen = np.random.Philox(key=seed, counter=[0, 0, j, 0])
        yield np.random.Generator(bitgen).random((size, ndim))


def fraction_report(field: Field, samples: int = 1_000_000, seed: int = 0, threads: Optional[int] = None) -> FractionReport:
    """Monte-Carlo volume fractions of each labelled value.

    Standard errors are binomial, ``sqrt(p (1 - p) / samples)``.
    """
    if samples < 10_000:
        raise DomainError("fraction_report needs at least 1e4 samples")
    if field.labeler is None:
        raise ValueError("field carries no provenance labels")
    sched = field.schedule
    hier = sched is not None
    n_codes = 6 if hier else max(field.label_names or {0: None}) + 1
    n_levels = sched.n_levels if hier else 0

    def work(pts):
        if hier:
            rec = []
            codes, _ = _hier_codes(sched, pts, rec)
            per_level = np.array([r.sum() for r in rec], dtype=np.int64)
        else:
            codes = field.labeler(pts)
            per_level = np.zeros(0, dtype=np.int64)
        return np.bincount(codes, minlength=n_codes)[:n_codes], per_level

    chunks = sample_points(samples, field.ndim, seed)
    workers = threads or default_threads()
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(work, chunks))
    else:
        results = [work(c) for c in chunks]
    counts = sum(r[0] for r in results)
    level_counts = sum(r[1] for r in results) if n_levels else np.zeros(0)

    names = field.label_names or {c: str(c) for c in range(n_codes)}
    frac = {names.get(c, str(c)): float(counts[c]) / samples for c in range(n_codes)}
    se = {k: float(np.sqrt(p * (1 - p) / samples)) for k, p in frac.items()}
    if hier:
        resid = float(sum(counts[c] for c in _S_CODES)) / samples
        expected = sched.expected_residual()
        q = sched.instance.q
        exp_levels, acc = [], 1.0
        for level in range(n_levels):
            acc *= 1 - q[2 - level % 3]
            exp_levels.append(acc)
        by_level = [float(c) / samples for c in level_counts]
    else:
        resid, expected, exp_levels, by_level = 0.0, None, [], []
    return FractionReport(
        fractions=frac,
        stderr=se,
        residual=resid,
        residual_stderr=float(np.sqrt(resid * (1 - resid) / samples)),
        expected_residual=expected,
        residual_by_level=by_level,
        expected_by_level=exp_levels,
        samples=samples,
    )
