"""Spectral and geometric analysis of matrix fields on periodic rasters.

Rasters have shape ``dims + (m, n)``; the divergence is taken row by row,
``(Div B)_i = sum_j d_j B_ij``.  Fourier derivatives use the multiplier
``2 pi i k`` with integer wavenumbers.  On an even grid the derivative of the
Nyquist mode vanishes at the grid points, so the component of ``k`` along an
axis is set to zero on that axis' Nyquist plane; spectra of real fields stay
Hermitian and the Leray projection returns real fields.

The ``H^{-1}`` norm weights every mode by its true ``|k|``.  For rasters with
no content on Nyquist planes (smooth fields, laminates whose layers are at
least two cells thick and resolved)

    || P B - B ||_{L^2} = || Div B ||_{H^{-1}}

holds exactly up to rounding; in general the left side is the larger one.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .exceptions import DomainError, ShapeError
from .laminator import Field, LaminateSchedule, hierarchical_laminate, rasterize
from .matkit import AffineReduction, LaminationInstance

__all__ = [
    "MetricsReport",
    "Cylinder",
    "divergence_spectral",
    "leray_project",
    "hminus1_norm",
    "l2_norm",
    "dist_to_K",
    "coarse_average",
    "cylinder_flux",
    "conjugate_field",
    "default_eps",
    "analyze",
    "convergence_table",
    "CSV_COLUMNS",
]


def _raster_of(field) -> np.ndarray:
    if isinstance(field, Field):
        if field.raster is None:
            raise ValueError("field has no raster; call rasterize first")
        return field.raster
    if field is None:
        raise ValueError("missing raster")
    return np.asarray(field, dtype=float)


def _wavevectors(dims: Sequence[int]):
    """Derivative wavenumbers per axis (Nyquist zeroed), their squared norm,
    and the true squared norm ``|k|^2``."""
    ks, k2_true = [], 0
    for ax, d in enumerate(dims):
        k = np.fft.fftfreq(d, 1.0 / d)
        shape = [1] * len(dims)
        shape[ax] = d
        k2_true = k2_true + k.reshape(shape) ** 2
        if d % 2 == 0:
            k = k.copy()
            k[d // 2] = 0.0
        ks.append(k.reshape(shape))
    k2 = sum(k**2 for k in ks)
    return ks, k2, k2_true


def divergence_spectral(field) -> np.ndarray:
    """Row-wise divergence ``dims + (m,)`` by Fourier differentiation."""
    B = _raster_of(field)
    nd = B.ndim - 2
    dims = B.shape[:nd]
    if any(d < 4 for d in dims):
        raise DomainError("spectral divergence needs at least 4 cells per axis")
    if B.shape[-1] != nd:
        raise ShapeError("matrix column count must equal the spatial dimension")
    axes = tuple(range(nd))
    Bh = np.fft.fftn(B, axes=axes)
    ks, _, _ = _wavevectors(dims)
    div_h = sum(2j * np.pi * ks[j][..., None] * Bh[..., j] for j in range(nd))
    return np.fft.ifftn(div_h, axes=axes).real


def leray_project(field) -> np.ndarray:
    """L2-orthogonal projection of every row onto divergence-free fields."""
    B = _raster_of(field)
    nd = B.ndim - 2
    dims = B.shape[:nd]
    if B.shape[-1] != nd:
        raise ShapeError("matrix column count must equal the spatial dimension")
    axes = tuple(range(nd))
    Bh = np.fft.fftn(B, axes=axes)
    ks, k2, _ = _wavevectors(dims)
    inv_k2 = np.divide(1.0, k2, out=np.zeros_like(k2), where=k2 > 0)
    kb = sum(ks[j][..., None] * Bh[..., j] for j in range(nd))
    kb *= inv_k2[..., None]
    for j in range(nd):
        Bh[..., j] -= kb * ks[j][..., None]
    return np.fft.ifftn(Bh, axes=axes).real


def hminus1_norm(v, mean_tol: float = 1e-8) -> float:
    """Homogeneous ``H^{-1}`` norm of a vector field on the unit torus.

    ``|v|^2 = sum_{k != 0} |v_hat(k)|^2 / (4 pi^2 |k|^2)`` with ``v_hat`` the
    Fourier coefficients normalized so that Parseval reads
    ``|v|_{L^2}^2 = sum |v_hat|^2``.
    """
    v = np.asarray(v, dtype=float)
    nd = v.ndim - 1
    dims = v.shape[:nd]
    mean = v.reshape(-1, v.shape[-1]).mean(axis=0)
    if np.max(np.abs(mean), initial=0.0) > mean_tol * max(1.0, float(np.max(np.abs(v), initial=0.0))):
        raise DomainError(f"H^-1 norm needs a zero-mean field, mean = {mean}")
    vh = np.fft.fftn(v, axes=tuple(range(nd))) / np.prod(dims)
    _, _, weight = _wavevectors(dims)
    inv = np.divide(1.0, 4 * np.pi**2 * weight, out=np.zeros_like(weight), where=weight > 0)
    return float(np.sqrt(np.sum(np.abs(vh) ** 2 * inv[..., None])))


def l2_norm(a, ndim: int) -> float:
    """``L^2`` norm on the unit torus of a raster ``dims + value_shape``."""
    a = np.asarray(a, dtype=float)
    cells = int(np.prod(a.shape[:ndim]))
    return float(np.sqrt(np.sum(a * a) / cells))


@dataclass
class MetricsReport:
    lp_dist_to_K: dict
    measure_above_eps: float
    eps: float
    hminus1_div: Optional[float] = None
    l2_projection_gap: Optional[float] = None
    mean_matrix: Optional[np.ndarray] = None
    max_div_after_projection: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "lp_dist_to_K": {str(k): v for k, v in self.lp_dist_to_K.items()},
            "measure_above_eps": self.measure_above_eps,
            "eps": self.eps,
            "hminus1_div": self.hminus1_div,
            "l2_projection_gap": self.l2_projection_gap,
            "mean_matrix": None if self.mean_matrix is None else self.mean_matrix.tolist(),
            "max_div_after_projection": self.max_div_after_projection,
        }


def dist_to_K(field, K: Sequence, eps: float) -> MetricsReport:
    """Per-cell Frobenius distance to the nearest element of ``K``."""
    B = _raster_of(field)
    K = [np.asarray(a, dtype=float) for a in K]
    if not K:
        raise ShapeError("K is empty")
    if any(a.shape != B.shape[-2:] for a in K):
        raise ShapeError("K elements do not match the field's matrix shape")
    flat = B.reshape(-1, *B.shape[-2:])
    d = np.full(len(flat), np.inf)
    for a in K:
        d = np.minimum(d, np.sqrt(np.sum((flat - a) ** 2, axis=(1, 2))))
    return MetricsReport(
        lp_dist_to_K={1: float(d.mean()), 2: float(np.sqrt(np.mean(d**2)))},
        measure_above_eps=float(np.mean(d > eps)),
        eps=float(eps),
    )


def default_eps(inst: LaminationInstance) -> float:
    """Half the smallest distance from a chain matrix ``S_i`` to ``K``."""
    return 0.5 * min(np.linalg.norm(s - a) for s in inst.S for a in inst.A)


def coarse_average(field, block: int) -> tuple[np.ndarray, np.ndarray]:
    """Global mean matrix and the raster of ``block^n`` cell averages."""
    B = _raster_of(field)
    nd = B.ndim - 2
    dims = B.shape[:nd]
    if block < 1 or any(d % block for d in dims):
        raise ShapeError(f"block {block} does not divide grid {dims}")
    shape = []
    for d in dims:
        shape += [d // block, block]
    r = B.reshape(tuple(shape) + B.shape[-2:])
    blocks = r.mean(axis=tuple(range(1, 2 * nd, 2)))
    return B.reshape(-1, *B.shape[-2:]).mean(axis=0), blocks


@dataclass(frozen=True)
class Cylinder:
    """Closed cylinder ``{x : |x_perp - c_perp| <= radius, c_a <= x_a <= c_a + span}``.

    ``center`` is the centre of the lower base; ``axis`` is a coordinate index.
    """

    axis: int
    center: tuple
    radius: float
    span: float

    def check(self, ndim: int):
        c = np.asarray(self.center, dtype=float)
        if c.shape != (ndim,) or not (0 <= self.axis < ndim):
            raise ShapeError("cylinder does not match the field dimension")
        if self.radius <= 0 or self.span <= 0:
            raise DomainError("radius and span must be positive")
        others = [i for i in range(ndim) if i != self.axis]
        lo = min(c[i] - self.radius for i in others)
        hi = max(c[i] + self.radius for i in others)
        if lo < 0 or hi > 1 or c[self.axis] < 0 or c[self.axis] + self.span > 1:
            raise DomainError("cylinder leaves the fundamental domain")


def _flux(field: Field, pts, normals, weights):
    vals = field.evaluator(pts)
    return np.einsum("pij,pj,p->i", vals, normals, weights)


def cylinder_flux(field: Field, cyl: Cylinder, quad_points: int = 64):
    """Midpoint-rule flux of ``B nu`` through the lower base, upper base and
    lateral surface of a cylinder (``ndim`` 2 or 3).

    In 3-d the bases use ``quad_points`` radial by ``4 quad_points`` angular
    cells and the lateral surface ``4 quad_points`` angular by
    ``quad_points`` axial cells; in 2-d the "bases" are segments and the
    lateral boundary is the two side segments.
    """
    nd = field.ndim
    cyl.check(nd)
    if nd not in (2, 3):
        raise ShapeError("cylinder_flux supports 2-d and 3-d fields")
    c = np.asarray(cyl.center, dtype=float)
    a = cyl.axis
    others = [i for i in range(nd) if i != a]
    e_a = np.zeros(nd)
    e_a[a] = 1.0
    Q = int(quad_points)
    R, H = cyl.radius, cyl.span

    if nd == 3:
        nr, nt = Q, 4 * Q
        r_edges = np.linspace(0, R, nr + 1)
        r_mid = 0.5 * (r_edges[1:] + r_edges[:-1])
        dth = 2 * np.pi / nt
        th = (np.arange(nt) + 0.5) * dth
        rr, tt = np.meshgrid(r_mid, th, indexing="ij")
        area = np.repeat(0.5 * (r_edges[1:] ** 2 - r_edges[:-1] ** 2) * dth, nt)
        disk = np.zeros((rr.size, 3))
        disk[:, others[0]] = (rr * np.cos(tt)).ravel()
        disk[:, others[1]] = (rr * np.sin(tt)).ravel()
        dz = H / Q
        z = (np.arange(Q) + 0.5) * dz
        zz, tl = np.meshgrid(z, th, indexing="ij")
        lat_n = np.zeros((zz.size, 3))
        lat_n[:, others[0]] = np.cos(tl).ravel()
        lat_n[:, others[1]] = np.sin(tl).ravel()
        lat = R * lat_n
        lat[:, a] = zz.ravel()
        lat_w = np.full(zz.size, R * dth * dz)
    else:
        dr = 2 * R / Q
        s = -R + (np.arange(Q) + 0.5) * dr
        disk = np.zeros((Q, 2))
        disk[:, others[0]] = s
        area = np.full(Q, dr)
        dz = H / Q
        z = (np.arange(Q) + 0.5) * dz
        lat = np.zeros((2 * Q, 2))
        lat[:, a] = np.concatenate([z, z])
        lat[:, others[0]] = np.concatenate([np.full(Q, R), np.full(Q, -R)])
        lat_n = np.zeros((2 * Q, 2))
        lat_n[:, others[0]] = np.concatenate([np.ones(Q), -np.ones(Q)])
        lat_w = np.full(2 * Q, dz)

    lower = disk + c
    upper = disk + c + H * e_a
    base1 = _flux(field, lower, np.broadcast_to(-e_a, lower.shape), area)
    base2 = _flux(field, upper, np.broadcast_to(e_a, upper.shape), area)
    lateral = _flux(field, lat + c, lat_n, lat_w)
    return base1, base2, lateral


def conjugate_field(field: Field, red: AffineReduction) -> Field:
    """Field ``y -> R^T F (B(R y) + C) R``.

    Points ``R y`` are reduced modulo 1, which matches the original torus
    only when ``R`` maps the integer lattice to itself (signed permutations).
    """
    m, n = field.mat_shape
    if red.F.shape[1] != m or red.R.shape[0] != n or red.C.shape != (m, n):
        raise ShapeError("reduction does not match the field's matrix shape")
    R = red.R

    def rotated(y):
        return np.mod(np.asarray(y) @ R.T, 1.0)

    def ev(y):
        return red.apply(field.evaluator(rotated(y)))

    lab = None
    if field.labeler is not None:

        def lab(y):
            return field.labeler(rotated(y))

    out_shape = (R.shape[0], R.shape[0])
    return Field(ev, field.ndim, out_shape, lab, field.label_names)


def analyze(field, K: Sequence, eps: float, project: bool = False) -> tuple[MetricsReport, Optional[np.ndarray]]:
    """All raster metrics; optionally also return the Leray-projected raster."""
    B = _raster_of(field)
    nd = B.ndim - 2
    rep = dist_to_K(B, K, eps)
    div = divergence_spectral(B)
    rep.hminus1_div = hminus1_norm(div)
    P = leray_project(B)
    rep.l2_projection_gap = l2_norm(P - B, nd)
    rep.mean_matrix = B.reshape(-1, *B.shape[-2:]).mean(axis=0)
    if project:
        rep.max_div_after_projection = float(np.max(np.abs(divergence_spectral(P))))
        return rep, P
    return rep, None


CSV_COLUMNS = ["ratio", "depth", "grid", "hminus1_div", "residual_fraction", "l2_projection_gap"] + [
    f"mean_{i}{j}" for i in range(1, 4) for j in range(1, 4)
]


def convergence_table(
    inst: LaminationInstance,
    ratios: Sequence[int],
    depth: int = 1,
    grid: Sequence[int] = (64, 64, 64),
    base_period: float = 1.0,
    eps: Optional[float] = None,
) -> list[dict]:
    """One row of raster metrics per scale ratio."""
    eps = default_eps(inst) if eps is None else eps
    rows = []
    for r in ratios:
        sched = LaminateSchedule(inst, depth, int(r), base_period)
        f = rasterize(hierarchical_laminate(sched), grid)
        rep, _ = analyze(f, inst.A, eps)
        row = {
            "ratio": int(r),
            "depth": depth,
            "grid": "x".join(str(d) for d in grid),
            "hminus1_div": rep.hminus1_div,
            "residual_fraction": rep.measure_above_eps,
            "l2_projection_gap": rep.l2_projection_gap,
        }
        for i in range(3):
            for j in range(3):
                row[f"mean_{i + 1}{j + 1}"] = float(rep.mean_matrix[i, j])
        rows.append(row)
    return rows
