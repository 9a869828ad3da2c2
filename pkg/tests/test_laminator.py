import numpy as np
import pytest

from divlam import (
    LaminateSchedule,
    constant_field,
    fraction_report,
    hierarchical_laminate,
    raster_field,
    rasterize,
    simple_laminate,
)
from divlam.exceptions import DomainError, JumpConditionError, ResourceError, ShapeError
from divlam.laminator import sample_points

S1 = np.diag([0.0, 2.0, 2.0 / 3.0])
E1 = np.array([1.0, 0.0, 0.0])


def test_simple_laminate_phase():
    f = simple_laminate(np.zeros((3, 3)), S1, E1, 0.5, 0.25)
    # 0.1 / 0.25 = 0.4 < 0.5 ; 0.15 / 0.25 = 0.6
    np.testing.assert_array_equal(f([0.1, 0.3, 0.7]), np.zeros((3, 3)))
    np.testing.assert_array_equal(f([0.15, 0.9, 0.2]), S1)


def test_simple_laminate_rejects_incompatible():
    with pytest.raises(JumpConditionError):
        simple_laminate(np.eye(3), np.zeros((3, 3)), E1, 0.5, 0.25)
    f = simple_laminate(np.eye(3), np.zeros((3, 3)), E1, 0.5, 0.25, strict=False)
    np.testing.assert_array_equal(f([0.01, 0, 0]), np.eye(3))


@pytest.mark.parametrize("q,period", [(0.0, 0.5), (1.0, 0.5), (0.5, 0.0), (0.5, 1.5)])
def test_simple_laminate_domain(q, period):
    with pytest.raises(DomainError):
        simple_laminate(np.zeros((3, 3)), S1, E1, q, period)


def test_simple_laminate_fraction():
    f = simple_laminate(np.zeros((3, 3)), S1, E1, 0.3, 0.25)
    rep = fraction_report(f, 1_000_000, seed=4)
    assert abs(rep.fractions["A"] - 0.3) <= 3 * np.sqrt(0.3 * 0.7 / 1e6)


def test_simple_laminate_mean_on_raster():
    # period 1/4 on 64 cells: 16 cells per layer pair, 8 of each
    f = rasterize(simple_laminate(np.zeros((3, 3)), S1, E1, 0.5, 0.25), (64, 4, 4))
    np.testing.assert_allclose(f.raster.reshape(-1, 3, 3).mean(axis=0), 0.5 * S1, atol=1e-15)


def test_rasterize_constant():
    f = rasterize(constant_field(S1), (5, 3, 2))
    assert f.raster.shape == (5, 3, 2, 3, 3)
    assert np.all(f.raster == S1)
    assert np.all(f.label_raster == 0)


def test_rasterize_alternating_labels():
    # cell centres 1/16, 3/16, ... have phases 1/4, 3/4, ... of a 1/4 period
    f = rasterize(simple_laminate(np.zeros((3, 3)), S1, E1, 0.5, 0.25), (8, 1, 1))
    assert "".join("AS"[v] for v in f.label_raster.ravel()) == "ASASASAS"


def test_rasterize_errors():
    f = constant_field(S1)
    with pytest.raises(DomainError):
        rasterize(f, (0, 4, 4))
    with pytest.raises(ShapeError):
        rasterize(f, (4, 4))
    with pytest.raises(ResourceError):
        rasterize(f, (64, 64, 64), max_entries=1000)


def test_raster_field_lookup():
    r = np.arange(4 * 2 * 1.0).reshape(4, 2, 1, 1)
    f = raster_field(r)
    assert f.ndim == 2 and f.mat_shape == (1, 1)
    assert f([0.3, 0.6])[0, 0] == r[1, 1, 0, 0]
    assert f([1.3, -0.4])[0, 0] == r[1, 1, 0, 0]


def test_constant_field_fraction():
    rep = fraction_report(constant_field(np.eye(3), name="A2"), 10_000)
    assert rep.fractions == {"A2": 1.0}
    with pytest.raises(DomainError):
        fraction_report(constant_field(np.eye(3)), 100)


def test_schedule_validation(canonical):
    for kwargs in ({"depth": 0}, {"depth": 1, "ratio": 1}, {"depth": 1, "base_period": 0.0}, {"depth": 1, "base_period": 2.0}):
        with pytest.raises(DomainError):
            LaminateSchedule(canonical, **kwargs)
    s = LaminateSchedule(canonical, 2, ratio=3, base_period=0.5)
    assert s.n_levels == 6
    assert s.period(2) == pytest.approx(0.5 / 9)
    assert s.expected_residual() == pytest.approx(1 / 64)


def test_schedule_jump_consistency(canonical):
    # every level laminates a pair whose difference kills the layer normal
    for src, a, s, nu, q, period in LaminateSchedule(canonical, 2).levels():
        A = canonical.A[a]
        S = canonical.S[s - 3]
        assert np.linalg.norm((A - S) @ nu) <= 1e-12
        # the region being replaced holds the convex combination of the pair
        S_src = canonical.S[src - 3]
        np.testing.assert_allclose(q * A + (1 - q) * S, S_src, atol=1e-12)


def test_hierarchical_fractions_depth1(canonical):
    f = hierarchical_laminate(LaminateSchedule(canonical, 1))
    rep = fraction_report(f, 1_000_000, seed=0)
    expected = {"A3": 0.5, "A2": 0.25, "A1": 0.125, "S1": 0.125, "S2": 0.0, "S3": 0.0}
    for k, v in expected.items():
        assert abs(rep.fractions[k] - v) <= 3 * np.sqrt(v * (1 - v) / 1e6) + 1e-12, k
    np.testing.assert_allclose(rep.expected_by_level, [0.5, 0.25, 0.125])
    for got, want in zip(rep.residual_by_level, rep.expected_by_level):
        assert abs(got - want) <= 3 * np.sqrt(want * (1 - want) / 1e6)


def test_telescoping_mean(canonical):
    f = hierarchical_laminate(LaminateSchedule(canonical, 2))
    n = 1_000_000
    s = np.zeros((3, 3))
    s2 = np.zeros((3, 3))
    for pts in sample_points(n, 3, seed=12):
        v = f(pts)
        s += v.sum(axis=0)
        s2 += (v * v).sum(axis=0)
    mean = s / n
    sigma = np.sqrt(np.maximum(s2 / n - mean**2, 0) / n)
    assert np.all(np.abs(mean - S1) <= 3 * sigma + 1e-12)


def test_fraction_report_thread_independent(canonical):
    f = hierarchical_laminate(LaminateSchedule(canonical, 1))
    a = fraction_report(f, 200_000, seed=3, threads=1).to_dict()
    b = fraction_report(f, 200_000, seed=3, threads=3).to_dict()
    assert a == b


def test_rasterize_thread_independent(canonical):
    f = hierarchical_laminate(LaminateSchedule(canonical, 1, base_period=1.0))
    a = rasterize(f, (16, 16, 16), threads=1)
    b = rasterize(f, (16, 16, 16), threads=4)
    np.testing.assert_array_equal(a.raster, b.raster)
    np.testing.assert_array_equal(a.label_raster, b.label_raster)


def test_labels_match_values(canonical):
    f = rasterize(hierarchical_laminate(LaminateSchedule(canonical, 1)), (16, 16, 16))
    values = np.stack(list(canonical.A) + list(canonical.S))
    np.testing.assert_array_equal(values[f.label_raster % 8], f.raster)


def test_hierarchical_rejects_broken_instance(canonical):
    from divlam import LaminationInstance

    A = (canonical.A[0], canonical.A[1], canonical.A[2] + 0.1)
    bad = LaminationInstance(A, canonical.S, canonical.nu, canonical.lambdas, canonical.params)
    with pytest.raises(DomainError):
        hierarchical_laminate(LaminateSchedule(bad, 1))
