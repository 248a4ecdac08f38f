import math

import numpy as np
import pytest

from warpcurv.constructions import build_bend, build_toe, build_torpedo
from warpcurv.curvature import (
    base_sectionals,
    case_formula,
    limit_at_axis,
    multiply_warped_sectionals,
    pair_curvatures,
    riemann_quadform,
    s_pn,
    s_pn_case,
)
from warpcurv.errors import AxisSingularity, CaseMismatch, DimensionMismatch, NotClosed, UnsupportedModel
from warpcurv.geometry import (
    ModelPoint,
    MultiplyWarpedLine,
    PlaneComplement,
    ProductOfSpheres,
    TangentVector,
    TwoDWarp,
    WarpedLine,
    random_complement,
)
from warpcurv.oracle import chart_of, frame_sectional, frame_riemann
from warpcurv.profiles import (
    BumpRamp,
    ComposedProfile,
    ConstantProfile,
    LiftedProfile,
    PolynomialProfile,
    ReversedProfile,
    SineProfile,
    TorpedoProfile,
    torpedo_constant,
)


def flat_cylinder(n, delta):
    return TwoDWarp(n, ConstantProfile(delta, (0.0, 1.0)))


def round_join(n, delta=1.0):
    """dr^2 + (delta sin(r/delta))^2 dt^2 + (delta cos(r/delta))^2 ds_n^2: a round sphere."""
    s = SineProfile(delta, (0.0, math.pi * delta / 2))
    return TwoDWarp(n, ReversedProfile(s), LiftedProfile(s, (0.0, 1.0)))


@pytest.mark.parametrize("delta", [1.0, 0.5, 3.0])
def test_round_join_gives_constant_curvature(delta):
    model = round_join(3, delta)
    # up to the fiber axis at r = pi delta / 2; the circle collapses at r = 0
    r = np.linspace(0.02 * delta, math.pi * delta / 2, 41)
    K = pair_curvatures(model, r, np.full_like(r, 0.5))
    off = ~np.eye(model.dim, dtype=bool)
    assert np.max(np.abs(K[:, off] - 1.0 / delta**2)) < 1e-8


def test_round_fiber_over_flat_line():
    """Without t-warping the round fiber sees a flat t direction: S^{n+1} x R."""
    tab = base_sectionals(TwoDWarp(2, SineProfile(1.0)), ModelPoint(math.pi / 3, 0.2))
    assert tab.as_tuple() == pytest.approx((0.0, 1.0, 0.0, 1.0), abs=1e-12)


def test_flat_cylinder_table():
    tab = base_sectionals(flat_cylinder(2, 0.5), ModelPoint(0.3, 0.4))
    assert tab.as_tuple() == pytest.approx((0.0, 0.0, 0.0, 4.0), abs=1e-15)


def test_unit_sphere_table():
    tab = base_sectionals(round_join(2), ModelPoint(math.pi / 3, 0.2))
    assert tab.as_tuple() == pytest.approx((1.0, 1.0, 1.0, 1.0), abs=1e-12)


def test_torpedo_cap_fiber_curvature():
    model = TwoDWarp(2, TorpedoProfile(1.0, 0.0))
    assert base_sectionals(model, ModelPoint(math.pi / 8, 0.5)).K_ij == pytest.approx(1.0, abs=1e-12)


def test_quadform_flat_direction_vanishes():
    model = flat_cylinder(2, 2.0)
    x = ModelPoint(0.5, 0.5)
    v, w = TangentVector(1.0, 0.0, (0.0, 0.0)), TangentVector(0.0, 0.0, (1.0, 0.0))
    assert riemann_quadform(model, x, v, w) == 0.0


def test_quadform_fiber_pair_on_torpedo():
    model = TwoDWarp(2, TorpedoProfile(1.0, 0.0))
    v, w = np.array([0, 0, 1.0, 0]), np.array([0, 0, 0, 1.0])
    assert riemann_quadform(model, ModelPoint(math.pi / 8, 0.5), v, w) == pytest.approx(1.0, abs=1e-12)


def test_quadform_on_round_sphere_matches_oracle():
    model = round_join(2)
    chart = chart_of(model)
    rng = np.random.default_rng(5)
    for _ in range(20):
        r, t = rng.uniform(0.3, math.pi / 2 - 0.3), rng.uniform(0.1, 0.9)
        v, w = rng.standard_normal((2, 4))
        coords = np.array([r, t, rng.uniform(0.5, math.pi - 0.5), rng.uniform(0, 2 * math.pi)])
        Rf = frame_riemann(chart, coords, 1e-3, richardson=True)
        area = (v @ v) * (w @ w) - (v @ w) ** 2
        closed = riemann_quadform(model, ModelPoint(r, t), v, w)
        assert closed == pytest.approx(area, abs=1e-12)
        assert closed == pytest.approx(frame_sectional(Rf, v, w) * area, abs=1e-6)


def test_quadform_agrees_with_pair_matrix_on_bend():
    model = build_bend(3, 1.0)
    rng = np.random.default_rng(1)
    K = pair_curvatures(model, np.array(0.8), np.array(0.7))
    for _ in range(10):
        v, w = rng.standard_normal((2, model.dim))
        wedge = np.outer(v, w) - np.outer(w, v)
        assert riemann_quadform(model, ModelPoint(0.8, 0.7), v, w) == pytest.approx(0.5 * np.sum(K * wedge**2), rel=1e-12)


def test_quadform_refuses_axis():
    with pytest.raises(AxisSingularity):
        riemann_quadform(TwoDWarp(2, SineProfile(1.0)), ModelPoint(0.0, 0.5), np.eye(4)[0], np.eye(4)[2])


def test_s_round_sphere_counts_pairs():
    model = WarpedLine(4, SineProfile(1.0))
    for seed in range(5):
        assert s_pn(model, ModelPoint(1.0), random_complement(seed, 5, 2)) == pytest.approx(6.0, abs=1e-12)


def test_s_product_mixed_plane_is_zero():
    model = ProductOfSpheres((2, 2))
    basis = np.eye(4)[[0, 2]]
    assert s_pn(model, ModelPoint(0.0), PlaneComplement(basis)) == pytest.approx(0.0, abs=1e-15)


def test_s_product_plane_inside_factor():
    model = ProductOfSpheres((2, 2))
    # complement of e_0: {e_1, e_2, e_3}; pairs (1,2),(1,3) mixed, (2,3) intra
    assert s_pn(model, ModelPoint(0.0), PlaneComplement(np.eye(4)[1:])) == pytest.approx(2.0, abs=1e-15)


def test_s_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        s_pn(ProductOfSpheres((2, 2)), ModelPoint(0.0), random_complement(0, 5, 1))


@pytest.mark.parametrize("n,p", [(2, 0), (3, 1), (4, 2)])
def test_case_one_on_flat_cylinder(n, p):
    delta = 0.7
    got = s_pn_case(flat_cylinder(n, delta), ModelPoint(0.5, 0.5), 1, {"p": p})
    assert got == pytest.approx((n - p) * (n - p - 1) / delta**2, rel=1e-13)


def test_case_one_in_torpedo_neck():
    n, p = 3, 1
    model = TwoDWarp(n, TorpedoProfile(1.0, 2.0))
    C = torpedo_constant()
    got = s_pn_case(model, ModelPoint(math.pi / 2 + 1.0, 0.5), 1, {"p": p})
    assert got == pytest.approx((n - p) * (n - p - 1) / C**2, rel=1e-9)


def test_case_three_pure_fiber_collapses():
    n, p = 4, 2
    model = build_toe(n, 1.0)
    x = ModelPoint(0.6, 0.5)
    one = s_pn_case(model, x, 1, {"p": p})
    three = s_pn_case(model, x, 3, {"p": p, "v": (0, 0, 1.0, 0), "w": (0, 0, 0, 1.0)})
    tab = base_sectionals(model, x)
    # the complement is all fiber: n-p+2 directions, every pair curving by K_ij
    k = n - p + 2
    assert three == pytest.approx(k * (k - 1) * tab.K_ij, rel=1e-12)
    # case 1 swaps the two extra fiber directions for r and t
    expect_one = (n - p) * (n - p - 1) * tab.K_ij + 2 * (n - p) * (tab.K_ri + tab.K_ti) + 2 * tab.K_rt
    assert one == pytest.approx(expect_one, rel=1e-12)


def test_case_formulas_match_projector_sum():
    """Each case equals the pair-matrix sum over its complement."""
    n, p = 4, 2
    model = build_bend(n, 1.0)
    x = ModelPoint(0.7, 0.6)
    K = pair_curvatures(model, np.array(x.r), np.array(x.t))
    d = model.dim
    rng = np.random.default_rng(2)
    k = d - p
    # complement: k-2 fiber directions beyond the active ones, plus span(v, w)
    # with v, w in (r, t, e_k, e_{k+1})
    fixed = [2 + j for j in range(2, 2 + k - 2)]
    active = [0, 1, 2, 3]
    for case_id, mask in ((1, (1, 1, 0, 0)), (2, (1, 1, 1, 0)), (3, (1, 1, 1, 1))):
        raw = rng.standard_normal((2, 4)) * np.array(mask)
        if case_id == 1:
            raw = np.array([[1.0, 0, 0, 0], [0, 1.0, 0, 0]])
        q, _ = np.linalg.qr(raw.T)
        v, w = q.T
        full = np.zeros((k, d))
        for row, idx in enumerate(fixed):
            full[row, idx] = 1.0
        full[k - 2, active] = v
        full[k - 1, active] = w
        expect = s_pn(model, x, PlaneComplement(full))
        params = {"p": p} if case_id == 1 else {"p": p, "v": v, "w": w}
        assert s_pn_case(model, x, case_id, params) == pytest.approx(expect, rel=1e-10, abs=1e-12)


def test_case_validation():
    model = build_toe(3, 1.0)
    x = ModelPoint(0.6, 0.5)
    with pytest.raises(CaseMismatch):
        s_pn_case(model, x, 2, {"p": 0, "v": (1.0, 1.0, 0, 0), "w": (0, 0, 1.0, 0)})
    with pytest.raises(CaseMismatch):
        s_pn_case(model, x, 4, {"p": 0})
    with pytest.raises(UnsupportedModel):
        s_pn_case(WarpedLine(2, SineProfile()), x, 1, {"p": 0})


def test_multiply_warped_products_and_spheres():
    flat = MultiplyWarpedLine(((2, ConstantProfile(1.0, (0, 1))), (3, ConstantProfile(1.0, (0, 1)))))
    tab = multiply_warped_sectionals(flat, ModelPoint(0.5))
    assert tab.line_fiber == (0.0, 0.0)
    assert tab.intra == pytest.approx((1.0, 1.0), abs=1e-15)
    assert np.all(tab.cross == 0.0)
    round_ = MultiplyWarpedLine(((3, SineProfile(1.0)),))
    tab = multiply_warped_sectionals(round_, ModelPoint(1.1))
    assert tab.line_fiber[0] == pytest.approx(1.0, abs=1e-14)
    assert tab.intra[0] == pytest.approx(1.0, abs=1e-14)


def test_multiply_warped_matches_oracle():
    rho1 = ComposedProfile(PolynomialProfile([1.0, 0.1], (0.0, 1.0)), BumpRamp(1.0, 0.0, (0.0, 1.0)))
    model = MultiplyWarpedLine(((2, rho1), (2, ConstantProfile(1.0, (0.0, 1.0)))))
    chart = chart_of(model)
    rng = np.random.default_rng(9)
    for _ in range(10):
        t = rng.uniform(0.1, 0.9)
        coords = np.array([t, rng.uniform(0.5, 2.6), rng.uniform(0, 6), rng.uniform(0.5, 2.6), rng.uniform(0, 6)])
        Rf = frame_riemann(chart, coords, 1e-3, richardson=True)
        oracle = np.einsum("abba->ab", Rf)
        np.fill_diagonal(oracle, 0.0)
        assert np.max(np.abs(oracle - pair_curvatures(model, np.array(t)))) < 1e-6


def test_axis_limits():
    assert limit_at_axis(build_torpedo(2, 1.0)) == pytest.approx(1.0, abs=1e-8)
    assert limit_at_axis(build_torpedo(2, 0.5)) == pytest.approx(4.0, rel=1e-8)
    assert limit_at_axis(WarpedLine(2, SineProfile(1.0))) == pytest.approx(1.0, abs=1e-8)
    assert limit_at_axis(WarpedLine(2, SineProfile(3.0))) == pytest.approx(1 / 9, rel=1e-8)
    assert limit_at_axis(WarpedLine(4, SineProfile(1.0)), p=1) == pytest.approx(12.0, rel=1e-8)
    with pytest.raises(NotClosed):
        limit_at_axis(flat_cylinder(2, 1.0))


def test_axis_rows_use_the_limit():
    model = build_torpedo(2, 0.5)
    K = pair_curvatures(model, np.array([0.0]))
    off = ~np.eye(model.dim, dtype=bool)
    assert np.max(np.abs(K[0][off] - 4.0)) < 1e-8
