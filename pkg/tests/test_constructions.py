import math

import numpy as np
import pytest

from warpcurv.constructions import (
    assemble_boot,
    bend_alpha,
    bend_lambda_search,
    bend_property_checks,
    boot_cross_sphere,
    build_bend,
    build_toe,
    build_torpedo,
    build_torpedo_cylinder,
    certify_regions,
    fifth_term_report,
    min_pair_curvature,
    search_bend_Lambda,
    toe_sign_structure,
)
from warpcurv.curvature import base_sectionals, limit_at_axis, pair_curvatures, s_from_projector
from warpcurv.errors import InvalidParams, InvalidP, LambdaTooSmall
from warpcurv.geometry import GridSpec, ModelPoint
from warpcurv.oracle import crosscheck
from warpcurv.positivity import certify
from warpcurv.profiles import torpedo_constant

SMALL = GridSpec(16, 8)


def test_torpedo_positive_p1():
    assert certify(build_torpedo(2, 1.0), 1, grid=SMALL).verdict == "positive"


def test_torpedo_neck_curvature():
    model = build_torpedo(2, 1.0, 5.0)
    C = torpedo_constant()
    K = pair_curvatures(model, np.array(math.pi / 2 + 2.0))
    assert K[1, 2] == pytest.approx(1 / C**2, rel=1e-9)
    assert K[0, 1] == pytest.approx(0.0, abs=1e-15)


def test_torpedo_axis_limit():
    assert limit_at_axis(build_torpedo(2, 0.8)) == pytest.approx(1 / 0.64, rel=1e-8)


def test_torpedo_cylinder():
    model = build_torpedo_cylinder(3, 1.0)
    assert certify(model, 1, grid=SMALL).verdict == "positive"
    assert crosscheck(model, samples=20).max_residual < 1e-5


def test_builders_validate():
    with pytest.raises(InvalidParams):
        build_torpedo(2, -1.0)
    with pytest.raises(InvalidParams):
        build_toe(1)
    with pytest.raises(InvalidParams):
        build_torpedo_cylinder(2, 1.0, 0.0, 0.0)
    with pytest.raises(LambdaTooSmall):
        build_bend(2, 1.0, 0.5)


def test_toe_positive_and_signs():
    model = build_toe(2, 1.0)
    assert certify(model, 0, grid=SMALL).verdict == "positive"
    assert toe_sign_structure(model) <= 0.0


def test_toe_circle_warping_at_least_one():
    model = build_toe(3, 1.0)
    R, T = np.meshgrid(np.linspace(*model.r_domain, 101), np.linspace(*model.t_domain, 101))
    assert np.min(model.omega.value(R, T)) >= 1.0 - 1e-12


def test_bend_default_radius():
    alpha = bend_alpha(1.0)
    assert build_bend(2, 1.0).omega.Lambda == pytest.approx(2 * alpha.max_abs() + 1)


def test_bend_search_finds_positive_radius():
    res = bend_lambda_search(2, 1.0, 0, SMALL)
    assert math.isfinite(res.Lambda)
    assert res.certificate.verdict == "positive"
    assert search_bend_Lambda(2, 1.0, 0, SMALL) == res.Lambda


def test_bend_minimum_grows_with_radius():
    lam = search_bend_Lambda(2, 1.0, 0, SMALL)
    small = certify(build_bend(2, 1.0, max(lam / 2, bend_alpha(1.0).max_abs() + 0.05)), 0, grid=SMALL)
    big = certify(build_bend(2, 1.0, lam), 0, grid=SMALL)
    assert small.min_value <= big.min_value


def test_bend_search_checks_p():
    with pytest.raises(InvalidP):
        bend_lambda_search(2, 1.0, 1, SMALL)


def test_bend_slope_bound():
    checks = bend_property_checks(build_bend(3, 1.0))
    assert checks["slope_excess"] <= 1e-12


def test_bend_circle_warping_concave_in_r():
    """Second r-derivative of the circle warping is nonpositive."""
    checks = bend_property_checks(build_bend(3, 1.0))
    assert checks["max_omega_rr"] <= 1e-12


def test_fifth_term_within_bound():
    alpha = bend_alpha(1.0)
    for eps in (1e-2, 0.1, 1.0, 10.0):
        rep = fifth_term_report(2, 1.0, alpha.max_abs() + eps)
        assert rep.attained <= rep.bound * (1 + 1e-9)


def test_boot_regions_positive():
    boot = assemble_boot(2, 1.0)
    certs = certify_regions(boot, 0, SMALL, threads=4)
    assert set(certs) == {"R1", "R2", "R3", "R4"}
    assert all(c.verdict == "positive" for c in certs.values())


def test_boot_flat_region_minimum():
    """The flat piece carries the neck radius C delta, so its minimum is 2/(C delta)^2."""
    delta = 1.0
    boot = assemble_boot(2, delta)
    cert = certify(boot.region("R4").model, 0, grid=SMALL)
    C = torpedo_constant()
    assert cert.min_value == pytest.approx(2 / (C * delta) ** 2, rel=1e-9)


def test_boot_pair_curvature_signs():
    boot = assemble_boot(2, 1.0)
    assert min_pair_curvature(boot.region("R1").model, SMALL) >= -1e-12
    assert min_pair_curvature(boot.region("R2").model, SMALL) < 0


def test_boot_cross_sphere():
    assert boot_cross_sphere(2, 0, 1.0) is not None
    plain = assemble_boot(2, 1.0)
    same = boot_cross_sphere(2, 0, 1.0)
    assert [r.name for r in same.regions] == [r.name for r in plain.regions]
    withs = boot_cross_sphere(2, 2, 1.0)
    assert withs.dim == plain.dim + 2


def test_sphere_factor_pairs_add_one():
    model = boot_cross_sphere(2, 2, 1.0).region("R3").model
    base = model.base
    K = pair_curvatures(model, np.array(0.5), np.array(0.5))
    Kb = pair_curvatures(base, np.array(0.5), np.array(0.5))
    d0 = base.dim
    Pi = np.zeros((model.dim, model.dim))
    Pi[:d0, :d0] = np.eye(d0)
    Pi[d0:, d0:] = np.eye(2)
    # adding both sphere directions adds the unit pair twice (ordered)
    assert float(s_from_projector(K, Pi)) == pytest.approx(float(s_from_projector(Kb, np.eye(d0))) + 2.0, rel=1e-12)
