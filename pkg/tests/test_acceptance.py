"""End-to-end acceptance checks, one test per criterion.

Each test prints a PASS/FAIL line; the session summary repeats them.
Run alone with ``pytest tests/test_acceptance.py -v -s``.
"""

import functools
import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE
from warpcurv.concordance import (
    build_concordance,
    cylinder,
    expansion_check,
    find_C,
    product_path,
    round_path,
)
from warpcurv.constructions import (
    assemble_boot,
    bend_alpha,
    boot_cross_sphere,
    build_bend,
    build_toe,
    build_torpedo,
    build_torpedo_cylinder,
    certify_regions,
    fifth_term_report,
    search_bend_Lambda,
)
from warpcurv.curvature import limit_at_axis, pair_curvatures, s_from_projector
from warpcurv.geometry import GridSpec, ProductOfSpheres, WarpedLine, check_region_interfaces
from warpcurv.oracle import chart_of, crosscheck, lowered_riemann
from warpcurv.positivity import certify
from warpcurv.profiles import BumpRamp, SineProfile, mu_derivative_sups, simpson_torpedo_constant, torpedo_constant


def criterion(number, title):
    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            start = time.perf_counter()
            try:
                fn(*args, **kwargs)
            except BaseException:
                ACCEPTANCE[number] = (title, False, time.perf_counter() - start)
                print(f"\ncriterion {number}: FAIL  {title}")
                raise
            ACCEPTANCE[number] = (title, True, time.perf_counter() - start)
            print(f"\ncriterion {number}: PASS  {title}")

        return run

    return wrap


def oracle_families():
    return {
        "warped line (torpedo)": build_torpedo(2, 1.0),
        "toe": build_toe(2, 1.0),
        "bend": build_bend(2, 1.0),
        "multiply warped line": cylinder(product_path((2, 2), (1.0, 1.0), (2.0, 1.0)), BumpRamp(1.0, 0.0, (0.0, 1.0))),
        "product of spheres": ProductOfSpheres((2, 2), (1.0, 2.0)),
    }


@criterion(1, "closed forms match the finite-difference oracle")
def test_c01_oracle_equivalence():
    start = time.perf_counter()
    for name, model in oracle_families().items():
        rep = crosscheck(model, samples=50, tol=1e-5)
        assert len(rep.rows) == 50
        assert rep.max_residual < 1e-5, f"{name}: {rep.max_residual:.3e}"
        # second-order stencil without extrapolation: halving h quarters the error
        coarse = crosscheck(model, samples=50, h=0.02, richardson=False, tol=1.0)
        fine = crosscheck(model, samples=50, h=0.01, richardson=False, tol=1.0)
        ratio = coarse.max_residual / fine.max_residual
        print(f"  {name}: max residual {rep.max_residual:.2e}, h-halving ratio {ratio:.3f}")
        assert 3.5 <= ratio <= 4.5, f"{name}: ratio {ratio}"
    assert time.perf_counter() - start < 60


@criterion(2, "round profile recovers constant curvature, axis limit included")
def test_c02_round_sphere():
    for delta in (1.0, 0.5, 3.0):
        model = WarpedLine(3, SineProfile(delta))
        r = np.linspace(0.0, math.pi * delta, 201)  # both axis ends included
        K = pair_curvatures(model, r)
        off = ~np.eye(model.dim, dtype=bool)
        assert np.max(np.abs(K[:, off] - 1 / delta**2)) < 1e-8
        for end in model.beta.domain:
            assert abs(limit_at_axis(model, end=end) - 1 / delta**2) < 1e-8


@criterion(3, "torpedo neck constant from two quadratures")
def test_c03_torpedo_constant():
    C = torpedo_constant(1e-10)
    print(f"  C = {C:.12f}")
    assert abs(C - 0.916) <= 1e-3
    assert abs(C - simpson_torpedo_constant(1_000_000)) < 1e-8


def _mixed(basis, dims):
    starts = np.cumsum([0] + list(dims))
    return all(np.linalg.matrix_rank(basis[:, a:b], tol=1e-6) <= 1 for a, b in zip(starts, starts[1:]))


@criterion(4, "sphere products are positive exactly below n - m")
def test_c04_sphere_products():
    start = time.perf_counter()
    for dims in ((2, 2), (1, 3), (1, 1, 2)):
        model = ProductOfSpheres(dims)
        n, m = sum(dims), len(dims)
        for p in range(0, n - 1):
            cert = certify(model, p)
            if p < n - m:
                assert cert.verdict == "positive", (dims, p, cert.min_value)
            else:
                assert cert.verdict == "nonpositive", (dims, p, cert.min_value)
            if p == n - m:
                assert abs(cert.min_value) <= 1e-7
                assert abs(cert.reevaluate(model)) <= 1e-7
                assert _mixed(cert.argmin_plane.basis, dims)
    assert time.perf_counter() - start < 120


@criterion(5, "torpedo and torpedo cylinder positive; minima scale like 1/delta")
def test_c05_torpedo():
    for n in (2, 3):
        model = build_torpedo(n, 1.0)
        for p in range(0, n):
            assert certify(model, p).verdict == "positive", (n, p)
        cyl = build_torpedo_cylinder(n, 1.0)
        for p in range(0, n - 1):
            assert certify(cyl, p).verdict == "positive", (n, p)
    for family in (lambda d: build_torpedo(2, d), lambda d: build_torpedo_cylinder(3, d)):
        for p in (0, 1):
            big = certify(family(1.0), p).min_value
            small = certify(family(0.5), p).min_value
            assert small >= 2 * big, (p, big, small)


@criterion(6, "toe positive, bend radius found, fifth-term bound attained within 10%")
def test_c06_toe_and_bend():
    for n in (2, 3):
        for p in range(0, n - 1):
            assert certify(build_toe(n, 1.0), p).verdict == "positive", (n, p)
    for n in (2, 3, 4):
        for p in range(0, n - 1):
            lam = search_bend_Lambda(n, 1.0, p)
            assert math.isfinite(lam)
            assert certify(build_bend(n, 1.0, lam), p).verdict == "positive"
    rep = fifth_term_report(2, 1.0, bend_alpha(1.0).max_abs() + 1e-3)
    print(f"  {rep}")
    assert rep.attained <= rep.bound * (1 + 1e-9)
    assert rep.attained >= 0.9 * rep.bound


@criterion(7, "boot interfaces match and every region is positive")
def test_c07_boot():
    start = time.perf_counter()
    for n in (2, 3):
        for p in range(0, n - 1):
            lam = search_bend_Lambda(n, 1.0, p)
            boot = assemble_boot(n, 1.0, lam)
            assert check_region_interfaces(boot).max_mismatch < 1e-9
            certs = certify_regions(boot, p, threads=4)
            assert all(c.verdict == "positive" for c in certs.values()), {k: c.min_value for k, c in certs.items()}
    lam = search_bend_Lambda(2, 1.0, 0)
    certs = certify_regions(boot_cross_sphere(2, 2, 1.0, lam), 0, threads=4)
    assert all(c.verdict == "positive" for c in certs.values())
    assert time.perf_counter() - start < 300


@criterion(8, "concordances over round and product paths")
def test_c08_concordance():
    grid = GridSpec(64, 1)
    sup1 = mu_derivative_sups()[0]
    for path in (round_path(4, 1.0, 2.0), product_path((2, 2), (1.0, 1.0), (2.0, 1.0))):
        C = find_C(path, 1, grid)
        assert 0 < C <= 1
        conc = build_concordance(path, 1, grid=grid, C=C)
        print(f"  {path.label}: C = {C:.6g}, L = {conc.L:g}, min = {conc.certificate.min_value:.6g}")
        assert sup1 / conc.L <= C
        assert conc.certificate.verdict == "positive"
        assert conc.start_residual <= 1e-14 and conc.end_residual <= 1e-14


@criterion(9, "slowly varying cylinders deviate from slices at second order")
def test_c09_expansion():
    for path in (round_path(3, 1.0, 2.0), product_path((2, 2), (1.0, 1.0), (2.0, 1.0))):
        rep = expansion_check(path, (0.1, 0.05, 0.025))
        print(f"  {path.label}: slopes {rep.slope_fiber:.4f} / {rep.slope_mixed:.4f}")
        assert rep.slope_fiber >= 1.8 and rep.slope_mixed >= 1.8


@criterion(10, "algebraic invariants")
def test_c10_invariants():
    rng = np.random.default_rng(2024)
    model = build_bend(3, 1.0)
    K = pair_curvatures(model, np.array(0.8), np.array(0.6))
    d = model.dim
    for p in range(0, d - 1):
        Q, _ = np.linalg.qr(rng.standard_normal((d, d - p)))
        values = []
        for _ in range(100):
            O, _ = np.linalg.qr(rng.standard_normal((d - p, d - p)))
            B = (Q @ O).T
            values.append(
                sum(
                    0.5 * np.sum(K * (np.outer(B[i], B[j]) - np.outer(B[j], B[i])) ** 2)
                    for i in range(d - p)
                    for j in range(d - p)
                    if i != j
                )
            )
        assert max(values) - min(values) < 1e-10
    for p in range(1, d - 1):
        Q, _ = np.linalg.qr(rng.standard_normal((d, d - p + 1)))
        whole = float(s_from_projector(K, Q @ Q.T))
        parts = sum(float(s_from_projector(K, np.delete(Q, k, 1) @ np.delete(Q, k, 1).T)) for k in range(Q.shape[1]))
        assert abs(parts - (d - p - 1) * whole) < 1e-9
    chart = chart_of(build_toe(2, 1.0))
    for _ in range(5):
        x = [rng.uniform(0.2, 1.3), rng.uniform(-1.0, 2.0), rng.uniform(0.5, 2.6), rng.uniform(0, 6)]
        Rl = lowered_riemann(chart, x, 1e-3, richardson=True)
        assert np.max(np.abs(Rl + Rl.transpose(1, 0, 2, 3))) < 1e-8
        assert np.max(np.abs(Rl + Rl.transpose(0, 1, 3, 2))) < 1e-8
        assert np.max(np.abs(Rl - Rl.transpose(2, 3, 0, 1))) < 1e-8
        assert np.max(np.abs(Rl + Rl.transpose(1, 2, 0, 3) + Rl.transpose(2, 0, 1, 3))) < 1e-8
    grid = GridSpec(16, 8)
    a = certify(build_toe(3, 1.0), 1, grid=grid, seed=11)
    b = certify(build_toe(3, 1.0), 1, grid=grid, seed=11, threads=4)
    assert a.min_value == b.min_value and np.array_equal(a.point_frames, b.point_frames)
