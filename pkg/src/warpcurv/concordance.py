"""Cylinders over paths of metrics: expansion orders, the constant C, concordances.

A path r -> g_r of round metrics (or products of round metrics) is stretched
over a cylinder as g_{f(t)} + dt^2.  For these families the cylinder is a
multiply warped line, so its curvature is known exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .curvature import pair_curvatures
from .errors import InvalidParams, SearchExhausted
from .geometry import GridSpec, MultiplyWarpedLine, ProductOfSpheres
from .positivity import certify
from .profiles import (
    BumpPlateauBump,
    BumpRamp,
    ComposedProfile,
    PolynomialProfile,
    mu_derivative_sups,
)

__all__ = [
    "MetricPath",
    "round_path",
    "product_path",
    "cylinder",
    "ExpansionReport",
    "expansion_check",
    "find_C",
    "validation_family",
    "Concordance",
    "build_concordance",
    "min_s_profile",
]

C_FLOOR = 1e-6
BISECTIONS = 8


@dataclass(frozen=True)
class MetricPath:
    """Radii of a product of round spheres as functions of r in [0, 1]."""

    dims: tuple
    radii: tuple  # one profile per factor, each on [0, 1]
    label: str = ""

    def __post_init__(self):
        if len(self.dims) != len(self.radii) or not self.dims:
            raise InvalidParams("need one radius profile per sphere factor")
        if min(self.dims) < 1:
            raise InvalidParams("sphere dimensions must be >= 1")

    @property
    def kind(self):
        return "round" if len(self.dims) == 1 else "product"

    def slice(self, r):
        radii = tuple(float(prof.value(np.array(r))) for prof in self.radii)
        return ProductOfSpheres(self.dims, radii)


def _linear(a, b):
    return PolynomialProfile([float(a), float(b) - float(a)], (0.0, 1.0))


def round_path(n, start=1.0, end=2.0):
    """rho(r) S^n with rho linear from ``start`` to ``end``."""
    if not (start > 0 and end > 0):
        raise InvalidParams("radii must be positive")
    return MetricPath((int(n),), (_linear(start, end),), label=f"round S^{n}: {start:g} -> {end:g}")


def product_path(dims, start, end):
    dims = tuple(int(x) for x in dims)
    if len(start) != len(dims) or len(end) != len(dims) or min(start) <= 0 or min(end) <= 0:
        raise InvalidParams("need positive start and end radii for every factor")
    radii = tuple(_linear(a, b) for a, b in zip(start, end))
    name = "x".join(f"S^{n}" for n in dims)
    return MetricPath(dims, radii, label=f"{name}: {tuple(start)} -> {tuple(end)}")


def cylinder(path, f):
    """g_{f(t)} + dt^2 as a multiply warped line over f's domain."""
    fibers = tuple((n, ComposedProfile(prof, f)) for n, prof in zip(path.dims, path.radii))
    return MultiplyWarpedLine(fibers, label=f"cylinder over {path.label}")


# --- expansion orders -------------------------------------------------------------------


@dataclass
class ExpansionReport:
    amplitudes: list
    fiber_errors: list  # max |K_bar_ij - K_ij| per amplitude
    mixed_errors: list  # max |K_bar_it| per amplitude
    slope_fiber: float
    slope_mixed: float
    threshold: float = 1.8

    @property
    def passed(self):
        return all(_order_ok(e, s, self.threshold) for e, s in (
            (self.fiber_errors, self.slope_fiber),
            (self.mixed_errors, self.slope_mixed),
        ))

    def table(self):
        lines = ["epsilon fiber_error mixed_error"]
        lines += [f"{e:.6g} {a:.6e} {b:.6e}" for e, a, b in zip(self.amplitudes, self.fiber_errors, self.mixed_errors)]
        lines.append(f"slopes: fiber {self.slope_fiber:.4f}, mixed {self.slope_mixed:.4f}")
        return "\n".join(lines)


def _order_ok(errors, slope, threshold):
    # a path with no t-dependence leaves nothing to fit
    return max(errors) < 1e-15 or slope >= threshold


def _slope(eps, errors):
    errors = np.asarray(errors)
    if np.any(errors <= 0):
        return math.nan
    return float(np.polyfit(np.log(eps), np.log(errors), 1)[0])


def expansion_check(path, amplitudes=(0.1, 0.05, 0.025), samples=2001):
    """Deviation of cylinder curvatures from slice curvatures along slow ramps.

    With f(t) = mu(eps t), |f'| ~ eps and |f''| ~ eps^2, so both deviations
    should fall off like eps^2.
    """
    eps = np.asarray([float(a) for a in amplitudes])
    if np.any(eps <= 0) or np.any(np.diff(eps) >= 0):
        raise InvalidParams("amplitudes must be positive and decreasing")
    fiber_err, mixed_err = [], []
    starts = np.cumsum([1] + list(path.dims))
    for e in eps:
        f = BumpRamp(e, 0.0, (0.0, 1.0 / e))
        model = cylinder(path, f)
        t = np.linspace(0.0, 1.0 / e, samples)
        K = pair_curvatures(model, t)
        rho = [prof.value(np.asarray(f.value(t))) for prof in path.radii]
        worst_fiber = 0.0
        worst_mixed = 0.0
        for i, (n, s) in enumerate(zip(path.dims, starts)):
            worst_mixed = max(worst_mixed, float(np.max(np.abs(K[:, 0, s]))))
            if n > 1:
                worst_fiber = max(worst_fiber, float(np.max(np.abs(K[:, s, s + 1] - 1.0 / rho[i] ** 2))))
            for j, s2 in enumerate(starts[:-1]):
                if j != i:
                    worst_fiber = max(worst_fiber, float(np.max(np.abs(K[:, s, s2]))))
        fiber_err.append(worst_fiber)
        mixed_err.append(worst_mixed)
    return ExpansionReport(list(eps), fiber_err, mixed_err, _slope(eps, fiber_err), _slope(eps, mixed_err))


# --- the constant C ---------------------------------------------------------------------


def _length_for(C):
    sup1, sup2 = mu_derivative_sups()
    return max(sup1 / C, math.sqrt(sup2 / C))


def validation_family(C):
    """Test functions f with |f'|, |f''| <= C: ramps up, down, shifted, and a bump."""
    L = _length_for(C)
    ramp = BumpRamp.mu_L(L)
    down = BumpRamp(1.0 / L, 1.0, ramp.domain, descending=True)
    shifted = ComposedProfile(PolynomialProfile([0.25, 0.5], (0.0, 1.0)), ramp)
    return {"ramp": ramp, "descending": down, "shifted": shifted, "bump-plateau-bump": BumpPlateauBump(L)}


def _slices_positive(path, p, grid, seed):
    for r in np.linspace(0.0, 1.0, 5):
        if certify(path.slice(r), p, grid=grid, seed=seed).verdict != "positive":
            raise InvalidParams(f"slice at r={r:g} is not certified positive at p={p}")


def _valid(path, p, C, grid, seed):
    for f in validation_family(C).values():
        if certify(cylinder(path, f), p, grid=grid, seed=seed).verdict != "positive":
            return False
    return True


def find_C(path, p, grid=None, seed=0):
    """Largest C found by halving then bisection such that every tested f is positive."""
    grid = grid or GridSpec()
    _slices_positive(path, p, grid, seed)
    C = 1.0
    if _valid(path, p, C, grid, seed):
        return C
    while True:
        bad, C = C, C / 2.0
        if C < C_FLOOR:
            raise SearchExhausted(f"no admissible C above {C_FLOOR:g}")
        if _valid(path, p, C, grid, seed):
            break
    good = C
    for _ in range(BISECTIONS):
        mid = 0.5 * (good + bad)
        if _valid(path, p, mid, grid, seed):
            good = mid
        else:
            bad = mid
    return good


# --- the concordance --------------------------------------------------------------------


@dataclass
class Concordance:
    L: float
    C: float
    cylinder: MultiplyWarpedLine
    certificate: object
    start_residual: float
    end_residual: float
    tested_family: tuple = ()
    flags: dict = field(default_factory=dict)

    def summary(self):
        return "\n".join(
            [
                f"C = {self.C:.10g}",
                f"L = {self.L:.10g}",
                f"certified min = {self.certificate.min_value:.10g} ({self.certificate.verdict})",
                f"boundary residuals: start {self.start_residual:.3e}, end {self.end_residual:.3e}",
                f"tested family: {', '.join(self.tested_family)}",
            ]
        )


def _boundary_residual(model, path, t, r):
    scales = model.frame_scales(t)
    target = path.slice(r).frame_scales(np.zeros_like(t))
    return float(np.max(np.abs(scales[:, 1:] - target)))


def build_concordance(path, p, seed=0, grid=None, C=None):
    """Cylinder with f = mu_L for the first L in 1, 2, 4, ... meeting the C bounds."""
    grid = grid or GridSpec()
    if C is None:
        C = find_C(path, p, grid, seed)
    sup1, sup2 = mu_derivative_sups()
    L = 1.0
    while sup1 / L > C or sup2 / L**2 > C:
        L *= 2.0
    model = cylinder(path, BumpRamp.mu_L(L))
    cert = certify(model, p, grid=grid, seed=seed, model_id=model.label)
    start = _boundary_residual(model, path, np.linspace(0.0, 1.0, 10_001), 0.0)
    end = _boundary_residual(model, path, np.linspace(L + 1.0, L + 2.0, 10_001), 1.0)
    t = np.linspace(0.0, L + 2.0, 10_001)
    _, f1, f2 = BumpRamp.mu_L(L).evaluate(t)
    flags = {
        "start_product": start <= 1e-14,
        "end_product": end <= 1e-14,
        "derivative_bounds": bool(np.max(np.abs(f1)) <= C and np.max(np.abs(f2)) <= C),
        "positive": cert.verdict == "positive",
    }
    return Concordance(L, C, model, cert, start, end, tuple(validation_family(C)), flags)


def min_s_profile(conc):
    """Rows (t, min p-curvature) along the cylinder."""
    r, _ = conc.certificate.points
    return np.column_stack([r, conc.certificate.point_minima])
