"""Closed-form curvature of the warped families.

Every model handled here has a curvature operator that is diagonal on the
coordinate bivectors of its orthonormal frame, so its curvature at a point
is captured by a symmetric matrix ``K[a, b]`` of coordinate-pair sectional
curvatures (zero diagonal).  With ``Pi`` the orthogonal projector onto the
complement of a p-plane,

    s = sum_{a != b} K[a, b] * (Pi[a, a] Pi[b, b] - Pi[a, b]**2),

which is the ordered-pair sum over any orthonormal basis of the complement
(Cauchy-Binet).  The finite-difference oracle checks the diagonal structure
independently.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    AxisSingularity,
    CaseMismatch,
    DimensionMismatch,
    NotClosed,
    UnsupportedModel,
)
from .geometry import (
    ModelPoint,
    MultiplyWarpedLine,
    PlaneComplement,
    ProductOfSpheres,
    SphereProduct,
    TangentVector,
    TwoDWarp,
    WarpedLine,
)

__all__ = [
    "SectionalTable",
    "CurvatureReport",
    "MultiplyWarpedTable",
    "pair_curvatures",
    "base_sectionals",
    "riemann_quadform",
    "pair_quadform",
    "s_from_projector",
    "s_pn",
    "s_pn_case",
    "case_formula",
    "multiply_warped_sectionals",
    "limit_at_axis",
    "sectional_rows",
]

AXIS_FRACTION = 1e-3


@dataclass(frozen=True)
class SectionalTable:
    K_rt: float
    K_ri: float
    K_ti: float
    K_ij: float

    def as_tuple(self):
        return (self.K_rt, self.K_ri, self.K_ti, self.K_ij)


@dataclass(frozen=True)
class CurvatureReport:
    point: ModelPoint
    p: int
    s_value: float
    plane: PlaneComplement
    oracle_residual: float | None = None
    tolerance: float = 1e-5

    @property
    def verified(self):
        return self.oracle_residual is not None and self.oracle_residual < self.tolerance


@dataclass(frozen=True)
class MultiplyWarpedTable:
    line_fiber: tuple  # K(line, fiber i)
    intra: tuple  # K within fiber i (nan for circles)
    cross: np.ndarray  # K between fibers i != j


# --- axis handling -----------------------------------------------------------


def _richardson_third(beta, end):
    """beta'''(end) from beta''(end +- h)/(+-h), Richardson-extrapolated."""
    inward = 1.0 if end == beta.domain[0] else -1.0
    h = 1e-2 * beta.length_scale

    def quotient(step):
        return float(beta.evaluate(np.array(end + inward * step))[2]) / (inward * step)

    return (4.0 * quotient(h / 2) - quotient(h)) / 3.0


@functools.lru_cache(maxsize=256)
def _axis_table(beta):
    """((end, kappa), ...) for each end where beta closes up smoothly."""
    out = []
    for end in beta.axis_ends():
        d1 = float(beta.evaluate(np.array(end))[1])
        out.append((end, -_richardson_third(beta, end) / d1))
    return tuple(out)


def _eps_axis(beta, eps_axis):
    return AXIS_FRACTION * beta.length_scale if eps_axis is None else eps_axis


def _axis_mask(beta, r, eps_axis):
    mask = np.zeros(np.shape(r), dtype=bool)
    kappa = np.zeros(np.shape(r))
    for end, k in _axis_table(beta):
        near = np.abs(np.asarray(r) - end) < eps_axis
        mask |= near
        kappa = np.where(near, k, kappa)
    return mask, kappa


def limit_at_axis(model, p=None, end=None):
    """Common limit -beta'''/beta' of the sectional curvatures at the axis.

    With ``p`` given (warped lines only) returns the p-curvature there,
    which is the pair count times that limit.
    """
    beta = model.beta
    end = beta.domain[0] if end is None else end
    v, d1, _ = (float(x) for x in beta.evaluate(np.array(end)))
    sign = 1.0 if end == beta.domain[0] else -1.0
    if abs(v) > 1e-9 * beta.length_scale or abs(sign * d1 - 1.0) > 1e-9:
        raise NotClosed(f"profile does not close at r={end}: value {v}, slope {d1}")
    kappa = -_richardson_third(beta, end) / d1
    if p is None:
        return kappa
    if not isinstance(model, WarpedLine):
        raise UnsupportedModel("the p-curvature limit is defined for warped lines only")
    k = model.dim - p
    return k * (k - 1) * kappa


# --- pair-curvature matrices --------------------------------------------------


def _two_d_tables(model, r, t, eps_axis=None, strict=False):
    r, t = np.broadcast_arrays(np.asarray(r, float), np.asarray(t, float))
    beta, beta_r, beta_rr = model.beta.evaluate(r)
    s, _ = model.beta.slope_complement(r)
    omega, omega_r, _, omega_rr = model.omega.evaluate(r, t)
    mask, kappa = _axis_mask(model.beta, r, _eps_axis(model.beta, eps_axis))
    if strict and np.any(mask):
        raise AxisSingularity("point within eps_axis of the axis; use limit_at_axis")
    safe = np.where(mask, 1.0, beta)
    K_rt = -omega_rr / omega
    K_ri = np.where(mask, kappa, -beta_rr / safe)
    K_ti = np.where(mask, -omega_rr / omega, -omega_r * beta_r / (omega * safe))
    K_ij = np.where(mask, kappa, s * s / safe**2)
    return K_rt, K_ri, K_ti, K_ij


def _assemble_two_d(model, tables):
    K_rt, K_ri, K_ti, K_ij = tables
    d = model.dim
    K = np.empty(np.shape(K_rt) + (d, d))
    K[...] = K_ij[..., None, None]
    K[..., 0, :] = K_ri[..., None]
    K[..., :, 0] = K_ri[..., None]
    K[..., 1, :] = K_ti[..., None]
    K[..., :, 1] = K_ti[..., None]
    K[..., 0, 1] = K[..., 1, 0] = K_rt
    idx = np.arange(d)
    K[..., idx, idx] = 0.0
    return K


@functools.singledispatch
def pair_curvatures(model, r, t=None, eps_axis=None):
    """Coordinate-pair sectional curvatures, shape ``r.shape + (dim, dim)``."""
    raise UnsupportedModel(f"no closed form for {type(model).__name__}")


@pair_curvatures.register
def _(model: TwoDWarp, r, t=None, eps_axis=None):
    return _assemble_two_d(model, _two_d_tables(model, r, t, eps_axis))


@pair_curvatures.register
def _(model: WarpedLine, r, t=None, eps_axis=None):
    r = np.asarray(r, float)
    beta, _, beta_rr = model.beta.evaluate(r)
    s, _ = model.beta.slope_complement(r)
    mask, kappa = _axis_mask(model.beta, r, _eps_axis(model.beta, eps_axis))
    safe = np.where(mask, 1.0, beta)
    radial = np.where(mask, kappa, -beta_rr / safe)
    fiber = np.where(mask, kappa, s * s / safe**2)
    d = model.dim
    K = np.empty(r.shape + (d, d))
    K[...] = fiber[..., None, None]
    K[..., 0, :] = radial[..., None]
    K[..., :, 0] = radial[..., None]
    idx = np.arange(d)
    K[..., idx, idx] = 0.0
    return K


@pair_curvatures.register
def _(model: ProductOfSpheres, r, t=None, eps_axis=None):
    d = model.dim
    block = np.zeros((d, d))
    start = 0
    for n, rad in zip(model.dims, model.radii):
        block[start : start + n, start : start + n] = 1.0 / rad**2
        start += n
    np.fill_diagonal(block, 0.0)
    return np.broadcast_to(block, np.shape(r) + (d, d)).copy()


@pair_curvatures.register
def _(model: MultiplyWarpedLine, r, t=None, eps_axis=None):
    r = np.asarray(r, float)
    d = model.dim
    K = np.zeros(r.shape + (d, d))
    vals = [prof.evaluate(r) for _, prof in model.fibers]
    starts = np.cumsum([1] + [n for n, _ in model.fibers])
    for i, ((n, _), (rho, rho1, rho2)) in enumerate(zip(model.fibers, vals)):
        a = slice(starts[i], starts[i] + n)
        K[..., 0, a] = (-rho2 / rho)[..., None]
        K[..., a, 0] = (-rho2 / rho)[..., None]
        K[..., a, a] = ((1.0 - rho1 * rho1) / rho**2)[..., None, None]
        for j in range(i + 1, len(vals)):
            b = slice(starts[j], starts[j] + model.fibers[j][0])
            cross = -rho1 * vals[j][1] / (rho * vals[j][0])
            K[..., a, b] = cross[..., None, None]
            K[..., b, a] = cross[..., None, None]
    idx = np.arange(d)
    K[..., idx, idx] = 0.0
    return K


@pair_curvatures.register
def _(model: SphereProduct, r, t=None, eps_axis=None):
    base = pair_curvatures(model.base, r, t, eps_axis)
    d0, m = model.base.dim, model.m
    K = np.zeros(base.shape[:-2] + (d0 + m, d0 + m))
    K[..., :d0, :d0] = base
    K[..., d0:, d0:] = 1.0
    idx = np.arange(d0, d0 + m)
    K[..., idx, idx] = 0.0
    return K


# --- evaluators -----------------------------------------------------------------


def s_from_projector(K, Pi):
    """Vectorised p-curvature from pair matrices and complement projectors."""
    diag = np.diagonal(Pi, axis1=-2, axis2=-1)
    return np.einsum("...ab,...a,...b->...", K, diag, diag) - np.einsum("...ab,...ab->...", K, Pi * Pi)


def _point_matrix(model, x):
    return pair_curvatures(model, np.array(x.r), None if x.t is None else np.array(x.t))


def s_pn(model, x, complement):
    """Ordered-pair sum of sectional curvatures over the complement basis."""
    if complement.dim_ambient != model.dim:
        raise DimensionMismatch(f"complement lives in R^{complement.dim_ambient}, model has dim {model.dim}")
    return float(s_from_projector(_point_matrix(model, x), complement.projector))


def _vec(v):
    return v.as_array() if isinstance(v, TangentVector) else np.asarray(v, dtype=float)


def pair_quadform(model, x, v, w):
    """R(v, w, w, v) assembled from the pair matrix."""
    K = _point_matrix(model, x)
    v, w = _vec(v), _vec(w)
    wedge = np.outer(v, w) - np.outer(w, v)
    return float(0.5 * np.sum(K * wedge * wedge))


def riemann_quadform(model, x, v, w, eps_axis=None):
    """R(v, w, w, v) for the doubly warped metric, from its four-term formula.

    ``v`` and ``w`` carry orthonormal-frame components; they are converted to
    coordinate components before the formula is applied.
    """
    if not isinstance(model, TwoDWarp):
        return pair_quadform(model, x, v, w)
    v, w = _vec(v), _vec(w)
    if v.shape != (model.dim,) or w.shape != (model.dim,):
        raise DimensionMismatch("vectors do not match the model dimension")
    r, t = np.array(x.r), np.array(x.t)
    mask, _ = _axis_mask(model.beta, r, _eps_axis(model.beta, eps_axis))
    if mask:
        raise AxisSingularity("point within eps_axis of the axis; use limit_at_axis")
    beta, beta_r, beta_rr = (float(a) for a in model.beta.evaluate(r))
    s = float(model.beta.slope_complement(r)[0])
    omega, omega_r, _, omega_rr = (float(a) for a in model.omega.evaluate(r, t))
    vr, vt, vf = v[0], v[1] / omega, v[2:] / beta
    wr, wt, wf = w[0], w[1] / omega, w[2:] / beta
    fiber_wedge = (vf @ vf) * (wf @ wf) - (vf @ wf) ** 2
    return float(
        -omega * omega_rr * (vt * wr - vr * wt) ** 2
        + beta**2 * s * s * fiber_wedge
        - beta * beta_rr * np.sum((vf * wr - wf * vr) ** 2)
        - beta * beta_r * omega * omega_r * np.sum((vf * wt - wf * vt) ** 2)
    )


def base_sectionals(model, x, eps_axis=None):
    tables = _two_d_tables(model, np.array(x.r), np.array(x.t), eps_axis, strict=True)
    return SectionalTable(*(float(a) for a in tables))


# --- the three-case analysis ------------------------------------------------------


def _profile_values(model, r, t):
    beta, beta_r, beta_rr = model.beta.evaluate(r)
    s, _ = model.beta.slope_complement(r)
    omega, omega_r, _, omega_rr = model.omega.evaluate(r, t)
    return dict(beta=beta, beta_r=beta_r, beta_rr=beta_rr, s2=s * s, omega=omega, omega_r=omega_r, omega_rr=omega_rr)


def _case_one(n, p, c):
    b, br, brr, s2, om, omr, omrr = (c[k] for k in ("beta", "beta_r", "beta_rr", "s2", "omega", "omega_r", "omega_rr"))
    return (
        (n - p) * (n - p - 1) * s2 / b**2
        - 2 * (n - p) * brr / b
        - 2 * (n - p) * omr * br / (om * b)
        - 2 * omrr / om
    )


def _coordinate(c, v):
    """Orthonormal components (r, t, k, k+1) to coordinate components and g-norm."""
    vc = np.stack([v[..., 0], v[..., 1] / c["omega"], v[..., 2] / c["beta"], v[..., 3] / c["beta"]], axis=-1)
    norm2 = vc[..., 0] ** 2 + (c["omega"] * vc[..., 1]) ** 2 + c["beta"] ** 2 * (vc[..., 2] ** 2 + vc[..., 3] ** 2)
    return vc, norm2


def _case_two(n, p, c, v, w):
    b, br, brr, s2, om, omr, omrr = (c[k] for k in ("beta", "beta_r", "beta_rr", "s2", "omega", "omega_r", "omega_rr"))
    vc, nv = _coordinate(c, v)
    wc, nw = _coordinate(c, w)
    vr, vt, vk, _ = np.moveaxis(vc, -1, 0)
    wr, wt, wk, _ = np.moveaxis(wc, -1, 0)
    return (
        (n - p) * (n - p - 1) * s2 / b**2
        + 2 * (n - p) / nv * (vk**2 * s2 - vr**2 * brr / b - vt**2 * br / b * om * omr)
        + 2 * (n - p) / nw * (wk**2 * s2 - wr**2 * brr / b - wt**2 * br / b * om * omr)
        - 2
        / (nv * nw)
        * (om * omrr * (vt * wr - vr * wt) ** 2 + (vk * wr - wk * vr) ** 2 * b * brr + (vk * wt - wk * vt) ** 2 * b * br * om * omr)
    )


def _case_three(n, p, c, v, w):
    b, br, brr, s2, om, omr, omrr = (c[k] for k in ("beta", "beta_r", "beta_rr", "s2", "omega", "omega_r", "omega_rr"))
    vc, nv = _coordinate(c, v)
    wc, nw = _coordinate(c, w)
    vr, vt, vk, vl = np.moveaxis(vc, -1, 0)
    wr, wt, wk, wl = np.moveaxis(wc, -1, 0)
    return (
        (n - p) * (n - p - 1) * s2 / b**2
        + 2 * (n - p) / nv * ((vk**2 + vl**2) * s2 - vr**2 * brr / b - vt**2 * br / b * om * omr)
        + 2 * (n - p) / nw * ((wk**2 + wl**2) * s2 - wr**2 * brr / b - wt**2 * br / b * om * omr)
        + 2
        / (nv * nw)
        * (
            -om * omrr * (vt * wr - vr * wt) ** 2
            + (vk * wl - vl * wk) ** 2 * b**2 * s2
            - ((vk * wr - wk * vr) ** 2 + (vl * wr - wl * vr) ** 2) * b * brr
            - ((vk * wt - wk * vt) ** 2 + (vl * wt - wl * vt) ** 2) * b * br * om * omr
        )
    )


def case_formula(case_id, n, p, values, v=None, w=None):
    """Vectorised case formulas; ``values`` as returned for a batch of points."""
    if case_id == 1:
        return _case_one(n, p, values)
    if case_id == 2:
        return _case_two(n, p, values, v, w)
    if case_id == 3:
        return _case_three(n, p, values, v, w)
    raise CaseMismatch(f"unknown case {case_id}")


def _validate_case(case_id, n, p, v, w):
    if not 0 <= p <= n:
        raise CaseMismatch(f"p={p} outside [0, {n}]")
    gram = np.array([[v @ v, v @ w], [w @ v, w @ w]])
    if np.max(np.abs(gram - np.eye(2))) > 1e-10:
        raise CaseMismatch("v, w must be orthonormal")
    fiber = np.array([[v[2], v[3]], [w[2], w[3]]])
    rank = np.linalg.matrix_rank(fiber, tol=1e-12)
    if case_id == 1 and rank != 0:
        raise CaseMismatch("case 1 has no fiber components")
    if case_id == 2 and (rank != 1 or abs(v[3]) + abs(w[3]) > 0):
        raise CaseMismatch("case 2 needs a one-dimensional fiber projection along the k-th direction")
    if case_id == 3 and rank != 2:
        raise CaseMismatch("case 3 needs a two-dimensional fiber projection")
    if case_id >= 2 and n - p + case_id - 1 > n:
        raise CaseMismatch(f"not enough fiber directions for case {case_id} at p={p}")


def s_pn_case(model, x, case_id, params):
    """p-curvature from the case analysis.

    ``params`` holds ``p`` and, for cases 2 and 3, the vectors ``v`` and ``w``
    as orthonormal components ``(v_r, v_t, v_k, v_{k+1})``.
    """
    if not isinstance(model, TwoDWarp):
        raise UnsupportedModel("the case analysis applies to the doubly warped family")
    p = int(params["p"])
    n = model.fiber_dim
    v = np.asarray(params.get("v", (1.0, 0.0, 0.0, 0.0)), float)
    w = np.asarray(params.get("w", (0.0, 1.0, 0.0, 0.0)), float)
    if v.shape != (4,) or w.shape != (4,):
        raise CaseMismatch("v and w need four components (r, t, k, k+1)")
    _validate_case(case_id, n, p, v, w)
    r, t = np.array(x.r), np.array(x.t)
    mask, _ = _axis_mask(model.beta, r, _eps_axis(model.beta, None))
    if mask:
        raise AxisSingularity("point within eps_axis of the axis; use limit_at_axis")
    return float(case_formula(case_id, n, p, _profile_values(model, r, t), v, w))


def multiply_warped_sectionals(model, x):
    K = pair_curvatures(model, np.array(x.r))
    starts = np.cumsum([1] + [n for n, _ in model.fibers])
    line, intra = [], []
    for i, (n, _) in enumerate(model.fibers):
        line.append(float(K[0, starts[i]]))
        intra.append(float(K[starts[i], starts[i] + 1]) if n > 1 else math.nan)
    m = len(model.fibers)
    cross = np.zeros((m, m))
    for i in range(m):
        for j in range(m):
            if i != j:
                cross[i, j] = K[starts[i], starts[j]]
    return MultiplyWarpedTable(tuple(line), tuple(intra), cross)


def sectional_rows(model, rs, t):
    """Rows (r, K_rt, K_ri, K_ti, K_ij) along r at fixed t, axis limits included."""
    rs = np.asarray(rs, float)
    tables = _two_d_tables(model, rs, np.full_like(rs, t))
    return np.column_stack([rs, *tables])
