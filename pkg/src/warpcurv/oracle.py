"""Finite-difference curvature oracle.

The oracle never touches the closed-form curvature code or any analytic
derivative of a profile.  It builds the metric tensor in an explicit chart
(nested spherical coordinates on every sphere factor), differences it to get
Christoffel symbols, differences those to get the Riemann tensor, and reads
off sectional and intermediate curvatures.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .curvature import pair_curvatures, s_from_projector
from .errors import DegeneratePair, StencilOutOfDomain, UnsupportedModel
from .geometry import (
    MultiplyWarpedLine,
    ProductOfSpheres,
    RegionAssembly,
    SphereProduct,
    TwoDWarp,
    WarpedLine,
)

__all__ = [
    "ChartMetric",
    "CrosscheckReport",
    "chart_of",
    "fd_christoffel",
    "fd_riemann",
    "lowered_riemann",
    "frame_riemann",
    "fd_sectional",
    "crosscheck",
    "EPS_CHART",
    "MAX_ORACLE_DIM",
]

EPS_CHART = 1e-2
# random samples stay this far from the poles; the finite-difference error
# grows like 1/sin^4 of the polar angle
SAMPLE_POLAR_MARGIN = 0.3
MAX_ORACLE_DIM = 7


def sphere_factors(angles):
    """Squared coordinate lengths of nested spherical coordinates, batched.

    ``angles`` has shape (..., m); factor i is the product of sin^2 of the
    first i angles.
    """
    s2 = np.sin(angles[..., :-1]) ** 2
    ones = np.ones(angles.shape[:-1] + (1,))
    return np.concatenate([ones, np.cumprod(s2, axis=-1)], axis=-1)


def _sphere_box(m):
    # polar angles in (0, pi); the last angle is periodic
    return [(0.0, math.pi)] * (m - 1) + [(-math.inf, math.inf)]


@dataclass(frozen=True)
class ChartMetric:
    """Metric components of a diagonal chart, evaluated in batches."""

    dim: int
    diagonal: object  # (N, dim) coords -> (N, dim) diagonal entries
    valid_box: tuple
    polar: tuple = ()  # indices of polar sphere angles

    def components(self, x):
        x = np.atleast_2d(np.asarray(x, float))
        diag = self.diagonal(x)
        out = np.zeros(diag.shape + (self.dim,))
        idx = np.arange(self.dim)
        out[..., idx, idx] = diag
        return out[0] if out.shape[0] == 1 else out

    def check_ball(self, x, radius):
        for xi, (lo, hi) in zip(np.asarray(x, float), self.valid_box):
            if xi - radius < lo or xi + radius > hi:
                raise StencilOutOfDomain(f"coordinate {xi} within {radius} of the box edge [{lo}, {hi}]")


def _sphere_block(coords, radius2, m):
    return radius2[..., None] * sphere_factors(coords[..., :m])


def chart_of(model):
    """Explicit chart of a model; fiber angles follow the base coordinates."""
    if isinstance(model, RegionAssembly):
        raise UnsupportedModel("run the oracle per region")
    if model.dim > MAX_ORACLE_DIM:
        raise UnsupportedModel(f"oracle capped at dimension {MAX_ORACLE_DIM}")

    if isinstance(model, WarpedLine):
        n = model.fiber_dim

        def diag(x):
            beta = model.beta.value(x[:, 0])
            return np.concatenate([np.ones((len(x), 1)), _sphere_block(x[:, 1:], beta**2, n)], axis=1)

        box = [model.domain] + _sphere_box(n)
        return ChartMetric(model.dim, diag, tuple(box), tuple(range(1, n)))

    if isinstance(model, TwoDWarp):
        n = model.fiber_dim

        def diag(x):
            beta = model.beta.value(x[:, 0])
            omega = model.omega.value(x[:, 0], x[:, 1])
            head = np.stack([np.ones(len(x)), omega**2], axis=1)
            return np.concatenate([head, _sphere_block(x[:, 2:], beta**2, n)], axis=1)

        box = [model.r_domain, model.t_domain] + _sphere_box(n)
        return ChartMetric(model.dim, diag, tuple(box), tuple(range(2, n + 1)))

    if isinstance(model, MultiplyWarpedLine):
        starts = np.cumsum([1] + [n for n, _ in model.fibers])

        def diag(x):
            cols = [np.ones((len(x), 1))]
            for (n, prof), s in zip(model.fibers, starts):
                cols.append(_sphere_block(x[:, s : s + n], prof.value(x[:, 0]) ** 2, n))
            return np.concatenate(cols, axis=1)

        box = [model.domain]
        polar = []
        for (n, _), s in zip(model.fibers, starts):
            box += _sphere_box(n)
            polar += list(range(s, s + n - 1))
        return ChartMetric(model.dim, diag, tuple(box), tuple(polar))

    if isinstance(model, ProductOfSpheres):
        starts = np.cumsum([0] + list(model.dims))

        def diag(x):
            cols = []
            for n, rad, s in zip(model.dims, model.radii, starts):
                cols.append(_sphere_block(x[:, s : s + n], np.full(len(x), rad**2), n))
            return np.concatenate(cols, axis=1)

        box, polar = [], []
        for n, s in zip(model.dims, starts):
            box += _sphere_box(n)
            polar += list(range(s, s + n - 1))
        return ChartMetric(model.dim, diag, tuple(box), tuple(polar))

    if isinstance(model, SphereProduct):
        base = chart_of(model.base)
        d0, m = model.base.dim, model.m

        def diag(x):
            return np.concatenate([base.diagonal(x[:, :d0]), sphere_factors(x[:, d0:])], axis=1)

        box = list(base.valid_box) + _sphere_box(m)
        polar = list(base.polar) + list(range(d0, d0 + m - 1))
        return ChartMetric(model.dim, diag, tuple(box), tuple(polar))

    raise UnsupportedModel(f"no chart for {type(model).__name__}")


def _christoffel_at(chart, centers, h):
    """Gamma[n, l, i, j] at each center by central differences of the metric."""
    d = chart.dim
    steps = np.concatenate([np.zeros((1, d)), np.repeat(np.eye(d), 2, axis=0) * np.tile([[h], [-h]], (d, 1))])
    pts = centers[:, None, :] + steps[None, :, :]
    diag = chart.diagonal(pts.reshape(-1, d)).reshape(len(centers), len(steps), d)
    g = diag[:, 0]
    # dg[n, k, a] = d_k g_aa
    dg = (diag[:, 1::2] - diag[:, 2::2]) / (2 * h)
    full = np.zeros((len(centers), d, d, d))  # full[n, k, a, b] = d_k g_ab
    idx = np.arange(d)
    full[:, :, idx, idx] = dg
    # Gamma^l_ij = 1/2 g^{ll} (d_i g_jl + d_j g_il - d_l g_ij)   (diagonal g)
    lower = 0.5 * (
        np.einsum("nijl->nlij", full) + np.einsum("njil->nlij", full) - full
    )
    return lower / g[:, :, None, None]


def fd_christoffel(chart, x, h=1e-4):
    x = np.asarray(x, float)
    chart.check_ball(x, h)
    return _christoffel_at(chart, x[None, :], h)[0]


def _riemann(chart, x, h):
    d = chart.dim
    steps = np.concatenate([np.zeros((1, d)), np.repeat(np.eye(d), 2, axis=0) * np.tile([[h], [-h]], (d, 1))])
    gam = _christoffel_at(chart, x[None, :] + steps, h)
    G = gam[0]
    # dG[i, l, j, k] = d_i Gamma^l_jk
    dG = (gam[1::2] - gam[2::2]) / (2 * h)
    # R[l, i, j, k] = R^l_{ijk}
    R = (
        np.einsum("iljk->lijk", dG)
        - np.einsum("jlik->lijk", dG)
        + np.einsum("lim,mjk->lijk", G, G)
        - np.einsum("ljm,mik->lijk", G, G)
    )
    return R


def fd_riemann(chart, x, h=1e-4, richardson=False):
    """R^l_{ijk} as array ``R[l, i, j, k]`` with R(d_i, d_j) d_k = R^l_{ijk} d_l."""
    x = np.asarray(x, float)
    chart.check_ball(x, 2 * h)
    if richardson:
        return (4.0 * _riemann(chart, x, h / 2) - _riemann(chart, x, h)) / 3.0
    return _riemann(chart, x, h)


def lowered_riemann(chart, x, h=1e-4, richardson=False):
    """R_{ijkm} = g(R(d_i, d_j) d_k, d_m)."""
    R = fd_riemann(chart, x, h, richardson)
    g = chart.components(x)
    return np.einsum("lijk,lm->ijkm", R, g)


def frame_riemann(chart, x, h=1e-4, richardson=False):
    """Lowered Riemann tensor in the orthonormal frame of the diagonal chart."""
    Rl = lowered_riemann(chart, x, h, richardson)
    s = np.sqrt(chart.diagonal(np.atleast_2d(x))[0])
    return Rl / np.einsum("i,j,k,m->ijkm", s, s, s, s)


def fd_sectional(chart, x, v, w, h=1e-4, richardson=False):
    """K(v, w) for coordinate vectors v, w."""
    v, w = np.asarray(v, float), np.asarray(w, float)
    g = chart.components(x)
    area = (v @ g @ v) * (w @ g @ w) - (v @ g @ w) ** 2
    if area <= 1e-14 * max(1.0, (v @ g @ v) * (w @ g @ w)):
        raise DegeneratePair("v and w are (nearly) parallel")
    Rl = lowered_riemann(chart, x, h, richardson)
    return float(np.einsum("ijkm,i,j,k,m->", Rl, v, w, w, v) / area)


def frame_sectional(Rf, v, w):
    """K(v, w) for orthonormal-frame vectors from a frame Riemann tensor."""
    area = (v @ v) * (w @ w) - (v @ w) ** 2
    return float(np.einsum("ijkm,i,j,k,m->", Rf, v, w, w, v) / area)


def frame_s(Rf, basis):
    """Ordered-pair sum of sectional curvatures over orthonormal rows."""
    total = 0.0
    for i in range(len(basis)):
        for j in range(len(basis)):
            if i != j:
                total += np.einsum("abcd,a,b,c,d->", Rf, basis[i], basis[j], basis[j], basis[i])
    return float(total)


@dataclass
class CrosscheckReport:
    model_id: str
    h: float
    tolerance: float
    rows: list = field(default_factory=list)  # (r, t, residual)

    @property
    def max_residual(self):
        return max((row[-1] for row in self.rows), default=0.0)

    @property
    def passed(self):
        return self.max_residual < self.tolerance

    def table(self):
        lines = [f"# crosscheck {self.model_id}  h={self.h:g}  tol={self.tolerance:g}", "r t residual"]
        lines += [f"{r:.6f} {'' if t is None else f'{t:.6f}'} {res:.3e}" for r, t, res in self.rows]
        lines.append(f"max residual {self.max_residual:.3e}: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)


def _sample_coords(model, chart, rng, margin, h):
    coords = np.empty(chart.dim)
    base = 2 if model_has_t(model) else 1
    if isinstance(model, ProductOfSpheres):
        base = 0
    for i, (lo, hi) in enumerate(chart.valid_box[:base]):
        span = hi - lo
        coords[i] = rng.uniform(lo + margin * span, hi - margin * span)
    for i in range(base, chart.dim):
        if i in chart.polar:
            edge = max(SAMPLE_POLAR_MARGIN, 4 * h)
            coords[i] = rng.uniform(edge, math.pi - edge)
        else:
            coords[i] = rng.uniform(0.0, 2 * math.pi)
    return coords


def model_has_t(model):
    return isinstance(model, TwoDWarp) or (isinstance(model, SphereProduct) and model_has_t(model.base))


def _point_residual(model, chart, coords, h, rng, richardson):
    """Largest gap between closed form and oracle at one point.

    Compares every coordinate pair, a few random planes and a random
    p-complement.  Fiber angles do not enter the closed form.
    """
    has_t = model_has_t(model)
    if isinstance(model, ProductOfSpheres):
        K = pair_curvatures(model, np.array(0.0))
    else:
        K = pair_curvatures(model, np.array(coords[0]), np.array(coords[1]) if has_t else None)
    Rf = frame_riemann(chart, coords, h, richardson)
    d = chart.dim
    oracle_pairs = np.einsum("abba->ab", Rf)
    idx = np.arange(d)
    oracle_pairs[idx, idx] = 0.0
    residual = float(np.max(np.abs(oracle_pairs - K)))
    for _ in range(3):
        v, w = rng.standard_normal((2, d))
        wedge = np.outer(v, w) - np.outer(w, v)
        closed = 0.5 * np.sum(K * wedge * wedge) / ((v @ v) * (w @ w) - (v @ w) ** 2)
        residual = max(residual, abs(closed - frame_sectional(Rf, v, w)))
    p = int(rng.integers(0, d - 1))
    q, _ = np.linalg.qr(rng.standard_normal((d, d - p)))
    closed = float(s_from_projector(K, q @ q.T))
    residual = max(residual, abs(closed - frame_s(Rf, q.T)))
    return residual


def crosscheck(model, samples=50, h=1e-4, tol=1e-5, seed=0, margin=0.05, richardson=True, threads=1, model_id=None):
    """Closed form against the oracle on random chart-generic points."""
    chart = chart_of(model)
    rng = np.random.default_rng(seed)
    jobs = []
    for _ in range(samples):
        coords = _sample_coords(model, chart, rng, margin, h)
        jobs.append((coords, np.random.default_rng(rng.integers(2**63))))

    def run(job):
        coords, sub = job
        return _point_residual(model, chart, coords, h, sub, richardson)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            residuals = list(pool.map(run, jobs))
    else:
        residuals = [run(job) for job in jobs]
    has_t = model_has_t(model)
    report = CrosscheckReport(model_id or getattr(model, "label", "") or model.kind, h, tol)
    for (coords, _), res in zip(jobs, residuals):
        report.rows.append((float(coords[0]), float(coords[1]) if has_t else None, res))
    return report
