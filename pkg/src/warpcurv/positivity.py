"""Minimisation of the p-curvature over the Grassmann bundle on a grid.

Two independent strategies run by default.

The random-restart strategy descends on orthonormal frames of the
complement using the generic pair-matrix evaluator.  The structured strategy
uses the rotational symmetry of the fiber: a complement of dimension k always
contains k-2 fiber directions, so it is fixed by an orthonormal pair (v, w)
in the span of the base directions and at most two further fiber directions.
That pair is optimised against the case formulas with finite-difference
gradients.  A gap between the two flags a formula bug.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .curvature import _axis_mask, _eps_axis, _profile_values, case_formula, pair_curvatures, s_from_projector
from .errors import InvalidParams, InvalidP, WarpcurvError
from .geometry import GridSpec, ModelPoint, PlaneComplement, ProductOfSpheres, TwoDWarp, WarpedLine

__all__ = [
    "PositivityCertificate",
    "DeltaScalingTable",
    "min_over_grassmann",
    "certify",
    "verdict_for",
    "sphere_product_threshold",
    "delta_scaling_probe",
    "DEFAULT_TOLERANCE",
    "DEFAULT_RESTARTS",
    "AGREEMENT_TOL",
]

DEFAULT_TOLERANCE = 1e-7
DEFAULT_RESTARTS = 16
AGREEMENT_TOL = 1e-5
ITERATIONS = 200
STRATEGIES = ("structured", "random-restart", "both")
MAX_SUBSETS = 128


def verdict_for(value, tolerance, gap=0.0):
    """Positive above the tolerance; otherwise the argmin plane is a witness.

    A minimum within the tolerance of zero is reported as nonpositive because
    the stored plane attains it.  Inconclusive is reserved for runs where the
    two strategies disagree or the value is not finite.
    """
    if not math.isfinite(value):
        return "inconclusive"
    if value <= tolerance:
        return "nonpositive"
    if gap > AGREEMENT_TOL:
        return "inconclusive"
    return "positive"


@dataclass
class PositivityCertificate:
    model_id: str
    p: int
    grid: GridSpec
    min_value: float
    argmin_point: ModelPoint
    argmin_plane: PlaneComplement
    strategy: str
    tolerance: float
    verdict: str
    strategy_gap: float = 0.0  # largest per-point gap between the strategies
    point_minima: np.ndarray = field(default=None, repr=False)
    point_frames: np.ndarray = field(default=None, repr=False)  # (N, dim, k) argmin frames
    points: tuple = field(default=None, repr=False)  # (r, t|None) arrays

    @property
    def strategies_agree(self):
        return self.strategy_gap <= AGREEMENT_TOL

    def reevaluate(self, model):
        """Recompute the p-curvature of the stored argmin."""
        x = self.argmin_point
        K = pair_curvatures(model, np.array(x.r), None if x.t is None else np.array(x.t))
        return float(s_from_projector(K, self.argmin_plane.projector))

    def summary(self):
        x = self.argmin_point
        where = f"r={x.r:.6g}" + ("" if x.t is None else f", t={x.t:.6g}")
        return (
            f"{self.model_id}: p={self.p} grid={self.grid} min={self.min_value:.10g} at {where} "
            f"[{self.strategy}, gap {self.strategy_gap:.2e}] -> {self.verdict}"
        )


# --- generic evaluator: descent on orthonormal frames --------------------------------


def _qr(Y):
    q, r = np.linalg.qr(Y)
    # fix the sign so that retraction is continuous
    signs = np.sign(np.diagonal(r, axis1=-2, axis2=-1))
    signs[signs == 0] = 1.0
    return q * signs[..., None, :]


def _orthonormal_pair(X):
    """Gram-Schmidt on the two columns of X, elementwise over the batch."""
    a, b = X[..., 0], X[..., 1]
    v = a / np.linalg.norm(a, axis=-1, keepdims=True)
    b = b - np.sum(v * b, axis=-1, keepdims=True) * v
    w = b / np.linalg.norm(b, axis=-1, keepdims=True)
    return np.stack([v, w], axis=-1)


def _objective(K, Y):
    return s_from_projector(K, Y @ np.swapaxes(Y, -1, -2))


def _riemannian_gradient(K, Y):
    Pi = Y @ np.swapaxes(Y, -1, -2)
    d = np.diagonal(Pi, axis1=-2, axis2=-1)
    G = -2.0 * K * Pi
    idx = np.arange(K.shape[-1])
    G[..., idx, idx] = 2.0 * np.einsum("...ab,...b->...a", K, d)
    egrad = 2.0 * G @ Y
    return egrad - Pi @ egrad


def _descend(f, grad, retract, X, scale, iterations):
    """Gradient descent with per-element Barzilai-Borwein steps.

    A step that fails the Armijo test is rejected and halved; accepted steps
    set the next step from the secant pair.  Vectorised over the batch.
    """
    value = f(X)
    step = np.broadcast_to(0.25 / scale, value.shape).copy()
    g = grad(X)
    for _ in range(iterations):
        g2 = np.sum(g * g, axis=(-2, -1))
        done = (g2 < (1e-9 * scale) ** 2) | (g2 * step < 1e-26 * scale)
        if np.all(done):
            break
        trial = retract(X - step[..., None, None] * g)
        new = f(trial)
        # converged elements stay frozen so a trajectory never depends on its batch
        accept = ~done & (new <= value - 1e-4 * step * g2)
        g_trial = grad(trial)
        s = trial - X
        y = g_trial - g
        sy = np.abs(np.sum(s * y, axis=(-2, -1)))
        ss = np.sum(s * s, axis=(-2, -1))
        with np.errstate(divide="ignore", invalid="ignore"):
            bb = np.where(sy > 0, ss / sy, 2.0 * step)
        bb = np.clip(bb, 1e-6 / scale, 1e3 / scale)
        X = np.where(accept[..., None, None], trial, X)
        g = np.where(accept[..., None, None], g_trial, g)
        value = np.where(accept, new, value)
        step = np.where(accept, bb, np.where(done, step, step * 0.5))
    return value, X


def _scales(K):
    """Per-point curvature scale, shaped to broadcast over restarts."""
    return np.maximum(np.max(np.abs(K), axis=(-2, -1)), 1e-12)[:, None]


def _coordinate_frames(d, k):
    subsets = list(itertools.combinations(range(d), k))
    if len(subsets) > MAX_SUBSETS:
        subsets = subsets[:MAX_SUBSETS]
    frames = np.zeros((len(subsets), d, k))
    for s, sub in enumerate(subsets):
        frames[s, list(sub), range(k)] = 1.0
    return frames


def _restart_minimum(K, k, starts, iterations=ITERATIONS):
    """Minimum over random and coordinate starts; K is (N, d, d), starts (N, R, d, k)."""
    N, d = K.shape[0], K.shape[-1]
    coords = _coordinate_frames(d, k)
    coord_vals = _objective(K[:, None], coords[None])
    if k == d:
        Y = np.broadcast_to(np.eye(d), (N, 1, d, d))
        return _objective(K[:, None], Y)[:, 0], np.array(Y)[:, 0]
    scale = _scales(K)
    Kb = K[:, None]
    vals, Y = _descend(
        lambda Y: _objective(Kb, Y),
        lambda Y: _riemannian_gradient(Kb, Y),
        _qr,
        _qr(starts),
        scale,
        iterations,
    )
    allv = np.concatenate([coord_vals, vals], axis=1)
    best = np.argmin(allv, axis=1)
    frames = np.concatenate([np.broadcast_to(coords, (N,) + coords.shape), Y], axis=1)
    return allv[np.arange(N), best], frames[np.arange(N), best]


# --- structured evaluator: the case parametrisation ----------------------------------


@dataclass(frozen=True)
class _Layout:
    """Frame indices used by the structured search."""

    d: int
    has_t: bool
    fiber_start: int
    fixed: tuple  # fixed fiber directions in the complement
    extra: tuple  # fiber directions open to v and w
    case_n: int
    case_p: int

    @property
    def active(self):
        base = (0, 1) if self.has_t else (0,)
        return base + self.extra


def _layout(model, k):
    n = model.fiber_dim
    has_t = isinstance(model, TwoDWarp)
    start = 2 if has_t else 1
    n_fixed = k - 2
    fixed = tuple(range(start, start + n_fixed))
    extra = tuple(range(start + n_fixed, start + min(n, n_fixed + 2)))
    return _Layout(model.dim, has_t, start, fixed, extra, n, n - n_fixed)


def _structured_values(model, r, t):
    if isinstance(model, TwoDWarp):
        return _profile_values(model, r, t)
    beta, beta_r, beta_rr = model.beta.evaluate(r)
    s, _ = model.beta.slope_complement(r)
    zero = np.zeros_like(beta)
    return dict(beta=beta, beta_r=beta_r, beta_rr=beta_rr, s2=s * s, omega=zero + 1.0, omega_r=zero, omega_rr=zero)


def _embed(layout, vw):
    """(..., a, 2) pair in active coordinates -> (..., d, k) complement frame."""
    shape = vw.shape[:-2]
    k = len(layout.fixed) + 2
    Y = np.zeros(shape + (layout.d, k))
    Y[..., list(layout.active), :2] = vw
    for j, idx in enumerate(layout.fixed):
        Y[..., idx, 2 + j] = 1.0
    return Y


def _case_components(layout, vw):
    """Active pair -> case-formula components (r, t, k, k+1)."""
    out = np.zeros(vw.shape[:-2] + (4, 2))
    pos = [0, 1] if layout.has_t else [0]
    pos += [2, 3][: len(layout.extra)]
    out[..., pos, :] = vw
    return out


def _structured_minimum(model, K, r, t, k, starts, iterations=ITERATIONS):
    layout = _layout(model, k)
    a = len(layout.active)
    N = K.shape[0]
    if a < 2:
        raise InvalidP("structured search needs two free directions")
    values = _structured_values(model, r, t)
    mask, _ = _axis_mask(model.beta, r, _eps_axis(model.beta, None))
    safe = {key: np.where(mask, 1.0, v)[:, None] for key, v in values.items()}
    Kb = K[:, None]

    axis_rows = np.flatnonzero(mask)

    def f(X):
        vw = _orthonormal_pair(X)
        comp = _case_components(layout, vw)
        out = case_formula(3, layout.case_n, layout.case_p, safe, comp[..., 0], comp[..., 1])
        if len(axis_rows):
            # the case formulas divide by beta; use the axis limits there
            out[axis_rows] = _objective(Kb[axis_rows], _embed(layout, vw[axis_rows]))
        return out

    h = 1e-6

    def grad(X):
        g = np.empty_like(X)
        for i in range(a):
            for j in range(2):
                e = np.zeros(X.shape[-2:])
                e[i, j] = h
                g[..., i, j] = (f(X + e) - f(X - e)) / (2 * h)
        return g

    if a == 2:
        # the pair spans the whole active space; nothing to optimise
        X = np.broadcast_to(np.eye(2), (N, 1, 2, 2)).copy()
        vals = f(X)
    else:
        scale = _scales(K)
        vals, X = _descend(f, grad, _orthonormal_pair, _orthonormal_pair(starts[..., :a, :2]), scale, iterations)
    best = np.argmin(vals, axis=1)
    vw = _orthonormal_pair(X[np.arange(N), best])
    return vals[np.arange(N), best], _embed(layout, vw)


def _supports_structured(model):
    return isinstance(model, (TwoDWarp, WarpedLine))


# --- certification --------------------------------------------------------------------


def _check_p(model, p):
    if not 0 <= int(p) <= model.dim - 2:
        raise InvalidP(f"p={p} outside [0, {model.dim - 2}]")
    return int(p)


def _grid_of(model, grid):
    r, t = model.grid_points(grid)
    r = np.asarray(r, float)
    return r, (None if t is None else np.asarray(t, float))


def _matrices(model, r, t):
    if isinstance(model, ProductOfSpheres):
        return np.broadcast_to(pair_curvatures(model, np.array(0.0)), r.shape + (model.dim, model.dim)).copy()
    return pair_curvatures(model, r, t)


def _minimise_points(model, p, r, t, strategy, seed, restarts, threads, iterations=ITERATIONS):
    """Per-point minima and argmin frames for arrays of base points."""
    if strategy not in STRATEGIES:
        raise InvalidParams(f"strategy must be one of {STRATEGIES}")
    d = model.dim
    k = d - p
    K = _matrices(model, r, t)
    N = len(r)
    rng = np.random.default_rng(seed)
    # all random numbers are drawn up front so that results ignore chunking
    starts = rng.standard_normal((N, restarts, d, k))
    # identical pair matrices share one minimisation
    flat = K.reshape(N, -1)
    _, first, inverse = np.unique(flat, axis=0, return_index=True, return_inverse=True)
    inverse = inverse.ravel()
    order = np.argsort(first)
    first = first[order]
    remap = np.empty_like(order)
    remap[order] = np.arange(len(order))
    inverse = remap[inverse]

    structured = strategy in ("structured", "both") and _supports_structured(model) and k < d
    generic = strategy in ("random-restart", "both") or not structured

    def run(chunk):
        idx = first[chunk]
        out = {}
        if generic:
            out["generic"] = _restart_minimum(K[idx], k, starts[idx], iterations)
        if structured:
            out["structured"] = _structured_minimum(
                model, K[idx], r[idx], None if t is None else t[idx], k, starts[idx], iterations
            )
        return out

    chunks = np.array_split(np.arange(len(first)), max(1, min(threads, len(first))))
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(run, chunks))
    else:
        parts = [run(c) for c in chunks]

    def gather(key):
        vals = np.concatenate([part[key][0] for part in parts])
        frames = np.concatenate([part[key][1] for part in parts])
        return vals, frames

    results = {key: gather(key) for key in parts[0]}
    if len(results) == 2:
        gv, gf = results["generic"]
        sv, sf = results["structured"]
        gap = np.abs(gv - sv)
        use_structured = sv < gv
        vals = np.where(use_structured, sv, gv)
        frames = np.where(use_structured[:, None, None], sf, gf)
    else:
        (vals, frames), = results.values()
        gap = np.zeros_like(vals)
    used = "both" if len(results) == 2 else ("structured" if structured else "random-restart")
    return vals[inverse], frames[inverse], gap[inverse], used


def _point_of(r, t, i):
    return ModelPoint(float(r[i]), None if t is None else float(t[i]))


def min_over_grassmann(model, x, p, strategy="both", seed=0, restarts=DEFAULT_RESTARTS):
    """Smallest p-curvature over complements at one point, with the complement."""
    p = _check_p(model, p)
    r = np.array([x.r if x.r is not None else 0.0], float)
    t = None if x.t is None else np.array([x.t], float)
    vals, frames, _, _ = _minimise_points(model, p, r, t, strategy, seed, restarts, 1)
    return float(vals[0]), PlaneComplement(frames[0].T, p=p, check=False)


def certify(
    model,
    p,
    grid=None,
    tolerance=DEFAULT_TOLERANCE,
    seed=0,
    strategy="both",
    restarts=DEFAULT_RESTARTS,
    threads=1,
    model_id=None,
):
    """Minimum of the p-curvature over a base grid times the Grassmannian.

    Grid points at an axis use the closed-form axis limits.  The result is
    deterministic for a given seed regardless of ``threads``.
    """
    p = _check_p(model, p)
    grid = grid or GridSpec()
    r, t = _grid_of(model, grid)
    vals, frames, gap, used = _minimise_points(model, p, r, t, strategy, seed, restarts, threads)
    i = int(np.argmin(vals))
    value = float(vals[i])
    plane = PlaneComplement(_qr(frames[i]).T, p=p, check=False)
    return PositivityCertificate(
        model_id=model_id or getattr(model, "label", "") or model.kind,
        p=p,
        grid=grid,
        min_value=value,
        argmin_point=_point_of(r, t, i),
        argmin_plane=plane,
        strategy=used,
        tolerance=tolerance,
        verdict=verdict_for(value, tolerance, float(np.max(gap))),
        strategy_gap=float(np.max(gap)),
        point_minima=vals,
        point_frames=frames,
        points=(r, t),
    )


def sphere_product_threshold(dims, seed=0, tolerance=DEFAULT_TOLERANCE):
    """n - m for a product of m unit spheres of total dimension n.

    Confirms by certification that p = n-m-1 is positive and p = n-m is not
    (whenever those p are admissible).
    """
    dims = tuple(int(x) for x in dims)
    if not dims or min(dims) < 1:
        raise InvalidParams("need at least one factor, each of dimension >= 1")
    model = ProductOfSpheres(dims, (1.0,) * len(dims))
    n, m = sum(dims), len(dims)
    threshold = n - m
    below, at = threshold - 1, threshold
    if 0 <= below <= n - 2 and certify(model, below, tolerance=tolerance, seed=seed).verdict != "positive":
        raise WarpcurvError(f"p={below} should be positive on {dims}")
    if 0 <= at <= n - 2 and certify(model, at, tolerance=tolerance, seed=seed).verdict == "positive":
        raise WarpcurvError(f"p={at} should fail to be positive on {dims}")
    return threshold


@dataclass
class DeltaScalingTable:
    p: int
    rows: list  # (delta, certified min, ratio to the previous row or nan)

    @property
    def holds(self):
        """Each halving of delta at least doubles the certified minimum."""
        ok = True
        for (d0, m0, _), (d1, m1, _) in zip(self.rows, self.rows[1:]):
            factor = math.log2(d0 / d1)
            ok &= m1 >= 2.0**factor * m0
        return bool(ok)

    def table(self):
        lines = [f"# delta scaling, p={self.p}", "delta min ratio"]
        lines += [f"{d:.6g} {m:.10g} {q:.6g}" for d, m, q in self.rows]
        lines.append("scaling " + ("holds" if self.holds else "FAILS"))
        return "\n".join(lines)


def delta_scaling_probe(family, p, deltas, grid=None, seed=0, threads=1):
    """Certified minima along a family of models indexed by delta.

    ``family`` maps delta to a model.  Deltas must be positive and decreasing.
    """
    deltas = [float(x) for x in deltas]
    if not deltas or min(deltas) <= 0 or any(b >= a for a, b in zip(deltas, deltas[1:])):
        raise InvalidParams("deltas must be positive and strictly decreasing")
    rows = []
    prev = None
    for delta in deltas:
        cert = certify(family(delta), p, grid=grid, seed=seed, threads=threads)
        ratio = cert.min_value / prev if prev not in (None, 0.0) else math.nan
        rows.append((delta, cert.min_value, ratio))
        prev = cert.min_value
    return DeltaScalingTable(int(p), rows)
