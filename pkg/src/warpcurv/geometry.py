"""Points, tangent data, planes and metric-model descriptors.

Tangent data always lives in the orthonormal frame of the model: the radial
(or line) direction first, then the second base direction when present,
then the fiber directions in order.  Models are immutable descriptors; the
curvature formulas live in :mod:`warpcurv.curvature`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInput, DimensionMismatch, InvalidP, InvalidParams
from .profiles import ConstantTwoVar

__all__ = [
    "ModelPoint",
    "TangentVector",
    "PlaneComplement",
    "GridSpec",
    "ProductOfSpheres",
    "WarpedLine",
    "TwoDWarp",
    "MultiplyWarpedLine",
    "SphereProduct",
    "Region",
    "Interface",
    "RegionAssembly",
    "InterfaceReport",
    "gram_schmidt",
    "random_complement",
    "check_region_interfaces",
]

ORTHONORMAL_TOL = 1e-12


@dataclass(frozen=True)
class ModelPoint:
    """A point of a model.  ``r`` is the first base coordinate (the line
    coordinate for multiply warped models), ``t`` the second one if any."""

    r: float
    t: float | None = None
    fiber_angles: tuple = ()


@dataclass(frozen=True)
class TangentVector:
    comp_r: float
    comp_t: float | None = None
    comp_fiber: tuple = ()

    def as_array(self):
        head = [self.comp_r] if self.comp_t is None else [self.comp_r, self.comp_t]
        return np.array(head + list(self.comp_fiber), dtype=float)

    @classmethod
    def from_array(cls, arr, has_t=True):
        arr = np.asarray(arr, dtype=float)
        if has_t:
            return cls(float(arr[0]), float(arr[1]), tuple(arr[2:].tolist()))
        return cls(float(arr[0]), None, tuple(arr[1:].tolist()))


def _as_matrix(vectors):
    if len(vectors) and isinstance(vectors[0], TangentVector):
        return np.array([v.as_array() for v in vectors]), True
    return np.atleast_2d(np.asarray(vectors, dtype=float)), False


def gram_schmidt(vectors):
    """Orthonormalise rows in order (modified Gram-Schmidt, two passes)."""
    mat, tangent = _as_matrix(vectors)
    if mat.shape[0] and np.linalg.svd(mat, compute_uv=False)[-1] <= 1e-10:
        raise DegenerateInput("vectors are (numerically) linearly dependent")
    out = mat.copy()
    for i in range(out.shape[0]):
        v = out[i]
        for _ in range(2):
            for j in range(i):
                v = v - (out[j] @ v) * out[j]
        out[i] = v / np.linalg.norm(v)
    if tangent:
        has_t = vectors[0].comp_t is not None
        return [TangentVector.from_array(row, has_t) for row in out]
    return out


class PlaneComplement:
    """An orthonormal basis of the complement of a p-plane, stored as rows."""

    __slots__ = ("_basis", "p", "dim_ambient")

    def __init__(self, basis, p=None, check=True):
        basis = np.array(basis, dtype=float)
        if basis.ndim != 2:
            raise DimensionMismatch("basis must be a 2-d array of row vectors")
        k, d = basis.shape
        self.dim_ambient = d
        self.p = d - k if p is None else int(p)
        if self.p != d - k:
            raise DimensionMismatch(f"{k} vectors cannot span the complement of a {self.p}-plane in R^{d}")
        if not 0 <= self.p <= d - 2:
            raise InvalidP(f"p={self.p} outside [0, {d - 2}]")
        if check:
            gram = basis @ basis.T
            if np.max(np.abs(gram - np.eye(k))) > ORTHONORMAL_TOL:
                raise DegenerateInput("complement basis is not orthonormal")
        basis.setflags(write=False)
        self._basis = basis

    @property
    def basis(self):
        return self._basis

    @property
    def projector(self):
        return self._basis.T @ self._basis

    def vectors(self, has_t=True):
        return [TangentVector.from_array(row, has_t) for row in self._basis]

    def __repr__(self):
        return f"PlaneComplement(p={self.p}, dim={self.dim_ambient})"


def random_complement(seed, n_amb, p):
    if not 0 <= p <= n_amb - 2:
        raise InvalidP(f"p={p} outside [0, {n_amb - 2}]")
    rng = np.random.default_rng(seed)
    q, _ = np.linalg.qr(rng.standard_normal((n_amb, n_amb - p)))
    return PlaneComplement(q.T, p)


@dataclass(frozen=True)
class GridSpec:
    n_r: int = 64
    n_t: int = 32

    @classmethod
    def parse(cls, text):
        parts = str(text).lower().split("x")
        if len(parts) == 1:
            return cls(int(parts[0]), 1)
        return cls(int(parts[0]), int(parts[1]))

    def __str__(self):
        return f"{self.n_r}x{self.n_t}"


class MetricModel:
    """Common interface of the model descriptors."""

    kind = "abstract"
    has_t = False
    label = ""

    @property
    def dim(self):
        raise NotImplementedError

    def axis_labels(self):
        raise NotImplementedError

    def grid_points(self, grid):
        """Arrays (r, t) of sample base points; t is None for 1-d bases."""
        raise NotImplementedError

    def frame_scales(self, r, t=None):
        """Coordinate lengths of the frame directions (fiber chart factors excluded)."""
        raise NotImplementedError

    def point(self, r, t=None):
        return ModelPoint(float(r), None if t is None else float(t))


def _linspace(domain, n):
    return np.linspace(domain[0], domain[1], max(int(n), 1)) if n > 1 else np.array([0.5 * sum(domain)])


@dataclass(frozen=True, eq=False)
class ProductOfSpheres(MetricModel):
    """Riemannian product of round spheres with the given dimensions and radii."""

    dims: tuple
    radii: tuple | None = None
    label: str = ""
    kind = "product-spheres"

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims or min(dims) < 1:
            raise InvalidParams("need at least one sphere factor of dimension >= 1")
        radii = tuple(float(x) for x in (self.radii or (1.0,) * len(dims)))
        if len(radii) != len(dims) or min(radii) <= 0:
            raise InvalidParams("radii must be positive, one per factor")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "radii", radii)

    @property
    def dim(self):
        return sum(self.dims)

    def axis_labels(self):
        return [f"s{i}_{j}" for i, d in enumerate(self.dims) for j in range(d)]

    def grid_points(self, grid):
        return np.zeros(1), None

    def frame_scales(self, r, t=None):
        r = np.asarray(r, float)
        return np.broadcast_to(np.repeat(self.radii, self.dims), r.shape + (self.dim,))


@dataclass(frozen=True, eq=False)
class WarpedLine(MetricModel):
    """dr^2 + beta(r)^2 ds^2 on an interval times a round sphere of ``fiber_dim``."""

    fiber_dim: int
    beta: object
    label: str = ""
    kind = "warped-line"

    def __post_init__(self):
        if self.fiber_dim < 1:
            raise InvalidParams("fiber dimension must be >= 1")

    @property
    def domain(self):
        return self.beta.domain

    @property
    def dim(self):
        return self.fiber_dim + 1

    def axis_labels(self):
        return ["r"] + [f"f{i}" for i in range(self.fiber_dim)]

    def grid_points(self, grid):
        return _linspace(self.domain, grid.n_r), None

    def frame_scales(self, r, t=None):
        r = np.asarray(r, float)
        beta = self.beta.value(r)
        return np.stack([np.ones_like(beta)] + [beta] * self.fiber_dim, axis=-1)


@dataclass(frozen=True, eq=False)
class TwoDWarp(MetricModel):
    """dr^2 + omega(r,t)^2 dt^2 + beta(r)^2 ds^2 over a rectangle."""

    fiber_dim: int
    beta: object
    omega: object = None
    t_domain: tuple = (0.0, 1.0)
    label: str = ""
    kind = "two-d-warp"
    has_t = True

    def __post_init__(self):
        if self.fiber_dim < 1:
            raise InvalidParams("fiber dimension must be >= 1")
        if self.omega is None:
            object.__setattr__(self, "omega", ConstantTwoVar(1.0, self.beta.domain, self.t_domain))
        else:
            object.__setattr__(self, "t_domain", tuple(self.omega.t_domain))

    @property
    def r_domain(self):
        return self.beta.domain

    @property
    def domain(self):
        return self.beta.domain

    @property
    def dim(self):
        return self.fiber_dim + 2

    def axis_labels(self):
        return ["r", "t"] + [f"f{i}" for i in range(self.fiber_dim)]

    def grid_points(self, grid):
        r = _linspace(self.r_domain, grid.n_r)
        t = _linspace(self.t_domain, grid.n_t)
        rr, tt = np.meshgrid(r, t, indexing="ij")
        return rr.ravel(), tt.ravel()

    def frame_scales(self, r, t=None):
        r, t = np.broadcast_arrays(np.asarray(r, float), np.asarray(t, float))
        beta = self.beta.value(r)
        omega = self.omega.value(r, t)
        return np.stack([np.ones_like(beta), omega] + [beta] * self.fiber_dim, axis=-1)


@dataclass(frozen=True, eq=False)
class MultiplyWarpedLine(MetricModel):
    """dt^2 + sum_i rho_i(t)^2 ds_{n_i}^2; the line coordinate is stored as ``r``."""

    fibers: tuple
    label: str = ""
    kind = "multiply-warped-line"

    def __post_init__(self):
        fibers = tuple((int(n), prof) for n, prof in self.fibers)
        if not fibers or min(n for n, _ in fibers) < 1:
            raise InvalidParams("need at least one fiber of dimension >= 1")
        domains = {tuple(prof.domain) for _, prof in fibers}
        if len(domains) != 1:
            raise InvalidParams("all radius profiles must share one domain")
        object.__setattr__(self, "fibers", fibers)

    @property
    def domain(self):
        return self.fibers[0][1].domain

    @property
    def dims(self):
        return tuple(n for n, _ in self.fibers)

    @property
    def dim(self):
        return 1 + sum(self.dims)

    def axis_labels(self):
        return ["t"] + [f"f{i}_{j}" for i, (n, _) in enumerate(self.fibers) for j in range(n)]

    def grid_points(self, grid):
        return _linspace(self.domain, grid.n_r), None

    def frame_scales(self, r, t=None):
        r = np.asarray(r, float)
        cols = [np.ones_like(r)]
        for n, prof in self.fibers:
            cols += [prof.value(r)] * n
        return np.stack(cols, axis=-1)


@dataclass(frozen=True, eq=False)
class SphereProduct(MetricModel):
    """A model times a unit round sphere S^m."""

    base: MetricModel
    m: int
    label: str = ""
    kind = "sphere-product"

    def __post_init__(self):
        if self.m < 0:
            raise InvalidParams("sphere dimension must be >= 0")

    @property
    def has_t(self):
        return self.base.has_t

    @property
    def dim(self):
        return self.base.dim + self.m

    def axis_labels(self):
        return self.base.axis_labels() + [f"u{j}" for j in range(self.m)]

    def grid_points(self, grid):
        return self.base.grid_points(grid)

    def frame_scales(self, r, t=None):
        base = self.base.frame_scales(r, t)
        return np.concatenate([base, np.ones(base.shape[:-1] + (self.m,))], axis=-1)


@dataclass(frozen=True)
class Region:
    name: str
    model: MetricModel
    note: str = ""


@dataclass(frozen=True)
class Interface:
    """A shared boundary: region ``a`` at ``face_a`` meets region ``b`` at ``face_b``.

    A face is ``(coordinate, value)`` with coordinate ``"r"`` or ``"t"``.  Along
    the face the free coordinate maps by ``s_b = flip * s_a + offset``.
    """

    a: str
    face_a: tuple
    b: str
    face_b: tuple
    span: tuple
    flip: float = 1.0
    offset: float = 0.0


@dataclass(frozen=True, eq=False)
class RegionAssembly(MetricModel):
    regions: tuple
    interfaces: tuple = ()
    label: str = ""
    kind = "region-assembly"

    def region(self, name):
        for reg in self.regions:
            if reg.name == name:
                return reg
        raise KeyError(name)

    @property
    def dim(self):
        dims = {reg.model.dim for reg in self.regions}
        if len(dims) != 1:
            raise DimensionMismatch("regions disagree on dimension")
        return dims.pop()


@dataclass
class InterfaceReport:
    tolerance: float
    mismatches: list = field(default_factory=list)  # (a, b, max mismatch)

    @property
    def max_mismatch(self):
        return max((m for _, _, m in self.mismatches), default=0.0)

    @property
    def passed(self):
        return self.max_mismatch < self.tolerance

    def __str__(self):
        lines = [f"interfaces: {len(self.mismatches)}  tolerance {self.tolerance:g}"]
        lines += [f"  {a} | {b}: max mismatch {m:.3e}" for a, b, m in self.mismatches]
        lines.append("PASS" if self.passed else "FAIL")
        return "\n".join(lines)


def _face_coords(face, s):
    coord, value = face
    fixed = np.full_like(s, float(value))
    return (fixed, s) if coord == "r" else (s, fixed)


def check_region_interfaces(model, tol=1e-9, samples=101):
    """Compare metric components on both sides of every declared interface."""
    report = InterfaceReport(tol)
    for itf in model.interfaces:
        reg_a, reg_b = model.region(itf.a).model, model.region(itf.b).model
        s_a = np.linspace(itf.span[0], itf.span[1], samples)
        s_b = itf.flip * s_a + itf.offset
        g_a = reg_a.frame_scales(*_face_coords(itf.face_a, s_a)) ** 2
        g_b = reg_b.frame_scales(*_face_coords(itf.face_b, s_b)) ** 2
        if itf.face_a[0] != itf.face_b[0]:
            # the normal direction on one side is the tangential one on the other
            g_b = g_b.copy()
            g_b[..., [0, 1]] = g_b[..., [1, 0]]
        report.mismatches.append((itf.a, itf.b, float(np.max(np.abs(g_a - g_b)))))
    return report
