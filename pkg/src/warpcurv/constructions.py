"""Named metrics: torpedo, torpedo cylinder, toe, bend, boot and boot x sphere."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .curvature import pair_curvatures
from .errors import InterfaceMismatch, InvalidParams, InvalidP, SearchExhausted
from .geometry import (
    GridSpec,
    Interface,
    Region,
    RegionAssembly,
    SphereProduct,
    TwoDWarp,
    WarpedLine,
    check_region_interfaces,
)
from .positivity import DEFAULT_TOLERANCE, certify
from .profiles import AlphaProfile, BendOmega, ConstantProfile, ReversedProfile, ToeOmega, TorpedoProfile

__all__ = [
    "DEFAULT_NECK",
    "build_torpedo",
    "build_torpedo_cylinder",
    "build_toe",
    "build_bend",
    "bend_alpha",
    "toe_alpha",
    "BendSearch",
    "bend_lambda_search",
    "search_bend_Lambda",
    "FifthTermReport",
    "fifth_term_report",
    "bend_property_checks",
    "toe_sign_structure",
    "assemble_boot",
    "boot_cross_sphere",
    "certify_regions",
    "min_pair_curvature",
]

# neck length of the torpedo used inside toe, bend and boot, in units of delta
DEFAULT_NECK = 0.5
TOE_EXTENT = 1.0


def _check_delta(delta, lam=0.0):
    if not delta > 0 or lam < 0:
        raise InvalidParams(f"need delta > 0 and lambda >= 0, got delta={delta}, lambda={lam}")


def _torpedo(delta, neck):
    return TorpedoProfile(delta, DEFAULT_NECK * delta if neck is None else neck)


def build_torpedo(n, delta=1.0, lam=0.0):
    """Torpedo disk: dr^2 + eta^2 ds_{n+1}^2, ambient dimension n+2."""
    if n < 1:
        raise InvalidParams("n must be >= 1")
    _check_delta(delta, lam)
    return WarpedLine(n + 1, TorpedoProfile(delta, lam), label=f"torpedo(n={n}, delta={delta:g}, lambda={lam:g})")


def build_torpedo_cylinder(n, delta=1.0, lam=0.0, length=1.0):
    """Torpedo disk of fiber S^n times an interval of the given length."""
    if n < 1:
        raise InvalidParams("n must be >= 1")
    _check_delta(delta, lam)
    if not length > 0:
        raise InvalidParams("length must be positive")
    return TwoDWarp(
        n,
        TorpedoProfile(delta, lam),
        None,
        (0.0, float(length)),
        label=f"torpedo-cylinder(n={n}, delta={delta:g}, lambda={lam:g}, length={length:g})",
    )


def toe_alpha(beta):
    """alpha for the toe, anchored so that alpha equals 1 at the neck end.

    The torpedo is continued along its neck to length 2(b+1); alpha is then
    the usual integral anchored at half that length, which puts alpha(b) = 1
    and keeps the circle warping >= 1.
    """
    b = beta.b
    longer = TorpedoProfile(beta.delta, 2.0 * (b + 1.0) - beta.cap_end)
    return AlphaProfile(longer, longer.b)


def build_toe(n, delta=1.0, lambda1=0.0, lambda2=0.0, neck=None):
    if n < 2:
        raise InvalidParams("the toe needs n >= 2")
    _check_delta(delta)
    beta = _torpedo(delta, neck)
    omega = ToeOmega(toe_alpha(beta), TOE_EXTENT, lambda1, lambda2, r_domain=beta.domain)
    return TwoDWarp(n, beta, omega, label=f"toe(n={n}, delta={delta:g}, lambda1={lambda1:g}, lambda2={lambda2:g})")


def bend_alpha(delta=1.0, neck=None):
    beta = _torpedo(delta, neck)
    return AlphaProfile(ReversedProfile(beta), beta.b)


def build_bend(n, delta=1.0, Lambda=None, neck=None):
    """Torpedo cylinder bent through a quarter circle of radius about Lambda.

    Lambda defaults to 2 max|alpha| + 1; LambdaTooSmall below max|alpha|.
    """
    if n < 2:
        raise InvalidParams("the bend needs n >= 2")
    _check_delta(delta)
    alpha = bend_alpha(delta, neck)
    if Lambda is None:
        Lambda = 2.0 * alpha.max_abs() + 1.0
    omega = BendOmega(Lambda, alpha)
    return TwoDWarp(n, alpha.beta, omega, label=f"bend(n={n}, delta={delta:g}, Lambda={Lambda:.6g})")


@dataclass
class BendSearch:
    Lambda: float
    certificate: object
    trail: list = field(default_factory=list)  # (Lambda, min, verdict)


def bend_lambda_search(n, delta=1.0, p=0, grid=None, seed=0, max_doublings=20, bisections=10, threads=1):
    """Doubling from 2 max|alpha| + 1 until positive, then bisection back down."""
    if not 0 <= p <= n - 2:
        raise InvalidP(f"p={p} outside [0, {n - 2}]")
    alpha = bend_alpha(delta)
    trail = []

    def attempt(Lambda):
        cert = certify(build_bend(n, delta, Lambda), p, grid=grid, seed=seed, threads=threads)
        trail.append((Lambda, cert.min_value, cert.verdict))
        return cert

    Lambda = 2.0 * alpha.max_abs() + 1.0
    failed = None
    for _ in range(max_doublings + 1):
        cert = attempt(Lambda)
        if cert.verdict == "positive":
            break
        failed = Lambda
        Lambda *= 2.0
    else:
        raise SearchExhausted(f"no positive certificate up to Lambda={Lambda / 2:g}")
    if failed is not None:
        lo, hi = failed, Lambda
        for _ in range(bisections):
            mid = 0.5 * (lo + hi)
            trial = attempt(mid)
            if trial.verdict == "positive":
                hi, cert = mid, trial
            else:
                lo = mid
        Lambda = hi
    return BendSearch(Lambda, cert, trail)


def search_bend_Lambda(n, delta=1.0, p=0, grid=None, seed=0):
    return bend_lambda_search(n, delta, p, grid, seed).Lambda


@dataclass
class FifthTermReport:
    Lambda: float
    attained: float  # grid max of |beta_r omega_r| / omega over the bending band
    bound: float  # max|alpha_r beta_r| / (Lambda - max|alpha|)

    @property
    def ratio(self):
        return self.attained / self.bound if self.bound else math.nan

    def __str__(self):
        return f"Lambda={self.Lambda:.6g} attained={self.attained:.6g} bound={self.bound:.6g} ratio={self.ratio:.4f}"


def fifth_term_report(n, delta=1.0, Lambda=None, samples=(401, 201)):
    """The mixed t-fiber term that can turn negative in the bend, against its bound."""
    model = build_bend(n, delta, Lambda)
    alpha = model.omega.alpha
    r = np.linspace(*model.r_domain, samples[0])
    t = np.linspace(-0.5, math.pi / 2 + 0.5, samples[1])
    R, T = np.meshgrid(r, t, indexing="ij")
    _, beta_r, _ = model.beta.evaluate(R)
    omega, omega_r, _, _ = model.omega.evaluate(R, T)
    attained = float(np.max(np.abs(beta_r * omega_r) / omega))
    _, alpha_r, _ = alpha.evaluate(r)
    _, beta_r1, _ = model.beta.evaluate(r)
    bound = float(np.max(np.abs(alpha_r * beta_r1)) / (model.omega.Lambda - alpha.max_abs()))
    return FifthTermReport(model.omega.Lambda, attained, bound)


def _dense(model, samples):
    r = np.linspace(*model.r_domain, samples[0])
    t = np.linspace(*model.t_domain, samples[1])
    return np.meshgrid(r, t, indexing="ij")


def bend_property_checks(model, samples=(257, 257)):
    """Worst violations of the bend's slope bound and of omega_rr <= 0."""
    R, T = _dense(model, samples)
    _, omega_r, _, omega_rr = model.omega.evaluate(R, T)
    _, alpha_r, _ = model.omega.alpha.evaluate(R)
    return {
        "slope_excess": float(np.max(np.abs(omega_r) - np.abs(alpha_r))),
        "max_omega_rr": float(np.max(omega_rr)),
    }


def toe_sign_structure(model, samples=(257, 257)):
    """Largest value of omega_r * beta_r on a dense grid (should be <= 0)."""
    R, T = _dense(model, samples)
    _, beta_r, _ = model.beta.evaluate(R)
    _, omega_r, _, _ = model.omega.evaluate(R, T)
    return float(np.max(omega_r * beta_r))


def assemble_boot(n, delta=1.0, Lambda=None, l1=1.0, l4=1.0, neck=None, tol=1e-9):
    """Four regions: toe, bend, torpedo cylinder and the flat piece.

    The flat piece is dr^2 + dt^2 + (neck radius)^2 ds_n^2 so that it meets the
    torpedo cylinder along the neck.  Paddings: l2 = l1 + Lambda pi/2 and
    l3 = l4 + Lambda pi/2.
    """
    if l1 < 0 or l4 < 0:
        raise InvalidParams("paddings must be nonnegative")
    bend = build_bend(n, delta, Lambda, neck)
    Lambda = bend.omega.Lambda
    toe = build_toe(n, delta, lambda1=l1, lambda2=0.0, neck=neck)
    beta = toe.beta
    b = beta.b
    l2 = l1 + Lambda * math.pi / 2
    l3 = l4 + Lambda * math.pi / 2
    cylinder = TwoDWarp(n, beta, None, (0.0, l3), label="torpedo x interval")
    flat = TwoDWarp(n, ConstantProfile(beta.neck_radius, (0.0, l2)), None, (0.0, l3), label="flat")
    regions = (
        Region("R1", toe, "toe"),
        Region("R2", bend, "bend"),
        Region("R3", cylinder, "torpedo x interval"),
        Region("R4", flat, "flat disk x sphere"),
    )
    toe_end = toe.t_domain[1]
    bend_lo, bend_hi = bend.t_domain
    interfaces = (
        Interface("R1", ("t", toe_end), "R2", ("t", bend_lo), (0.0, b), flip=-1.0, offset=b),
        Interface("R2", ("t", bend_hi), "R3", ("t", 0.0), (0.0, b), flip=-1.0, offset=b),
        Interface("R3", ("r", b), "R4", ("r", 0.0), (0.0, l3)),
    )
    boot = RegionAssembly(regions, interfaces, label=f"boot(n={n}, delta={delta:g}, Lambda={Lambda:.6g})")
    report = check_region_interfaces(boot, tol)
    if not report.passed:
        raise InterfaceMismatch(str(report))
    return boot


def boot_cross_sphere(n, m, delta=1.0, Lambda=None, l1=1.0, l4=1.0):
    if m < 0:
        raise InvalidParams("m must be >= 0")
    boot = assemble_boot(n, delta, Lambda, l1, l4)
    if m == 0:
        return boot
    regions = tuple(Region(reg.name, SphereProduct(reg.model, m), reg.note) for reg in boot.regions)
    return RegionAssembly(regions, boot.interfaces, label=f"{boot.label} x S^{m}")


def certify_regions(assembly, p, grid=None, seed=0, tolerance=DEFAULT_TOLERANCE, threads=1):
    """Certificates per region, computed concurrently, keyed by region name."""

    def run(reg):
        return certify(reg.model, p, grid=grid, seed=seed, tolerance=tolerance, model_id=f"{reg.name} {reg.note}")

    regions = list(assembly.regions)
    if threads > 1:
        with ThreadPoolExecutor(min(threads, len(regions))) as pool:
            certs = list(pool.map(run, regions))
    else:
        certs = [run(reg) for reg in regions]
    return {reg.name: cert for reg, cert in zip(regions, certs)}


def min_pair_curvature(model, grid=None):
    """Smallest coordinate-pair sectional curvature over a grid."""
    grid = grid or GridSpec()
    r, t = model.grid_points(grid)
    K = pair_curvatures(model, np.asarray(r, float), None if t is None else np.asarray(t, float))
    d = K.shape[-1]
    off = ~np.eye(d, dtype=bool)
    return float(np.min(K[..., off]))
