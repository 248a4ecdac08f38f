"""Smooth warping profiles carrying analytic first and second derivatives.

Every profile evaluates vectorised over numpy arrays and returns the triple
``(value, d1, d2)``.  Two-variable profiles return ``(value, dr, dt, drr)``.
Values that are only known through their derivative (the torpedo function
and the companion of a warping function) are tabulated on Gauss-Legendre
panels, so the tabulated value stays smooth to rounding error between knots.
"""

from __future__ import annotations

import functools
import math

import numpy as np
from scipy import integrate, interpolate, special

from .errors import (
    DomainError,
    InvalidL,
    InvalidParams,
    LambdaTooSmall,
    QuadratureFailure,
    SlopeViolation,
)

__all__ = [
    "bump_mu",
    "mu_L",
    "mu_derivative_sups",
    "torpedo_eta",
    "torpedo_constant",
    "simpson_torpedo_constant",
    "alpha_from_beta",
    "toe_omega",
    "bend_omega",
    "WarpingProfile",
    "TwoVarProfile",
    "ConstantProfile",
    "SineProfile",
    "TorpedoProfile",
    "ReversedProfile",
    "AlphaProfile",
    "PolynomialProfile",
    "ComposedProfile",
    "BumpRamp",
    "BumpPlateauBump",
    "TabulatedProfile",
    "FlippedSecondDerivative",
    "LiftedProfile",
    "ConstantTwoVar",
    "ToeOmega",
    "BendOmega",
    "profile_rows",
]

_GL_X, _GL_W = np.polynomial.legendre.leggauss(20)
# beyond this distance from 0 or 1 the bump is exactly 0 or 1 in doubles
_MU_EDGE = 1e-3


def _scalar_or_array(x, arrays):
    if np.ndim(x) == 0:
        return tuple(float(a) for a in arrays)
    return tuple(arrays)


def bump_mu(t):
    """Smooth step: 0 for t <= 0, 1 for t >= 1, flat to all orders at both ends.

    Returns ``(value, d1, d2)``; scalars in, floats out.
    """
    x = np.asarray(t, dtype=float)
    value = np.where(x >= 1.0, 1.0, 0.0)
    d1 = np.zeros_like(value)
    d2 = np.zeros_like(value)
    inner = (x > _MU_EDGE) & (x < 1.0 - _MU_EDGE)
    if np.any(inner):
        u = x[inner]
        phi = 1.0 / u - 1.0 / (1.0 - u)
        m = special.expit(-phi)
        w = m * special.expit(phi)  # m(1-m) without cancellation
        q = 1.0 / u**2 + 1.0 / (1.0 - u) ** 2
        dq = -2.0 / u**3 + 2.0 / (1.0 - u) ** 3
        value[inner] = m
        d1[inner] = w * q
        d2[inner] = w * ((1.0 - 2.0 * m) * q * q + dq)
    # the flat fringe still carries the (sub-1e-300) value for continuity
    fringe = (x > 0.0) & (x <= _MU_EDGE)
    value[fringe] = special.expit(-(1.0 / x[fringe] - 1.0 / (1.0 - x[fringe])))
    fringe = (x < 1.0) & (x >= 1.0 - _MU_EDGE)
    value[fringe] = special.expit(-(1.0 / x[fringe] - 1.0 / (1.0 - x[fringe])))
    return _scalar_or_array(t, (value, d1, d2))


def mu_L(L, t):
    """The bump stretched to rise over [1, L+1]."""
    if not L > 0:
        raise InvalidL(f"L must be positive, got {L}")
    v, d1, d2 = bump_mu((np.asarray(t, dtype=float) - 1.0) / L)
    return _scalar_or_array(t, (v, np.asarray(d1) / L, np.asarray(d2) / L**2))


@functools.lru_cache(maxsize=None)
def mu_derivative_sups(samples: int = 1_000_001):
    """sup|mu'| and sup|mu''| on a dense grid of [0, 1]; cached."""
    _, d1, d2 = bump_mu(np.linspace(0.0, 1.0, samples))
    return float(np.max(np.abs(d1))), float(np.max(np.abs(d2)))


def _check_domain(r, lo, hi, name="r"):
    arr = np.asarray(r, dtype=float)
    slack = 1e-12 * max(1.0, abs(lo), abs(hi))
    if arr.size and (np.min(arr) < lo - slack or np.max(arr) > hi + slack):
        raise DomainError(f"{name} outside [{lo}, {hi}]")
    return np.clip(arr, lo, hi)


class _PanelIntegral:
    """Cumulative integral of a smooth integrand, tabulated on fixed panels."""

    def __init__(self, integrand, a, b, panels):
        self.integrand = integrand
        self.knots = np.linspace(a, b, panels + 1)
        pieces = self._gauss(self.knots[:-1], self.knots[1:])
        self.cumulative = np.concatenate([[0.0], np.cumsum(pieces)])
        self.total = float(self.cumulative[-1])

    def _gauss(self, lo, hi):
        half = 0.5 * (hi - lo)
        mid = 0.5 * (hi + lo)
        nodes = mid[..., None] + half[..., None] * _GL_X
        return half * (self.integrand(nodes) @ _GL_W)

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        j = np.clip(np.searchsorted(self.knots, r, side="right") - 1, 0, len(self.knots) - 2)
        start = self.knots[j]
        return self.cumulative[j] + self._gauss(start, r)


class WarpingProfile:
    """A function of one variable with analytic value, d1 and d2."""

    domain: tuple = (0.0, 1.0)
    positivity_floor: float | None = 0.0
    length_scale: float = 1.0

    def evaluate(self, r):
        raise NotImplementedError

    def __call__(self, r):
        return self.evaluate(r)

    def value(self, r):
        return self.evaluate(r)[0]

    def slope_complement(self, r):
        """(sqrt(1 - d1^2), its derivative)."""
        _, d1, d2 = self.evaluate(r)
        s = np.sqrt(np.clip(1.0 - d1 * d1, 0.0, None))
        with np.errstate(divide="ignore", invalid="ignore"):
            ds = np.where(s > 1e-12, -d1 * d2 / s, 0.0)
        return s, ds

    def axis_ends(self, tol=1e-9):
        """Domain endpoints where the profile closes up smoothly (value 0, |d1| = 1)."""
        ends = []
        for end, sign in ((self.domain[0], 1.0), (self.domain[1], -1.0)):
            v, d1, _ = self.evaluate(np.array(end))
            if abs(v) < tol * self.length_scale and abs(sign * d1 - 1.0) < tol:
                ends.append(float(end))
        return tuple(ends)


class ConstantProfile(WarpingProfile):
    def __init__(self, c, domain=(0.0, 1.0)):
        self.c = float(c)
        self.domain = tuple(float(x) for x in domain)
        self.length_scale = abs(self.c) or 1.0

    def evaluate(self, r):
        r = _check_domain(r, *self.domain)
        z = np.zeros_like(r)
        return z + self.c, z, z.copy()

    def __repr__(self):
        return f"ConstantProfile({self.c}, {self.domain})"


class SineProfile(WarpingProfile):
    """delta * sin(r / delta): the round sphere of radius delta in polar form."""

    def __init__(self, delta=1.0, domain=None):
        if delta <= 0:
            raise InvalidParams("delta must be positive")
        self.delta = float(delta)
        self.domain = tuple(domain) if domain is not None else (0.0, math.pi * self.delta)
        self.length_scale = self.delta

    def evaluate(self, r):
        r = _check_domain(r, *self.domain)
        x = r / self.delta
        return self.delta * np.sin(x), np.cos(x), -np.sin(x) / self.delta

    def slope_complement(self, r):
        r = _check_domain(r, *self.domain)
        x = r / self.delta
        s = np.sin(x)
        return np.abs(s), np.sign(s) * np.cos(x) / self.delta

    def __repr__(self):
        return f"SineProfile(delta={self.delta})"


class TorpedoProfile(WarpingProfile):
    """The torpedo function: a round cap of radius delta closing into a neck.

    Equal to ``delta*sin(r/delta)`` up to ``pi*delta/4``, constant beyond
    ``pi*delta/2`` (the neck, of length ``lam``), and in between the integral
    of ``cos(r/delta) * mu(2 - 4r/(delta*pi))``.
    """

    panels = 256

    def __init__(self, delta, lam=0.0):
        if not delta > 0 or lam < 0:
            raise InvalidParams(f"need delta > 0 and lambda >= 0, got {delta}, {lam}")
        self.delta = float(delta)
        self.lam = float(lam)
        self.sine_end = math.pi * self.delta / 4
        self.cap_end = math.pi * self.delta / 2
        self.b = self.cap_end + self.lam
        self.domain = (0.0, self.b)
        self.length_scale = self.delta
        self._tail = _PanelIntegral(lambda u: self._d1(u)[0], self.sine_end, self.cap_end, self.panels)
        self.neck_radius = self.delta * math.sin(math.pi / 4) + self._tail.total

    def _d1(self, r):
        x = r / self.delta
        m, m1, _ = bump_mu(2.0 - 4.0 * r / (self.delta * math.pi))
        d1 = np.cos(x) * m
        d2 = -np.sin(x) / self.delta * m - 4.0 / (self.delta * math.pi) * np.cos(x) * m1
        return d1, d2

    def evaluate(self, r):
        r = _check_domain(r, *self.domain)
        d1, d2 = self._d1(r)
        # beyond the cap the bump is exactly zero; drop the -0.0 from cos < 0
        d1 = np.where(r >= self.cap_end, 0.0, d1)
        d2 = np.where(r >= self.cap_end, 0.0, d2)
        mid = self.delta * math.sin(math.pi / 4) + self._tail(np.clip(r, self.sine_end, self.cap_end))
        value = np.where(
            r <= self.sine_end,
            self.delta * np.sin(r / self.delta),
            np.where(r >= self.cap_end, self.neck_radius, mid),
        )
        return value, d1, d2

    def slope_complement(self, r):
        r = _check_domain(r, *self.domain)
        s, ds = WarpingProfile.slope_complement(self, r)
        x = r / self.delta
        cap = r <= self.sine_end
        return np.where(cap, np.sin(x), s), np.where(cap, np.cos(x) / self.delta, ds)

    def __repr__(self):
        return f"TorpedoProfile(delta={self.delta}, lam={self.lam})"


def torpedo_eta(delta, lam, r):
    """Torpedo function value and derivatives at r; floats for scalar r."""
    prof = _torpedo_cached(float(delta), float(lam))
    return _scalar_or_array(r, prof.evaluate(r))


@functools.lru_cache(maxsize=64)
def _torpedo_cached(delta, lam):
    return TorpedoProfile(delta, lam)


def torpedo_constant(quad_tol=1e-10, delta=1.0):
    """Neck radius over cap radius, by adaptive quadrature of the derivative law."""
    if not quad_tol > 0:
        raise InvalidParams("quad_tol must be positive")

    def integrand(r):
        return math.cos(r / delta) * float(bump_mu(2.0 - 4.0 * r / (delta * math.pi))[0])

    # the integrand is exactly cos on the first half; split there
    a = delta * math.sin(math.pi / 4)
    b, err = integrate.quad(
        integrand, math.pi * delta / 4, math.pi * delta / 2, epsabs=quad_tol * delta, epsrel=0.0, limit=200
    )
    if not err <= quad_tol * delta:
        raise QuadratureFailure(f"error estimate {err} above {quad_tol}")
    return (a + b) / delta


def simpson_torpedo_constant(panels=1_000_000):
    """Composite Simpson rule over the whole cap, for delta = 1."""
    if panels % 2:
        panels += 1
    u = np.linspace(0.0, math.pi / 2, panels + 1)
    f = np.cos(u) * bump_mu(2.0 - 4.0 * u / math.pi)[0]
    h = u[1] - u[0]
    return float(h / 3 * (f[0] + f[-1] + 4 * f[1:-1:2].sum() + 2 * f[2:-1:2].sum()))


class ReversedProfile(WarpingProfile):
    """r -> base(a + b - r) on the same interval [a, b]."""

    def __init__(self, base):
        self.base = base
        self.domain = base.domain
        self.length_scale = base.length_scale
        self.positivity_floor = base.positivity_floor

    def _mirror(self, r):
        r = _check_domain(r, *self.domain)
        return self.domain[0] + self.domain[1] - r

    def evaluate(self, r):
        v, d1, d2 = self.base.evaluate(self._mirror(r))
        return v, -d1, d2

    def slope_complement(self, r):
        s, ds = self.base.slope_complement(self._mirror(r))
        return s, -ds

    def __repr__(self):
        return f"ReversedProfile({self.base!r})"


class AlphaProfile(WarpingProfile):
    """alpha(r) = integral from r to b/2 of sqrt(1 - beta'(u)^2)."""

    panels = 512

    def __init__(self, beta, b):
        self.beta = beta
        self.b = float(b)
        self.domain = (0.0, self.b)
        self.length_scale = beta.length_scale
        self.positivity_floor = None
        probe = np.linspace(0.0, self.b, 4001)
        slope = np.max(np.abs(beta.evaluate(probe)[1]))
        if slope > 1.0 + 1e-12:
            raise SlopeViolation(f"|beta'| reaches {slope}")
        self._cum = _PanelIntegral(lambda u: beta.slope_complement(u)[0], 0.0, self.b, self.panels)
        self._anchor = float(self._cum(np.array(self.b / 2)))

    def evaluate(self, r):
        r = _check_domain(r, *self.domain)
        # (r, t) grids repeat each r many times
        u, inv = np.unique(r, return_inverse=True)
        s, ds = self.beta.slope_complement(u)
        value = self._anchor - self._cum(u)
        shape = np.shape(r)
        return value[inv].reshape(shape), -s[inv].reshape(shape), -ds[inv].reshape(shape)

    def max_abs(self):
        # the derivative is -sqrt(...) <= 0, so the extremes sit at the ends
        v = self.evaluate(np.array([0.0, self.b]))[0]
        return float(np.max(np.abs(v)))

    def __repr__(self):
        return f"AlphaProfile({self.beta!r}, b={self.b})"


def alpha_from_beta(beta, b):
    return AlphaProfile(beta, b)


class PolynomialProfile(WarpingProfile):
    def __init__(self, coeffs, domain=(0.0, 1.0)):
        self.poly = np.polynomial.Polynomial(coeffs)
        self.domain = tuple(float(x) for x in domain)
        self._d1 = self.poly.deriv()
        self._d2 = self._d1.deriv()

    def evaluate(self, r):
        r = _check_domain(r, *self.domain)
        return self.poly(r), self._d1(r), self._d2(r)

    def __repr__(self):
        return f"PolynomialProfile({list(self.poly.coef)}, {self.domain})"


class ComposedProfile(WarpingProfile):
    """outer(inner(t)) by the chain rule."""

    def __init__(self, outer, inner):
        self.outer = outer
        self.inner = inner
        self.domain = inner.domain
        self.positivity_floor = outer.positivity_floor

    def evaluate(self, t):
        f, f1, f2 = self.inner.evaluate(t)
        g, g1, g2 = self.outer.evaluate(f)
        return g, g1 * f1, g2 * f1 * f1 + g1 * f2

    def __repr__(self):
        return f"ComposedProfile({self.outer!r}, {self.inner!r})"


class BumpRamp(WarpingProfile):
    """mu(scale * (t - shift)), optionally descending (1 - mu)."""

    def __init__(self, scale, shift, domain, descending=False):
        if not scale > 0:
            raise InvalidParams("scale must be positive")
        self.scale = float(scale)
        self.shift = float(shift)
        self.domain = tuple(float(x) for x in domain)
        self.descending = descending

    def evaluate(self, t):
        t = _check_domain(t, *self.domain, name="t")
        v, d1, d2 = bump_mu(self.scale * (t - self.shift))
        d1 = np.asarray(d1) * self.scale
        d2 = np.asarray(d2) * self.scale**2
        if self.descending:
            return 1.0 - np.asarray(v), -d1, -d2
        return np.asarray(v), d1, d2

    @classmethod
    def mu_L(cls, L, margin=1.0):
        """The ramp rising over [1, L+1] on [0, L+2]."""
        if not L > 0:
            raise InvalidL(f"L must be positive, got {L}")
        return cls(1.0 / L, 1.0, (0.0, L + 1.0 + margin))

    def __repr__(self):
        return f"BumpRamp(scale={self.scale}, shift={self.shift}, descending={self.descending})"


class BumpPlateauBump(WarpingProfile):
    """Rise over [1, L+1], hold for ``plateau``, fall back over the next L."""

    def __init__(self, L, plateau=1.0):
        self.L = float(L)
        self.plateau = float(plateau)
        self.domain = (0.0, 2 * self.L + self.plateau + 2.0)

    def evaluate(self, t):
        t = _check_domain(t, *self.domain, name="t")
        up = bump_mu((t - 1.0) / self.L)
        down = bump_mu((t - 1.0 - self.L - self.plateau) / self.L)
        v = np.asarray(up[0]) - np.asarray(down[0])
        d1 = (np.asarray(up[1]) - np.asarray(down[1])) / self.L
        d2 = (np.asarray(up[2]) - np.asarray(down[2])) / self.L**2
        return v, d1, d2


class TabulatedProfile(WarpingProfile):
    """Cubic-spline interpolant through user-supplied samples."""

    def __init__(self, r, values):
        r = np.asarray(r, dtype=float)
        self.spline = interpolate.CubicSpline(r, np.asarray(values, dtype=float))
        self.domain = (float(r[0]), float(r[-1]))

    def evaluate(self, r):
        r = _check_domain(r, *self.domain)
        return self.spline(r), self.spline(r, 1), self.spline(r, 2)


class FlippedSecondDerivative(WarpingProfile):
    """Wraps a profile and negates its second derivative (fault injection)."""

    def __init__(self, base):
        self.base = base
        self.domain = base.domain
        self.length_scale = base.length_scale

    def evaluate(self, r):
        v, d1, d2 = self.base.evaluate(r)
        return v, d1, -d2

    def axis_ends(self, tol=1e-9):
        return self.base.axis_ends(tol)


class TwoVarProfile:
    """A function of (r, t) with value, dr, dt and drr."""

    r_domain: tuple = (0.0, 1.0)
    t_domain: tuple = (0.0, 1.0)
    positivity_floor: float = 0.0

    def evaluate(self, r, t):
        raise NotImplementedError

    def __call__(self, r, t):
        return self.evaluate(r, t)

    def value(self, r, t):
        return self.evaluate(r, t)[0]


class LiftedProfile(TwoVarProfile):
    """omega(r, t) = profile(r)."""

    def __init__(self, profile, t_domain):
        self.profile = profile
        self.r_domain = profile.domain
        self.t_domain = tuple(float(x) for x in t_domain)

    def evaluate(self, r, t):
        r, t = np.broadcast_arrays(np.asarray(r, float), np.asarray(t, float))
        _check_domain(t, *self.t_domain, name="t")
        v, d1, d2 = self.profile.evaluate(r)
        return v, d1, np.zeros_like(v), d2


class ConstantTwoVar(TwoVarProfile):
    def __init__(self, c, r_domain, t_domain):
        self.c = float(c)
        self.r_domain = tuple(float(x) for x in r_domain)
        self.t_domain = tuple(float(x) for x in t_domain)

    def evaluate(self, r, t):
        r, t = np.broadcast_arrays(np.asarray(r, float), np.asarray(t, float))
        _check_domain(r, *self.r_domain)
        _check_domain(t, *self.t_domain, name="t")
        z = np.zeros(r.shape)
        return z + self.c, z, z.copy(), z.copy()

    def __repr__(self):
        return f"ConstantTwoVar({self.c})"


def _fold(t):
    """Distance-like coordinate symmetric about pi/4, and the sign of d/dt."""
    u = np.minimum(t, math.pi / 2 - t)
    sign = np.where(t < math.pi / 4, 1.0, -1.0)
    return u, sign


class ToeOmega(TwoVarProfile):
    """The toe's circle warping: 1 at both ends, alpha(r) across [0, pi/2]."""

    def __init__(self, alpha, extent=1.0, lambda1=0.0, lambda2=0.0, r_domain=None):
        if extent <= 0 or lambda1 < 0 or lambda2 < 0:
            raise InvalidParams("extent must be positive and neck extensions nonnegative")
        self.alpha = alpha
        self.extent = float(extent)
        self.r_domain = tuple(r_domain) if r_domain is not None else alpha.domain
        self.t_domain = (-1.0 - extent - lambda1, math.pi / 2 + 1.0 + extent + lambda2)
        self.positivity_floor = min(1.0, float(np.min(alpha.value(np.linspace(*self.r_domain, 513)))))

    def evaluate(self, r, t):
        r, t = np.broadcast_arrays(np.asarray(r, float), np.asarray(t, float))
        r = _check_domain(r, *self.r_domain)
        t = _check_domain(t, *self.t_domain, name="t")
        a, a1, a2 = self.alpha.evaluate(r)
        u, sign = _fold(t)
        m, m1, _ = bump_mu(-u)
        m, m1 = np.asarray(m), np.asarray(m1)
        value = m + (1.0 - m) * a
        dt = sign * (-m1) * (1.0 - a)
        return value, (1.0 - m) * a1, dt, (1.0 - m) * a2


def toe_omega(alpha, extent=1.0, lambda1=0.0, lambda2=0.0, r_domain=None):
    return ToeOmega(alpha, extent, lambda1, lambda2, r_domain)


class BendOmega(TwoVarProfile):
    """The bend's circle warping: 1 at the ends, Lambda + alpha(r) across [0, pi/2]."""

    def __init__(self, Lambda, alpha):
        self.alpha = alpha
        self.max_abs_alpha = alpha.max_abs()
        if not Lambda > self.max_abs_alpha:
            raise LambdaTooSmall(f"Lambda={Lambda} must exceed max|alpha|={self.max_abs_alpha}")
        self.Lambda = float(Lambda)
        self.r_domain = alpha.domain
        self.t_domain = (-3.0, math.pi / 2 + 3.0)
        self.positivity_floor = min(1.0, self.Lambda - self.max_abs_alpha)

    def evaluate(self, r, t):
        r, t = np.broadcast_arrays(np.asarray(r, float), np.asarray(t, float))
        r = _check_domain(r, *self.r_domain)
        t = _check_domain(t, *self.t_domain, name="t")
        a, a1, a2 = self.alpha.evaluate(r)
        u, sign = _fold(t)
        outer, outer1, _ = (np.asarray(x) for x in bump_mu(2 * u + 4))
        inner, inner1, _ = (np.asarray(x) for x in bump_mu(2 * u + 1))
        value = 1.0 + (self.Lambda - 1.0) * outer + inner * a
        dt = sign * (2 * (self.Lambda - 1.0) * outer1 + 2 * inner1 * a)
        return value, inner * a1, dt, inner * a2


def bend_omega(Lambda, alpha):
    return BendOmega(Lambda, alpha)


def profile_rows(profile, rs):
    """Rows (r, value, d1, d2) for CSV output."""
    v, d1, d2 = profile.evaluate(np.asarray(rs, float))
    return np.column_stack([rs, v, d1, d2])
