"""Holder potentials on the unit tangent bundle and their cocycles.

Potentials are evaluated at (base point, forward tangent) pairs; tangents
are Euclidean complex numbers of hyperbolic norm 1 (|w| = Im z).  Built-in
kinds:

    zero, constant          trivial weights with closed-form integrals
    bump_orbit              sum over the group orbit of o of a smooth
                            compactly supported bump of the distance
    directional_orbit       each bump term additionally modulated by the
                            angle between the vector and the direction to
                            the orbit point, which breaks the v -> -v
                            symmetry

Orbit sums are locally finite by construction: supports must be pairwise
disjoint (bump radius below half the minimal orbit spacing), so at most one
term is alive at any point.  Geodesic integrals of orbit potentials reduce
to one closed-form 1D profile per orbit point near the segment; in the
frame where the geodesic is the imaginary axis and the orbit point pulls
back to w = a + bi,

    cosh d(i e^t, w) = cosh(rho) cosh(t - t_p),   cosh rho = |w|/b,  t_p = log|w|,

and the angle factor is cos(theta) = N / hypot(2 a y, N) with N = |w|^2 - y^2,
y = e^t.  Everything else is Gauss-Legendre on the bump windows.

The long-range cocycle rho^f_xi(x, y) is the truncated difference of two
geodesic integrals toward xi; the horizon is chosen from the declared
Holder data so the tail stays below the requested tolerance (times a
configurable safety factor, since the paper-level constants are not sharp).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .geometry import (
    ORIGIN,
    BoundaryPoint,
    Isometry,
    UnitTangentHopf,
    base_point,
    busemann,
    forward_endpoint,
    geodesic_frame,
    hyp_distance,
)
from .group import SchottkyGroup

__all__ = [
    "Potential",
    "ZeroPotential",
    "ConstantPotential",
    "OrbitPotential",
    "make_potential",
    "check_potential",
    "GeodesicChart",
    "geodesic_integral",
    "rho_cocycle",
    "rho_leaf",
    "c_cocycle",
    "beta_f",
    "horizon_for",
]

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)
_GL3_NODES, _GL3_WEIGHTS = np.polynomial.legendre.leggauss(3)

DEFAULT_TOL = 1e-4
DEFAULT_SAFETY = 10.0


# ---------------------------------------------------------------------------
# geodesic charts
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GeodesicChart:
    """Oriented geodesic as t -> g(i e^t), unit speed."""

    g: Isometry

    @staticmethod
    def from_endpoints(xi_minus: BoundaryPoint, xi_plus: BoundaryPoint) -> "GeodesicChart":
        return GeodesicChart(geodesic_frame(xi_minus, xi_plus))

    @staticmethod
    def through_points(x: complex, y: complex) -> tuple["GeodesicChart", float, float]:
        """Chart oriented from x to y plus the two parameters."""
        if abs(x - y) < 1e-15:
            raise ValueError("coincident points do not orient a geodesic")
        if abs(x.real - y.real) < 1e-12 * (1.0 + abs(x - y)):
            w = 1j if y.imag > x.imag else -1j
        else:
            c = (abs(y) ** 2 - abs(x) ** 2) / (2.0 * (y.real - x.real))
            w = -1j * (x - c) * math.copysign(1.0, y.real - x.real)
        back, fwd = forward_endpoint(x, w)
        chart = GeodesicChart(geodesic_frame(back, fwd))
        return chart, chart.tparam(x), chart.tparam(y)

    @staticmethod
    def ray(x: complex, xi: BoundaryPoint, length: float) -> tuple["GeodesicChart", float, float]:
        """Chart along the ray [x, xi), parameters for x and the horizon point."""
        if xi.is_infinity:
            back = BoundaryPoint.from_real(x.real)
        else:
            v = xi.value
            if abs(x.real - v) < 1e-12 * (1.0 + abs(v)):
                back = BoundaryPoint.infinity()
            else:
                c = (abs(x) ** 2 - v * v) / (2.0 * (x.real - v))
                back = BoundaryPoint.from_real(2.0 * c - v)
        chart = GeodesicChart(geodesic_frame(back, xi))
        t0 = chart.tparam(x)
        return chart, t0, t0 + length

    def tparam(self, z: complex) -> float:
        g = self.g
        w = (g.d * z - g.b) / (-g.c * z + g.a)
        return math.log(abs(w))

    def point(self, t):
        g = self.g
        w = 1j * np.exp(np.asarray(t, dtype=float))
        return (g.a * w + g.b) / (g.c * w + g.d)

    def tangent(self, t):
        g = self.g
        w = 1j * np.exp(np.asarray(t, dtype=float))
        return w / (g.c * w + g.d) ** 2

    def pullback(self, pts: np.ndarray) -> np.ndarray:
        g = self.g
        pts = np.asarray(pts, dtype=complex)
        return (g.d * pts - g.b) / (-g.c * pts + g.a)


# ---------------------------------------------------------------------------
# potential kinds
# ---------------------------------------------------------------------------

class Potential:
    """Base: a Holder function of unit tangent vectors with declared data."""

    key: str
    holder_exponent: float
    holder_constant: float
    sup_norm: float
    symmetric: bool

    def value(self, z: complex, w: complex) -> float:
        raise NotImplementedError

    def values(self, zs: np.ndarray, ws: np.ndarray) -> np.ndarray:
        return np.array([self.value(z, w) for z, w in zip(zs, ws)])

    def value_at(self, v: UnitTangentHopf) -> float:
        from .geometry import vector_from_hopf

        z, w = vector_from_hopf(v)
        return self.value(z, w)

    def antipodal(self) -> "Potential":
        raise NotImplementedError

    def segment_integral(self, chart: GeodesicChart, t0: float, t1: float, extra_points=None):
        """Closed-form fast path; None means fall back to quadrature."""
        return None


class ZeroPotential(Potential):
    key = "zero"
    holder_exponent = 1.0
    holder_constant = 0.0
    sup_norm = 0.0
    symmetric = True

    def value(self, z, w):
        return 0.0

    def values(self, zs, ws):
        return np.zeros(np.shape(zs))

    def antipodal(self):
        return self

    def segment_integral(self, chart, t0, t1, extra_points=None):
        return 0.0


class ConstantPotential(Potential):
    holder_exponent = 1.0
    holder_constant = 0.0
    symmetric = True

    def __init__(self, c: float):
        self.c = float(c)
        self.key = f"constant:{self.c!r}"
        self.sup_norm = abs(self.c)

    def value(self, z, w):
        return self.c

    def values(self, zs, ws):
        return np.full(np.shape(zs), self.c)

    def antipodal(self):
        return self

    def segment_integral(self, chart, t0, t1, extra_points=None):
        return self.c * (t1 - t0)


def _bump(x: np.ndarray) -> np.ndarray:
    """Mollifier exp(1 - 1/(1 - x^2)) on |x| < 1, extended by 0."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inside = np.abs(x) < 1.0
    u = 1.0 - x[inside] ** 2
    out[inside] = np.exp(1.0 - 1.0 / u)
    return out


class OrbitPotential(Potential):
    """Locally finite orbit sum of bumps, optionally angle-modulated.

    f(z, w) = amplitude * sum_p bump(d(z, p)/radius) * h, where p runs over
    the orbit of o and h = 1 (symmetric kind) or (1 + tanh(d) cos(theta))/2
    with theta the angle at z between w and the direction to p (directional
    kind; the tanh factor keeps the term smooth at the orbit point).

    The declared Holder data is derived from the mollifier: the bump's
    Lipschitz constant is at most 8/e per unit of x, so

        C(f) <= amplitude * (8/(e radius) + [directional] * 2),  alpha = 1.

    Supports must be pairwise disjoint: radius < half the minimal orbit
    spacing, otherwise construction fails (term-cap guard).
    """

    holder_exponent = 1.0

    def __init__(
        self,
        group: SchottkyGroup,
        amplitude: float = 0.5,
        radius: float = 0.8,
        directional: bool = False,
        core_reach: float = 22.0,
        flip: bool = False,
    ):
        self.group = group
        self.amplitude = float(amplitude)
        self.radius = float(radius)
        self.directional = bool(directional)
        self.core_reach = float(core_reach)
        self.flip = bool(flip)
        kind = "directional_orbit" if directional else "bump_orbit"
        self.key = f"{kind}:{self.amplitude!r}:{self.radius!r}:{'-' if flip else '+'}"
        self.symmetric = not directional
        self.sup_norm = self.amplitude
        self.holder_constant = self.amplitude * (8.0 / (math.e * self.radius) + (2.0 if directional else 0.0))

        self.core_points, _ = group.orbit_within(self.core_reach)
        spacing = _min_spacing(self.core_points)
        if not self.radius < 0.5 * spacing:
            raise ValueError(
                f"bump radius {self.radius} exceeds the term cap: orbit spacing is "
                f"{spacing:.3f}, so supports would overlap"
            )
        self._tree = cKDTree(np.column_stack([self.core_points.real, self.core_points.imag]))
        self.coverage_radius = self.core_reach - self.radius

    # -- evaluation ----------------------------------------------------------

    def _nearby(self, z: complex) -> np.ndarray:
        if hyp_distance(ORIGIN, z) > self.coverage_radius:
            raise ValueError(
                f"evaluation point at distance {hyp_distance(ORIGIN, z):.2f} from o "
                f"is outside the indexed orbit region ({self.coverage_radius:.2f})"
            )
        center = np.array([z.real, z.imag * math.cosh(self.radius)])
        idx = self._tree.query_ball_point(center, z.imag * math.sinh(self.radius) + 1e-12)
        return self.core_points[idx]

    def value(self, z: complex, w: complex) -> float:
        pts = self._nearby(z)
        if pts.size == 0:
            return 0.0
        return float(self._terms(np.array([z]), np.array([w]), pts[None, :]).sum())

    def values(self, zs, ws):
        zs = np.asarray(zs, dtype=complex)
        ws = np.asarray(ws, dtype=complex)
        out = np.empty(zs.shape, dtype=float)
        flat_z, flat_w, flat_o = zs.ravel(), ws.ravel(), out.ravel()
        chunk = 4096
        for i in range(0, flat_z.size, chunk):
            zc, wc = flat_z[i : i + chunk], flat_w[i : i + chunk]
            flat_o[i : i + chunk] = self._terms(zc, wc, self.core_points[None, :]).sum(axis=1)
        return out

    def _terms(self, zs, ws, pts) -> np.ndarray:
        """Per-(point, orbit) term values; zs (n,), pts broadcastable (n, m)."""
        zs = zs[:, None]
        coshd = 1.0 + np.abs(zs - pts) ** 2 / (2.0 * zs.imag * pts.imag)
        d = np.arccosh(np.maximum(coshd, 1.0))
        val = self.amplitude * _bump(d / self.radius)
        if self.directional:
            live = val > 0.0
            cos = np.zeros_like(val)
            if live.any():
                zz = np.broadcast_to(zs, val.shape)[live]
                pp = np.broadcast_to(pts, val.shape)[live]
                www = np.broadcast_to(ws[:, None], val.shape)[live]
                cos[live] = _cos_angle_toward(zz, www, pp)
            sgn = -1.0 if self.flip else 1.0
            val = val * 0.5 * (1.0 + sgn * np.tanh(d) * cos)
        return val

    def antipodal(self):
        if self.symmetric:
            return self
        return OrbitPotential(
            self.group,
            amplitude=self.amplitude,
            radius=self.radius,
            directional=True,
            core_reach=self.core_reach,
            flip=not self.flip,
        )

    # -- closed-form segment integration --------------------------------------

    def segment_integral(self, chart: GeodesicChart, t0: float, t1: float, extra_points=None) -> float:
        if t1 < t0:
            return -self.segment_integral(chart, t1, t0, extra_points)
        pts = self.core_points
        if extra_points is not None and len(extra_points):
            pts = np.concatenate([pts, np.asarray(extra_points, dtype=complex)])
        w = chart.pullback(pts)
        return float(self.profile_integrals(w[None, :], np.array([t0]), np.array([t1]))[0])

    def profile_integrals(self, w: np.ndarray, t0: np.ndarray, t1: np.ndarray) -> np.ndarray:
        """Integrals over [t0_i, t1_i] of the orbit sum along standardized
        geodesics; w is the (n, m) array of pulled-back orbit points."""
        absw = np.abs(w)
        coshr = absw / w.imag
        tp = np.log(absw)
        cap = math.cosh(self.radius)
        lo = np.maximum(t0[:, None], tp - self.radius)
        hi = np.minimum(t1[:, None], tp + self.radius)
        live = (coshr < cap) & (hi > lo)
        iw, ip = np.nonzero(live)
        if iw.size == 0:
            return np.zeros(t0.shape)
        # candidate lists may mention the same orbit point several times (hint
        # clouds overlap); live points are >= the orbit spacing apart, so a
        # rounded (word, t_p, cosh rho) key separates them safely
        rec = np.stack([iw.astype(float), np.round(tp[live] * 1e7), np.round(coshr[live] * 1e7)], axis=1)
        _, uniq = np.unique(rec, axis=0, return_index=True)
        if uniq.size != iw.size:
            uniq.sort()
            flat = np.flatnonzero(live.ravel())[uniq]
            live = np.zeros(live.shape, dtype=bool).ravel()
            live[flat] = True
            live = live.reshape(coshr.shape)
            iw, ip = np.nonzero(live)
        # clip to the exact support window |t - tp| <= umax
        umax = np.arccosh(cap / coshr[live])
        a_lo = np.maximum(lo[live], tp[live] - umax)
        a_hi = np.minimum(hi[live], tp[live] + umax)
        span = np.maximum(a_hi - a_lo, 0.0)
        mid = 0.5 * (a_lo + a_hi)
        tnodes = mid[:, None] + 0.5 * span[:, None] * _GL_NODES[None, :]
        u = tnodes - tp[live][:, None]
        coshd = coshr[live][:, None] * np.cosh(u)
        d = np.arccosh(np.maximum(coshd, 1.0))
        vals = self.amplitude * _bump(d / self.radius)
        if self.directional:
            y = np.exp(tnodes)
            n2 = (absw[live] ** 2)[:, None] - y * y
            a = w.real[live][:, None]
            denom = np.hypot(2.0 * a * y, n2)
            cos = np.where(denom > 0, n2 / np.where(denom > 0, denom, 1.0), 0.0)
            sgn = -1.0 if self.flip else 1.0
            vals = vals * 0.5 * (1.0 + sgn * np.tanh(d) * cos)
        contrib = 0.5 * span * (vals * _GL_WEIGHTS[None, :]).sum(axis=1)
        out = np.zeros(t0.shape)
        np.add.at(out, iw, contrib)
        return out


def _cos_angle_toward(zs: np.ndarray, ws: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """cos of the angle at z between tangent w and the geodesic toward p."""
    dx = pts.real - zs.real
    vertical = np.abs(dx) < 1e-13 * (1.0 + np.abs(pts - zs))
    out = np.empty(zs.shape, dtype=float)
    if vertical.any():
        t = 1j * np.sign(pts.imag[vertical] - zs.imag[vertical])
        out[vertical] = (np.conj(ws[vertical]) * t).real / np.abs(ws[vertical])
    nv = ~vertical
    if nv.any():
        z, p, wv = zs[nv], pts[nv], ws[nv]
        c = (np.abs(p) ** 2 - np.abs(z) ** 2) / (2.0 * (p.real - z.real))
        t = -1j * (z - c) * np.sign(p.real - z.real)
        out[nv] = (np.conj(wv) * t).real / (np.abs(wv) * np.abs(z - c))
    return out


def _min_spacing(pts: np.ndarray) -> float:
    z = pts[:, None]
    coshd = 1.0 + np.abs(z - pts[None, :]) ** 2 / (2.0 * z.imag * pts.imag[None, :])
    np.fill_diagonal(coshd, np.inf)
    return float(np.arccosh(coshd.min()))


def make_potential(group: SchottkyGroup, kind: str, **params) -> Potential:
    """Factory for the built-in kinds: zero, constant, bump_orbit, directional_orbit."""
    if kind == "zero":
        return ZeroPotential()
    if kind == "constant":
        return ConstantPotential(params.get("c", 1.0))
    if kind == "bump_orbit":
        return OrbitPotential(group, directional=False, **params)
    if kind == "directional_orbit":
        return OrbitPotential(group, directional=True, **params)
    raise ValueError(f"unknown potential kind {kind!r}")


def check_potential(f: Potential) -> Potential:
    """The antipodal potential v -> f(-v); an involution, f itself when symmetric."""
    return f.antipodal()


# ---------------------------------------------------------------------------
# integrals and cocycles
# ---------------------------------------------------------------------------

def geodesic_integral(
    f: Potential,
    x: complex,
    y: complex,
    step: float = 0.05,
    extra_points=None,
) -> float:
    """Integral of f along the oriented geodesic from x to y."""
    if abs(x - y) < 1e-15:
        return 0.0
    chart, t0, t1 = GeodesicChart.through_points(x, y)
    fast = f.segment_integral(chart, t0, t1, extra_points=extra_points)
    if fast is not None:
        return fast
    return _quadrature(f, chart, t0, t1, step)


def _quadrature(f: Potential, chart: GeodesicChart, t0: float, t1: float, step: float) -> float:
    n = max(1, int(math.ceil(abs(t1 - t0) / step)))
    edges = np.linspace(t0, t1, n + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * (edges[1:] - edges[:-1])
    tnodes = (mid[:, None] + half[:, None] * _GL3_NODES[None, :]).ravel()
    zs = chart.point(tnodes)
    ws = chart.tangent(tnodes)
    vals = f.values(zs, ws).reshape(n, -1)
    return float((half * (vals * _GL3_WEIGHTS[None, :]).sum(axis=1)).sum())


def horizon_for(f: Potential, x: complex, y: complex, tol: float, safety: float = DEFAULT_SAFETY) -> float:
    """Truncation horizon making the Holder tail of rho^f smaller than tol.

    The two rays toward the same boundary point converge like e^{d(x,y)} e^{-t},
    so the tail after T is at most C(f) safety e^{alpha d(x,y)} e^{-alpha T}/alpha.
    """
    alpha = f.holder_exponent
    c = max(f.holder_constant, 1e-12)
    T = hyp_distance(x, y) + math.log(max(c * safety / (alpha * tol), 2.0)) / alpha
    return min(max(T, 6.0), 42.0)


def rho_cocycle(
    f: Potential,
    xi: BoundaryPoint,
    x: complex,
    y: complex,
    tol: float = DEFAULT_TOL,
    safety: float = DEFAULT_SAFETY,
    horizon: float | None = None,
    extra_points=None,
) -> float:
    """Truncated cocycle rho^f_xi(x, y): integral difference toward xi.

    Exact for zero and constant potentials (c times the Busemann cocycle).
    """
    if isinstance(f, ZeroPotential):
        return 0.0
    if isinstance(f, ConstantPotential):
        return f.c * busemann(xi, x, y)
    if abs(x - y) < 1e-15:
        return 0.0
    T = horizon if horizon is not None else horizon_for(f, x, y, tol, safety)
    chart, t0, _ = GeodesicChart.ray(x, xi, T)
    horizon_pt = chart.point(t0 + T)
    ix = f.segment_integral(chart, t0, t0 + T, extra_points=extra_points)
    if ix is None:
        ix = _quadrature(f, chart, t0, t0 + T, 0.05)
    iy = geodesic_integral(f, y, complex(horizon_pt), extra_points=extra_points)
    return ix - iy


def rho_leaf(
    f: Potential,
    v: UnitTangentHopf,
    w: UnitTangentHopf,
    tol: float = DEFAULT_TOL,
    leaf_tol: float = 1e-9,
    **kw,
) -> float:
    """Cocycle on a strong unstable leaf: rho^f_{v-}(pi v, pi w)."""
    if not v.xi_minus.same_as(w.xi_minus) or abs(v.s - w.s) > leaf_tol:
        raise ValueError("vectors are not on a common strong unstable horosphere")
    return rho_cocycle(f, v.xi_minus, base_point(v), base_point(w), tol=tol, **kw)


def c_cocycle(f: Potential, g: Isometry, xi: BoundaryPoint, tol: float = DEFAULT_TOL, **kw) -> float:
    """Boundary group cocycle c_o^f(g, xi) = -rho^f_xi(o, g^{-1} o)."""
    return -rho_cocycle(f, xi, ORIGIN, g.inverse().apply_point(ORIGIN), tol=tol, **kw)


def beta_f(
    f: Potential,
    delta: float,
    xi: BoundaryPoint,
    x: complex,
    y: complex,
    tol: float = DEFAULT_TOL,
    **kw,
) -> float:
    """Radon-Nikodym cocycle delta * busemann - rho^f."""
    return delta * busemann(xi, x, y) - rho_cocycle(f, xi, x, y, tol=tol, **kw)
