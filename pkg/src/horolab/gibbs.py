"""Pressure, finite-level boundary measures, and the derived measure family.

The boundary measure of weight f at level L is atomic: one atom per reduced
word gamma with 1 <= |gamma| <= L, placed at the boundary direction of
gamma(o) seen from o, with weight exp(int_o^{gamma o} f - delta d(o, gamma o)),
normalized to a probability.  The pressure delta is estimated from the
weighted shell sums of the same enumeration.

All derived measures are finite sums over these atoms.  Two structural
facts keep everything cheap and exactly flow-compatible:

  * along a fixed geodesic (xi-, xi+), the combination
        rho^f_{xi+}(o, z) + rho^{f_check}_{xi-}(o, z)
    is constant in z, so quasi-product densities are computed once per
    atom pair and the flow acts exactly;
  * a geodesic crosses each half-disk boundary at most once (two geodesics
    meet at most once), so the fundamental-domain clip of any atom pair is
    a single parameter interval with closed-form ends.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .geometry import (
    ORIGIN,
    PROJ_TOL,
    BoundaryPoint,
    Horosphere,
    Isometry,
    UnitTangentHopf,
    base_point,
    busemann,
    busemann_many,
    gromov_origin_many,
    vector_from_hopf,
)
from .group import SchottkyGroup
from .potential import (
    DEFAULT_TOL,
    GeodesicChart,
    OrbitPotential,
    Potential,
    ZeroPotential,
    check_potential,
    geodesic_integral,
    horizon_for,
    rho_cocycle,
)

__all__ = [
    "AtomicMeasure",
    "GibbsSystem",
    "poincare_series",
    "shell_log_sums",
    "estimate_pressure",
    "build_patterson",
    "build_gibbs_system",
]

_shell_cache: dict = {}


# ---------------------------------------------------------------------------
# orbit shells: distances, potential integrals, directions per word length
# ---------------------------------------------------------------------------

def _directions_from(origin: complex, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Normalized boundary pairs of the forward endpoints of [origin, pt)."""
    dx = pts.real - origin.real
    vertical = np.abs(dx) < 1e-13 * (1.0 + np.abs(pts))
    with np.errstate(divide="ignore", invalid="ignore"):
        c = (np.abs(pts) ** 2 - abs(origin) ** 2) / (2.0 * dx)
        r = np.hypot(origin.real - c, origin.imag)
        val = c + np.sign(dx) * r
    p = np.where(vertical, np.where(pts.imag > origin.imag, 1.0, origin.real), val)
    q = np.where(vertical, np.where(pts.imag > origin.imag, 0.0, 1.0), 1.0)
    n = np.hypot(p, q)
    p, q = p / n, q / n
    neg = (q < 0) | ((q == 0) & (p < 0))
    return np.where(neg, -p, p), np.where(neg, -q, q)


def _hint_matrices(group: SchottkyGroup, level: int, idx: np.ndarray) -> list[np.ndarray]:
    """Ancestor matrices of the level-`level` words at indices idx.

    The enumeration is parent-major, so the ancestor chain is iterated
    integer division by (2k - 1)."""
    levels = group.level_arrays(level)
    out = []
    cur = np.asarray(idx)
    for lev in range(level, 0, -1):
        out.append(levels[lev][1][cur])
        cur = cur // (2 * group.rank - 1) if lev > 1 else cur * 0
    out.append(levels[0][1][np.zeros_like(cur)])
    return out[::-1]  # identity first


def shell_log_sums(group: SchottkyGroup, f: Potential, L: int, origin: complex = ORIGIN):
    """Per-length arrays (d, I) of distances d(o, gamma o) and integrals
    int_o^{gamma o} f, for 1 <= |gamma| <= L.  Cached."""
    key = (group.key, f.key, complex(origin))
    shells = _shell_cache.setdefault(key, [])
    if len(shells) >= L:
        return shells[:L]
    hint_cloud = None
    if isinstance(f, OrbitPotential):
        hint_cloud, _ = group.orbit_within(13.0)
    for lev in range(len(shells) + 1, L + 1):
        _, mats = group.level_arrays(lev)[lev]
        a, b = mats[:, 0, 0], mats[:, 0, 1]
        c, d = mats[:, 1, 0], mats[:, 1, 1]
        den = c * origin + d
        go = (a * origin + b) / den
        dist = np.arccosh(
            np.maximum(1.0 + np.abs(go - origin) ** 2 / (2.0 * go.imag * origin.imag), 1.0)
        )
        if isinstance(f, ZeroPotential):
            integrals = np.zeros_like(dist)
        elif f.holder_constant == 0.0 and f.sup_norm == abs(getattr(f, "c", 0.0)):
            integrals = getattr(f, "c", 0.0) * dist
        else:
            integrals = _bulk_orbit_integrals(group, f, lev, go, dist, origin, hint_cloud)
        shells.append((dist, integrals))
    return shells[:L]


def _bulk_orbit_integrals(group, f: OrbitPotential, lev, go, dist, origin, hint_cloud):
    """Integrals of an orbit potential along [origin, gamma o] for a whole level.

    Candidate orbit points per word: the hint cloud carried to every ancestor
    along the word (the segment fellow-travels its own prefix chain)."""
    n = go.size
    pm, qm = _directions_from(origin, go)  # forward endpoints
    # backward endpoints: reverse orientation
    pb, qb = _directions_from(origin, go)  # placeholder, recomputed below
    # frame arrays with g(0) = back, g(inf) = fwd
    dxr = go.real - origin.real
    vertical = np.abs(dxr) < 1e-13 * (1.0 + np.abs(go))
    with np.errstate(divide="ignore", invalid="ignore"):
        cc = (np.abs(go) ** 2 - abs(origin) ** 2) / (2.0 * dxr)
        rr = np.hypot(origin.real - cc, origin.imag)
        back_val = cc - np.sign(dxr) * rr
    pb = np.where(vertical, np.where(go.imag > origin.imag, origin.real, 1.0), back_val)
    qb = np.where(vertical, np.where(go.imag > origin.imag, 1.0, 0.0), 1.0)
    nb = np.hypot(pb, qb)
    pb, qb = pb / nb, qb / nb
    det = pm * qb - qm * pb
    s = 1.0 / np.sqrt(np.abs(det))
    sgn = np.sign(det)
    ga, gb = pm * s, sgn * pb * s
    gc, gd = qm * s, sgn * qb * s
    # parameters of origin and gamma o
    w0 = (gd * origin - gb) / (-gc * origin + ga)
    w1 = (gd * go - gb) / (-gc * go + ga)
    t0 = np.log(np.abs(w0))
    t1 = np.log(np.abs(w1))
    anc = _hint_matrices(group, lev, np.arange(n))
    cloud = hint_cloud
    m = cloud.size
    # pulled-back candidates: (g^{-1} anc_j)(cloud)
    chunks = max(1, int(math.ceil(n * (lev + 1) * m / 4.0e6)))
    out = np.zeros(n)
    for piece in np.array_split(np.arange(n), chunks):
        ws = []
        for mat in anc:
            sub = mat[piece]
            # compose g^{-1} with the ancestor matrix
            ca = gd[piece] * sub[:, 0, 0] - gb[piece] * sub[:, 1, 0]
            cb = gd[piece] * sub[:, 0, 1] - gb[piece] * sub[:, 1, 1]
            cc2 = -gc[piece] * sub[:, 0, 0] + ga[piece] * sub[:, 1, 0]
            cd2 = -gc[piece] * sub[:, 0, 1] + ga[piece] * sub[:, 1, 1]
            ws.append((ca[:, None] * cloud[None, :] + cb[:, None]) / (cc2[:, None] * cloud[None, :] + cd2[:, None]))
        w = np.concatenate(ws, axis=1)
        out[piece] = f.profile_integrals(w, t0[piece], t1[piece])
    return out


def poincare_series(group: SchottkyGroup, f: Potential, s: float, L: int, origin: complex = ORIGIN, log: bool = False):
    """Sum over |gamma| <= L of exp(int_o^{gamma o} f - s d(o, gamma o)).

    Includes the identity term (= 1); log=True returns the log of the sum."""
    if L < 1:
        raise ValueError("need L >= 1")
    shells = shell_log_sums(group, f, L, origin)
    logs = [0.0]
    for dist, integrals in shells:
        logs.append(logsumexp(integrals - s * dist))
    total = logsumexp(logs)
    return total if log else float(np.exp(total))


def _shell_ratio_root(shells, pairs) -> float:
    """Root in s of the mean log shell ratio over the given (lo, hi) pairs."""

    def val(s):
        acc = 0.0
        for lo, hi in pairs:
            d_lo, i_lo = shells[lo]
            d_hi, i_hi = shells[hi]
            acc += logsumexp(i_hi - s * d_hi) - logsumexp(i_lo - s * d_lo)
        return acc / len(pairs)

    lo, hi = -2.0, 4.0
    flo, fhi = val(lo), val(hi)
    for _ in range(60):
        if flo > 0 and fhi < 0:
            break
        if flo <= 0:
            lo -= 2.0
            flo = val(lo)
        if fhi >= 0:
            hi += 2.0
            fhi = val(hi)
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if val(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def estimate_pressure(group: SchottkyGroup, f: Potential, L: int, origin: complex = ORIGIN) -> tuple[float, float]:
    """Pressure estimate (midpoint, error bar) from two shell estimators.

    (a) the top shell ratio S_L/S_{L-1} = 1; (b) the averaged ratio over the
    last few shells.  Their disagreement plus a resolution floor is the bar."""
    if L < 6:
        raise ValueError("need L >= 6 for a stable pressure estimate")
    shells = shell_log_sums(group, f, L, origin)
    est_a = _shell_ratio_root(shells, [(L - 2, L - 1)])
    est_b = _shell_ratio_root(shells, [(l, l + 1) for l in range(L - 4, L - 1)])
    spread = abs(est_a - est_b)
    if spread > 0.05:
        raise RuntimeError(
            f"pressure estimators disagree: {est_a:.4f} vs {est_b:.4f}; "
            "the word length is too small for this potential"
        )
    return 0.5 * (est_a + est_b), 0.5 * spread + 0.002


# ---------------------------------------------------------------------------
# atomic boundary measures
# ---------------------------------------------------------------------------

@dataclass
class AtomicMeasure:
    """Finite atomic approximation of a boundary measure.

    Atoms are sorted by projective angle; (level, index) point back into the
    word enumeration (used to rebuild prefix hints for nonzero potentials).
    """

    p: np.ndarray
    q: np.ndarray
    theta: np.ndarray
    weight: np.ndarray
    level: np.ndarray
    index: np.ndarray
    provenance: dict = field(default_factory=dict)

    @property
    def total_mass(self) -> float:
        return float(self.weight.sum())

    def __len__(self) -> int:
        return self.p.size

    def atom(self, i: int) -> BoundaryPoint:
        return BoundaryPoint(self.p[i], self.q[i])

    def integrate(self, values: np.ndarray) -> float:
        return float(np.dot(self.weight, values))

    def angular_slice(self, center: float, half_width: float) -> np.ndarray:
        """Indices with |sin(theta - center)| possibly < sin(half_width), using
        the sorted angles (wrapped modulo pi)."""
        if half_width >= 0.5 * math.pi:
            return np.arange(len(self))
        out = []
        for shift in (-math.pi, 0.0, math.pi):
            lo = np.searchsorted(self.theta, center + shift - half_width)
            hi = np.searchsorted(self.theta, center + shift + half_width)
            if hi > lo:
                out.append(np.arange(lo, hi))
        return np.unique(np.concatenate(out)) if out else np.array([], dtype=int)

    def word(self, group: SchottkyGroup, i: int) -> tuple[int, ...]:
        lev = int(self.level[i])
        letters = group.level_arrays(lev)[lev][0][int(self.index[i])]
        return tuple(int(x) for x in letters)


def build_patterson(
    group: SchottkyGroup,
    f: Potential,
    delta: float,
    L: int,
    origin: complex = ORIGIN,
) -> AtomicMeasure:
    """Atomic boundary measure at level L: atoms at the directions of the orbit
    points, weights exp(int f - delta d), normalized to mass 1."""
    shells = shell_log_sums(group, f, L, origin)
    ps, qs, logws, levels, idxs = [], [], [], [], []
    for lev, (dist, integrals) in enumerate(shells, start=1):
        _, mats = group.level_arrays(lev)[lev]
        a, b = mats[:, 0, 0], mats[:, 0, 1]
        c, d = mats[:, 1, 0], mats[:, 1, 1]
        go = (a * origin + b) / (c * origin + d)
        p, q = _directions_from(origin, go)
        ps.append(p)
        qs.append(q)
        logws.append(integrals - delta * dist)
        levels.append(np.full(p.size, lev, dtype=np.int32))
        idxs.append(np.arange(p.size, dtype=np.int64))
    p = np.concatenate(ps)
    q = np.concatenate(qs)
    logw = np.concatenate(logws)
    level = np.concatenate(levels)
    index = np.concatenate(idxs)
    logw -= logsumexp(logw)
    if not np.isfinite(logw).all():
        raise RuntimeError("degenerate weights: everything underflowed")
    theta = np.arctan2(p, q)
    order = np.argsort(theta, kind="stable")
    p, q, theta, logw = p[order], q[order], theta[order], logw[order]
    level, index = level[order], index[order]
    # merge projectively coincident atoms by weight addition
    w = np.exp(logw)
    if p.size > 1:
        dup = np.abs(p[1:] * q[:-1] - q[1:] * p[:-1]) < PROJ_TOL
        if dup.any():
            keep = np.concatenate([[True], ~dup])
            grp = np.cumsum(keep) - 1
            w = np.bincount(grp, weights=w)
            first = np.flatnonzero(keep)
            p, q, theta = p[first], q[first], theta[first]
            level, index = level[first], index[first]
    return AtomicMeasure(
        p=p,
        q=q,
        theta=theta,
        weight=w / w.sum(),
        level=level,
        index=index,
        provenance={"L": L, "origin": complex(origin), "potential": f.key},
    )


# ---------------------------------------------------------------------------
# the assembled system
# ---------------------------------------------------------------------------

@dataclass
class PairSet:
    """Sampled atom pairs (xi-, xi+) with their geodesic frames and clips."""

    i_minus: np.ndarray
    i_plus: np.ndarray
    count: np.ndarray  # multiplicity from weighted sampling
    frame: tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]
    offset: np.ndarray  # s = t + offset on each pair geodesic
    s_lo: np.ndarray
    s_hi: np.ndarray
    log_density: np.ndarray  # log of the s-independent quasi-product density


class GibbsSystem:
    """A group, a potential, its pressure, and the two boundary measures.

    All measure-family operations (leaf, hat, transverse, quasi-product) are
    finite sums over the atoms; nonzero potentials route their cocycle
    evaluations through prefix-hinted orbit integration and cache the
    per-geodesic constants.
    """

    def __init__(
        self,
        group: SchottkyGroup,
        f: Potential,
        delta: float,
        delta_err: float,
        nu_plus: AtomicMeasure,
        nu_minus: AtomicMeasure,
        L: int,
        origin: complex = ORIGIN,
        tol: float = DEFAULT_TOL,
        seed: int = 7,
        pair_budget: int = 20000,
    ):
        self.group = group
        self.f = f
        self.f_check = check_potential(f)
        self.delta = float(delta)
        self.delta_err = float(delta_err)
        self.nu_plus = nu_plus
        self.nu_minus = nu_minus
        self.L = L
        self.origin = complex(origin)
        self.tol = tol
        self.seed = seed
        self.pair_budget = pair_budget
        self.is_weightless = isinstance(f, ZeroPotential)
        self._pair_cache: dict = {}
        self._leaf_q_cache: dict = {}
        self._hint_cache: dict = {}

    # -- cocycle plumbing ----------------------------------------------------

    def hint_points(self, words_idx) -> np.ndarray | None:
        """Candidate orbit points for segments tracking the given atoms.

        words_idx: iterable of (measure, i) pairs; returns the union of the
        hint clouds along each atom's prefix chain."""
        if self.is_weightless or not isinstance(self.f, OrbitPotential):
            return None
        pts = []
        cloud, _ = self.group.orbit_within(13.0)
        for nu, i in words_idx:
            key = (id(nu), int(i))
            if key not in self._hint_cache:
                lev = int(nu.level[i])
                mats = _hint_matrices(self.group, lev, np.array([int(nu.index[i])]))
                acc = [
                    (m[0, 0, 0] * cloud + m[0, 0, 1]) / (m[0, 1, 0] * cloud + m[0, 1, 1])
                    for m in mats
                ]
                self._hint_cache[key] = np.concatenate(acc)
            pts.append(self._hint_cache[key])
        return np.concatenate(pts) if pts else None

    def _pair_log_density(self, xim: BoundaryPoint, xip: BoundaryPoint, hints=None) -> float:
        """log of the s-independent density of the quasi-product measure along
        the geodesic (xi-, xi+)."""
        d0 = xim.sine_distance(xip)
        base = -2.0 * self.delta * math.log(d0)
        if self.is_weightless:
            return base
        chart = GeodesicChart.from_endpoints(xim, xip)
        ttop = chart.tparam(self.origin)
        ztop = complex(chart.point(ttop))
        q = rho_cocycle(self.f, xip, self.origin, ztop, tol=self.tol, extra_points=hints)
        q += rho_cocycle(self.f_check, xim, self.origin, ztop, tol=self.tol, extra_points=hints)
        return base - q

    def leaf_log_weights(self, leaf: Horosphere, idx: np.ndarray, leaf_word: tuple = ()) -> np.ndarray:
        """Log leaf-measure weights of the nu_plus atoms idx on the leaf.

        The weight of atom eta is nu(eta) exp(delta (s - 2 log d_o(xi, eta)) - Q)
        with Q the per-geodesic cocycle constant (cached; zero for f = 0)."""
        nu = self.nu_plus
        d0 = gromov_origin_many(nu.p[idx], nu.q[idx], leaf.xi.p, leaf.xi.q)
        keepable = d0 > PROJ_TOL
        logw = np.where(keepable, np.log(np.where(keepable, nu.weight[idx], 1.0)), -np.inf)
        vals = logw + self.delta * (leaf.s - 2.0 * np.log(np.where(keepable, d0, 1.0)))
        if self.is_weightless:
            return np.where(keepable, vals, -np.inf)
        qkey_base = (round(leaf.xi.p, 12), round(leaf.xi.q, 12))
        qs = np.empty(idx.size)
        for n, i in enumerate(idx):
            if not keepable[n]:
                qs[n] = 0.0
                continue
            key = (qkey_base, int(i))
            if key not in self._leaf_q_cache:
                eta = nu.atom(int(i))
                hints = self.hint_points([(nu, int(i))])
                if leaf_word:
                    extra = self._leaf_hints(leaf_word)
                    hints = np.concatenate([hints, extra]) if hints is not None else extra
                chart = GeodesicChart.from_endpoints(leaf.xi, eta)
                ztop = complex(chart.point(chart.tparam(self.origin)))
                q = rho_cocycle(self.f, eta, self.origin, ztop, tol=self.tol, extra_points=hints)
                q += rho_cocycle(self.f_check, leaf.xi, self.origin, ztop, tol=self.tol, extra_points=hints)
                self._leaf_q_cache[key] = q
            qs[n] = self._leaf_q_cache[key]
        return np.where(keepable, vals - qs, -np.inf)

    def _leaf_hints(self, leaf_word: tuple) -> np.ndarray:
        key = ("leafword", leaf_word)
        if key not in self._hint_cache:
            cloud, _ = self.group.orbit_within(13.0)
            acc = [cloud]
            m = Isometry.identity()
            for l in leaf_word:
                m = m @ self.group.letter_matrix(l)
                acc.append((m.a * cloud + m.b) / (m.c * cloud + m.d))
            self._hint_cache[key] = np.concatenate(acc)
        return self._hint_cache[key]

    # -- fundamental domain clipping ------------------------------------------

    def domain_interval(self, pm, qm, pp, qp):
        """F-clipped level interval of the geodesics (xi-_i, xi+_i).

        Vectorized; returns (s_lo, s_hi, frame, offset) with s_lo > s_hi when
        the clip is empty.  Requires each endpoint to lie in at most one disk;
        endpoints in no disk give an unbounded clip, reported as invalid."""
        det = pp * qm - qp * pm
        s = 1.0 / np.sqrt(np.abs(det))
        sg = np.sign(det)
        ga, gb, gc, gd = pp * s, sg * pm * s, qp * s, sg * qm * s
        gi = (ga * 1j + gb) / (gc * 1j + gd)
        offset = busemann_many(pm, qm, gi, np.full(pm.shape, self.origin))
        # offset: s(t) = t + beta_{xi-}(g(i), o)
        s_lo = np.full(pm.shape, -np.inf)
        s_hi = np.full(pm.shape, np.inf)
        for letter in self.group.letters:
            disk = self.group.disks[letter]
            in_m = np.abs(pm - disk.center * qm) <= disk.radius * np.abs(qm)
            in_p = np.abs(pp - disk.center * qp) <= disk.radius * np.abs(qp)
            any_in = in_m | in_p
            if not any_in.any():
                continue
            A = ga - disk.center * gc
            B = gb - disk.center * gd
            num = disk.radius**2 * gd**2 - B * B
            den = A * A - disk.radius**2 * gc**2
            with np.errstate(divide="ignore", invalid="ignore"):
                tstar = 0.5 * (np.log(np.abs(num)) - np.log(np.abs(den)))
            both = in_m & in_p
            s_lo = np.where(both, np.inf, np.where(in_m & ~in_p, np.maximum(s_lo, tstar + offset), s_lo))
            s_hi = np.where(both, -np.inf, np.where(in_p & ~in_m, np.minimum(s_hi, tstar + offset), s_hi))
        return s_lo, s_hi, (ga, gb, gc, gd), offset

    # -- pair sampling ---------------------------------------------------------

    def pair_set(self, budget: int | None = None, seed: int | None = None) -> PairSet:
        budget = budget or self.pair_budget
        seed = self.seed if seed is None else seed
        key = (budget, seed)
        if key in self._pair_cache:
            return self._pair_cache[key]
        rng = np.random.default_rng(seed)
        nm, npl = self.nu_minus, self.nu_plus
        total = len(nm) * len(npl)
        if total <= budget:
            i_minus, i_plus = np.meshgrid(np.arange(len(nm)), np.arange(len(npl)), indexing="ij")
            i_minus, i_plus = i_minus.ravel(), i_plus.ravel()
            count = np.ones(i_minus.size)
        else:
            i_minus = rng.choice(len(nm), size=budget, p=nm.weight / nm.total_mass)
            i_plus = rng.choice(len(npl), size=budget, p=npl.weight / npl.total_mass)
            pairs, count = np.unique(np.stack([i_minus, i_plus]), axis=1, return_counts=True)
            i_minus, i_plus = pairs[0], pairs[1]
        pm, qm = nm.p[i_minus], nm.q[i_minus]
        pp, qp = npl.p[i_plus], npl.q[i_plus]
        distinct = gromov_origin_many(pm, qm, pp, qp) > PROJ_TOL
        i_minus, i_plus, count = i_minus[distinct], i_plus[distinct], count[distinct]
        pm, qm, pp, qp = pm[distinct], qm[distinct], pp[distinct], qp[distinct]
        s_lo, s_hi, frame, offset = self.domain_interval(pm, qm, pp, qp)
        logdens = np.empty(i_minus.size)
        for n in range(i_minus.size):
            hints = self.hint_points([(nm, int(i_minus[n])), (npl, int(i_plus[n]))])
            logdens[n] = self._pair_log_density(nm.atom(int(i_minus[n])), npl.atom(int(i_plus[n])), hints)
        ps = PairSet(i_minus, i_plus, count, frame, offset, s_lo, s_hi, logdens)
        self._pair_cache[key] = ps
        return ps

    def _pair_log_mass(self, ps: PairSet) -> np.ndarray:
        """Log sampled mass per pair: multiplicity x density x clip length."""
        nm, npl = self.nu_minus, self.nu_plus
        length = np.maximum(ps.s_hi - ps.s_lo, 0.0)
        if (self.nu_minus is not None) and len(self.nu_minus) * len(self.nu_plus) <= len(ps.count) :
            base = np.log(nm.weight[ps.i_minus]) + np.log(npl.weight[ps.i_plus])
        else:
            base = np.log(ps.count)  # importance weights already carry nu x nu
        with np.errstate(divide="ignore"):
            return base + ps.log_density + np.log(length)

    # -- the equilibrium state --------------------------------------------------

    def gibbs_integral(self, psi=None, t_shift: float = 0.0, budget: int | None = None, nodes: int = 5) -> float:
        """Normalized integral of a lifted test function against the
        equilibrium-state approximation over the fundamental domain.

        psi maps arrays of fundamental-domain representatives to values;
        psi=None means the constant 1.  t_shift integrates psi o Phi^t."""
        ps = self.pair_set(budget)
        good = ps.s_hi > ps.s_lo
        if not good.any():
            raise RuntimeError("no atom pair survives the fundamental-domain clip")
        logmass = self._pair_log_mass(ps)[good]
        mass = np.exp(logmass - logmass.max())
        if psi is None:
            return 1.0
        x, wq = np.polynomial.legendre.leggauss(nodes)
        mid = 0.5 * (ps.s_lo[good] + ps.s_hi[good])
        half = 0.5 * (ps.s_hi[good] - ps.s_lo[good])
        svals = mid[:, None] + half[:, None] * x[None, :]
        ga, gb, gc, gd = (arr[good] for arr in ps.frame)
        w = 1j * np.exp(svals + t_shift - ps.offset[good][:, None])
        zs = (ga[:, None] * w + gb) [..., None][..., 0]
        zs = (ga[:, None] * w + gb[:, None]) / (gc[:, None] * w + gd[:, None])
        reduced, _ = self.group.reduce_to_domain_many(zs.ravel())
        vals = np.asarray(psi(reduced), dtype=float).reshape(zs.shape)
        per_pair = 0.5 * (vals * wq[None, :]).sum(axis=1)  # mean over the clip
        return float(np.dot(mass, per_pair) / mass.sum())

    def gibbs_density(self, v: UnitTangentHopf) -> float:
        """Pointwise quasi-product density at v (w.r.t. nu x nu x ds)."""
        z = base_point(v)
        bplus = self.delta * busemann(v.xi_plus, self.origin, z)
        bminus = self.delta * busemann(v.xi_minus, self.origin, z)
        if not self.is_weightless:
            bplus -= rho_cocycle(self.f, v.xi_plus, self.origin, z, tol=self.tol)
            bminus -= rho_cocycle(self.f_check, v.xi_minus, self.origin, z, tol=self.tol)
        return math.exp(bplus + bminus)

    # -- leaf, hat, transverse measures -----------------------------------------

    def leaf_weights(self, leaf: Horosphere, idx: np.ndarray | None = None, leaf_word: tuple = ()) -> np.ndarray:
        if idx is None:
            idx = np.arange(len(self.nu_plus))
        return np.exp(self.leaf_log_weights(leaf, idx, leaf_word))

    def leaf_measure_integral(self, leaf: Horosphere, region, weight=None, leaf_word: tuple = ()) -> float:
        """Integral over a boundary region of the leaf measure.

        region: boolean mask over nu_plus atoms, or a callable on (p, q)
        arrays; weight: optional callable on the atom indices."""
        if callable(region):
            mask = np.asarray(region(self.nu_plus.p, self.nu_plus.q), dtype=bool)
        else:
            mask = np.asarray(region, dtype=bool)
        idx = np.flatnonzero(mask)
        if idx.size == 0:
            warnings.warn("leaf region contains no atoms at this level", stacklevel=2)
            return 0.0
        w = self.leaf_weights(leaf, idx, leaf_word)
        if weight is not None:
            w = w * np.asarray(weight(idx), dtype=float)
        return float(w.sum())

    def hat_measure_integral(self, phi, window: tuple[float, float], nodes: int = 12) -> float:
        """Integral of phi(xi, s) against the horosphere-space measure
        exp(-delta s) ds x nu_check over the window."""
        s0, s1 = window
        if not s1 > s0:
            raise ValueError("window must be a nontrivial interval")
        x, wq = np.polynomial.legendre.leggauss(nodes)
        mid, half = 0.5 * (s0 + s1), 0.5 * (s1 - s0)
        svals = mid + half * x
        nu = self.nu_minus
        vals = np.asarray(phi(nu.p[:, None], nu.q[:, None], svals[None, :]), dtype=float)
        dens = np.exp(-self.delta * svals)
        return float(half * np.dot(nu.weight, (vals * dens[None, :] * wq[None, :]).sum(axis=1)))

    def transverse_measure_integral(
        self,
        w: UnitTangentHopf,
        phi,
        window: tuple[float, float],
        mu_plain: bool = False,
        nodes: int = 12,
    ) -> float:
        """Integral over the weak-stable transversal of w.

        Points are (xi, w+, s) with xi a nu_check atom and s in the window.
        The holonomy-invariant family integrates phi(xi, s) exp(-delta s);
        mu_plain=True multiplies by exp(-rho^{f_check}_{xi}(o, base point)),
        reproducing the plain transverse family (holonomy cocycle rho)."""
        s0, s1 = window
        x, wq = np.polynomial.legendre.leggauss(nodes)
        mid, half = 0.5 * (s0 + s1), 0.5 * (s1 - s0)
        svals = mid + half * x
        nu = self.nu_minus
        vals = np.asarray(phi(nu.p[:, None], nu.q[:, None], svals[None, :]), dtype=float)
        dens = np.tile(np.exp(-self.delta * svals)[None, :], (len(nu), 1))
        if mu_plain and not self.is_weightless:
            for i in range(len(nu)):
                xi = nu.atom(i)
                if xi.same_as(w.xi_plus):
                    dens[i] = 0.0
                    continue
                hints = self.hint_points([(nu, i)])
                for j, s in enumerate(svals):
                    from .geometry import geodesic_point

                    z = geodesic_point(xi, w.xi_plus, s)
                    dens[i, j] *= math.exp(
                        -rho_cocycle(self.f_check, xi, self.origin, z, tol=self.tol, extra_points=hints)
                    )
        elif mu_plain:
            pass  # rho^0 = 0: the two families coincide
        return float(half * np.dot(nu.weight, (vals * dens * wq[None, :]).sum(axis=1)))

    # -- quasi-invariance checks ---------------------------------------------

    def quasi_invariance_discrepancy(self, nu: AtomicMeasure, g: Isometry, phi, use_check: bool = False) -> float:
        """Relative gap in the boundary quasi-invariance identity
        int phi(g xi) dnu = int phi(xi) exp(beta^f_xi(o, g o)) dnu."""
        f = self.f_check if use_check else self.f
        go = g.apply_point(self.origin)
        gp = g.a * nu.p + g.b * nu.q
        gq = g.c * nu.p + g.d * nu.q
        n = np.hypot(gp, gq)
        lhs = nu.integrate(np.asarray(phi(gp / n, gq / n), dtype=float))
        cocycle = np.empty(len(nu))
        for i in range(len(nu)):
            xi = nu.atom(i)
            hints = self.hint_points([(nu, i)])
            cocycle[i] = self.delta * busemann(xi, self.origin, go)
            if not self.is_weightless:
                cocycle[i] -= rho_cocycle(f, xi, self.origin, go, tol=self.tol, extra_points=hints)
        rhs = nu.integrate(np.asarray(phi(nu.p, nu.q), dtype=float) * np.exp(cocycle))
        return abs(lhs - rhs) / max(abs(lhs), abs(rhs))


def build_gibbs_system(
    group: SchottkyGroup,
    f: Potential,
    L: int,
    origin: complex = ORIGIN,
    tol: float = DEFAULT_TOL,
    seed: int = 7,
    pair_budget: int = 20000,
    pressure_L: int | None = None,
) -> GibbsSystem:
    """Estimate the pressure, build both boundary measures, assemble the system."""
    pL = pressure_L or L
    delta, err = estimate_pressure(group, f, pL, origin)
    f_check = check_potential(f)
    if not f.symmetric:
        delta_check, err_check = estimate_pressure(group, f_check, pL, origin)
        if abs(delta_check - delta) > 2.0 * (err + err_check):
            raise RuntimeError(
                f"pressures of f and its antipode disagree: {delta} vs {delta_check}"
            )
        delta = 0.5 * (delta + delta_check)
    nu_plus = build_patterson(group, f, delta, L, origin)
    nu_minus = nu_plus if f.symmetric else build_patterson(group, f_check, delta, L, origin)
    return GibbsSystem(
        group,
        f,
        delta,
        err,
        nu_plus,
        nu_minus,
        L,
        origin=origin,
        tol=tol,
        seed=seed,
        pair_budget=pair_budget,
    )
