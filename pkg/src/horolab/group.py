"""Schottky groups: ping-pong disks, reduced words, limit-set coding.

A rank-k Schottky group is given by 2k pairwise disjoint closed half-disks
anchored on the real line, letters +-1..+-k with letter l owning the disk
D(l), and generators pairing them: g_i maps the exterior of D(-i) onto the
interior of D(+i) (the composition of the inversion in D(-i) with the point
reflection, realized as the Mobius map z -> c+ - r^2/(z - c-)).

Reduced words enumerate the group bijectively.  Letters are stored
outermost-first, so word.matrix applies letters[-1] first; the deterministic
enumeration order is by length, then lexicographic in the letter order
(+1, -1, +2, -2, ...).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geometry import (
    ORIGIN,
    PROJ_TOL,
    BoundaryPoint,
    Isometry,
    UnitTangentHopf,
    hyp_distance,
)

__all__ = [
    "Disk",
    "ReducedWord",
    "SchottkyGroup",
    "build_schottky",
    "standard_group",
]


@dataclass(frozen=True)
class Disk:
    """Closed boundary-anchored half-disk |z - center| <= radius."""

    center: float
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("disk radius must be positive")

    def contains_plane(self, z: complex, strict: bool = True) -> bool:
        d = abs(z - self.center)
        return d < self.radius if strict else d <= self.radius

    def contains_boundary(self, xi: BoundaryPoint, strict: bool = False) -> bool:
        # |p/q - c| < r projectively: |p - c q| < r |q|; infinity is never inside
        lhs = abs(xi.p - self.center * xi.q)
        rhs = self.radius * abs(xi.q)
        return lhs < rhs if strict else lhs <= rhs

    @property
    def interval(self) -> tuple[float, float]:
        return (self.center - self.radius, self.center + self.radius)


@dataclass(frozen=True)
class ReducedWord:
    """Reduced word over the letters +-1..+-k with its cached matrix.

    letters[0] is the outermost letter: the word acts as the composition
    letters[0] o letters[1] o ... so matrix = prod of letter matrices in
    sequence order.
    """

    letters: tuple[int, ...]
    matrix: Isometry

    def __len__(self) -> int:
        return len(self.letters)

    @property
    def is_identity(self) -> bool:
        return not self.letters


def _pairing_matrix(c_minus: float, c_plus: float, r: float) -> Isometry:
    # z -> c+ - r^2 / (z - c-): sends ext D(c-, r) onto int D(c+, r)
    return Isometry(c_plus, -(c_minus * c_plus + r * r), 1.0, -c_minus)


class SchottkyGroup:
    """Rank-k free group of isometries with a verified ping-pong system."""

    def __init__(self, generators: list[Isometry], disks: dict[int, Disk], validate: bool = True):
        self.rank = len(generators)
        if self.rank < 2:
            raise ValueError("need rank >= 2")
        if set(disks) != {l for i in range(1, self.rank + 1) for l in (i, -i)}:
            raise ValueError("need one disk per letter +-1..+-k")
        self.generators = list(generators)
        self.disks = dict(disks)
        # letter order fixing the deterministic enumeration
        self.letters = [l for i in range(1, self.rank + 1) for l in (i, -i)]
        self._letter_matrix = {
            i: generators[i - 1] for i in range(1, self.rank + 1)
        } | {
            -i: generators[i - 1].inverse() for i in range(1, self.rank + 1)
        }
        self._levels: list[tuple[np.ndarray, np.ndarray]] = []
        self._cache: dict = {}
        if validate:
            self.validate()

    # -- construction ------------------------------------------------------

    @property
    def key(self) -> tuple:
        return tuple((l, self.disks[l].center, self.disks[l].radius) for l in self.letters)

    def letter_matrix(self, letter: int) -> Isometry:
        return self._letter_matrix[letter]

    def disk(self, letter: int) -> Disk:
        return self.disks[letter]

    def validate(self, samples: int = 1000) -> None:
        """Check disjointness with positive gaps and sampled ping-pong."""
        ivs = sorted(d.interval for d in self.disks.values())
        for (a1, b1), (a2, b2) in zip(ivs, ivs[1:]):
            if b1 >= a2:
                raise ValueError(f"disks overlap or touch: {(a1, b1)} vs {(a2, b2)}")
        for letter in self.letters:
            g = self.letter_matrix(letter)
            if g.is_identity():
                raise ValueError(f"generator for letter {letter} acts as the identity")
            src, dst = self.disks[-letter], self.disks[letter]
            pts = _exterior_boundary_samples(self, -letter, samples)
            for xi in pts:
                if not dst.contains_boundary(g.apply_boundary(xi)):
                    raise ValueError(
                        f"ping-pong fails: letter {letter} does not map the exterior "
                        f"of its source disk into {dst}"
                    )
            # the pairing must identify the two circles: endpoints of the source
            # interval land on the target circle
            for end in src.interval:
                img = g.apply_boundary(BoundaryPoint.from_real(end)).value
                if not math.isfinite(img) or abs(abs(img - dst.center) - dst.radius) > 1e-8:
                    raise ValueError(f"letter {letter} does not pair its disks")

    # -- word enumeration ----------------------------------------------------

    def identity_word(self) -> ReducedWord:
        return ReducedWord((), Isometry.identity())

    def word(self, letters) -> ReducedWord:
        letters = tuple(int(l) for l in letters)
        m = Isometry.identity()
        prev = 0
        for l in letters:
            if l == 0 or abs(l) > self.rank:
                raise ValueError(f"invalid letter {l}")
            if l == -prev:
                raise ValueError("word is not reduced")
            m = m @ self.letter_matrix(l)
            prev = l
        return ReducedWord(letters, m)

    def enumerate_words(self, max_length: int):
        """Yield all reduced words of length <= max_length, deterministically.

        Exactly 1 + sum_l 2k (2k-1)^(l-1) words; breadth-first in length,
        lexicographic in the fixed letter order within a length.
        """
        yield self.identity_word()
        frontier = [self.identity_word()]
        for _ in range(max_length):
            nxt = []
            for w in frontier:
                last = w.letters[-1] if w.letters else 0
                for l in self.letters:
                    if l == -last:
                        continue
                    nw = ReducedWord(w.letters + (l,), w.matrix @ self.letter_matrix(l))
                    nxt.append(nw)
                    yield nw
            frontier = nxt

    def word_count(self, max_length: int) -> int:
        k2 = 2 * self.rank
        return 1 + sum(k2 * (k2 - 1) ** (l - 1) for l in range(1, max_length + 1))

    def level_arrays(self, max_length: int) -> list[tuple[np.ndarray, np.ndarray]]:
        """Vectorized word data per length: (letters (n, l) int8, matrices (n, 2, 2)).

        Level 0 is the identity.  Built incrementally and cached; order matches
        enumerate_words.
        """
        while len(self._levels) <= max_length:
            if not self._levels:
                self._levels.append(
                    (np.zeros((1, 0), dtype=np.int8), np.eye(2)[None, :, :].copy())
                )
                continue
            letters, mats = self._levels[-1]
            n, depth = letters.shape
            lmats = np.stack([self.letter_matrix(l).matrix for l in self.letters])
            if depth == 0:
                new_letters = np.array(self.letters, dtype=np.int8)[:, None]
                new_mats = lmats.copy()
            else:
                last = letters[:, -1]
                keep = np.stack([l != -last for l in self.letters], axis=1)  # (n, 2k)
                parent_idx, letter_idx = np.nonzero(keep)
                order = np.lexsort((letter_idx, parent_idx))
                parent_idx, letter_idx = parent_idx[order], letter_idx[order]
                new_letters = np.concatenate(
                    [letters[parent_idx], np.asarray(self.letters, dtype=np.int8)[letter_idx][:, None]],
                    axis=1,
                )
                new_mats = np.einsum("nij,njk->nik", mats[parent_idx], lmats[letter_idx])
            self._levels.append((new_letters, new_mats))
        return self._levels[: max_length + 1]

    # -- limit set coding ----------------------------------------------------

    def cylinder_interval(self, w: ReducedWord) -> tuple[float, float]:
        """Boundary interval of the cylinder of w: the prefix applied to the
        disk of the last letter.  Nested decreasing along prefixes."""
        if w.is_identity:
            raise ValueError("the empty word has no cylinder")
        prefix = Isometry.identity()
        for l in w.letters[:-1]:
            prefix = prefix @ self.letter_matrix(l)
        lo, hi = self.disks[w.letters[-1]].interval
        a = prefix.apply_boundary(BoundaryPoint.from_real(lo)).value
        b = prefix.apply_boundary(BoundaryPoint.from_real(hi)).value
        return (a, b) if a <= b else (b, a)

    def attracting_fixed_point(self, w: ReducedWord) -> BoundaryPoint:
        """Attracting eigendirection of a nonempty (hyperbolic) word."""
        if w.is_identity:
            raise ValueError("the identity has no attracting fixed point")
        m = w.matrix
        tr = m.a + m.d
        if abs(tr) <= 2.0 + 1e-12:
            raise ValueError("word is not hyperbolic")
        disc = math.sqrt(tr * tr - 4.0)
        lam = (tr + disc) / 2.0 if tr > 0 else (tr - disc) / 2.0  # |lam| > 1
        if abs(m.c) >= abs(m.b):
            return BoundaryPoint(lam - m.d, m.c)
        return BoundaryPoint(m.b, lam - m.a)

    def boundary_address(self, xi: BoundaryPoint, depth: int) -> tuple[int, ...] | None:
        """Symbolic address of xi in the nested disk coding, up to depth.

        Returns the letter sequence (l1..ld) with xi in the cylinder of
        l1..ld, or None if xi leaves the cover before reaching depth."""
        address = []
        cur = xi
        for _ in range(depth):
            hit = None
            for l in self.letters:
                if address and l == -address[-1]:
                    continue
                if self.disks[l].contains_boundary(cur):
                    hit = l
                    break
            if hit is None:
                return None
            address.append(hit)
            cur = self.letter_matrix(-hit).apply_boundary(cur)
        return tuple(address)

    def in_limit_cover(self, xi: BoundaryPoint, depth: int) -> bool:
        return self.boundary_address(xi, depth) is not None

    def in_nonwandering(self, v: UnitTangentHopf, depth: int) -> bool:
        """Both endpoints in the depth-level nested cover of the limit set."""
        if depth < 1:
            raise ValueError("depth must be >= 1")
        return self.in_limit_cover(v.xi_minus, depth) and self.in_limit_cover(v.xi_plus, depth)

    # -- fundamental domain --------------------------------------------------

    def fundamental_domain_contains(self, z: complex) -> bool:
        """Membership in the closed domain F: the common exterior of the half-disks.

        Disk boundaries count as F (ties resolved toward the domain)."""
        return all(not d.contains_plane(z, strict=True) for d in self.disks.values())

    def reduce_to_domain(self, z: complex, max_steps: int = 64) -> tuple[ReducedWord, complex]:
        """Greedy disk escape: the word gamma with gamma^{-1} z in F.

        Returns (gamma, gamma^{-1} z); gamma's letters spell the nested disks
        containing z, outermost first, so each step strictly unnests."""
        letters = []
        cur = complex(z)
        for _ in range(max_steps):
            hit = next((l for l in self.letters if self.disks[l].contains_plane(cur)), None)
            if hit is None:
                return self.word(letters), cur
            letters.append(hit)
            cur = self.letter_matrix(-hit).apply_point(cur)
        raise RuntimeError(f"reduce_to_domain did not terminate within {max_steps} steps")

    def reduce_to_domain_many(self, zs: np.ndarray, max_steps: int = 64):
        """Vectorized reduce_to_domain.

        Returns (points, addresses): representative points in F and per-point
        letter tuples (the word gamma, outermost first)."""
        zs = np.asarray(zs, dtype=complex)
        cur = zs.copy()
        n = cur.shape[0]
        steps: list[np.ndarray] = []
        active = np.ones(n, dtype=bool)
        mats = {l: self.letter_matrix(-l) for l in self.letters}
        for _ in range(max_steps):
            if not active.any():
                break
            hit = np.zeros(n, dtype=np.int8)
            undecided = active.copy()
            for l in self.letters:
                d = self.disks[l]
                inside = undecided & (np.abs(cur - d.center) < d.radius)
                hit[inside] = l
                undecided &= ~inside
            active = hit != 0
            if not active.any():
                break
            for l in self.letters:
                sel = hit == l
                if sel.any():
                    m = mats[l]
                    cur[sel] = (m.a * cur[sel] + m.b) / (m.c * cur[sel] + m.d)
            steps.append(hit)
        else:
            if active.any():
                raise RuntimeError(f"reduce_to_domain_many hit the {max_steps}-step cap")
        if steps:
            table = np.stack(steps, axis=1)
            addresses = [tuple(int(x) for x in row[row != 0]) for row in table]
        else:
            addresses = [() for _ in range(n)]
        return cur, addresses

    # -- orbit ---------------------------------------------------------------

    def orbit_within(self, max_dist: float, include_identity: bool = True):
        """All orbit points gamma(o) with d(o, gamma o) <= max_dist, by pruned DFS.

        Relies on distances growing strictly along reduced words, which is
        asserted on the first two levels at build time."""
        key = ("orbit", round(max_dist, 9), include_identity)
        if key in self._cache:
            return self._cache[key]
        base_gap = self._min_growth_gap()
        if base_gap <= 0:
            raise RuntimeError("orbit distances do not grow monotonically; cannot prune")
        out_pts, out_words = [], []
        if include_identity:
            out_pts.append(ORIGIN)
            out_words.append(())

        def rec(letters: tuple, mat: Isometry):
            for l in self.letters:
                if letters and l == -letters[-1]:
                    continue
                m = mat @ self.letter_matrix(l)
                p = m.apply_point(ORIGIN)
                d = hyp_distance(ORIGIN, p)
                if d > max_dist:
                    continue
                out_pts.append(p)
                out_words.append(letters + (l,))
                rec(letters + (l,), m)

        rec((), Isometry.identity())
        result = (np.array(out_pts, dtype=complex), out_words)
        self._cache[key] = result
        return result

    def _min_growth_gap(self) -> float:
        key = "growth_gap"
        if key not in self._cache:
            gaps = []
            for w in self.enumerate_words(3):
                if w.is_identity:
                    continue
                d = hyp_distance(ORIGIN, w.matrix.apply_point(ORIGIN))
                parent = self.word(w.letters[:-1])
                dp = hyp_distance(ORIGIN, parent.matrix.apply_point(ORIGIN)) if len(w) > 1 else 0.0
                gaps.append(d - dp)
            self._cache[key] = min(gaps)
        return self._cache[key]


def _exterior_boundary_samples(G: SchottkyGroup, source_letter: int, samples: int):
    """Boundary points outside the source disk: other disks' arcs, gaps, infinity."""
    pts = [BoundaryPoint.infinity()]
    others = [l for l in G.letters if l != source_letter]
    per = max(3, samples // (2 * len(others)))
    for l in others:
        lo, hi = G.disks[l].interval
        for x in np.linspace(lo, hi, per):
            pts.append(BoundaryPoint.from_real(float(x)))
    ivs = sorted(d.interval for d in G.disks.values())
    lo_all, hi_all = ivs[0][0], ivs[-1][1]
    gap_xs = [lo_all - 1.0, hi_all + 1.0]
    for (a1, b1), (a2, b2) in zip(ivs, ivs[1:]):
        gap_xs.extend(np.linspace(b1, a2, 5)[1:-1])
    src = G.disks[source_letter].interval
    for x in gap_xs:
        if not (src[0] <= x <= src[1]):
            pts.append(BoundaryPoint.from_real(float(x)))
    return pts[:samples]


def build_schottky(disk_pairs, radii=None, matrices=None, validate: bool = True) -> SchottkyGroup:
    """Build a Schottky group from disk data.

    disk_pairs: sequence of (c_minus, c_plus) centers, one per generator.
    radii: common radius or per-generator radii (default 1.0).
    matrices: optional explicit generator matrices (2x2, det > 0); by default
    the canonical pairing map z -> c+ - r^2/(z - c-) is used.
    """
    disk_pairs = list(disk_pairs)
    k = len(disk_pairs)
    if radii is None:
        radii = [1.0] * k
    elif np.isscalar(radii):
        radii = [float(radii)] * k
    disks = {}
    gens = []
    for i, ((cm, cp), r) in enumerate(zip(disk_pairs, radii), start=1):
        disks[-i] = Disk(cm, r)
        disks[i] = Disk(cp, r)
        if matrices is None:
            gens.append(_pairing_matrix(cm, cp, r))
        else:
            gens.append(Isometry.from_matrix(matrices[i - 1]))
    return SchottkyGroup(gens, disks, validate=validate)


def standard_group() -> SchottkyGroup:
    """The rank-2 workhorse: disks at -2 -> +2 and -6 -> +6, radius 1."""
    return build_schottky([(-2.0, 2.0), (-6.0, 6.0)])
