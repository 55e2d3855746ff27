"""
Discrete groups of isometries: specification, orbit enumeration, growth rates.

Free groups (Schottky groups and free finite-index subgroups such as Gamma(2))
are enumerated by breadth-first search over reduced words.  Pruning is exact: if
w is a reduced word ending in the letter g and h != g^-1, every element whose
reduced word starts with w h moves x0 into w(D_h), where D_h is the Dirichlet
half-plane {z : d(z, h x0) < d(z, x0)}.  So the whole subtree below w h can be
dropped as soon as d(w^-1 x0, D_h) exceeds the radius.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy import stats

from . import hyperbolic as hb
from . import kernels
from .convex import GeodesicLine
from .hyperbolic import GeometryError, Isometry, Point

RADIUS_CAP = 20.0
DEDUP_QUANT = 1e-9
LETTERS = "abcdefghijklmnopqrstuvwxyz"


class GroupError(ValueError):
    pass


def _letter_name(k: int) -> str:
    ch = LETTERS[k // 2]
    return ch if k % 2 == 0 else ch.upper()


@dataclass(frozen=True)
class DirichletWall:
    """Bisector of x0 and g x0, with the half-plane D_g on the side of g x0."""

    g: np.ndarray
    line: GeodesicLine
    arc: tuple  # (start, width) of the ideal boundary of D_g, counter-clockwise
    inward: np.ndarray  # frame at the bisector midpoint pointing into D_g

    def dist_from_outside(self, z):
        """Distance from z to the closed half-plane (0 if inside)."""
        d = self.line.dist_to(z)
        side = _side(self.inward, z)
        return np.where(side > 0, 0.0, d)


def _side(inward_frame, z):
    """Positive on the half-plane the frame points into.

    In the chart of the frame the wall is the unit semicircle and the half-plane
    is its outside."""
    zl = hb.mobius_z(hb.mat_inv(inward_frame), z)
    return np.abs(zl) - 1.0


def dirichlet_wall(g: np.ndarray, x0: complex) -> DirichletWall:
    gx0 = complex(hb.mobius_z(g, x0))
    d = float(hb.dist_z(x0, gx0))
    F = hb.frame_flow(hb.frame_toward_point(x0, gx0), 0.5 * d)
    # the wall is the geodesic through the midpoint orthogonal to F
    left = hb.mat_mul(F, hb.rotation(0.5 * math.pi))
    right = hb.mat_mul(F, hb.rotation(-0.5 * math.pi))
    e1 = float(hb.frame_plus(left))
    e2 = float(hb.frame_plus(right))
    inner = float(hb.frame_plus(F))
    # counter-clockwise arc from e2 to e1 contains the forward endpoint of F
    start = e2
    width = float(np.mod(e1 - e2, hb.TWO_PI))
    if np.mod(inner - start, hb.TWO_PI) > width:
        start, width = e1, hb.TWO_PI - width
    return DirichletWall(np.asarray(g, dtype=float), GeodesicLine(e1, e2), (start, width), F)


def arc_contains(arc, theta, tol=0.0):
    start, width = arc
    return np.mod(np.asarray(theta) - start + tol, hb.TWO_PI) <= width + 2 * tol


def arcs_separation(arc1, arc2) -> float:
    """Smallest angular gap between two disjoint arcs (negative if they overlap)."""
    s1, w1 = arc1
    s2, w2 = arc2
    gap12 = np.mod(s2 - (s1 + w1), hb.TWO_PI)
    gap21 = np.mod(s1 - (s2 + w2), hb.TWO_PI)
    if gap12 + gap21 + w1 + w2 > hb.TWO_PI + 1e-12:
        return -1.0
    return float(min(gap12, gap21))


@dataclass
class GroupSpec:
    """A discrete group given by generators.

    kind is one of 'schottky', 'modular' or 'cyclic' ('trivial' is also accepted).
    A modular group is the principal congruence subgroup Gamma(level) of PSL(2,Z),
    given by a free generating set; the generators are checked to lie in
    Gamma(level) and to generate it inside a ball of radius 6."""

    kind: str
    generators: List[Isometry]
    name: str = ""
    basepoint: Point = hb.I
    level: int = 2
    walls: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        if self.kind not in ("schottky", "modular", "cyclic", "trivial"):
            raise GroupError(f"unknown group kind {self.kind!r}")
        self.generators = [g if isinstance(g, Isometry) else Isometry.from_array(g) for g in self.generators]
        if self.kind == "trivial":
            self.generators = []
            return
        if self.kind == "cyclic" and len(self.generators) != 1:
            raise GroupError("cyclic group needs exactly one generator")
        for g in self.generators:
            if g.kind() == "elliptic":
                raise GroupError(f"elliptic generator in group {self.name!r}")
        self._check_short_products()
        if self.kind in ("schottky", "modular"):
            self.walls = [dirichlet_wall(m, self.basepoint.z) for m in self.letter_mats()]
            if self.kind == "modular":
                self._check_modular()
            if self.kind == "schottky":
                for i, j in itertools.combinations(range(len(self.walls)), 2):
                    sep = arcs_separation(self.walls[i].arc, self.walls[j].arc)
                    if sep <= 1e-9:
                        raise GroupError(
                            f"ping-pong arcs {_letter_name(i)} and {_letter_name(j)} are not separated (gap {sep:.3g})"
                        )

    def _check_modular(self):
        if self.level < 2:
            raise GroupError("modular groups need level >= 2 (PSL(2,Z) has torsion)")
        if self.basepoint != hb.I:
            raise GroupError("modular groups are enumerated with basepoint i")
        for g in self.generators:
            m = g.matrix
            if np.max(np.abs(m - np.round(m))) > 1e-12:
                raise GroupError(f"generator {m} of {self.name!r} is not an integer matrix")
            r = np.round(m).astype(np.int64) % self.level
            if not (np.array_equal(r, [1, 0, 0, 1]) or np.array_equal(r, np.array([-1, 0, 0, -1]) % self.level)):
                raise GroupError(f"generator {m} of {self.name!r} is not in Gamma({self.level})")
        words = _bfs_orbit(self, self.basepoint, 6.0)
        lattice = _lattice_orbit(self, 6.0)
        if len(words[1]) != len(lattice[1]):
            raise GroupError(
                f"generators of {self.name!r} give {len(words[1])} elements within radius 6, "
                f"Gamma({self.level}) has {len(lattice[1])}"
            )

    @classmethod
    def trivial(cls, name="trivial"):
        return cls("trivial", [], name)

    def letter_mats(self) -> np.ndarray:
        """Generator matrices interleaved with their inverses: a, A, b, B, ..."""
        out = []
        for g in self.generators:
            out.append(g.matrix)
            out.append(g.inverse().matrix)
        return np.array(out).reshape(-1, 4)

    def _check_short_products(self):
        mats = self.letter_mats()
        n = len(mats)
        for length in range(1, 5):
            for word in itertools.product(range(n), repeat=length):
                if any(word[k] ^ 1 == word[k + 1] for k in range(length - 1)):
                    continue
                m = np.array([1.0, 0.0, 0.0, 1.0])
                for k in word:
                    m = hb.mat_mul(m, mats[k])
                tr = abs(m[0] + m[3])
                if tr < 2.0 - 1e-10:
                    raise GroupError(f"elliptic element of word length {length} in group {self.name!r}")


@dataclass
class OrbitTable:
    """Group elements within a radius, sorted by displacement.

    Words are kept implicitly: node[k] points into a prefix tree (tree_parent,
    tree_letter) that also holds prefixes lying outside the radius."""

    mats: np.ndarray
    disp: np.ndarray
    node: np.ndarray
    tree_parent: np.ndarray
    tree_letter: np.ndarray
    radius: float
    basepoint: Point
    group: Optional[GroupSpec] = None
    max_depth: int = 0

    def __len__(self):
        return len(self.disp)

    def word(self, k: int) -> str:
        if self.tree_parent is None:
            return reduce_word(self.group, self.mats[k])
        out = []
        j = int(self.node[k])
        while j >= 0 and self.tree_letter[j] >= 0:
            out.append(int(self.tree_letter[j]))
            j = int(self.tree_parent[j])
        return "".join(_letter_name(x) for x in reversed(out))

    def words(self) -> List[str]:
        return [self.word(k) for k in range(len(self))]

    def isometry(self, k: int) -> Isometry:
        return Isometry.from_array(self.mats[k])

    def points(self) -> np.ndarray:
        return hb.mobius_z(self.mats, self.basepoint.z)

    def count_within(self, r) -> np.ndarray:
        return np.searchsorted(self.disp, np.asarray(r) + 1e-12, side="right")

    def restrict(self, radius: float) -> "OrbitTable":
        """Sub-table of elements within a smaller radius (complete by construction)."""
        if radius > self.radius:
            raise GroupError("cannot restrict to a larger radius")
        n = int(self.count_within(radius))
        return OrbitTable(
            self.mats[:n], self.disp[:n], self.node[:n], self.tree_parent, self.tree_letter,
            float(radius), self.basepoint, self.group, self.max_depth,
        )


def _canonical_keys(mats: np.ndarray) -> np.ndarray:
    return np.round(hb.mat_canonical(mats) / DEDUP_QUANT).astype(np.int64)


def _row_view(keys: np.ndarray) -> np.ndarray:
    keys = np.ascontiguousarray(keys)
    return keys.view(np.dtype((np.void, keys.dtype.itemsize * keys.shape[1]))).ravel()


def _count_duplicates(keys: np.ndarray) -> int:
    v = np.sort(_row_view(keys))
    return int(np.sum(v[1:] == v[:-1]))


def _finish(group, x0, radius, mats, disp, node, tree_parent, tree_letter, depth):
    # deterministic order: displacement rounded to 1e-12, ties broken by shortlex
    # rank, which for this BFS equals the creation index
    order = np.lexsort((node, np.round(disp, 12)))
    mats, disp, node = hb.mat_canonical(mats[order]), disp[order], node[order]
    if tree_parent is None:
        # lattice enumeration: distinct integer matrices by construction
        return OrbitTable(mats, disp, np.arange(len(disp)), None, None, float(radius), x0, group, int(depth))
    n_dup = _count_duplicates(_canonical_keys(mats))
    if n_dup:
        raise GroupError(f"{n_dup} duplicate group elements after quantised dedup")
    return OrbitTable(mats, disp, node, tree_parent, tree_letter, float(radius), x0, group, int(depth))


def enumerate_orbit(group: GroupSpec, x0: Point = hb.I, radius: float = 10.0, cap: float = RADIUS_CAP) -> OrbitTable:
    """All group elements g with d(x0, g x0) <= radius."""
    if radius > cap:
        raise GroupError(f"orbit radius {radius} exceeds the configured cap {cap}")
    if group.kind == "trivial":
        one = np.array([-1])
        return OrbitTable(np.array([[1.0, 0, 0, 1.0]]), np.zeros(1), np.array([0]), one, one, float(radius), x0, group, 0)
    if group.kind == "cyclic":
        return _enumerate_cyclic(group, x0, radius)
    if group.basepoint != x0:
        group = GroupSpec(group.kind, group.generators, group.name, x0, group.level)
    if group.kind == "modular":
        mats, disp = _lattice_orbit(group, radius)
        return _finish(group, x0, radius, mats, disp, np.arange(len(disp)), None, None, 0)
    mats, disp, node, t_parent, t_letter, depth = _bfs_orbit(group, x0, radius)
    return _finish(group, x0, radius, mats, disp, node, t_parent, t_letter, depth)


def _lattice_orbit(group: GroupSpec, radius: float):
    """Elements of Gamma(level) within the radius of i, from the integer lattice:
    cosh d(i, g i) = (a^2 + b^2 + c^2 + d^2) / 2."""
    bound = int(math.floor(2.0 * math.cosh(radius) * (1 + 1e-12)))
    ints = kernels.congruence_lattice(bound, group.level)
    sq = np.sum(ints.astype(np.float64) ** 2, axis=1)
    disp = np.arccosh(np.maximum(sq / 2.0, 1.0))
    keep = disp <= radius
    ints, disp = ints[keep], disp[keep]
    mats = hb.mat_canonical(ints.astype(np.float64))
    # the lattice kernel emits each matrix once, in a fixed (c, d, k) loop order;
    # a stable sort keeps that order as the tie-break between equal displacements
    order = np.argsort(np.round(disp, 12), kind="stable")
    return mats[order], disp[order]


def _bfs_orbit(group: GroupSpec, x0: Point, radius: float):
    z0 = x0.z
    letters = group.letter_mats()
    walls = group.walls

    mats = [np.array([[1.0, 0.0, 0.0, 1.0]])]
    disp = [np.zeros(1)]
    node = [np.array([0])]
    t_parent = [np.array([-1])]
    t_letter = [np.array([-1])]
    n_tree = 1

    f_mats = mats[0]
    f_node = np.array([0])
    f_last = np.array([-1])
    f_inv_pt = np.array([z0], dtype=complex)
    depth = 0
    while len(f_mats):
        depth += 1
        cm, cpar, clet, cpt = [], [], [], []
        for h in range(len(letters)):
            ok = np.flatnonzero(f_last != (h ^ 1))
            if not len(ok):
                continue
            keep = walls[h].dist_from_outside(f_inv_pt[ok]) <= radius + 1e-12
            sel = ok[keep]
            if not len(sel):
                continue
            m = hb.mat_renorm(hb.mat_mul(f_mats[sel], letters[h]))
            cm.append(m)
            cpar.append(f_node[sel])
            clet.append(np.full(len(sel), h))
            cpt.append(hb.mobius_z(hb.mat_inv(m), z0))
        if not cm:
            break
        cm, cpar, clet, cpt = (np.concatenate(x) for x in (cm, cpar, clet, cpt))
        # children in shortlex order: parent (already shortlex) then letter
        o = np.lexsort((clet, cpar))
        cm, cpar, clet, cpt = cm[o], cpar[o], clet[o], cpt[o]
        ids = n_tree + np.arange(len(cm))
        n_tree += len(cm)
        t_parent.append(cpar)
        t_letter.append(clet)
        cd = hb.dist_z(z0, hb.mobius_z(cm, z0))
        inside = cd <= radius
        mats.append(cm[inside])
        disp.append(cd[inside])
        node.append(ids[inside])
        # nodes outside the radius stay in the frontier: their subtrees may return
        f_mats, f_node, f_last, f_inv_pt = cm, ids, clet, cpt
        if depth > 100_000:
            raise GroupError("orbit enumeration did not terminate")
    return (
        np.concatenate(mats), np.concatenate(disp), np.concatenate(node),
        np.concatenate(t_parent), np.concatenate(t_letter), depth,
    )


def reduce_word(group: GroupSpec, m) -> str:
    """Reduced word of a group element by ping-pong: if g x0 lies in D_h, the
    word of g starts with h and h^-1 g is strictly closer to the identity."""
    z0 = group.basepoint.z
    letters = group.letter_mats()
    integral = group.kind == "modular"
    m = np.asarray(m, dtype=float)
    out = []
    prev = -1
    for _ in range(10_000_000):
        z = complex(hb.mobius_z(m, z0))
        if hb.dist_z(z, z0) < 1e-9:
            return "".join(_letter_name(h) for h in out)
        sides = np.array([float(_side(w.inward, z)) for w in group.walls])
        cand = np.flatnonzero(sides > 1e-12)
        if not len(cand):
            # on a wall: take the lowest letter that does not undo the last one
            cand = [h for h in np.flatnonzero(sides > -1e-9) if h != (prev ^ 1)]
            if not len(cand):
                raise GroupError("element does not reduce to the identity")
        h = int(cand[0])
        m = hb.mat_mul(letters[h ^ 1], m)
        if integral:
            m = np.round(m)
        out.append(h)
        prev = h
    raise GroupError("word reduction did not terminate")


def _enumerate_cyclic(group: GroupSpec, x0: Point, radius: float) -> OrbitTable:
    """Powers g^k within the radius; displacement is monotone in |k| for
    hyperbolic and parabolic g."""
    z0 = x0.z
    g = group.generators[0].matrix
    mats = [np.array([1.0, 0.0, 0.0, 1.0])]
    disp = [0.0]
    powers = [0]
    for sign, step in ((1, g), (-1, hb.mat_inv(g))):
        m = np.array([1.0, 0.0, 0.0, 1.0])
        k = 0
        while True:
            k += 1
            m = hb.mat_renorm(hb.mat_mul(m, step))
            d = float(hb.dist_z(z0, hb.mobius_z(m, z0)))
            if d > radius:
                break
            mats.append(m)
            disp.append(d)
            powers.append(sign * k)
    mats = np.array(mats)
    disp = np.array(disp)
    powers = np.array(powers)
    # prefix tree for words a^k / A^k: node id encodes the power
    kmax = int(np.max(np.abs(powers))) if len(powers) else 0
    # tree: 0 = identity, 1..kmax = a^k, kmax+1..2kmax = A^k
    t_parent = np.concatenate([[-1], np.arange(0, kmax), [0], kmax + np.arange(1, kmax)])
    t_letter = np.concatenate([[-1], np.zeros(kmax, int), np.ones(kmax, int)])
    node = np.where(powers > 0, powers, np.where(powers < 0, kmax - powers, 0))
    return _finish(group, x0, radius, mats, disp, node, t_parent.astype(int), t_letter.astype(int), kmax)


# ---------------------------------------------------------------------------
# growth


@dataclass(frozen=True)
class ExponentFit:
    delta: float
    stderr: float
    shells: np.ndarray
    counts: np.ndarray

    def __iter__(self):
        return iter((self.delta, self.stderr))


def shell_counts(T: OrbitTable, width: float = 1.0):
    """Card{g : d(x0, g x0) <= n * width} for n = 1 .. floor(radius / width)."""
    n = np.arange(1, int(math.floor(T.radius / width + 1e-9)) + 1)
    r = n * width
    return r, T.count_within(r).astype(float)


def fit_log_slope(r, counts):
    """Least-squares slope of log counts vs r with its standard error."""
    if len(r) < 3:
        raise GroupError(f"too few shells ({len(r)}) for a slope fit")
    res = stats.linregress(r, np.log(counts))
    return float(res.slope), float(res.stderr), float(res.intercept)


def critical_exponent(T: OrbitTable, width: float = 1.0, min_radius: float = 8.0) -> ExponentFit:
    """Growth rate of the orbit from the slope of log Card over the last half of
    the radius range."""
    if T.radius < min_radius:
        raise GroupError(f"radius {T.radius} below {min_radius}: too few shells")
    r, counts = shell_counts(T, width)
    sel = r >= 0.5 * T.radius
    if sel.sum() < 3:
        raise GroupError("too few shells in the fitting range")
    slope, se, _ = fit_log_slope(r[sel], counts[sel])
    return ExponentFit(slope, se, r, counts)


def poincare_series(T: OrbitTable, s: float, delta: Optional[float] = None):
    """Truncated Poincare series at exponent s plus an estimate of the missing tail.

    The tail assumes Card(t) ~ c e^{delta t} beyond the radius, giving
    c delta e^{(delta - s) R} / (s - delta); it is infinite for s <= delta."""
    if s <= 0:
        raise GroupError("Poincare series needs s > 0")
    value = float(np.sum(np.exp(-s * T.disp)))
    if delta is None:
        delta = critical_exponent(T).delta if T.radius >= 8 else 0.0
    R = T.radius
    c = len(T) / math.exp(delta * R)
    if s <= delta:
        return value, math.inf
    tail = c * delta * math.exp((delta - s) * R) / (s - delta)
    return value, float(tail)


@dataclass(frozen=True)
class GrowthCheck:
    c: float
    passed: bool
    degenerate: bool = False


def regular_growth_check(T: OrbitTable, delta: float, cap: float = 50.0, width: float = 1.0) -> GrowthCheck:
    """Smallest c with e^{delta N}/c <= Card(N) <= c e^{delta N} over integer shells."""
    if delta <= 1e-3:
        return GrowthCheck(math.nan, False, True)
    r, counts = shell_counts(T, width)
    ratio = counts / np.exp(delta * r)
    c = float(np.max(np.maximum(ratio, 1.0 / ratio)))
    return GrowthCheck(c, c < cap)


# ---------------------------------------------------------------------------
# cosets of cyclic subgroups


def _disp(mats, z0):
    return hb.dist_z(z0, hb.mobius_z(mats, z0))


def coset_minimisers(h: np.ndarray, mats: np.ndarray, z0: complex, max_steps: int = 1_000_000):
    """For each g, the element h^k g of least displacement.

    k -> d(x0, h^k g x0) = d(h^-k x0, g x0) is unimodal for hyperbolic and
    parabolic h, so a walk from k = 0 in the descending direction finds the
    minimum.  Equal neighbours are resolved toward the lexicographically smaller
    quantised matrix so every member of a coset lands on the same element."""
    h = np.asarray(h, dtype=float)
    hi = hb.mat_inv(h)
    cur = np.array(mats, dtype=float)
    d = _disp(cur, z0)
    k = np.zeros(len(cur), dtype=np.int64)
    for step_mat, sgn in ((h, 1), (hi, -1)):
        active = np.ones(len(cur), dtype=bool)
        for _ in range(max_steps):
            idx = np.flatnonzero(active)
            if not len(idx):
                break
            nxt = hb.mat_mul(step_mat, cur[idx])
            dn = _disp(nxt, z0)
            better = dn < d[idx] - 1e-12
            take = idx[better]
            cur[take] = nxt[better]
            d[take] = dn[better]
            k[take] += sgn
            active[:] = False
            active[take] = True
    # resolve plateaus of two equal minima
    for step_mat in (h, hi):
        nxt = hb.mat_mul(step_mat, cur)
        dn = _disp(nxt, z0)
        tie = np.abs(dn - d) <= 1e-9
        if tie.any():
            a = _canonical_keys(cur[tie])
            b = _canonical_keys(nxt[tie])
            smaller = np.array([tuple(x) > tuple(y) for x, y in zip(a, b)])
            idx = np.flatnonzero(tie)[smaller]
            cur[idx] = nxt[tie][smaller]
            d[idx] = dn[tie][smaller]
    return hb.mat_canonical(cur), d, k


@dataclass
class CosetReps:
    mats: np.ndarray
    disp: np.ndarray
    member_rep: np.ndarray  # index of the representative for every table entry
    member_power: np.ndarray  # g = h^{-k} rep

    def __len__(self):
        return len(self.disp)

    def isometries(self) -> List[Isometry]:
        return [Isometry.from_array(m) for m in self.mats]


def coset_reps_min_displacement(G: GroupSpec, H: GroupSpec, T: OrbitTable) -> CosetReps:
    """One minimal-displacement representative for each right coset H g meeting T."""
    if H.kind == "trivial":
        mats = hb.mat_canonical(T.mats)
        return CosetReps(mats, T.disp.copy(), np.arange(len(T)), np.zeros(len(T), dtype=np.int64))
    if H.kind != "cyclic":
        raise GroupError(f"subgroup kind {H.kind!r} is not supported for coset representatives")
    h = H.generators[0].matrix
    rep, d, k = coset_minimisers(h, T.mats, T.basepoint.z)
    keys = _canonical_keys(rep)
    uniq, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    order = np.lexsort((first, np.round(d[first], 12)))
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    return CosetReps(rep[first][order], d[first][order], rank[inverse.ravel()], k)


@dataclass(frozen=True)
class RelativeGrowth:
    exponent: float
    c2: float
    n_reps: int
    finite_index: bool = False


def relative_growth(H_small: GroupSpec, H_big: GroupSpec, T_big: OrbitTable, min_reps: int = 20) -> RelativeGrowth:
    """Growth rate of Card{cosets H_small g of H_big with min displacement <= t}."""
    reps = coset_reps_min_displacement(H_big, H_small, T_big)
    r, counts = shell_counts(OrbitTable(reps.mats, reps.disp, np.arange(len(reps)), None, None, T_big.radius, T_big.basepoint))
    counts = np.maximum(counts, 1.0)
    sel = r >= 0.5 * T_big.radius
    if len(reps) < min_reps:
        # finitely many cosets: the count saturates, the exponent is 0
        if np.all(counts[sel] == counts[-1]):
            return RelativeGrowth(0.0, float(counts[-1]), len(reps), True)
        raise GroupError(f"only {len(reps)} coset representatives (< {min_reps})")
    slope, _, _ = fit_log_slope(r[sel], counts[sel])
    ratio = counts / np.exp(slope * r)
    c2 = float(np.max(np.maximum(ratio, 1.0 / ratio)))
    return RelativeGrowth(slope, c2, len(reps))


def cyclic_line_stabiliser(g: Isometry, line: GeodesicLine, kmax: int = 1000) -> GroupSpec:
    """The subgroup of <g> preserving a geodesic line (as a set)."""
    ends = np.array([line.minus, line.plus])
    m = np.array([1.0, 0.0, 0.0, 1.0])
    for k in range(1, kmax + 1):
        m = hb.mat_mul(m, g.matrix)
        img = hb.mobius_theta(m, ends)
        same = hb.angle_gap(img[0], ends[0]) < 1e-9 and hb.angle_gap(img[1], ends[1]) < 1e-9
        swap = hb.angle_gap(img[0], ends[1]) < 1e-9 and hb.angle_gap(img[1], ends[0]) < 1e-9
        if same or swap:
            return GroupSpec("cyclic", [Isometry.from_array(m)], f"stab^{k}")
    return GroupSpec.trivial("trivial stabiliser")
