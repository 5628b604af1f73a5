"""Free groups acting on H^2: words, Schottky (ping-pong) certificates,
cocycles with their exact deformation paths, and meshed Dirichlet domains.

Words are tuples of nonzero signed indices: letter +i is the i-th generator
(1-based), -i its inverse.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import Delaunay, HalfspaceIntersection, cKDTree

from .core import (
    BASEPOINT,
    GeometryError,
    Isom,
    Tangent,
    cross,
    dist,
    group_exp,
    killing_eval,
    log_point,
    mink,
    normalize_point,
    qform,
)

Word = tuple  # of nonzero ints


class PingPongInconclusive(GeometryError):
    """No ping-pong certificate found (not a disproof of discreteness)."""


class DomainOpen(GeometryError):
    """Truncation radius too small for the Dirichlet walls to appear."""


# ---------------------------------------------------------------- words ----

def reduce_word(letters) -> Word:
    out = []
    for l in letters:
        if out and out[-1] == -l:
            out.pop()
        else:
            out.append(int(l))
    return tuple(out)


def inverse_word(w: Word) -> Word:
    return tuple(-l for l in reversed(w))


def mul_words(a: Word, b: Word) -> Word:
    return reduce_word(tuple(a) + tuple(b))


def enumerate_words(rank: int, n_max: int):
    """Yield every nonempty freely reduced word of length <= n_max once."""
    letters = [i for i in range(1, rank + 1)] + [-i for i in range(1, rank + 1)]
    frontier = [(l,) for l in letters]
    while frontier:
        nxt = []
        for w in frontier:
            yield w
            if len(w) < n_max:
                for l in letters:
                    if l != -w[-1]:
                        nxt.append(w + (l,))
        frontier = nxt


def cyclic_reduce(w: Word) -> Word:
    w = reduce_word(w)
    while len(w) >= 2 and w[0] == -w[-1]:
        w = w[1:-1]
    return w


def conjugacy_rep(w: Word) -> Word:
    """Canonical representative: lexicographic minimum over cyclic rotations
    of the cyclically reduced word and of its inverse."""
    w = cyclic_reduce(w)
    if not w:
        return w
    best = None
    for cand in (w, inverse_word(w)):
        for i in range(len(cand)):
            rot = cand[i:] + cand[:i]
            if best is None or rot < best:
                best = rot
    return best


def conjugacy_classes(rank: int, n_max: int):
    """Deduplicated conjugacy-class representatives of length <= n_max."""
    seen = set()
    out = []
    for w in enumerate_words(rank, n_max):
        r = conjugacy_rep(w)
        if r and r not in seen:
            seen.add(r)
            out.append(r)
    return out


# ------------------------------------------------- representations ---------

@dataclass(frozen=True)
class Representation:
    gens: tuple  # of Isom

    @property
    def rank(self) -> int:
        return len(self.gens)

    def gen(self, letter: int) -> Isom:
        g = self.gens[abs(letter) - 1]
        return g if letter > 0 else g.inverse()

    def eval(self, w: Word) -> Isom:
        out = Isom.identity()
        for l in w:
            out = out @ self.gen(l)
        return out


def eval_rep(r: Representation, w: Word) -> Isom:
    return r.eval(w)


@dataclass(frozen=True)
class Cocycle:
    values: tuple  # of MinkVec, one per generator

    def __add__(self, other):
        return Cocycle(tuple(a + b for a, b in zip(self.values, other.values)))

    def scale(self, c: float):
        return Cocycle(tuple(c * v for v in self.values))


def eval_cocycle(j: Representation, u: Cocycle, w: Word) -> np.ndarray:
    """Extend generator values by u(ab) = u(a) + Ad(j(a)) u(b)."""
    val = np.zeros(3)
    g = Isom.identity()
    for l in w:
        gi = j.gen(l)
        if l > 0:
            ui = np.asarray(u.values[l - 1], float)
        else:
            ui = -(gi.lorentz @ np.asarray(u.values[-l - 1], float))
        val = val + g.lorentz @ ui
        g = g @ gi
    return val


def coboundary(j: Representation, x0) -> Cocycle:
    x0 = np.asarray(x0, float)
    return Cocycle(tuple(x0 - g.lorentz @ x0 for g in j.gens))


def affine_action(j: Representation, u: Cocycle, w: Word, x) -> np.ndarray:
    """The affine action of w on g-vectors: x -> Ad(j(w)) x + u(w)."""
    return j.eval(w).lorentz @ np.asarray(x, float) + eval_cocycle(j, u, w)


def rho_t(j: Representation, u: Cocycle, t: float) -> Representation:
    """Deformed holonomy: generator -> exp(t u_i) j_i (exact for free groups)."""
    return Representation(tuple(
        group_exp(t * np.asarray(ui, float)) @ gi
        for ui, gi in zip(u.values, j.gens)))


# ------------------------------------------------------- ping pong ---------

def bisector_normal(c, o) -> np.ndarray:
    """Unit spacelike m with {<p|m> >= 0} = {p closer to o than to c}."""
    m = np.asarray(o, float) - np.asarray(c, float)
    return m / np.sqrt(qform(m))


@dataclass(frozen=True)
class PingPongCertificate:
    center: np.ndarray
    halfplanes: dict  # (gen index 1-based, sign) -> unit normal m

    def halfplane(self, letter: int) -> np.ndarray:
        return self.halfplanes[(abs(letter), 1 if letter > 0 else -1)]


def ping_pong_check(r: Representation, center=None, n_samples=64) -> PingPongCertificate:
    """Schottky certificate: pairwise disjoint bisector half-planes.

    U_i^+ = points closer to g_i(center) than to center, U_i^- likewise for
    g_i^{-1}; each g_i maps the complement of U_i^- into U_i^+ automatically,
    so pairwise disjointness of the 2*rank closed half-planes certifies
    freeness, discreteness and convex cocompactness.
    """
    c = BASEPOINT if center is None else np.asarray(center, float)
    planes = {}
    for i, g in enumerate(r.gens, start=1):
        if g.classify() != "hyperbolic":
            raise PingPongInconclusive("generator %d is not hyperbolic" % i)
        for sgn, h in ((1, g), (-1, g.inverse())):
            o = h.apply(c)
            if dist(o, c) < 1e-9:
                raise PingPongInconclusive("generator %d fixes the center" % i)
            planes[(i, sgn)] = bisector_normal(c, o)
    keys = sorted(planes)
    for a in range(len(keys)):
        for b in range(a + 1, len(keys)):
            if mink(planes[keys[a]], planes[keys[b]]) >= -1.0:
                raise PingPongInconclusive(
                    "half-planes %s and %s are not disjoint" % (keys[a], keys[b]))
    # numeric spot check of the mapping condition on boundary samples
    for i, g in enumerate(r.gens, start=1):
        m_minus = planes[(i, -1)]
        m_plus = planes[(i, 1)]
        for s in np.linspace(0, 2 * np.pi, n_samples, endpoint=False):
            p = normalize_point(c + 0.95 * np.array([np.cos(s), np.sin(s), 1.0]))
            if mink(p, m_minus) < 0:  # outside U_i^-
                if mink(g.apply(p), m_plus) < -1e-9:
                    raise PingPongInconclusive("mapping condition failed (gen %d)" % i)
    return PingPongCertificate(center=c, halfplanes=planes)


# ------------------------------------------------- Dirichlet domains -------

def translate_to(c) -> Isom:
    """Hyperbolic translation taking BASEPOINT to c along the geodesic."""
    w = log_point(BASEPOINT, c).vec
    return group_exp(cross(BASEPOINT, w))


def to_klein(p):
    p = np.asarray(p, float)
    return p[..., :2] / p[..., 2:3] if p.ndim > 1 else p[:2] / p[2]


def from_klein(xy):
    xy = np.asarray(xy, float)
    v = np.array([xy[0], xy[1], 1.0])
    return normalize_point(v)


def to_poincare(p):
    p = np.asarray(p, float)
    if p.ndim > 1:
        return p[..., :2] / (1.0 + p[..., 2:3])
    return p[:2] / (1.0 + p[2])


@dataclass
class Wall:
    word: Word            # orbit word: wall bisects center and j(word)*center
    normal: np.ndarray    # unit spacelike, domain side has <p|normal> <= 0
    partner: int = -1     # index of the wall carrying the inverse word
    vertex_ids: tuple = ()


@dataclass
class DirichletDomain:
    """Truncated Dirichlet fundamental domain with a matched triangulation.

    Vertices are hyperboloid points.  Wall vertices are identified across
    face pairings: vertex i equals the action of rep_word[i] applied to
    vertex rep_index[i], which is the canonical representative of its class.
    """

    rep: Representation
    center: np.ndarray
    radius: float
    h: float
    walls: list
    verts: np.ndarray          # (n, 3)
    tris: np.ndarray           # (m, 3)
    rep_index: np.ndarray      # (n,) int
    rep_word: list             # (n,) Word, verts[i] = j(rep_word[i]) verts[rep_index[i]]
    _klein: np.ndarray = None  # centered Klein coordinates of verts
    _tri: Delaunay = None
    _centering: Isom = None    # maps BASEPOINT to center

    @property
    def n_verts(self) -> int:
        return len(self.verts)

    def free_vertices(self) -> np.ndarray:
        return np.nonzero(self.rep_index == np.arange(self.n_verts))[0]

    def edges(self) -> np.ndarray:
        e = set()
        for t in self.tris:
            for a, b in ((t[0], t[1]), (t[1], t[2]), (t[0], t[2])):
                e.add((min(a, b), max(a, b)))
        return np.array(sorted(e))

    def unfold(self, p, max_iter=200, tol=1e-12):
        """Pull p into the domain; returns (p0, word) with p = j(word) p0."""
        p = np.asarray(p, float)
        word = ()
        for _ in range(max_iter):
            viol = [(mink(p, w.normal), k) for k, w in enumerate(self.walls)]
            worst, k = max(viol)
            if worst <= tol:
                return p, word
            w = self.walls[k]
            p = self.rep.eval(w.word).inverse().apply(p)
            word = mul_words(word, w.word)
        raise GeometryError("unfolding did not terminate")

    def locate(self, p):
        """Containing triangle and barycentric weights for a domain point."""
        xy = to_klein(self._centering.inverse().apply(p))
        s = self._tri.find_simplex(xy[None, :], tol=1e-8)[0]
        if s < 0:
            raise GeometryError("point outside the meshed domain")
        simplex = self._tri.simplices[s]
        T = self._tri.transform[s]
        bary2 = T[:2] @ (xy - T[2])
        bary = np.array([bary2[0], bary2[1], 1.0 - bary2.sum()])
        return simplex, np.clip(bary, 0.0, 1.0)

    def contains(self, p, slack=1e-9) -> bool:
        return all(mink(p, w.normal) <= slack for w in self.walls) and \
            dist(p, self.center) <= self.radius + slack

    def area(self) -> float:
        """Total hyperbolic area by angle-defect summation over triangles."""
        total = 0.0
        for t in self.tris:
            a, b, c = self.verts[t]
            ang = 0.0
            for p, q, r in ((a, b, c), (b, c, a), (c, a, b)):
                v1 = log_point(p, q).vec
                v2 = log_point(p, r).vec
                cosang = mink(v1, v2) / np.sqrt(qform(v1) * qform(v2))
                ang += np.arccos(np.clip(cosang, -1.0, 1.0))
            total += max(0.0, np.pi - ang)
        return total


def _wall_segment_subdiv(pa, pb, h):
    """Points subdividing the geodesic [pa, pb] at spacing about h."""
    d = dist(pa, pb)
    n = max(1, int(np.ceil(d / h)))
    t = log_point(pa, pb)
    return [exp_for(t, s * d / n) for s in range(n + 1)]


def exp_for(t: Tangent, length: float):
    """Point at the given distance along the unit-speed geodesic of t."""
    r = t.norm
    if r < 1e-300:
        return t.base.copy()
    return np.cosh(length) * t.base + np.sinh(length) / r * t.vec


def dirichlet_domain(r: Representation, center=None, word_depth: int = 3,
                     radius: float = None, h: float = 0.1) -> DirichletDomain:
    """Half-plane intersection over the orbit word ball, truncated at radius,
    with a triangulation whose wall vertices match under the pairings."""
    c = BASEPOINT if center is None else np.asarray(center, float)
    T = translate_to(c)
    Tinv = T.inverse()

    # orbit points and candidate walls, in centered coordinates
    cand = {}
    for w in enumerate_words(r.rank, word_depth):
        o = Tinv.apply(r.eval(w).apply(c))
        if dist(o, BASEPOINT) < 1e-9:
            continue
        key = tuple(np.round(o / o[2], 9))
        if key not in cand or len(w) < len(cand[key][0]):
            cand[key] = (w, o)
    if radius is None:
        # core estimate: the generator bisectors pass at half the length-1
        # orbit distances; the convex core of the tile lives inside that
        radius = 1.0 + max(dist(BASEPOINT, o) / 2
                           for w, o in cand.values() if len(w) == 1)
    # the 96-gon truncation corners must stay inside the Klein disk
    radius = min(radius, np.arctanh(0.999 * np.cos(np.pi / 96)))

    # halfspaces in Klein coordinates: m1 X + m2 Y - m3 <= 0
    words, normals, halfspaces = [], [], []
    for w, o in sorted(cand.values(), key=lambda t: (len(t[0]), t[0])):
        m = bisector_normal(BASEPOINT, o)
        words.append(w)
        normals.append(m)
        halfspaces.append([m[0], m[1], -m[2]])
    rk = np.tanh(radius)
    for s in np.linspace(0, 2 * np.pi, 96, endpoint=False):
        halfspaces.append([np.cos(s), np.sin(s), -rk])
    hs = HalfspaceIntersection(np.array(halfspaces), np.zeros(2))

    # polygon vertices in circular order, and which walls are active
    poly = hs.intersections
    order = np.argsort(np.arctan2(poly[:, 1], poly[:, 0]))
    poly = poly[order]
    active = set()
    for k, (m0, m1, b) in enumerate(halfspaces[:len(words)]):
        if np.min(np.abs(poly @ np.array([m0, m1]) + b)) < 1e-9:
            active.add(k)
    if not active:
        raise DomainOpen("no Dirichlet wall within the truncation radius")
    widx = {words[k]: k for k in active}
    for k in sorted(active):
        if inverse_word(words[k]) not in widx:
            raise DomainOpen("wall %s has no partner wall" % (words[k],))

    walls = []
    wall_of_word = {}
    for k in sorted(active):
        wall_of_word[words[k]] = len(walls)
        walls.append(Wall(word=words[k], normal=normals[k]))
    for w in walls:
        w.partner = wall_of_word[inverse_word(w.word)]

    # --- vertex construction ------------------------------------------
    verts = []          # centered hyperboloid coordinates
    vkey = {}

    def add_vertex(p):
        key = tuple(np.round(to_poincare(p), 8))
        if key in vkey:
            return vkey[key]
        verts.append(normalize_point(p))
        vkey[key] = len(verts) - 1
        return vkey[key]

    # wall segments: clip each active wall's geodesic by the polygon
    ident_edges = []    # (child, parent, word): child = j(word) * parent
    wall_pts = {}
    for wi, w in enumerate(walls):
        if w.partner < wi:
            continue  # handled from the partner side (or self-paired: wi==partner impossible)
        seg = _wall_polygon_segment(w.normal, poly)
        if seg is None:
            continue
        pts = _wall_segment_subdiv(seg[0], seg[1], h)
        ids = [add_vertex(p) for p in pts]
        wall_pts[wi] = ids
        # partner vertices are the images under j(word)^{-1} (centered coords)
        gm = (Tinv @ r.eval(w.word).inverse() @ T)
        pids = [add_vertex(gm.apply(p)) for p in pts]
        wall_pts[w.partner] = pids
        winv = inverse_word(w.word)
        for a, b in zip(pids, ids):
            # verts[a] = j(winv) verts[b] in centered coordinates
            ident_edges.append((a, b, winv))
    for wi, w in enumerate(walls):
        w.vertex_ids = tuple(wall_pts.get(wi, ()))

    boundary_ids = set(i for ids in wall_pts.values() for i in ids)

    # truncation-arc vertices between walls
    arc_pts = []
    n_arc = max(8, int(np.ceil(2 * np.pi * np.sinh(radius) / h)))
    for s in np.linspace(0, 2 * np.pi, n_arc, endpoint=False):
        p = normalize_point(np.array([rk * np.cos(s), rk * np.sin(s), 1.0]))
        if all(mink(p, w.normal) <= -np.sinh(0.4 * h) for w in walls):
            arc_pts.append(p)
    # interior sampling: rings at hex spacing, kept clear of the boundary
    interior = []
    row = 0.5 * np.sqrt(3.0) * h
    n_rings = int(np.floor((radius - 0.45 * h) / row))
    for i in range(n_rings + 1):
        s = i * row
        if i == 0:
            ring = [BASEPOINT.copy()]
        else:
            m = max(6, int(np.round(2 * np.pi * np.sinh(s) / h)))
            rkl = np.tanh(s)
            ring = [normalize_point(np.array([rkl * np.cos(a), rkl * np.sin(a), 1.0]))
                    for a in np.linspace(0, 2 * np.pi, m, endpoint=False)
                    + (i % 2) * np.pi / m]
        for p in ring:
            if all(mink(p, w.normal) <= -np.sinh(0.45 * h) for w in walls):
                interior.append(p)
    # drop interior/arc points that crowd existing boundary vertices
    keep = []
    bverts = [verts[i] for i in sorted(boundary_ids)]
    if bverts:
        btree = cKDTree(to_poincare(np.array(bverts)))
    for p in arc_pts + interior:
        xy = to_poincare(p)
        conf = (1.0 - xy @ xy) / 2.0  # local euclidean radius of hyp 0.45h
        if bverts and btree.query_ball_point(xy, 0.45 * h * conf):
            continue
        keep.append(p)
    for p in keep:
        add_vertex(p)

    verts = np.array(verts)
    kl = to_klein(verts)
    tri = Delaunay(kl)

    # identification classes via BFS over the pairing edges
    n = len(verts)
    adj = {}
    # adj[v] entries (nb, w) satisfy verts[v] = j(w) verts[nb]
    for a, b, w in ident_edges:
        adj.setdefault(a, []).append((b, w))
        adj.setdefault(b, []).append((a, inverse_word(w)))
    rep_index = np.arange(n)
    rep_word = [()] * n
    seen = set()
    for start in sorted(adj):
        if start in seen:
            continue
        # words_from[v] satisfies verts[v] = j(words_from[v]) verts[start]
        words_from = {start: ()}
        queue = [start]
        while queue:
            v = queue.pop()
            for nb, w in adj.get(v, ()):  # verts[v] = j(w) verts[nb]
                if nb not in words_from:
                    words_from[nb] = mul_words(inverse_word(w), words_from[v])
                    queue.append(nb)
        seen.update(words_from)
        rep = min(words_from)
        to_rep = inverse_word(words_from[rep])
        for v, wv in words_from.items():
            rep_index[v] = rep
            rep_word[v] = mul_words(wv, to_rep)

    dom = DirichletDomain(
        rep=r, center=c, radius=radius, h=h, walls=walls,
        verts=np.array([T.apply(p) for p in verts]),
        tris=tri.simplices.copy(), rep_index=rep_index, rep_word=rep_word,
        _klein=kl, _tri=tri, _centering=T)
    # express wall normals in the original (uncentered) coordinates
    for w in dom.walls:
        w.normal = (T.lorentz @ w.normal)
    return dom


def _wall_polygon_segment(normal, poly):
    """Clip the geodesic <p|normal> = 0 by the Klein polygon; endpoints."""
    vals = poly @ normal[:2] - normal[2]
    pts = []
    n = len(poly)
    for i in range(n):
        a, b = vals[i], vals[(i + 1) % n]
        if abs(a) < 1e-12:
            pts.append(poly[i])
        elif a * b < 0:
            t = a / (a - b)
            pts.append(poly[i] + t * (poly[(i + 1) % n] - poly[i]))
    if len(pts) < 2:
        return None
    pts = np.array(pts)
    # the two extreme points along the wall direction
    direction = np.array([-normal[1], normal[0]])
    proj = pts @ direction
    pa, pb = pts[np.argmin(proj)], pts[np.argmax(proj)]
    if np.linalg.norm(pa - pb) < 1e-10:
        return None
    return from_klein(pa), from_klein(pb)
