"""Vector fields on H^2: the d' calculus, Fermi coordinates with standard
funnel fields, lipschitz-constant sampling, the discrete minimax solver for
optimal equivariant fields, and the geodesic flow-back."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import coo_matrix, csr_matrix
from scipy.sparse import hstack as hstack_sparse, vstack as vstack_sparse
from scipy.spatial import cKDTree

from .core import (
    GeometryError,
    Isom,
    Tangent,
    axis_point,
    cross,
    dist,
    eigen_frame,
    exp_point,
    killing_eval,
    log_point,
    mink,
    normalize_point,
    project_tangent,
    qform,
)
from .groups import (
    Cocycle,
    DirichletDomain,
    Representation,
    eval_cocycle,
    inverse_word,
    mul_words,
    to_poincare,
)


class CoincidentBase(GeometryError):
    """d' is undefined for a pair with the same base point."""


class SolverStall(GeometryError):
    """Minimax solve did not reach the requested tolerance."""


class TNotAdmissible(GeometryError):
    """Flow-back time outside (-1/R, 0)."""


class SourceSolveFail(GeometryError):
    """Flow-back source iteration did not converge."""


def d_prime(xp: Tangent, xq: Tangent) -> float:
    """Rate of change of d(p, q) when the endpoints move with xp, xq.

    Equals the difference of the signed projections onto the oriented
    geodesic through p and q.
    """
    d = dist(xp.base, xq.base)
    if d < 1e-12:
        raise CoincidentBase("d' needs distinct base points")
    u_p = log_point(xp.base, xq.base).vec / d
    u_q = -log_point(xq.base, xp.base).vec / d
    return mink(xq.vec, u_q) - mink(xp.vec, u_p)


def parallel_transport(p, q, v) -> np.ndarray:
    """Parallel transport of tangent vector v from p to q along the geodesic."""
    denom = 1.0 - mink(p, q)  # = 1 + cosh d
    return np.asarray(v, float) + mink(q, v) / denom * (np.asarray(p) + np.asarray(q))


# --------------------------------------------------- Fermi coordinates -----

@dataclass(frozen=True)
class FermiFrame:
    """Oriented geodesic axis with a basepoint: p0 on the axis, a the unit
    tangent in the positive xi direction, n the unit normal (eta direction)."""

    p0: np.ndarray
    a: np.ndarray
    n: np.ndarray

    @classmethod
    def from_isom(cls, g: Isom, basepoint=None) -> "FermiFrame":
        fr = eigen_frame(g)
        p0 = axis_point(fr) if basepoint is None else np.asarray(basepoint, float)
        if abs(mink(p0, fr.c_zero)) > 1e-9:
            raise GeometryError("basepoint does not lie on the axis")
        a = killing_eval(fr.c_zero, p0).vec
        return cls(p0=p0, a=a, n=fr.c_zero)

    @classmethod
    def from_endpoints(cls, light_minus, light_plus) -> "FermiFrame":
        n = cross(np.asarray(light_minus, float), np.asarray(light_plus, float))
        n = n / np.sqrt(qform(n))
        p0 = normalize_point(np.asarray(light_minus) / light_minus[2]
                             + np.asarray(light_plus) / light_plus[2])
        a = killing_eval(n, p0).vec
        return cls(p0=p0, a=a, n=n)


def fermi(frame: FermiFrame, p):
    """Coordinates (xi, eta): signed distances along and off the axis."""
    eta = float(np.arcsinh(mink(p, frame.n)))
    axis_pt = (np.asarray(p, float) - np.sinh(eta) * frame.n) / np.cosh(eta)
    xi = float(np.arcsinh(mink(axis_pt, frame.a)))
    return xi, eta


def fermi_inv(frame: FermiFrame, xi, eta):
    axis_pt = np.cosh(xi) * frame.p0 + np.sinh(xi) * frame.a
    return np.cosh(eta) * axis_pt + np.sinh(eta) * frame.n


def fermi_frame_vectors(frame: FermiFrame, xi, eta):
    """Coordinate vector fields dF/dxi and dF/deta at (xi, eta)."""
    axis_pt = np.cosh(xi) * frame.p0 + np.sinh(xi) * frame.a
    axis_dt = np.sinh(xi) * frame.p0 + np.cosh(xi) * frame.a
    d_xi = np.cosh(eta) * axis_dt
    d_eta = np.sinh(eta) * axis_pt + np.cosh(eta) * frame.n
    return d_xi, d_eta


@dataclass(frozen=True)
class StandardField:
    """X = k xi dF/dxi + r eta dF/deta in Fermi coordinates of the frame."""

    frame: FermiFrame
    k: float
    r: float

    def __call__(self, p) -> Tangent:
        xi, eta = fermi(self.frame, p)
        d_xi, d_eta = fermi_frame_vectors(self.frame, xi, eta)
        return Tangent(np.asarray(p, float),
                       self.k * xi * d_xi + self.r * eta * d_eta)


def standard_eval(sf: StandardField, p) -> Tangent:
    return sf(p)


# ------------------------------------------------------- lip sampling ------

def sample_disk(center, radius, rng):
    """Area-uniform random point of the hyperbolic disk."""
    s = np.arccosh(1.0 + rng.random() * (np.cosh(radius) - 1.0))
    th = rng.random() * 2 * np.pi
    e1, e2 = tangent_basis(center)
    return exp_point(Tangent(center, s * (np.cos(th) * e1 + np.sin(th) * e2)))


def tangent_basis(p):
    """Orthonormal basis of the tangent plane at p."""
    seed = np.array([1.0, 0.0, 0.0])
    if abs(mink(seed, p)) > 0.9 * abs(p[2]):
        seed = np.array([0.0, 1.0, 0.0])
    e1 = project_tangent(p, seed)
    e1 = e1 / np.sqrt(qform(e1))
    e2 = cross(p, e1)
    e2 = e2 / np.sqrt(qform(e2))
    return e1, e2


def random_pair(center, radius, h_range, rng):
    p = sample_disk(center, radius, rng)
    e1, e2 = tangent_basis(p)
    th = rng.random() * 2 * np.pi
    h = h_range[0] + rng.random() * (h_range[1] - h_range[0])
    q = exp_point(Tangent(p, h * (np.cos(th) * e1 + np.sin(th) * e2)))
    return p, q


def lip_sample(fieldf, region, n_pairs=2000, h_range=(0.05, 0.3),
               rng=None, refine_rounds=3):
    """Max of d'/d over stratified random pairs, with local refinement."""
    center, radius = region
    rng = np.random.default_rng(0) if rng is None else rng
    best = -np.inf
    best_pair = None
    for _ in range(n_pairs):
        p, q = random_pair(center, radius, h_range, rng)
        val = d_prime(fieldf(p), fieldf(q)) / dist(p, q)
        if val > best:
            best, best_pair = val, (p, q)
    # refine around the maximizer with shrinking jitter
    scale = 0.5 * (h_range[0] + h_range[1])
    for _ in range(refine_rounds):
        p0, q0 = best_pair
        for _ in range(max(40, n_pairs // 20)):
            p = sample_disk(p0, 0.5 * scale, rng)
            q = sample_disk(q0, 0.5 * scale, rng)
            d = dist(p, q)
            if d < 1e-9:
                continue
            val = d_prime(fieldf(p), fieldf(q)) / d
            if val > best:
                best, best_pair = val, (p, q)
        scale *= 0.5
    return best


# -------------------------------------------------- the minimax solve ------

@dataclass
class MeshField:
    """Equivariant tangent field on a Dirichlet mesh with its certificate."""

    domain: DirichletDomain
    cocycle: Cocycle
    vectors: np.ndarray           # (n, 3) ambient tangent vectors per vertex
    k_star: float
    tight_pairs: list             # (pos_p, pos_q) achieving the bound

    def __call__(self, p) -> Tangent:
        return self.eval(p)

    def eval(self, p) -> Tangent:
        p = np.asarray(p, float)
        p0, word = self.domain.unfold(p)
        simplex, bary = self.domain.locate(p0)
        vec = np.zeros(3)
        # conical weights: sum c_i * q_i = p0 exactly, so ambient-linear
        # fields (in particular Killing fields) interpolate exactly
        tz = self.domain._centering.inverse().lorentz[2]
        for i, b in zip(simplex, bary):
            vec += b * (tz @ p0) / (tz @ self.domain.verts[i]) * self.vectors[i]
        vec = project_tangent(p0, vec)
        g = self.domain.rep.eval(word)
        uval = eval_cocycle(self.domain.rep, self.cocycle, word)
        return Tangent(p, g.lorentz @ vec + cross(uval, p))


def _vertex_operators(domain: DirichletDomain, u: Cocycle):
    """Per-vertex affine operators x_i = C_i z + d_i over the free variables."""
    n = domain.n_verts
    free = domain.free_vertices()
    col_of = {int(v): 2 * k for k, v in enumerate(free)}
    frames = [tangent_basis(domain.verts[i]) for i in range(n)]
    C = [None] * n
    d = [None] * n
    for i in range(n):
        rep = int(domain.rep_index[i])
        e1, e2 = frames[rep]
        base = np.column_stack([e1, e2])
        if rep == i:
            C[i] = (col_of[rep], base)
            d[i] = np.zeros(3)
        else:
            g = domain.rep.eval(domain.rep_word[i])
            uval = eval_cocycle(domain.rep, u, domain.rep_word[i])
            C[i] = (col_of[rep], g.lorentz @ base)
            d[i] = cross(uval, domain.verts[i])
    return C, d, col_of


def optimize_field(j: Representation, u: Cocycle, domain: DirichletDomain,
                   pair_budget: int = 200000, interp_rounds: int = 0,
                   rng=None) -> MeshField:
    """Linear minimax: minimize k subject to d'(x_p, x_q) <= k d(p, q) over
    mesh edges, near pairs, cross-wall unfolded pairs and per-generator axis
    rows; variables are two tangent coordinates per free vertex."""
    rng = np.random.default_rng(0) if rng is None else rng
    C, dconst, col_of = _vertex_operators(domain, u)
    n = domain.n_verts
    nvar = 2 * len(col_of) + 1
    kcol = nvar - 1
    h = domain.h
    jmat = np.diag([1.0, 1.0, -1.0])
    tzrow = domain._centering.inverse().lorentz[2]

    def interp_op(p):
        simplex, bary = domain.locate(p)
        P = np.eye(3) + np.outer(p, jmat @ p)
        cc = []
        dd = np.zeros(3)
        for i, b in zip(simplex, bary):
            w = b * (tzrow @ p) / (tzrow @ domain.verts[int(i)])
            (c0, cb), dv = vert_ops[int(i)]
            cc.append((c0, P @ cb, w))
            dd += w * (P @ dv)
        return (cc, dd)

    def push_op(op, g, uval, pos):
        cc, dd = op
        if isinstance(cc, list):
            cc2 = [(c0, g.lorentz @ cb, w) for c0, cb, w in cc]
        else:
            c0, cb = cc
            cc2 = (c0, g.lorentz @ cb)
        return (cc2, g.lorentz @ dd + cross(uval, pos))

    # constraint sites: mesh vertices, plus edge midpoints and triangle
    # centroids constrained through the interpolation operator -- the optimum
    # concentrates on a lamination between vertices, and rows at vertices
    # alone leave the interpolant unconstrained exactly where it kinks
    vert_ops = [(C[i], dconst[i]) for i in range(n)]
    pts = [domain.verts[i] for i in range(n)]
    ops = list(vert_ops)
    is_vert = [True] * n
    for a, b in domain.edges():
        m = normalize_point(domain.verts[a] + domain.verts[b])
        pts.append(m)
        ops.append(interp_op(m))
        is_vert.append(False)
    for tri in domain.tris:
        m = normalize_point(domain.verts[tri].sum(axis=0))
        pts.append(m)
        ops.append(interp_op(m))
        is_vert.append(False)
    n_sites = len(pts)

    # ghost copies of every site near a wall, pushed across by the pairing
    for wall in domain.walls:
        g = domain.rep.eval(wall.word)
        uval = eval_cocycle(domain.rep, u, wall.word)
        for i in range(n_sites):
            if abs(np.arcsinh(mink(pts[i], wall.normal))) < 3.2 * h:
                pos = g.apply(pts[i])
                pts.append(pos)
                ops.append(push_op(ops[i], g, uval, pos))
                is_vert.append(is_vert[i])

    pts_arr = np.array(pts)
    tree = cKDTree(to_poincare(pts_arr))
    pairs = set(map(tuple, domain.edges()))
    # conservative poincare radius for hyperbolic distance 3h near each point;
    # vertex sites pair out to 3h, interpolated sites only to 1.5h (they
    # exist to pin the interpolant at sub-mesh scale, and the LP grows fast)
    for i in range(n_sites):  # ghosts are paired only against real sites
        xy = to_poincare(pts_arr[i])
        conf = (1.0 - xy @ xy) / 2.0
        for jdx in tree.query_ball_point(xy, 3.0 * h * conf * 1.3):
            if jdx <= i:
                continue
            lim = 3.0 * h if (is_vert[i] and is_vert[jdx]) else 0.8 * h
            dij = dist(pts_arr[i], pts_arr[jdx])
            # lower cutoff well above arccosh round-off (~1e-8 for
            # coincident points): a ghost of a wall site lands exactly on
            # its partner site and must not produce a 0/0 row
            if 1e-4 < dij <= lim:
                pairs.add((i, jdx))
    pairs = sorted(pairs)
    if len(pairs) > pair_budget:
        idx = rng.choice(len(pairs), size=pair_budget, replace=False)
        pairs = sorted(set(pairs[k] for k in idx) | set(map(tuple, domain.edges())))

    rows_i, cols_i, vals = [], [], []
    rhs = []
    geo = []  # (pos_p, pos_q, d) for tight-pair recovery
    row = 0

    def add_row(op1, p1, op2, p2):
        nonlocal row
        d12 = dist(p1, p2)
        u1 = log_point(p1, p2).vec / d12
        u2 = -log_point(p2, p1).vec / d12
        const = 0.0
        for sgn, (cc, dd), uu in ((-1.0, op1, u1), (1.0, op2, u2)):
            if isinstance(cc, list):
                for c0, cb, w in cc:
                    a = sgn * (cb.T @ (jmat @ uu)) * w
                    rows_i.extend([row, row])
                    cols_i.extend([c0, c0 + 1])
                    vals.extend(a.tolist())
            else:
                c0, cb = cc
                a = sgn * (cb.T @ (jmat @ uu))
                rows_i.extend([row, row])
                cols_i.extend([c0, c0 + 1])
                vals.extend(a.tolist())
            const += sgn * mink(dd, uu)
        rows_i.append(row)
        cols_i.append(kcol)
        vals.append(-d12)
        rhs.append(-const)
        geo.append((p1, p2, d12))
        row += 1

    for a, b in pairs:
        add_row(ops[a], pts_arr[a], ops[b], pts_arr[b])

    # per-generator axis rows: pair (p, gamma' p) with p on the (conjugated)
    # axis inside the domain, values by barycentric interpolation
    for gi in range(j.rank):
        word = (gi + 1,)
        fr = eigen_frame(j.eval(word))
        p_axis = axis_point(fr)
        p0, vw = domain.unfold(p_axis)
        word_conj = mul_words(mul_words(inverse_word(vw), word), vw)
        q0 = j.eval(word_conj).apply(p0)
        op_p = interp_op(p0)
        g = j.eval(word_conj)
        uval = eval_cocycle(j, u, word_conj)
        cc, dd = op_p
        cc_q = [(c0, g.lorentz @ cb, w) for c0, cb, w in cc]
        dd_q = g.lorentz @ dd + cross(uval, q0)
        add_row((cc, dd), p0, (cc_q, dd_q), q0)

    nz = kcol

    def lp_with_fallback(c, A_ub, b_ub, bounds, what):
        # interior point first (the LP is massively degenerate and simplex
        # usually crawls on it), but IPM itself stalls when the optimum is
        # attained exactly by a Killing field; cap it and fall back
        res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=bounds,
                      method="highs-ipm", options={"time_limit": 90.0})
        if not res.success:
            res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=bounds,
                          method="highs")
        if not res.success:
            raise SolverStall("%s linear program failed: %s"
                              % (what, res.message))
        return res

    def solve_stages():
        A = coo_matrix((vals, (rows_i, cols_i)), shape=(row, nvar)).tocsr()
        # drop sub-epsilon entries (cancelled axis-row coefficients): HiGHS
        # refuses matrices with entries below its small-value threshold
        A.data[np.abs(A.data) < 1e-10] = 0.0
        A.eliminate_zeros()
        b = np.array(rhs)
        dists = np.array([g[2] for g in geo])
        # stage 1: minimize k
        cobj = np.zeros(nvar)
        cobj[kcol] = 1.0
        res = lp_with_fallback(cobj, A, b, [(None, None)] * nvar, "minimax")
        k_lp = float(res.x[kcol])
        # stage 2: the optimal face is huge and the stage-1 point puts
        # violent oscillation on weakly constrained fringe vertices, which
        # later dominates the O(t^2) stretch of the discrete sections built
        # from the field.  Re-solve at (essentially) the optimal k for the
        # optimizer with the smallest discrete vector-Lipschitz constant s
        # over mesh edges: |(x_a - x_b)_c| <= s d(a, b).
        rr, rc, rv = [], [], []
        rb = []
        r2 = 0
        for ea, eb in domain.edges():
            dab = dist(domain.verts[ea], domain.verts[eb])
            (c0a, ba), da = vert_ops[ea]
            (c0b, bb), db = vert_ops[eb]
            for c in range(3):
                for sgn in (1.0, -1.0):
                    rr.extend([r2] * 5)
                    rc.extend([c0a, c0a + 1, c0b, c0b + 1, nz])
                    rv.extend([sgn * ba[c, 0], sgn * ba[c, 1],
                               -sgn * bb[c, 0], -sgn * bb[c, 1], -dab])
                    rb.append(-sgn * (da[c] - db[c]))
                    r2 += 1
        R = coo_matrix((rv, (rr, rc)), shape=(r2, nz + 1)).tocsr()
        Az = hstack_sparse([A[:, :nz], csr_matrix((row, 1))], format="csr")
        A2 = vstack_sparse([Az, R], format="csr")
        b2full = np.concatenate([b + dists * (k_lp + 1e-5), np.array(rb)])
        c2 = np.concatenate([np.zeros(nz), [1.0]])
        res2 = lp_with_fallback(c2, A2, b2full,
                                [(None, None)] * nz + [(0, None)],
                                "field selection")
        z = np.concatenate([res2.x[:nz], [k_lp]])
        rates = (A @ z - b) / dists + k_lp
        return z, float(max(k_lp, rates.max() - 1e-7)), rates

    def op_value(op, z):
        cc, dd = op
        v = dd.copy()
        if isinstance(cc, list):
            for c0, cb, wt in cc:
                v = v + wt * (cb @ z[c0:c0 + 2])
        else:
            c0, cb = cc
            v = v + cb @ z[c0:c0 + 2]
        return v

    def interp_point_op(p):
        p0, w0 = domain.unfold(p)
        op = interp_op(p0)
        if not w0:
            return op
        g = j.eval(w0)
        uval = eval_cocycle(j, u, w0)
        cc, dd = op
        return ([(c0, g.lorentz @ cb, wt) for c0, cb, wt in cc],
                g.lorentz @ dd + cross(uval, np.asarray(p, float)))

    # the optimum lives on a lamination the piecewise-linear field cannot
    # express exactly, so constrain sampled *interpolated* pairs too and
    # exchange in the violated ones
    sample_rad = min(domain.radius - 0.3, 2.0)
    z = None
    for rnd in range(interp_rounds + 1):
        z, k_star, rates = solve_stages()
        if rnd == interp_rounds:
            break
        new_rows = []
        for _ in range(3000):
            try:
                p, q = random_pair(domain.center, sample_rad,
                                   (h, 3.0 * h), rng)
                op_p = interp_point_op(p)
                op_q = interp_point_op(q)
            except GeometryError:
                continue
            rate = d_prime(Tangent(np.asarray(p, float), op_value(op_p, z)),
                           Tangent(np.asarray(q, float), op_value(op_q, z))
                           ) / dist(p, q)
            if rate > k_star + 1e-4:
                new_rows.append((rate, p, q, op_p, op_q))
        if not new_rows:
            break
        new_rows.sort(key=lambda r: -r[0])
        for _, p, q, op_p, op_q in new_rows[:800]:
            add_row(op_p, p, op_q, q)

    vectors = np.zeros((n, 3))
    for i in range(n):
        (c0, cb), dv = ops[i]
        vectors[i] = cb @ z[c0:c0 + 2] + dv

    tight = []
    for ridx in np.nonzero(k_star - rates < 1e-4)[0]:
        p1, p2, _ = geo[ridx]
        tight.append((p1, p2))

    return MeshField(domain=domain, cocycle=u, vectors=vectors,
                     k_star=k_star, tight_pairs=tight)


def interpolate(mf: MeshField, p) -> Tangent:
    return mf.eval(p)


def tight_pair_directions(mf: MeshField, cluster_deg: float = 5.0):
    """Unit directions of tight pairs, clustered at the given resolution."""
    angs = []
    for p, q in mf.tight_pairs:
        v = log_point(p, q).vec
        e1, e2 = tangent_basis(p)
        angs.append(np.arctan2(mink(v, e2), mink(v, e1)) % np.pi)
    angs.sort()
    clusters = []
    res = np.deg2rad(cluster_deg)
    for a in angs:
        if clusters and a - clusters[-1][-1] < res:
            clusters[-1].append(a)
        else:
            clusters.append([a])
    return [float(np.mean(c)) for c in clusters]


# ------------------------------------------------------------ flow-back ----

@dataclass
class FlowBack:
    """The field whose graph is the time-t geodesic-flow image of `base`."""

    basef: object
    t: float
    lip_bound: float

    def __call__(self, p) -> Tangent:
        return self.eval(p)

    def eval(self, p, tol=1e-12, max_iter=200) -> Tangent:
        p = np.asarray(p, float)
        q = p.copy()
        for _ in range(max_iter):
            zq = self.basef(q).vec
            step = log_point(q, p).vec - self.t * zq
            if np.sqrt(max(qform(step), 0.0)) < tol:
                return Tangent(p, parallel_transport(q, p, zq))
            q = exp_point(Tangent(q, 0.9 * step))
        raise SourceSolveFail("flow-back source iteration stalled")


def flow_back(fieldf, t: float, lip_bound: float) -> FlowBack:
    if lip_bound <= 0:
        raise TNotAdmissible("flow-back needs a positive lipschitz bound")
    if not (-1.0 / lip_bound < t < 0.0):
        raise TNotAdmissible("flow-back time must lie in (-1/R, 0)")
    return FlowBack(basef=fieldf, t=t, lip_bound=lip_bound)
