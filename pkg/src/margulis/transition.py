"""The AdS -> Minkowski geometric transition in RP^3: the embeddings I and
i, the induced homomorphisms, the rescaling family r_t, developing maps with
the fiber reparameterization xi_t, the boundary plane at infinity, and the
rescaled-metric comparison."""

from __future__ import annotations

import numpy as np

from .core import (
    GeometryError,
    Isom,
    Tangent,
    exp_point,
    group_log,
    mink,
    rot_elem,
    rot_killing,
)
from .fields import tangent_basis
from .fibration import osculating_isometry

PROJ_TOL = 1e-12
FD_STEP = 1e-3


class BadRescaleTime(GeometryError):
    """rescale needs t > 0."""


# ---------------------------------------------------- projective basics ----

def proj_point(y) -> np.ndarray:
    """Normalized homogeneous coordinates: unit norm, canonical sign."""
    y = np.asarray(y, float)
    n = np.linalg.norm(y)
    if n < PROJ_TOL:
        raise GeometryError("zero vector has no projective class")
    y = y / n
    lead = y[np.nonzero(np.abs(y) > 1e-12)[0][0]]
    return y if lead > 0 else -y


def proj_mat(m) -> np.ndarray:
    """4x4 matrix modulo scale: unit Frobenius norm, canonical sign."""
    m = np.asarray(m, float)
    if abs(np.linalg.det(m)) < 1e-12 * np.linalg.norm(m) ** 4:
        raise GeometryError("projective matrix must be invertible")
    m = m / np.linalg.norm(m)
    flat = m.ravel()
    lead = flat[np.nonzero(np.abs(flat) > 1e-12)[0][0]]
    return m if lead > 0 else -m


def chordal(y1, y2) -> float:
    """Chordal metric on RP^3 (and on projective matrices by the same
    formula): min over sign of the Euclidean distance of unit reps."""
    a = np.asarray(y1, float).ravel()
    b = np.asarray(y2, float).ravel()
    a = a / np.linalg.norm(a)
    b = b / np.linalg.norm(b)
    return float(min(np.linalg.norm(a - b), np.linalg.norm(a + b)))


def _two_by_two_to_y(m) -> np.ndarray:
    a, b = m[0]
    c, d = m[1]
    return np.array([(a - d) / 2.0, (b + c) / 2.0, (c - b) / 2.0,
                     (a + d) / 2.0])


def _y_to_two_by_two(y) -> np.ndarray:
    y1, y2, y3, y4 = y
    return np.array([[y1 + y4, y2 - y3], [y2 + y3, -y1 + y4]])


def embed_I(g: Isom) -> np.ndarray:
    """AdS^3 = PSL(2,R) into RP^3."""
    return proj_point(_two_by_two_to_y(g.two_by_two))


def embed_i(v) -> np.ndarray:
    """R^{2,1} into the affine chart y4 != 0 of RP^3."""
    v = np.asarray(v, float)
    return proj_point(np.array([v[0], v[1], v[2], 2.0]))


def embed_i_bar(v) -> np.ndarray:
    """Projective class of a direction of R^{2,1}, in the plane y4 = 0."""
    v = np.asarray(v, float)
    return proj_point(np.array([v[0], v[1], v[2], 0.0]))


def push_I(h: Isom, k: Isom) -> np.ndarray:
    """The 4x4 matrix of x -> h x k^{-1} in the y coordinates."""
    kinv = np.linalg.inv(k.two_by_two)
    cols = []
    for e in np.eye(4):
        n = h.two_by_two @ _y_to_two_by_two(e) @ kinv
        cols.append(_two_by_two_to_y(n))
    return proj_mat(np.column_stack(cols))


def push_i(g: Isom, v) -> np.ndarray:
    """The 4x4 matrix of the affine action w -> g w + v in the i chart."""
    v = np.asarray(v, float)
    m = np.eye(4)
    m[:3, :3] = g.lorentz
    m[:3, 3] = v / 2.0
    return proj_mat(m)


def rescale(t: float) -> np.ndarray:
    if t <= 0:
        raise BadRescaleTime("rescale is defined for t > 0")
    return proj_mat(np.diag([1.0 / t, 1.0 / t, 1.0 / t, 1.0]))


def proj_apply(m, y) -> np.ndarray:
    return proj_point(np.asarray(m, float) @ np.asarray(y, float))


def holonomy_table(j, u, t_list) -> dict:
    """Convergence of the conjugated AdS holonomy to the flat one.

    Per generator: err(t) = chordal distance between
    r_t push_I(rho_t(g), j(g)) r_t^{-1} and push_i(j(g), u(g)), and the
    ratios err(t) / err(t/2) down the (halving) t list."""
    from .groups import rho_t as make_rho_t
    rows = []
    for gi in range(j.rank):
        target = push_i(j.gens[gi], u.values[gi])
        errs = []
        for t in t_list:
            rt = make_rho_t(j, u, t)
            m = rescale(t) @ push_I(rt.gens[gi], j.gens[gi]) \
                @ np.linalg.inv(rescale(t))
            errs.append(chordal(proj_mat(m), target))
        ratios = [errs[i] / errs[i + 1] for i in range(len(errs) - 1)
                  if errs[i + 1] > 1e-15]
        rows.append({"generator": gi, "errors": errs, "ratios": ratios})
    return {"t_list": list(t_list), "rows": rows}


# -------------------------------------------------- fiber coordinates ------

def psi(theta: float) -> float:
    """psi(theta) = 2 tan(theta/2); psi(pi) = inf."""
    if abs(abs(theta) - np.pi) < 1e-15:
        return np.inf if theta > 0 else -np.inf
    return 2.0 * np.tan(theta / 2.0)


def xi_t(theta: float, t: float) -> float:
    """xi_t = psi^{-1}(t psi(theta)); fixes 0 and +/- pi."""
    if abs(abs(theta) - np.pi) < 1e-15:
        return theta
    return 2.0 * np.arctan(t * np.tan(theta / 2.0))


# ------------------------------------------------------ developing maps ----

def dev_hat(sigma_prime_val, p, theta: float) -> np.ndarray:
    """dev-hat(p, theta) = i(sigma'(p) + rot(p, psi(theta)))."""
    p = np.asarray(p, float)
    ps = psi(theta)
    if np.isinf(ps):
        return embed_i_bar(rot_killing(p, 1.0))
    return embed_i(np.asarray(sigma_prime_val, float) + rot_killing(p, ps))


def dev_hat_t(sigma_t_val: Isom, p, theta: float, t: float) -> Isom:
    """Dev-hat_t(p, theta) = sigma_t(p) Rot(p, xi_t(theta)), in G."""
    return sigma_t_val @ rot_elem(np.asarray(p, float), xi_t(theta, t))


class TransitionData:
    """Bundles the section solves needed to evaluate Dev-hat_t on a grid."""

    def __init__(self, j, u, mf, t_list, descent_rounds=0):
        from .groups import rho_t as make_rho_t
        from .fibration import solve_section
        self.j = j
        self.u = u
        self.mf = mf
        self.t_list = list(t_list)
        self.sections = {}
        for t in self.t_list:
            self.sections[t] = solve_section(j, make_rho_t(j, u, t), mf, t,
                                             descent_rounds=descent_rounds)

    def sigma_t(self, t, p) -> Isom:
        return osculating_isometry(self.sections[t].eval, np.asarray(p, float))

    def sigma_prime(self, p) -> np.ndarray:
        from .fibration import sigma_prime
        return sigma_prime(self.mf, np.asarray(p, float))


def limit_check(data: TransitionData, grid) -> dict:
    """Convergence of r_t I Dev-hat_t to i dev-hat over the grid.

    grid: list of (p, theta).  Returns per-cell error columns over t_list,
    observed orders for interior cells, and the theta = pi boundary rows
    with their computed limit in the plane at infinity."""
    rows = []
    for p, theta in grid:
        p = np.asarray(p, float)
        boundary = abs(abs(theta) - np.pi) < 1e-15
        target = dev_hat(None if boundary else data.sigma_prime(p), p, theta)
        errs = []
        for t in data.t_list:
            g = dev_hat_t(data.sigma_t(t, p), p, theta, t)
            errs.append(chordal(proj_apply(rescale(t), embed_I(g)), target))
        orders = [float(np.log2(errs[i] / errs[i + 1]))
                  for i in range(len(errs) - 1)
                  if errs[i + 1] > 1e-14]
        entry = {"p": p.tolist(), "theta": float(theta),
                 "errors": [float(e) for e in errs], "orders": orders,
                 "boundary": boundary}
        if boundary:
            # the limiting point of the boundary row, from the log of the
            # t -> 0 fiber holonomy Rot(p, pi), lies in the plane y4 = 0
            g0 = rot_elem(p, np.pi)
            y = _two_by_two_to_y(g0.two_by_two)
            entry["limit"] = proj_point(np.array([y[0], y[1], y[2], 0.0])).tolist()
            entry["limit_target"] = embed_i_bar(p).tolist()
            entry["limit_error"] = chordal(entry["limit"], entry["limit_target"])
        rows.append(entry)
    return {"t_list": data.t_list, "rows": rows}


def _frame_curves(p, theta):
    e1, e2 = tangent_basis(p)

    def move(a, b, c):
        return exp_point(Tangent(p, a * e1 + b * e2)), theta + c

    return move


def metric_gram_ads(data: TransitionData, t, p, theta,
                    h_fd: float = FD_STEP) -> np.ndarray:
    """Pullback of the bi-invariant AdS metric through Dev-hat_t, as the
    3x3 Gram matrix in the chart (tangent coords at p, theta)."""
    move = _frame_curves(p, theta)
    g = dev_hat_t(data.sigma_t(t, p), p, theta, t)
    ginv = g.inverse()
    dirs = [(h_fd, 0, 0), (0, h_fd, 0), (0, 0, h_fd)]
    vel = []
    for d in dirs:
        qp, thp = move(*d)
        qm, thm = move(*[-x for x in d])
        gp = dev_hat_t(data.sigma_t(t, qp), qp, thp, t)
        gm = dev_hat_t(data.sigma_t(t, qm), qm, thm, t)
        vel.append((group_log(ginv @ gp) - group_log(ginv @ gm))
                   / (2.0 * h_fd))
    G = np.empty((3, 3))
    for a in range(3):
        for b in range(3):
            G[a, b] = mink(vel[a], vel[b])
    return G


def metric_gram_flat(data: TransitionData, p, theta,
                     h_fd: float = FD_STEP) -> np.ndarray:
    """Pullback of the flat metric through dev-hat (same chart)."""
    move = _frame_curves(p, theta)

    def val(q, th):
        return np.asarray(data.sigma_prime(q), float) + rot_killing(q, psi(th))

    dirs = [(h_fd, 0, 0), (0, h_fd, 0), (0, 0, h_fd)]
    vel = []
    for d in dirs:
        qp, thp = move(*d)
        qm, thm = move(*[-x for x in d])
        vel.append((val(qp, thp) - val(qm, thm)) / (2.0 * h_fd))
    G = np.empty((3, 3))
    for a in range(3):
        for b in range(3):
            G[a, b] = mink(vel[a], vel[b])
    return G


def metric_compare(data: TransitionData, grid) -> dict:
    """Max-entry deviation of t^{-2} Gram_AdS from Gram_flat per t."""
    rows = []
    for p, theta in grid:
        flat = metric_gram_flat(data, p, theta)
        sig = np.sort(np.linalg.eigvalsh(flat))
        devs = []
        for t in data.t_list:
            G = metric_gram_ads(data, t, p, theta) / t ** 2
            devs.append(float(np.max(np.abs(G - flat))))
        rows.append({"p": np.asarray(p, float).tolist(), "theta": float(theta),
                     "deviation": devs,
                     "flat_signature": [float(s) for s in sig]})
    return {"t_list": data.t_list, "rows": rows}
