"""Primitives for Minkowski space R^{2,1} and the hyperboloid model of H^2.

Vectors are numpy arrays of shape (3,) with quadratic form
Q(x, y, z) = x^2 + y^2 - z^2.  Points of H^2 are unit timelike vectors on
the upper sheet (Q = -1, z > 0).  A vector doubles as a Killing field on
H^2 via the Minkowski cross product.  Isometries are carried both as
Lorentz 3x3 matrices and as 2x2 unit-determinant matrices modulo sign.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Form matrix of Q and shared tolerances.
JFORM = np.diag([1.0, 1.0, -1.0])
POINT_TOL = 1e-9
TRACE_TOL = 1e-9  # hyperbolic / parabolic / elliptic classification


class GeometryError(ValueError):
    """Invalid geometric input (not a point, not a tangent, ...)."""


class NotHyperbolic(GeometryError):
    """Operation requires a hyperbolic isometry."""


class LogBranch(GeometryError):
    """Principal branch of the group logarithm is ambiguous."""


def mink(v, w) -> float:
    """Minkowski inner product <v|w> = v1 w1 + v2 w2 - v3 w3."""
    return float(v[0] * w[0] + v[1] * w[1] - v[2] * w[2])


def qform(v) -> float:
    return mink(v, v)


def cross(v, w) -> np.ndarray:
    """Minkowski cross product, characterized by <p|v^w> = det(p, v, w)."""
    return np.array([
        v[1] * w[2] - v[2] * w[1],
        v[2] * w[0] - v[0] * w[2],
        -v[0] * w[1] + v[1] * w[0],
    ])


def hpoint(x, y=None, z=None) -> np.ndarray:
    """Validate and return a point of the upper hyperboloid; with two
    arguments the height is filled in as sqrt(1 + x^2 + y^2)."""
    if y is None:
        p = np.asarray(x, dtype=float)
    else:
        if z is None:
            z = np.sqrt(1.0 + x * x + y * y)
        p = np.array([x, y, z], float)
    if not (abs(qform(p) + 1.0) <= 1e-7 and p[2] > 0):
        raise GeometryError("not a point of the upper hyperboloid: %r" % (p,))
    return p


def normalize_point(p) -> np.ndarray:
    """Rescale a timelike vector onto the upper hyperboloid."""
    q = qform(p)
    if q >= 0:
        raise GeometryError("vector is not timelike")
    p = np.asarray(p, float) / np.sqrt(-q)
    return p if p[2] > 0 else -p


BASEPOINT = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True)
class Tangent:
    """Tangent vector to H^2: ambient vector `vec` at point `base`."""

    base: np.ndarray
    vec: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "base", np.asarray(self.base, float))
        object.__setattr__(self, "vec", np.asarray(self.vec, float))

    def check(self, tol=1e-7):
        if abs(mink(self.base, self.vec)) > tol:
            raise GeometryError("vector is not tangent to the hyperboloid")
        return self

    @property
    def norm(self) -> float:
        return float(np.sqrt(max(qform(self.vec), 0.0)))

    def __add__(self, other: "Tangent") -> "Tangent":
        return Tangent(self.base, self.vec + other.vec)

    def __mul__(self, c: float) -> "Tangent":
        return Tangent(self.base, c * self.vec)

    __rmul__ = __mul__


def project_tangent(p, v) -> np.ndarray:
    """Mink-orthogonal projection of an ambient vector onto T_p H^2."""
    return np.asarray(v, float) + mink(v, p) * np.asarray(p, float)


def killing_eval(X, p) -> Tangent:
    """Value at p of the Killing field determined by the vector X."""
    return Tangent(p, cross(X, p))


def dist(p, q) -> float:
    return float(np.arccosh(max(1.0, -mink(p, q))))


def exp_point(t: Tangent) -> np.ndarray:
    """Geodesic exponential: follow t.vec from t.base for time 1."""
    r = t.norm
    if r < 1e-300:
        return t.base.copy()
    return np.cosh(r) * t.base + np.sinh(r) / r * t.vec


def log_point(p, q) -> Tangent:
    """Initial velocity of the unit-time geodesic from p to q."""
    d = dist(p, q)
    if d < 1e-14:
        return Tangent(p, np.zeros(3))
    w = q + mink(p, q) * p  # component of q orthogonal to p
    return Tangent(p, d / np.sinh(d) * w)


# --- the isomorphism between R^{2,1} and traceless 2x2 matrices ------------
#
# kappa_inv(x, y, z) = 1/2 [[x, y - z], [y + z, -x]] pins the basis so that
# mink(v, w) = 2 tr(kappa_inv(v) kappa_inv(w)) and Ad on matrices matches
# the Lorentz action on vectors.


def kappa_inv(v) -> np.ndarray:
    return 0.5 * np.array([[v[0], v[1] - v[2]], [v[1] + v[2], -v[0]]])


def kappa(m) -> np.ndarray:
    m = np.asarray(m, float)
    if abs(m[0, 0] + m[1, 1]) > 1e-10:
        raise GeometryError("kappa requires a traceless matrix")
    return np.array([2.0 * m[0, 0], m[0, 1] + m[1, 0], m[1, 0] - m[0, 1]])


def canonical_sign(m) -> np.ndarray:
    """Representative of +-m whose first nonzero entry (row-major) is > 0."""
    m = np.asarray(m, float)
    for x in m.flat:
        if abs(x) > 1e-12:
            return m if x > 0 else -m
    return m


_KAPPA_BASIS = [kappa_inv(e) for e in np.eye(3)]


def _ad_matrix(a) -> np.ndarray:
    """Lorentz 3x3 matrix of v -> kappa(a kappa_inv(v) a^{-1})."""
    ainv = np.linalg.inv(a)
    cols = [kappa(a @ w @ ainv) for w in _KAPPA_BASIS]
    return np.column_stack(cols)


def _two_by_two_from_lorentz(L) -> np.ndarray:
    """Invert Ad: find the 2x2 unit-determinant matrix with Ad(a) = L."""
    # a W_i - kappa_inv(L e_i) a = 0 is linear in the entries of a; the
    # solution space is one-dimensional for L in the image of Ad.
    rows = []
    for i, w in enumerate(_KAPPA_BASIS):
        target = kappa_inv(L @ np.eye(3)[i])
        # (a w - target a) entry (r, c) as a linear functional of a.flat
        for r in range(2):
            for c in range(2):
                row = np.zeros(4)
                for k in range(2):
                    row[2 * r + k] += w[k, c]
                    row[2 * k + c] -= target[r, k]
                rows.append(row)
    _, s, vt = np.linalg.svd(np.array(rows))
    a = vt[-1].reshape(2, 2)
    det = np.linalg.det(a)
    if det <= 1e-12:
        raise GeometryError("matrix is not in the identity component")
    return canonical_sign(a / np.sqrt(det))


class Isom:
    """Orientation-preserving isometry of H^2 (point of AdS^3).

    Stores the Lorentz 3x3 matrix and the sign-canonicalized 2x2 matrix;
    the two are kept consistent through the fixed isomorphism kappa.
    """

    __slots__ = ("lorentz", "two_by_two")

    def __init__(self, two_by_two, lorentz=None):
        a = np.asarray(two_by_two, float)
        det = np.linalg.det(a)
        if abs(det - 1.0) > 1e-7:
            raise GeometryError("2x2 matrix must have determinant 1")
        self.two_by_two = canonical_sign(a / np.sqrt(det))
        self.lorentz = _ad_matrix(self.two_by_two) if lorentz is None else np.asarray(lorentz, float)

    @classmethod
    def identity(cls) -> "Isom":
        return cls(np.eye(2), np.eye(3))

    @classmethod
    def from_lorentz(cls, L) -> "Isom":
        L = np.asarray(L, float)
        if np.max(np.abs(L.T @ JFORM @ L - JFORM)) > 1e-7:
            raise GeometryError("matrix does not preserve the form")
        return cls(_two_by_two_from_lorentz(L), L)

    def apply(self, p) -> np.ndarray:
        return self.lorentz @ np.asarray(p, float)

    def push(self, t: Tangent) -> Tangent:
        return Tangent(self.lorentz @ t.base, self.lorentz @ t.vec)

    def __matmul__(self, other: "Isom") -> "Isom":
        return Isom(self.two_by_two @ other.two_by_two,
                    self.lorentz @ other.lorentz)

    def inverse(self) -> "Isom":
        return Isom(np.linalg.inv(self.two_by_two), np.linalg.inv(self.lorentz))

    @property
    def trace(self) -> float:
        return float(np.trace(self.two_by_two))

    def classify(self) -> str:
        t = abs(self.trace)
        if t > 2.0 + TRACE_TOL:
            return "hyperbolic"
        if t < 2.0 - TRACE_TOL:
            return "elliptic"
        if np.max(np.abs(canonical_sign(self.two_by_two) - np.eye(2))) < 1e-9:
            return "identity"
        return "parabolic"

    def close_to(self, other: "Isom", tol=1e-9) -> bool:
        return np.max(np.abs(self.two_by_two - other.two_by_two)) < tol

    def __repr__(self):
        return "Isom(%s)" % np.array2string(self.two_by_two, precision=6)


def translation_length(g: Isom) -> float:
    """ln of the top Lorentz eigenvalue; 0 for non-hyperbolic isometries."""
    t = abs(g.trace)
    if t <= 2.0 + TRACE_TOL:
        return 0.0
    return 2.0 * float(np.arccosh(t / 2.0))


@dataclass(frozen=True)
class EigenFrame:
    """Lightlike eigenvectors and spacelike axis vector of a hyperbolic g.

    c_plus and c_minus lie in the positive (z > 0) light cone and are the
    expanding / contracting eigenvectors of the Lorentz matrix; c_zero is
    the unit spacelike vector, a positive multiple of c_minus ^ c_plus.
    """

    c_plus: np.ndarray
    c_minus: np.ndarray
    c_zero: np.ndarray
    mu: float


def eigen_frame(g: Isom) -> EigenFrame:
    if g.classify() != "hyperbolic":
        raise NotHyperbolic("eigenframe requires a hyperbolic isometry")
    t = abs(g.trace)
    a = (t + np.sqrt(t * t - 4.0)) / 2.0
    mu = a * a
    # fixed points from the 2x2 eigenvectors: the lightlike eigenvector for
    # the 2x2 eigenvector v is kappa of the nilpotent v (eps v)^T, which is
    # far better conditioned than eigenvectors of the Lorentz 3x3 matrix
    m2 = g.two_by_two if g.trace > 0 else -g.two_by_two
    vals, vecs = np.linalg.eig(m2)
    vals = np.real(vals)
    lights = []
    for idx in (np.argmax(vals), np.argmin(vals)):
        v = np.real(vecs[:, idx])
        n = np.outer(v, [v[1], -v[0]])
        c = kappa(n - 0.5 * np.trace(n) * np.eye(2))
        lights.append(c / c[2])
    c_plus, c_minus = lights
    c_zero = cross(c_minus, c_plus)
    c_zero = c_zero / np.sqrt(qform(c_zero))
    return EigenFrame(c_plus=c_plus, c_minus=c_minus, c_zero=c_zero, mu=float(mu))


def axis_point(frame: EigenFrame) -> np.ndarray:
    """The point of the translation axis halfway between the endpoints."""
    return normalize_point(frame.c_plus + frame.c_minus)


def axis_tangent(frame: EigenFrame, p) -> Tangent:
    """Unit tangent to the axis at an axis point, in the translation sense."""
    return killing_eval(frame.c_zero, p)


def rot_killing(p, theta_prime: float) -> np.ndarray:
    """Infinitesimal rotation about p with rate theta_prime, as a vector."""
    return theta_prime * np.asarray(p, float)


def group_exp(v) -> Isom:
    """Exponential of the Killing field v into the isometry group."""
    w = kappa_inv(v)
    q = qform(v)  # det(w) = -q/4
    if q > 1e-24:
        th = np.sqrt(q) / 2.0
        m = np.cosh(th) * np.eye(2) + np.sinh(th) / th * w
    elif q < -1e-24:
        th = np.sqrt(-q) / 2.0
        m = np.cos(th) * np.eye(2) + np.sin(th) / th * w
    else:
        m = np.eye(2) + w
    return Isom(m)


def rot_elem(p, theta: float) -> Isom:
    """Rotation of angle theta centered at the point p."""
    return group_exp(rot_killing(p, theta))


def group_log(g: Isom) -> np.ndarray:
    """Inverse of group_exp on the principal branch."""
    a = g.two_by_two
    tr = np.trace(a)
    if abs(tr) < TRACE_TOL:
        raise LogBranch("trace too close to 0: rotation by pi is ambiguous")
    if tr < 0:
        a = -a
        tr = -tr
    s = tr / 2.0
    if s > 1.0 + 1e-14:
        th = np.arccosh(s)
        w = (a - s * np.eye(2)) * (th / np.sinh(th))
    elif s < 1.0 - 1e-14:
        th = np.arccos(s)
        w = (a - s * np.eye(2)) * (th / np.sin(th))
    else:
        w = a - s * np.eye(2)
    return kappa(w)
