"""Margulis invariants, the length-contraction functional k_alpha, and the
opposite-sign obstruction to properness with its explicit witness."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad

from .core import (
    GeometryError,
    NotHyperbolic,
    Tangent,
    axis_point,
    cross,
    eigen_frame,
    killing_eval,
    mink,
    qform,
    translation_length,
)
from .groups import (
    Cocycle,
    Representation,
    Word,
    conjugacy_classes,
    eval_cocycle,
    inverse_word,
    mul_words,
    rho_t,
)

ZERO_ALPHA_TOL = 1e-9


class FrameDegenerate(GeometryError):
    """Opposite-sign frames are degenerate (axes share an endpoint)."""


def margulis_alpha(j: Representation, u: Cocycle, w: Word) -> float:
    """<u(w) | c_zero of j(w)>: signed translation along the invariant line."""
    g = j.eval(w)
    frame = eigen_frame(g)  # raises NotHyperbolic
    return mink(eval_cocycle(j, u, w), frame.c_zero)


def margulis_alpha_fd(j: Representation, u: Cocycle, w: Word,
                      step: float = 1e-5) -> float:
    """Central difference of t -> translation_length(rho_t(w)) at t = 0."""
    if j.eval(w).classify() != "hyperbolic":
        raise NotHyperbolic("finite-difference invariant needs a hyperbolic word")
    lp = translation_length(rho_t(j, u, step).eval(w))
    lm = translation_length(rho_t(j, u, -step).eval(w))
    return (lp - lm) / (2.0 * step)


@dataclass
class NonProperWitness:
    alpha_word: Word
    beta_word: Word
    table: list  # rows (n, m, point, displacement_norm)
    fixed_point: np.ndarray = None

    def displacement_norms(self) -> np.ndarray:
        return np.array([row[3] for row in self.table])


@dataclass
class ProperVerdict:
    k_alpha_N: float
    depth: int
    sign_profile: str        # all-negative | all-positive | mixed | has-zero
    status: str              # evidence-proper | evidence-proper-after-flip
    #                        # | nonproper | inconclusive
    witness: NonProperWitness = None
    profile: dict = field(default_factory=dict)  # depth -> running max ratio
    extremes: dict = field(default_factory=dict)  # words with max/min ratio


def k_alpha_scan(j: Representation, u: Cocycle, depth: int,
                 delta: float = 1e-3, witness_n_max: int = 40) -> ProperVerdict:
    """Max and sign profile of alpha_u / lambda over conjugacy classes of
    length <= depth; mixed signs or an exact zero trigger the opposite-sign
    obstruction and a nonproper verdict."""
    best = None
    worst = None
    zero_word = None
    profile = {}
    running = -np.inf
    for w in conjugacy_classes(j.rank, depth):
        lam = translation_length(j.eval(w))
        if lam < 1e-12:
            continue
        a = margulis_alpha(j, u, w)
        if abs(a) < ZERO_ALPHA_TOL and zero_word is None:
            zero_word = w
        ratio = a / lam
        if best is None or ratio > best[0]:
            best = (ratio, w)
        if worst is None or ratio < worst[0]:
            worst = (ratio, w)
        running = max(running, ratio)
        profile[len(w)] = max(profile.get(len(w), -np.inf), running)
    if best is None:
        return ProperVerdict(k_alpha_N=np.nan, depth=depth,
                             sign_profile="has-zero", status="inconclusive")
    # make the per-depth profile cumulative (non-decreasing in N)
    acc = -np.inf
    for n in sorted(profile):
        acc = max(acc, profile[n])
        profile[n] = acc
    k_alpha = best[0]
    extremes = {"max": best[1], "min": worst[1]}
    witness = None
    if zero_word is not None:
        sign_profile = "has-zero"
        status = "nonproper"
        witness = nonproper_witness(j, u, best[1], zero_word, witness_n_max)
    elif best[0] > 0 and worst[0] < 0:
        sign_profile = "mixed"
        status = "nonproper"
        witness = nonproper_witness(j, u, best[1], worst[1], witness_n_max)
    elif best[0] < 0:
        sign_profile = "all-negative"
        status = "evidence-proper" if best[0] <= -delta else "inconclusive"
    else:
        sign_profile = "all-positive"
        status = "evidence-proper-after-flip" if worst[0] >= delta else "inconclusive"
    return ProperVerdict(k_alpha_N=k_alpha, depth=depth,
                         sign_profile=sign_profile, status=status,
                         witness=witness, profile=profile, extremes=extremes)


# ------------------------------------------- opposite-sign witness ---------

def _affine_pair(j, u, w):
    g = j.eval(w)
    return g.lorentz, eval_cocycle(j, u, w)


def _affine_pow(pair, n):
    L, v = np.eye(3), np.zeros(3)
    Lb, vb = pair
    while n:
        if n & 1:
            L, v = Lb @ L, Lb @ v + vb
        Lb, vb = Lb @ Lb, Lb @ vb + vb
        n >>= 1
    return L, v


def invariant_line_point(j, u, w):
    """Base point of the affine line preserved by (j(w), u(w)).

    Solves (Id - Ad) x = component of u(w) transverse to the axis vector,
    in the eigenbasis of the hyperbolic linear part.
    """
    g = j.eval(w)
    fr = eigen_frame(g)
    uv = eval_cocycle(j, u, w)
    basis = np.column_stack([fr.c_zero, fr.c_plus, fr.c_minus])
    c0, cp, cm = np.linalg.solve(basis, uv)
    x = cp / (1.0 - fr.mu) * fr.c_plus + cm / (1.0 - 1.0 / fr.mu) * fr.c_minus
    return x, fr


def affine_fixed_point(j, u, w):
    """Fixed point of the affine action of w; requires alpha_u(w) = 0."""
    if abs(margulis_alpha(j, u, w)) > 1e-6:
        raise GeometryError("affine action of %s has no fixed point" % (w,))
    x, _ = invariant_line_point(j, u, w)
    return x


def nonproper_witness(j: Representation, u: Cocycle, alpha_word: Word,
                      beta_word: Word, n_max: int = 40) -> NonProperWitness:
    """Explicit iterates beta^m alpha^n keeping a seed in a bounded set."""
    a_alpha = margulis_alpha(j, u, alpha_word)
    a_beta = margulis_alpha(j, u, beta_word)
    if abs(a_beta) < ZERO_ALPHA_TOL:
        x = affine_fixed_point(j, u, beta_word)
        table = [(n, 0, x.copy(), 0.0) for n in range(1, 4)]
        return NonProperWitness(alpha_word, beta_word, table, fixed_point=x)
    if not (a_alpha > 0 > a_beta):
        raise GeometryError(
            "opposite-sign witness requires alpha_u(alpha) > 0 > alpha_u(beta)")

    xa, fa = invariant_line_point(j, u, alpha_word)
    xb, fb = invariant_line_point(j, u, beta_word)
    ip = mink(fa.c_plus, fb.c_minus)
    if abs(ip) < 1e-9:
        raise FrameDegenerate("axes of the two words share an endpoint")
    # normalize so that Delta = A-plane cap B-plane is the x-axis,
    # a+ = (0,-1,1) and b- = (0,1,1)
    s = np.sqrt(-2.0 / ip)  # <a+|b-> < 0 for distinct future lightlike dirs
    ap = s * fa.c_plus
    bm = s * fb.c_minus
    d = cross(ap, bm)
    d = d / np.sqrt(qform(d))
    lin = None
    for dsign in (1.0, -1.0):
        src = np.column_stack([dsign * d, ap, bm])
        tgt = np.column_stack([[1, 0, 0], [0, -1, 1], [0, 1, 1]])
        L = tgt @ np.linalg.inv(src)
        if (L @ fa.c_zero)[0] > 0:
            lin = L
            break
    if lin is None or (lin @ fb.c_zero)[0] <= 0:
        raise FrameDegenerate("frame orientation could not be normalized")
    a0x = (lin @ fa.c_zero)[0]
    b0x = (lin @ fb.c_zero)[0]
    # shift so Delta passes through the origin: project the normalized image
    # of a point of A onto the plane pair intersection.  ya lies in the
    # y+z=0... use: A-plane is {y3 = -y2} in normalized coords (span of x
    # and (0,-1,1)); B-plane is {y3 = y2}.  Delta = {y2 = y3 = 0}.
    ya = lin @ xa  # on the normalized A-plane up to the global translation
    yb = lin @ xb
    # the affine planes are translates; their intersection line is at the
    # (y2, y3) solving the two plane offsets
    ca = ya[2] + ya[1]   # A-plane: y3 + y2 = ca
    cb = yb[2] - yb[1]   # B-plane: y3 - y2 = cb
    shift = np.array([0.0, (ca - cb) / 2.0, (ca + cb) / 2.0])

    def norm_coords(x):
        return lin @ np.asarray(x, float) - shift

    def orig_coords(y):
        return np.linalg.inv(lin) @ (np.asarray(y, float) + shift)

    # O_A = A cap Delta and O_B = B cap Delta, in normalized coordinates
    a0n = lin @ fa.c_zero
    b0n = lin @ fb.c_zero
    yan = norm_coords(xa)
    t = -yan[1] / a0n[1] if abs(a0n[1]) > 1e-12 else -yan[2] / a0n[2]
    O_A = yan + t * a0n
    ybn = norm_coords(xb)
    t = -ybn[1] / b0n[1] if abs(b0n[1]) > 1e-12 else -ybn[2] / b0n[2]
    O_B = ybn + t * b0n
    apn = lin @ ap       # = (0,-1,1)
    bmn = lin @ bm       # = (0, 1,1)
    bpn = lin @ (s * fb.c_plus)
    bbasis = np.column_stack([b0n, bmn, bpn])
    table = []
    # iterate in closed form on the invariant planes: pushing the seed
    # through matrix powers amplifies round-off by mu^n and destroys the
    # cancellation the construction relies on
    for n in range(1, n_max + 1):
        img = O_A + n * a_alpha * a0n     # alpha^n of a point of A
        sigma = img[2]                    # a+ coefficient within the A-plane
        v_n = O_A + (-sigma / fa.mu ** n) * apn   # seed: alpha^n(v_n) on Delta
        w_n = img - sigma * apn
        m = int(np.floor(n * a0x * a_alpha / (b0x * abs(a_beta))))
        sb, cb_, _ = np.linalg.solve(bbasis, w_n - O_B)
        q_n = O_B + (sb + m * a_beta) * b0n + (cb_ / fb.mu ** m) * bmn
        v_orig = orig_coords(v_n)
        q = orig_coords(q_n)
        disp = float(np.linalg.norm(q - v_orig))
        table.append((n, m, q, disp))
    return NonProperWitness(alpha_word, beta_word, table)


# --------------------------------------------------- nu integral -----------

def nu_integral_alpha(fieldf, j: Representation, u: Cocycle, w: Word,
                      tol: float = 1e-7) -> float:
    """Integral of the axial derivative nu' of the field over one period of
    the translation axis of j(w); equals the Margulis invariant."""
    g = j.eval(w)
    fr = eigen_frame(g)
    lam = np.log(fr.mu)
    p0 = axis_point(fr)

    a0 = killing_eval(fr.c_zero, p0).vec  # unit tangent along the axis

    def nu(s):
        p = np.cosh(s) * p0 + np.sinh(s) * a0
        tangent = np.sinh(s) * p0 + np.cosh(s) * a0
        return mink(fieldf(p).vec, tangent)

    h = 1e-5

    def nu_prime(s):
        return (nu(s + h) - nu(s - h)) / (2.0 * h)

    val, err = quad(nu_prime, 0.0, lam, epsabs=tol, epsrel=tol, limit=200)
    if err > 50 * max(tol, tol * abs(val)) + 1e-6:
        raise GeometryError("quadrature failed to reach tolerance")
    return float(val)
