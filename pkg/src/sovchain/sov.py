"""Separated coordinates, their brackets and the equations of separation.

Two conventions are supported:

* ``nonstandard``: x_i are the zeros of A(u) = L11(u) and p_i = B(x_i) with
  B(u) = L21(u);
* ``standard``: x_i are the zeros of B(u) and p_i = A(x_i).

If c11 = 0 the roles move to A = L22, B = L12.  Gradients of x_i and p_i are
obtained from the implicit-function theorem, never by differencing the root
finder.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ClusteredRoots, CoincidingSpectralParameters, DegenerateDegree, \
    DegenerateTwistRow
from .model import (
    chain_lax, integral_gradients, integrals, lax_denominator, lax_numerator,
    lax_value_and_gradient, rmatrix,
)
from .numrat import CLUSTER_RTOL, Poly, RationalFn, min_root_separation, poly_roots
from .poisson import RATIONAL, as_coords, build_bivector

NONSTANDARD = "nonstandard"
STANDARD = "standard"
CONVENTIONS = (NONSTANDARD, STANDARD)
POLE_ROOT_TOL = 1e-9


def _check_convention(convention):
    if convention not in CONVENTIONS:
        raise ValueError(f"unknown convention {convention!r}")


def separating_indices(spec):
    """0-based Lax entries ((i, j) of A, (i, j) of B)."""
    c = spec.twist.c
    scale = max(spec.twist.scale, 1e-300)
    if abs(c[0, 0]) > 1e-12 * scale:
        return (0, 0), (1, 0)
    if abs(c[1, 1]) > 1e-12 * scale:
        return (1, 1), (0, 1)
    raise DegenerateTwistRow("c11 = c22 = 0: no separating functions")


def separating_pair_numerators(spec, num, convention=NONSTANDARD):
    """(separating polynomial, momentum polynomial) numerators, ascending."""
    _check_convention(convention)
    ia, ib = separating_indices(spec)
    a, b = num[ia], num[ib]
    return (a, b) if convention == NONSTANDARD else (b, a)


def separating_functions(spec, xi):
    """A(u), B(u) as rational functions over the chain denominator."""
    num = lax_numerator(spec, xi)
    ia, ib = separating_indices(spec)
    den = lax_denominator(spec)
    return {"A": RationalFn(Poly(num[ia]), den), "B": RationalFn(Poly(num[ib]), den)}


@dataclass(frozen=True)
class SeparatedPoint:
    x: np.ndarray
    p: np.ndarray
    convention: str
    root_condition: np.ndarray

    @property
    def N(self):
        return len(self.x)


def _roots_of(spec, sep):
    poly = Poly(sep)
    if poly.is_zero() or poly.degree < spec.N:
        raise DegenerateDegree(
            f"separating polynomial has degree {poly.degree}, expected {spec.N}")
    roots = poly_roots(poly)
    for r in roots:
        for v in spec.nu:
            if abs(r - v) <= POLE_ROOT_TOL * max(1.0, abs(v)):
                raise DegenerateDegree("separating numerator vanishes at a pole")
    scale = max(1.0, float(np.max(np.abs(roots))))
    if min_root_separation(roots) < CLUSTER_RTOL * scale:
        raise ClusteredRoots("separating polynomial has (nearly) repeated roots")
    return poly, roots


def separate(spec, xi, convention=NONSTANDARD):
    coords = np.asarray(as_coords(xi))
    num = lax_numerator(spec, coords)
    sep, mom = separating_pair_numerators(spec, num, convention)
    poly, x = _roots_of(spec, sep)
    den = lax_denominator(spec)
    d = den(x)
    p = Poly(mom, trim=False)(x) / d
    cond = np.abs(poly.derivative()(x) / d)
    return SeparatedPoint(x, p, convention, cond)


def separated_gradients(spec, xi, convention=NONSTANDARD):
    """SeparatedPoint plus d x_m/d xi and d p_m/d xi, each of shape (N, dim)."""
    coords = np.asarray(as_coords(xi))
    val, jac = lax_numerator(spec, coords, with_jac=True)
    sep, mom = separating_pair_numerators(spec, val, convention)
    gsep, gmom = separating_pair_numerators(spec, jac, convention)
    poly, x = _roots_of(spec, sep)
    den = lax_denominator(spec)
    dden = den.derivative()
    mom_poly = Poly(mom, trim=False)
    dsep = poly.derivative()(x)
    scale = max(poly.scale, 1e-300)
    if np.min(np.abs(dsep)) < 1e-12 * scale:
        raise ClusteredRoots("separating polynomial has a vanishing derivative at a root")
    powers = x[:, None] ** np.arange(spec.N + 1)[None, :]
    # coefficient gradients evaluated at each root: (N, dim)
    gsep_x = powers @ gsep
    gmom_x = powers @ gmom
    gx = -gsep_x / dsep[:, None]
    d = den(x)
    mval = mom_poly(x)
    bprime = (mom_poly.derivative()(x) * d - mval * dden(x)) / (d * d)
    gp = gmom_x / d[:, None] + bprime[:, None] * gx
    p = mval / d
    sp = SeparatedPoint(x, p, convention, np.abs(dsep / d))
    return sp, gx, gp


def derived_observable_gradient(spec, xi, which, m, convention=NONSTANDARD):
    """Gradient of x_m (``which='x'``) or p_m (``which='p'``), m 0-based."""
    _, gx, gp = separated_gradients(spec, xi, convention)
    if which == "x":
        return gx[m]
    if which == "p":
        return gp[m]
    raise ValueError("which must be 'x' or 'p'")


def expected_xp_bracket(spec, sp):
    """Predicted {x_i, p_i}: p_i (rational) or x_i p_i (trigonometric).

    The sign is the same for both conventions.
    """
    return sp.p if spec.model == RATIONAL else sp.x * sp.p


def bracket_matrix(spec, xi, convention=NONSTANDARD):
    """All brackets among (x_1..x_N, p_1..p_N) and their deviation from the
    quasi-canonical pattern."""
    sp, gx, gp = separated_gradients(spec, xi, convention)
    G = np.vstack([gx, gp])
    pi = build_bivector(spec).matrix(xi)
    M = G @ pi @ G.T
    n = spec.N
    E = np.zeros_like(M)
    diag = expected_xp_bracket(spec, sp)
    E[np.arange(n), n + np.arange(n)] = diag
    E[n + np.arange(n), np.arange(n)] = -diag
    dev = np.abs(M - E)
    scale = max(1.0, float(np.max(np.abs(E))))
    return {"matrix": M, "expected": E, "max_deviation": float(dev.max()),
            "scale": scale, "relative": float(dev.max()) / scale, "separated": sp}


def _sepalg_closed_forms(R, A_u, B_u, A_v, B_v, swapped):
    """Closed forms of {B,B}, {A,B}, {A,A} from r-matrix components."""
    def comp(ij, kl):
        i, j = ij
        k, l = kl
        if swapped:
            i, j, k, l = 1 - i, 1 - j, 1 - k, 1 - l
        return R[2 * i + k, 2 * j + l]
    _1, _2 = 0, 1
    bb = comp((_2, _1), (_2, _2)) * A_u * B_v + comp((_2, _2), (_2, _1)) * B_u * A_v
    ab = (comp((_1, _1), (_2, _2)) - comp((_1, _1), (_1, _1))) * B_v * A_u \
        + comp((_1, _2), (_2, _1)) * B_u * A_v
    aa = comp((_1, _1), (_1, _2)) * A_u * B_v + comp((_1, _2), (_1, _1)) * B_u * A_v
    return bb, ab, aa


def check_separating_algebra(spec, xi, u, v):
    """Residuals of {B(u),B(v)}, {A(u),A(v)} and {A(u),B(v)} against the
    closed forms implied by the separating symmetry of the r-matrix."""
    if abs(u - v) <= 1e-10 * max(1.0, abs(u), abs(v)):
        raise CoincidingSpectralParameters("u and v coincide")
    ia, ib = separating_indices(spec)
    swapped = ia != (0, 0)
    Lu, Gu = lax_value_and_gradient(spec, xi, u)
    Lv, Gv = lax_value_and_gradient(spec, xi, v)
    pi = build_bivector(spec).matrix(xi)
    A_u, B_u, A_v, B_v = Lu[ia], Lu[ib], Lv[ia], Lv[ib]
    br = {
        "BB": Gu[ib] @ pi @ Gv[ib],
        "AB": Gu[ia] @ pi @ Gv[ib],
        "AA": Gu[ia] @ pi @ Gv[ia],
    }
    R = rmatrix(spec)(u, v)
    bb, ab, aa = _sepalg_closed_forms(R, A_u, B_u, A_v, B_v, swapped)
    scale = max(float(np.max(np.abs(R))) * max(abs(A_u), abs(B_u)) * max(abs(A_v), abs(B_v)),
                1e-300)
    res = {"BB": abs(br["BB"] - bb), "AB": abs(br["AB"] - ab), "AA": abs(br["AA"] - aa)}
    return {"residuals": {k: float(val) for k, val in res.items()},
            "brackets": {k: complex(val) for k, val in br.items()},
            "closed_forms": {"BB": complex(bb), "AB": complex(ab), "AA": complex(aa)},
            "scale": scale, "max_relative": max(res.values()) / scale}


def _twist_pair(spec):
    """(c_a, c_b) for c_b p_i = c_a I(x_i): (c11, c12), or (c22, c21) swapped."""
    c = spec.twist.c
    ia, _ = separating_indices(spec)
    return (c[0, 0], c[0, 1]) if ia == (0, 0) else (c[1, 1], c[1, 0])


def separation_residual(spec, xi, convention=NONSTANDARD):
    """Per-root residuals of the equations of separation, with scales.

    nonstandard rational: c12 p_i - c11 I(x_i); nonstandard trigonometric:
    I(x_i); standard: det(L(x_i) - p_i Id).
    """
    coords = np.asarray(as_coords(xi))
    sp = separate(spec, coords, convention)
    ints = integrals(spec, coords)
    num, den = ints.I.num, ints.I.den
    x, p = sp.x, sp.p
    d = np.abs(den(x))
    # magnitude of the terms that make up I(x_i), used to normalise
    absnum = np.abs(num.coeffs)
    term_scale = np.array([np.sum(absnum * np.abs(xx) ** np.arange(len(absnum))) for xx in x]) / d
    Ix = num(x) / den(x)
    if convention == STANDARD:
        lax = chain_lax(spec, coords)
        res = np.array([np.linalg.det(lax(xx) - pp * np.eye(2)) for xx, pp in zip(x, p)])
        detl = np.array([abs(np.linalg.det(lax(xx))) for xx in x])
        scale = np.maximum.reduce([np.abs(p) ** 2, np.abs(p) * term_scale, detl,
                                   np.full(len(x), 1e-30)])
    elif spec.model == RATIONAL:
        ca, cb = _twist_pair(spec)
        res = cb * p - ca * Ix
        scale = np.maximum.reduce([np.abs(cb * p), abs(ca) * term_scale,
                                   np.full(len(x), 1e-30)])
    else:
        res = Ix
        scale = np.maximum(term_scale, 1e-30)
    rel = np.abs(res) / scale
    return {"residuals": res, "scale": scale, "relative": rel,
            "max_relative": float(rel.max()), "separated": sp}


def identity_Iu_residual(spec, xi):
    """Numerator coefficients of I - (c12/c11) B - A - (det C / c11) L~22."""
    coords = np.asarray(as_coords(xi))
    num = lax_numerator(spec, coords)
    untw = lax_numerator(spec.with_twist(np.eye(2)), coords)
    c = spec.twist.c
    c11 = c[0, 0]
    detc = spec.twist.det
    resid = (num[0, 0] + num[1, 1]) - (c[0, 1] / c11) * num[1, 0] - num[0, 0] \
        - (detc / c11) * untw[1, 1]
    scale = max(float(np.max(np.abs(num))), float(np.max(np.abs(untw))) * abs(detc / c11), 1e-300)
    return {"max_coefficient": float(np.max(np.abs(resid))), "scale": scale,
            "relative": float(np.max(np.abs(resid))) / scale}


def integral_root_brackets(spec, xi, convention=NONSTANDARD):
    """Matrix B[k, i] = {I_k, x_i} for k = 1..N."""
    sp, gx, _ = separated_gradients(spec, xi, convention)
    _, gI = integral_gradients(spec, xi)
    pi = build_bivector(spec).matrix(xi)
    return gI[1:] @ pi @ gx.T, sp
