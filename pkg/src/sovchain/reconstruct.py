"""Closed-form N=2 inverse maps from separated variables to spin coordinates.

Both maps use the poles nu = (1, -1) (first site S, second site T) and the
non-standard separated variables of a twist with c21 = c22 = 0.

Rational: traceless sites.  The map is single valued.
Trigonometric: Sklyanin reduction S02 = S01, S22 = -S11 (same for T).  The
map involves sqrt(x1 x2), sqrt(D1 D2) and the roots C2, K2 of two Casimirs;
several sign choices give different phase points with the same separated data,
so every consistent branch is returned.

All closed forms accept dual numbers, which is how brackets are pushed through
them in :func:`bracket_preservation_check`.
"""

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import BranchAmbiguity, CoincidentRoots, PoleCollision, SovChainError, \
    ZeroDenominator, ZeroOffDiagonal
from .model import ChainSpec, TwistMatrix, integrals
from .numrat import Dual, dsqrt, dstack, value_of
from .poisson import RATIONAL, TRIGONOMETRIC, build_bivector
from .sampling import generic_guard, make_rng, reduce_point
from .sov import separate

POLES = (1.0, -1.0)
ROOT_RTOL = 1e-8
DEN_RTOL = 1e-10
FORWARD_TOL = 1e-7


@dataclass(frozen=True)
class CasimirSet:
    """Rational: C1, C2 = det of the S and T blocks.
    Trigonometric: C1, K1 (the C1-type Casimirs of S and T) and the squares
    C2sq = (2S01+S11)(2S02+S22), K2sq = (2T01+T11)(2T02+T22)."""
    model: str
    C1: complex
    C2: complex = None
    K1: complex = None
    C2sq: complex = None
    K2sq: complex = None

    def __post_init__(self):
        vals = [v for v in (self.C1, self.C2, self.K1, self.C2sq, self.K2sq) if v is not None]
        if not all(np.isfinite(complex(v)) for v in vals):
            raise ValueError("Casimir values must be finite")

    @classmethod
    def from_point(cls, model, xi):
        x = np.asarray(xi, dtype=np.complex128)
        if model == RATIONAL:
            return cls(model, C1=x[0] * x[3] - x[1] * x[2], C2=x[4] * x[7] - x[5] * x[6])
        s01, s02, s11, s22, s12, s21, t01, t02, t11, t22, t12, t21 = x
        return cls(model,
                   C1=2 * (s11 * s22 - 2 * s12 * s21 - 4 * s01 * s02),
                   K1=2 * (t11 * t22 - 2 * t12 * t21 - 4 * t01 * t02),
                   C2sq=(2 * s01 + s11) * (2 * s02 + s22),
                   K2sq=(2 * t01 + t11) * (2 * t02 + t22))

    def values(self):
        if self.model == RATIONAL:
            return np.array([self.C1, self.C2], dtype=np.complex128)
        return np.array([self.C1, self.C2sq, self.K1, self.K2sq], dtype=np.complex128)


@dataclass
class ReconstructionResult:
    coords: np.ndarray                    # S block then T block, library layout
    forward_residual: dict
    branch: dict = field(default_factory=dict)
    candidates: list = field(default_factory=list)   # (branch, coords, residual)

    @property
    def S(self):
        return self.coords[: self.coords.size // 2]

    @property
    def T(self):
        return self.coords[self.coords.size // 2:]

    def nearest(self, reference):
        """Candidate closest to ``reference`` (branch resolution by a known point)."""
        ref = np.asarray(reference, dtype=np.complex128)
        return min(self.candidates, key=lambda c: float(np.max(np.abs(c[1] - ref))))


def chain_spec(model, c11, c12=0.0):
    twist = [[c11, c12], [0.0, 0.0]] if model == RATIONAL else [[c11, 0.0], [0.0, 0.0]]
    return ChainSpec(model, 2, POLES, TwistMatrix(twist))


def _check_roots(x1, x2, model):
    a, b = complex(value_of(x1)), complex(value_of(x2))
    if abs(a - b) < ROOT_RTOL * max(abs(a), abs(b), 1.0):
        raise CoincidentRoots("x1 and x2 coincide")
    forbidden = POLES + ((0.0,) if model == TRIGONOMETRIC else ())
    for x in (a, b):
        for v in forbidden:
            if abs(x - v) < ROOT_RTOL * max(1.0, abs(v)):
                raise PoleCollision(f"separated coordinate {x!r} hits {v!r}")


def _nonzero(val, scale, what, exc=ZeroDenominator):
    v = abs(complex(value_of(val)))
    if v <= DEN_RTOL * max(float(scale), 1e-300):
        raise exc(f"{what} vanishes")


# ---------------------------------------------------------------------------
# rational
# ---------------------------------------------------------------------------

def rational_closed_form(x1, x2, p1, p2, C1, C2, c11):
    """(S11, S12, S21, S22, T11, T12, T21, T22) from separated data."""
    _check_roots(x1, x2, RATIONAL)
    q1 = (x1 - 1) * (x1 + 1) * p1
    q2 = (x2 - 1) * (x2 + 1) * p2
    t1 = (x2 - 1) ** 2 * q1
    t2 = (x1 - 1) ** 2 * q2
    den = (q1 - q2) * C1 + t1 - t2
    scale = sum(abs(complex(value_of(v))) for v in (q1 * C1, q2 * C1, t1, t2))
    _nonzero(den, scale, "reconstruction denominator")
    S11 = ((x1 - 1) * q1 - (x2 - 1) * q2) * C1 + (x1 - 1) * t1 - (x2 - 1) * t2
    S11 = S11 / den
    S21 = c11 * (x1 - x2) * (C1 + (x1 - 1) ** 2) * (C1 + (x2 - 1) ** 2) / den
    _nonzero(S21, abs(c11) * abs(complex(value_of(x1 - x2))), "S21", ZeroOffDiagonal)
    S22 = -S11
    S12 = (S11 * S22 - C1) / S21
    T11 = ((x2 + 1) * q1 * C1 - (x1 + 1) * q2 * C1 + (x2 + 1) * t1 - (x1 + 1) * t2) / den
    T12 = p1 * p2 / c11 * (x2 - 1) * (x2 + 1) * (x1 - 1) * (x1 + 1) * (x1 - x2) / den
    _nonzero(T12, abs(complex(value_of(p1 * p2 / c11))), "T12", ZeroOffDiagonal)
    T22 = -T11
    T21 = (T11 * T22 - C2) / T12
    return [S11, S12, S21, S22, T11, T12, T21, T22]


def reconstruct_rational_n2(x, p, cas, c11):
    x1, x2 = (complex(v) for v in x)
    p1, p2 = (complex(v) for v in p)
    coords = np.array(rational_closed_form(x1, x2, p1, p2, cas.C1, cas.C2, c11),
                      dtype=np.complex128)
    res = forward_residual(chain_spec(RATIONAL, c11), coords, (x1, x2), (p1, p2), cas)
    return ReconstructionResult(coords, res, {}, [({}, coords, res)])


# ---------------------------------------------------------------------------
# trigonometric
# ---------------------------------------------------------------------------

def trig_closed_form(x1, x2, p1, p2, C1, C2, K1, K2, c11, sqrt_x=1, sqrt_d=1):
    """Twelve coordinates (S then T, library layout) from separated data.

    ``C1``, ``K1`` are the Casimirs 2(S11 S22 - 2 S12 S21 - 4 S01 S02) etc.;
    ``C2``, ``K2`` are square roots of the product Casimirs.  ``sqrt_x`` and
    ``sqrt_d`` pick the signs of sqrt(x1 x2) and sqrt(D1 D2).
    """
    _check_roots(x1, x2, TRIGONOMETRIC)
    c1, k1 = C1 / 4, K1 / 4
    C2s, K2s = C2 * C2, K2 * K2
    E1 = 4 * c1 * x2 + C2s + C2s * x2 * x2
    E2 = C2s * x1 * x1 + C2s + 4 * c1 * x1
    w1 = (x1 * x1 - 1) * E1 * p1
    w2 = (x2 * x2 - 1) * E2 * p2
    D1 = w1 - w2
    D2 = x1 * w1 - x2 * w2
    scale = (abs(complex(value_of(w1))) + abs(complex(value_of(w2)))) * \
        (1 + abs(complex(value_of(x1))) + abs(complex(value_of(x2))))
    _nonzero(D1 * D2, scale * scale, "D1 D2")
    rD = sqrt_d * dsqrt(D1 * D2)
    rx = sqrt_x * dsqrt(x1 * x2)
    S01 = -C2 / (4 * rD) * ((x1 + 1) * w1 - (x2 + 1) * w2)
    S11 = -C2 / (2 * rD) * ((x1 - 1) * w1 - (x2 - 1) * w2)
    S21 = -1j * K2 * c11 / (8 * rx * rD) * (x1 - x2) * E1 * E2
    S12 = -2j * rx / ((x1 - x2) * c11 * K2 * rD) * (
        (x1 * x1 - 1) * w1 * p1
        - 2 * (x2 * x2 - 1) * (x1 * x1 - 1) * (C2s * x1 * x2 + 2 * c1 * (x1 + x2) + C2s) * p2 * p1
        + (x2 * x2 - 1) * w2 * p2)
    T01 = 1j * (x2 - 1) * (x1 - 1) * K2 / (4 * rx * rD) * (
        (x1 + 1) * x1 * E1 * p1 - (x2 + 1) * x2 * E2 * p2)
    T11 = 1j * (x1 + 1) * (x2 + 1) * K2 / (2 * rx * rD) * (
        x1 * (x1 - 1) * E1 * p1 - x2 * (x2 - 1) * E2 * p2)
    T21 = -c11 / (8 * (x1 - x2) * (x1 * x1 - 1) * (x2 * x2 - 1) * p2 * p1 * C2 * x1 * x2 * rD) * (
        x1 * x1 * w1 * w1 * (-K2s * x2 * x2 + 4 * k1 * x2 - K2s)
        - 2 * x1 * x2 * w1 * w2 * (-K2s * x1 * x2 + 2 * k1 * (x1 + x2) - K2s)
        + x2 * x2 * w2 * w2 * (-K2s * x1 * x1 + 4 * k1 * x1 - K2s))
    T12 = 2 * (x1 - x2) * (x1 * x1 - 1) * (x2 * x2 - 1) * p2 * p1 * C2 / (c11 * rD)
    return [S01, S01, S11, -S11, S12, S21, T01, T01, T11, -T11, T12, T21]


TRIG_BRANCHES = tuple(itertools.product((1, -1), repeat=4))  # C2, K2, sqrt(x1x2), sqrt(D1D2)


def reconstruct_trig_n2(x, p, cas, c11, tol=FORWARD_TOL):
    """Evaluate every sign branch, keep those consistent with the forward map.

    The returned ``coords`` is the first consistent branch in the fixed
    enumeration order; ``candidates`` lists every consistent branch.
    """
    x1, x2 = (complex(v) for v in x)
    p1, p2 = (complex(v) for v in p)
    spec = chain_spec(TRIGONOMETRIC, c11)
    rc2, rk2 = np.sqrt(complex(cas.C2sq)), np.sqrt(complex(cas.K2sq))
    if abs(rc2) == 0 or abs(rk2) == 0:
        raise ZeroDenominator("C2 or K2 vanishes")
    tried = []
    for sc, sk, sx, sd in TRIG_BRANCHES:
        branch = {"C2": sc, "K2": sk, "sqrt_x1x2": sx, "sqrt_D1D2": sd}
        coords = np.array(trig_closed_form(x1, x2, p1, p2, cas.C1, sc * rc2, cas.K1, sk * rk2,
                                           c11, sx, sd), dtype=np.complex128)
        res = forward_residual(spec, coords, (x1, x2), (p1, p2), cas)
        tried.append((branch, coords, res))
    good = [t for t in tried if t[2]["max"] < tol]
    if not good:
        best = sorted(tried, key=lambda t: t[2]["max"])
        if len(best) > 1 and best[1][2]["max"] < 10 * best[0][2]["max"]:
            raise BranchAmbiguity(
                f"no branch reproduces the separated data (best residual "
                f"{best[0][2]['max']:.2e}) and the two best are comparable")
        good = best[:1]
    # distinct phase points among the consistent branches
    distinct = []
    for t in good:
        if not any(np.max(np.abs(t[1] - d[1])) <= 1e-9 * max(1.0, np.max(np.abs(d[1])))
                   for d in distinct):
            distinct.append(t)
    branch, coords, res = good[0]
    return ReconstructionResult(coords, res, branch, distinct)


# ---------------------------------------------------------------------------
# forward-map oracle
# ---------------------------------------------------------------------------

def forward_residual(spec, coords, x, p, cas):
    """Separate ``coords`` again and compare with the input data (relative)."""
    try:
        sp = separate(spec, coords)
    except SovChainError as exc:
        return {"x": np.inf, "p": np.inf, "casimirs": np.inf, "max": np.inf,
                "error": type(exc).__name__}
    x = np.asarray(x)
    p = np.asarray(p)
    order = [int(np.argmin(np.abs(sp.x - xx))) for xx in x]
    if len(set(order)) != len(order):
        return {"x": np.inf, "p": np.inf, "casimirs": np.inf, "max": np.inf}
    rx = float(np.max(np.abs(sp.x[order] - x)) / max(1.0, np.max(np.abs(x))))
    rp = float(np.max(np.abs(sp.p[order] - p)) / max(1.0, np.max(np.abs(p))))
    got = CasimirSet.from_point(spec.model, coords).values()
    want = cas.values()
    rc = float(np.max(np.abs(got - want)) / max(1.0, np.max(np.abs(want))))
    return {"x": rx, "p": rp, "casimirs": rc, "max": max(rx, rp, rc)}


def reconstruct(model, x, p, cas, c11, **kw):
    if model == RATIONAL:
        return reconstruct_rational_n2(x, p, cas, c11)
    return reconstruct_trig_n2(x, p, cas, c11, **kw)


# ---------------------------------------------------------------------------
# integrals in separated variables
# ---------------------------------------------------------------------------

def hamiltonians_from_separated(x, p, c11, c12):
    """I1, I2 of the rational N=2 chain with poles (1, -1) and c21 = c22 = 0."""
    x1, x2 = x
    p1, p2 = p
    _check_roots(x1, x2, RATIONAL)
    a1 = c12 * (x1 - 1) * (x1 + 1) * p1 / (c11 * (x1 - x2))
    a2 = c12 * (x2 - 1) * (x2 + 1) * p2 / (c11 * (x1 - x2))
    I1 = a1 - a2 - (x1 + x2) * c11
    I2 = -x2 * a1 + x1 * a2 + x1 * x2 * c11
    return I1, I2


# ---------------------------------------------------------------------------
# Poisson-bracket preservation
# ---------------------------------------------------------------------------

def _sample_reduced(spec, rng, max_tries=1000):
    for _ in range(max_tries):
        xi = reduce_point(spec, rng.complex_vector(spec.dim))
        if generic_guard(spec, xi) is None:
            return xi
    raise RuntimeError("could not sample a generic reduced point")


def pushed_bivector(model, x, p, cas, c11, branch=None):
    """Bivector induced on the coordinates by {x_i, p_i} = p_i (or x_i p_i)."""
    seed = Dual.seed(np.array([x[0], x[1], p[0], p[1]], dtype=np.complex128))
    x1, x2, p1, p2 = (seed[i] for i in range(4))
    if model == RATIONAL:
        out = rational_closed_form(x1, x2, p1, p2, cas.C1, cas.C2, c11)
    else:
        b = branch or {"C2": 1, "K2": 1, "sqrt_x1x2": 1, "sqrt_D1D2": 1}
        out = trig_closed_form(x1, x2, p1, p2, cas.C1, b["C2"] * np.sqrt(complex(cas.C2sq)),
                               cas.K1, b["K2"] * np.sqrt(complex(cas.K2sq)), c11,
                               b["sqrt_x1x2"], b["sqrt_D1D2"])
    vec = dstack(out)
    J = vec.jac  # (dim, 4)
    w = np.array(p, dtype=np.complex128)
    if model == TRIGONOMETRIC:
        w = w * np.array(x, dtype=np.complex128)
    W = np.zeros((4, 4), dtype=np.complex128)
    for i in range(2):
        W[i, 2 + i] = w[i]
        W[2 + i, i] = -w[i]
    return vec.val, J @ W @ J.T


def bracket_preservation_check(model, samples=20, seed=0, c11=1.3, c12=0.0):
    """Max deviation between the bracket induced through the closed forms and
    the model bivector at reconstructed points."""
    rng = make_rng(seed)
    spec = chain_spec(model, c11, c12)
    bv = build_bivector(spec)
    worst = 0.0
    worst_rel = 0.0
    cross = 0.0
    half = spec.dim // 2
    for _ in range(samples):
        xi = _sample_reduced(spec, rng)
        sp = separate(spec, xi)
        cas = CasimirSet.from_point(model, xi)
        branch = None
        if model == TRIGONOMETRIC:
            branch = reconstruct_trig_n2(sp.x, sp.p, cas, c11).branch
        coords, induced = pushed_bivector(model, sp.x, sp.p, cas, c11, branch)
        target = bv.matrix(coords)
        dev = np.abs(induced - target)
        scale = max(1.0, float(np.max(np.abs(target))))
        worst = max(worst, float(dev.max()))
        worst_rel = max(worst_rel, float(dev.max()) / scale)
        cross = max(cross, float(np.max(np.abs(induced[:half, half:]))) / scale)
    return {"model": model, "samples": samples, "max_deviation": worst,
            "relative": worst_rel, "cross_block": cross, "pass": worst_rel < 1e-7}


def round_trip(model, xi, c11, c12=0.0):
    """reconstruct(separate(xi)) compared with ``xi`` (nearest branch)."""
    spec = chain_spec(model, c11, c12)
    xi = np.asarray(xi, dtype=np.complex128)
    sp = separate(spec, xi)
    cas = CasimirSet.from_point(model, xi)
    res = reconstruct(model, sp.x, sp.p, cas, c11)
    _, coords, _ = res.nearest(xi)
    err = float(np.max(np.abs(coords - xi)) / max(1.0, np.max(np.abs(xi))))
    I_direct = integrals(spec, xi).coeffs
    return {"error": err, "result": res, "coords": coords, "integrals": I_direct}
