"""Chain configurations, r-matrices, Lax matrices, integrals and Casimirs.

Lax matrices are carried as a polynomial numerator matrix over a scalar
denominator polynomial:

* rational site:  L(u) = Id + S^T / (nu - u),   numerator (nu - u) Id + S^T
  over (nu - u); the chain denominator is prod (nu_k - u).
* trigonometric site: numerator 2 (u - nu) L(u), i.e.
  diag((2 S0i - Sii) u - nu (2 S0i + Sii)),  -2 u S21 at (1,2),  -2 nu S12 at
  (2,1); the chain denominator is 2**N prod (u - nu_k).

With these normalizations the integrals I_k are the numerator coefficients of
tr L(u) in descending powers of u.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import _kernels
from .errors import CoincidingSpectralParameters, InvalidChainSpec, PoleEvaluation
from .numrat import Dual, Poly, RationalFn, ratfn_eval
from .poisson import (
    LAYOUTS, MODELS, RATIONAL, TRIGONOMETRIC, Observable, as_coords, build_bivector,
    coord_index, site_size,
)

NU_MIN_SEPARATION = 1e-9
SYMMETRY_TOL = 1e-12
COINCIDE_TOL = 1e-10


@dataclass(frozen=True)
class TwistMatrix:
    c: np.ndarray

    def __post_init__(self):
        arr = np.array(self.c, dtype=np.complex128).reshape(2, 2)
        arr.setflags(write=False)
        object.__setattr__(self, "c", arr)

    @property
    def det(self):
        c = self.c
        return complex(c[0, 0] * c[1, 1] - c[0, 1] * c[1, 0])

    @property
    def scale(self):
        return float(np.max(np.abs(self.c)))

    @property
    def degenerate(self):
        s = self.scale
        return abs(self.det) <= 1e-12 * max(s * s, 1e-300)

    @property
    def is_diagonal(self):
        return abs(self.c[0, 1]) <= 1e-12 * max(self.scale, 1e-300) and \
            abs(self.c[1, 0]) <= 1e-12 * max(self.scale, 1e-300)

    def __getitem__(self, idx):
        return self.c[idx]


@dataclass(frozen=True)
class ChainSpec:
    model: str
    N: int
    nu: tuple
    twist: TwistMatrix = field(default_factory=lambda: TwistMatrix(np.eye(2)))

    def __post_init__(self):
        if self.model not in MODELS:
            raise InvalidChainSpec("model", f"expected one of {MODELS}, got {self.model!r}")
        if not isinstance(self.N, (int, np.integer)) or self.N < 1:
            raise InvalidChainSpec("N", "number of sites must be a positive integer")
        nu = tuple(complex(v) for v in np.atleast_1d(np.asarray(self.nu, dtype=np.complex128)))
        if len(nu) != self.N:
            raise InvalidChainSpec("nu", f"expected {self.N} poles, got {len(nu)}")
        if not all(np.isfinite(v) for v in nu):
            raise InvalidChainSpec("nu", "poles must be finite")
        for i in range(self.N):
            for j in range(i + 1, self.N):
                if abs(nu[i] - nu[j]) <= NU_MIN_SEPARATION:
                    raise InvalidChainSpec("nu", f"poles {i + 1} and {j + 1} coincide")
        twist = self.twist if isinstance(self.twist, TwistMatrix) else TwistMatrix(self.twist)
        if not np.all(np.isfinite(twist.c)):
            raise InvalidChainSpec("twist", "twist entries must be finite")
        if self.model == TRIGONOMETRIC:
            if any(abs(v) <= NU_MIN_SEPARATION for v in nu):
                raise InvalidChainSpec("nu", "trigonometric poles must be non-zero")
            if not twist.is_diagonal:
                raise InvalidChainSpec("twist", "trigonometric twist must be diagonal")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "twist", twist)

    @property
    def dim(self):
        return self.N * site_size(self.model)

    @property
    def C(self):
        return self.twist.c

    def with_twist(self, twist):
        return ChainSpec(self.model, self.N, self.nu, TwistMatrix(twist))

    def __hash__(self):
        return hash((self.model, self.N, self.nu, tuple(self.twist.c.reshape(-1).tolist())))

    def __eq__(self, other):
        if not isinstance(other, ChainSpec):
            return NotImplemented
        return (self.model, self.N, self.nu) == (other.model, other.N, other.nu) and \
            bool(np.all(self.twist.c == other.twist.c))


# ---------------------------------------------------------------------------
# r-matrices
# ---------------------------------------------------------------------------

def _pair(p):
    """'12', (1, 2) -> 0-based (0, 1)."""
    if isinstance(p, str):
        p = (int(p[0]), int(p[1]))
    return p[0] - 1, p[1] - 1


def permutation_4():
    P = np.zeros((4, 4))
    for i in range(2):
        for j in range(2):
            P[2 * i + j, 2 * j + i] = 1.0
    return P


class RMatrix:
    """(u, v) -> 4x4 matrix in the basis X_ij (x) X_kl.

    The component r_{ij,kl} (coefficient of X_ij (x) X_kl) sits at row
    2i+k, column 2j+l with 0-based indices.
    """

    def __init__(self, func, name="custom"):
        self._func = func
        self.name = name

    def __call__(self, u, v):
        if abs(u - v) <= COINCIDE_TOL * max(1.0, abs(u), abs(v)):
            raise CoincidingSpectralParameters(f"u={u!r} and v={v!r} coincide")
        return np.asarray(self._func(complex(u), complex(v)), dtype=np.complex128)

    def component(self, ij, kl, u, v):
        i, j = _pair(ij)
        k, l = _pair(kl)
        return complex(self(u, v)[2 * i + k, 2 * j + l])

    def __repr__(self):
        return f"RMatrix({self.name})"


def _rational_r(u, v):
    return permutation_4() / (u - v)


def _trig_r(u, v):
    R = np.zeros((4, 4), dtype=np.complex128)
    d = u - v
    R[0, 0] = R[3, 3] = 0.5 * (u + v) / d
    R[1, 2] = u / d  # X12 (x) X21
    R[2, 1] = v / d  # X21 (x) X12
    return R


def rmatrix(spec_or_model):
    model = getattr(spec_or_model, "model", spec_or_model)
    if model == RATIONAL:
        return RMatrix(_rational_r, RATIONAL)
    if model == TRIGONOMETRIC:
        return RMatrix(_trig_r, TRIGONOMETRIC)
    raise ValueError(f"unknown model {model!r}")


SYMMETRY_CONDITIONS = (
    ("r_{21,21}=0", lambda r, u, v: r.component("21", "21", u, v)),
    ("r_{21,11}=0", lambda r, u, v: r.component("21", "11", u, v)),
    ("r_{11,21}=0", lambda r, u, v: r.component("11", "21", u, v)),
    ("r_{12,12}=0", lambda r, u, v: r.component("12", "12", u, v)),
    ("r_{12,22}=0", lambda r, u, v: r.component("12", "22", u, v)),
    ("r_{22,12}=0", lambda r, u, v: r.component("22", "12", u, v)),
    ("r_{22,22}=r_{11,11}",
     lambda r, u, v: r.component("22", "22", u, v) - r.component("11", "11", u, v)),
)


def _spectral_pairs(rng, samples):
    pairs = []
    while len(pairs) < samples:
        u = rng.complex_square(2.0)
        v = rng.complex_square(2.0)
        if abs(u - v) > 1e-3:
            pairs.append((u, v))
    return pairs


def _default_rng(rng):
    if rng is None:
        from .sampling import XorShift64Star
        return XorShift64Star(12345)
    return rng


def check_symmetry_conditions(r, samples=200, rng=None, tol=SYMMETRY_TOL):
    """Max violation of each of the seven separating-symmetry conditions."""
    rng = _default_rng(rng)
    worst = np.zeros(len(SYMMETRY_CONDITIONS))
    for u, v in _spectral_pairs(rng, samples):
        R = r(u, v)
        comp = RMatrix(lambda a, b, R=R: R)
        for n, (_, fn) in enumerate(SYMMETRY_CONDITIONS):
            worst[n] = max(worst[n], abs(fn(comp, u, v)))
    conditions = [
        {"condition": name, "max_violation": float(w), "pass": bool(w < tol)}
        for (name, _), w in zip(SYMMETRY_CONDITIONS, worst)
    ]
    return {"conditions": conditions, "max_violation": float(worst.max()),
            "pass": all(c["pass"] for c in conditions), "samples": samples}


def check_skew_symmetry(r, samples=100, rng=None):
    """max |r(u,v) + P r(v,u) P| over sampled pairs."""
    rng = _default_rng(rng)
    P = permutation_4()
    worst = 0.0
    for u, v in _spectral_pairs(rng, samples):
        worst = max(worst, float(np.max(np.abs(r(u, v) + P @ r(v, u) @ P))))
    return worst


def check_twist_compatibility(r, C, samples=50, rng=None, rtol=1e-10):
    rng = _default_rng(rng)
    c = C.c if isinstance(C, TwistMatrix) else np.asarray(C, dtype=np.complex128)
    CC = np.kron(c, c)
    worst = 0.0
    scale = 0.0
    for u, v in _spectral_pairs(rng, samples):
        R = r(u, v)
        worst = max(worst, float(np.linalg.norm(R @ CC - CC @ R)))
        scale = max(scale, float(np.linalg.norm(R) * np.linalg.norm(CC)))
    scale = max(scale, 1.0)
    return {"max_residual": worst, "scale": scale, "pass": bool(worst < rtol * scale),
            "samples": samples}


# ---------------------------------------------------------------------------
# Lax numerators
# ---------------------------------------------------------------------------

def _site_blocks(spec, coords):
    """Per-site numerator coefficient arrays, shape (N, 2, 2, 2)."""
    m = site_size(spec.model)
    x = np.asarray(coords, dtype=np.complex128).reshape(spec.N, m)
    out = np.zeros((spec.N, 2, 2, 2), dtype=np.complex128)
    nu = np.asarray(spec.nu)
    if spec.model == RATIONAL:
        s11, s12, s21, s22 = x.T
        out[:, 0, 0, 0] = nu + s11
        out[:, 0, 1, 0] = s21
        out[:, 1, 0, 0] = s12
        out[:, 1, 1, 0] = nu + s22
        out[:, 0, 0, 1] = -1.0
        out[:, 1, 1, 1] = -1.0
    else:
        s01, s02, s11, s22, s12, s21 = x.T
        out[:, 0, 0, 1] = 2 * s01 - s11
        out[:, 0, 0, 0] = -nu * (2 * s01 + s11)
        out[:, 1, 1, 1] = 2 * s02 - s22
        out[:, 1, 1, 0] = -nu * (2 * s02 + s22)
        out[:, 0, 1, 1] = -2 * s21
        out[:, 1, 0, 0] = -2 * nu * s12
    return out


@lru_cache(maxsize=64)
def _site_derivatives(model, nu):
    """d(site numerator)/d(site coordinate), shape (N, P, 2, 2, 2); constant."""
    n = len(nu)
    p = len(LAYOUTS[model])
    out = np.zeros((n, p, 2, 2, 2), dtype=np.complex128)
    for k, v in enumerate(nu):
        if model == RATIONAL:
            # coordinate S_ab lands at entry (b, a)
            for q, name in enumerate(LAYOUTS[model]):
                a, b = int(name[1]) - 1, int(name[2]) - 1
                out[k, q, b, a, 0] = 1.0
        else:
            out[k, 0, 0, 0, 1], out[k, 0, 0, 0, 0] = 2.0, -2.0 * v
            out[k, 1, 1, 1, 1], out[k, 1, 1, 1, 0] = 2.0, -2.0 * v
            out[k, 2, 0, 0, 1], out[k, 2, 0, 0, 0] = -1.0, -v
            out[k, 3, 1, 1, 1], out[k, 3, 1, 1, 0] = -1.0, -v
            out[k, 4, 1, 0, 0] = -2.0 * v
            out[k, 5, 0, 1, 1] = -2.0
    out.setflags(write=False)
    return out


def lax_denominator(spec):
    """Scalar denominator polynomial of the chain Lax matrix."""
    den = Poly([1.0])
    for v in spec.nu:
        if spec.model == RATIONAL:
            den = den * Poly([v, -1.0])
        else:
            den = den * Poly([-2.0 * v, 2.0])
    return den


def site_denominator(spec, k):
    v = spec.nu[k]
    return Poly([v, -1.0]) if spec.model == RATIONAL else Poly([-2.0 * v, 2.0])


def lax_numerator(spec, xi, with_jac=False):
    """Numerator coefficients of the chain Lax matrix, shape (2, 2, N+1).

    Accepts dual coordinates (the result is then a Dual).  With
    ``with_jac=True`` returns ``(val, jac)`` with jac of shape
    (2, 2, N+1, dim) holding derivatives with respect to the coordinates.
    """
    coords = as_coords(xi)
    C = spec.twist.c
    if isinstance(coords, Dual):
        val, jac = _kernels.chain_product_jac(
            _site_blocks(spec, coords.val), _site_derivatives(spec.model, spec.nu), C)
        return Dual(val, jac @ coords.jac)
    if with_jac:
        return _kernels.chain_product_jac(
            _site_blocks(spec, coords), _site_derivatives(spec.model, spec.nu), C)
    return _kernels.chain_product(_site_blocks(spec, coords), C)


class LaxMatrix:
    """2x2 matrix of rational functions sharing one denominator."""

    def __init__(self, num, den):
        self.num = np.asarray(num, dtype=np.complex128)
        self.den = den if isinstance(den, Poly) else Poly(den)

    def entry(self, i, j):
        """Entry (i, j), 1-based, as a RationalFn."""
        return RationalFn(Poly(self.num[i - 1, j - 1]), self.den)

    def numerator(self, i, j):
        return Poly(self.num[i - 1, j - 1])

    def __call__(self, u):
        d = self.den(u)
        if abs(d) <= 1e-12 * self.den.scale:
            raise PoleEvaluation(f"u={u!r} is within tolerance of a pole")
        return _kernels.polyval(self.num, u) / d

    def trace(self):
        return RationalFn(Poly(self.num[0, 0]) + Poly(self.num[1, 1]), self.den)

    def det(self):
        n11, n12 = Poly(self.num[0, 0]), Poly(self.num[0, 1])
        n21, n22 = Poly(self.num[1, 0]), Poly(self.num[1, 1])
        return RationalFn(n11 * n22 - n12 * n21, self.den * self.den)


def site_lax(spec, k, xi):
    """One-site Lax matrix of site ``k`` (1-based)."""
    if not 1 <= k <= spec.N:
        raise IndexError(f"site {k} outside 1..{spec.N}")
    blocks = _site_blocks(spec, as_coords(xi))
    return LaxMatrix(blocks[k - 1], site_denominator(spec, k - 1))


def chain_lax(spec, xi):
    """Twisted chain Lax matrix L(nu_1) ... L(nu_N) C."""
    return LaxMatrix(lax_numerator(spec, xi), lax_denominator(spec))


def lax_value_and_gradient(spec, xi, u):
    """L(u) and dL_ij(u)/dx, shapes (2, 2) and (2, 2, dim)."""
    val, jac = lax_numerator(spec, xi, with_jac=True)
    den = lax_denominator(spec)
    d = den(u)
    if abs(d) <= 1e-12 * den.scale:
        raise PoleEvaluation(f"u={u!r} is within tolerance of a pole")
    powers = u ** np.arange(spec.N + 1)
    L = np.einsum("ijm,m->ij", val, powers) / d
    G = np.einsum("ijmn,m->ijn", jac, powers) / d
    return L, G


def check_sklyanin_bracket(spec, xi, u, v):
    """Compare all 16 brackets {L_ij(u), L_kl(v)} with [r(u,v), L(u) (x) L(v)]."""
    R = rmatrix(spec)(u, v)
    Lu, Gu = lax_value_and_gradient(spec, xi, u)
    Lv, Gv = lax_value_and_gradient(spec, xi, v)
    pi = build_bivector(spec).matrix(xi)
    # lhs[i, j, k, l] = {L_ij(u), L_kl(v)}
    lhs = np.einsum("ija,ab,klb->ijkl", Gu, pi, Gv)
    lhs4 = lhs.transpose(0, 2, 1, 3).reshape(4, 4)
    LL = np.kron(Lu, Lv)
    rhs = R @ LL - LL @ R
    absolute = float(np.max(np.abs(lhs4 - rhs)))
    scale = float(np.max(np.abs(R)) * np.max(np.abs(LL)))
    return {"absolute": absolute, "relative": absolute / max(scale, 1e-300),
            "scale": scale}


# ---------------------------------------------------------------------------
# integrals and Casimirs
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IntegralSet:
    I: RationalFn
    coeffs: np.ndarray  # numerator coefficients, descending powers of u

    @property
    def numerator(self):
        return self.I.num


def trace_numerator(spec, xi):
    num = lax_numerator(spec, xi)
    return num[0, 0] + num[1, 1]


def integrals(spec, xi):
    """I(u) = tr L(u) and its numerator coefficients in descending order.

    Rational: [(-1)^N (c11 + c22), I_1, ..., I_N].
    Trigonometric: [I_0, I_1, ..., I_N].
    """
    tr = trace_numerator(spec, xi)
    return IntegralSet(RationalFn(Poly(tr, trim=False), lax_denominator(spec)),
                       np.asarray(tr[::-1]).copy())


def integral_observable(spec, k):
    """Observable returning the k-th descending numerator coefficient of tr L."""
    idx = spec.N - k

    def fn(x):
        num = lax_numerator(spec, x)
        return num[0, 0][idx] + num[1, 1][idx]

    return Observable(fn, f"I{k}")


def integral_gradients(spec, xi):
    """Values and gradients of all integral coefficients, descending order."""
    val, jac = lax_numerator(spec, xi, with_jac=True)
    tr = val[0, 0] + val[1, 1]
    gtr = jac[0, 0] + jac[1, 1]
    return tr[::-1].copy(), gtr[::-1].copy()


def casimir_observables(spec):
    """Named per-site Casimir functions as observables."""
    out = []
    m = site_size(spec.model)
    for k in range(spec.N):
        def coord(name, k=k):
            return coord_index(spec.model, k, name)
        tag = f"[{k + 1}]"
        if spec.model == RATIONAL:
            a, b, c, d = (coord(n) for n in LAYOUTS[RATIONAL])
            out.append((f"c{tag}", Observable(lambda x, a=a, d=d: x[a] + x[d])))
            out.append((f"C{tag}", Observable(
                lambda x, a=a, b=b, c=c, d=d: x[a] * x[d] - x[b] * x[c])))
        else:
            i01, i02, i11, i22, i12, i21 = (k * m + q for q in range(6))
            out.append((f"c1{tag}", Observable(
                lambda x, p=i01, q=i11: 4 * x[p] * x[p] - x[q] * x[q])))
            out.append((f"c2{tag}", Observable(
                lambda x, p=i02, q=i22: 4 * x[p] * x[p] - x[q] * x[q])))
            out.append((f"C0{tag}", Observable(
                lambda x, a=i01, b=i11, c=i02, d=i22: (2 * x[a] - x[b]) * (2 * x[c] - x[d]))))
            out.append((f"C1{tag}", Observable(
                lambda x, a=i01, b=i02, c=i11, d=i22, e=i12, f=i21:
                2 * (x[c] * x[d] - 2 * x[e] * x[f] - 4 * x[a] * x[b]))))
            out.append((f"C2{tag}", Observable(
                lambda x, a=i01, b=i11, c=i02, d=i22: (2 * x[a] + x[b]) * (2 * x[c] + x[d]))))
            out.append((f"C2'{tag}", Observable(
                lambda x, a=i01, b=i02, c=i11, d=i22:
                4 * (x[a] - x[b]) * (x[a] - x[b]) - (x[c] + x[d]) * (x[c] + x[d]))))
    return out


@dataclass(frozen=True)
class CasimirInfo:
    C: RationalFn
    named: dict


def casimir_generating(spec, xi):
    """det L(u) and the named per-site Casimir values."""
    coords = np.asarray(as_coords(xi))
    C = chain_lax(spec, coords).det()
    named = {name: obs.value(coords) for name, obs in casimir_observables(spec)}
    return CasimirInfo(C, named)


def spectral_curve(spec, xi, u, w):
    """det(L(u) - w Id)."""
    L = chain_lax(spec, xi)(u)
    return complex((L[0, 0] - w) * (L[1, 1] - w) - L[0, 1] * L[1, 0])


def i0_relation(spec, xi):
    """I_0 I_N against (-1)^N c11^2 prod(nu_l c1_l) (trigonometric, c22 = 0)."""
    if spec.model != TRIGONOMETRIC:
        raise ValueError("relation holds for the trigonometric chain")
    coords = np.asarray(as_coords(xi))
    vals = integrals(spec, coords).coeffs
    prod = 1.0 + 0j
    for l in range(spec.N):
        s01 = coords[coord_index(spec.model, l, "S01")]
        s11 = coords[coord_index(spec.model, l, "S11")]
        prod *= spec.nu[l] * (4 * s01 * s01 - s11 * s11)
    rhs = (-1) ** spec.N * spec.twist.c[0, 0] ** 2 * prod
    lhs = vals[0] * vals[-1]
    return {"lhs": complex(lhs), "rhs": complex(rhs),
            "relative": float(abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300))}
