"""Complex polynomials, rational functions, root finding and forward-mode duals.

Coefficients are stored in ascending order.  Everything here is immutable and
free of shared state.
"""

import math

import numpy as np

from .errors import ConstantPolynomial, PoleEvaluation, ZeroPolynomial

TRIM_RTOL = 1e-12
POLE_RTOL = 1e-12
CLUSTER_RTOL = 1e-6


def _as_coeffs(coeffs):
    arr = np.atleast_1d(np.asarray(coeffs, dtype=np.complex128)).copy()
    if arr.ndim != 1:
        raise ValueError("polynomial coefficients must be one-dimensional")
    return arr


def trim_coeffs(coeffs, rtol=TRIM_RTOL):
    """Drop trailing coefficients with |c| <= rtol * max|c|."""
    arr = _as_coeffs(coeffs)
    if arr.size == 0:
        return arr
    scale = np.max(np.abs(arr))
    if scale == 0.0:
        return arr[:0]
    keep = arr.size
    while keep > 0 and abs(arr[keep - 1]) <= rtol * scale:
        keep -= 1
    return arr[:keep]


class Poly:
    """Immutable complex polynomial; ``coeffs[k]`` multiplies ``u**k``."""

    __slots__ = ("_c",)

    def __init__(self, coeffs=(), trim=True):
        arr = trim_coeffs(coeffs) if trim else _as_coeffs(coeffs)
        arr.setflags(write=False)
        object.__setattr__(self, "_c", arr)

    def __setattr__(self, name, value):
        raise AttributeError("Poly is immutable")

    @property
    def coeffs(self):
        return self._c

    @property
    def degree(self):
        return len(self._c) - 1 if len(self._c) else -math.inf

    @property
    def scale(self):
        return float(np.max(np.abs(self._c))) if len(self._c) else 0.0

    def is_zero(self):
        return len(self._c) == 0

    def __call__(self, u):
        return horner(self._c, u)

    eval = __call__

    def derivative(self):
        return poly_derivative(self)

    def __add__(self, other):
        other = _lift(other)
        n = max(len(self._c), len(other._c))
        out = np.zeros(n, dtype=np.complex128)
        out[:len(self._c)] += self._c
        out[:len(other._c)] += other._c
        return Poly(out)

    __radd__ = __add__

    def __neg__(self):
        return Poly(-self._c, trim=False)

    def __sub__(self, other):
        return self + (-_lift(other))

    def __rsub__(self, other):
        return _lift(other) - self

    def __mul__(self, other):
        other = _lift(other)
        if self.is_zero() or other.is_zero():
            return Poly()
        return Poly(np.convolve(self._c, other._c))

    __rmul__ = __mul__

    def __eq__(self, other):
        if not isinstance(other, Poly):
            return NotImplemented
        return len(self._c) == len(other._c) and bool(np.all(self._c == other._c))

    def __hash__(self):
        return hash(tuple(self._c.tolist()))

    def __repr__(self):
        return f"Poly({self._c.tolist()})"


def _lift(x):
    if isinstance(x, Poly):
        return x
    return Poly([x])


def horner(coeffs, u):
    """Horner evaluation of ascending ``coeffs``; works for arrays and duals."""
    acc = 0.0 * u
    for c in reversed(list(coeffs)):
        acc = acc * u + c
    return acc


def poly_derivative(p):
    c = p.coeffs
    if len(c) <= 1:
        return Poly()
    k = np.arange(1, len(c))
    return Poly(c[1:] * k, trim=False)


class RationalFn:
    """Ratio of two polynomials with a non-zero denominator."""

    __slots__ = ("num", "den")

    def __init__(self, num, den):
        num, den = _lift(num), _lift(den)
        if den.is_zero():
            raise ZeroPolynomial("denominator of a rational function is the zero polynomial")
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    def __setattr__(self, name, value):
        raise AttributeError("RationalFn is immutable")

    def __call__(self, u):
        return ratfn_eval(self, u)

    def derivative(self):
        return RationalFn(self.num.derivative() * self.den - self.num * self.den.derivative(),
                          self.den * self.den)

    def __repr__(self):
        return f"RationalFn(num={self.num!r}, den={self.den!r})"


def ratfn_eval(f, u, rtol=POLE_RTOL):
    d = f.den(u)
    if abs(d) <= rtol * f.den.scale:
        raise PoleEvaluation(f"u={u!r} is within tolerance of a pole")
    return f.num(u) / d


def poly_roots(p, newton_steps=2):
    """All roots of ``p`` with multiplicity, sorted by (real, imag)."""
    p = _lift(p)
    if p.is_zero():
        raise ZeroPolynomial("cannot take roots of the zero polynomial")
    if p.degree < 1:
        raise ConstantPolynomial("cannot take roots of a constant polynomial")
    c = p.coeffs
    n = len(c) - 1
    if n == 1:
        roots = np.array([-c[0] / c[1]])
    else:
        comp = np.zeros((n, n), dtype=np.complex128)
        comp[1:, :-1] = np.eye(n - 1)
        comp[:, -1] = -c[:-1] / c[-1]
        # LAPACK geev balances the matrix before the QR iteration
        roots = np.linalg.eigvals(comp)
    dp = poly_derivative(p)
    for _ in range(newton_steps):
        val = p(roots)
        der = dp(roots)
        ok = der != 0
        step = np.zeros_like(roots)
        step[ok] = val[ok] / der[ok]
        trial = roots - step
        # keep a Newton step only when it does not increase the residual
        better = np.abs(p(trial)) <= np.abs(val)
        roots = np.where(better, trial, roots)
    return sort_roots(roots)


def sort_roots(roots):
    roots = np.asarray(roots, dtype=np.complex128)
    order = np.lexsort((roots.imag, roots.real))
    return roots[order]


def min_root_separation(roots):
    roots = np.asarray(roots)
    if roots.size < 2:
        return math.inf
    diff = np.abs(roots[:, None] - roots[None, :])
    diff[np.diag_indices(roots.size)] = np.inf
    return float(diff.min())


def roots_clustered(roots, rtol=CLUSTER_RTOL):
    roots = np.asarray(roots)
    scale = max(1.0, float(np.max(np.abs(roots)))) if roots.size else 1.0
    return min_root_separation(roots) < rtol * scale


def poly_from_roots(roots, lead=1.0):
    out = Poly([lead])
    for r in roots:
        out = out * Poly([-r, 1.0])
    return out


# ---------------------------------------------------------------------------
# forward-mode dual numbers
# ---------------------------------------------------------------------------

class Dual:
    """Value plus Jacobian; ``jac`` has the shape of ``val`` with one extra
    trailing axis that indexes the seed basis.  Works elementwise on arrays."""

    __slots__ = ("val", "jac")
    __array_priority__ = 1000
    # make numpy arrays and scalars defer to the reflected operators below
    __array_ufunc__ = None

    def __init__(self, val, jac):
        self.val = np.asarray(val, dtype=np.complex128)
        self.jac = np.asarray(jac, dtype=np.complex128)

    @classmethod
    def seed(cls, values):
        values = np.asarray(values, dtype=np.complex128)
        n = values.size
        return cls(values, np.eye(n, dtype=np.complex128).reshape(values.shape + (n,)))

    @classmethod
    def constant(cls, values, n):
        values = np.asarray(values, dtype=np.complex128)
        return cls(values, np.zeros(values.shape + (n,), dtype=np.complex128))

    @property
    def nseed(self):
        return self.jac.shape[-1]

    @property
    def shape(self):
        return self.val.shape

    @property
    def value(self):
        return self.val[()] if self.val.ndim == 0 else self.val

    @property
    def derivs(self):
        return self.jac

    def __len__(self):
        return len(self.val)

    def __iter__(self):
        for i in range(len(self.val)):
            yield self[i]

    def __getitem__(self, idx):
        return Dual(self.val[idx], self.jac[idx])

    def __neg__(self):
        return Dual(-self.val, -self.jac)

    def __pos__(self):
        return self

    def __add__(self, other):
        if isinstance(other, Dual):
            val = self.val + other.val
            return Dual(val, _bjac(self.jac, val) + _bjac(other.jac, val))
        val = self.val + np.asarray(other)
        return Dual(val, _bjac(self.jac, val))

    __radd__ = __add__

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Dual):
            return Dual(self.val * other.val,
                        self.jac * other.val[..., None] + self.val[..., None] * other.jac)
        other = np.asarray(other)
        return Dual(self.val * other, self.jac * other[..., None])

    __rmul__ = __mul__

    def reciprocal(self):
        inv = 1.0 / self.val
        return Dual(inv, -self.jac * (inv * inv)[..., None])

    def __truediv__(self, other):
        if isinstance(other, Dual):
            return self * other.reciprocal()
        return self * (1.0 / np.asarray(other, dtype=np.complex128))

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, k):
        if isinstance(k, (int, np.integer)):
            return powi(self, int(k))
        if isinstance(k, Dual):
            return dexp(k * dlog(self))
        k = complex(k)
        val = self.val ** k
        return Dual(val, self.jac * (k * self.val ** (k - 1))[..., None])

    def __abs__(self):
        return np.abs(self.val)

    def sum(self, axis=None):
        if axis is None:
            return Dual(self.val.sum(), self.jac.reshape(-1, self.nseed).sum(axis=0))
        axis = axis % self.val.ndim
        return Dual(self.val.sum(axis=axis), self.jac.sum(axis=axis))

    def __matmul__(self, other):
        if isinstance(other, Dual):
            val = self.val @ other.val
            jac = (np.einsum("...ij,...jkn->...ikn", self.val, other.jac)
                   + np.einsum("...ijn,...jk->...ikn", self.jac, other.val))
            return Dual(val, jac)
        other = np.asarray(other, dtype=np.complex128)
        return Dual(self.val @ other, np.einsum("...ijn,...jk->...ikn", self.jac, other))

    def __rmatmul__(self, other):
        other = np.asarray(other, dtype=np.complex128)
        return Dual(other @ self.val, np.einsum("...ij,...jkn->...ikn", other, self.jac))

    def __repr__(self):
        return f"Dual(val={self.val!r}, jac.shape={self.jac.shape})"


DualScalar = Dual


def _bjac(jac, val):
    target = val.shape + (jac.shape[-1],)
    if jac.shape == target:
        return jac
    return np.broadcast_to(jac, target)


def is_dual(x):
    return isinstance(x, Dual)


def value_of(x):
    return x.value if isinstance(x, Dual) else x


def powi(x, k):
    """Integer power by repeated squaring (exact product-rule derivatives)."""
    if k < 0:
        return 1.0 / powi(x, -k)
    if k == 0:
        if isinstance(x, Dual):
            return Dual(np.ones_like(x.val), np.zeros_like(x.jac))
        return np.ones_like(np.asarray(x, dtype=np.complex128))[()]
    result = None
    base = x
    while k:
        if k & 1:
            result = base if result is None else result * base
        k >>= 1
        if k:
            base = base * base
    return result


def dsqrt(x):
    if isinstance(x, Dual):
        r = np.sqrt(x.val)
        return Dual(r, x.jac * (0.5 / r)[..., None])
    return np.sqrt(np.asarray(x, dtype=np.complex128))[()]


def dlog(x):
    if isinstance(x, Dual):
        return Dual(np.log(x.val), x.jac / x.val[..., None])
    return np.log(np.asarray(x, dtype=np.complex128))[()]


def dexp(x):
    if isinstance(x, Dual):
        e = np.exp(x.val)
        return Dual(e, x.jac * e[..., None])
    return np.exp(np.asarray(x, dtype=np.complex128))[()]


def dstack(items):
    """Stack scalars/duals into one (dual) vector."""
    if not any(isinstance(it, Dual) for it in items):
        return np.array([complex(it) for it in items], dtype=np.complex128)
    n = next(it.nseed for it in items if isinstance(it, Dual))
    vals = np.array([complex(value_of(it)) for it in items], dtype=np.complex128)
    jac = np.zeros((len(items), n), dtype=np.complex128)
    for i, it in enumerate(items):
        if isinstance(it, Dual):
            jac[i] = it.jac.reshape(n)
    return Dual(vals, jac)


def gradient(fn, x):
    """Value and complex gradient of scalar ``fn`` at the vector ``x``."""
    out = fn(Dual.seed(x))
    if not isinstance(out, Dual):
        return complex(out), np.zeros(np.size(x), dtype=np.complex128)
    return complex(out.value), out.jac.reshape(-1)
