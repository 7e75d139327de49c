"""Phase-space layout, Poisson bivectors and brackets of observables.

Coordinates are complex and brackets are holomorphic.  Each site owns a
contiguous block of the coordinate vector:

* rational:       (S11, S12, S21, S22)
* trigonometric:  (S01, S02, S11, S22, S12, S21)

Sites never bracket with each other.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _kernels
from .numrat import Dual

RATIONAL = "rational"
TRIGONOMETRIC = "trigonometric"
MODELS = (RATIONAL, TRIGONOMETRIC)

LAYOUTS = {
    RATIONAL: ("S11", "S12", "S21", "S22"),
    TRIGONOMETRIC: ("S01", "S02", "S11", "S22", "S12", "S21"),
}


def site_size(model):
    return len(LAYOUTS[model])


def coord_index(model, site, name):
    """Flat index of coordinate ``name`` on 0-based ``site``."""
    return site * site_size(model) + LAYOUTS[model].index(name)


def coord_names(model, n_sites):
    names = []
    for k in range(n_sites):
        names.extend(f"{nm}[{k + 1}]" for nm in LAYOUTS[model])
    return names


@dataclass(frozen=True)
class PhasePoint:
    coords: np.ndarray
    model: str

    def __post_init__(self):
        arr = np.array(self.coords, dtype=np.complex128).reshape(-1)
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}")
        if arr.size % site_size(self.model):
            raise ValueError("coordinate vector does not split into whole sites")
        arr.setflags(write=False)
        object.__setattr__(self, "coords", arr)

    @property
    def n_sites(self):
        return self.coords.size // site_size(self.model)

    def site(self, k):
        m = site_size(self.model)
        return self.coords[k * m:(k + 1) * m]

    def get(self, site, name):
        return self.coords[coord_index(self.model, site, name)]

    def __len__(self):
        return self.coords.size


def as_coords(xi):
    if isinstance(xi, PhasePoint):
        return xi.coords
    if isinstance(xi, Dual):
        return xi
    return np.asarray(xi, dtype=np.complex128)


# ---------------------------------------------------------------------------
# structure constants
# ---------------------------------------------------------------------------

def _rational_site_terms():
    # {S_ij, S_kl} = d_kj S_il - d_il S_kj
    names = LAYOUTS[RATIONAL]
    idx = {(int(n[1]), int(n[2])): a for a, n in enumerate(names)}
    terms = []
    for (i, j), a in idx.items():
        for (k, l), b in idx.items():
            if b <= a:
                continue
            if k == j:
                terms.append((a, b, 1.0, idx[(i, l)], None))
            if i == l:
                terms.append((a, b, -1.0, idx[(k, j)], None))
    return terms


def _trig_site_terms():
    s01, s02, s11, s22, s12, s21 = range(6)
    return [
        (s01, s12, 0.25, s11, s12),
        (s02, s21, 0.25, s22, s21),
        (s11, s12, 1.0, s01, s12),
        (s22, s21, 1.0, s02, s21),
        (s01, s21, -0.25, s11, s21),
        (s02, s12, -0.25, s22, s12),
        (s11, s21, -1.0, s01, s21),
        (s22, s12, -1.0, s02, s12),
        (s12, s21, 1.0, s02, s11),
        (s12, s21, -1.0, s01, s22),
    ]


_SITE_TERMS = {RATIONAL: _rational_site_terms, TRIGONOMETRIC: _trig_site_terms}


class PoissonBivector:
    """Antisymmetric bivector with entries of degree <= 2 in the coordinates.

    Stored as a list of upper-triangle monomials ``coef * x[m1] * x[m2]``; an
    index equal to ``dim`` stands for the constant 1.
    """

    def __init__(self, model, n_sites):
        self.model = model
        self.n_sites = n_sites
        m = site_size(model)
        self.dim = m * n_sites
        rows = []
        for k in range(n_sites):
            off = k * m
            for a, b, c, m1, m2 in _SITE_TERMS[model]():
                rows.append((a + off, b + off, c,
                             m1 + off if m1 is not None else self.dim,
                             m2 + off if m2 is not None else self.dim))
        self.ia = np.array([r[0] for r in rows], dtype=np.int64)
        self.ib = np.array([r[1] for r in rows], dtype=np.int64)
        self.coef = np.array([r[2] for r in rows], dtype=np.complex128)
        self.m1 = np.array([r[3] for r in rows], dtype=np.int64)
        self.m2 = np.array([r[4] for r in rows], dtype=np.int64)
        for arr in (self.ia, self.ib, self.coef, self.m1, self.m2):
            arr.setflags(write=False)

    @property
    def terms(self):
        return (self.ia, self.ib, self.coef, self.m1, self.m2)

    def matrix(self, xi):
        """Pi(xi) as a dense dim x dim array."""
        return _kernels.bivector(as_coords(xi), self.terms, self.dim)

    def derivative(self, xi):
        """d Pi_ab / d x_c, shape (dim, dim, dim)."""
        return _kernels.bivector_derivative(as_coords(xi), self.terms, self.dim)

    def entry_terms(self, a, b):
        """Monomials of Pi_ab as (coef, m1, m2) with None for the constant."""
        out = []
        for t in range(self.ia.size):
            if self.ia[t] == a and self.ib[t] == b:
                sign = 1.0
            elif self.ia[t] == b and self.ib[t] == a:
                sign = -1.0
            else:
                continue
            m1 = int(self.m1[t]) if self.m1[t] < self.dim else None
            m2 = int(self.m2[t]) if self.m2[t] < self.dim else None
            out.append((sign * complex(self.coef[t]), m1, m2))
        return out

    def jacobi_tensor(self, xi):
        """Cyclic sum {x_a,{x_b,x_c}} + cyc. for all coordinate triples."""
        pi = self.matrix(xi)
        dpi = self.derivative(xi)
        t = np.einsum("ad,bcd->abc", pi, dpi)
        return t + t.transpose(1, 2, 0) + t.transpose(2, 0, 1)

    def jacobi_residual(self, xi):
        return float(np.max(np.abs(self.jacobi_tensor(xi))))


@lru_cache(maxsize=64)
def _bivector_for(model, n_sites):
    return PoissonBivector(model, n_sites)


def build_bivector(spec):
    """Bivector of the chain described by ``spec`` (cached per model and N)."""
    return _bivector_for(spec.model, spec.N)


# ---------------------------------------------------------------------------
# observables and brackets
# ---------------------------------------------------------------------------

class Observable:
    """A function of the coordinate vector that also accepts dual input."""

    def __init__(self, fn, name=None):
        self.fn = fn
        self.name = name or getattr(fn, "__name__", "observable")

    def __call__(self, xi):
        return self.fn(as_coords(xi))

    def value(self, xi):
        out = self.fn(np.asarray(as_coords(xi)))
        return complex(out.value) if isinstance(out, Dual) else complex(out)

    def gradient(self, xi):
        x = np.asarray(as_coords(xi), dtype=np.complex128)
        out = self.fn(Dual.seed(x))
        if not isinstance(out, Dual):
            return np.zeros(x.size, dtype=np.complex128)
        return out.jac.reshape(-1)

    def value_and_gradient(self, xi):
        x = np.asarray(as_coords(xi), dtype=np.complex128)
        out = self.fn(Dual.seed(x))
        if not isinstance(out, Dual):
            return complex(out), np.zeros(x.size, dtype=np.complex128)
        return complex(out.value), out.jac.reshape(-1)

    def _combine(self, other, op, sym):
        if isinstance(other, Observable):
            return Observable(lambda x: op(self.fn(x), other.fn(x)),
                              f"({self.name}{sym}{other.name})")
        return Observable(lambda x: op(self.fn(x), other), f"({self.name}{sym}{other!r})")

    def __add__(self, other):
        return self._combine(other, lambda a, b: a + b, "+")

    __radd__ = __add__

    def __sub__(self, other):
        return self._combine(other, lambda a, b: a - b, "-")

    def __mul__(self, other):
        return self._combine(other, lambda a, b: a * b, "*")

    __rmul__ = __mul__

    def __neg__(self):
        return Observable(lambda x: -self.fn(x), f"-{self.name}")

    def __repr__(self):
        return f"Observable({self.name})"


def coordinate(index, name=None):
    return Observable(lambda x: x[index], name or f"x[{index}]")


def constant(c):
    return Observable(lambda x: c, f"{c!r}")


def _grad(f, xi):
    if isinstance(f, Observable):
        return f.gradient(xi)
    return np.asarray(f, dtype=np.complex128)


def bracket_gradients(pi, gf, gg):
    return complex(gf @ pi @ gg)


def bracket(f, g, xi, bivector):
    """{f, g}(xi) = grad f . Pi . grad g.

    ``f`` and ``g`` may be observables or precomputed gradient vectors.
    """
    pi = bivector.matrix(xi)
    return bracket_gradients(pi, _grad(f, xi), _grad(g, xi))


def hamiltonian_vector_field(H, xi, bivector):
    """Pi . grad H, so that grad f . field = {f, H}."""
    return bivector.matrix(xi) @ _grad(H, xi)
