"""Numeric inner loops: Horner evaluation, products of polynomial 2x2 matrices
(with their coordinate Jacobians) and assembly of the Poisson bivector.

Every kernel exists twice.  The ``_lp_*`` functions are explicit loops compiled
with numba; the ``_np_*`` functions are vectorised numpy.  The environment
variable ``SOVCHAIN_NUMBA`` selects the backend at import time: ``0``/``false``/
``off`` forces numpy, anything else uses numba when it can be imported.

Polynomial coefficient arrays are always ascending in degree along the *last*
axis unless a kernel says otherwise.
"""

import os

import numpy as np

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None


def _env_wants_numba():
    raw = os.environ.get("SOVCHAIN_NUMBA", "1").strip().lower()
    return raw not in ("0", "false", "no", "off")


HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and _env_wants_numba()


# --------------------------------------------------------------------------
# numpy implementations
# --------------------------------------------------------------------------

def _np_polyval(coeffs, u):
    """Horner along the last axis of ``coeffs`` (shape ``(K, m)``)."""
    out = np.zeros(coeffs.shape[0], dtype=np.complex128)
    for j in range(coeffs.shape[1] - 1, -1, -1):
        out = out * u + coeffs[:, j]
    return out


def _np_polymat_mul(a, b):
    # a: (2, 2, ma, ...), b: (2, 2, mb) -> (2, 2, ma + mb - 1, ...)
    ma, mb = a.shape[2], b.shape[2]
    out = np.zeros((2, 2, ma + mb - 1) + a.shape[3:], dtype=np.complex128)
    for s in range(ma):
        for t in range(mb):
            out[:, :, s + t] += np.einsum("ik...,kj->ij...", a[:, :, s], b[:, :, t])
    return out


def _np_polymat_lmul(a, b):
    # a: (2, 2, ma), b: (2, 2, mb, ...) -> (2, 2, ma + mb - 1, ...)
    ma, mb = a.shape[2], b.shape[2]
    out = np.zeros((2, 2, ma + mb - 1) + b.shape[3:], dtype=np.complex128)
    for s in range(ma):
        for t in range(mb):
            out[:, :, s + t] += np.einsum("ik,kj...->ij...", a[:, :, s], b[:, :, t])
    return out


def _np_chain_product(sites, twist):
    n = sites.shape[0]
    acc = np.zeros((2, 2, 1), dtype=np.complex128)
    acc[:, :, 0] = np.eye(2)
    for k in range(n):
        acc = _np_polymat_mul(acc, sites[k])
    return np.einsum("ijm,jl->ilm", acc, twist)


def _np_chain_product_jac(sites, dsites, twist):
    n, p = dsites.shape[0], dsites.shape[1]
    # prefix[k] = M_0 ... M_{k-1}; suffix[k] = M_k ... M_{n-1} C
    prefix = [None] * (n + 1)
    prefix[0] = np.zeros((2, 2, 1), dtype=np.complex128)
    prefix[0][:, :, 0] = np.eye(2)
    for k in range(n):
        prefix[k + 1] = _np_polymat_mul(prefix[k], sites[k])
    suffix = [None] * (n + 1)
    suffix[n] = np.zeros((2, 2, 1), dtype=np.complex128)
    suffix[n][:, :, 0] = twist
    for k in range(n - 1, -1, -1):
        suffix[k] = _np_polymat_lmul(sites[k], suffix[k + 1])
    val = suffix[0]
    jac = np.zeros((2, 2, n + 1, n * p), dtype=np.complex128)
    for k in range(n):
        # (2, 2, 2, p): derivative of site k w.r.t. its p coordinates
        dk = np.moveaxis(dsites[k], 0, -1)
        left = _np_polymat_lmul(prefix[k], dk)
        right = suffix[k + 1]
        block = np.zeros((2, 2, n + 1, p), dtype=np.complex128)
        ml, mr = left.shape[2], right.shape[2]
        for s in range(ml):
            for t in range(mr):
                block[:, :, s + t] += np.einsum("ikq,kj->ijq", left[:, :, s], right[:, :, t])
        jac[:, :, :, k * p:(k + 1) * p] = block
    return val, jac


def _np_bivector(coords, ia, ib, coef, m1, m2, dim):
    ext = np.append(coords, 1.0 + 0.0j)
    vals = coef * ext[m1] * ext[m2]
    out = np.zeros((dim, dim), dtype=np.complex128)
    np.add.at(out, (ia, ib), vals)
    np.add.at(out, (ib, ia), -vals)
    return out


def _np_bivector_derivative(coords, ia, ib, coef, m1, m2, dim):
    ext = np.append(coords, 1.0 + 0.0j)
    out = np.zeros((dim, dim, dim + 1), dtype=np.complex128)
    d1 = coef * ext[m2]
    d2 = coef * ext[m1]
    np.add.at(out, (ia, ib, m1), d1)
    np.add.at(out, (ib, ia, m1), -d1)
    np.add.at(out, (ia, ib, m2), d2)
    np.add.at(out, (ib, ia, m2), -d2)
    # the last slot collects derivatives of the constant factor and is dropped
    return out[:, :, :dim]


# --------------------------------------------------------------------------
# numba implementations
# --------------------------------------------------------------------------

def _lp_polyval(coeffs, u):
    k, m = coeffs.shape
    out = np.zeros(k, dtype=np.complex128)
    for r in range(k):
        acc = 0j
        for j in range(m - 1, -1, -1):
            acc = acc * u + coeffs[r, j]
        out[r] = acc
    return out


def _lp_polymat_mul(a, b):
    ma = a.shape[2]
    mb = b.shape[2]
    out = np.zeros((2, 2, ma + mb - 1), dtype=np.complex128)
    for i in range(2):
        for j in range(2):
            for k in range(2):
                for s in range(ma):
                    x = a[i, k, s]
                    if x == 0:
                        continue
                    for t in range(mb):
                        out[i, j, s + t] += x * b[k, j, t]
    return out


def _lp_chain_product(sites, twist):
    n = sites.shape[0]
    acc = np.zeros((2, 2, 1), dtype=np.complex128)
    acc[0, 0, 0] = 1.0
    acc[1, 1, 0] = 1.0
    for k in range(n):
        acc = _lp_polymat_mul(acc, sites[k])
    m = acc.shape[2]
    out = np.zeros((2, 2, m), dtype=np.complex128)
    for i in range(2):
        for l in range(2):
            for j in range(2):
                c = twist[j, l]
                for s in range(m):
                    out[i, l, s] += acc[i, j, s] * c
    return out


def _lp_chain_product_jac(sites, dsites, twist):
    n = dsites.shape[0]
    p = dsites.shape[1]
    # prefix[k] has degree k, stored padded to n + 1 coefficients
    prefix = np.zeros((n + 1, 2, 2, n + 1), dtype=np.complex128)
    prefix[0, 0, 0, 0] = 1.0
    prefix[0, 1, 1, 0] = 1.0
    for k in range(n):
        prod = _lp_polymat_mul(prefix[k, :, :, :k + 1], sites[k])
        prefix[k + 1, :, :, :k + 2] = prod
    suffix = np.zeros((n + 1, 2, 2, n + 1), dtype=np.complex128)
    for i in range(2):
        for j in range(2):
            suffix[n, i, j, 0] = twist[i, j]
    for k in range(n - 1, -1, -1):
        prod = _lp_polymat_mul(sites[k], suffix[k + 1, :, :, :n - k])
        suffix[k, :, :, :n - k + 1] = prod
    val = suffix[0].copy()
    jac = np.zeros((2, 2, n + 1, n * p), dtype=np.complex128)
    for k in range(n):
        for q in range(p):
            left = _lp_polymat_mul(prefix[k, :, :, :k + 1], dsites[k, q])
            full = _lp_polymat_mul(left, suffix[k + 1, :, :, :n - k])
            col = k * p + q
            for i in range(2):
                for j in range(2):
                    for s in range(full.shape[2]):
                        jac[i, j, s, col] = full[i, j, s]
    return val, jac


def _lp_bivector(coords, ia, ib, coef, m1, m2, dim):
    out = np.zeros((dim, dim), dtype=np.complex128)
    for t in range(ia.shape[0]):
        v = coef[t]
        if m1[t] < dim:
            v = v * coords[m1[t]]
        if m2[t] < dim:
            v = v * coords[m2[t]]
        out[ia[t], ib[t]] += v
        out[ib[t], ia[t]] -= v
    return out


def _lp_bivector_derivative(coords, ia, ib, coef, m1, m2, dim):
    out = np.zeros((dim, dim, dim), dtype=np.complex128)
    for t in range(ia.shape[0]):
        a = ia[t]
        b = ib[t]
        if m1[t] < dim:
            d = coef[t]
            if m2[t] < dim:
                d = d * coords[m2[t]]
            out[a, b, m1[t]] += d
            out[b, a, m1[t]] -= d
        if m2[t] < dim:
            d = coef[t]
            if m1[t] < dim:
                d = d * coords[m1[t]]
            out[a, b, m2[t]] += d
            out[b, a, m2[t]] -= d
    return out


NUMPY_KERNELS = {
    "polyval": _np_polyval,
    "chain_product": _np_chain_product,
    "chain_product_jac": _np_chain_product_jac,
    "bivector": _np_bivector,
    "bivector_derivative": _np_bivector_derivative,
}

if HAVE_NUMBA:
    _jit = numba.njit(cache=True, nogil=True)
    # numba resolves globals lazily, so rebinding the helper makes the
    # product kernels call the compiled version
    _lp_polymat_mul = _jit(_lp_polymat_mul)
    NUMBA_KERNELS = {
        "polyval": _jit(_lp_polyval),
        "chain_product": _jit(_lp_chain_product),
        "chain_product_jac": _jit(_lp_chain_product_jac),
        "bivector": _jit(_lp_bivector),
        "bivector_derivative": _jit(_lp_bivector_derivative),
    }
else:  # pragma: no cover
    NUMBA_KERNELS = None

ACTIVE = NUMBA_KERNELS if USE_NUMBA else NUMPY_KERNELS
BACKEND = "numba" if USE_NUMBA else "numpy"


def kernels(backend=None):
    """Kernel table for ``backend`` (``"numba"``/``"numpy"``), default active."""
    if backend is None:
        return ACTIVE
    if backend == "numba":
        if NUMBA_KERNELS is None:
            raise RuntimeError("numba is not available")
        return NUMBA_KERNELS
    if backend == "numpy":
        return NUMPY_KERNELS
    raise ValueError(f"unknown backend {backend!r}")


def polyval(coeffs, u):
    """Evaluate polynomials stored along the last axis of ``coeffs`` at ``u``."""
    coeffs = np.ascontiguousarray(coeffs, dtype=np.complex128)
    lead = coeffs.shape[:-1]
    flat = coeffs.reshape(-1, coeffs.shape[-1])
    return ACTIVE["polyval"](flat, complex(u)).reshape(lead)


def chain_product(sites, twist):
    return ACTIVE["chain_product"](
        np.ascontiguousarray(sites, dtype=np.complex128),
        np.ascontiguousarray(twist, dtype=np.complex128),
    )


def chain_product_jac(sites, dsites, twist):
    return ACTIVE["chain_product_jac"](
        np.ascontiguousarray(sites, dtype=np.complex128),
        np.ascontiguousarray(dsites, dtype=np.complex128),
        np.ascontiguousarray(twist, dtype=np.complex128),
    )


def bivector(coords, terms, dim):
    ia, ib, coef, m1, m2 = terms
    return ACTIVE["bivector"](np.ascontiguousarray(coords, dtype=np.complex128),
                              ia, ib, coef, m1, m2, dim)


def bivector_derivative(coords, terms, dim):
    ia, ib, coef, m1, m2 = terms
    return ACTIVE["bivector_derivative"](np.ascontiguousarray(coords, dtype=np.complex128),
                                         ia, ib, coef, m1, m2, dim)
