import os
import subprocess
import sys

import numpy as np
import pytest

from sovchain import _kernels
from sovchain.model import _site_blocks, _site_derivatives
from sovchain.poisson import RATIONAL, TRIGONOMETRIC, build_bivector

from conftest import make_spec

pytestmark = pytest.mark.skipif(_kernels.NUMBA_KERNELS is None, reason="numba missing")


def _inputs(model, n, rng):
    spec = make_spec(model, n, [[1.0, 0.0], [0.0, 0.5]])
    xi = rng.complex_vector(spec.dim)
    bv = build_bivector(spec)
    sites = np.ascontiguousarray(_site_blocks(spec, xi))
    dsites = np.ascontiguousarray(_site_derivatives(spec.model, spec.nu))
    twist = np.ascontiguousarray(spec.twist.c)
    return {
        "polyval": (np.ascontiguousarray(rng.complex_vector(12).reshape(4, 3)), 0.2 - 0.9j),
        "chain_product": (sites, twist),
        "chain_product_jac": (sites, dsites, twist),
        "bivector": (xi, *bv.terms, bv.dim),
        "bivector_derivative": (xi, *bv.terms, bv.dim),
    }


@pytest.mark.parametrize("model", [RATIONAL, TRIGONOMETRIC])
@pytest.mark.parametrize("n", [1, 2, 4])
def test_backends_agree(model, n, rng):
    fast, slow = _kernels.kernels("numba"), _kernels.kernels("numpy")
    for name, args in _inputs(model, n, rng).items():
        a, b = fast[name](*args), slow[name](*args)
        for x, y in zip(a if isinstance(a, tuple) else (a,), b if isinstance(b, tuple) else (b,)):
            assert np.allclose(x, y, rtol=1e-12, atol=1e-12), name


def test_unknown_backend():
    with pytest.raises(ValueError):
        _kernels.kernels("fortran")


@pytest.mark.parametrize("flag,expected", [("0", "numpy"), ("1", "numba")])
def test_env_var_selects_backend(flag, expected):
    env = dict(os.environ, SOVCHAIN_NUMBA=flag)
    out = subprocess.run([sys.executable, "-c", "import sovchain; print(sovchain.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == expected
