import numpy as np
import pytest

from sovchain.model import casimir_observables
from sovchain.poisson import (
    LAYOUTS, PhasePoint, RATIONAL, TRIGONOMETRIC, bracket, build_bivector, coord_index,
    coord_names, coordinate, hamiltonian_vector_field,
)

from conftest import make_spec


def test_rational_site_brackets_are_gl2():
    spec = make_spec(RATIONAL, 2, [[1, 0], [0, 1]])
    bv = build_bivector(spec)
    xi = np.arange(1, 9) * (0.3 + 0.1j)
    for site in range(2):
        S = {nm: coord_index(RATIONAL, site, nm) for nm in LAYOUTS[RATIONAL]}
        for a in LAYOUTS[RATIONAL]:
            for b in LAYOUTS[RATIONAL]:
                i, j, k, l = int(a[1]), int(a[2]), int(b[1]), int(b[2])
                want = 0j
                if k == j:
                    want += xi[S[f"S{i}{l}"]]
                if i == l:
                    want -= xi[S[f"S{k}{j}"]]
                got = bracket(coordinate(S[a]), coordinate(S[b]), xi, bv)
                assert got == pytest.approx(want, abs=1e-14)


def test_sites_commute(rng):
    for model in (RATIONAL, TRIGONOMETRIC):
        spec = make_spec(model, 3, [[1, 0], [0, 1]])
        pi = build_bivector(spec).matrix(rng.complex_vector(spec.dim))
        m = pi.shape[0] // 3
        for a in range(3):
            for b in range(3):
                if a != b:
                    assert np.all(pi[a * m:(a + 1) * m, b * m:(b + 1) * m] == 0)


@pytest.mark.parametrize("model", [RATIONAL, TRIGONOMETRIC])
def test_bivector_is_antisymmetric_and_poisson(model, rng):
    spec = make_spec(model, 2, [[1, 0], [0, 1]])
    bv = build_bivector(spec)
    for _ in range(5):
        xi = rng.complex_vector(spec.dim)
        pi = bv.matrix(xi)
        assert np.allclose(pi, -pi.T, atol=0)
        assert bv.jacobi_residual(xi) < 1e-13


@pytest.mark.parametrize("model", [RATIONAL, TRIGONOMETRIC])
def test_derivative_matches_finite_difference(model, rng):
    spec = make_spec(model, 2, [[1, 0], [0, 1]])
    bv = build_bivector(spec)
    xi = rng.complex_vector(spec.dim)
    d = bv.derivative(xi)
    h = 1e-6
    for c in range(spec.dim):
        e = np.zeros(spec.dim)
        e[c] = h
        fd = (bv.matrix(xi + e) - bv.matrix(xi - e)) / (2 * h)
        assert np.max(np.abs(d[:, :, c] - fd)) < 1e-8


@pytest.mark.parametrize("model", [RATIONAL, TRIGONOMETRIC])
def test_site_casimirs_are_central(model, rng):
    spec = make_spec(model, 2, [[1, 0], [0, 1]])
    bv = build_bivector(spec)
    xi = rng.complex_vector(spec.dim)
    for name, obs in casimir_observables(spec):
        field = hamiltonian_vector_field(obs, xi, bv)
        assert np.max(np.abs(field)) < 1e-13, name


def test_vector_field_sign_convention(rng):
    spec = make_spec(RATIONAL, 1, [[1, 0], [0, 1]])
    bv = build_bivector(spec)
    xi = rng.complex_vector(4)
    H = coordinate(1) * coordinate(2)
    field = hamiltonian_vector_field(H, xi, bv)
    f = coordinate(0)
    assert f.gradient(xi) @ field == pytest.approx(bracket(f, H, xi, bv))


def test_phase_point_layout():
    pt = PhasePoint(np.arange(12), TRIGONOMETRIC)
    assert pt.n_sites == 2
    assert pt.get(1, "S21") == 11
    assert coord_names(RATIONAL, 1) == ["S11[1]", "S12[1]", "S21[1]", "S22[1]"]
    with pytest.raises(ValueError):
        PhasePoint(np.arange(5), TRIGONOMETRIC)
