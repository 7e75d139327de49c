import numpy as np
import pytest

from sovchain.errors import DegenerateDegree, DegenerateTwistRow
from sovchain.model import casimir_observables, integrals, lax_value_and_gradient
from sovchain.poisson import RATIONAL, TRIGONOMETRIC, build_bivector, coord_index
from sovchain.sampling import random_phase_point
from sovchain.sov import (
    NONSTANDARD, STANDARD, bracket_matrix, check_separating_algebra, derived_observable_gradient,
    identity_Iu_residual, integral_root_brackets, separate, separated_gradients,
    separating_functions, separation_residual,
)

from conftest import RATIONAL_TWISTS, TRIG_TWISTS, make_spec


def _away(rng, spec, avoid=()):
    while True:
        u = rng.complex_square(2.0)
        if all(abs(u - v) > 0.1 for v in tuple(spec.nu) + tuple(avoid)):
            return u


@pytest.mark.parametrize("n", [2, 3])
def test_separating_polynomial_leading_coefficient(n, rng):
    spec = make_spec(RATIONAL, n, RATIONAL_TWISTS["special"])
    A = separating_functions(spec, random_phase_point(spec, rng))["A"]
    assert A.num.degree == n
    assert A.num.coeffs[-1] == pytest.approx((-1) ** n * 1.3)


def test_trig_trailing_coefficient(rng):
    spec = make_spec(TRIGONOMETRIC, 2, TRIG_TWISTS["special"])
    xi = random_phase_point(spec, rng)
    A = separating_functions(spec, xi)["A"]
    prod = 1.0
    for k in range(2):
        prod *= 2 * xi[coord_index(TRIGONOMETRIC, k, "S01")] - xi[coord_index(TRIGONOMETRIC, k, "S11")]
    assert A.num.coeffs[-1] == pytest.approx(1.3 * prod)


def test_antidiagonal_twist_has_no_separating_row(rng):
    spec = make_spec(RATIONAL, 2, [[0, 1], [1, 0]])
    with pytest.raises(DegenerateTwistRow):
        separating_functions(spec, rng.complex_vector(8))


def test_swapped_row_when_c11_vanishes(rng):
    spec = make_spec(RATIONAL, 2, [[0, 0], [0.4, 1.2]])
    sp = separate(spec, random_phase_point(spec, rng))
    assert sp.N == 2


def test_special_case_roots_are_those_of_the_integral_quadratic(rng):
    spec = make_spec(RATIONAL, 2, RATIONAL_TWISTS["special"])
    xi = random_phase_point(spec, rng)
    _, I1, I2 = integrals(spec, xi).coeffs
    x = separate(spec, xi).x
    assert np.sort_complex(x) == pytest.approx(np.sort_complex(np.roots([1.3, I1, I2])))


def test_zero_spins_are_degenerate():
    spec = make_spec(RATIONAL, 2, RATIONAL_TWISTS["special"])
    with pytest.raises(DegenerateDegree):
        separate(spec, np.zeros(8))


def test_standard_convention_needs_c21():
    spec = make_spec(RATIONAL, 2, RATIONAL_TWISTS["special"])
    with pytest.raises(DegenerateDegree):
        separate(spec, np.arange(1, 9) * (0.2 + 0.1j), STANDARD)


@pytest.mark.parametrize("convention", [NONSTANDARD, STANDARD])
def test_separated_pairs_solve_their_defining_equations(convention, rng):
    spec = make_spec(RATIONAL, 3, RATIONAL_TWISTS["general"])
    xi = random_phase_point(spec, rng, convention=convention)
    sp = separate(spec, xi, convention)
    funcs = separating_functions(spec, xi)
    root_fn, mom_fn = ("A", "B") if convention == NONSTANDARD else ("B", "A")
    for x, p in zip(sp.x, sp.p):
        assert abs(funcs[root_fn](x)) < 1e-9
        assert funcs[mom_fn](x) == pytest.approx(p, rel=1e-10)


@pytest.mark.parametrize("model", [RATIONAL, TRIGONOMETRIC])
def test_gradients_match_finite_differences(model, rng):
    twist = RATIONAL_TWISTS["general"] if model == RATIONAL else TRIG_TWISTS["special"]
    spec = make_spec(model, 2, twist)
    xi = random_phase_point(spec, rng)
    sp, gx, gp = separated_gradients(spec, xi)
    delta = rng.complex_vector(spec.dim)
    eps = 1e-6
    plus, minus = separate(spec, xi + eps * delta), separate(spec, xi - eps * delta)
    for m in range(2):
        ip = int(np.argmin(np.abs(plus.x - sp.x[m])))
        im = int(np.argmin(np.abs(minus.x - sp.x[m])))
        dx = (plus.x[ip] - minus.x[im]) / (2 * eps)
        dp = (plus.p[ip] - minus.p[im]) / (2 * eps)
        assert abs(dx - gx[m] @ delta) < 1e-6 * max(1, abs(dx))
        assert abs(dp - gp[m] @ delta) < 1e-6 * max(1, abs(dp))
    assert np.array_equal(derived_observable_gradient(spec, xi, "x", 1), gx[1])


def test_casimir_flows_leave_roots_fixed(rng):
    spec = make_spec(RATIONAL, 2, RATIONAL_TWISTS["general"])
    xi = random_phase_point(spec, rng)
    _, gx, gp = separated_gradients(spec, xi)
    pi = build_bivector(spec).matrix(xi)
    for _, obs in casimir_observables(spec):
        field = pi @ obs.gradient(xi)
        assert np.max(np.abs(gx @ field)) < 1e-9
        assert np.max(np.abs(gp @ field)) < 1e-9


@pytest.mark.parametrize("model,twist,n", [
    (RATIONAL, RATIONAL_TWISTS["special"], 2), (RATIONAL, RATIONAL_TWISTS["general"], 3),
    (RATIONAL, RATIONAL_TWISTS["identity"], 2), (TRIGONOMETRIC, TRIG_TWISTS["special"], 2),
    (TRIGONOMETRIC, TRIG_TWISTS["diagonal"], 3)])
def test_quasi_canonical_brackets(model, twist, n, rng):
    spec = make_spec(model, n, twist)
    for _ in range(5):
        rep = bracket_matrix(spec, random_phase_point(spec, rng))
        assert rep["relative"] < 1e-8


def test_both_conventions_are_quasi_canonical(rng):
    spec = make_spec(RATIONAL, 2, RATIONAL_TWISTS["general"])
    xi = random_phase_point(spec, rng, convention=STANDARD)
    for conv in (NONSTANDARD, STANDARD):
        rep = bracket_matrix(spec, xi, conv)
        assert rep["relative"] < 1e-8
        sp = rep["separated"]
        assert rep["matrix"][0, 2] == pytest.approx(sp.p[0], rel=1e-8)


@pytest.mark.parametrize("model,n", [(RATIONAL, 3), (TRIGONOMETRIC, 2)])
def test_separating_algebra(model, n, rng):
    twist = RATIONAL_TWISTS["generic"] if model == RATIONAL else TRIG_TWISTS["diagonal"]
    spec = make_spec(model, n, twist)
    for _ in range(5):
        xi = rng.complex_vector(spec.dim)
        u = _away(rng, spec)
        v = _away(rng, spec, (u,))
        rep = check_separating_algebra(spec, xi, u, v)
        assert rep["max_relative"] < 1e-9


def test_trig_ab_relation_explicit_form(rng):
    spec = make_spec(TRIGONOMETRIC, 2, TRIG_TWISTS["special"])
    xi = rng.complex_vector(spec.dim)
    u = _away(rng, spec)
    v = _away(rng, spec, (u,))
    Lu, Gu = lax_value_and_gradient(spec, xi, u)
    Lv, Gv = lax_value_and_gradient(spec, xi, v)
    ab = Gu[0, 0] @ build_bivector(spec).matrix(xi) @ Gv[1, 0]
    Au, Bu, Av, Bv = Lu[0, 0], Lu[1, 0], Lv[0, 0], Lv[1, 0]
    lead = -0.5 * (u + v) / (u - v) * Au * Bv
    scale = abs(Au * Bv) + abs(Av * Bu)
    assert abs(ab - (lead + u / (u - v) * Bu * Av)) < 1e-10 * scale
    # the variant with v/(u-v) A(v)B(u) does not hold
    assert abs(ab - (lead + v / (u - v) * Av * Bu)) > 1e-3 * scale


def test_separating_algebra_near_diagonal(rng):
    spec = make_spec(RATIONAL, 2, RATIONAL_TWISTS["special"])
    xi = rng.complex_vector(spec.dim)
    u = _away(rng, spec)
    rep = check_separating_algebra(spec, xi, u, u + 1e-4)
    assert max(rep["residuals"].values()) < 1e-4 * rep["scale"]


def test_separation_needs_degenerate_twist(rng):
    deg = make_spec(RATIONAL, 2, RATIONAL_TWISTS["general"])
    ident = make_spec(RATIONAL, 2, RATIONAL_TWISTS["identity"])
    for _ in range(10):
        assert separation_residual(deg, random_phase_point(deg, rng))["max_relative"] < 1e-9
    fails = sum(separation_residual(ident, random_phase_point(ident, rng))["max_relative"] > 1e-3
                for _ in range(10))
    assert fails == 10


def test_trig_separation_is_a_root_of_I(rng):
    spec = make_spec(TRIGONOMETRIC, 2, TRIG_TWISTS["special"])
    assert separation_residual(spec, random_phase_point(spec, rng))["max_relative"] < 1e-10


def test_standard_pairs_satisfy_I_equals_p(rng):
    spec = make_spec(RATIONAL, 2, RATIONAL_TWISTS["general"])
    xi = random_phase_point(spec, rng, convention=STANDARD)
    sp = separate(spec, xi, STANDARD)
    I = integrals(spec, xi).I
    for x, p in zip(sp.x, sp.p):
        assert I(x) == pytest.approx(p, rel=1e-9)
    assert separation_residual(spec, xi, STANDARD)["max_relative"] < 1e-9


@pytest.mark.parametrize("twist", ["special", "general", "generic", "identity"])
def test_trace_identity(twist, rng):
    spec = make_spec(RATIONAL, 3, RATIONAL_TWISTS[twist])
    assert identity_Iu_residual(spec, rng.complex_vector(spec.dim))["relative"] < 1e-10


@pytest.mark.parametrize("model,n", [(RATIONAL, 2), (RATIONAL, 3), (TRIGONOMETRIC, 2),
                                     (TRIGONOMETRIC, 3)])
def test_roots_are_actions_in_special_case(model, n, rng):
    spec = make_spec(model, n, RATIONAL_TWISTS["special"])
    B, _ = integral_root_brackets(spec, random_phase_point(spec, rng))
    assert np.max(np.abs(B)) < 1e-9


def test_roots_move_in_general_case(rng):
    spec = make_spec(RATIONAL, 2, RATIONAL_TWISTS["general"])
    B, _ = integral_root_brackets(spec, random_phase_point(spec, rng))
    assert np.max(np.abs(B)) > 1e-3

