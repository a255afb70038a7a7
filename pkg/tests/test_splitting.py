import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from vpsplit import (
    DegenerateField,
    Edfvf,
    MultiIndex,
    NotDiagonal,
    NotDivergenceFree,
    RkOptions,
    Shear,
    ShearField,
    SingularStep,
    SparsePolynomial,
    VectorField,
    build_scheme,
    decompose_diagonal,
    diag_offdiag_split,
    edfvf_flow,
    evaluate,
    integrals_basis,
    jacobian_det,
    rk45,
    shear_flow,
    step,
)
from vpsplit.problems import sample_points
from vpsplit.splitting import C_ZERO_TOL

from test_polyfield import truncated_example


def exponent_vector(e: Edfvf, x, b):
    return float(np.prod(np.asarray(x, dtype=float) ** np.asarray(b, dtype=float)))


def corrected_example():
    """The truncated example with the x1**4 coefficient that closes its divergence."""
    comps = list(truncated_example())
    terms = dict(comps[0].items())
    terms[MultiIndex([4, 0, 0])] = 0.25
    comps[0] = SparsePolynomial(3, terms)
    return VectorField(comps)


# decomposition


def test_quadratic_stokes_single_edfvf(quad):
    diag, _ = diag_offdiag_split(quad)
    (e,) = decompose_diagonal(diag)
    assert e.j == MultiIndex([0, 1, 0])
    assert e.a.tolist() == [-8.0, 3.0, 2.0]
    assert e.c == 3.0
    np.testing.assert_allclose(e.r, [-8 / 3, 1.0, 2 / 3], rtol=1e-15)


def test_laurent_two_edfvfs(laurent):
    diag, off = diag_offdiag_split(laurent)
    assert off.is_zero()
    e1, e2 = decompose_diagonal(diag)
    assert (e1.j, e1.a.tolist(), e1.c) == (MultiIndex([-3, 2]), [3.0, 2.0], -5.0)
    assert (e2.j, e2.a.tolist(), e2.c) == (MultiIndex([2, -3]), [2.0, 3.0], -5.0)


def test_printed_truncated_example_is_not_divergence_free():
    diag, _ = diag_offdiag_split(truncated_example())
    with pytest.raises(NotDivergenceFree) as info:
        decompose_diagonal(diag)
    assert info.value.j == MultiIndex([3, 0, 0])
    assert info.value.residual == pytest.approx(3.0)


def test_l_field_of_corrected_example():
    diag, _ = diag_offdiag_split(corrected_example())
    by_j = {e.j: e for e in decompose_diagonal(diag)}
    assert set(by_j) == {MultiIndex(j) for j in [(0, 0, 1), (0, 2, 1), (2, 0, 1), (3, 0, 0)]}
    e = by_j[MultiIndex([2, 0, 1])]
    np.testing.assert_allclose(e.a, [-1 / 6, 1 / 4, 1 / 8], rtol=1e-15)
    assert e.c == pytest.approx(-5 / 24, rel=1e-15)
    np.testing.assert_allclose(e.r, [4 / 5, -6 / 5, -3 / 5], rtol=1e-14)


def test_l_field_displayed_solution():
    e = Edfvf([2, 0, 1], [-1 / 6, 1 / 4, 1 / 8])
    x0 = np.array([0.7, -1.2, 0.4])
    h = 0.3
    base = 1 + (5 / 24) * x0[0] ** 2 * x0[2] * h
    expected = x0 * base ** np.array([-4 / 5, 6 / 5, 3 / 5])
    np.testing.assert_allclose(edfvf_flow(e, x0, h), expected, rtol=1e-14)


def test_decompose_consumes_every_term(cubic, laurent, quad):
    for f in (quad, cubic, laurent, corrected_example()):
        diag, _ = diag_offdiag_split(f)
        total = VectorField.zero(f.dim)
        for e in decompose_diagonal(diag):
            total = total + e.as_field()
        assert total == diag


def test_decompose_rejects_offdiagonal_terms(quad):
    with pytest.raises(NotDiagonal):
        decompose_diagonal(quad)


def test_laurent_exclusion_freezes_axis():
    # x1' = x2**2 / x1 is fed into j = (-1, 2); its x1 coefficient must be dropped
    e = Edfvf([-1, 2, 0], [5.0, 0.0, 0.0], check=False)
    assert e.a.tolist() == [0.0, 0.0, 0.0]
    e = Edfvf([-1, 1, 0], [7.0, 1.0, -2.0])
    assert e.a.tolist() == [0.0, 1.0, -2.0]
    x0 = [0.8, 0.5, 1.3]
    y = edfvf_flow(e, x0, 0.2)
    assert y[0] == x0[0]


def test_c_is_exact_dot_product():
    e = Edfvf([Fraction(1, 3), Fraction(1, 3), 0], [0.1, 0.2, 0.0], check=False)
    assert e.c == float(Fraction(0.1) / 3 + Fraction(0.2) / 3)


def test_zero_field_scheme_is_identity():
    s = build_scheme(VectorField.zero(3), 2)
    assert len(s) == 0
    x0 = np.array([0.3, -0.1, 2.0])
    assert np.array_equal(step(s, x0, 0.7), x0)


def test_scheme_flow_counts(schemes):
    assert len(schemes["quad_stokes", 1]) == 4
    assert sum(isinstance(f, Edfvf) for f in schemes["quad_stokes", 1].flows) == 1
    laurent2 = schemes["laurent", 2]
    assert len(laurent2) == 2
    assert len(laurent2.sequence(0.1)) == 4
    cubic = schemes["cubic_stokes", 2]
    js = [f.j for f in cubic.flows if isinstance(f, Edfvf)]
    assert js == sorted(js) and len(js) == 4
    assert [f.axis for f in cubic.flows if isinstance(f, Shear)] == [0, 1, 2]


def test_palindrome_sequence(schemes):
    seq = schemes["quad_stokes", 2].sequence(0.2)
    flows = [f for f, _ in seq]
    assert flows == flows[::-1]
    assert all(h == 0.1 for _, h in seq)


def test_decomposition_completeness(schemes, fields):
    for name, f in fields.items():
        s = schemes[name, 2]
        for x in sample_points(name, 200, seed=1):
            np.testing.assert_allclose(s.generator(x), f(x), rtol=1e-12, atol=1e-12 * np.abs(f(x)).max())


# exact flows


def test_quadratic_edfvf_against_two_oracles(quad):
    (e,) = decompose_diagonal(diag_offdiag_split(quad)[0])
    x0 = [0.1, 0.2, 0.3]
    y = edfvf_flow(e, x0, 0.01)
    ref = rk45(e.as_field(), x0, 0.01, RkOptions.tight(1e-12)).final
    assert np.max(np.abs(y - ref)) <= 1e-9
    sol = solve_ivp(lambda t, x: e.vector(x), (0, 0.01), x0, method="DOP853", rtol=1e-13, atol=1e-14)
    assert np.max(np.abs(y - sol.y[:, -1])) <= 1e-12


def test_zero_coefficients_give_identity():
    e = Edfvf([1, 2], [0.0, 0.0])
    assert edfvf_flow(e, [0.3, 0.4], 10.0).tolist() == [0.3, 0.4]
    with pytest.raises(DegenerateField):
        integrals_basis(e)


def test_shear_examples(quad):
    _, off = diag_offdiag_split(quad)
    g = ShearField(off)
    x0 = np.array([0.2, -0.4, 0.7])
    y = shear_flow(g, 1, x0, 0.05)
    assert y[0] == x0[0] and y[2] == x0[2]
    assert y[1] == pytest.approx(x0[1] + 0.05 * (11 * 0.04 + 0.49 - 3), rel=1e-15)
    drift = Shear(0, SparsePolynomial.variable(2, 1))
    assert shear_flow(drift, None, [0.0, 1.0], 0.5).tolist() == [0.5, 1.0]
    zero = Shear(2, SparsePolynomial(3))
    assert shear_flow(zero, None, x0, 3.0).tolist() == x0.tolist()


def test_shear_rejects_own_axis():
    with pytest.raises(ValueError):
        Shear(0, SparsePolynomial.variable(2, 0))


def test_semigroup(schemes, rng):
    for key in [("quad_stokes", 1), ("cubic_stokes", 1), ("laurent", 1)]:
        for e in (f for f in schemes[key].flows if isinstance(f, Edfvf)):
            for x in sample_points(key[0], 10, seed=2):
                tb = e.blowup_time(x)
                h1, h2 = rng.uniform(0, min(0.2, 0.25 * tb), size=2)
                direct = edfvf_flow(e, x, h1 + h2)
                chained = edfvf_flow(e, edfvf_flow(e, x, h1), h2)
                np.testing.assert_allclose(chained, direct, rtol=1e-12, atol=1e-300)


def test_monomial_evolution_law(schemes):
    for key in [("quad_stokes", 1), ("cubic_stokes", 1), ("laurent", 1)]:
        for e in (f for f in schemes[key].flows if isinstance(f, Edfvf)):
            mono = SparsePolynomial.monomial(1.0, e.j)
            for x in sample_points(key[0], 20, seed=3):
                h = min(0.3, 0.5 * e.blowup_time(x))
                m0 = evaluate(mono, x)
                m = evaluate(mono, edfvf_flow(e, x, h))
                assert m == pytest.approx(m0 / (1 - e.c * m0 * h), rel=1e-12, abs=1e-300)


@pytest.mark.parametrize("scale", [0.2, 0.5, 0.9, 1.5, 4.0])
def test_continuity_across_c_branch(scale):
    # c = eps puts this field on either side of the branch threshold
    threshold = C_ZERO_TOL * (2.0 * 2.0 + 1.0)
    eps = scale * threshold
    e = Edfvf([1, 1], [1.0, -1.0 + eps], check=False)
    assert e.exponential == (abs(e.c) <= threshold)
    x0 = [0.9, 1.1]
    h = 0.5
    m0 = x0[0] * x0[1]
    expected = [x0[0] * math.exp(e.a[0] * m0 * h), x0[1] * math.exp(e.a[1] * m0 * h)]
    np.testing.assert_allclose(edfvf_flow(e, x0, h), expected, rtol=1e-9)


def test_exponential_branch_exact():
    # j . a = 0 with a . (j + 1) = 0 needs sum(a) = 0
    e = Edfvf([1, 0, 0], [0.0, 1.0, -1.0])
    assert e.exponential and e.c == 0.0
    x0 = np.array([0.5, 2.0, 1.5])
    ref = rk45(e.as_field(), x0, 0.7, RkOptions.tight(1e-12)).final
    np.testing.assert_allclose(edfvf_flow(e, x0, 0.7), ref, rtol=1e-9)


def test_off_diagonal_equivalence(rng):
    for _ in range(50):
        j = rng.integers(-3, 4, size=3)
        a = rng.normal(size=3)
        x = rng.uniform(0.2, 2.0, size=3)
        for i in range(3):
            ei = np.eye(3)[i]
            lhs = a[i] * np.prod(x ** (j + 1)) * np.prod(x ** (-1 + ei))
            rhs = a[i] * x[i] * np.prod(x ** j.astype(float))
            assert lhs == pytest.approx(rhs, rel=1e-13)


# first integrals


def test_integrals_of_figure_example():
    e = Edfvf([1, 1, 1], [-5 / 3, 4 / 3, 1 / 3])
    b1, b2 = integrals_basis(e)
    np.testing.assert_array_equal(b1, [2.0, 2.0, 2.0])
    cross = np.cross(e.a, b1)
    np.testing.assert_allclose(np.cross(b2, cross), 0.0, atol=1e-13)
    x0 = np.array([0.4, 0.7, 1.1])
    y = edfvf_flow(e, x0, 0.3)
    for b in (b1, b2, cross):
        assert exponent_vector(e, y, b) == pytest.approx(exponent_vector(e, x0, b), rel=1e-10)


def test_two_dimensional_has_one_integral(laurent):
    for e in decompose_diagonal(laurent):
        (b,) = integrals_basis(e)
        np.testing.assert_array_equal(b, e.j.as_floats() + 1)


def divergence_free_a(rng, j):
    v = np.asarray(j, dtype=float) + 1
    if np.count_nonzero(v) < 2:
        return None
    a = rng.normal(size=len(j))
    a[v == 0] = 0.0
    return a - a.dot(v) / v.dot(v) * v


def test_random_4d_basis(rng):
    for _ in range(20):
        j = rng.integers(-2, 4, size=4)
        a = divergence_free_a(rng, j)
        if a is None:
            continue
        e = Edfvf(j.tolist(), a)
        basis = integrals_basis(e)
        assert len(basis) == 3
        for b in basis:
            assert abs(e.a.dot(b)) <= 1e-12 * np.linalg.norm(e.a) * np.linalg.norm(b)
        assert np.linalg.matrix_rank(np.array(basis)) == 3


def test_integrals_conserved_by_builtin_flows(schemes):
    for key in [("quad_stokes", 1), ("cubic_stokes", 1), ("laurent", 1)]:
        for e in (f for f in schemes[key].flows if isinstance(f, Edfvf)):
            basis = integrals_basis(e)
            for x in np.abs(sample_points(key[0], 20, seed=4)) + 0.05:
                y = edfvf_flow(e, x, min(0.2, 0.5 * e.blowup_time(x)))
                for b in basis:
                    assert exponent_vector(e, y, b) == pytest.approx(exponent_vector(e, x, b), rel=1e-10)


# singular steps


@st.composite
def edfvf_cases(draw):
    n = draw(st.integers(2, 3))
    j = draw(st.lists(st.integers(-3, 3), min_size=n, max_size=n))
    seed = draw(st.integers(0, 2**32 - 1))
    rng = np.random.default_rng(seed)
    a = divergence_free_a(rng, j)
    assume(a is not None)
    x = rng.uniform(0.2, 1.5, size=n) * rng.choice([-1.0, 1.0], size=n)
    return Edfvf(j, a), x


@settings(max_examples=100, deadline=None)
@given(edfvf_cases())
def test_singular_step_boundary(case):
    e, x = case
    assume(not e.exponential)
    mono = SparsePolynomial.monomial(1.0, e.j)
    cm = e.c * evaluate(mono, x)
    if cm > 0:
        t_star = 1.0 / cm
        assert e.blowup_time(x) == t_star
        with pytest.raises(SingularStep) as info:
            edfvf_flow(e, x, t_star * (1 + 1e-12))
        assert info.value.t_star == pytest.approx(t_star, rel=1e-15)
        try:
            edfvf_flow(e, x, t_star * (1 - 1e-9))
        except OverflowError:
            pass  # the exact solution is just too large for a float
    else:
        assert e.blowup_time(x) == math.inf
        assert np.all(np.isfinite(edfvf_flow(e, x, 1e3)))


def test_singular_step_carries_j(schemes):
    s = schemes["quad_stokes", 2]
    with pytest.raises(SingularStep) as info:
        step(s, [0.0, 1.0, 0.0], 1.0)
    assert info.value.j == MultiIndex([0, 1, 0])
    assert info.value.t_star == pytest.approx(1 / 3)


def test_substep_recovers_from_singular_step(schemes):
    s = schemes["quad_stokes", 2]
    x0 = [0.4291789843785656, -1.0687836535443471, 0.5658001811981808]
    h = 0.34453211325206196
    with pytest.raises(SingularStep):
        step(s, x0, h)
    y = step(s, x0, h, substep=True)
    assert np.all(np.isfinite(y))
    assert abs(jacobian_det(lambda z, hh: step(s, z, hh, substep=True), x0, h) - 1) <= 1e-6


def test_substep_is_noop_when_guard_holds(schemes):
    s = schemes["quad_stokes", 2]
    x0 = [0.0, 0.0, 0.96]
    assert step(s, x0, 0.01, substep=True).tolist() == step(s, x0, 0.01).tolist()


# compositions


def test_zero_step_is_identity(schemes):
    x0 = [0.1, -0.2, 0.3]
    assert step(schemes["cubic_stokes", 2], x0, 0.0).tolist() == x0


def test_order2_self_adjoint(schemes):
    for (name, order), s in schemes.items():
        if order != 2:
            continue
        for x in sample_points(name, 20, seed=5):
            if s.step_ratio(x, 0.02) > 0.5:
                continue
            back = step(s, step(s, x, 0.01), -0.01)
            np.testing.assert_allclose(back, x, rtol=1e-10, atol=1e-10)


def test_volume_preserved_quad_example(schemes):
    s = schemes["quad_stokes", 2]
    x0 = [0.0, 0.0, 0.96]
    y = step(s, x0, 0.01)
    assert np.all(np.isfinite(y))
    assert abs(jacobian_det(s.step, x0, 0.01, 1e-5) - 1) <= 1e-6


def _errors(scheme, field, x0, T, hs):
    ref = rk45(field, x0, T, RkOptions.tight(1e-12), record=False).final
    errs = []
    for h in hs:
        x = list(x0)
        n = round(T / h)
        for _ in range(n):
            x = scheme.step_list(x, h)
        errs.append(np.linalg.norm(np.array(x) - ref))
    return np.array(errs)


def test_laurent_split_is_exact(schemes, laurent):
    # the two pieces commute, so every composition reproduces the flow
    x0 = [-0.5689, 0.0437]
    hs = [0.01, 0.005, 0.0025]
    e1, e2 = schemes["laurent", 1].flows
    x = np.array([0.8, -1.3])
    f1, f2 = e1.as_field(), e2.as_field()
    lie = np.zeros(2)
    for i in range(2):
        for k in range(2):
            lie[i] += f1[k](x) * f2[i].derivative(k)(x) - f2[k](x) * f1[i].derivative(k)(x)
    assert np.max(np.abs(lie)) <= 1e-12 * np.max(np.abs(f1(x)) * np.abs(f2(x))) + 1e-12
    for order, power in ((1, 1), (2, 2)):
        errs = _errors(schemes["laurent", order], laurent, x0, 1.0, hs)
        assert np.all(errs <= np.array(hs) ** power + 1e-8)
        assert errs.max() <= 1e-8
