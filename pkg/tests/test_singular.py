from fractions import Fraction

import pytest
import sympy as sp

from garnier.charts import check_polynomial
from garnier.exactalg import RationalExpr, evaluate, expr_equal, is_zero_expr, substitute
from garnier.model import STATE_VARS, V, VectorField, build_system, eliminate, impose_relation
from garnier.singular import (
    BOUNDARY_LOCI,
    NotTriangularizable,
    alpha_test_solve,
    blowup_steps,
    boundary_chart,
    boundary_equations,
    compose_steps,
    find_accessible_singularities,
    local_index_at,
    pushforward_field,
    step0_reference_entries,
    step2_center,
    to_boundary_chart,
)
from oracles import EXPECTED_LOCI as EXPECTED, expr_to_sympy


# ---------------------------------------------------------------------------
# boundary charts


@pytest.mark.parametrize("name", ["X3", "X4"])
def test_boundary_chart_round_trip(name):
    ch = boundary_chart(name)
    for u, f in ch.forward.items():
        assert expr_equal(substitute(f, ch.inverse), V(u))
    for v, g in ch.inverse.items():
        assert expr_equal(substitute(g, ch.forward), V(v))


def test_boundary_field_by_chain_rule(imposed, boundary_fields):
    """dY3/dt = -(dp1/dt)/p1^2 and dW3/dt from the quotient rule, checked at a rational point with sympy."""
    ch, fld = boundary_fields["X3"]
    q1, p1, q2, p2, t = sp.symbols("q1 p1 q2 p2 t")
    h = expr_to_sympy(imposed.h1)
    dp1 = -sp.diff(h, q1)
    dp2 = -sp.diff(h, q2)
    want = {"Y3": -dp1 / p1**2, "W3": (dp2 * p1 - p2 * dp1) / p1**2}
    pt = {"q1": Fraction(2, 3), "p1": Fraction(5, 2), "q2": Fraction(-3, 7), "p2": Fraction(1, 3), "t": Fraction(9, 4),
          "s": Fraction(-2, 5), "eta": Fraction(3), "a1": Fraction(1, 5), "a2": Fraction(2, 9), "a3": Fraction(1, 4),
          "a4": Fraction(3, 8), "a5": Fraction(1, 6)}
    sub = {sp.Symbol(k): sp.Rational(v.numerator, v.denominator) for k, v in pt.items()}
    chart_pt = {u: evaluate(f, pt) for u, f in ch.forward.items()}
    for u, expr in want.items():
        got = evaluate(fld.dt(u), {**pt, **chart_pt})
        assert sp.Rational(str(got)) == expr.subs(sub)


def test_rescaled_field_has_simple_pole_on_boundary(boundary_fields):
    ch, fld = boundary_fields["X3"]
    assert boundary_equations(fld, ch)
    for v in ch.variables:
        for comp in fld.components[v]:
            scaled = comp if v == ch.boundary else comp * V(ch.boundary)
            assert check_polynomial(scaled, ch.variables).polynomial


# ---------------------------------------------------------------------------
# accessible singularities


@pytest.mark.parametrize("name", ["X3", "X4"])
def test_exactly_the_four_loci(singular_loci, name):
    got = {loc.name: {k: v.to_text() for k, v in loc.fixed.items()} for loc in singular_loci[name]}
    assert got == EXPECTED[name]


@pytest.mark.parametrize("name", ["X3", "X4"])
def test_loci_solve_the_boundary_equations(boundary_fields, singular_loci, name):
    ch, fld = boundary_fields[name]
    eqs = boundary_equations(fld, ch)
    for loc in singular_loci[name]:
        for e in eqs:
            assert is_zero_expr(substitute(RationalExpr(e), loc.fixed))


def test_fibre_is_free(singular_loci):
    assert all(loc.free == ("W3",) for loc in singular_loci["X3"])
    assert all(loc.free == ("Y4",) for loc in singular_loci["X4"])


def test_nearby_points_are_not_singular(boundary_fields):
    ch, fld = boundary_fields["X3"]
    eqs = boundary_equations(fld, ch)
    off = {"X3": V("t") + 1, "Z3": V("s")}
    assert any(not is_zero_expr(substitute(RationalExpr(e), off)) for e in eqs)


def test_decoupled_system_has_different_loci():
    dec = impose_relation(build_system(coupling=False), 0)
    ch = boundary_chart("X3")
    loci = find_accessible_singularities(to_boundary_chart(dec, ch), ch)
    assert sorted(loc.fixed["X3"].to_text() for loc in loci) == ["0", "1", "eta", "t"]
    assert all(loc.free == ("Z3",) and loc.fixed["W3"].is_zero() for loc in loci)
    assert not any(loc.name in BOUNDARY_LOCI for loc in loci)


def test_search_is_seed_independent(boundary_fields):
    ch, fld = boundary_fields["X3"]
    names = [[loc.name for loc in find_accessible_singularities(fld, ch, seed=s)] for s in (1, 7)]
    assert names[0] == names[1] == ["C0", "C1", "C2", "C3"]


# ---------------------------------------------------------------------------
# local index


@pytest.mark.parametrize("locus", ["C0", "C1", "C2", "C3"])
def test_local_index(boundary_fields, singular_loci, locus):
    ch, fld = boundary_fields["X3"]
    loc = next(x for x in singular_loci["X3"] if x.name == locus)
    rep = local_index_at(fld, loc, ch)
    assert rep.index == (2, 1, 1, 0)
    assert rep.triangularizable
    assert rep.ratios == (1, Fraction(1, 2), Fraction(1, 2), 0)
    assert rep.integral is False


def test_step0_reference_entries(boundary_fields, singular_loci):
    ch, fld = boundary_fields["X3"]
    loc = next(x for x in singular_loci["X3"] if x.name == "C0")
    rep = local_index_at(fld, loc, ch)
    assert step0_reference_entries(rep) == {"2": True, "-a0": True, "a5/(t-s)": True}
    # the displayed matrix at P, entry by entry
    a0 = eliminate(0)["a0"]
    assert expr_equal(rep.entry("X3", "X3"), 2)
    assert expr_equal(rep.entry("X3", "Y3"), -a0)
    assert expr_equal(rep.entry("Y3", "Y3"), 1)
    assert expr_equal(rep.entry("Z3", "Z3"), 1)
    assert expr_equal(rep.entry("W3", "Y3"), V("a5") / (V("t") - V("s")))
    assert rep.entry("W3", "W3").is_zero()


def test_mirror_index_on_the_other_chart(boundary_fields, singular_loci):
    ch, fld = boundary_fields["X4"]
    for loc in singular_loci["X4"]:
        rep = local_index_at(fld, loc, ch, time="s")
        assert rep.index == (1, 0, 2, 1)  # (X4, Y4, Z4, W4): the swap image of (2, 1, 1, 0)


def test_index_independent_of_fibre_point(boundary_fields, singular_loci):
    ch, fld = boundary_fields["X3"]
    loc = singular_loci["X3"][0]
    assert local_index_at(fld, loc, ch, fibre_value=Fraction(3, 7)).index == (2, 1, 1, 0)


@pytest.mark.parametrize("c", [3, Fraction(-2, 5)])
def test_scaling_the_field_keeps_the_ratios(boundary_fields, singular_loci, c):
    ch, fld = boundary_fields["X3"]
    scaled = VectorField({v: (a * c, b * c) for v, (a, b) in fld.components.items()})
    loc = singular_loci["X3"][0]
    base = local_index_at(fld, loc, ch)
    rep = local_index_at(scaled, loc, ch)
    assert rep.ratios == base.ratios
    assert expr_equal(rep.diagonal[0], base.diagonal[0] * c)


# ---------------------------------------------------------------------------
# alpha-test


def test_power_law_closed_form():
    a11, a21, a22 = sp.symbols("a11 a21 a22", nonzero=True)
    red = alpha_test_solve([[a11, 0], [a21, a22]])
    T = red.T
    C1, C2 = red.constants
    u = a11 * T + C1
    expected = C2 * u ** (a22 / a11) + a21 * u / (a11 - a22)
    assert sp.simplify(red.solutions[0] - u) == 0
    assert sp.simplify(red.solutions[1] - expected) == 0
    assert red.branches == ["linear", "power"]


def test_logarithmic_closed_form():
    a11, a21 = sp.symbols("a11 a21", nonzero=True)
    red = alpha_test_solve([[a11, 0], [a21, a11]])
    T = red.T
    C1, C2 = red.constants
    u = a11 * T + C1
    expected = C2 * u + a21 * u * sp.log(u) / a11
    assert sp.simplify(red.solutions[1] - expected) == 0
    assert red.branches[1] == "log"


@pytest.mark.parametrize(
    "matrix,verdict",
    [
        ([[2, 0], [5, 4]], True),  # ratio 2
        ([[2, 0], [5, 1]], False),  # ratio 1/2
        ([[2, 0], [0, -2]], True),  # ratio -1
        ([[1, 0], [0, 1]], True),  # equal diagonal, no coupling: log absent
        ([[1, 0], [3, 1]], False),  # equal diagonal with coupling: log present
        ([[3, 0], [1, 3]], False),
    ],
)
def test_single_valuedness(matrix, verdict):
    assert alpha_test_solve(matrix).single_valued is verdict


@pytest.mark.parametrize("matrix", [[[2, 0], [5, 4]], [[1, 0], [3, 1]], [[2, 0, 0], [1, 4, 0], [0, 1, 6]]])
def test_solutions_satisfy_reduced_system(matrix):
    red = alpha_test_solve(matrix)
    assert all(r == 0 for r in red.residuals())


def test_alpha_test_on_the_local_index_matrix(boundary_fields, singular_loci):
    ch, fld = boundary_fields["X3"]
    rep = local_index_at(fld, singular_loci["X3"][0], ch)
    order = rep.triangular_order
    m = [[rep.entry(r, c) for c in order] for r in order]
    pt = {"t": Fraction(7, 3), "s": Fraction(11, 5), "eta": 2, "a1": Fraction(1, 7), "a2": Fraction(2, 9),
          "a3": Fraction(3, 11), "a4": Fraction(1, 13), "a5": Fraction(5, 17)}
    red = alpha_test_solve(m, pt)
    assert all(r == 0 for r in red.residuals())
    # triangular order (Y3, X3, Z3, W3) has ratios (1, 2, 1, 0) and the equal-diagonal row is uncoupled
    assert rep.triangular_ratios == (1, 2, 1, 0)
    assert red.branches == ["linear", "power", "log", "power"]
    assert red.single_valued is True


def test_non_triangular_rejected():
    with pytest.raises(NotTriangularizable):
        alpha_test_solve([[1, 1], [0, 1]])


# ---------------------------------------------------------------------------
# blow-ups


@pytest.mark.parametrize("locus", ["C0", "C1", "C2", "C3"])
def test_blow_up_reproduces_chart(blow_ups, locus):
    res = blow_ups(locus)
    assert res.target == BOUNDARY_LOCI[locus][3]
    assert res.matches_chart
    assert res.residual_free, sorted(k for k, ok in res.details.items() if not ok)


@pytest.mark.parametrize("locus,param", [("C0", None), ("C1", "a1"), ("C2", "a3"), ("C3", "a4")])
def test_step2_centre(blow_ups, locus, param):
    a = eliminate(0)["a0"] if param is None else V(param)
    assert expr_equal(blow_ups(locus).step2_center, -V("Z3") * V("W3") + a)


def test_step1_alone_leaves_a_pole(imposed):
    fwd, inv = compose_steps(blowup_steps("C0")[:2])
    fld = pushforward_field(imposed, fwd, inv)
    ch = boundary_chart("X3")
    verdicts = [check_polynomial(c, ch.variables).polynomial for pair in fld.components.values() for c in pair]
    assert not all(verdicts)


def test_composed_inverse_is_the_r0_inverse():
    _, inv = compose_steps(blowup_steps("C0"))
    X, Y, Z, W = (V(f"{c}3") for c in "XYZW")
    assert expr_equal(inv["q1"], V("t") + Y * (V("a0") - Z * W - X * Y))
    assert expr_equal(inv["q2"], V("s") + Z * Y)
    assert expr_equal(inv["p1"], 1 / Y)
    assert expr_equal(inv["p2"], W / Y)


def test_step2_centre_solves_the_step1_equations(imposed):
    centre = step2_center(locus="C0")
    fwd, inv = compose_steps(blowup_steps("C0")[:2])
    fld = pushforward_field(imposed, fwd, inv)
    for e in boundary_equations(fld, boundary_chart("X3")):
        assert is_zero_expr(substitute(RationalExpr(e), {"X3": centre}))


def test_unknown_locus():
    from garnier.singular import blow_up_pipeline

    with pytest.raises(KeyError):
        blow_up_pipeline(locus="C9")


def test_state_vars_untouched_by_boundary_chart():
    assert set(boundary_chart("X3").inverse) == set(STATE_VARS)
