import random
from fractions import Fraction

import pytest
import sympy as sp

from garnier.charts import (
    CHART_NAMES,
    ChartMap,
    canonical_rhs,
    chart_inverse,
    check_polynomial,
    identity_chart,
    pushforward_hamiltonians,
    round_trip_ok,
    verify_holomorphy,
    verify_symplectic_identity,
)
from garnier.exactalg import evaluate, expr_equal, substitute
from garnier.model import STATE_VARS, V, swap_blocks
from oracles import expr_to_sympy


@pytest.mark.parametrize("name", CHART_NAMES)
def test_round_trip(name):
    assert round_trip_ok(chart_inverse(name))


@pytest.mark.parametrize("name", CHART_NAMES)
def test_inverse_has_only_laurent_denominators(name):
    ch = chart_inverse(name)
    for img in ch.inverse.values():
        assert img.den.variables() <= {ch.laurent_var}


def test_r0_inverse_closed_form():
    x, y, z, w = (V(n) for n in ("x0", "y0", "z0", "w0"))
    want = {
        "p1": 1 / y,
        "p2": w / y,
        "q2": V("s") + z * y,
        "q1": V("t") + y * (V("a0") - z * w - x * y),
    }
    ch = chart_inverse("r0")
    for v, e in want.items():
        assert expr_equal(ch.inverse[v], e)


def test_r2_inverse_closed_form():
    x, y = V("x2"), V("y2")
    ch = chart_inverse("r2")
    assert expr_equal(ch.inverse["q1"], 1 / x)
    assert expr_equal(ch.inverse["p1"], x * (-x * y - V("a2")))
    assert expr_equal(ch.inverse["q2"], V("z2"))
    assert expr_equal(ch.inverse["p2"], V("w2"))


@pytest.mark.parametrize("name,shift,param", [("r1", "eta", "a1"), ("r3", 1, "a3"), ("r4", 0, "a4")])
def test_shifted_charts_follow_r0(name, shift, param):
    j = name[1]
    r0 = chart_inverse("r0")
    ch = chart_inverse(name)
    c = V(shift) if isinstance(shift, str) else shift
    rename = {"t": c, "s": c, "a0": V(param)}
    rename.update({f"{k}0": V(f"{k}{j}") for k in "xyzw"})
    for k in "xyzw":
        assert expr_equal(ch.forward[f"{k}{j}"], substitute(r0.forward[f"{k}0"], rename))


def test_r5_is_swap_of_r2():
    r2, r5 = chart_inverse("r2"), chart_inverse("r5")
    pairs = {"x2": "z5", "y2": "w5", "z2": "x5", "w2": "y5"}
    for a, b in pairs.items():
        assert expr_equal(swap_blocks(r2.forward[a]), r5.forward[b])


def test_unknown_chart():
    with pytest.raises(KeyError):
        chart_inverse("r9")


# ---------------------------------------------------------------------------
# holomorphy


@pytest.mark.parametrize("name", CHART_NAMES)
def test_both_chart_hamiltonians_polynomial(holomorphy_reports, name):
    rep = holomorphy_reports[name]
    assert rep.h1_polynomial and rep.h2_polynomial
    for v in (rep.h1, rep.h2):
        k = v.chart_hamiltonian
        assert not k.den.variables() & set(chart_inverse(name).chart_vars)


@pytest.mark.parametrize("name", CHART_NAMES)
def test_symplectic_identity(holomorphy_reports, name):
    assert holomorphy_reports[name].symplectic is True


def test_r0_without_correction_fails(imposed):
    ch = chart_inverse("r0").with_relation(0).without_correction()
    assert verify_symplectic_identity(imposed, ch) is False


def test_r0_needs_the_relation(system):
    rep = verify_holomorphy(system, chart_inverse("r0"))
    assert not (rep.h1_polynomial and rep.h2_polynomial)
    assert rep.witness


def test_perturbed_chart_is_caught(imposed):
    ch = chart_inverse("r2")
    x, y = V("x2"), V("y2")
    bad_inverse = dict(ch.inverse, p1=x * (-x * y - V("a2") - 1))
    bad_forward = dict(ch.forward, y2=-V("q1") * (V("q1") * V("p1") + V("a2") + 1))
    bad = ChartMap("r2'", bad_forward, bad_inverse, "x2")
    assert round_trip_ok(bad)
    rep = verify_holomorphy(imposed, bad)
    assert not (rep.h1_polynomial and rep.h2_polynomial)


def test_identity_chart_is_trivially_polynomial(system):
    rep = verify_holomorphy(system, identity_chart(), symplectic=True)
    assert rep.h1_polynomial and rep.h2_polynomial and rep.symplectic


def test_check_polynomial_examples():
    x, t = V("x0"), V("t")
    assert check_polynomial((x**2 + x * t) / (x * t), ["x0"]).polynomial
    verdict = check_polynomial((x**2 + t) / x, ["x0"])
    assert not verdict.polynomial and verdict.witness == "t"
    assert not check_polynomial(1 / (x + 1), ["x0"]).polynomial


def test_chart_hamiltonian_numeric_crosscheck(imposed):
    """K(chart point) equals H(original point) minus the correction, evaluated independently."""
    rng = random.Random(5)
    for name in ("r0", "r2"):
        ch = chart_inverse(name).with_relation(0)
        k1, k2 = pushforward_hamiltonians(imposed, ch)
        pt = {v: Fraction(rng.randint(2, 30), rng.randint(2, 7)) for v in ("q1", "p1", "q2", "p2", "t", "s", "eta")}
        pt.update({f"a{i}": Fraction(rng.randint(1, 9), 13) for i in range(1, 6)})
        chart_pt = {u: evaluate(f, pt) for u, f in ch.forward.items()}
        for h, k, corr in zip(imposed.hamiltonians, (k1, k2), ch.correction):
            lhs = evaluate(k, {**pt, **chart_pt})
            assert lhs == evaluate(h - corr, pt)


def test_chart_flow_matches_sympy_jacobian(imposed):
    """Push the t-flow through r2 with a sympy Jacobian and compare with the canonical chart flow."""
    ch = chart_inverse("r2").with_relation(0)
    k1, _ = pushforward_hamiltonians(imposed, ch)
    target = canonical_rhs(k1, ch.chart_vars)
    q = [sp.Symbol(v) for v in STATE_VARS]
    h = expr_to_sympy(imposed.h1)
    flow = {q[0]: sp.diff(h, q[1]), q[1]: -sp.diff(h, q[0]), q[2]: sp.diff(h, q[3]), q[3]: -sp.diff(h, q[2])}
    pt = {"q1": Fraction(3, 2), "p1": Fraction(-2, 5), "q2": Fraction(7, 3), "p2": Fraction(1, 4),
          "t": Fraction(9, 2), "s": Fraction(-5, 3), "eta": Fraction(7, 5),
          "a1": Fraction(1, 3), "a2": Fraction(2, 7), "a3": Fraction(1, 5), "a4": Fraction(3, 11), "a5": Fraction(1, 9)}
    sub = {sp.Symbol(k): sp.Rational(v.numerator, v.denominator) for k, v in pt.items()}
    chart_pt = {u: evaluate(f, pt) for u, f in ch.forward.items()}
    for u, f in ch.forward.items():
        fs = expr_to_sympy(f)
        pushed = sp.diff(fs, sp.Symbol("t")) + sum(sp.diff(fs, v) * flow[v] for v in q)
        want = pushed.subs(sub)
        got = evaluate(target[u], {**pt, **chart_pt})
        assert sp.Rational(str(got)) == want
