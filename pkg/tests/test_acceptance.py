"""Acceptance suite: one verdict line per criterion, printed even without ``-s``."""
from fractions import Fraction

import pytest
import sympy as sp

from garnier.backlund import (
    MAP_NAMES,
    backlund_map,
    divisor_table,
    lifted_obstruction,
    param_action_squared_identity,
    preserves_relation,
    relation_holds,
    verify_divisor,
)
from garnier.charts import CHART_NAMES, chart_inverse, verify_symplectic_identity
from garnier.exactalg import expr_equal, is_zero_expr
from garnier.flows import FlowPath, FlowSystem, Leg, PhasePoint, commutativity_check, divisor_drift, integrate_leg
from garnier.model import V, frobenius_report, frobenius_residual
from garnier.singular import BOUNDARY_LOCI, alpha_test_solve, local_index_at, step0_reference_entries
from oracles import EXPECTED_LOCI, alpha_with_zero, scalar_pvi_leg, valid_alpha

T0, S0, ETA = 7 / 3, 11 / 5, 2
RTOL, ATOL = 1e-10, 1e-12
START = PhasePoint(0.3 + 0.2j, 0.4 - 0.1j, 0.5 + 0.1j, -0.2 + 0.3j, T0, S0)
LEGS = [(0.05, 0.05), (0.05j, 0.05), (0.035 + 0.035j, -0.05j), (-0.05, 0.05j), (0.05, -0.035 + 0.035j)]


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {n}: {detail}")
        assert ok, detail

    return emit


def commutativity_residuals():
    fs = FlowSystem.from_params(valid_alpha(), ETA)
    return [commutativity_check(fs, START, dt, ds, rtol=RTOL, atol=ATOL) for dt, ds in LEGS]


def test_criterion_01_holomorphy(holomorphy_reports, report):
    verdicts = {(c, h): getattr(holomorphy_reports[c], f"{h}_polynomial") for c in CHART_NAMES for h in ("h1", "h2")}
    passed = sum(verdicts.values())
    report(1, passed == 12, f"{passed}/12 chart Hamiltonians polynomial")


def test_criterion_02_symplectic(holomorphy_reports, imposed, report):
    ok = {c: holomorphy_reports[c].symplectic is True for c in CHART_NAMES}
    control = verify_symplectic_identity(imposed, chart_inverse("r0").with_relation(0).without_correction())
    report(2, all(ok.values()) and control is False,
           f"{sum(ok.values())}/6 charts symplectic; r0 without correction rejected: {control is False}")


def test_criterion_03_backlund(backlund_verdict, report):
    a0, a1, a2, a3, a4, a5 = (V(f"a{i}") for i in range(6))
    expected = {
        "s1": (a0 + a2, a1 + a2, -a2, a3 + a2, a4 + a2, a5),
        "s2": (a0 + a5, a1 + a5, a2, a3 + a5, a4 + a5, -a5),
        "pi1": (a0, a4, a2, a3, a1, a5),
        "pi2": (a3, a1, a2, a0, a4, a5),
        "pi3": (a1, a0, a2, a3, a4, a5),
        "pi4": (a0, a1, a2, a4, a3, a5),
        "pi5": (a0, a1, a5, a3, a4, a2),
    }
    symmetry = {n: backlund_verdict(n).ok for n in MAP_NAMES}
    actions = {n: all(expr_equal(g, w) for g, w in zip(backlund_map(n).param_action, expected[n])) for n in MAP_NAMES}
    relation = {n: preserves_relation(backlund_map(n)) for n in MAP_NAMES}
    squares = {n: relation_holds(f"{n}^2") and param_action_squared_identity(backlund_map(n))
               for n in ("s1", "s2", "pi1", "pi4", "pi5")}
    conj = relation_holds("pi5*s1*pi5=s2")
    ok = all(symmetry.values()) and all(actions.values()) and all(relation.values()) and all(squares.values()) and conj
    report(3, ok, f"symmetries {sum(symmetry.values())}/7, reference actions {sum(actions.values())}/7, "
                  f"relation kept {sum(relation.values())}/7, squares {sum(squares.values())}/5, pi5 s1 pi5 = s2: {conj}")


def test_criterion_04_divisors(system, report):
    rows = {}
    for div in divisor_table():
        lifted = lifted_obstruction(div, system)
        rows[div.name] = verify_divisor(div, system) and lifted["nonzero"] and lifted["proportional"]
    report(4, len(rows) == 6 and all(rows.values()),
           f"{sum(rows.values())}/6 rows invariant and obstructed by their lifted parameter")


def test_criterion_05_singular_loci(singular_loci, report):
    got = {ch: {loc.name: {k: v.to_text() for k, v in loc.fixed.items()} for loc in loci}
           for ch, loci in singular_loci.items()}
    report(5, got == EXPECTED_LOCI, f"loci X3={sorted(got['X3'])} X4={sorted(got['X4'])}")


def test_criterion_06_local_index(boundary_fields, singular_loci, report):
    ch, fld = boundary_fields["X3"]
    by_name = {loc.name: loc for loc in singular_loci["X3"]}
    indices = {n: tuple(int(x) for x in local_index_at(fld, by_name[n], ch).index) for n in sorted(BOUNDARY_LOCI)}
    entries = step0_reference_entries(local_index_at(fld, by_name["C0"], ch))
    ok = all(ix == (2, 1, 1, 0) for ix in indices.values()) and all(entries.values())
    report(6, ok, f"indices {indices}; reference entries {entries}")


def test_criterion_07_blow_up(blow_ups, report):
    res = {n: blow_ups(n) for n in sorted(BOUNDARY_LOCI)}
    summary = {n: f"{r.target} match={r.matches_chart} residual_free={r.residual_free}" for n, r in res.items()}
    report(7, all(r.ok for r in res.values()) and [r.target for r in res.values()] == ["r0", "r1", "r3", "r4"],
           "; ".join(f"{n}->{s}" for n, s in summary.items()))


def test_criterion_08_alpha_test(report):
    a11, a21, a22 = sp.symbols("a11 a21 a22", nonzero=True)
    power = alpha_test_solve([[a11, 0], [a21, a22]])
    C1, C2 = power.constants
    u = a11 * power.T + C1
    power_ok = sp.simplify(power.solutions[1] - (C2 * u ** (a22 / a11) + a21 * u / (a11 - a22))) == 0
    log = alpha_test_solve([[a11, 0], [a21, a11]])
    C1, C2 = log.constants
    u = a11 * log.T + C1
    log_ok = sp.simplify(log.solutions[1] - (C2 * u + a21 * u * sp.log(u) / a11)) == 0

    # power branch: single-valued exactly for integral a22/a11
    ratios = [Fraction(2), Fraction(-1), Fraction(3), Fraction(1, 2), Fraction(-3, 2), Fraction(5, 3)]
    power_verdicts = all(
        alpha_test_solve([[2, 0], [5, 2 * r]]).single_valued is (r.denominator == 1) for r in ratios
    )
    # log branch: single-valued exactly when the coupling vanishes at t0
    t = sp.Symbol("t")
    log_verdicts = all(
        alpha_test_solve([[3, 0], [t - 2, 3]], {"t": t0}).single_valued is (t0 == 2) for t0 in (2, 5, Fraction(1, 3))
    )
    ok = power_ok and log_ok and power_verdicts and log_verdicts
    report(8, ok, f"power form {power_ok}, log form {log_ok}, integrality verdicts {power_verdicts}, "
                  f"a21(t0)=0 verdicts {log_verdicts}")


def test_criterion_09_numerics(report):
    comm = max(commutativity_residuals())

    path = FlowPath([Leg("t", 0.25j), Leg("s", 0.25)], RTOL, ATOL)
    drift = {}
    for div in divisor_table():
        fs = FlowSystem.from_params(alpha_with_zero(int(div.parameter[1])), ETA)
        loc = {"f2": dict(p1=0), "f5": dict(p2=0), "f0": dict(q1=T0, q2=S0), "f1": dict(q1=ETA, q2=ETA),
               "f3": dict(q1=1, q2=1), "f4": dict(q1=0, q2=0)}[div.name]
        st = dict(q1=START.q1, p1=START.p1, q2=START.q2, p2=START.p2) | loc
        drift[div.name] = divisor_drift(fs, div.polynomials, PhasePoint(**st, t=T0, s=S0), path)

    al = alpha_with_zero(2)
    al[5] = Fraction(0)
    al[0] = 1 - al[1] - al[3] - al[4]
    fs = FlowSystem.from_params(al, ETA)
    pvi = 0.0
    for delta in (0.05, 0.05j, -0.035 + 0.035j):
        start = PhasePoint(START.q1, START.p1, START.q2, 0, T0, S0)
        got = integrate_leg(fs, start, Leg("t", delta), rtol=RTOL, atol=ATOL)
        q, p = scalar_pvi_leg(al, ETA, start.q1, start.p1, T0, delta)
        pvi = max(pvi, abs(got.q1 - q), abs(got.p1 - p))

    worst = max(drift.values())
    ok = comm < 1e-8 and worst < 1e-8 and len(drift) == 6 and pvi < 1e-8
    report(9, ok, f"commutativity {comm:.2e}, max divisor drift {worst:.2e} over 6 rows, decoupled vs scalar {pvi:.2e}")


def test_criterion_10_frobenius(system, report):
    rep = frobenius_report(system)
    plus = is_zero_expr(frobenius_residual(system, +1))
    minus = is_zero_expr(frobenius_residual(system, -1))
    assert (plus, minus) == (rep["plus_bracket_zero"], rep["minus_bracket_zero"])
    if plus != minus:
        report(10, True, f"residual identically zero under the {rep['convention']} convention only")
        return
    # no unique convention: fall back on numerical commutativity and record the discrepancy
    comm = max(commutativity_residuals())
    recorded = rep["convention"] == ("indeterminate" if plus else "none")
    ok = comm < 1e-8 and recorded
    why = ("both sign conventions vanish since the bracket and the cross time derivatives vanish separately"
           if plus else "neither sign convention vanishes")
    report(10, ok, f"fallback: {why}; report convention={rep['convention']!r}; commutativity {comm:.2e}")
