"""The six canonical coordinate systems r0..r5 and the holomorphy checks."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .exactalg import (
    MultiPoly,
    NotDivisible,
    RationalExpr,
    expr_equal,
    substitute,
)
from .model import (
    MOMENTA,
    POSITIONS,
    STATE_VARS,
    HamiltonianSystem,
    V,
    eliminate,
)

CHART_NAMES = ("r0", "r1", "r2", "r3", "r4", "r5")

# (centre of q1, centre of q2, parameter) for the four charts of the same shape
_SHIFTED = {"r0": ("t", "s", "a0"), "r1": ("eta", "eta", "a1"), "r3": (1, 1, "a3"), "r4": (0, 0, "a4")}


def _c(x) -> RationalExpr:
    return V(x) if isinstance(x, str) else RationalExpr.coerce(x)


@dataclass
class ChartMap:
    name: str
    forward: Dict[str, RationalExpr]  # chart variable -> expression in q1, p1, q2, p2
    inverse: Dict[str, RationalExpr]  # q1, p1, q2, p2 -> expression in chart variables
    laurent_var: str
    correction: Tuple[RationalExpr, RationalExpr] = field(
        default_factory=lambda: (RationalExpr.coerce(0), RationalExpr.coerce(0))
    )

    @property
    def chart_vars(self) -> Tuple[str, str, str, str]:
        return tuple(self.forward)  # type: ignore[return-value]

    def with_relation(self, index: int = 0) -> "ChartMap":
        rel = eliminate(index)
        return ChartMap(
            self.name,
            {k: substitute(v, rel) for k, v in self.forward.items()},
            {k: substitute(v, rel) for k, v in self.inverse.items()},
            self.laurent_var,
            self.correction,
        )

    def without_correction(self) -> "ChartMap":
        return ChartMap(self.name, self.forward, self.inverse, self.laurent_var)


def shifted_chart(name: str, c1, c2, alpha: str, j: Optional[int] = None) -> ChartMap:
    """Chart of the r0/r1/r3/r4 shape centred at q1 = c1, q2 = c2."""
    j = int(name[1]) if j is None else j
    x, y, z, w = (f"{c}{j}" for c in "xyzw")
    q1, p1, q2, p2 = (V(n) for n in STATE_VARS)
    c1, c2, a = _c(c1), _c(c2), V(alpha)
    forward = {
        x: -p1 * ((q1 - c1) * p1 + (q2 - c2) * p2 - a),
        y: 1 / p1,
        z: (q2 - c2) * p1,
        w: p2 / p1,
    }
    X, Y, Z, W = V(x), V(y), V(z), V(w)
    inverse = {
        "q1": c1 + Y * (a - Z * W - X * Y),
        "p1": 1 / Y,
        "q2": c2 + Z * Y,
        "p2": W / Y,
    }
    return ChartMap(name, forward, inverse, y)


def chart_inverse(name: str) -> ChartMap:
    if name in _SHIFTED:
        chart = shifted_chart(name, *_SHIFTED[name])
        if name == "r0":
            chart.correction = (V("p1"), V("p2"))
        return chart
    q1, p1, q2, p2 = (V(n) for n in STATE_VARS)
    if name == "r2":
        X, Y = V("x2"), V("y2")
        return ChartMap(
            "r2",
            {"x2": 1 / q1, "y2": -q1 * (q1 * p1 + V("a2")), "z2": q2, "w2": p2},
            {"q1": 1 / X, "p1": X * (-X * Y - V("a2")), "q2": V("z2"), "p2": V("w2")},
            "x2",
        )
    if name == "r5":
        Z, W = V("z5"), V("w5")
        return ChartMap(
            "r5",
            {"x5": q1, "y5": p1, "z5": 1 / q2, "w5": -(q2 * p2 + V("a5")) * q2},
            {"q1": V("x5"), "p1": V("y5"), "q2": 1 / Z, "p2": Z * (-Z * W - V("a5"))},
            "z5",
        )
    raise KeyError(f"unknown chart {name!r}; expected one of {', '.join(CHART_NAMES)}")


def identity_chart() -> ChartMap:
    """No-op chart in the original variables (test fixture)."""
    fwd = {v: V(v) for v in STATE_VARS}
    return ChartMap("id", fwd, dict(fwd), "p1")


def round_trip_ok(chart: ChartMap) -> bool:
    """forward o inverse and inverse o forward are both the identity."""
    for u, f in chart.forward.items():
        if not expr_equal(substitute(f, chart.inverse), V(u)):
            return False
    for v, g in chart.inverse.items():
        if not expr_equal(substitute(g, chart.forward), V(v)):
            return False
    return True


def pushforward_hamiltonians(sys: HamiltonianSystem, chart: ChartMap) -> Tuple[RationalExpr, RationalExpr]:
    c1, c2 = chart.correction
    return (
        substitute(sys.h1 - c1, chart.inverse),
        substitute(sys.h2 - c2, chart.inverse),
    )


@dataclass
class PolynomialityVerdict:
    polynomial: bool
    witness: Optional[str] = None
    chart_hamiltonian: Optional[RationalExpr] = None


def check_polynomial(expr: RationalExpr, chart_vars) -> PolynomialityVerdict:
    """Polynomial in the chart variables with a denominator free of them.

    The denominator is split as ``L**k * D`` with ``L`` the Laurent variable and
    ``D`` free of chart variables; the numerator must be divisible by ``L**k``.
    """
    chart_vars = set(chart_vars)
    den = expr.den
    mono = den.monomial_content()
    stripped = den.divide_monomial(mono)
    bad = stripped.variables() & chart_vars
    if bad:
        return PolynomialityVerdict(False, f"denominator depends on {sorted(bad)}")
    num = expr.num
    for v in sorted(chart_vars):
        k = den.degree(v) if v in den.variables() else 0
        if k:
            try:
                num = num.divide_by_monomial_power(v, k)
            except NotDivisible as exc:
                return PolynomialityVerdict(False, exc.monomial)
            stripped_mono = MultiPoly.var(v, k)
            den = den.exact_div(stripped_mono)
    return PolynomialityVerdict(True, None, RationalExpr(num, den, reduce=False))


@dataclass
class HolomorphyReport:
    chart: str
    h1: PolynomialityVerdict
    h2: PolynomialityVerdict
    symplectic: Optional[bool] = None

    @property
    def h1_polynomial(self) -> bool:
        return self.h1.polynomial

    @property
    def h2_polynomial(self) -> bool:
        return self.h2.polynomial

    @property
    def witness(self) -> Optional[str]:
        return self.h1.witness or self.h2.witness

    def as_dict(self, with_text: bool = False) -> dict:
        out = {
            "chart": self.chart,
            "h1_polynomial": self.h1_polynomial,
            "h2_polynomial": self.h2_polynomial,
            "symplectic": self.symplectic,
        }
        if self.witness:
            out["witness"] = self.witness
        if with_text:
            for key, v in (("h1_chart", self.h1), ("h2_chart", self.h2)):
                if v.chart_hamiltonian is not None:
                    out[key] = v.chart_hamiltonian.to_text()
        return out


def verify_holomorphy(sys: HamiltonianSystem, chart: ChartMap, symplectic: bool = False) -> HolomorphyReport:
    """Push both Hamiltonians into ``chart`` and test polynomiality.

    ``sys`` and ``chart`` must already carry the parameter relation if it is
    to be imposed (see :func:`model.impose_relation`, :meth:`ChartMap.with_relation`).
    """
    k1, k2 = pushforward_hamiltonians(sys, chart)
    report = HolomorphyReport(
        chart.name,
        check_polynomial(k1, chart.chart_vars),
        check_polynomial(k2, chart.chart_vars),
    )
    if symplectic and report.h1_polynomial and report.h2_polynomial:
        report.symplectic = verify_symplectic_identity(sys, chart, (k1, k2))
    return report


def flow_derivative(f: RationalExpr, h: RationalExpr, time: str) -> RationalExpr:
    """Derivative of ``f(q, p, t, s)`` along the Hamiltonian flow of ``h`` in ``time``."""
    total = f.diff(time)
    for q, p in zip(POSITIONS, MOMENTA):
        fq, fp = f.diff(q), f.diff(p)
        if not fq.is_zero():
            total = total + fq * h.diff(p)
        if not fp.is_zero():
            total = total - fp * h.diff(q)
    return total


def canonical_rhs(k: RationalExpr, chart_vars) -> Dict[str, RationalExpr]:
    x, y, z, w = chart_vars
    return {x: k.diff(y), y: -k.diff(x), z: k.diff(w), w: -k.diff(z)}


def verify_symplectic_identity(
    sys: HamiltonianSystem,
    chart: ChartMap,
    chart_hamiltonians: Optional[Tuple[RationalExpr, RationalExpr]] = None,
) -> bool:
    """Vector-field form of the symplectic identity.

    The original flows, pushed through the chart, must be the canonical flows of
    the chart Hamiltonians (which include the chart's correction terms).
    """
    if chart_hamiltonians is None:
        chart_hamiltonians = pushforward_hamiltonians(sys, chart)
    for h, k, time in zip(sys.hamiltonians, chart_hamiltonians, sys.times):
        target = canonical_rhs(k, chart.chart_vars)
        for u, f in chart.forward.items():
            pushed = substitute(flow_derivative(f, h, time), chart.inverse)
            if not expr_equal(pushed, target[u]):
                return False
    return True


def verify_all_charts(sys: HamiltonianSystem, relation_index: Optional[int] = 0, names=CHART_NAMES) -> List[HolomorphyReport]:
    from .model import impose_relation

    if relation_index is not None:
        sys = impose_relation(sys, relation_index)
    out = []
    for name in names:
        chart = chart_inverse(name)
        if relation_index is not None:
            chart = chart.with_relation(relation_index)
        out.append(verify_holomorphy(sys, chart, symplectic=True))
    return out
