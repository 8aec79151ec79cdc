"""Boundary charts, accessible singularities, local indices, the alpha-test and blow-ups.

Exact work uses the :mod:`exactalg` kernel. Two steps lean on sympy: solving the
boundary equations at a generic rational specialization (Groebner basis) and the
closed-form solutions of the alpha-test reduced system, which involve ``log``.
"""
from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import sympy as sp

from .charts import ChartMap, check_polynomial, chart_inverse, flow_derivative
from .exactalg import MultiPoly, RationalExpr, cancel_factors, expr_equal, substitute
from .model import (
    STATE_VARS,
    HamiltonianSystem,
    V,
    VectorField,
    build_system,
    eliminate,
    generic_atoms,
    impose_relation,
)


class NonAlgebraicLocus(ValueError):
    """The boundary zero set is not a union of lines with identifiable centres."""


class NotTriangularizable(ValueError):
    pass


class ResidualSingularity(ArithmeticError):
    pass


# centre (X, Z), parameter of the second blow-up surface, chart produced by the blow-ups
BOUNDARY_LOCI: Dict[str, Tuple[object, object, str, str]] = {
    "C0": ("t", "s", "a0", "r0"),
    "C1": ("eta", "eta", "a1", "r1"),
    "C2": (1, 1, "a3", "r3"),
    "C3": (0, 0, "a4", "r4"),
}


def _c(x) -> RationalExpr:
    return V(x) if isinstance(x, str) else RationalExpr.coerce(x)


# ---------------------------------------------------------------------------
# boundary charts


@dataclass(frozen=True)
class BoundaryChart:
    name: str
    forward: Dict[str, RationalExpr]
    inverse: Dict[str, RationalExpr]
    boundary: str  # local equation of the boundary divisor
    fibre: str  # free coordinate along the singular lines

    @property
    def variables(self) -> Tuple[str, ...]:
        return tuple(self.forward)

    @property
    def interior(self) -> Tuple[str, ...]:
        return tuple(v for v in self.forward if v != self.boundary)


def boundary_chart(name: str) -> BoundaryChart:
    q1, p1, q2, p2 = (V(n) for n in STATE_VARS)
    if name == "X3":
        X, Y, Z, W = (V(f"{c}3") for c in "XYZW")
        return BoundaryChart(
            "X3",
            {"X3": q1, "Y3": 1 / p1, "Z3": q2, "W3": p2 / p1},
            {"q1": X, "p1": 1 / Y, "q2": Z, "p2": W / Y},
            "Y3",
            "W3",
        )
    if name == "X4":
        X, Y, Z, W = (V(f"{c}4") for c in "XYZW")
        return BoundaryChart(
            "X4",
            {"X4": q1, "Y4": p1 / p2, "Z4": q2, "W4": 1 / p2},
            {"q1": X, "p1": Y / W, "q2": Z, "p2": 1 / W},
            "W4",
            "Y4",
        )
    raise KeyError(f"unknown boundary chart {name!r}; expected X3 or X4")


def pushforward_field(sys: HamiltonianSystem, forward: Mapping[str, RationalExpr], inverse: Mapping[str, RationalExpr]) -> VectorField:
    """Eq.-(1) flows written in new coordinates ``forward(q, p)``."""
    comps = {}
    for u, f in forward.items():
        comps[u] = tuple(
            substitute(flow_derivative(f, h, time), inverse) for h, time in zip(sys.hamiltonians, sys.times)
        )
    return VectorField(comps)  # type: ignore[arg-type]


def to_boundary_chart(sys: HamiltonianSystem, chart: BoundaryChart) -> VectorField:
    return pushforward_field(sys, chart.forward, chart.inverse)


def rescaled_components(fld: VectorField, chart: BoundaryChart, which: int) -> Dict[str, RationalExpr]:
    """``g_i``: the boundary component itself, every other one multiplied by the boundary variable."""
    x1 = V(chart.boundary)
    out = {}
    for v in chart.variables:
        comp = fld.components[v][which]
        out[v] = comp if v == chart.boundary else comp * x1
    return out


def boundary_equations(fld: VectorField, chart: BoundaryChart) -> List[MultiPoly]:
    """Numerators of ``g_i`` on the boundary, both flows; their common zeros are the accessible singularities."""
    eqs: List[MultiPoly] = []
    for which in (0, 1):
        for v, g in rescaled_components(fld, chart, which).items():
            if v == chart.boundary:
                continue
            if g.den.variables() & set(chart.variables):
                check = check_polynomial(g, chart.variables)
                if not check.polynomial:
                    raise NonAlgebraicLocus(f"component {v} has a pole of order > 1 on the boundary")
                g = check.chart_hamiltonian
            g0 = substitute(g, {chart.boundary: 0})
            if not g0.is_zero():
                eqs.append(g0.num)
    return eqs


@dataclass
class SingularLocus:
    name: str
    chart: str
    fixed: Dict[str, RationalExpr]  # coordinate -> value on the locus
    boundary: str
    free: Tuple[str, ...] = ()

    def equations(self) -> Dict[str, str]:
        out = {v: e.to_text() for v, e in self.fixed.items()}
        out[self.boundary] = "0"
        return dict(sorted(out.items()))

    def as_dict(self) -> dict:
        return {"name": self.name, "chart": self.chart, "equations": self.equations(), "free": list(self.free)}


def to_sympy(expr, names: Optional[Mapping[str, sp.Symbol]] = None):
    """Convert a MultiPoly or RationalExpr to a sympy expression."""
    names = dict(names or {})

    def sym(v):
        if v not in names:
            names[v] = sp.Symbol(v)
        return names[v]

    def poly(p: MultiPoly):
        total = sp.Integer(0)
        for exps, c in p.exponent_items():
            term = sp.Rational(c.numerator, c.denominator) if isinstance(c, Fraction) else sp.Integer(c)
            for v, e in exps.items():
                term *= sym(v) ** e
            total += term
        return total

    if isinstance(expr, MultiPoly):
        return poly(expr)
    expr = RationalExpr.coerce(expr)
    return poly(expr.num) / poly(expr.den)


def _generic_point(names: Sequence[str], rng: random.Random) -> Dict[str, Fraction]:
    return {v: Fraction(rng.randint(1, 10**4), rng.randint(1, 10**4)) + rng.randint(2, 9) for v in sorted(names)}


_AFFINE_BASIS = ("t", "s", "eta")


def _identify(value: Fraction, point: Mapping[str, Fraction]) -> List[RationalExpr]:
    """Affine forms ``c0 + c1 t + c2 s + c3 eta`` (small integer c) that take ``value`` at ``point``."""
    hits = []
    coeffs = range(-2, 3)
    for cs in itertools.product(coeffs, repeat=len(_AFFINE_BASIS)):
        rest = value - sum(c * point[b] for c, b in zip(cs, _AFFINE_BASIS))
        if rest.denominator == 1 and abs(rest) <= 2:
            e = RationalExpr.coerce(int(rest))
            for c, b in zip(cs, _AFFINE_BASIS):
                if c:
                    e = e + c * V(b)
            hits.append(e)
    return hits


def _solve_specialized(eqs: Sequence[MultiPoly], point: Mapping[str, Fraction], unknowns: Sequence[str]) -> List[Dict[str, Fraction]]:
    syms = {v: sp.Symbol(v) for v in unknowns}
    polys = []
    for e in eqs:
        spec = e.partial_evaluate({k: v for k, v in point.items() if k in e.variables()})
        if not spec.is_zero():
            polys.append(sp.expand(to_sympy(spec, syms)))
    if not polys:
        return [{}]
    gens = [syms[v] for v in unknowns]
    basis = sp.groebner(polys, *gens, order="lex")
    if list(basis.exprs) == [1]:
        return []
    sols = sp.solve(list(basis.exprs), gens, dict=True)
    out = []
    for sol in sols:
        row = {}
        for s_, val in sol.items():
            if not val.is_Rational:
                raise NonAlgebraicLocus(f"component {s_} = {val} is not a point value")
            row[str(s_)] = Fraction(int(val.p), int(val.q))
        out.append(row)
    return out


def _locus_holds(eqs: Sequence[MultiPoly], fixed: Mapping[str, RationalExpr]) -> bool:
    return all(substitute(RationalExpr(e), fixed).is_zero() for e in eqs)


def _name_locus(fixed: Mapping[str, RationalExpr], chart: BoundaryChart, used: set) -> str:
    x, z = chart.variables[0], chart.variables[2]
    if set(fixed) == {x, z}:
        for name, (cx, cz, _, _) in BOUNDARY_LOCI.items():
            if expr_equal(fixed[x], _c(cx)) and expr_equal(fixed[z], _c(cz)):
                return name
    k = 0
    while f"L{k}" in used:
        k += 1
    return f"L{k}"


def find_accessible_singularities(
    fld: VectorField, chart: BoundaryChart, seed: int = 0, confirmations: int = 2
) -> List[SingularLocus]:
    """Common zeros of the rescaled components of both flows on the boundary.

    The zero set is computed at a generic rational specialization of the
    coefficients, every component is lifted to an affine form in (t, s, eta) and
    verified exactly; further specializations confirm nothing was missed.
    """
    eqs = boundary_equations(fld, chart)
    unknowns = chart.interior
    params = sorted(set().union(*(e.variables() for e in eqs)) - set(unknowns)) if eqs else []
    rng = random.Random(seed)
    point = _generic_point(params, rng)
    loci: List[SingularLocus] = []
    used: set = set()
    for sol in _solve_specialized(eqs, point, unknowns):
        fixed = {}
        for v in unknowns:
            if v not in sol:
                continue
            good = [c for c in _identify(sol[v], point)]
            if not good:
                raise NonAlgebraicLocus(f"cannot identify {v} = {sol[v]} at the test point")
            fixed[v] = good
        choices = [dict(zip(fixed, combo)) for combo in itertools.product(*fixed.values())]
        valid = [c for c in choices if _locus_holds(eqs, c)]
        if len(valid) != 1:
            raise NonAlgebraicLocus(f"ambiguous or unverifiable component {sol}")
        name = _name_locus(valid[0], chart, used)
        used.add(name)
        free = tuple(v for v in unknowns if v not in valid[0])
        loci.append(SingularLocus(name, chart.name, valid[0], chart.boundary, free))
    for _ in range(confirmations - 1):
        other = _generic_point(params, rng)
        got = {tuple(sorted(s.items())) for s in _solve_specialized(eqs, other, unknowns)}
        want = {
            tuple(sorted((v, Fraction(e.evaluate(other))) for v, e in loc.fixed.items())) for loc in loci
        }
        if got != want:
            raise NonAlgebraicLocus("zero set changes shape between generic specializations")
    return sorted(loci, key=lambda loc: loc.name)


# ---------------------------------------------------------------------------
# local index


def _as_constant(e: RationalExpr) -> Optional[Fraction]:
    e = RationalExpr.coerce(e)
    if e.num.is_zero():
        return Fraction(0)
    try:
        q = e.num.exact_div(e.den)
    except Exception:
        return None
    return Fraction(q.constant_value()) if q.is_constant() else None


def _lower_triangular_orders(matrix: Mapping[str, Mapping[str, RationalExpr]], order: Sequence[str]) -> List[Tuple[str, ...]]:
    found = []
    for perm in itertools.permutations(order):
        if all(matrix[perm[i]][perm[j]].is_zero() for i in range(len(perm)) for j in range(i + 1, len(perm))):
            found.append(perm)
    return found


@dataclass
class LocalIndexReport:
    locus: str
    chart: str
    point: Dict[str, RationalExpr]
    matrix: Dict[str, Dict[str, RationalExpr]]
    order: Tuple[str, ...]
    diagonal: Tuple[RationalExpr, ...]
    index: Tuple[Optional[Fraction], ...]
    triangular_order: Optional[Tuple[str, ...]]
    eigenvalues: Optional[list] = None

    @property
    def triangularizable(self) -> bool:
        return self.triangular_order is not None

    @property
    def ratios(self) -> Optional[Tuple[Fraction, ...]]:
        if any(i is None for i in self.index) or not self.index[0]:
            return None
        return tuple(i / self.index[0] for i in self.index)  # type: ignore[operator]

    @property
    def integral(self) -> Optional[bool]:
        r = self.ratios
        return None if r is None else all(x.denominator == 1 for x in r)

    @property
    def triangular_index(self) -> Optional[Tuple[Fraction, ...]]:
        if self.triangular_order is None or any(i is None for i in self.index):
            return None
        pos = {v: k for k, v in enumerate(self.order)}
        return tuple(self.index[pos[v]] for v in self.triangular_order)  # type: ignore[misc]

    @property
    def triangular_ratios(self) -> Optional[Tuple[Fraction, ...]]:
        ti = self.triangular_index
        if ti is None or not ti[0]:
            return None
        return tuple(x / ti[0] for x in ti)

    def entry(self, row: str, col: str) -> RationalExpr:
        return self.matrix[row][col]

    def as_dict(self) -> dict:
        def num(x):
            if x is None:
                return None
            return int(x) if x.denominator == 1 else str(x)

        out = {
            "locus": self.locus,
            "chart": self.chart,
            "point": {k: v.to_text() for k, v in sorted(self.point.items())},
            "order": list(self.order),
            "matrix": [[self.matrix[r][c].to_text() for c in self.order] for r in self.order],
            "diagonal": [d.to_text() for d in self.diagonal],
            "index": [num(i) for i in self.index],
            "ratios": None if self.ratios is None else [num(r) for r in self.ratios],
            "integral": self.integral,
            "triangular_order": None if self.triangular_order is None else list(self.triangular_order),
        }
        if self.triangular_order is not None:
            out["triangular_index"] = [num(i) for i in self.triangular_index or ()]
            out["triangular_ratios"] = [num(r) for r in self.triangular_ratios or ()]
        if self.eigenvalues is not None:
            out["eigenvalues"] = [str(e) for e in self.eigenvalues]
        return out


def local_index_at(
    fld: VectorField,
    locus: SingularLocus,
    chart: BoundaryChart,
    time: str = "t",
    fibre_value=0,
) -> LocalIndexReport:
    """Linear part of the rescaled flow at a point of ``locus`` after recentring.

    The index is the diagonal divided by the boundary row's entry, which removes
    the overall unit factor of the rescaling; ``index`` is listed in chart order.
    """
    which = 0 if time == "t" else 1
    x1 = V(chart.boundary)
    # the reference shape carries 1/x1 in front of every row, boundary row included
    comps = {v: fld.components[v][which] * x1 for v in chart.variables}
    for v, c in locus.fixed.items():
        shift = c.diff(time)
        if not shift.is_zero():
            comps[v] = comps[v] - x1 * shift
    point = {v: RationalExpr.coerce(0) for v in chart.variables}
    point.update(locus.fixed)
    if chart.fibre not in locus.fixed:
        point[chart.fibre] = RationalExpr.coerce(fibre_value)
    order = chart.variables
    atoms = generic_atoms()
    matrix = {r: {c: cancel_factors(substitute(comps[r].diff(c), point), atoms) for c in order} for r in order}
    diagonal = tuple(matrix[v][v] for v in order)
    unit = matrix[chart.boundary][chart.boundary]
    index = tuple(_as_constant(d / unit) if not unit.is_zero() else None for d in diagonal)
    tri = _lower_triangular_orders(matrix, order)
    preferred = [p for p in tri if p[0] == chart.boundary]
    tri_order = (preferred or tri or [None])[0]
    eig = None
    if tri_order is None:
        m = sp.Matrix([[to_sympy(matrix[r][c]) for c in order] for r in order])
        eig = list(m.eigenvals())
    return LocalIndexReport(locus.name, chart.name, point, matrix, order, diagonal, index, tri_order, eig)


def step0_reference_entries(report: LocalIndexReport, relation_index: int = 0) -> Dict[str, bool]:
    """Check the known entries 2, -a0 and a5/(t - s) of the linear part at C0."""
    x, y, _, w = report.order
    rel = eliminate(relation_index)
    a0 = substitute(V("a0"), rel)
    return {
        "2": expr_equal(report.entry(x, x), 2),
        "-a0": expr_equal(substitute(report.entry(x, y), rel), -a0),
        "a5/(t-s)": expr_equal(report.entry(w, y), V("a5") / (V("t") - V("s"))),
    }


# ---------------------------------------------------------------------------
# alpha-test


@dataclass
class ReducedSystem:
    matrix: List[List[sp.Expr]]
    T: sp.Symbol
    constants: Tuple[sp.Symbol, ...]
    solutions: List[sp.Expr]
    branches: List[str]
    single_valued: Optional[bool]

    def residuals(self) -> List[sp.Expr]:
        """``dX_k/dT - (row_k . X) / X_1``, simplified; all zero for a correct solution."""
        n = len(self.solutions)
        out = []
        for k in range(n):
            rhs = sum(self.matrix[k][j] * self.solutions[j] for j in range(k + 1)) / self.solutions[0]
            out.append(sp.simplify(sp.diff(self.solutions[k], self.T) - rhs))
        return out


def _integrate_terms(terms: Dict[Tuple[sp.Expr, int], sp.Expr], shift: sp.Expr) -> Tuple[Dict[Tuple[sp.Expr, int], sp.Expr], bool]:
    """Antiderivative in u of ``sum c u^(m + shift) log(u)^n``; flags whether a new log appeared."""
    out: Dict[Tuple[sp.Expr, int], sp.Expr] = {}
    new_log = False

    def add(m, n, c):
        key = (sp.simplify(m), n)
        out[key] = sp.simplify(out.get(key, 0) + c)

    stack = [(sp.simplify(m + shift), n, c) for (m, n), c in terms.items()]
    while stack:
        p, n, c = stack.pop()
        if c == 0:
            continue
        if sp.simplify(p + 1) == 0:
            add(0, n + 1, c / (n + 1))
            new_log = True
        else:
            add(p + 1, n, c / (p + 1))
            if n:
                stack.append((p, n - 1, -n * c / (p + 1)))
    return {k: v for k, v in out.items() if v != 0}, new_log


def alpha_test_solve(matrix: Sequence[Sequence[object]], t0: Optional[Mapping[str, object]] = None) -> ReducedSystem:
    """Closed-form solution of ``dX/dT = (1/X_1) A X`` for a constant lower-triangular ``A``.

    Entries may be numbers, sympy expressions or exact RationalExpr (then ``t0``
    gives the values substituted for their free symbols).
    """
    n = len(matrix)
    A = [[_entry(matrix[i][j], t0) for j in range(n)] for i in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            if sp.simplify(A[i][j]) != 0:
                raise NotTriangularizable("reduced system matrix must be lower triangular")
    T = sp.Symbol("T")
    C = sp.symbols(f"C1:{n + 1}")
    u = sp.Symbol("u", positive=True)
    a11 = A[0][0]
    # X_k as {(exponent of u, power of log u): coefficient}
    sols: List[Dict[Tuple[sp.Expr, int], sp.Expr]] = [{(sp.Integer(1), 0): sp.Integer(1)}]
    branches = ["linear"]
    for k in range(1, n):
        r = sp.simplify(A[k][k] / a11)
        forcing: Dict[Tuple[sp.Expr, int], sp.Expr] = {}
        for j in range(k):
            if A[k][j] == 0:
                continue
            for key, c in sols[j].items():
                forcing[key] = forcing.get(key, 0) + A[k][j] * c / a11
        integral, logged = _integrate_terms(forcing, -r - 1)
        xk: Dict[Tuple[sp.Expr, int], sp.Expr] = {(r, 0): C[k]}
        for (m, p), c in integral.items():
            key = (sp.simplify(m + r), p)
            xk[key] = sp.simplify(xk.get(key, 0) + c)
        sols.append({key: c for key, c in xk.items() if c != 0})
        branches.append("log" if sp.simplify(r - 1) == 0 else "power")
    U = a11 * T + C[0]
    exprs = [sum(c * U**m * sp.log(U) ** p for (m, p), c in s.items()) for s in sols]
    return ReducedSystem(A, T, C, exprs, branches, _single_valued(sols))


def _entry(x, t0):
    if isinstance(x, RationalExpr):
        if t0:
            x = x.partial_evaluate({k: Fraction(v) for k, v in t0.items()})
        return sp.simplify(to_sympy(x))
    e = sp.sympify(x)
    if t0:
        e = e.subs({sp.Symbol(k): sp.sympify(v) for k, v in t0.items()})
    return e


def _single_valued(sols) -> Optional[bool]:
    verdict: Optional[bool] = True
    for s in sols:
        for (m, p), c in s.items():
            if p > 0:
                if c.is_number:
                    return False
                verdict = None
            elif m.is_integer is False:
                return False
            elif m.is_integer is None:
                verdict = None
    return verdict


# ---------------------------------------------------------------------------
# blow-up pipeline


@dataclass
class BlowUpStep:
    label: str
    forward: Dict[str, RationalExpr]  # new slot -> expression in the previous slots
    inverse: Dict[str, RationalExpr]  # previous slot -> expression in the new slots


def blowup_steps(locus: str) -> List[BlowUpStep]:
    cx, cz, alpha, _ = BOUNDARY_LOCI[locus]
    X, Y, Z, W = (V(f"{c}3") for c in "XYZW")
    a = V(alpha)
    return [
        BlowUpStep("step0", {"X3": X - _c(cx), "Z3": Z - _c(cz)}, {"X3": X + _c(cx), "Z3": Z + _c(cz)}),
        BlowUpStep("step1", {"X3": X / Y, "Z3": Z / Y}, {"X3": X * Y, "Z3": Z * Y}),
        BlowUpStep("step2", {"X3": (X + Z * W - a) / Y}, {"X3": X * Y - Z * W + a}),
        BlowUpStep("flip", {"X3": -X}, {"X3": -X}),
    ]


def compose_steps(steps: Sequence[BlowUpStep]) -> Tuple[Dict[str, RationalExpr], Dict[str, RationalExpr]]:
    """Forward map from (q, p) and its inverse after running ``steps`` on the X3-chart."""
    chart = boundary_chart("X3")
    fwd = dict(chart.forward)
    inv = dict(chart.inverse)
    for st in steps:
        fwd = {v: substitute(st.forward.get(v, V(v)), fwd) for v in fwd}
        inv = {v: substitute(e, st.inverse) for v, e in inv.items()}
    return fwd, inv


def step2_center(sys: Optional[HamiltonianSystem] = None, locus: str = "C0") -> RationalExpr:
    """Solve the boundary equations after Step 1 for X; the Step-2 blow-up centre."""
    sys = impose_relation(sys or build_system(), 0)
    steps = blowup_steps(locus)[:2]
    fwd, inv = compose_steps(steps)
    chart = boundary_chart("X3")
    fld = pushforward_field(sys, fwd, inv)
    eqs = boundary_equations(fld, chart)
    for e in sorted(eqs, key=len):
        if e.degree("X3") == 1:
            coeffs = e.coefficients_in("X3")
            lead = RationalExpr(coeffs[1])
            rest = RationalExpr(coeffs.get(0, MultiPoly()))
            centre = -rest / lead
            if all(substitute(RationalExpr(g), {"X3": centre}).is_zero() for g in eqs):
                return cancel_factors(centre, generic_atoms())
    raise NonAlgebraicLocus("no linear Step-2 centre found")


@dataclass
class BlowUpResult:
    locus: str
    target: str
    chart: ChartMap
    matches_chart: bool
    residual_free: bool
    step2_center: Optional[RationalExpr] = None
    details: Dict[str, bool] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.matches_chart and self.residual_free

    def as_dict(self, emit_chart: bool = False) -> dict:
        out = {
            "locus": self.locus,
            "target": self.target,
            "matches_chart": self.matches_chart,
            "residual_free": self.residual_free,
        }
        if self.step2_center is not None:
            out["step2_center"] = self.step2_center.to_text()
        if emit_chart:
            out["chart"] = {k: v.to_text() for k, v in self.chart.forward.items()}
        return out


def blow_up_pipeline(
    sys: Optional[HamiltonianSystem] = None, locus: str = "C0", strict: bool = True, with_center: bool = True
) -> BlowUpResult:
    """Steps 0-2 plus the sign flip over ``locus``; compare with the canonical chart.

    The pushed field must be polynomial in the new coordinates (no pole on the
    new boundary, hence no accessible singularity over the centre).
    """
    if locus not in BOUNDARY_LOCI:
        raise KeyError(f"unknown locus {locus!r}; expected one of {', '.join(BOUNDARY_LOCI)}")
    base = sys or build_system()
    target = BOUNDARY_LOCI[locus][3]
    j = target[1]
    fwd, inv = compose_steps(blowup_steps(locus))
    rename = {f"{c}3": V(f"{c.lower()}{j}") for c in "XYZW"}
    chart = ChartMap(
        target,
        {f"{c.lower()}{j}": fwd[f"{c}3"] for c in "XYZW"},
        {v: substitute(e, rename) for v, e in inv.items()},
        f"y{j}",
    )
    reference = chart_inverse(target)
    matches = all(expr_equal(chart.forward[k], reference.forward[k]) for k in reference.forward)
    imposed = impose_relation(base, 0)
    rel_chart = chart.with_relation(0)
    fld = pushforward_field(imposed, rel_chart.forward, rel_chart.inverse)
    details = {}
    for v, pair in fld.components.items():
        for time, comp in zip(imposed.times, pair):
            details[f"d{v}/d{time}"] = check_polynomial(comp, rel_chart.chart_vars).polynomial
    residual_free = all(details.values())
    if strict and not residual_free:
        bad = sorted(k for k, ok in details.items() if not ok)
        raise ResidualSingularity(f"pole remains over {locus}: {', '.join(bad)}")
    centre = step2_center(base, locus) if with_center else None
    return BlowUpResult(locus, target, chart, matches, residual_free, centre, details)
