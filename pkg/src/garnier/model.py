"""The coupled Hamiltonian pair, its vector field and parameter relation."""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Mapping, Optional, Sequence, Tuple, Union

from .exactalg import (
    PARAMS,
    ExprLike,
    MultiPoly,
    RationalExpr,
    is_zero_expr,
    substitute,
)

Scalar = Union[int, Fraction]
STATE_VARS = ("q1", "p1", "q2", "p2")
POSITIONS = ("q1", "q2")
MOMENTA = ("p1", "p2")
TIME_VARS = ("t", "s")

#: weights of the parameter relation a0 + a1 + 2 a2 + a3 + a4 + 2 a5 = 1
RELATION_WEIGHTS = (1, 1, 2, 1, 1, 2)


class ParameterRelationViolated(ValueError):
    pass


def V(name: str) -> RationalExpr:
    return RationalExpr.var(name)


def generic_atoms() -> Tuple[MultiPoly, ...]:
    """Linear factors in t, s, eta that typically appear in denominators; used for cancellation."""
    t, s, eta = V("t"), V("s"), V("eta")
    return tuple(e.num for e in (t, s, eta, t - 1, s - 1, eta - 1, t - eta, s - eta, t - s))


def relation_lhs(alpha: Sequence[ExprLike]) -> RationalExpr:
    return sum((RationalExpr.coerce(a) * w for a, w in zip(alpha, RELATION_WEIGHTS)), RationalExpr.coerce(0))


def eliminate(index: int = 0) -> Dict[str, RationalExpr]:
    """Binding that solves the parameter relation for ``a{index}``."""
    w = RELATION_WEIGHTS[index]
    rest = sum(
        (V(PARAMS[i]) * RELATION_WEIGHTS[i] for i in range(6) if i != index),
        RationalExpr.coerce(0),
    )
    return {PARAMS[index]: (1 - rest) / w}


@dataclass(frozen=True)
class ParameterSet:
    """alpha_0..alpha_5 and eta; entries are exact scalars or ``None`` (symbolic)."""

    alpha: Tuple[Optional[Scalar], ...] = (None,) * 6
    eta: Optional[Scalar] = None

    def __post_init__(self):
        if len(self.alpha) != 6:
            raise ValueError("need six alpha entries")
        if all(a is not None for a in self.alpha):
            total = sum(Fraction(a) * w for a, w in zip(self.alpha, RELATION_WEIGHTS))
            if total != 1:
                raise ParameterRelationViolated(
                    f"a0 + a1 + 2 a2 + a3 + a4 + 2 a5 = {total}, expected 1"
                )
        if self.eta is not None and Fraction(self.eta) in (0, 1):
            raise ValueError("eta must avoid 0 and 1")

    @classmethod
    def symbolic(cls) -> "ParameterSet":
        return cls()

    @classmethod
    def numeric(cls, alpha: Sequence[Scalar], eta: Scalar) -> "ParameterSet":
        return cls(tuple(Fraction(a) for a in alpha), Fraction(eta))

    def specialization(self) -> Dict[str, Scalar]:
        out = {PARAMS[i]: a for i, a in enumerate(self.alpha) if a is not None}
        if self.eta is not None:
            out["eta"] = self.eta
        return out


def build_hvi(q: str, p: str, time: str, betas: Sequence[ExprLike]) -> RationalExpr:
    """Sixth Painleve Hamiltonian in ``(q, p, time)`` with slots beta_1..beta_4."""
    Q, P, T, eta = V(q), V(p), V(time), V("eta")
    b1, b2, b3, b4 = (RationalExpr.coerce(b) for b in betas)
    numer = (
        Q * (Q - 1) * (Q - eta) * (Q - T) * P**2
        + (
            b1 * (T - eta) * Q * (Q - 1)
            + 2 * b2 * Q * (Q - 1) * (Q - eta)
            + b3 * (T - 1) * Q * (Q - eta)
            + b4 * T * (Q - 1) * (Q - eta)
        )
        * P
        + b2 * ((b1 + b2) * (T - eta) + b2 * (Q - 1) + b3 * (T - 1) + T * b4) * Q
    )
    return RationalExpr(numer.num, (T * (T - 1) * (T - eta)).num)


#: the involution exchanging the two blocks
PI_SWAP = {"q1": "q2", "p1": "p2", "q2": "q1", "p2": "p1", "t": "s", "s": "t", "a2": "a5", "a5": "a2"}


def swap_blocks(expr: ExprLike) -> RationalExpr:
    return substitute(expr, {k: V(v) for k, v in PI_SWAP.items()})


def _h1_generic(coupling: bool = True) -> RationalExpr:
    q1, p1, q2, p2, t, s, eta = (V(n) for n in ("q1", "p1", "q2", "p2", "t", "s", "eta"))
    a2, a5 = V("a2"), V("a5")
    d_s = t * (t - 1) * (t - s)
    d_eta = t * (t - 1) * (t - eta)
    h = build_hvi("q1", "p1", "t", [V("a1"), a2, V("a3"), V("a4")])
    if not coupling:
        return h
    h = h + a2 * p2 * (
        (-(t - 1) * s * q1 + t * (s - 1) * q2 + (t - s) * q1 * q2) / d_s
        + (q1 - t) * q2 * (q2 - 1) / d_eta
    )
    h = h + a5 * p1 * (
        ((t - s) * q1 * (q1 - 1) + t * (t - 1) * (q1 - q2)) / d_s
        + (q1 - t) * ((t - 1) * q1 + (q1 - t) * q2) / d_eta
    )
    h = h - p1 * p2 * (
        ((t - 1) * (s * q1**2 + t * q2**2) - (t - s) * q2 * (q1**2 + t) - 2 * t * (s - 1) * q1 * q2) / d_s
        - (q1 - t) ** 2 * q2 * (q2 - 1) / d_eta
    )
    h = h + a2 * a5 * (2 * t * q1 - q1 - t * q2 + q1 * q2 - eta * q1) / d_eta
    return h


def _over_common_denominator(h: RationalExpr, den: RationalExpr) -> RationalExpr:
    """Rewrite ``h`` with the given denominator (must be a multiple of ``h.den``)."""
    num = (h.num * den.num).exact_div(h.den)
    return RationalExpr(num, den.num, reduce=False)


@dataclass
class HamiltonianSystem:
    h1: RationalExpr
    h2: RationalExpr
    params: ParameterSet = field(default_factory=ParameterSet)
    positions: Tuple[str, str] = POSITIONS
    momenta: Tuple[str, str] = MOMENTA
    times: Tuple[str, str] = TIME_VARS

    @property
    def hamiltonians(self) -> Tuple[RationalExpr, RationalExpr]:
        return (self.h1, self.h2)

    def specialize(self, bindings: Mapping[str, ExprLike]) -> "HamiltonianSystem":
        return HamiltonianSystem(substitute(self.h1, bindings), substitute(self.h2, bindings), self.params)


def build_system(params: Optional[ParameterSet] = None, coupling: bool = True) -> HamiltonianSystem:
    """H1 transcribed term by term, H2 its block-swapped image.

    Numeric entries of ``params`` are substituted; symbolic ones stay as a0..a5/eta.
    ``coupling=False`` gives two uncoupled sixth Painleve Hamiltonians (contrast runs).
    """
    params = params or ParameterSet.symbolic()
    t, s, eta = V("t"), V("s"), V("eta")
    h1 = _h1_generic(coupling)
    den = t * (t - 1) * (t - eta) * ((t - s) if coupling else 1)
    h1 = _over_common_denominator(h1, den)
    h2 = swap_blocks(h1)
    spec = params.specialization()
    if spec:
        h1 = h1.partial_evaluate(spec)
        h2 = h2.partial_evaluate(spec)
    return HamiltonianSystem(h1, h2, params)


def impose_relation(sys: HamiltonianSystem, index: int = 0) -> HamiltonianSystem:
    return sys.specialize(eliminate(index))


def state_degree(h: RationalExpr) -> int:
    if h.den.variables() & set(STATE_VARS):
        raise ValueError("Hamiltonian is not polynomial in the state variables")
    return h.num.total_degree(STATE_VARS)


@dataclass
class VectorField:
    """``components[v] = (coefficient of dt, coefficient of ds)``."""

    components: Dict[str, Tuple[RationalExpr, RationalExpr]]

    def dt(self, v: str) -> RationalExpr:
        return self.components[v][0]

    def ds(self, v: str) -> RationalExpr:
        return self.components[v][1]


def hamilton_rhs(h: RationalExpr, positions=POSITIONS, momenta=MOMENTA) -> Dict[str, RationalExpr]:
    out = {}
    for q, p in zip(positions, momenta):
        out[q] = h.diff(p)
        out[p] = -h.diff(q)
    return out


def vector_field(sys: HamiltonianSystem) -> VectorField:
    f1 = hamilton_rhs(sys.h1, sys.positions, sys.momenta)
    f2 = hamilton_rhs(sys.h2, sys.positions, sys.momenta)
    return VectorField({v: (f1[v], f2[v]) for v in STATE_VARS})


def poisson_bracket(f: RationalExpr, g: RationalExpr, positions=POSITIONS, momenta=MOMENTA) -> RationalExpr:
    total = RationalExpr.coerce(0)
    for q, p in zip(positions, momenta):
        total = total + f.diff(q) * g.diff(p) - f.diff(p) * g.diff(q)
    return total


def frobenius_residual(sys: HamiltonianSystem, sign: int = 1) -> RationalExpr:
    """``dH1/ds - dH2/dt + sign * {H1, H2}``; zero means the two flows commute."""
    t, s = sys.times
    base = sys.h1.diff(s) - sys.h2.diff(t)
    br = poisson_bracket(sys.h1, sys.h2, sys.positions, sys.momenta)
    return base + br if sign > 0 else base - br


def frobenius_report(sys: HamiltonianSystem) -> Dict[str, object]:
    """Verdicts for both sign conventions plus the two pieces they are built from.

    When the bracket and the time-derivative difference vanish separately, the
    sign cannot be determined from the residual; ``convention`` says so.
    """
    t, s = sys.times
    base_zero = is_zero_expr(sys.h1.diff(s) - sys.h2.diff(t))
    bracket_zero = is_zero_expr(poisson_bracket(sys.h1, sys.h2, sys.positions, sys.momenta))
    plus = is_zero_expr(frobenius_residual(sys, +1))
    minus = is_zero_expr(frobenius_residual(sys, -1))
    if plus and minus:
        convention = "indeterminate"
    elif plus or minus:
        convention = "+" if plus else "-"
    else:
        convention = "none"
    return {
        "plus_bracket_zero": plus,
        "minus_bracket_zero": minus,
        "bracket_zero": bracket_zero,
        "time_derivative_difference_zero": base_zero,
        "convention": convention,
    }
