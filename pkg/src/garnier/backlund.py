"""Birational symmetries s1, s2, pi1..pi5 and the invariant divisors."""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

from .exactalg import PARAMS, MultiPoly, RationalExpr, cancel_factors, expr_equal, is_zero_expr, substitute
from .model import (
    MOMENTA,
    POSITIONS,
    RELATION_WEIGHTS,
    STATE_VARS,
    HamiltonianSystem,
    V,
    build_system,
    eliminate,
    generic_atoms,
    hamilton_rhs,
    relation_lhs,
)

MAP_NAMES = ("s1", "s2", "pi1", "pi2", "pi3", "pi4", "pi5")
#: every coordinate a transformation acts on
ALL_VARS = STATE_VARS + ("eta", "t", "s") + PARAMS


@dataclass
class BirationalMap:
    """Images of all coordinates; unspecified ones are fixed."""

    name: str
    images: Dict[str, RationalExpr]
    #: denominator factors of the formulas; only used to keep expressions small
    atoms: Tuple[MultiPoly, ...] = ()

    def image(self, v: str) -> RationalExpr:
        return self.images.get(v, V(v))

    @property
    def state_bindings(self) -> Dict[str, RationalExpr]:
        return {v: self.image(v) for v in STATE_VARS}

    @property
    def time_bindings(self) -> Dict[str, RationalExpr]:
        return {v: self.image(v) for v in ("t", "s")}

    @property
    def eta_binding(self) -> RationalExpr:
        return self.image("eta")

    @property
    def param_action(self) -> Tuple[RationalExpr, ...]:
        return tuple(self.image(a) for a in PARAMS)

    def full_bindings(self) -> Dict[str, RationalExpr]:
        return {v: self.image(v) for v in ALL_VARS}

    def then(self, other: "BirationalMap", name: Optional[str] = None) -> "BirationalMap":
        """Apply ``self`` first, then ``other``."""
        first = self.full_bindings()
        atoms = _merge_atoms(self.atoms, other.atoms)
        images = {v: substitute(other.image(v), first, atoms) for v in ALL_VARS}
        return BirationalMap(name or f"{other.name}*{self.name}", images, atoms)

    def is_identity(self) -> bool:
        return all(expr_equal(self.image(v), V(v)) for v in ALL_VARS)

    def equals(self, other: "BirationalMap") -> bool:
        return all(expr_equal(self.image(v), other.image(v)) for v in ALL_VARS)


def _merge_atoms(*groups) -> Tuple[MultiPoly, ...]:
    out: List[MultiPoly] = []
    for g in groups:
        for a in g:
            if a not in out:
                out.append(a)
    return tuple(out)


def _atoms(*exprs) -> Tuple[MultiPoly, ...]:
    return _merge_atoms(generic_atoms(), tuple(RationalExpr.coerce(e).num for e in exprs))


def _alphas(*idx_or_exprs) -> Dict[str, RationalExpr]:
    return {PARAMS[i]: e for i, e in enumerate(idx_or_exprs)}


def backlund_map(name: str) -> BirationalMap:
    q1, p1, q2, p2, eta, t, s = (V(n) for n in ("q1", "p1", "q2", "p2", "eta", "t", "s"))
    a = [V(p) for p in PARAMS]
    if name == "s1":
        return BirationalMap(
            "s1",
            {"q1": q1 + a[2] / p1, **_alphas(a[0] + a[2], a[1] + a[2], -a[2], a[3] + a[2], a[4] + a[2], a[5])},
        )
    if name == "s2":
        return BirationalMap(
            "s2",
            {"q2": q2 + a[5] / p2, **_alphas(a[0] + a[5], a[1] + a[5], a[2], a[3] + a[5], a[4] + a[5], -a[5])},
        )
    if name == "pi1":
        return BirationalMap(
            "pi1",
            {
                "q1": (eta - q1) / (eta - 1),
                "p1": -(eta - 1) * p1,
                "q2": (eta - q2) / (eta - 1),
                "p2": -(eta - 1) * p2,
                "eta": eta / (eta - 1),
                "t": (eta - t) / (eta - 1),
                "s": (eta - s) / (eta - 1),
                **_alphas(a[0], a[4], a[2], a[3], a[1], a[5]),
            },
            _atoms(),
        )
    if name == "pi2":
        m1 = t - q1 + t * q1 - eta * t
        m2 = s - q2 + s * q2 - eta * s
        return BirationalMap(
            "pi2",
            {
                "q1": q1 * (t - eta) / m1,
                "p1": -m1 * (m1 * p1 + a[2] * (t - 1)) / (t * (t - eta) * (eta - 1)),
                "q2": q2 * (s - eta) / m2,
                "p2": -m2 * (m2 * p2 + a[5] * (s - 1)) / (s * (s - eta) * (eta - 1)),
                "t": (eta - t) / (1 - 2 * t + eta * t),
                "s": (eta - s) / (1 - 2 * s + eta * s),
                **_alphas(a[3], a[1], a[2], a[0], a[4], a[5]),
            },
            _atoms(m1, m2, 1 - 2 * t + eta * t, 1 - 2 * s + eta * s),
        )
    if name == "pi3":
        n1 = t - q1 + eta * t * (q1 - 1)
        n2 = s - q2 + eta * s * (q2 - 1)
        return BirationalMap(
            "pi3",
            {
                "q1": (t - 1) * q1 / (t - q1 - eta * t + eta * t * q1),
                "p1": n1 * ((q1 - t) * p1 + a[2] - eta * t * ((q1 - 1) * p1 + a[2])) / (t * (t - 1) * (eta - 1)),
                "q2": (s - 1) * q2 / (s - q2 - eta * s + eta * s * q2),
                "p2": n2 * ((q2 - s) * p2 + a[5] - eta * s * ((q2 - 1) * p2 + a[5])) / (s * (s - 1) * (eta - 1)),
                "eta": 1 / eta,
                "t": eta * (t - 1) / (t - eta - eta * t + eta**2 * t),
                "s": eta * (s - 1) / (s - eta - eta * s + eta**2 * s),
                **_alphas(a[1], a[0], a[2], a[3], a[4], a[5]),
            },
            _atoms(
                t - q1 - eta * t + eta * t * q1,
                s - q2 - eta * s + eta * s * q2,
                t - eta - eta * t + eta**2 * t,
                s - eta - eta * s + eta**2 * s,
            ),
        )
    if name == "pi4":
        return BirationalMap(
            "pi4",
            {
                "q1": 1 - q1,
                "p1": -p1,
                "q2": 1 - q2,
                "p2": -p2,
                "eta": 1 - eta,
                "t": 1 - t,
                "s": 1 - s,
                **_alphas(a[0], a[1], a[2], a[4], a[3], a[5]),
            },
        )
    if name == "pi5":
        return BirationalMap(
            "pi5",
            {"q1": q2, "p1": p2, "q2": q1, "p2": p1, "t": s, "s": t, **_alphas(a[0], a[1], a[5], a[3], a[4], a[2])},
        )
    raise KeyError(f"unknown transformation {name!r}; expected one of {', '.join(MAP_NAMES)}")


def preserves_relation(m: BirationalMap) -> bool:
    """The parameter action maps the affine relation hyperplane to itself."""
    image = relation_lhs(m.param_action)
    return expr_equal(image, relation_lhs([V(p) for p in PARAMS]))


def apply_backlund(m: BirationalMap, sys: Optional[HamiltonianSystem] = None) -> HamiltonianSystem:
    """Target system at transformed parameters and eta, written at the transformed point."""
    sys = sys or build_system()
    b = m.full_bindings()
    return HamiltonianSystem(substitute(sys.h1, b), substitute(sys.h2, b), sys.params)


@dataclass
class BacklundVerdict:
    name: str
    ok: bool
    failures: List[str] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {"map": self.name, "ok": self.ok, "failures": self.failures}


def verify_backlund(m: BirationalMap, sys: Optional[HamiltonianSystem] = None, relation_index: int = 0) -> BacklundVerdict:
    """Chain rule along the original flows versus the target flows at the image point.

    For a time ``tau`` of the original system and an image coordinate ``v~``:
    ``d v~/d tau = sum_sigma d sigma~/d tau * F_sigma(v)(image point)``
    where ``F_t`` (``F_s``) is the right-hand side generated by H1 (H2).
    """
    sys = sys or build_system()
    rel = eliminate(relation_index)
    atoms = m.atoms or generic_atoms()
    b = {v: substitute(e, rel) for v, e in m.full_bindings().items()}
    rhs = {"t": hamilton_rhs(sys.h1), "s": hamilton_rhs(sys.h2)}
    failures = []
    for tau, h in zip(("t", "s"), sys.hamiltonians):
        factors = {sigma: b[sigma].diff(tau) for sigma in ("t", "s")}
        for v in STATE_VARS:
            image = b[v]
            lhs = image.diff(tau)
            for q, p in zip(POSITIONS, MOMENTA):
                gq, gp = image.diff(q), image.diff(p)
                if not gq.is_zero():
                    lhs = lhs + gq * h.diff(p)
                if not gp.is_zero():
                    lhs = lhs - gp * h.diff(q)
            target = RationalExpr.coerce(0)
            for sigma, fac in factors.items():
                if not fac.is_zero():
                    target = target + fac * substitute(rhs[sigma][v], b, atoms)
            if not expr_equal(cancel_factors(lhs, atoms), cancel_factors(target, atoms)):
                failures.append(f"d{v}/d{tau}")
    return BacklundVerdict(m.name, not failures, failures)


def mutate(m: BirationalMap, **images: RationalExpr) -> BirationalMap:
    new = dict(m.images)
    new.update(images)
    return replace(m, name=m.name + "'", images=new)


# ---------------------------------------------------------------------------
# group relations

EXPECTED_RELATIONS = ("s1^2", "s2^2", "pi1^2", "pi4^2", "pi5^2", "s1*s2=s2*s1", "pi5*s1*pi5=s2")
DESCRIPTIVE_RELATIONS = ("pi2^2", "pi3^2", "(pi1*pi4)^3", "(s1*pi1)^2", "(s1*pi2)^2", "(s1*pi3)^2", "(s1*pi4)^2")


def _compose(*names: str) -> BirationalMap:
    """Apply the named maps left to right."""
    m = backlund_map(names[0])
    for n in names[1:]:
        m = m.then(backlund_map(n))
    return m


def _power(names: Sequence[str], k: int) -> BirationalMap:
    return _compose(*(list(names) * k))


def relation_holds(label: str) -> bool:
    if label.endswith("^2") and "(" not in label:
        return _power([label[:-2]], 2).is_identity()
    if label == "s1*s2=s2*s1":
        return _compose("s1", "s2").equals(_compose("s2", "s1"))
    if label == "pi5*s1*pi5=s2":
        return _compose("pi5", "s1", "pi5").equals(backlund_map("s2"))
    if label.startswith("("):
        body, k = label[1:].split(")^")
        return _power(body.split("*"), int(k)).is_identity()
    raise KeyError(label)


def group_relations(descriptive: bool = True) -> Dict[str, Dict[str, object]]:
    report = {label: {"holds": relation_holds(label), "expected": True} for label in EXPECTED_RELATIONS}
    if descriptive:
        for label in DESCRIPTIVE_RELATIONS:
            report[label] = {"holds": relation_holds(label), "expected": None}
    return report


def param_action_squared_identity(m: BirationalMap) -> bool:
    action = dict(zip(PARAMS, m.param_action))
    return all(expr_equal(substitute(e, action), V(p)) for p, e in zip(PARAMS, m.param_action))


# ---------------------------------------------------------------------------
# invariant divisors


@dataclass(frozen=True)
class InvariantDivisor:
    name: str
    codimension: int
    polynomials: Tuple[RationalExpr, ...]
    parameter: str  # the alpha that must vanish

    @property
    def locus(self) -> Dict[str, RationalExpr]:
        """Binding that places a point on the divisor."""
        if self.codimension == 1:
            (f,) = self.polynomials
            (v,) = f.variables() & set(STATE_VARS)
            return {v: RationalExpr.coerce(0)}
        return {v: V(v) - f for v, f in zip(POSITIONS, self.polynomials)}


def divisor_table() -> List[InvariantDivisor]:
    q1, q2 = V("q1"), V("q2")
    rows = [
        InvariantDivisor("f2", 1, (V("p1"),), "a2"),
        InvariantDivisor("f5", 1, (V("p2"),), "a5"),
        InvariantDivisor("f0", 2, (q1 - V("t"), q2 - V("s")), "a0"),
        InvariantDivisor("f1", 2, (q1 - V("eta"), q2 - V("eta")), "a1"),
        InvariantDivisor("f3", 2, (q1 - 1, q2 - 1), "a3"),
        InvariantDivisor("f4", 2, (q1, q2), "a4"),
    ]
    return rows


def divisor(name: str) -> InvariantDivisor:
    for d in divisor_table():
        if d.name == name:
            return d
    raise KeyError(name)


def divisor_residuals(div: InvariantDivisor, sys: Optional[HamiltonianSystem] = None, impose: bool = True) -> List[RationalExpr]:
    """Time derivatives of the defining polynomials along both flows, restricted to the divisor.

    The parameter relation is imposed by eliminating a parameter other than the
    triggering one; with ``impose`` the triggering parameter is also set to zero.
    """
    sys = sys or build_system()
    pivot = 1 if div.parameter == "a0" else 0
    bindings = dict(eliminate(pivot))
    if impose:
        bindings = {k: substitute(v, {div.parameter: 0}) for k, v in bindings.items()}
        bindings[div.parameter] = RationalExpr.coerce(0)
    out = []
    for h, time in zip(sys.hamiltonians, sys.times):
        rhs = hamilton_rhs(h)
        for f in div.polynomials:
            d = f.diff(time)
            for v in STATE_VARS:
                g = f.diff(v)
                if not g.is_zero():
                    d = d + g * rhs[v]
            d = substitute(d, bindings)
            out.append(substitute(d, div.locus))
    return out


def verify_divisor(div: InvariantDivisor, sys: Optional[HamiltonianSystem] = None) -> bool:
    return all(is_zero_expr(r) for r in divisor_residuals(div, sys, impose=True))


def lifted_obstruction(div: InvariantDivisor, sys: Optional[HamiltonianSystem] = None) -> Dict[str, bool]:
    """With the triggering parameter left free: is some residual nonzero, and all divisible by it?"""
    from .exactalg import NotDivisible

    res = divisor_residuals(div, sys, impose=False)
    nonzero = any(not r.is_zero() for r in res)
    proportional = True
    for r in res:
        if r.is_zero():
            continue
        try:
            r.num.divide_by_monomial_power(div.parameter, 1)
        except NotDivisible:
            proportional = False
    return {"nonzero": nonzero, "proportional": proportional}


def relation_weights_ok() -> bool:
    return tuple(RELATION_WEIGHTS) == (1, 1, 2, 1, 1, 2)
