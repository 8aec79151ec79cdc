"""Numerical integration of the two commuting flows along complex time paths.

Each leg moves one time along a straight segment ``tau(l) = tau0 + l * delta``,
``0 <= l <= 1``, and integrates ``dy/dl = delta * F(y)`` with scipy's DOP853
(order 8, embedded error control) on complex states.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import least_squares

from .exactalg import RationalExpr, compile_numeric
from .model import STATE_VARS, HamiltonianSystem, ParameterSet, build_system, hamilton_rhs

DEFAULT_RTOL = 1e-10
DEFAULT_ATOL = 1e-12
DEFAULT_MARGIN = 0.05
DEFAULT_ETA = 2
DEFAULT_T0 = Fraction(7, 3)
DEFAULT_S0 = Fraction(11, 5)


class SingularityApproach(RuntimeError):
    pass


class StepFailure(RuntimeError):
    pass


class NoPoleDetected(RuntimeError):
    pass


@dataclass(frozen=True)
class PhasePoint:
    q1: complex
    p1: complex
    q2: complex
    p2: complex
    t: complex
    s: complex

    @property
    def state(self) -> np.ndarray:
        return np.array([self.q1, self.p1, self.q2, self.p2], dtype=complex)

    def with_state(self, y: Sequence[complex], t: Optional[complex] = None, s: Optional[complex] = None) -> "PhasePoint":
        return PhasePoint(*(complex(v) for v in y), complex(self.t if t is None else t), complex(self.s if s is None else s))

    def distance(self, other: "PhasePoint") -> float:
        a = np.array([self.q1, self.p1, self.q2, self.p2, self.t, self.s])
        b = np.array([other.q1, other.p1, other.q2, other.p2, other.t, other.s])
        return float(np.max(np.abs(a - b)))

    def as_dict(self) -> Dict[str, List[float]]:
        return {k: [getattr(self, k).real, getattr(self, k).imag] for k in ("q1", "p1", "q2", "p2", "t", "s")}


@dataclass(frozen=True)
class Leg:
    time: str  # "t" (flow of H1) or "s" (flow of H2)
    delta: complex

    def __post_init__(self):
        if self.time not in ("t", "s"):
            raise ValueError("a leg moves either t or s")


@dataclass
class FlowPath:
    legs: List[Leg]
    rtol: float = DEFAULT_RTOL
    atol: float = DEFAULT_ATOL
    max_step: float = np.inf


class FlowSystem:
    """Compiled right-hand sides of both flows for numeric parameters."""

    def __init__(self, sys: HamiltonianSystem, eta: complex, margin: float = DEFAULT_MARGIN):
        extra = (sys.h1.variables() | sys.h2.variables()) - set(STATE_VARS) - {"t", "s", "eta"}
        if extra:
            raise ValueError(f"parameters must be numeric, still symbolic: {sorted(extra)}")
        self.eta = complex(eta)
        self.margin = margin
        self.hamiltonians = (sys.h1, sys.h2)
        args = list(STATE_VARS) + ["t", "s", "eta"]
        self._rhs = []
        for h in self.hamiltonians:
            comps = hamilton_rhs(h)
            self._rhs.append([compile_numeric(comps[v], args) for v in STATE_VARS])

    @classmethod
    def from_params(
        cls, alpha: Sequence, eta=DEFAULT_ETA, coupling: bool = True, margin: float = DEFAULT_MARGIN
    ) -> "FlowSystem":
        params = ParameterSet.numeric(alpha, eta)
        sys = build_system(ParameterSet(params.alpha, None), coupling=coupling)
        return cls(sys, complex(Fraction(eta)), margin)

    def rhs(self, time: str, y: np.ndarray, t: complex, s: complex) -> np.ndarray:
        fs = self._rhs[0 if time == "t" else 1]
        args = (*y, t, s, self.eta)
        return np.array([f(*args) for f in fs], dtype=complex)

    def singular_values(self, time: str, other: complex) -> List[complex]:
        return [0j, 1 + 0j, self.eta, complex(other)]


def _segment_distance(a: complex, b: complex, c: complex) -> float:
    """Distance from the point ``c`` to the segment [a, b] in the complex plane."""
    d = b - a
    if d == 0:
        return abs(c - a)
    lam = ((c - a) * d.conjugate()).real / abs(d) ** 2
    lam = min(1.0, max(0.0, lam))
    return abs(a + lam * d - c)


def check_margin(system: FlowSystem, start: PhasePoint, leg: Leg) -> float:
    moving, other = (start.t, start.s) if leg.time == "t" else (start.s, start.t)
    dist = min(_segment_distance(moving, moving + leg.delta, c) for c in system.singular_values(leg.time, other))
    if dist < system.margin:
        raise SingularityApproach(
            f"{leg.time}-leg from {moving} by {leg.delta} passes within {dist:.3g} of the singular set"
        )
    return dist


@dataclass
class LegResult:
    end: PhasePoint
    lam: np.ndarray
    states: np.ndarray  # shape (4, n)
    times: np.ndarray  # moving time along the samples


def integrate_leg_samples(
    system: FlowSystem,
    start: PhasePoint,
    leg: Leg,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
    max_step: float = np.inf,
    check: bool = True,
    events: Optional[Sequence[Callable]] = None,
) -> LegResult:
    if leg.delta == 0:
        return LegResult(start, np.array([0.0]), start.state[:, None], np.array([getattr(start, leg.time)]))
    if check:
        check_margin(system, start, leg)
    tau0 = complex(getattr(start, leg.time))
    other = start.s if leg.time == "t" else start.t
    delta = complex(leg.delta)

    if leg.time == "t":
        def f(lam, y):
            return delta * system.rhs("t", y, tau0 + lam * delta, other)
    else:
        def f(lam, y):
            return delta * system.rhs("s", y, other, tau0 + lam * delta)

    sol = solve_ivp(f, (0.0, 1.0), start.state, method="DOP853", rtol=rtol, atol=atol, max_step=max_step, events=events)
    if sol.status == -1:
        raise StepFailure(sol.message)
    lam_end = float(sol.t[-1])
    tau_end = tau0 + lam_end * delta
    end = start.with_state(sol.y[:, -1], **{leg.time: tau_end})
    return LegResult(end, sol.t, sol.y, tau0 + sol.t * delta)


def integrate_leg(system: FlowSystem, start: PhasePoint, leg: Leg, rtol: float = DEFAULT_RTOL, atol: float = DEFAULT_ATOL, max_step: float = np.inf) -> PhasePoint:
    return integrate_leg_samples(system, start, leg, rtol, atol, max_step).end


def integrate_path(system: FlowSystem, start: PhasePoint, path: FlowPath) -> Tuple[PhasePoint, List[LegResult]]:
    point = start
    results = []
    for leg in path.legs:
        res = integrate_leg_samples(system, point, leg, path.rtol, path.atol, path.max_step)
        results.append(res)
        point = res.end
    return point, results


def commutativity_check(
    system: FlowSystem,
    start: PhasePoint,
    dt: complex,
    ds: complex,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> float:
    """Max-norm gap between (t-leg, s-leg) and (s-leg, t-leg) endpoints."""
    a = integrate_path(system, start, FlowPath([Leg("t", dt), Leg("s", ds)], rtol, atol))[0]
    b = integrate_path(system, start, FlowPath([Leg("s", ds), Leg("t", dt)], rtol, atol))[0]
    return a.distance(b)


def _numeric_polys(polys: Sequence[RationalExpr]):
    args = list(STATE_VARS) + ["t", "s", "eta"]
    return [compile_numeric(p, args) for p in polys]


def divisor_drift(system: FlowSystem, polynomials: Sequence[RationalExpr], start: PhasePoint, path: FlowPath) -> float:
    """Largest value of the defining polynomials seen along the path."""
    fs = _numeric_polys(polynomials)
    _, results = integrate_path(system, start, path)
    worst = 0.0
    point = start
    for leg, res in zip(path.legs, results):
        for k in range(res.states.shape[1]):
            t = res.times[k] if leg.time == "t" else point.t
            s = res.times[k] if leg.time == "s" else point.s
            args = (*res.states[:, k], t, s, system.eta)
            worst = max(worst, max(abs(f(*args)) for f in fs))
        point = res.end
    return worst


# ---------------------------------------------------------------------------
# poles


@dataclass
class PoleSamples:
    times: np.ndarray
    values: np.ndarray
    coordinate: str


# leading entry of the local index at the boundary loci; compared with, not asserted against, fitted residues
INDEX_PREDICTION = 2


@dataclass
class PoleFit:
    t_star: complex
    residue: complex
    constant: complex
    linear: complex
    rms: float

    def as_dict(self) -> dict:
        def c(z):
            return [z.real, z.imag]

        return {
            "t_star": c(self.t_star),
            "residue": c(self.residue),
            "constant": c(self.constant),
            "rms": self.rms,
            "index_prediction": INDEX_PREDICTION,
        }


def find_pole(
    system: FlowSystem,
    start: PhasePoint,
    leg: Leg,
    coordinate: str = "p1",
    threshold: float = 1e6,
    rtol: float = DEFAULT_RTOL,
    atol: float = DEFAULT_ATOL,
) -> PoleSamples:
    """Integrate until ``|coordinate|`` exceeds ``threshold``; the singular-set margin is not enforced."""
    idx = STATE_VARS.index(coordinate)

    def blow(lam, y):
        return abs(y[idx]) - threshold

    blow.terminal = True  # type: ignore[attr-defined]
    try:
        res = integrate_leg_samples(system, start, leg, rtol, atol, check=False, events=[blow])
    except StepFailure as exc:
        raise NoPoleDetected(str(exc)) from exc
    vals = res.states[idx]
    if np.max(np.abs(vals)) < threshold / 10:
        raise NoPoleDetected(f"|{coordinate}| stayed below {threshold / 10:g}")
    return PoleSamples(res.times, vals, coordinate)


def residue_probe(times: Sequence[complex], values: Sequence[complex], t_star: Optional[complex] = None, floor: float = 10.0) -> PoleFit:
    """Fit ``a/(t - t*) + b + c (t - t*)`` to samples approaching a simple pole."""
    times = np.asarray(times, dtype=complex)
    values = np.asarray(values, dtype=complex)
    # only the samples where the pole dominates: |y| above the geometric middle of the range
    peak = float(np.max(np.abs(values)))
    keep = np.abs(values) >= max(floor, np.sqrt(peak))
    if keep.sum() < 4:
        raise NoPoleDetected("not enough samples near the pole")
    tt, yy = times[keep], values[keep]
    if t_star is None:
        # 1/y is close to (t - t*)/a near the pole; use the largest samples
        top = np.argsort(-np.abs(yy))[: max(4, len(yy) // 4)]
        A = np.vstack([tt[top], np.ones(len(top))]).T
        slope, icpt = np.linalg.lstsq(A, 1 / yy[top], rcond=None)[0]
        t_star = -icpt / slope
    else:
        t_star = complex(t_star)

    def design(ts):
        d = tt - ts
        return np.vstack([1 / d, np.ones_like(d), d]).T

    def linear_fit(ts):
        coef = np.linalg.lstsq(design(ts), yy, rcond=None)[0]
        return coef, (design(ts) @ coef - yy) / np.abs(yy)

    def resid(x):
        r = linear_fit(complex(x[0], x[1]))[1]
        return np.concatenate([r.real, r.imag])

    x = least_squares(resid, [t_star.real, t_star.imag], xtol=1e-15, ftol=1e-15).x
    ts = complex(x[0], x[1])
    coef, r = linear_fit(ts)
    return PoleFit(ts, complex(coef[0]), complex(coef[1]), complex(coef[2]), float(np.sqrt(np.mean(np.abs(r) ** 2))))
