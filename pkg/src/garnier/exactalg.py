"""Exact sparse multivariate polynomials and rational expressions over Q.

Monomials are packed into a single Python int: every variable of the fixed
universe owns a ``BITS``-wide field, so multiplying monomials is integer
addition. The top bit of each field is a guard bit used to detect exponent
overflow. Coefficients are Python ints or ``fractions.Fraction``.
"""
from __future__ import annotations

import heapq
import random
from fractions import Fraction
from numbers import Rational
from typing import Dict, Iterable, Mapping, Optional, Sequence, Tuple, Union

ExactScalar = Union[int, Fraction]

STATE = ("q1", "p1", "q2", "p2")
TIMES = ("t", "s")
PARAMS = ("a0", "a1", "a2", "a3", "a4", "a5")
CHART_VARS = tuple(f"{c}{j}" for j in range(6) for c in "xyzw")
BOUNDARY_VARS = ("X3", "Y3", "Z3", "W3", "X4", "Y4", "Z4", "W4")
BETAS = ("b1", "b2", "b3", "b4")
VARIABLES: Tuple[str, ...] = STATE + TIMES + ("eta",) + PARAMS + CHART_VARS + BOUNDARY_VARS + BETAS

BITS = 12
MASK = (1 << BITS) - 1
_GUARD_BIT = 1 << (BITS - 1)
GUARD = sum(_GUARD_BIT << (BITS * i) for i in range(len(VARIABLES)))
INDEX = {name: i for i, name in enumerate(VARIABLES)}


class ExactAlgebraError(ArithmeticError):
    pass


class NotDivisible(ExactAlgebraError):
    """Raised when a polynomial is not divisible; ``monomial`` is the witness."""

    def __init__(self, monomial: str):
        super().__init__(f"not divisible, offending monomial {monomial}")
        self.monomial = monomial


class SubstitutionDenominatorZero(ExactAlgebraError):
    pass


class PoleAtPoint(ExactAlgebraError):
    pass


def _index(v: str) -> int:
    try:
        return INDEX[v]
    except KeyError:
        raise KeyError(f"unknown variable {v!r}") from None


def _shift(v: str) -> int:
    return BITS * _index(v)


def _decode(key: int) -> list:
    out = []
    i = 0
    while key:
        e = key & MASK
        if e:
            out.append((i, e))
        key >>= BITS
        i += 1
    return out


def _exp(key: int, shift: int) -> int:
    return (key >> shift) & MASK


def _norm(c):
    if type(c) is Fraction and c.denominator == 1:
        return c.numerator
    return c


def monomial_str(key: int) -> str:
    if key == 0:
        return "1"
    return "*".join(VARIABLES[i] if e == 1 else f"{VARIABLES[i]}^{e}" for i, e in _decode(key))


def _order_key(key: int):
    dec = _decode(key)
    exps = [0] * len(VARIABLES)
    for i, e in dec:
        exps[i] = e
    return (sum(exps), exps)


class MultiPoly:
    """Immutable sparse polynomial; ``terms`` maps packed monomials to coefficients."""

    __slots__ = ("terms",)

    def __init__(self, terms: Optional[Dict[int, ExactScalar]] = None):
        self.terms: Dict[int, ExactScalar] = terms if terms is not None else {}

    # construction
    @classmethod
    def const(cls, c) -> "MultiPoly":
        c = _norm(Fraction(c)) if not isinstance(c, int) else c
        return cls({0: c} if c else {})

    @classmethod
    def var(cls, name: str, power: int = 1) -> "MultiPoly":
        if power >= _GUARD_BIT:
            raise OverflowError("exponent too large")
        return cls({power << _shift(name): 1})

    @classmethod
    def from_exponents(cls, items: Iterable[Tuple[Mapping[str, int], ExactScalar]]) -> "MultiPoly":
        out: Dict[int, ExactScalar] = {}
        for exps, c in items:
            key = 0
            for v, e in exps.items():
                key += e << _shift(v)
            out[key] = out.get(key, 0) + c
        return cls({k: _norm(c) for k, c in out.items() if c})

    def exponent_items(self):
        """Yield ``({var: exponent}, coefficient)`` pairs; inverse of :meth:`from_exponents`."""
        for k, c in self.terms.items():
            yield {VARIABLES[i]: e for i, e in _decode(k)}, c

    # predicates
    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return not self.terms or (len(self.terms) == 1 and 0 in self.terms)

    def constant_value(self) -> ExactScalar:
        return self.terms.get(0, 0)

    def is_monomial(self) -> bool:
        return len(self.terms) == 1

    def __len__(self):
        return len(self.terms)

    def __eq__(self, other):
        if isinstance(other, MultiPoly):
            return self.terms == other.terms
        if isinstance(other, (int, Fraction)):
            return self.terms == MultiPoly.const(other).terms
        return NotImplemented

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    # arithmetic
    def __add__(self, other):
        if not isinstance(other, MultiPoly):
            if isinstance(other, (int, Rational)):
                other = MultiPoly.const(other)
            else:
                return NotImplemented
        if len(self.terms) < len(other.terms):
            small, big = self.terms, other.terms
        else:
            small, big = other.terms, self.terms
        out = dict(big)
        for k, c in small.items():
            v = out.get(k)
            if v is None:
                out[k] = c
            else:
                v = v + c
                if v:
                    out[k] = _norm(v)
                else:
                    del out[k]
        return MultiPoly(out)

    __radd__ = __add__

    def __neg__(self):
        return MultiPoly({k: -c for k, c in self.terms.items()})

    def __sub__(self, other):
        if not isinstance(other, MultiPoly):
            if isinstance(other, (int, Rational)):
                other = MultiPoly.const(other)
            else:
                return NotImplemented
        out = dict(self.terms)
        for k, c in other.terms.items():
            v = out.get(k)
            if v is None:
                out[k] = -c
            else:
                v = v - c
                if v:
                    out[k] = _norm(v)
                else:
                    del out[k]
        return MultiPoly(out)

    def __rsub__(self, other):
        return (-self) + other

    def scale(self, c) -> "MultiPoly":
        if not c:
            return MultiPoly()
        if c == 1:
            return self
        return MultiPoly({k: _norm(v * c) for k, v in self.terms.items()})

    def __mul__(self, other):
        if not isinstance(other, MultiPoly):
            if isinstance(other, (int, Rational)):
                return self.scale(other)
            return NotImplemented
        a, b = self.terms, other.terms
        if not a or not b:
            return MultiPoly()
        if len(a) < len(b):
            a, b = b, a
        if len(b) == 1:
            ((kb, cb),) = b.items()
            if kb == 0:
                return self.scale(cb) if a is self.terms else other.scale(cb)
            out = {ka + kb: _norm(ca * cb) for ka, ca in a.items()}
            _check_overflow(out)
            return MultiPoly(out)
        out: Dict[int, ExactScalar] = {}
        get = out.get
        b_items = list(b.items())
        for ka, ca in a.items():
            for kb, cb in b_items:
                k = ka + kb
                out[k] = get(k, 0) + ca * cb
        res = {k: _norm(c) for k, c in out.items() if c}
        _check_overflow(res)
        return MultiPoly(res)

    __rmul__ = __mul__

    def __pow__(self, n: int) -> "MultiPoly":
        if n < 0:
            raise ValueError("negative power of a polynomial")
        result = MultiPoly.const(1)
        base = self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    # structure
    def variables(self) -> set:
        found = 0
        for k in self.terms:
            found |= k
        out = set()
        i = 0
        while found:
            if found & MASK:
                out.add(VARIABLES[i])
            found >>= BITS
            i += 1
        return out

    def degree(self, v: str) -> int:
        sh = _shift(v)
        return max(((k >> sh) & MASK for k in self.terms), default=0)

    def min_degree(self, v: str) -> int:
        sh = _shift(v)
        return min(((k >> sh) & MASK for k in self.terms), default=0)

    def total_degree(self, subset: Optional[Sequence[str]] = None) -> int:
        """Maximum over terms of the summed exponents of ``subset`` (all variables if None)."""
        if not self.terms:
            return -1
        if subset is None:
            return max(sum(e for _, e in _decode(k)) for k in self.terms)
        shifts = [_shift(v) for v in subset]
        return max(sum((k >> sh) & MASK for sh in shifts) for k in self.terms)

    def coefficients_in(self, v: str) -> Dict[int, "MultiPoly"]:
        """Split into ``{e: c_e}`` with ``self = sum c_e * v**e``."""
        sh = _shift(v)
        out: Dict[int, Dict[int, ExactScalar]] = {}
        for k, c in self.terms.items():
            e = (k >> sh) & MASK
            out.setdefault(e, {})[k - (e << sh)] = c
        return {e: MultiPoly(t) for e, t in out.items()}

    def monomial_content(self) -> int:
        """Packed gcd monomial of all terms (componentwise minimum exponent)."""
        if not self.terms:
            return 0
        keys = iter(self.terms)
        dec = dict(_decode(next(keys)))
        for k in keys:
            if not dec:
                break
            for i in list(dec):
                e = (k >> (BITS * i)) & MASK
                if e < dec[i]:
                    if e:
                        dec[i] = e
                    else:
                        del dec[i]
        return sum(e << (BITS * i) for i, e in dec.items())

    def divide_monomial(self, mono: int) -> "MultiPoly":
        return MultiPoly({k - mono: c for k, c in self.terms.items()})

    def divide_by_monomial_power(self, v: str, k: int) -> "MultiPoly":
        """Return ``q`` with ``self == v**k * q``; raise NotDivisible otherwise."""
        sh = _shift(v)
        step = k << sh
        out = {}
        for key, c in self.terms.items():
            if ((key >> sh) & MASK) < k:
                raise NotDivisible(monomial_str(key))
            out[key - step] = c
        return MultiPoly(out)

    def diff(self, v: str) -> "MultiPoly":
        sh = _shift(v)
        one = 1 << sh
        out = {}
        for k, c in self.terms.items():
            e = (k >> sh) & MASK
            if e:
                out[k - one] = c * e
        return MultiPoly(out)

    def leading_key(self) -> int:
        return max(self.terms, key=_order_key)

    def content(self) -> ExactScalar:
        """Positive gcd of the coefficients (rational content)."""
        from math import gcd

        num = 0
        den = 1
        for c in self.terms.values():
            c = Fraction(c)
            num = gcd(num, c.numerator)
            den = den * c.denominator // gcd(den, c.denominator)
        return _norm(Fraction(num, den)) if num else 1

    def exact_div(self, other: "MultiPoly") -> "MultiPoly":
        """Exact quotient by ``other``; raises NotDivisible if a remainder is left."""
        if other.is_zero():
            raise ZeroDivisionError("division by the zero polynomial")
        if other.is_constant():
            return self.scale(Fraction(1) / other.constant_value())
        if other.is_monomial():
            ((kb, cb),) = other.terms.items()
            out = {}
            for k, c in self.terms.items():
                if not _divides(kb, k):
                    raise NotDivisible(monomial_str(k))
                out[k - kb] = _norm(Fraction(c) / cb)
            return MultiPoly(out)
        # lex order on packed keys is plain integer order
        lk = max(other.terms)
        lc = other.terms[lk]
        rem = dict(self.terms)
        heap = [-k for k in rem]
        heapq.heapify(heap)
        quot: Dict[int, ExactScalar] = {}
        other_items = [(kb, cb) for kb, cb in other.terms.items() if kb != lk]
        while heap:
            k = -heapq.heappop(heap)
            c0 = rem.pop(k, None)
            if c0 is None:
                continue
            if not _divides(lk, k):
                raise NotDivisible(monomial_str(k))
            c = _qdiv(c0, lc)
            mk = k - lk
            quot[mk] = c
            for kb, cb in other_items:
                kk = kb + mk
                old = rem.get(kk)
                if old is None:
                    rem[kk] = -c * cb
                    heapq.heappush(heap, -kk)
                else:
                    v = old - c * cb
                    if v:
                        rem[kk] = _norm(v)
                    else:
                        del rem[kk]
        return MultiPoly({k: _norm(c) for k, c in quot.items()})

    def degree_bound_ok(self, divisor: "MultiPoly") -> bool:
        """Cheap necessary condition for ``divisor | self``: per-variable degrees fit."""
        return all(self.degree(v) >= divisor.degree(v) for v in divisor.variables())

    def divides(self, other: "MultiPoly") -> bool:
        try:
            other.exact_div(self)
        except NotDivisible:
            return False
        return True

    # evaluation / substitution
    def evaluate(self, point: Mapping[str, object]):
        cache: Dict[Tuple[int, int], object] = {}
        vals = {}
        for name, val in point.items():
            vals[_index(name)] = val
        total = 0
        for k, c in self.terms.items():
            term = c
            for i, e in _decode(k):
                if i not in vals:
                    raise KeyError(f"point does not bind {VARIABLES[i]}")
                p = cache.get((i, e))
                if p is None:
                    p = vals[i] ** e
                    cache[(i, e)] = p
                term = term * p
            total = total + term
        return _norm(total) if isinstance(total, Fraction) else total

    def evaluate_mod(self, point: Mapping[int, int], prime: int) -> int:
        """Evaluate in Z/prime; ``point`` maps variable index to residue."""
        cache: Dict[Tuple[int, int], int] = {}
        total = 0
        for k, c in self.terms.items():
            if type(c) is int:
                term = c % prime
            else:
                term = c.numerator * pow(c.denominator, -1, prime) % prime
            for i, e in _decode(k):
                p = cache.get((i, e))
                if p is None:
                    p = pow(point[i], e, prime)
                    cache[(i, e)] = p
                term = term * p % prime
            total += term
        return total % prime

    def partial_evaluate(self, point: Mapping[str, ExactScalar]) -> "MultiPoly":
        """Substitute exact scalars for some variables, leaving the rest symbolic."""
        shifts = {_shift(v): val for v, val in point.items()}
        out: Dict[int, ExactScalar] = {}
        for k, c in self.terms.items():
            for sh, val in shifts.items():
                e = (k >> sh) & MASK
                if e:
                    c = c * val**e
                    k -= e << sh
                    if not c:
                        break
            if c:
                v = out.get(k, 0) + c
                if v:
                    out[k] = v
                else:
                    out.pop(k, None)
        return MultiPoly({k: _norm(c) for k, c in out.items()})

    def to_text(self) -> str:
        """Canonical text: graded-lex order, ``coeff*var^e*...`` terms."""
        if not self.terms:
            return "0"
        keys = sorted(self.terms, key=_order_key, reverse=True)
        parts = []
        for k in keys:
            c = self.terms[k]
            mono = monomial_str(k)
            if k == 0:
                body = str(c)
            elif c == 1:
                body = mono
            elif c == -1:
                body = "-" + mono
            else:
                body = f"{_coeff_text(c)}*{mono}"
            parts.append(body)
        text = " + ".join(parts)
        return text.replace("+ -", "- ")

    def __str__(self):
        return self.to_text()

    def __repr__(self):
        return f"MultiPoly({self.to_text()!r})"


def _coeff_text(c) -> str:
    if isinstance(c, Fraction):
        return f"{c.numerator}/{c.denominator}"
    return str(c)


def _qdiv(a, b):
    if type(a) is int and type(b) is int and a % b == 0:
        return a // b
    return _norm(Fraction(a) / b)


def _addmul_into(out: Dict[int, ExactScalar], a: Dict[int, ExactScalar], b: Dict[int, ExactScalar]) -> None:
    """``out += a * b`` in place (zeros are left for the caller to strip)."""
    get = out.get
    if len(a) < len(b):
        a, b = b, a
    b_items = list(b.items())
    for ka, ca in a.items():
        for kb, cb in b_items:
            k = ka + kb
            out[k] = get(k, 0) + ca * cb


def _divides(a: int, b: int) -> bool:
    """Monomial ``a`` divides monomial ``b``."""
    while a:
        if (a & MASK) > (b & MASK):
            return False
        a >>= BITS
        b >>= BITS
    return True


def _check_overflow(terms: Dict[int, ExactScalar]) -> None:
    for k in terms:
        if k & GUARD:
            raise OverflowError("exponent overflow in packed monomial")


ExprLike = Union["RationalExpr", MultiPoly, int, Fraction]


class RationalExpr:
    """Quotient ``num/den`` of polynomials; equality is by cross-multiplication."""

    __slots__ = ("num", "den")

    def __init__(self, num: MultiPoly, den: Optional[MultiPoly] = None, *, reduce: bool = True):
        if den is None:
            den = MultiPoly.const(1)
        if den.is_zero():
            raise ZeroDivisionError("zero denominator")
        if reduce:
            num, den = _reduce(num, den)
        self.num = num
        self.den = den

    @classmethod
    def coerce(cls, x: ExprLike) -> "RationalExpr":
        if isinstance(x, RationalExpr):
            return x
        if isinstance(x, MultiPoly):
            return cls(x, reduce=False)
        if isinstance(x, (int, Rational)):
            return cls(MultiPoly.const(Fraction(x)), reduce=False)
        raise TypeError(f"cannot coerce {type(x).__name__}")

    @classmethod
    def var(cls, name: str) -> "RationalExpr":
        return cls(MultiPoly.var(name), reduce=False)

    def is_zero(self) -> bool:
        return self.num.is_zero()

    def is_polynomial(self) -> bool:
        return self.den.is_constant()

    def variables(self) -> set:
        return self.num.variables() | self.den.variables()

    def __add__(self, other):
        try:
            other = RationalExpr.coerce(other)
        except TypeError:
            return NotImplemented
        if other.num.is_zero():
            return self
        if self.num.is_zero():
            return other
        if self.den == other.den:
            return RationalExpr(self.num + other.num, self.den)
        if self.den.is_constant():
            c = self.den.constant_value()
            return RationalExpr(self.num * other.den + other.num.scale(c), other.den.scale(c))
        if other.den.is_constant():
            c = other.den.constant_value()
            return RationalExpr(self.num.scale(c) + other.num * self.den, self.den.scale(c))
        q = _try_div(self.den, other.den)
        if q is not None:
            return RationalExpr(self.num + other.num * q, self.den)
        q = _try_div(other.den, self.den)
        if q is not None:
            return RationalExpr(self.num * q + other.num, other.den)
        return RationalExpr(self.num * other.den + other.num * self.den, self.den * other.den)

    __radd__ = __add__

    def __neg__(self):
        return RationalExpr(-self.num, self.den, reduce=False)

    def __sub__(self, other):
        try:
            other = RationalExpr.coerce(other)
        except TypeError:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        try:
            other = RationalExpr.coerce(other)
        except TypeError:
            return NotImplemented
        if self.num.is_zero() or other.num.is_zero():
            return RationalExpr(MultiPoly(), reduce=False)
        if self.den == other.num:
            return RationalExpr(self.num, other.den)
        if other.den == self.num:
            return RationalExpr(other.num, self.den)
        return RationalExpr(self.num * other.num, self.den * other.den)

    __rmul__ = __mul__

    def inverse(self) -> "RationalExpr":
        if self.num.is_zero():
            raise ZeroDivisionError("inverse of zero expression")
        return RationalExpr(self.den, self.num)

    def __truediv__(self, other):
        try:
            other = RationalExpr.coerce(other)
        except TypeError:
            return NotImplemented
        return self * other.inverse()

    def __rtruediv__(self, other):
        return RationalExpr.coerce(other) * self.inverse()

    def __pow__(self, n: int):
        if n < 0:
            return self.inverse() ** (-n)
        return RationalExpr(self.num**n, self.den**n, reduce=False)

    def __eq__(self, other):
        try:
            other = RationalExpr.coerce(other)
        except TypeError:
            return NotImplemented
        return expr_equal(self, other)

    __hash__ = None

    def diff(self, v: str) -> "RationalExpr":
        dn = self.num.diff(v)
        dd = self.den.diff(v)
        if dd.is_zero():
            return RationalExpr(dn, self.den)
        return RationalExpr(dn * self.den - self.num * dd, self.den * self.den)

    def subs(self, bindings: Mapping[str, ExprLike]) -> "RationalExpr":
        return substitute(self, bindings)

    def evaluate(self, point: Mapping[str, object]):
        return evaluate(self, point)

    def partial_evaluate(self, point: Mapping[str, ExactScalar]) -> "RationalExpr":
        den = self.den.partial_evaluate(point)
        if den.is_zero():
            raise PoleAtPoint("denominator vanishes identically at the specialization")
        return RationalExpr(self.num.partial_evaluate(point), den)

    def to_text(self) -> str:
        if self.den.is_constant() and self.den.constant_value() == 1:
            return self.num.to_text()
        return f"({self.num.to_text()})/({self.den.to_text()})"

    def __str__(self):
        return self.to_text()

    def __repr__(self):
        return f"RationalExpr({self.to_text()!r})"


def _try_div(a: MultiPoly, b: MultiPoly) -> Optional[MultiPoly]:
    """``a / b`` if exact and both are small, else None."""
    if len(a) > 64 or len(b) > 16 or len(b) > len(a):
        return None
    try:
        return a.exact_div(b)
    except NotDivisible:
        return None


def _reduce(num: MultiPoly, den: MultiPoly) -> Tuple[MultiPoly, MultiPoly]:
    """Cancel the common monomial factor and make the denominator monic-ish."""
    if num.is_zero():
        return num, MultiPoly.const(1)
    if den.is_constant():
        c = den.constant_value()
        if c != 1:
            return num.scale(Fraction(1) / c if isinstance(c, int) else 1 / c), MultiPoly.const(1)
        return num, den
    m = num.monomial_content()
    if m:
        m = _mono_gcd(m, den.monomial_content())
        if m:
            num = num.divide_monomial(m)
            den = den.divide_monomial(m)
    if num == den:
        return MultiPoly.const(1), MultiPoly.const(1)
    return num, den


def _mono_gcd(a: int, b: int) -> int:
    out = 0
    sh = 0
    while a and b:
        out += min(a & MASK, b & MASK) << sh
        a >>= BITS
        b >>= BITS
        sh += BITS
    return out


# ---------------------------------------------------------------------------
# public operations


def symbols(names: str) -> Tuple[RationalExpr, ...]:
    return tuple(RationalExpr.var(n) for n in names.split())


def poly_arith(a: MultiPoly, b: MultiPoly, op: str) -> MultiPoly:
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    raise ValueError(f"unknown op {op!r}")


def partial_derivative(f: ExprLike, v: str) -> RationalExpr:
    return RationalExpr.coerce(f).diff(v)


def divide_by_monomial_power(p: MultiPoly, v: str, k: int) -> MultiPoly:
    return p.divide_by_monomial_power(v, k)


def _split_bound(poly: MultiPoly, shifts: Sequence[int]) -> Dict[Tuple[int, ...], Dict[int, ExactScalar]]:
    groups: Dict[Tuple[int, ...], Dict[int, ExactScalar]] = {}
    for k, c in poly.terms.items():
        sig = []
        for sh in shifts:
            e = (k >> sh) & MASK
            sig.append(e)
            k -= e << sh
        groups.setdefault(tuple(sig), {})[k] = c
    return groups


def _safe_order(images: Mapping[str, RationalExpr]) -> Optional[list]:
    """Order in which one-variable-at-a-time substitution equals the simultaneous one.

    ``v`` must come after every bound variable occurring in its image; None on a cycle.
    """
    deps = {v: (img.variables() & images.keys()) - {v} for v, img in images.items()}
    order: list = []
    done: set = set()
    while len(order) < len(images):
        ready = [v for v in images if v not in done and deps[v] <= done]
        if not ready:
            return None
        for v in ready:
            order.append(v)
            done.add(v)
    return order


def _horner(poly: MultiPoly, v: str, n: MultiPoly, d: MultiPoly, D: int, dpow: Dict[int, MultiPoly]) -> MultiPoly:
    """``sum_e c_e * n**e * d**(D-e)`` where ``poly = sum_e c_e * v**e``."""
    coeffs = poly.coefficients_in(v)
    zero = MultiPoly()
    r = coeffs.get(D, zero)
    for k in range(1, D + 1):
        r = r * n
        c = coeffs.get(D - k)
        if c is not None:
            p = dpow.get(k)
            if p is None:
                p = dpow[k] = d**k
            r = r + c * p
    return r


def substitute(
    target: ExprLike,
    bindings: Mapping[str, ExprLike],
    atoms: Sequence[MultiPoly] = (),
) -> RationalExpr:
    """Simultaneous substitution ``v -> bindings[v]``; unbound variables pass through.

    ``atoms`` are candidate common factors cancelled after every step; they only
    keep intermediate sizes down and never change the value.
    """
    target = RationalExpr.coerce(target)
    present = target.variables()
    images: Dict[str, RationalExpr] = {}
    for v, img in bindings.items():
        if v not in present:
            continue
        img = RationalExpr.coerce(img)
        if img.den.is_zero():
            raise SubstitutionDenominatorZero(v)
        if img.den == 1 and img.num.terms == {1 << _shift(v): 1}:
            continue
        images[v] = img
    if not images:
        return target
    order = _safe_order(images)
    if order is None:
        return _substitute_grouped(target, images)
    num, den = target.num, target.den
    for v in order:
        D = max(num.degree(v), den.degree(v))
        if D == 0:
            continue
        img = images[v]
        dpow: Dict[int, MultiPoly] = {}
        num = _horner(num, v, img.num, img.den, D, dpow)
        den = _horner(den, v, img.num, img.den, D, dpow)
        if den.is_zero():
            raise SubstitutionDenominatorZero("denominator vanishes after substitution")
        m = _mono_gcd(num.monomial_content(), den.monomial_content()) if num.terms else 0
        if m:
            num, den = num.divide_monomial(m), den.divide_monomial(m)
        if atoms:
            num, den = _cancel(num, den, atoms)
    return RationalExpr(num, den)


def _substitute_grouped(target: RationalExpr, images: Dict[str, RationalExpr]) -> RationalExpr:
    """Simultaneous substitution by grouping terms on their bound exponents."""
    names = list(images)
    shifts = [_shift(v) for v in names]
    degs = [max(target.num.degree(v), target.den.degree(v)) for v in names]

    power_cache: Dict[Tuple[int, int, int], MultiPoly] = {}

    def power(j: int, which: int, e: int) -> MultiPoly:
        key = (j, which, e)
        p = power_cache.get(key)
        if p is None:
            img = images[names[j]]
            base = img.num if which == 0 else img.den
            if e == 0:
                p = MultiPoly.const(1)
            elif e == 1:
                p = base
            else:
                p = power(j, which, e - 1) * base
            power_cache[key] = p
        return p

    factor_cache: Dict[Tuple[int, ...], MultiPoly] = {}

    def factor(sig: Tuple[int, ...]) -> MultiPoly:
        f = factor_cache.get(sig)
        if f is None:
            f = MultiPoly.const(1)
            for j, e in enumerate(sig):
                if e:
                    f = f * power(j, 0, e)
                if degs[j] - e and not images[names[j]].den.is_constant():
                    f = f * power(j, 1, degs[j] - e)
                elif degs[j] - e:
                    f = f.scale(images[names[j]].den.constant_value() ** (degs[j] - e))
            factor_cache[sig] = f
        return f

    def push(poly: MultiPoly) -> MultiPoly:
        acc: Dict[int, ExactScalar] = {}
        for sig, rest in _split_bound(poly, shifts).items():
            _addmul_into(acc, rest, factor(sig).terms)
        res = {k: _norm(c) for k, c in acc.items() if c}
        _check_overflow(res)
        return MultiPoly(res)

    num = push(target.num)
    den = push(target.den)
    if den.is_zero():
        raise SubstitutionDenominatorZero("denominator vanishes after substitution")
    return RationalExpr(num, den)


def _linear_root_point(atom: MultiPoly, rng: random.Random) -> Optional[Dict[int, int]]:
    """Random point of Z/PRIME on the zero set of ``atom`` (None if no linear variable)."""
    for v in sorted(atom.variables()):
        if atom.degree(v) != 1:
            continue
        coeffs = atom.coefficients_in(v)
        c1, c0 = coeffs[1], coeffs.get(0, MultiPoly())
        for _ in range(5):
            pt = {INDEX[u]: rng.randrange(1, PRIME) for u in VARIABLES}
            a = c1.evaluate_mod(pt, PRIME)
            if a:
                pt[INDEX[v]] = -c0.evaluate_mod(pt, PRIME) * pow(a, -1, PRIME) % PRIME
                return pt
        return None
    return None


def _maybe_divisible(poly: MultiPoly, atom: MultiPoly, rng: random.Random) -> bool:
    pt = _linear_root_point(atom, rng)
    if pt is None:
        return True
    return poly.evaluate_mod(pt, PRIME) == 0


def _cancel(num: MultiPoly, den: MultiPoly, atoms: Sequence[MultiPoly]) -> Tuple[MultiPoly, MultiPoly]:
    rng = random.Random(len(num) * 7919 + len(den))
    for atom in atoms:
        if atom.is_constant() or not (atom.variables() <= (num.variables() & den.variables())):
            continue
        while den.degree_bound_ok(atom) and _maybe_divisible(den, atom, rng) and _maybe_divisible(num, atom, rng):
            try:
                nd = den.exact_div(atom)
                nn = num.exact_div(atom)
            except NotDivisible:
                break
            num, den = nn, nd
    return num, den


def cancel_factors(expr: ExprLike, atoms: Sequence[MultiPoly]) -> RationalExpr:
    """Divide numerator and denominator by each atom as often as both allow."""
    expr = RationalExpr.coerce(expr)
    num, den = _cancel(expr.num, expr.den, atoms)
    return RationalExpr(num, den)


def substitute_poly(target: MultiPoly, bindings: Mapping[str, ExprLike]) -> RationalExpr:
    return substitute(RationalExpr(target, reduce=False), bindings)


def evaluate(f: ExprLike, point: Mapping[str, object]):
    """Evaluate exactly for exact input, in floating point for float/complex input."""
    f = RationalExpr.coerce(f)
    den = f.den.evaluate(point)
    if den == 0:
        raise PoleAtPoint(f"denominator vanishes at {dict(point)}")
    num = f.num.evaluate(point)
    if isinstance(num, (int, Fraction)) and isinstance(den, (int, Fraction)):
        return _norm(Fraction(num) / den)
    return num / den


PRIME = (1 << 61) - 1
_RNG = random.Random(20240601)


def random_rational_point(names: Iterable[str], rng: Optional[random.Random] = None) -> Dict[str, Fraction]:
    rng = rng or _RNG
    return {v: Fraction(rng.randint(1, 10**6), rng.randint(1, 10**6)) for v in names}


def _residue(x: Fraction) -> int:
    return x.numerator % PRIME * pow(x.denominator % PRIME, -1, PRIME) % PRIME


def probably_equal(a: RationalExpr, b: RationalExpr, trials: int = 3, rng: Optional[random.Random] = None) -> bool:
    """Random-point test; ``False`` is a proof of inequality, ``True`` is only evidence.

    Points are rationals with numerator and denominator in [1, 10**6]; values are
    reduced modulo a 61-bit prime, which preserves soundness of a ``False``.
    """
    names = sorted(a.variables() | b.variables())
    done = 0
    attempts = 0
    while done < trials and attempts < 10 * trials:
        attempts += 1
        pt = {_index(v): _residue(x) for v, x in random_rational_point(names, rng).items()}
        ad = a.den.evaluate_mod(pt, PRIME)
        bd = b.den.evaluate_mod(pt, PRIME)
        if ad == 0 or bd == 0:
            continue
        if a.num.evaluate_mod(pt, PRIME) * bd % PRIME != b.num.evaluate_mod(pt, PRIME) * ad % PRIME:
            return False
        done += 1
    return True


def expr_equal(a: ExprLike, b: ExprLike, precheck: bool = True) -> bool:
    """Exact identity test ``a.num*b.den == b.num*a.den``."""
    a = RationalExpr.coerce(a)
    b = RationalExpr.coerce(b)
    if a.den == b.den:
        return a.num == b.num
    if precheck and not probably_equal(a, b):
        return False
    small, big = (a, b) if len(a.den) <= len(b.den) else (b, a)
    if not small.den.is_constant() and len(small.den) < len(big.den):
        try:
            q = big.den.exact_div(small.den)
        except NotDivisible:
            q = None
        if q is not None:
            return big.num == small.num * q
    return (a.num * b.den - b.num * a.den).is_zero()


def is_zero_expr(a: ExprLike) -> bool:
    return RationalExpr.coerce(a).num.is_zero()


def compile_numeric(f: ExprLike, argnames: Sequence[str]):
    """Compile to a Python callable of ``argnames`` using float/complex arithmetic."""
    f = RationalExpr.coerce(f)
    extra = f.variables() - set(argnames)
    if extra:
        raise ValueError(f"unbound variables {sorted(extra)}")

    def src(p: MultiPoly) -> str:
        if p.is_zero():
            return "0.0"
        parts = []
        for k, c in p.terms.items():
            factors = [repr(float(c))]
            for i, e in _decode(k):
                factors.append(VARIABLES[i] if e == 1 else f"{VARIABLES[i]}**{e}")
            parts.append("*".join(factors))
        return " + ".join(parts)

    body = f"({src(f.num)})"
    if not (f.den.is_constant() and f.den.constant_value() == 1):
        body += f" / ({src(f.den)})"
    code = f"lambda {', '.join(argnames)}: {body}"
    return eval(compile(code, "<garnier-compiled>", "eval"))
