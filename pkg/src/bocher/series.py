"""Puiseux series in a single small parameter with expression coefficients.

Exponents are rationals with denominator 1 or 2 (square roots are the only
radicals in the grammar, so ramification 2 closes it).  A series stores a
truncation bound T: every exponent <= T is exact and larger terms are
dropped.  T = None marks an exact Laurent polynomial.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Dict, Optional

from .errors import EssentialSingularity
from .expr import Expr, ONE, ZERO, add, con, mul, pow_, sqrt, sym, substitute

_HALF = Fraction(1, 2)


def _tmin(a: Optional[Fraction], b: Optional[Fraction]) -> Optional[Fraction]:
    if a is None:
        return b
    if b is None:
        return a
    return min(a, b)


class PuiseuxSeries:
    __slots__ = ("var", "terms", "trunc")

    def __init__(self, var: str, terms: Dict[Fraction, Expr], trunc: Optional[Fraction]):
        clean = {}
        for k, v in terms.items():
            if v is ZERO:
                continue
            if trunc is not None and k > trunc:
                continue
            clean[k] = v
        self.var = var
        self.terms = clean
        self.trunc = trunc

    # -- inspection -----------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def valuation(self) -> Optional[Fraction]:
        if not self.terms:
            return None
        return min(self.terms)

    def leading(self):
        v = self.valuation()
        if v is None:
            return None, ZERO
        return v, self.terms[v]

    def exponents(self):
        return sorted(self.terms)

    def coeff(self, e) -> Expr:
        return self.terms.get(Fraction(e), ZERO)

    def __repr__(self):
        bits = [f"({self.terms[e]!r})*{self.var}^{e}" for e in self.exponents()]
        tail = "" if self.trunc is None else f" + O({self.var}^{self.trunc}+)"
        return " + ".join(bits) + tail if bits else f"0{tail}"

    # -- ring operations --------------------------------------------------

    def __add__(self, other: "PuiseuxSeries") -> "PuiseuxSeries":
        t = _tmin(self.trunc, other.trunc)
        terms = dict(self.terms)
        for k, v in other.terms.items():
            terms[k] = add(terms[k], v) if k in terms else v
        return PuiseuxSeries(self.var, terms, t)

    def __neg__(self) -> "PuiseuxSeries":
        return PuiseuxSeries(self.var, {k: mul(-1, v) for k, v in self.terms.items()}, self.trunc)

    def __sub__(self, other: "PuiseuxSeries") -> "PuiseuxSeries":
        return self + (-other)

    def __mul__(self, other: "PuiseuxSeries") -> "PuiseuxSeries":
        if self.is_zero() or other.is_zero():
            # keep the weaker truncation so information loss is tracked
            t = _tmin(self.trunc, other.trunc)
            return PuiseuxSeries(self.var, {}, t)
        va, vb = self.valuation(), other.valuation()
        if self.trunc is None and other.trunc is None:
            t = None
        else:
            cands = []
            if self.trunc is not None:
                cands.append(self.trunc + vb)
            if other.trunc is not None:
                cands.append(other.trunc + va)
            t = min(cands)
        terms: Dict[Fraction, Expr] = {}
        for ka, ca in self.terms.items():
            for kb, cb in other.terms.items():
                k = ka + kb
                if t is not None and k > t:
                    continue
                p = mul(ca, cb)
                if k in terms:
                    terms[k] = add(terms[k], p)
                else:
                    terms[k] = p
        return PuiseuxSeries(self.var, terms, t)

    def scale(self, c: Expr) -> "PuiseuxSeries":
        return PuiseuxSeries(self.var, {k: mul(c, v) for k, v in self.terms.items()}, self.trunc)

    def shift(self, d: Fraction) -> "PuiseuxSeries":
        t = None if self.trunc is None else self.trunc + d
        return PuiseuxSeries(self.var, {k + d: v for k, v in self.terms.items()}, t)

    def truncate(self, t: Fraction) -> "PuiseuxSeries":
        return PuiseuxSeries(self.var, self.terms, _tmin(self.trunc, Fraction(t)))

    def powi(self, n: int, target: Optional[Fraction] = None) -> "PuiseuxSeries":
        if n < 0:
            return self.inverse(target).powi(-n, target)
        acc = PuiseuxSeries(self.var, {Fraction(0): ONE}, None)
        base = self
        while n:
            if n & 1:
                acc = acc * base
            base = base * base
            n >>= 1
        return acc

    def inverse(self, target: Optional[Fraction]) -> "PuiseuxSeries":
        v = self.valuation()
        if v is None:
            raise ZeroDivisionError("inverse of a zero series")
        c0 = self.terms[v]
        c0inv = pow_(c0, -1)
        # h = f / (c0 eps^v) - 1, valuation > 0
        h_terms = {}
        for k, c in self.terms.items():
            if k == v:
                continue
            h_terms[k - v] = mul(c, c0inv)
        h_trunc = None if self.trunc is None else self.trunc - v
        h = PuiseuxSeries(self.var, h_terms, h_trunc)
        if self.trunc is None and h.is_zero():
            return PuiseuxSeries(self.var, {-v: c0inv}, None)
        depth = target if target is not None else Fraction(8)
        need = depth + v  # accumulate geometric series through this order
        acc = PuiseuxSeries(self.var, {Fraction(0): ONE}, None)
        term = PuiseuxSeries(self.var, {Fraction(0): ONE}, None)
        neg_h = -h
        while not term.is_zero():
            term = term * neg_h
            tv = term.valuation()
            if tv is None or tv > need:
                break
            term = term.truncate(need)
            acc = acc + term
        t_acc = _tmin(need, h_trunc)
        acc = PuiseuxSeries(self.var, acc.terms, t_acc)
        return acc.scale(c0inv).shift(-v)

    def sqrt(self, target: Optional[Fraction]) -> "PuiseuxSeries":
        v = self.valuation()
        if v is None:
            raise ZeroDivisionError("sqrt of a zero series")
        if (v / 2).denominator > 2:
            raise EssentialSingularity(
                f"sqrt of a series with valuation {v} leaves the (1/2)Z lattice"
            )
        c0 = self.terms[v]
        c0inv = pow_(c0, -1)
        h_terms = {}
        for k, c in self.terms.items():
            if k == v:
                continue
            h_terms[k - v] = mul(c, c0inv)
        h_trunc = None if self.trunc is None else self.trunc - v
        h = PuiseuxSeries(self.var, h_terms, h_trunc)
        if self.trunc is None and h.is_zero():
            return PuiseuxSeries(self.var, {v / 2: sqrt(c0)}, None)
        depth = target if target is not None else Fraction(8)
        need = depth - v / 2  # orders of (1+h)^(1/2) that survive the shift
        acc = PuiseuxSeries(self.var, {Fraction(0): ONE}, None)
        term = PuiseuxSeries(self.var, {Fraction(0): ONE}, None)
        coeff = Fraction(1)
        j = 0
        while not term.is_zero():
            j += 1
            coeff = coeff * (Fraction(1, 2) - (j - 1)) / j  # binom(1/2, j)
            term = term * h
            tv = term.valuation()
            if tv is None or tv > need:
                break
            term = term.truncate(need)
            acc = acc + term.scale(con(coeff))
        t_acc = _tmin(need, h_trunc)
        acc = PuiseuxSeries(self.var, acc.terms, t_acc)
        return acc.scale(sqrt(c0)).shift(v / 2)

    def pow_frac(self, e: Fraction, target: Optional[Fraction]) -> "PuiseuxSeries":
        if e.denominator == 1:
            return self.powi(int(e), target)
        s = self.sqrt(target)
        return s.powi(e.numerator, target)

    # -- conversions -------------------------------------------------------

    def as_expr(self) -> Expr:
        v = sym(self.var)
        return add(*[mul(c, pow_(v, k)) for k, c in self.terms.items()])

    def eval_at(self, value: Expr) -> Expr:
        """Substitute a concrete value for the series variable."""
        return substitute(self.as_expr(), {self.var: con(value)})


def series_const(var: str, e: Expr) -> PuiseuxSeries:
    e = con(e)
    return PuiseuxSeries(var, {} if e is ZERO else {Fraction(0): e}, None)


def _expand(e: Expr, var: str, target: Fraction, memo) -> PuiseuxSeries:
    got = memo.get(e)
    if got is not None:
        return got
    k = e.KIND
    if var not in e.free:
        s = series_const(var, e)
    elif k == 1:  # the variable itself
        s = PuiseuxSeries(var, {Fraction(1): ONE}, None)
    elif k == 4:
        s = series_const(var, ZERO)
        for a in e.args:
            s = s + _expand(a, var, target, memo)
    elif k == 3:
        s = PuiseuxSeries(var, {Fraction(0): ONE}, None)
        for a in e.args:
            s = s * _expand(a, var, target, memo)
    elif k == 2:
        s = _expand(e.base, var, target, memo).pow_frac(e.exp, target)
    else:  # pragma: no cover
        raise TypeError(f"cannot expand {e!r}")
    memo[e] = s
    return s


def puiseux_expand(e, order, var: str = "eps") -> PuiseuxSeries:
    """Expand through the given order (inclusive), retrying with extra
    working depth when intermediate truncation eats required terms."""
    e = con(e)
    order = Fraction(order)
    slack = Fraction(0)
    for _ in range(7):
        s = _expand(e, var, order + slack, {})
        if s.trunc is None or s.trunc >= order:
            return s.truncate(order)
        slack = slack + (order - s.trunc) + 4
    raise EssentialSingularity(f"expansion of {e!r} did not stabilize at order {order}")


def puiseux_auto(e, window: int = 8, var: str = "eps") -> PuiseuxSeries:
    """Expand through (leading exponent + window), the default policy."""
    e = con(e)
    target = Fraction(4)
    for _ in range(6):
        s = _expand(e, var, target, {})
        v = s.valuation()
        if v is not None:
            return puiseux_expand(e, v + window, var)
        if s.trunc is None:
            return s  # identically zero
        target = target * 2
    raise EssentialSingularity(f"could not find the leading exponent of {e!r}")
