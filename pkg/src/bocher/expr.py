"""Immutable canonical expression trees over exact complex constants.

Grammar: constants in Q(i, Z), named symbols, sums, products, and powers
with rational exponents of denominator 1 or 2 (square roots).  Canonical
form is a sum of coefficient-merged terms, each a product of
exponent-merged power factors, with positive integer powers of sums
expanded and products distributed over sums.  Structural equality is
object identity: all nodes are interned.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Dict, Iterable, Union

from .field import (
    QC,
    QC_I,
    QC_MINUS_ONE,
    QC_ONE,
    QC_Z,
    QC_ZERO,
    sqrt_exact,
)


class GrammarError(ValueError):
    """Raised for exponents outside the (1/2)Z lattice."""


_HALF = Fraction(1, 2)
_EMPTY = frozenset()


class Expr:
    __slots__ = ("_key", "free", "__weakref__")
    KIND = -1

    def sort_key(self):
        k = self._key
        if k is None:
            k = self._make_key()
            self._key = k
        return k

    # arithmetic sugar -------------------------------------------------

    def __add__(self, other):
        return add(self, con(other))

    __radd__ = __add__

    def __sub__(self, other):
        return add(self, neg(con(other)))

    def __rsub__(self, other):
        return add(con(other), neg(self))

    def __mul__(self, other):
        return mul(self, con(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return mul(self, pow_(con(other), -1))

    def __rtruediv__(self, other):
        return mul(con(other), pow_(self, -1))

    def __pow__(self, e):
        return pow_(self, e)

    def __neg__(self):
        return neg(self)

    def __repr__(self):
        from .sexpr import dumps

        return dumps(self)


class Const(Expr):
    __slots__ = ("qc",)
    KIND = 0

    def _make_key(self):
        return (0, self.qc.sort_key())


class Sym(Expr):
    __slots__ = ("name",)
    KIND = 1

    def _make_key(self):
        return (1, self.name)


class Pow(Expr):
    __slots__ = ("base", "exp")
    KIND = 2

    def _make_key(self):
        return (2, self.base.sort_key(), (self.exp.numerator, self.exp.denominator))


class Mul(Expr):
    __slots__ = ("args",)
    KIND = 3

    def _make_key(self):
        return (3, tuple(a.sort_key() for a in self.args))


class Add(Expr):
    __slots__ = ("args",)
    KIND = 4

    def _make_key(self):
        return (4, tuple(a.sort_key() for a in self.args))


_CACHE: Dict[tuple, Expr] = {}


def _new_const(qc: QC) -> Const:
    key = (0, qc)
    e = _CACHE.get(key)
    if e is None:
        e = Const.__new__(Const)
        e.qc = qc
        e._key = None
        e.free = _EMPTY
        _CACHE[key] = e
    return e


def _new_sym(name: str) -> Sym:
    key = (1, name)
    e = _CACHE.get(key)
    if e is None:
        e = Sym.__new__(Sym)
        e.name = name
        e._key = None
        e.free = frozenset((name,))
        _CACHE[key] = e
    return e


def _new_pow(base: Expr, exp: Fraction) -> Pow:
    key = (2, base, exp)
    e = _CACHE.get(key)
    if e is None:
        e = Pow.__new__(Pow)
        e.base = base
        e.exp = exp
        e._key = None
        e.free = base.free
        _CACHE[key] = e
    return e


def _new_mul(args: tuple) -> Mul:
    key = (3, args)
    e = _CACHE.get(key)
    if e is None:
        e = Mul.__new__(Mul)
        e.args = args
        e._key = None
        fs = frozenset()
        for a in args:
            fs |= a.free
        e.free = fs
        _CACHE[key] = e
    return e


def _new_add(args: tuple) -> Add:
    key = (4, args)
    e = _CACHE.get(key)
    if e is None:
        e = Add.__new__(Add)
        e.args = args
        e._key = None
        fs = frozenset()
        for a in args:
            fs |= a.free
        e.free = fs
        _CACHE[key] = e
    return e


ZERO = _new_const(QC_ZERO)
ONE = _new_const(QC_ONE)
MINUS_ONE = _new_const(QC_MINUS_ONE)
I_UNIT = _new_const(QC_I)
Z_ROOT = _new_const(QC_Z)
HALF_EXPR = _new_const(QC.make(Fraction(1, 2)))


Exprish = Union["Expr", int, Fraction, QC]


def con(v: Exprish) -> Expr:
    """Lift a python number / QC to an Expr (identity on Expr)."""
    if isinstance(v, Expr):
        return v
    if isinstance(v, QC):
        return _new_const(v)
    if isinstance(v, (int, Fraction)):
        return _new_const(QC.make(v))
    raise TypeError(f"cannot lift {type(v)!r} to Expr")


def sym(name: str) -> Sym:
    return _new_sym(name)


def symbols(names: str):
    return tuple(_new_sym(n) for n in names.split())


def gauss(re=0, im=0) -> Expr:
    return _new_const(QC.make(Fraction(re), Fraction(im)))


def _coeff_mono(e: Expr):
    """Split a canonical non-Add term into (QC coefficient, monomial)."""
    k = e.KIND
    if k == 0:
        return e.qc, ONE
    if k == 3:
        first = e.args[0]
        if first.KIND == 0:
            rest = e.args[1:]
            if len(rest) == 1:
                return first.qc, rest[0]
            return first.qc, _new_mul(rest)
    return QC_ONE, e


def _attach_coeff(qc: QC, mono: Expr) -> Expr:
    if mono is ONE:
        return _new_const(qc)
    if qc.is_one():
        return mono
    c = _new_const(qc)
    if mono.KIND == 3:
        return _new_mul((c,) + mono.args)
    return _new_mul((c, mono))


def add(*args: Exprish) -> Expr:
    terms: Dict[Expr, QC] = {}
    order: list = []

    def absorb(e):
        if e.KIND == 4:
            for a in e.args:
                absorb(a)
            return
        qc, mono = _coeff_mono(e)
        if mono in terms:
            terms[mono] = terms[mono] + qc
        else:
            terms[mono] = qc
            order.append(mono)

    for a in args:
        e = con(a)
        if e is ZERO:
            continue
        absorb(e)

    out = []
    for mono in order:
        qc = terms[mono]
        if qc.is_zero():
            continue
        out.append(_attach_coeff(qc, mono))
    if not out:
        return ZERO
    if len(out) == 1:
        return out[0]
    out.sort(key=lambda t: t.sort_key())
    return _new_add(tuple(out))


def _base_exp(e: Expr):
    if e.KIND == 2:
        return e.base, e.exp
    return e, Fraction(1)


def _pow_const(qc: QC, exp: Fraction):
    """Exact power of a constant, or None when it must stay symbolic."""
    if exp.denominator == 1:
        return _new_const(qc ** int(exp))
    k = exp.numerator  # exponent k/2
    s = sqrt_exact(qc)
    if s is not None:
        return _new_const(s ** k)
    return None


def mul(*args: Exprish) -> Expr:
    coeff = QC_ONE
    bases: Dict[Expr, Fraction] = {}
    order: list = []
    adds: list = []
    pending = [con(a) for a in args]

    def put(b: Expr, e: Fraction):
        if b in bases:
            bases[b] = bases[b] + e
        else:
            bases[b] = e
            order.append(b)

    while pending:
        a = pending.pop()
        k = a.KIND
        if k == 0:
            coeff = coeff * a.qc
            if coeff.is_zero():
                return ZERO
        elif k == 3:
            pending.extend(a.args)
        elif k == 4:
            adds.append(a)
        else:
            b, e = _base_exp(a)
            put(b, e)

    # rebuild factors; exponent merging may re-expand (e.g. u^-1 * u^3)
    factors = []
    re_adds = list(adds)
    for b in order:
        e = bases[b]
        if e == 0:
            continue
        f = pow_(b, e)
        kf = f.KIND
        if kf == 0:
            coeff = coeff * f.qc
            if coeff.is_zero():
                return ZERO
        elif kf == 4:
            re_adds.append(f)
        elif kf == 3:
            cf, mono = _coeff_mono(f)
            coeff = coeff * cf
            if mono.KIND == 3:
                factors.extend(mono.args)
            elif mono is not ONE:
                factors.append(mono)
        else:
            factors.append(f)

    if re_adds:
        # distribute the product over every Add factor
        kernel = _assemble_mul(coeff, factors)
        terms = [kernel]
        for s in re_adds:
            terms = [mul(t, a) for t in terms for a in s.args]
        return add(*terms)

    # merge same-exponent half powers of positive rationals: 2^(1/2)*3^(1/2) -> 6^(1/2)
    halfs: Dict[Fraction, QC] = {}
    rest = []
    for f in factors:
        if f.KIND == 2 and f.base.KIND == 0 and f.exp.denominator == 2:
            qc = f.base.qc
            if qc.is_rational() and qc.re > 0:
                halfs[f.exp] = halfs.get(f.exp, QC_ONE) * qc
                continue
        rest.append(f)
    for e, qc in sorted(halfs.items()):
        p = _pow_const(qc, e)
        if p is not None:
            if p.KIND == 0:
                coeff = coeff * p.qc
            else:
                rest.append(p)
        else:
            rest.append(_new_pow(_new_const(qc), e))

    return _assemble_mul(coeff, rest)


def _assemble_mul(coeff: QC, factors: list) -> Expr:
    if coeff.is_zero():
        return ZERO
    if not factors:
        return _new_const(coeff)
    factors = sorted(factors, key=lambda f: f.sort_key())
    if coeff.is_one():
        if len(factors) == 1:
            return factors[0]
        return _new_mul(tuple(factors))
    return _new_mul((_new_const(coeff),) + tuple(factors))


def pow_(base: Exprish, exp) -> Expr:
    b = con(base)
    if not isinstance(exp, Fraction):
        exp = Fraction(exp)
    if exp.denominator not in (1, 2):
        raise GrammarError(f"exponent {exp} outside the (1/2)Z lattice")
    if exp == 0:
        return ONE
    if exp == 1:
        return b
    k = b.KIND
    if k == 0:
        p = _pow_const(b.qc, exp)
        if p is not None:
            return p
        return _new_pow(b, exp)
    if k == 2:
        if exp.denominator == 1:
            # (b^e0)^n = b^(e0 n); valid for half-integer e0 by the
            # convention b^(k/2) := (sqrt b)^k
            return pow_(b.base, b.exp * exp)
        return _new_pow(b, exp)
    if k == 3:
        if exp.denominator == 1:
            return mul(*[pow_(a, exp) for a in b.args])
        # sqrt of a product: only a positive-rational coefficient may be
        # pulled out without touching branch choices
        cf, mono = _coeff_mono(b)
        if not cf.is_one() and cf.is_rational() and cf.re > 0:
            s = sqrt_exact(cf)
            if s is not None:
                return mul(_new_const(s ** exp.numerator), _new_pow(mono, exp))
        return _new_pow(b, exp)
    if k == 4:
        if exp.denominator == 1 and exp > 0:
            n = int(exp)
            out = b
            for _ in range(n - 1):
                out = mul(out, b)
            return out
        return _new_pow(b, exp)
    return _new_pow(b, exp)


def sqrt(e: Exprish) -> Expr:
    return pow_(e, _HALF)


def neg(e: Exprish) -> Expr:
    return mul(MINUS_ONE, con(e))


def sub(a: Exprish, b: Exprish) -> Expr:
    return add(con(a), neg(b))


def div(a: Exprish, b: Exprish) -> Expr:
    return mul(con(a), pow_(con(b), -1))


_DIFF_MEMO: Dict[tuple, Expr] = {}


def differentiate(e: Exprish, v) -> Expr:
    """Exact partial derivative with respect to symbol v."""
    e = con(e)
    name = v.name if isinstance(v, Sym) else str(v)
    return _diff(e, name)


def _diff(e: Expr, name: str) -> Expr:
    if name not in e.free:
        return ZERO
    key = (e, name)
    r = _DIFF_MEMO.get(key)
    if r is not None:
        return r
    k = e.KIND
    if k == 1:
        r = ONE
    elif k == 4:
        r = add(*[_diff(a, name) for a in e.args])
    elif k == 3:
        parts = []
        args = e.args
        for i, a in enumerate(args):
            if name not in a.free:
                continue
            parts.append(mul(*(args[:i] + (_diff(a, name),) + args[i + 1:])))
        r = add(*parts)
    elif k == 2:
        r = mul(con(QC.make(e.exp)), pow_(e.base, e.exp - 1), _diff(e.base, name))
    else:
        r = ZERO
    _DIFF_MEMO[key] = r
    return r


def substitute(e: Exprish, mapping) -> Expr:
    """Simultaneous substitution symbol -> Expr, then canonicalization."""
    e = con(e)
    table = {}
    for k, v in mapping.items():
        name = k.name if isinstance(k, Sym) else str(k)
        table[name] = con(v)
    if not table:
        return e
    memo: Dict[Expr, Expr] = {}
    return _subs(e, table, memo)


def _subs(e: Expr, table, memo) -> Expr:
    if not (e.free & table.keys()):
        return e
    r = memo.get(e)
    if r is not None:
        return r
    k = e.KIND
    if k == 1:
        r = table.get(e.name, e)
    elif k == 4:
        r = add(*[_subs(a, table, memo) for a in e.args])
    elif k == 3:
        r = mul(*[_subs(a, table, memo) for a in e.args])
    elif k == 2:
        r = pow_(_subs(e.base, table, memo), e.exp)
    else:
        r = e
    memo[e] = r
    return r


def rebuild(e: Expr) -> Expr:
    """Re-run canonicalization bottom-up (idempotence check helper)."""
    k = e.KIND
    if k == 4:
        return add(*[rebuild(a) for a in e.args])
    if k == 3:
        return mul(*[rebuild(a) for a in e.args])
    if k == 2:
        return pow_(rebuild(e.base), e.exp)
    return e


def node_count(e: Expr) -> int:
    k = e.KIND
    if k in (0, 1):
        return 1
    if k == 2:
        return 1 + node_count(e.base)
    return 1 + sum(node_count(a) for a in e.args)


def free_symbols(e: Expr) -> frozenset:
    return e.free
