"""Exact complex constants for the expression core.

Constants live in Q(i)[Z]/(1+Z+Z^2+Z^3+Z^4), i.e. Gaussian rationals
optionally extended by a primitive fifth root of unity Z.  Elements are
stored as Fraction tuples: length 2 = (re, im), length 8 = coefficients
of 1, Z, Z^2, Z^3 as (re, im) pairs.  The short form is a fast path;
arithmetic promotes only when Z is actually present.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Union

_F0 = Fraction(0)
_F1 = Fraction(1)

Rationalish = Union[int, Fraction]


class QC:
    """Exact element of Q(i, Z) with Z a primitive fifth root of unity."""

    __slots__ = ("c",)

    def __init__(self, c):
        self.c = c  # tuple of Fractions; len 2 (gaussian) or 8 (with Z part)

    # -- constructors -------------------------------------------------

    @staticmethod
    def make(re: Rationalish = 0, im: Rationalish = 0) -> "QC":
        return QC((Fraction(re), Fraction(im)))

    @staticmethod
    def from_z_coeffs(pairs) -> "QC":
        """Build from four (re, im) pairs for Z^0..Z^3, normalizing."""
        c = tuple(Fraction(v) for pair in pairs for v in pair)
        if len(c) != 8:
            raise ValueError("expected four (re, im) pairs")
        if all(v == 0 for v in c[2:]):
            return QC(c[:2])
        return QC(c)

    def _full(self):
        if len(self.c) == 8:
            return self.c
        return self.c + (_F0,) * 6

    @staticmethod
    def _norm(c8) -> "QC":
        if all(v == 0 for v in c8[2:]):
            return QC(tuple(c8[:2]))
        return QC(tuple(c8))

    # -- predicates ----------------------------------------------------

    def is_zero(self) -> bool:
        return all(v == 0 for v in self.c)

    def is_one(self) -> bool:
        return len(self.c) == 2 and self.c[0] == 1 and self.c[1] == 0

    def is_gaussian(self) -> bool:
        return len(self.c) == 2

    def is_rational(self) -> bool:
        return len(self.c) == 2 and self.c[1] == 0

    @property
    def re(self) -> Fraction:
        return self.c[0]

    @property
    def im(self) -> Fraction:
        return self.c[1]

    # -- arithmetic ----------------------------------------------------

    def __add__(self, other: "QC") -> "QC":
        a, b = self.c, other.c
        if len(a) == 2 and len(b) == 2:
            return QC((a[0] + b[0], a[1] + b[1]))
        a, b = self._full(), other._full()
        return QC._norm([x + y for x, y in zip(a, b)])

    def __sub__(self, other: "QC") -> "QC":
        a, b = self.c, other.c
        if len(a) == 2 and len(b) == 2:
            return QC((a[0] - b[0], a[1] - b[1]))
        a, b = self._full(), other._full()
        return QC._norm([x - y for x, y in zip(a, b)])

    def __neg__(self) -> "QC":
        return QC(tuple(-v for v in self.c))

    def __mul__(self, other: "QC") -> "QC":
        a, b = self.c, other.c
        if len(a) == 2 and len(b) == 2:
            ar, ai, br, bi = a[0], a[1], b[0], b[1]
            return QC((ar * br - ai * bi, ar * bi + ai * br))
        return QC._norm(_zmul(self._full(), other._full()))

    def inv(self) -> "QC":
        if self.is_zero():
            raise ZeroDivisionError("QC inverse of zero")
        if len(self.c) == 2:
            r, i = self.c
            d = r * r + i * i
            return QC((r / d, -i / d))
        return _zinv(self)

    def __truediv__(self, other: "QC") -> "QC":
        return self * other.inv()

    def __pow__(self, n: int) -> "QC":
        if n < 0:
            return self.inv() ** (-n)
        result = QC_ONE
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    # -- comparison / hashing -------------------------------------------

    def __eq__(self, other) -> bool:
        if not isinstance(other, QC):
            return NotImplemented
        if len(self.c) == len(other.c):
            return self.c == other.c
        return self._full() == other._full()

    def __hash__(self):
        return hash(self.c if len(self.c) == 2 else self._full())

    def sort_key(self):
        return self._full() if len(self.c) == 8 else self.c + (_F0,) * 6

    # -- numeric conversion ----------------------------------------------

    def to_complex(self) -> complex:
        v = complex(self.c[0], self.c[1])
        if len(self.c) == 8:
            z = complex(math.cos(2 * math.pi / 5), math.sin(2 * math.pi / 5))
            zp = z
            for k in range(1, 4):
                v += complex(self.c[2 * k], self.c[2 * k + 1]) * zp
                zp *= z
        return v

    def to_mpc(self, mp):
        """Evaluate with an mpmath context at its working precision."""

        def cv(f: Fraction):
            return mp.mpf(f.numerator) / f.denominator

        v = mp.mpc(cv(self.c[0]), cv(self.c[1]))
        if len(self.c) == 8:
            z = mp.expjpi(mp.mpf(2) / 5)
            zp = z
            for k in range(1, 4):
                v += mp.mpc(cv(self.c[2 * k]), cv(self.c[2 * k + 1])) * zp
                zp = zp * z
        return v

    def __repr__(self):
        if self.is_gaussian():
            return f"QC({self.c[0]}, {self.c[1]})"
        return f"QC{self.c}"


def _zmul(a, b):
    """Multiply degree-3 Z-polynomials with gaussian coefficients, reduce mod Phi_5."""
    acc = [[_F0, _F0] for _ in range(7)]
    for p in range(4):
        ar, ai = a[2 * p], a[2 * p + 1]
        if ar == 0 and ai == 0:
            continue
        for q in range(4):
            br, bi = b[2 * q], b[2 * q + 1]
            if br == 0 and bi == 0:
                continue
            t = acc[p + q]
            t[0] += ar * br - ai * bi
            t[1] += ar * bi + ai * br
    # Z^5 = 1, Z^6 = Z
    acc[0][0] += acc[5][0]
    acc[0][1] += acc[5][1]
    acc[1][0] += acc[6][0]
    acc[1][1] += acc[6][1]
    # Z^4 = -(1 + Z + Z^2 + Z^3)
    r4, i4 = acc[4]
    out = []
    for k in range(4):
        out.append(acc[k][0] - r4)
        out.append(acc[k][1] - i4)
    return out


def _gauss_inv(r, i):
    d = r * r + i * i
    return (r / d, -i / d)


def _zinv(q: QC) -> QC:
    """Invert via 4x4 Gaussian elimination over Q(i).

    Columns of M are the Z-coefficient vectors of q * Z^k; solve M x = e0.
    """
    cols = []
    zk = QC_ONE
    for _ in range(4):
        cols.append((q * zk)._full())
        zk = zk * QC_Z
    # augmented system over gaussian pairs
    mat = [[(cols[j][2 * r], cols[j][2 * r + 1]) for j in range(4)] for r in range(4)]
    rhs = [(_F1, _F0), (_F0, _F0), (_F0, _F0), (_F0, _F0)]
    n = 4
    for col in range(n):
        piv = next(r for r in range(col, n) if mat[r][col] != (_F0, _F0))
        mat[col], mat[piv] = mat[piv], mat[col]
        rhs[col], rhs[piv] = rhs[piv], rhs[col]
        pr, pi = _gauss_inv(*mat[col][col])
        for r in range(n):
            if r == col:
                continue
            fr, fi = mat[r][col]
            if fr == 0 and fi == 0:
                continue
            # factor = mat[r][col] / pivot
            cr = fr * pr - fi * pi
            ci = fr * pi + fi * pr
            for c in range(col, n):
                ar, ai = mat[col][c]
                br, bi = mat[r][c]
                mat[r][c] = (br - (cr * ar - ci * ai), bi - (cr * ai + ci * ar))
            ar, ai = rhs[col]
            br, bi = rhs[r]
            rhs[r] = (br - (cr * ar - ci * ai), bi - (cr * ai + ci * ar))
    out = []
    for r in range(n):
        pr, pi = _gauss_inv(*mat[r][r])
        br, bi = rhs[r]
        out.append((br * pr - bi * pi, br * pi + bi * pr))
    return QC.from_z_coeffs(out)


def sqrt_exact(q: QC):
    """Exact square root of a rational QC if it is a perfect square (times i for
    negative values); None otherwise."""
    if not q.is_rational():
        return None
    r = q.re
    if r == 0:
        return QC_ZERO
    neg = r < 0
    if neg:
        r = -r
    pn, pd = r.numerator, r.denominator
    sn, sd = math.isqrt(pn), math.isqrt(pd)
    if sn * sn != pn or sd * sd != pd:
        return None
    root = QC.make(Fraction(sn, sd))
    if neg:
        return root * QC_I
    return root


QC_ZERO = QC((_F0, _F0))
QC_ONE = QC((_F1, _F0))
QC_MINUS_ONE = QC((Fraction(-1), _F0))
QC_I = QC((_F0, _F1))
QC_TWO = QC((Fraction(2), _F0))
QC_HALF = QC((Fraction(1, 2), _F0))
QC_Z = QC((_F0, _F0, _F1, _F0, _F0, _F0, _F0, _F0))
# sqrt(5) = 1 + 2(Z + Z^4) = -1 - 2 Z^2 - 2 Z^3
QC_SQRT5 = QC.from_z_coeffs([(-1, 0), (0, 0), (-2, 0), (-2, 0)])
