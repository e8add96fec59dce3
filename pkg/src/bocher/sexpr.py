"""Deterministic S-expression text form for expressions.

Grammar::

    expr     := rational | 'i' | 'Z' | symbol
              | '(' '+' expr+ ')'
              | '(' '*' expr+ ')'
              | '(' '^' expr rational ')'
              | '(' 'sqrt' expr ')'
    rational := ['+'|'-'] digits ['/' digits]
    symbol   := letter (letter | digit | '_')*      (not 'i', 'Z', 'sqrt')

Parsing runs through the canonical constructors, so parse(dumps(e)) is
*the same interned node* as e.
"""

from __future__ import annotations

import re
from fractions import Fraction

from .expr import Add, Const, Expr, Mul, Pow, Sym, add, con, mul, pow_, sqrt, sym
from .field import QC

RESERVED = {"i", "Z", "sqrt"}
_SYMBOL_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_RATIONAL_RE = re.compile(r"^[+-]?\d+(/\d+)?$")


class ParseError(ValueError):
    pass


def _frac_text(f: Fraction) -> str:
    return str(f)


def _gauss_text(re_f: Fraction, im_f: Fraction) -> str:
    parts = []
    if re_f != 0:
        parts.append(_frac_text(re_f))
    if im_f != 0:
        if im_f == 1:
            parts.append("i")
        else:
            parts.append(f"(* {_frac_text(im_f)} i)")
    if not parts:
        return "0"
    if len(parts) == 1:
        return parts[0]
    return "(+ " + " ".join(parts) + ")"


def _const_text(qc: QC) -> str:
    if qc.is_gaussian():
        return _gauss_text(qc.re, qc.im)
    c = qc.sort_key()
    parts = []
    for k in range(4):
        re_f, im_f = c[2 * k], c[2 * k + 1]
        if re_f == 0 and im_f == 0:
            continue
        g = _gauss_text(re_f, im_f)
        if k == 0:
            parts.append(g)
        else:
            zpow = "Z" if k == 1 else f"(^ Z {k})"
            if g == "1":
                parts.append(zpow)
            else:
                parts.append(f"(* {g} {zpow})")
    if not parts:
        return "0"
    if len(parts) == 1:
        return parts[0]
    return "(+ " + " ".join(parts) + ")"


def dumps(e: Expr) -> str:
    k = e.KIND
    if k == 0:
        return _const_text(e.qc)
    if k == 1:
        return e.name
    if k == 2:
        b = dumps(e.base)
        if e.exp == Fraction(1, 2):
            return f"(sqrt {b})"
        return f"(^ {b} {_frac_text(e.exp)})"
    if k == 3:
        return "(* " + " ".join(dumps(a) for a in e.args) + ")"
    if k == 4:
        return "(+ " + " ".join(dumps(a) for a in e.args) + ")"
    raise TypeError(f"not an Expr: {e!r}")


def _tokenize(text: str):
    tokens = text.replace("(", " ( ").replace(")", " ) ").split()
    return tokens


def loads(text: str) -> Expr:
    tokens = _tokenize(text)
    if not tokens:
        raise ParseError("empty input")
    pos = [0]

    def parse_one() -> Expr:
        if pos[0] >= len(tokens):
            raise ParseError("unexpected end of input")
        tok = tokens[pos[0]]
        pos[0] += 1
        if tok == "(":
            head = tokens[pos[0]]
            pos[0] += 1
            args = []
            while tokens[pos[0]] != ")":
                args.append(parse_one())
                if pos[0] >= len(tokens):
                    raise ParseError("missing ')'")
            pos[0] += 1
            if head == "+":
                return add(*args)
            if head == "*":
                return mul(*args)
            if head == "sqrt":
                if len(args) != 1:
                    raise ParseError("sqrt takes one argument")
                return sqrt(args[0])
            if head == "^":
                if len(args) != 2:
                    raise ParseError("^ takes base and exponent")
                base, expo = args
                if not isinstance(expo, Const) or not expo.qc.is_rational():
                    raise ParseError("exponent must be rational")
                return pow_(base, Fraction(expo.qc.re))
            raise ParseError(f"unknown operator {head!r}")
        if tok == ")":
            raise ParseError("unexpected ')'")
        return parse_atom(tok)

    def parse_atom(tok: str) -> Expr:
        if _RATIONAL_RE.match(tok):
            return con(Fraction(tok))
        if tok == "i":
            return con(QC.make(0, 1))
        if tok == "Z":
            from .expr import Z_ROOT

            return Z_ROOT
        if _SYMBOL_RE.match(tok) and tok not in RESERVED:
            return sym(tok)
        raise ParseError(f"bad token {tok!r}")

    result = parse_one()
    if pos[0] != len(tokens):
        raise ParseError("trailing input")
    return result
