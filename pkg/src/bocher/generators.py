"""The so(5, C) conformal generators and their chart realizations.

Abstract generators L_ab = x_a d_b - x_b d_a (1 <= a < b <= 5) act on the
pentaspherical null cone.  On flat space they realize as the conformal
algebra of the Laplacian, including the conformal-weight terms (the bare
x in K_1 and the 1/2 in D): these arise from the degree -1/2 homogeneous
representation and are verified in the test suite, not assumed.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Dict, List, Tuple

from .diffop import DiffOp, Word, gauge_conjugate_power, realize_word, watom, wfun, wscale
from .expr import Expr, ONE, add, con, div, gauss, mul, pow_, sub, substitute, sym, symbols
from .field import QC, QC_I
from .geometry import FLAT, FLAT_OF_SPHERE, SPHERE, SPHERE_OF_FLAT

_I = gauss(0, 1)
_X, _Y, _Z = symbols("x y z")
_R2 = add(_X ** 2, _Y ** 2, _Z ** 2)

L_PAIRS: Tuple[Tuple[int, int], ...] = (
    (1, 2), (1, 3), (1, 4), (1, 5), (2, 3), (2, 4), (2, 5), (3, 4), (3, 5), (4, 5),
)


def _d(name: str) -> DiffOp:
    return DiffOp.partial("flat", FLAT, name)


def _m(f) -> DiffOp:
    return DiffOp.mult("flat", FLAT, f)


def _rotation(a: str, b: str) -> DiffOp:
    return _d(b).scale(sym(a)) - _d(a).scale(sym(b))


def _euler() -> DiffOp:
    out = DiffOp.zero("flat", FLAT)
    for n in FLAT:
        out = out + _d(n).scale(sym(n))
    return out


def _special_conformal(n: str) -> DiffOp:
    """K_n = x_n - r^2 d_n + 2 x_n (x dx + y dy + z dz)."""
    xn = sym(n)
    return _m(xn) - _d(n).scale(_R2) + _euler().scale(2 * xn)


def flat_atoms() -> Dict[str, DiffOp]:
    """The ten flat conformal generators, keyed by their display names."""
    e = _euler()
    return {
        "dx": _d("x"),
        "dy": _d("y"),
        "dz": _d("z"),
        "J12": _rotation("x", "y"),
        "J13": _rotation("x", "z"),
        "J23": _rotation("y", "z"),
        "K1": _special_conformal("x"),
        "K2": _special_conformal("y"),
        "K3": _special_conformal("z"),
        "D": e + _m(con(Fraction(1, 2))),
    }


_FLAT_ATOMS = flat_atoms()


def flat_L(a: int, b: int) -> DiffOp:
    """Flat realization of L_ab (antisymmetric in the indices)."""
    if a == b:
        return DiffOp.zero("flat", FLAT)
    if a > b:
        return flat_L(b, a).scale(-1)
    names = {1: "x", 2: "y", 3: "z"}
    if b <= 3:
        return _rotation(names[a], names[b])
    d = _FLAT_ATOMS["d" + names[a]] if a <= 3 else None
    if b == 4:
        if a <= 3:
            k = _FLAT_ATOMS["K" + str(a)]
            return (d + k).scale(con(Fraction(1, 2)))
        # (4,5)
    if b == 5:
        if a <= 3:
            k = _FLAT_ATOMS["K" + str(a)]
            return (d - k).scale(mul(con(Fraction(-1, 2)), _I))
        if a == 4:
            return _FLAT_ATOMS["D"].scale(mul(-1, _I))
    raise ValueError((a, b))


FLAT_L: Dict[Tuple[int, int], DiffOp] = {p: flat_L(*p) for p in L_PAIRS}


# words: flat atoms as L-combinations (for contraction of symmetries)
def _lw(a: int, b: int) -> Word:
    if a < b:
        return watom(f"L{a}{b}")
    return wscale(-1, watom(f"L{b}{a}"))


FLAT_ATOM_TO_L: Dict[str, Word] = {
    "dx": _lw(1, 4) + wscale(_I, _lw(1, 5)),
    "dy": _lw(2, 4) + wscale(_I, _lw(2, 5)),
    "dz": _lw(3, 4) + wscale(_I, _lw(3, 5)),
    "J12": _lw(1, 2),
    "J13": _lw(1, 3),
    "J23": _lw(2, 3),
    "K1": _lw(1, 4) - wscale(_I, _lw(1, 5)),
    "K2": _lw(2, 4) - wscale(_I, _lw(2, 5)),
    "K3": _lw(3, 4) - wscale(_I, _lw(3, 5)),
    "D": wscale(_I, _lw(4, 5)),
}

# sphere atoms J{a}{b} = s_a d_b - s_b d_a, via the dictionary
# L_kl = J_kl (k < l <= 3), L_l4 = J_4l, L_l5 = -i d_l, L_45 = i d_4
SPHERE_ATOM_TO_L: Dict[str, Word] = {
    "J12": _lw(1, 2),
    "J13": _lw(1, 3),
    "J23": _lw(2, 3),
    "J14": wscale(-1, _lw(1, 4)),
    "J24": wscale(-1, _lw(2, 4)),
    "J34": wscale(-1, _lw(3, 4)),
}


def sphere_atom_flat() -> Dict[str, DiffOp]:
    """Flat realizations of the sphere rotations (weight -1/2 transport)."""
    out = {}
    for name, w in SPHERE_ATOM_TO_L.items():
        out[name] = realize_word(w, {f"L{a}{b}": FLAT_L[(a, b)] for a, b in L_PAIRS})
    return out


_SPHERE_ATOM_FLAT = sphere_atom_flat()

OMEGA = div(2, _R2 + 1)  # sphere metric = OMEGA^2 * flat


def sphere_tangent_pullback(field: DiffOp) -> DiffOp:
    """Plain pullback of a first-order operator tangent to the sphere."""
    if field.order() > 1:
        raise ValueError("tangent pullback applies to first-order fields")
    comps = []
    for n in FLAT:
        g = field.apply(FLAT_OF_SPHERE[n])
        comps.append(substitute(g, SPHERE_OF_FLAT))
    n_idx = len(SPHERE)
    zero_order = substitute(field.coefficient((0,) * n_idx), SPHERE_OF_FLAT)
    out = DiffOp.mult("flat", FLAT, zero_order)
    for n, g in zip(FLAT, comps):
        out = out + DiffOp.partial("flat", FLAT, n).scale(g)
    return out


def sphere_field(a: int, b: int) -> DiffOp:
    """J_ab = s_a d_b - s_b d_a as a concrete operator on the s-chart."""
    sa, sb = sym(f"s{a}"), sym(f"s{b}")
    da = DiffOp.partial("sphere", SPHERE, f"s{a}")
    db = DiffOp.partial("sphere", SPHERE, f"s{b}")
    return db.scale(sa) - da.scale(sb)


def sphere_word_to_flat(word: Word) -> DiffOp:
    """Transport a sphere operator word to the Cartesian chart."""
    return realize_word(
        word,
        _SPHERE_ATOM_FLAT,
        fmap=lambda f: substitute(f, SPHERE_OF_FLAT),
    )


def flat_word_realize(word: Word, extra_subs=None) -> DiffOp:
    fmap = None
    if extra_subs:
        fmap = lambda f: substitute(f, extra_subs)
    return realize_word(word, _FLAT_ATOMS, fmap=fmap)


def word_to_L_poly(word: Word, table: Dict[str, Word]) -> Word:
    """Replace chart atoms by their L-combinations, keeping functions."""
    if word.kind == "atom":
        return table[word.payload]
    if word.kind == "fun":
        return word
    if word.kind == "scale":
        c, inner = word.payload
        return Word("scale", (c, word_to_L_poly(inner, table)))
    return Word(word.kind, tuple(word_to_L_poly(p, table) for p in word.payload))


def so5_structure_pairs():
    """Expected commutators [L_ab, L_cd] = d_bc L_ad + d_ad L_bc - d_ac L_bd - d_bd L_ac."""
    out = []
    for i, (a, b) in enumerate(L_PAIRS):
        for (c, d) in L_PAIRS[i + 1:]:
            terms: List[Tuple[int, Tuple[int, int]]] = []

            def put(sign: int, p: int, q: int):
                if p == q:
                    return
                if p < q:
                    terms.append((sign, (p, q)))
                else:
                    terms.append((-sign, (q, p)))

            if b == c:
                put(1, a, d)
            if a == d:
                put(1, b, c)
            if a == c:
                put(-1, b, d)
            if b == d:
                put(-1, a, c)
            out.append(((a, b), (c, d), terms))
    return out
