"""Linear partial differential operators with expression coefficients.

Operators are kept in normal form: a map from derivative multi-indices to
coefficients, all derivatives to the right.  Composition is exact Leibniz
expansion; division by an operator with unit-Laplacian principal part
reduces symbols degree by degree through harmonic decomposition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import BadPrincipalPart, ChartMismatch, UnregisteredMap
from .expr import Expr, ONE, ZERO, add, con, differentiate, mul, pow_, sub, substitute, sym
from .numeric import DEFAULT_CONFIG, TestConfig, sample_matrix, zero_test_batch

MultiIndex = Tuple[int, ...]


class DiffOp:
    """Normal-ordered differential operator on a named coordinate chart."""

    __slots__ = ("chart", "coords", "terms")

    def __init__(self, chart: str, coords: Tuple[str, ...], terms: Dict[MultiIndex, Expr]):
        self.chart = chart
        self.coords = coords
        self.terms = {a: c for a, c in terms.items() if c is not ZERO}

    # -- constructors ---------------------------------------------------

    @staticmethod
    def zero(chart: str, coords) -> "DiffOp":
        return DiffOp(chart, tuple(coords), {})

    @staticmethod
    def mult(chart: str, coords, f) -> "DiffOp":
        f = con(f)
        n = len(coords)
        return DiffOp(chart, tuple(coords), {(0,) * n: f})

    @staticmethod
    def partial(chart: str, coords, name: str) -> "DiffOp":
        coords = tuple(coords)
        idx = [0] * len(coords)
        idx[coords.index(name)] = 1
        return DiffOp(chart, coords, {tuple(idx): ONE})

    # -- basic structure --------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def order(self) -> int:
        return max((sum(a) for a in self.terms), default=0)

    def coefficient(self, alpha: MultiIndex) -> Expr:
        return self.terms.get(tuple(alpha), ZERO)

    def items(self):
        return sorted(self.terms.items())

    def map_coeffs(self, fn: Callable[[Expr], Expr]) -> "DiffOp":
        return DiffOp(self.chart, self.coords, {a: fn(c) for a, c in self.terms.items()})

    def __eq__(self, other):
        if not isinstance(other, DiffOp):
            return NotImplemented
        return (
            self.chart == other.chart
            and self.coords == other.coords
            and self.terms == other.terms
        )

    def __repr__(self):
        bits = []
        for a, c in self.items():
            ds = "".join(
                f" d{n}" + (f"^{k}" if k > 1 else "")
                for n, k in zip(self.coords, a)
                if k
            )
            bits.append(f"({c!r}){ds}")
        return f"DiffOp[{self.chart}: " + (" + ".join(bits) or "0") + "]"

    # -- linear operations -------------------------------------------------

    def _check(self, other: "DiffOp"):
        if self.chart != other.chart or self.coords != other.coords:
            raise ChartMismatch(f"{self.chart} vs {other.chart}")

    def __add__(self, other: "DiffOp") -> "DiffOp":
        self._check(other)
        terms = dict(self.terms)
        for a, c in other.terms.items():
            terms[a] = add(terms[a], c) if a in terms else c
        return DiffOp(self.chart, self.coords, terms)

    def __sub__(self, other: "DiffOp") -> "DiffOp":
        return self + other.scale(-1)

    def __neg__(self) -> "DiffOp":
        return self.scale(-1)

    def scale(self, f) -> "DiffOp":
        f = con(f)
        if f is ZERO:
            return DiffOp.zero(self.chart, self.coords)
        return DiffOp(self.chart, self.coords, {a: mul(f, c) for a, c in self.terms.items()})

    # -- composition --------------------------------------------------------

    def apply(self, f) -> Expr:
        """Act on a scalar expression."""
        f = con(f)
        out = []
        for a, c in self.terms.items():
            g = f
            for name, k in zip(self.coords, a):
                for _ in range(k):
                    g = differentiate(g, name)
            out.append(mul(c, g))
        return add(*out)

    def compose(self, other: "DiffOp") -> "DiffOp":
        """Normal-ordered product self . other via Leibniz expansion."""
        self._check(other)
        n = len(self.coords)
        terms: Dict[MultiIndex, Expr] = {}
        for alpha, f in self.terms.items():
            subs = _sub_multi_indices(alpha)
            for beta, g in other.terms.items():
                for gamma, binom in subs:
                    dg = g
                    for i in range(n):
                        for _ in range(gamma[i]):
                            dg = differentiate(dg, self.coords[i])
                        if dg is ZERO:
                            break
                    if dg is ZERO:
                        continue
                    idx = tuple(alpha[i] - gamma[i] + beta[i] for i in range(n))
                    piece = mul(con(binom), f, dg)
                    if idx in terms:
                        terms[idx] = add(terms[idx], piece)
                    else:
                        terms[idx] = piece
        return DiffOp(self.chart, self.coords, terms)

    def commutator(self, other: "DiffOp") -> "DiffOp":
        return self.compose(other) - other.compose(self)

    def anticommutator(self, other: "DiffOp") -> "DiffOp":
        return self.compose(other) + other.compose(self)

    def power(self, k: int) -> "DiffOp":
        if k < 0:
            raise ValueError("negative operator power")
        out = DiffOp.mult(self.chart, self.coords, ONE)
        for _ in range(k):
            out = out.compose(self)
        return out

    # -- symbols ----------------------------------------------------------

    def full_symbol(self, momentum_prefix: str = "xi_") -> Expr:
        """The full classical symbol: derivatives replaced by momenta."""
        xis = [sym(momentum_prefix + n) for n in self.coords]
        out = []
        for a, c in self.terms.items():
            m = [c]
            for x, k in zip(xis, a):
                if k:
                    m.append(pow_(x, k))
            out.append(mul(*m))
        return add(*out)

    def substitute_coeffs(self, mapping) -> "DiffOp":
        return self.map_coeffs(lambda c: substitute(c, mapping))


_SUBIDX_CACHE: Dict[MultiIndex, list] = {}


def _sub_multi_indices(alpha: MultiIndex):
    """All gamma <= alpha with the product of binomial coefficients."""
    got = _SUBIDX_CACHE.get(alpha)
    if got is not None:
        return got
    out = [((), 1)]
    for a in alpha:
        out = [
            (g + (k,), b * math.comb(a, k))
            for g, b in out
            for k in range(a + 1)
        ]
    _SUBIDX_CACHE[alpha] = out
    return out


def laplacian(chart: str, coords) -> DiffOp:
    coords = tuple(coords)
    n = len(coords)
    terms = {}
    for i in range(n):
        idx = [0] * n
        idx[i] = 2
        terms[tuple(idx)] = ONE
    return DiffOp(chart, coords, terms)


# ---------------------------------------------------------------------------
# harmonic reduction of symbols modulo sum(xi^2)


def _monomials(n: int, d: int) -> List[MultiIndex]:
    if n == 1:
        return [(d,)]
    out = []
    for k in range(d, -1, -1):
        for rest in _monomials(n - 1, d - k):
            out.append((k,) + rest)
    return out


def _poly_laplacian(coeffs: Dict[MultiIndex, Expr], n: int) -> Dict[MultiIndex, Expr]:
    out: Dict[MultiIndex, Expr] = {}
    for a, c in coeffs.items():
        for i in range(n):
            if a[i] >= 2:
                idx = list(a)
                idx[i] -= 2
                idx = tuple(idx)
                piece = mul(con(a[i] * (a[i] - 1)), c)
                out[idx] = add(out[idx], piece) if idx in out else piece
    return {a: c for a, c in out.items() if c is not ZERO}


_HARMONIC_CACHE: Dict[Tuple[int, int], Tuple[list, list, list]] = {}


def _harmonic_tables(n: int, d: int):
    """Exact inverse of Q -> Delta(r^2 Q) on degree d-2 polynomials."""
    got = _HARMONIC_CACHE.get((n, d))
    if got is not None:
        return got
    lo = _monomials(n, d - 2)
    index = {m: i for i, m in enumerate(lo)}
    size = len(lo)
    mat = [[Fraction(0)] * size for _ in range(size)]
    for j, q in enumerate(lo):
        # r^2 * q, then its xi-Laplacian, both with integer coefficients
        for i in range(n):
            r2q = list(q)
            r2q[i] += 2
            r2q = tuple(r2q)
            for k in range(n):
                if r2q[k] >= 2:
                    tgt = list(r2q)
                    tgt[k] -= 2
                    mat[index[tuple(tgt)]][j] += r2q[k] * (r2q[k] - 1)
    inv = _fraction_inverse(mat)
    out = (lo, index, inv)
    _HARMONIC_CACHE[(n, d)] = out
    return out


def _fraction_inverse(mat):
    size = len(mat)
    aug = [row[:] + [Fraction(int(i == j)) for j in range(size)] for i, row in enumerate(mat)]
    for col in range(size):
        piv = next(r for r in range(col, size) if aug[r][col] != 0)
        aug[col], aug[piv] = aug[piv], aug[col]
        pv = aug[col][col]
        aug[col] = [v / pv for v in aug[col]]
        for r in range(size):
            if r != col and aug[r][col] != 0:
                f = aug[r][col]
                aug[r] = [v - f * w for v, w in zip(aug[r], aug[col])]
    return [row[size:] for row in aug]


def _check_unit_laplacian(h: DiffOp):
    n = len(h.coords)
    for a, c in h.terms.items():
        d = sum(a)
        if d > 2:
            raise BadPrincipalPart(f"order {d} term in divisor")
        if d == 2:
            if max(a) != 2:
                raise BadPrincipalPart(f"mixed second-order term {a}")
            if c is not ONE:
                raise BadPrincipalPart(f"non-unit Laplacian coefficient {c!r}")
    for i in range(n):
        idx = [0] * n
        idx[i] = 2
        if h.terms.get(tuple(idx)) is not ONE:
            raise BadPrincipalPart("divisor is missing part of the Laplacian")


def divide_by(c_op: DiffOp, h: DiffOp) -> Tuple[DiffOp, DiffOp]:
    """Write C = R . H + remainder with every symbol degree of the
    remainder harmonic in the momenta (hence not divisible by sum xi^2)."""
    c_op._check(h)
    _check_unit_laplacian(h)
    n = len(c_op.coords)
    work = dict(c_op.terms)
    quotient = DiffOp.zero(c_op.chart, c_op.coords)
    rem_terms: Dict[MultiIndex, Expr] = {}
    for d in range(c_op.order(), 1, -1):
        level = {a: c for a, c in work.items() if sum(a) == d and c is not ZERO}
        if not level:
            continue
        lo, index, inv = _harmonic_tables(n, d)
        lap = _poly_laplacian(level, n)
        rhs = [lap.get(m, ZERO) for m in lo]
        q_coeffs = []
        for row in inv:
            acc = []
            for f, c in zip(row, rhs):
                if f != 0 and c is not ZERO:
                    acc.append(mul(con(f), c))
            q_coeffs.append(add(*acc))
        q_op = DiffOp(c_op.chart, c_op.coords, {m: c for m, c in zip(lo, q_coeffs)})
        if not q_op.is_zero():
            quotient = quotient + q_op
            correction = q_op.compose(h)
            for a, cc in correction.terms.items():
                work[a] = sub(work.get(a, ZERO), cc)
        # what is left at degree d is the harmonic part
        for a in [a for a in work if sum(a) == d]:
            cc = work.pop(a)
            if cc is not ZERO:
                rem_terms[a] = add(rem_terms.get(a, ZERO), cc)
    for a, cc in work.items():
        if cc is not ZERO:
            rem_terms[a] = add(rem_terms.get(a, ZERO), cc)
    return quotient, DiffOp(c_op.chart, c_op.coords, rem_terms)


# ---------------------------------------------------------------------------
# gauge conjugation and pullback


def _gauge_shift(a: DiffOp, shifts: Sequence[Expr]) -> DiffOp:
    """Replace each derivative d_i by d_i + shifts[i] (normal ordered)."""
    coords = a.coords
    chart = a.chart
    shifted = [
        DiffOp.partial(chart, coords, nm) + DiffOp.mult(chart, coords, s)
        for nm, s in zip(coords, shifts)
    ]
    powers: List[List[DiffOp]] = [[DiffOp.mult(chart, coords, ONE)] for _ in coords]
    out = DiffOp.zero(chart, coords)
    for alpha, c in a.items():
        term = DiffOp.mult(chart, coords, c)
        for i, k in enumerate(alpha):
            while len(powers[i]) <= k:
                powers[i].append(powers[i][-1].compose(shifted[i]))
            term = term.compose(powers[i][k])
        out = out + term
    return out


def gauge_conjugate(a: DiffOp, r: Expr) -> DiffOp:
    """e^{-r} A e^{r}: each derivative is shifted by the derivative of r."""
    r = con(r)
    shifts = [differentiate(r, nm) for nm in a.coords]
    return _gauge_shift(a, shifts)


def gauge_conjugate_power(a: DiffOp, mu: Expr, weight: Fraction) -> DiffOp:
    """Conjugation by mu^weight; only d_i(log mu^weight) = w mu_i/mu enters."""
    mu = con(mu)
    w = con(Fraction(weight))
    inv = pow_(mu, -1)
    shifts = [mul(w, inv, differentiate(mu, nm)) for nm in a.coords]
    return _gauge_shift(a, shifts)


@dataclass(frozen=True)
class ChartMap:
    """x = phi(u): target chart coordinates as expressions over the source."""

    name: str
    x_chart: str
    x_coords: Tuple[str, ...]
    u_chart: str
    u_coords: Tuple[str, ...]
    x_of_u: Tuple[Expr, ...]
    registered: bool = True


def _matrix_inverse_expr(m: List[List[Expr]]) -> List[List[Expr]]:
    n = len(m)
    if n == 1:
        return [[pow_(m[0][0], -1)]]

    def det(rows):
        k = len(rows)
        if k == 1:
            return rows[0][0]
        if k == 2:
            return sub(mul(rows[0][0], rows[1][1]), mul(rows[0][1], rows[1][0]))
        acc = []
        for j in range(k):
            minor = [r[:j] + r[j + 1:] for r in rows[1:]]
            s = 1 if j % 2 == 0 else -1
            acc.append(mul(con(s), rows[0][j], det(minor)))
        return add(*acc)

    d = det(m)
    dinv = pow_(d, -1)
    out = [[ZERO] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            minor = [row[:i] + row[i + 1:] for k, row in enumerate(m) if k != j]
            s = 1 if (i + j) % 2 == 0 else -1
            out[i][j] = mul(con(s), det(minor), dinv)
    return out


def pullback(a: DiffOp, m: ChartMap) -> DiffOp:
    """Transport A to the source chart of the map: A' (f o phi) = (A f) o phi."""
    if not m.registered:
        raise UnregisteredMap(m.name)
    if a.chart != m.x_chart or a.coords != m.x_coords:
        raise ChartMismatch(f"operator on {a.chart}, map from {m.x_chart}")
    subs = dict(zip(m.x_coords, m.x_of_u))
    n = len(m.x_coords)
    jac = [
        [differentiate(m.x_of_u[i], m.u_coords[j]) for j in range(n)]
        for i in range(n)
    ]
    jinv = _matrix_inverse_expr(jac)  # jinv[i][j] = du_j/dx_i at u
    fields = []
    for i in range(n):
        f = DiffOp.zero(m.u_chart, m.u_coords)
        for j in range(n):
            f = f + DiffOp.partial(m.u_chart, m.u_coords, m.u_coords[j]).scale(jinv[i][j])
        fields.append(f)
    powers: List[List[DiffOp]] = [[DiffOp.mult(m.u_chart, m.u_coords, ONE)] for _ in range(n)]
    out = DiffOp.zero(m.u_chart, m.u_coords)
    for alpha, c in a.items():
        term = DiffOp.mult(m.u_chart, m.u_coords, substitute(c, subs))
        for i, k in enumerate(alpha):
            while len(powers[i]) <= k:
                powers[i].append(powers[i][-1].compose(fields[i]))
            term = term.compose(powers[i][k])
        out = out + term
    return out


# ---------------------------------------------------------------------------
# symmetry verification


@dataclass
class SymmetryVerdict:
    kind: str  # 'ordinary' | 'conformal' | 'fail'
    cofactor: Optional[DiffOp]
    residual: float
    detail: str = ""

    @property
    def ok(self) -> bool:
        return self.kind in ("ordinary", "conformal")


def _max_coeff_residual(op: DiffOp, cfg: TestConfig) -> float:
    coeffs = [c for _, c in op.items()]
    if not coeffs:
        return 0.0
    try:
        vals, _ = sample_matrix(coeffs, cfg=cfg, n_points=min(cfg.points, 10), tag="residual")
    except Exception:
        return float("inf")
    return float(np.max(np.abs(vals))) if vals.size else 0.0


def conformal_symmetry_check(
    s_op: DiffOp, h_op: DiffOp, cfg: TestConfig = DEFAULT_CONFIG
) -> SymmetryVerdict:
    """Classify [S, H]: zero -> ordinary; R.H -> conformal with cofactor R."""
    c = s_op.commutator(h_op)
    if c.is_zero():
        return SymmetryVerdict("ordinary", DiffOp.zero(s_op.chart, s_op.coords), 0.0)
    coeffs = [cc for _, cc in c.items()]
    if all(zero_test_batch(coeffs, cfg=cfg)):
        return SymmetryVerdict("ordinary", DiffOp.zero(s_op.chart, s_op.coords), 0.0)
    quotient, rem = divide_by(c, h_op)
    if rem.is_zero() or all(zero_test_batch([cc for _, cc in rem.items()], cfg=cfg)):
        return SymmetryVerdict("conformal", quotient, 0.0)
    res = _max_coeff_residual(rem, cfg)
    return SymmetryVerdict("fail", None, res, "commutator is not a multiple of H")


def symbol_rank(ops: Sequence[DiffOp], cfg: TestConfig = DEFAULT_CONFIG) -> int:
    """Maximal sampled rank of the phase-space gradients of the full symbols."""
    if not ops:
        return 0
    coords = ops[0].coords
    for o in ops:
        if o.coords != coords:
            raise ChartMismatch("symbol_rank needs a shared chart")
    grad_vars = list(coords) + ["xi_" + n for n in coords]
    grads: List[List[Expr]] = []
    for o in ops:
        p = o.full_symbol()
        grads.append([differentiate(p, v) for v in grad_vars])
    flat = [g for row in grads for g in row]
    vals, points = sample_matrix(
        flat, cfg=cfg, n_points=cfg.points, extra_vars=grad_vars, tag="symbol-rank"
    )
    k, w = len(ops), len(grad_vars)
    best = 0
    for p in range(vals.shape[0]):
        m = vals[p].reshape(k, w)
        sv = np.linalg.svd(m, compute_uv=False)
        if sv[0] == 0:
            continue
        th = 1e-9 * sv[0]
        marginal = np.any((sv > th / 1e3) & (sv < th * 1e3))
        if marginal:
            import mpmath

            with mpmath.workdps(cfg.digits + 10):
                mp = mpmath.mp
                env = {kk: vv.to_mpc(mp) for kk, vv in points[p].items()}
                from .numeric import _eval_mp

                hm = mpmath.matrix(k, w)
                for ii in range(k):
                    for jj in range(w):
                        hm[ii, jj] = _eval_mp(grads[ii][jj], env, mp, {})
                sv_h = mpmath.svd_c(hm, compute_uv=False)
                svals = sorted((float(abs(x)) for x in sv_h), reverse=True)
            th = 1e-9 * svals[0] if svals and svals[0] > 0 else 0.0
            rank = sum(1 for x in svals if x > th)
        else:
            rank = int(np.sum(sv > th))
        best = max(best, rank)
    return best


# ---------------------------------------------------------------------------
# operator words: chart-independent combinations of named generators


class Word:
    """AST over generator atoms, scalar multiples and operator products."""

    __slots__ = ("kind", "payload")

    def __init__(self, kind: str, payload):
        self.kind = kind
        self.payload = payload

    def __add__(self, other):
        return Word("sum", (self, _as_word(other)))

    __radd__ = __add__

    def __sub__(self, other):
        return Word("sum", (self, Word("scale", (con(-1), _as_word(other)))))

    def __mul__(self, other):
        if isinstance(other, Word):
            return Word("prod", (self, other))
        return Word("scale", (con(other), self))

    def __rmul__(self, other):
        return Word("scale", (con(other), self))

    def __neg__(self):
        return Word("scale", (con(-1), self))

    def __repr__(self):
        if self.kind == "atom":
            return self.payload
        if self.kind == "fun":
            return f"f[{self.payload!r}]"
        if self.kind == "scale":
            return f"({self.payload[0]!r})*({self.payload[1]!r})"
        sep = " + " if self.kind == "sum" else " . "
        return "(" + sep.join(repr(p) for p in self.payload) + ")"


def _as_word(w) -> Word:
    if isinstance(w, Word):
        return w
    return wfun(con(w))


def watom(name: str) -> Word:
    return Word("atom", name)


def wfun(f) -> Word:
    return Word("fun", con(f))


def wadd(*ws) -> Word:
    ws = tuple(_as_word(w) for w in ws)
    return Word("sum", ws)


def wmul(*ws) -> Word:
    ws = tuple(_as_word(w) for w in ws)
    return Word("prod", ws)


def wscale(c, w) -> Word:
    return Word("scale", (con(c), _as_word(w)))


def wanticommutator(a, b) -> Word:
    a, b = _as_word(a), _as_word(b)
    return wadd(wmul(a, b), wmul(b, a))


def realize_word(
    w: Word,
    atoms: Dict[str, DiffOp],
    fmap: Optional[Callable[[Expr], Expr]] = None,
) -> DiffOp:
    """Interpret a word in a chart: atoms from the table, scalar functions
    transported through fmap (identity by default)."""
    some = next(iter(atoms.values()))
    chart, coords = some.chart, some.coords

    def go(node: Word) -> DiffOp:
        if node.kind == "atom":
            return atoms[node.payload]
        if node.kind == "fun":
            f = node.payload
            if fmap is not None:
                f = fmap(f)
            return DiffOp.mult(chart, coords, f)
        if node.kind == "scale":
            c, inner = node.payload
            cc = fmap(c) if (fmap is not None and c.free) else c
            return go(inner).scale(cc)
        parts = [go(p) for p in node.payload]
        if node.kind == "sum":
            out = parts[0]
            for p in parts[1:]:
                out = out + p
            return out
        out = parts[0]
        for p in parts[1:]:
            out = out.compose(p)
        return out

    return go(w)
