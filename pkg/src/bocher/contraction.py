"""The six special contractions of so(5, C) and their application.

Matrices are exact: entries are Laurent polynomials in the contraction
parameter over Q(i, Z).  Generator contraction (the ordered-basis limit)
runs in exact arithmetic; potential contraction follows the series
procedure: substitute, expand, split each power's coefficient into
independent functions, choose independent coefficient vectors greedily in
increasing power order, solve for the parameter scaling, take the limit.
"""

from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .diffop import DiffOp, Word, realize_word
from .errors import (
    DegenerateBasis,
    InconclusiveSampling,
    NotSpecial,
    RankDeficient,
    ReconstructionError,
    UnknownKind,
)
from .expr import Expr, ONE, ZERO, add, con, differentiate, mul, pow_, sub, substitute, sym
from .field import QC, QC_I, QC_MINUS_ONE, QC_ONE, QC_SQRT5, QC_Z, QC_ZERO
from .generators import FLAT_L, L_PAIRS
from .geometry import FLAT, PENTA, PENTA_OF_FLAT, PotentialFamily, potential_to_penta
from .numeric import (
    DEFAULT_CONFIG,
    TestConfig,
    identity_test,
    reconstruct_qc,
    sample_matrix,
)
from .series import PuiseuxSeries, puiseux_auto, puiseux_expand

EPS = "eps"

KINDS = ("[2111]", "[221]", "[311]", "[32]", "[41]", "[5]")

# Laurent polynomials in eps: {exponent -> QC}
LP = Dict[int, QC]


def lp(d) -> LP:
    return {int(k): v for k, v in d.items() if not v.is_zero()}


def lp_add(a: LP, b: LP) -> LP:
    out = dict(a)
    for k, v in b.items():
        w = out.get(k)
        out[k] = v if w is None else w + v
    return {k: v for k, v in out.items() if not v.is_zero()}


def lp_mul(a: LP, b: LP) -> LP:
    out: LP = {}
    for ka, va in a.items():
        for kb, vb in b.items():
            k = ka + kb
            p = va * vb
            w = out.get(k)
            out[k] = p if w is None else w + p
    return {k: v for k, v in out.items() if not v.is_zero()}


def lp_scale(a: LP, c: QC) -> LP:
    if c.is_zero():
        return {}
    return {k: v * c for k, v in a.items()}


def lp_neg(a: LP) -> LP:
    return {k: -v for k, v in a.items()}


def lp_shift(a: LP, d: int) -> LP:
    return {k + d: v for k, v in a.items()}


LP_ZERO: LP = {}
LP_ONE: LP = {0: QC_ONE}


def lp_to_expr(a: LP) -> Expr:
    e = sym(EPS)
    return add(*[mul(con(v), pow_(e, k)) for k, v in sorted(a.items())])


def lp_is_one(a: LP) -> bool:
    return list(a.items()) == [(0, QC_ONE)] or a == {0: QC_ONE}


def lp_key(a: LP):
    return tuple(sorted((k, v.sort_key()) for k, v in a.items()))


def mat_mul(a, b):
    n = len(a)
    return [
        [
            _lp_sum([lp_mul(a[i][k], b[k][j]) for k in range(n)])
            for j in range(n)
        ]
        for i in range(n)
    ]


def _lp_sum(parts: List[LP]) -> LP:
    out: LP = {}
    for p in parts:
        out = lp_add(out, p)
    return out


def mat_transpose(a):
    n = len(a)
    return [[a[j][i] for j in range(n)] for i in range(n)]


def lp_det(a) -> LP:
    n = len(a)
    if n == 1:
        return a[0][0]
    out: LP = {}
    for j in range(n):
        minor = [row[:j] + row[j + 1:] for row in a[1:]]
        term = lp_mul(a[0][j], lp_det(minor))
        if j % 2:
            term = lp_neg(term)
        out = lp_add(out, term)
    return out


# ---------------------------------------------------------------------------
# the six special matrices


def _q(*pairs) -> QC:
    if len(pairs) == 1:
        return QC.make(pairs[0])
    return QC.make(pairs[0], pairs[1])


_HALF_Q = QC.make(Fraction(1, 2))
_IHALF = QC.make(0, Fraction(1, 2))


def _block2():
    """The (1+e^2)/2e rotation block of [2111]."""
    a = {-1: _HALF_Q, 1: _HALF_Q}
    b = {-1: _IHALF, 1: QC.make(0, Fraction(-1, 2))}  # -i(e^2-1)/2e
    return [[a, b], [lp_neg(b), a]]


def _block3():
    """The three-dimensional block of [311]."""
    i = QC_I
    return [
        [{0: QC_ONE, -2: -_HALF_Q}, {-1: QC_ONE}, {-2: _IHALF}],
        [{-1: QC_MINUS_ONE}, {0: QC_ONE}, {-1: i}],
        [{-2: _IHALF}, {-1: -i}, {0: QC_ONE, -2: _HALF_Q}],
    ]


def _block4():
    """The four-dimensional block of [41]; q = 1/(2e^2) + 1/(2e)."""
    q = {-2: _HALF_Q, -1: _HALF_Q}
    iq = lp_scale(q, QC_I)
    one = dict(LP_ONE)
    z: LP = {}
    return [
        [one, q, iq, z],
        [lp_neg(q), one, z, iq],
        [lp_neg(iq), z, one, lp_neg(q)],
        [z, lp_neg(iq), q, one],
    ]


def _embed(blocks) -> List[List[LP]]:
    """Assemble a 5x5 matrix from diagonal blocks."""
    out = [[dict() for _ in range(5)] for _ in range(5)]
    pos = 0
    for b in blocks:
        m = len(b)
        for i in range(m):
            for j in range(m):
                out[pos + i][pos + j] = dict(b[i][j])
        pos += m
    for k in range(pos, 5):
        out[k][k] = dict(LP_ONE)
    return out


def _matrix5_raw() -> List[List[LP]]:
    """The [5] matrix exactly as displayed: A_ij = Z^((i-1)(j-3)) e^(j-3)/sqrt5."""
    s5inv = QC_SQRT5.inv()
    out = []
    for i in range(5):
        row = []
        for j in range(5):
            zpow = (i * (j - 2)) % 5
            row.append({j - 2: s5inv * (QC_Z ** zpow)})
        out.append(row)
    return out


def _null_frame_fix() -> List[List[LP]]:
    """Constant C with C^T J C = I for the exchange form J; entries in Q(i).

    Columns: e1 + e5/2, e2 + e4/2, e3, i e2 - (i/2) e4, i e1 - (i/2) e5.
    """
    i = QC_I
    h = _HALF_Q
    cols = [
        {0: QC_ONE, 4: h},
        {1: QC_ONE, 3: h},
        {2: QC_ONE},
        {1: i, 3: QC.make(0, Fraction(-1, 2))},
        {0: i, 4: QC.make(0, Fraction(-1, 2))},
    ]
    out = [[dict() for _ in range(5)] for _ in range(5)]
    for j, col in enumerate(cols):
        for r, v in col.items():
            out[r][j] = {0: v}
    return out


@dataclass(frozen=True)
class ContractionMatrix:
    kind: str
    entries: Tuple[Tuple[tuple, ...], ...]  # frozen LP items per entry
    note: str = ""

    @staticmethod
    def from_rows(kind: str, rows: Sequence[Sequence[LP]], note: str = "") -> "ContractionMatrix":
        frozen = tuple(
            tuple(tuple(sorted(e.items(), key=lambda kv: kv[0])) for e in row) for row in rows
        )
        return ContractionMatrix(kind, frozen, note)

    def rows(self) -> List[List[LP]]:
        return [[dict(e) for e in row] for row in self.entries]

    def entry(self, i: int, j: int) -> LP:
        return dict(self.entries[i][j])

    def entry_expr(self, i: int, j: int) -> Expr:
        return lp_to_expr(self.entry(i, j))

    def as_exprs(self) -> List[List[Expr]]:
        return [[self.entry_expr(i, j) for j in range(5)] for i in range(5)]

    def numeric(self, eps: complex, z: Optional[complex] = None) -> np.ndarray:
        out = np.zeros((5, 5), dtype=complex)
        for i in range(5):
            for j in range(5):
                for k, v in self.entry(i, j).items():
                    out[i, j] += v.to_complex() * eps ** k
        return out

    def key(self):
        return self.entries

    def is_eps_free(self) -> bool:
        return all(
            all(k == 0 for k, _ in e) for row in self.entries for e in row
        )


_BUILTIN_CACHE: Dict[str, ContractionMatrix] = {}


def builtin_contraction(kind: str) -> ContractionMatrix:
    """One of the six special contraction matrices, exactly."""
    kind = kind if kind.startswith("[") else f"[{kind}]"
    got = _BUILTIN_CACHE.get(kind)
    if got is not None:
        return got
    if kind == "[2111]":
        rows = _embed([_block2()])
        note = ""
    elif kind == "[221]":
        rows = _embed([_block2(), _block2()])
        note = ""
    elif kind == "[311]":
        rows = _embed([_block3()])
        note = ""
    elif kind == "[32]":
        rows = _embed([_block3(), _block2()])
        note = ""
    elif kind == "[41]":
        rows = _embed([_block4()])
        note = ""
    elif kind == "[5]":
        rows = mat_mul(_matrix5_raw(), _null_frame_fix())
        note = (
            "right-composed with a constant frame change: the displayed matrix "
            "carries the null frame (A^T A = exchange), this one is orthogonal"
        )
    elif kind == "[5raw]":
        rows = _matrix5_raw()
        note = "as displayed; A^T A is the exchange matrix, not the identity"
    else:
        raise UnknownKind(kind)
    m = ContractionMatrix.from_rows(kind, rows, note)
    _BUILTIN_CACHE[kind] = m
    return m


def validate_special(a: ContractionMatrix) -> bool:
    """A^T A = I and det = +-1, exactly as eps-identities."""
    rows = a.rows()
    ata = mat_mul(mat_transpose(rows), rows)
    for i in range(5):
        for j in range(5):
            want = LP_ONE if i == j else {}
            if lp_key(ata[i][j]) != lp_key(want):
                return False
    d = lp_det(rows)
    return lp_key(d) in (lp_key({0: QC_ONE}), lp_key({0: QC_MINUS_ONE}))


def compose_contractions(a: ContractionMatrix, b: ContractionMatrix) -> ContractionMatrix:
    if not validate_special(a) or not validate_special(b):
        raise NotSpecial("composition requires special contraction matrices")
    rows = mat_mul(a.rows(), b.rows())
    return ContractionMatrix.from_rows("composite", rows, f"{a.kind}*{b.kind}")


def permute_matrix(a: ContractionMatrix, sigma: Sequence[int]) -> ContractionMatrix:
    """Conjugation by the coordinate permutation sigma (maps slot i to
    coordinate sigma[i]): entry'_{ij} = entry_{sigma(i) sigma(j)}."""
    rows = a.rows()
    new = [[rows[sigma[i]][sigma[j]] for j in range(5)] for i in range(5)]
    return ContractionMatrix.from_rows(a.kind, new, f"{a.note} perm={tuple(sigma)}".strip())


def permuted_variants(kind: str) -> List[ContractionMatrix]:
    """Deduplicated conjugation orbit of the builtin matrix, stable order."""
    base = builtin_contraction(kind)
    seen = {}
    order = []
    for sigma in itertools.permutations(range(5)):
        m = permute_matrix(base, sigma)
        k = m.key()
        if k not in seen:
            seen[k] = m
            order.append(m)
    return order


def two_sided_variant(kind: str, left: Sequence[int], right: Sequence[int]) -> ContractionMatrix:
    """P_left . A . P_right for pinned reproductions: entry'_{ij} =
    A_{left(i), right(j)} with both permutations given as images."""
    base = builtin_contraction(kind)
    rows = base.rows()
    new = [[rows[left[i]][right[j]] for j in range(5)] for i in range(5)]
    return ContractionMatrix.from_rows(kind, new, f"left={tuple(left)} right={tuple(right)}")


# ---------------------------------------------------------------------------
# exact generator contraction (ordered-basis limit)


def lambda2_entries(a: ContractionMatrix) -> Dict[Tuple[Tuple[int, int], Tuple[int, int]], LP]:
    """Coefficients of L'_kl in L_ts: the 2x2 minors of A."""
    rows = a.rows()
    out = {}
    for (t, s) in L_PAIRS:
        for (k, l) in L_PAIRS:
            m = lp_add(
                lp_mul(rows[t - 1][k - 1], rows[s - 1][l - 1]),
                lp_neg(lp_mul(rows[s - 1][k - 1], rows[t - 1][l - 1])),
            )
            out[((t, s), (k, l))] = m
    return out


def _qc_solve_span(rows: List[List[QC]], v: List[QC]) -> Optional[List[QC]]:
    """Coefficients expressing v in the span of rows, or None (exact)."""
    if not rows:
        return None
    n = len(v)
    m = len(rows)
    aug = [[rows[r][c] for r in range(m)] + [v[c]] for c in range(n)]
    piv_cols: List[int] = []
    r = 0
    for c in range(m):
        p = next((i for i in range(r, n) if not aug[i][c].is_zero()), None)
        if p is None:
            continue
        aug[r], aug[p] = aug[p], aug[r]
        inv = aug[r][c].inv()
        aug[r] = [x * inv for x in aug[r]]
        for i in range(n):
            if i != r and not aug[i][c].is_zero():
                f = aug[i][c]
                aug[i] = [x - f * y for x, y in zip(aug[i], aug[r])]
        piv_cols.append(c)
        r += 1
    for i in range(r, n):
        if not aug[i][m].is_zero():
            return None
    coeffs = [QC_ZERO] * m
    for row_idx, c in enumerate(piv_cols):
        coeffs[c] = aug[row_idx][m]
    return coeffs


@dataclass
class GeneratorLimit:
    source: Tuple[int, int]
    alpha: int
    limit: Dict[Tuple[int, int], QC]  # combination of L'_kl


def contract_generator_basis(a: ContractionMatrix) -> List[GeneratorLimit]:
    """Theorem-1 ordered basis: 10 rescaled limits spanning so(5, C)."""
    if not validate_special(a):
        raise NotSpecial(a.kind)
    lam = lambda2_entries(a)
    vecs: Dict[Tuple[int, int], Dict[int, List[QC]]] = {}
    for ts in L_PAIRS:
        by_exp: Dict[int, List[QC]] = {}
        for idx, kl in enumerate(L_PAIRS):
            for e, q in lam[(ts, kl)].items():
                row = by_exp.setdefault(e, [QC_ZERO] * 10)
                row[idx] = q
        vecs[ts] = by_exp
    items = [(ts, dict(v)) for ts, v in vecs.items()]
    accepted: List[GeneratorLimit] = []
    accepted_leads: List[List[QC]] = []
    accepted_full: List[Dict[int, List[QC]]] = []
    guard = 0
    while items:
        guard += 1
        if guard > 500:
            raise DegenerateBasis("generator elimination did not terminate")
        best = min(range(len(items)), key=lambda i: (min(items[i][1]), L_PAIRS.index(items[i][0])))
        ts, laurent = items[best]
        if not laurent:
            raise DegenerateBasis(f"L_{ts} vanished identically")
        alpha = min(laurent)
        lead = laurent[alpha]
        combo = _qc_solve_span(accepted_leads, lead)
        if combo is None:
            accepted.append(GeneratorLimit(ts, alpha, {
                kl: lead[i] for i, kl in enumerate(L_PAIRS) if not lead[i].is_zero()
            }))
            accepted_leads.append(lead)
            accepted_full.append(laurent)
            items.pop(best)
            continue
        # subtract sum c_k eps^(alpha - alpha_k) * accepted_k
        for c, gl, full in zip(combo, accepted, accepted_full):
            if c.is_zero():
                continue
            shift = alpha - gl.alpha
            for e, row in full.items():
                tgt = laurent.setdefault(e + shift, [QC_ZERO] * 10)
                for i in range(10):
                    tgt[i] = tgt[i] - c * row[i]
        laurent = {
            e: row for e, row in laurent.items() if any(not q.is_zero() for q in row)
        }
        items[best] = (ts, laurent)
    return accepted


# ---------------------------------------------------------------------------
# potential contraction: the series procedure


@dataclass
class ChosenVector:
    level: Fraction  # eps power alpha
    c: Tuple[QC, ...]
    f_fingerprint: str


@dataclass
class ScalingMap:
    source_params: Tuple[str, ...]
    new_params: Tuple[str, ...]
    param_exprs: Dict[str, Expr]  # a_j -> expression in eps and b_l
    chosen: Tuple[ChosenVector, ...]

    def substitution(self) -> Dict[str, Expr]:
        return dict(self.param_exprs)


@dataclass
class ContractionResult:
    matrix: ContractionMatrix
    scaling: ScalingMap
    family_flat: PotentialFamily
    family_penta: PotentialFamily
    d: int
    k: int
    partial: bool
    diagnostics: Dict[str, object] = field(default_factory=dict)
    symmetries: Optional[List[Tuple[Fraction, DiffOp]]] = None


def contraction_substitution(a: ContractionMatrix) -> Dict[str, Expr]:
    """x_i -> sum_j A_ij(eps) p_j(x, y, z): old penta coords over the new
    flat section."""
    out = {}
    for i in range(5):
        acc = []
        for j, name in enumerate(PENTA):
            ent = a.entry(i, j)
            if not ent:
                continue
            acc.append(mul(lp_to_expr(ent), PENTA_OF_FLAT[name]))
        out[PENTA[i]] = add(*acc)
    return out


def contraction_flat_map(a: ContractionMatrix) -> Tuple[Dict[str, Expr], Expr]:
    """Source flat coordinates (and the V_F factor) over the target section."""
    comps = contraction_substitution(a)
    den = add(comps["x4"], mul(con(QC_I), comps["x5"]))
    dinv = pow_(den, -1)
    gmap = {
        "x": mul(-1, comps["x1"], dinv),
        "y": mul(-1, comps["x2"], dinv),
        "z": mul(-1, comps["x3"], dinv),
    }
    return gmap, mul(4, pow_(den, -2))


def _fingerprint_vec(vals: np.ndarray) -> str:
    parts = []
    for v in vals:
        parts.append(f"{v.real:.9e},{v.imag:.9e}")
    return hashlib.sha256(";".join(parts).encode()).hexdigest()[:16]


def _reconstruct_matrix(vals: np.ndarray, cfg: TestConfig):
    """Entrywise exact identification of a small complex matrix."""
    import mpmath

    out = []
    with mpmath.workdps(max(cfg.digits, 30)):
        for row in vals:
            out.append([reconstruct_qc(complex(v), mpmath.mp) for v in row])
    return out


def derive_parameter_scaling(
    v_b: PotentialFamily,
    a: ContractionMatrix,
    cfg: TestConfig = DEFAULT_CONFIG,
    window: int = 8,
) -> ContractionResult:
    """Apply the series procedure to a potential family on the null cone.

    The family may be given on any chart; it is converted to the
    pentaspherical density and expanded on the flat section of the target
    frame, so the null-cone condition is built in.
    """
    members = [(p, potential_to_penta(b, v_b.chart)) for p, b in v_b.members]
    params = [p for p, _ in members]
    k = len(params)
    subs = contraction_substitution(a)

    level_g: Dict[Fraction, List[Expr]] = {}
    for j, (p, b) in enumerate(members):
        e = substitute(b, subs)
        s = puiseux_auto(e, window=window, var=EPS)
        for exp, coeff in s.terms.items():
            row = level_g.setdefault(exp, [ZERO] * k)
            row[j] = add(row[j], coeff)
    levels = sorted(level_g)
    if not levels:
        raise RankDeficient("potential vanished under the contraction")

    # shared evaluation points for every level coefficient
    all_exprs = [g for lv in levels for g in level_g[lv]]
    n_pts = max(24, 2 * k + 8)
    nonzero = [g for g in all_exprs if g is not ZERO]
    vals, points = sample_matrix(
        nonzero, cfg=cfg, n_points=n_pts, tag=f"scaling:{a.kind}:{a.note}"
    )
    # map each distinct expr to its sampled column
    col_map: Dict[Expr, np.ndarray] = {}
    for ci, g in enumerate(nonzero):
        if g not in col_map:
            col_map[g] = vals[:, ci]

    zero_col = np.zeros(n_pts, dtype=complex)

    def column(g: Expr) -> np.ndarray:
        if g is ZERO:
            return zero_col
        return col_map[g]

    chosen: List[ChosenVector] = []
    chosen_rows: List[List[QC]] = []
    chosen_level_data: Dict[int, Tuple[Fraction, List[Expr]]] = {}
    diag_levels = []

    for lv in levels:
        gs = level_g[lv]
        cols = [j for j in range(k) if gs[j] is not ZERO]
        if not cols:
            continue
        # order candidate functions by the fingerprint of their values
        fps = {j: _fingerprint_vec(column(gs[j])) for j in cols}
        ordered = sorted(cols, key=lambda j: fps[j])
        # greedy independent f-basis among the g's of this level
        basis_idx: List[int] = []
        qmat: List[np.ndarray] = []
        for j in ordered:
            v = column(gs[j]).astype(complex)
            r = v.copy()
            for qv in qmat:
                r = r - qv * (np.conjugate(qv) @ r)
            nv = np.linalg.norm(v)
            if np.linalg.norm(r) > 1e-8 * max(1.0, nv):
                basis_idx.append(j)
                qmat.append(r / np.linalg.norm(r))
        if not basis_idx:
            continue
        fmat = np.stack([column(gs[j]) for j in basis_idx], axis=1)
        gmatrix = np.stack([column(gs[j]) for j in range(k)], axis=1)
        coords, *_ = np.linalg.lstsq(fmat, gmatrix, rcond=None)
        resid = np.linalg.norm(fmat @ coords - gmatrix)
        if resid > 1e-6 * max(1.0, np.linalg.norm(gmatrix)):
            raise InconclusiveSampling(
                f"level {lv}: residual {resid:.2e} decomposing onto the f-basis"
            )
        try:
            exact = _reconstruct_matrix(coords, cfg)
        except ReconstructionError:
            exact = _high_precision_qc_matrix(gs, basis_idx, points, cfg)
        # verify the reconstructed linear combinations symbolically
        for j in range(k):
            if gs[j] is ZERO:
                continue
            combo = add(*[
                mul(con(exact[s][j]), gs[basis_idx[s]]) for s in range(len(basis_idx))
            ])
            if not identity_test(gs[j], combo, cfg=cfg.with_(points=8)):
                raise InconclusiveSampling(
                    f"level {lv}: exact coefficient verification failed for member {j}"
                )
        diag_levels.append({"alpha": str(lv), "f_count": len(basis_idx)})
        # the c-vectors, in fingerprint order of their f's
        for s, j_pivot in enumerate(basis_idx):
            c_vec = [exact[s][j] for j in range(k)]
            if all(q.is_zero() for q in c_vec):
                continue
            if _qc_solve_span(chosen_rows, c_vec) is None:
                idx = len(chosen)
                chosen.append(ChosenVector(lv, tuple(c_vec), fps[j_pivot]))
                chosen_rows.append(c_vec)
                chosen_level_data[idx] = (lv, gs)
        if len(chosen) == k:
            break

    d = len(chosen)
    if d == 0:
        raise RankDeficient("no nonzero coefficient vectors found")

    # dual vectors supported on the pivot columns of the chosen matrix
    w_rows = _dual_vectors(chosen_rows)
    new_params = tuple(f"b{i+1}" for i in range(d))
    eps_sym = sym(EPS)
    param_exprs: Dict[str, Expr] = {p: ZERO for p in params}
    for l, cv in enumerate(chosen):
        scale = mul(sym(new_params[l]), pow_(eps_sym, -cv.level))
        for j in range(k):
            if not w_rows[l][j].is_zero():
                param_exprs[params[j]] = add(
                    param_exprs[params[j]], mul(con(w_rows[l][j]), scale)
                )

    flat_members = []
    penta_members = []
    for l, cv in enumerate(chosen):
        lv, gs = chosen_level_data[l]
        g_limit = add(*[
            mul(con(w_rows[l][j]), gs[j]) for j in range(k) if not w_rows[l][j].is_zero()
        ])
        flat_members.append((new_params[l], mul(4, g_limit)))
        penta_members.append((new_params[l], potential_to_penta(mul(4, g_limit), "flat")))

    scaling = ScalingMap(tuple(params), new_params, param_exprs, tuple(chosen))
    fam_flat = PotentialFamily("flat", tuple(flat_members))
    fam_penta = PotentialFamily("penta", tuple(penta_members))
    return ContractionResult(
        matrix=a,
        scaling=scaling,
        family_flat=fam_flat,
        family_penta=fam_penta,
        d=d,
        k=k,
        partial=d < k,
        diagnostics={"levels": diag_levels},
    )


def _high_precision_qc_matrix(gs, basis_idx, points, cfg):
    """Re-solve the f-decomposition at high precision and identify the
    coefficients in Q(i, Z) (needed when the [5] contraction is involved)."""
    import mpmath

    from .numeric import _eval_mp

    k = len(gs)
    t = len(basis_idx)
    out = [[QC_ZERO] * k for _ in range(t)]
    with mpmath.workdps(cfg.digits + 20):
        mp = mpmath.mp
        rows_f = []
        per_j_rhs = [[] for _ in range(k)]
        for pt in points:
            env = {kk: vv.to_mpc(mp) for kk, vv in pt.items()}
            rows_f.append([_eval_mp(gs[j], env, mp, {}) for j in basis_idx])
            for j in range(k):
                per_j_rhs[j].append(
                    _eval_mp(gs[j], env, mp, {}) if gs[j] is not ZERO else mp.mpc(0)
                )
        fm = mpmath.matrix(rows_f)
        for j in range(k):
            if gs[j] is ZERO:
                continue
            sol = mpmath.qr_solve(fm, mpmath.matrix(per_j_rhs[j]))[0]
            for s in range(t):
                out[s][j] = reconstruct_qc(sol[s], mp)
    return out


def _dual_vectors(rows: List[List[QC]]) -> List[List[QC]]:
    """W with rows w_l, supported on pivot columns, and c_m . w_l = delta."""
    d = len(rows)
    k = len(rows[0])
    # exact rref to find pivot columns
    mat = [list(r) for r in rows]
    piv: List[int] = []
    r = 0
    for c in range(k):
        p = next((i for i in range(r, d) if not mat[i][c].is_zero()), None)
        if p is None:
            continue
        mat[r], mat[p] = mat[p], mat[r]
        inv = mat[r][c].inv()
        mat[r] = [x * inv for x in mat[r]]
        for i in range(d):
            if i != r and not mat[i][c].is_zero():
                f = mat[i][c]
                mat[i] = [x - f * y for x, y in zip(mat[i], mat[r])]
        piv.append(c)
        r += 1
        if r == d:
            break
    if r < d:
        raise RankDeficient("chosen coefficient vectors are not independent")
    # Cp (d x d) from pivot columns; W^T rows at pivots = Cp^{-1}
    cp = [[rows[i][c] for c in piv] for i in range(d)]
    cp_inv = _qc_matrix_inverse(cp)
    out = [[QC_ZERO] * k for _ in range(d)]
    for l in range(d):
        for ridx, c in enumerate(piv):
            out[l][c] = cp_inv[ridx][l]
    return out


def _qc_matrix_inverse(m: List[List[QC]]) -> List[List[QC]]:
    n = len(m)
    aug = [list(row) + [QC_ONE if i == j else QC_ZERO for j in range(n)] for i, row in enumerate(m)]
    for c in range(n):
        p = next(i for i in range(c, n) if not aug[i][c].is_zero())
        aug[c], aug[p] = aug[p], aug[c]
        inv = aug[c][c].inv()
        aug[c] = [x * inv for x in aug[c]]
        for i in range(n):
            if i != c and not aug[i][c].is_zero():
                f = aug[i][c]
                aug[i] = [x - f * y for x, y in zip(aug[i], aug[c])]
    return [row[n:] for row in aug]


# ---------------------------------------------------------------------------
# symmetry contraction


def contract_symmetries(
    words: Sequence[Tuple[str, Word]],
    a: ContractionMatrix,
    scaling: ScalingMap,
    cfg: TestConfig = DEFAULT_CONFIG,
    window: int = 6,
    source_chart_subs: Optional[Dict[str, Expr]] = None,
) -> List[Tuple[str, Fraction, DiffOp]]:
    """Ordered-basis limits of symmetry operators under the contraction.

    Words are L-polynomials (atoms L12..L45) whose scalar functions live in
    the source flat chart.  Each L_ab is replaced by its expansion in the
    target generators, functions are transported through the induced
    conformal map, parameters through the scaling, and the rescaled limits
    are extracted greedily so they stay linearly independent.
    """
    lam = lambda2_entries(a)
    atoms: Dict[str, DiffOp] = {}
    for (t, s) in L_PAIRS:
        op = DiffOp.zero("flat", FLAT)
        for (kl, target) in ((kl, FLAT_L[kl]) for kl in L_PAIRS):
            ent = lam[((t, s), kl)]
            if ent:
                op = op + target.scale(lp_to_expr(ent))
        atoms[f"L{t}{s}"] = op
    gmap, _ = contraction_flat_map(a)
    fsub = dict(gmap)
    fsub.update(scaling.param_exprs)
    if source_chart_subs:
        comp = {k: substitute(v, fsub) for k, v in source_chart_subs.items()}
        comp.update({k: v for k, v in fsub.items() if k not in comp})
        fsub = comp

    def fmap(f: Expr) -> Expr:
        return substitute(f, fsub)

    series_ops: List[Tuple[str, Dict[Fraction, DiffOp]]] = []
    for name, w in words:
        op = realize_word(w, atoms, fmap=fmap)
        per_exp: Dict[Fraction, DiffOp] = {}
        trunc_min: Optional[Fraction] = None
        for alpha, coeff in op.terms.items():
            s = puiseux_auto(coeff, window=window, var=EPS)
            if s.trunc is not None:
                trunc_min = s.trunc if trunc_min is None else min(trunc_min, s.trunc)
            for e, c in s.terms.items():
                cur = per_exp.get(e)
                t = DiffOp("flat", FLAT, {alpha: c})
                per_exp[e] = t if cur is None else cur + t
        per_exp = {e: o for e, o in per_exp.items() if not o.is_zero()}
        if trunc_min is not None:
            per_exp = {e: o for e, o in per_exp.items() if e <= trunc_min}
        series_ops.append((name, per_exp))

    # one fixed point set shared by every fingerprint in the elimination
    free_names = set(FLAT)
    for _, per in series_ops:
        for op_ in per.values():
            for _, c in op_.items():
                free_names |= c.free
    var_names = tuple(sorted(free_names))
    from .numeric import point_stream, _eval_double_at

    stream = point_stream(var_names, "free", (), cfg, "sym-contraction")
    fixed_pts = [next(stream) for _ in range(16)]
    mask = np.ones(16, dtype=bool)
    idx_set = sorted({
        aidx for _, per in series_ops for op_ in per.values() for aidx in op_.terms
    })

    def op_values(op: DiffOp) -> np.ndarray:
        exprs = [op.terms.get(aidx, ZERO) for aidx in idx_set]
        vals, stats = _eval_double_at(exprs, var_names, fixed_pts)
        nonlocal_mask = np.all(stats == 0, axis=0)
        mask[:] = mask & nonlocal_mask
        return vals

    accepted: List[Tuple[str, Fraction, DiffOp]] = []
    accepted_vals: List[np.ndarray] = []
    accepted_series: List[Dict[Fraction, DiffOp]] = []
    items = list(series_ops)
    guard = 0
    while items:
        guard += 1
        if guard > 40 * len(series_ops) + 20:
            raise DegenerateBasis("symmetry elimination did not terminate")
        for name, per in items:
            if not per:
                raise DegenerateBasis(f"symmetry {name} vanished under contraction")
        best = min(range(len(items)), key=lambda i: min(items[i][1]))
        name, per = items[best]
        beta = min(per)
        lead = per[beta]
        v_full = op_values(lead)
        if int(mask.sum()) < 6:
            raise InconclusiveSampling("too few usable fingerprint points")
        v = v_full[:, mask].flatten()
        if not accepted_vals:
            combo = None
        else:
            mat = np.stack([m[:, mask].flatten() for m in accepted_vals], axis=1)
            sol, *_ = np.linalg.lstsq(mat, v, rcond=None)
            ok = np.linalg.norm(mat @ sol - v) <= 1e-7 * max(1.0, np.linalg.norm(v))
            combo = sol if ok else None
        if combo is None:
            accepted.append((name, beta, lead))
            accepted_vals.append(v_full)
            accepted_series.append(per)
            items.pop(best)
            continue
        exact = []
        import mpmath

        with mpmath.workdps(max(cfg.digits, 30)):
            for cval in combo:
                exact.append(reconstruct_qc(complex(cval), mpmath.mp))
        for (aname, abeta, _), aper, c in zip(accepted, accepted_series, exact):
            if c.is_zero():
                continue
            shift = beta - abeta
            for e, op_ in aper.items():
                tgt = per.get(e + shift)
                delta = op_.scale(con(-c))
                per[e + shift] = delta if tgt is None else tgt + delta
        items[best] = (name, {e: o for e, o in per.items() if not o.is_zero()})
    accepted.sort(key=lambda t: t[1])
    return accepted
