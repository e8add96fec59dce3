"""Seeded sampling, multiprecision evaluation, and randomized identity testing.

Equality of expressions is decided by evaluation at deterministic
pseudo-random points: a double-precision screen over N points followed by
a multiprecision confirmation tier.  Sample coordinates are exact complex
rationals, so the confirmation tier is honest (no double rounding enters
the high-precision pass).
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple

import mpmath
import numpy as np

from . import evalcore
from .errors import (
    BranchCutProximity,
    DivisionNearZero,
    InconclusiveSampling,
    ReconstructionError,
    UnsupportedConstraint,
)
from .expr import Add, Const, Expr, Mul, Pow, Sym, ZERO, con, sub
from .field import QC

__all__ = [
    "TestConfig",
    "DEFAULT_CONFIG",
    "SamplePoint",
    "evaluate",
    "identity_test",
    "zero_test_batch",
    "sample_matrix",
    "numeric_rank",
    "reconstruct_qc",
    "point_stream",
    "classify_constraints",
]


@dataclass(frozen=True)
class TestConfig:
    """Deterministic configuration for all randomized checks."""

    seed: int = 20260809
    points: int = 30
    digits: int = 40
    confirm_points: int = 5
    rel_tol: float = 1e-9
    domain: str = "complex"  # 'complex' or 'realish'
    max_attempt_factor: int = 40

    def with_(self, **kw) -> "TestConfig":
        return replace(self, **kw)


DEFAULT_CONFIG = TestConfig()


class SamplePoint:
    """Exact assignment symbol -> complex rational, with precision metadata."""

    __slots__ = ("values", "digits", "provenance")

    def __init__(self, values: Dict[str, QC], digits: int = 16, provenance: str = ""):
        self.values = values
        self.digits = digits
        self.provenance = provenance

    def complex_env(self) -> Dict[str, complex]:
        return {k: v.to_complex() for k, v in self.values.items()}

    def mpc_env(self, mp) -> Dict[str, "mpmath.mpc"]:
        return {k: v.to_mpc(mp) for k, v in self.values.items()}

    def __repr__(self):
        return f"SamplePoint({self.values!r}, digits={self.digits})"


def derive_seed(*parts) -> int:
    h = hashlib.sha256(repr(parts).encode()).digest()
    return int.from_bytes(h[:8], "big")


# ---------------------------------------------------------------------------
# constraint detection


def _is_square_of_sym(e: Expr):
    if isinstance(e, Pow) and e.exp == 2 and isinstance(e.base, Sym):
        return e.base.name
    return None


def classify_constraints(constraints: Sequence[Expr]):
    """Recognize the supported sampling varieties.

    Returns (kind, block) with kind in {'free', 'nullcone', 'sphere'} and
    block the ordered tuple of constrained variable names.
    """
    constraints = [con(c) for c in constraints if con(c) is not ZERO]
    if not constraints:
        return "free", ()
    if len(constraints) > 1:
        raise UnsupportedConstraint("at most one constraint is supported")
    c = constraints[0]
    if isinstance(c, Add):
        names = []
        const_part = None
        for a in c.args:
            n = _is_square_of_sym(a)
            if n is not None:
                names.append(n)
            elif isinstance(a, Const):
                const_part = a.qc
            else:
                raise UnsupportedConstraint(f"unrecognized constraint {c!r}")
        names.sort()
        if const_part is None and len(names) == 5:
            return "nullcone", tuple(names)
        if const_part == QC.make(-1) and len(names) == 4:
            return "sphere", tuple(names)
    raise UnsupportedConstraint(f"unrecognized constraint {c!r}")


def nullcone_constraint(var_names: Sequence[str]) -> Expr:
    from .expr import add, pow_, sym

    return add(*[pow_(sym(n), 2) for n in var_names])


def sphere_constraint(var_names: Sequence[str]) -> Expr:
    from .expr import add, pow_, sym

    return add(*[pow_(sym(n), 2) for n in var_names], -1)


# ---------------------------------------------------------------------------
# point streams


def _draw_rational(rng: random.Random, domain: str) -> QC:
    if domain == "realish":
        re = Fraction(rng.randint(100, 2000), 1000)
        im = Fraction(rng.randint(-10, 10), 1000)
        return QC.make(re, im)
    dr = rng.randint(1, 1000)
    nr = rng.randint(-2 * dr, 2 * dr)
    di = rng.randint(1, 1000)
    ni = rng.randint(-2 * di, 2 * di)
    return QC.make(Fraction(nr, dr), Fraction(ni, di))


def _pentaspherical(X: QC, Y: QC, Z: QC) -> Tuple[QC, QC, QC, QC, QC]:
    """T=1 section of the null cone over the image of a flat point."""
    two = QC.make(2)
    r2 = X * X + Y * Y + Z * Z
    one = QC.make(1)
    i = QC.make(0, 1)
    return (two * X, two * Y, two * Z, r2 - one, i * (r2 + one))


def _sphere_point(X: QC, Y: QC, Z: QC) -> Optional[Tuple[QC, QC, QC, QC]]:
    two = QC.make(2)
    one = QC.make(1)
    r2 = X * X + Y * Y + Z * Z
    d = r2 + one
    if d.is_zero():
        return None
    dinv = d.inv()
    return (two * X * dinv, two * Y * dinv, two * Z * dinv, (one - r2) * dinv)


def point_stream(
    var_names: Sequence[str],
    kind: str,
    block: Sequence[str],
    cfg: TestConfig,
    tag: str,
) -> Iterator[Dict[str, QC]]:
    """Deterministic infinite stream of exact sample assignments."""
    var_names = tuple(var_names)
    block = tuple(block)
    rng = random.Random(derive_seed(cfg.seed, tag, cfg.domain, kind, var_names, block))
    free_vars = [n for n in var_names if n not in block]
    while True:
        values: Dict[str, QC] = {}
        if kind == "nullcone":
            X, Y, Z = (_draw_rational(rng, cfg.domain) for _ in range(3))
            coords = _pentaspherical(X, Y, Z)
            for n, v in zip(block, coords):
                values[n] = v
        elif kind == "sphere":
            while True:
                X, Y, Z = (_draw_rational(rng, cfg.domain) for _ in range(3))
                s = _sphere_point(X, Y, Z)
                if s is not None:
                    break
            for n, v in zip(block, s):
                values[n] = v
        for n in free_vars:
            values[n] = _draw_rational(rng, cfg.domain)
        yield values


# ---------------------------------------------------------------------------
# multiprecision tree evaluation


def _eval_mp(e: Expr, env, mp, memo) -> "mpmath.mpc":
    v = memo.get(e)
    if v is not None:
        return v
    k = e.KIND
    if k == 0:
        v = e.qc.to_mpc(mp)
    elif k == 1:
        v = env[e.name]
    elif k == 4:
        v = mp.mpc(0)
        for a in e.args:
            v += _eval_mp(a, env, mp, memo)
    elif k == 3:
        v = mp.mpc(1)
        for a in e.args:
            v *= _eval_mp(a, env, mp, memo)
    else:
        b = _eval_mp(e.base, env, mp, memo)
        exp = e.exp
        if exp.denominator == 1:
            n = int(exp)
            if n < 0 and abs(b) < evalcore.DENOM_EPS:
                raise DivisionNearZero(f"|base|={abs(b)} under exponent {n}")
            v = b ** n
        else:
            if abs(mp.pi - abs(mp.arg(b))) < evalcore.BRANCH_EPS:
                raise BranchCutProximity(f"arg within 1e-3 of pi: {b}")
            n = exp.numerator
            if n < 0 and abs(b) < evalcore.DENOM_EPS:
                raise DivisionNearZero(f"|base|={abs(b)} under exponent {exp}")
            v = mp.sqrt(b) ** n
    memo[e] = v
    return v


def evaluate(e: Expr, point: SamplePoint) -> "mpmath.mpc":
    """Multiprecision evaluation at an exact sample point (principal sqrt)."""
    e = con(e)
    missing = e.free - set(point.values)
    if missing:
        raise KeyError(f"unassigned symbols: {sorted(missing)}")
    digits = max(point.digits, 16)
    with mpmath.workdps(digits + 10):
        env = point.mpc_env(mpmath.mp)
        return _eval_mp(e, env, mpmath.mp, {})


# ---------------------------------------------------------------------------
# double-tier evaluation over points


def _eval_double_at(exprs: Sequence[Expr], var_names, pts: List[Dict[str, QC]]):
    arr = np.array(
        [[pt[n].to_complex() for n in var_names] for pt in pts], dtype=np.complex128
    )
    vals = np.empty((len(exprs), len(pts)), dtype=np.complex128)
    stats = np.empty((len(exprs), len(pts)), dtype=np.int32)
    for i, e in enumerate(exprs):
        prog = evalcore.compile_expr(e, var_names)
        v, s = evalcore.eval_many(prog, arr)
        vals[i] = v
        stats[i] = s
    return vals, stats


def _confirm_equal_mp(e1: Expr, e2: Expr, pt: Dict[str, QC], cfg: TestConfig) -> bool:
    with mpmath.workdps(cfg.digits + 10):
        mp = mpmath.mp
        env = {k: v.to_mpc(mp) for k, v in pt.items()}
        try:
            v1 = _eval_mp(e1, env, mp, {})
            v2 = _eval_mp(e2, env, mp, {})
        except (DivisionNearZero, BranchCutProximity):
            return True  # the point is unusable, not a counterexample
        scale = max(1.0, float(abs(v1)), float(abs(v2)))
        return float(abs(v1 - v2)) < 10.0 ** (-(cfg.digits - 10)) * scale


def identity_test(
    e1,
    e2,
    constraints: Sequence[Expr] = (),
    cfg: TestConfig = DEFAULT_CONFIG,
) -> bool:
    """Randomized equality test, deterministic for a fixed config.

    True iff |e1-e2| < rel_tol * scale at `points` accepted double-tier
    points and < 10^(10-digits) * scale at `confirm_points` points
    evaluated at `digits` decimal digits.
    """
    e1 = con(e1)
    e2 = con(e2)
    if sub(e1, e2) is ZERO:
        return True
    kind, block = classify_constraints(constraints)
    var_names = tuple(sorted(e1.free | e2.free | set(block)))
    stream = point_stream(var_names, kind, block, cfg, "identity")
    accepted: List[Dict[str, QC]] = []
    attempts = 0
    cap = cfg.points * cfg.max_attempt_factor
    batch = max(cfg.points, 8)
    while len(accepted) < cfg.points and attempts < cap:
        pts = [next(stream) for _ in range(batch)]
        attempts += batch
        vals, stats = _eval_double_at([e1, e2], var_names, pts)
        for j, pt in enumerate(pts):
            if stats[0, j] != 0 or stats[1, j] != 0:
                continue
            v1, v2 = vals[0, j], vals[1, j]
            scale = max(1.0, abs(v1), abs(v2))
            if abs(v1 - v2) >= cfg.rel_tol * scale:
                # double-precision failure: confirm it was not rounding
                if not _confirm_equal_mp(e1, e2, pt, cfg):
                    return False
            accepted.append(pt)
            if len(accepted) >= cfg.points:
                break
    if len(accepted) < cfg.points:
        raise InconclusiveSampling(
            f"accepted {len(accepted)}/{cfg.points} after {attempts} attempts"
        )
    for pt in accepted[: cfg.confirm_points]:
        if not _confirm_equal_mp(e1, e2, pt, cfg):
            return False
    return True


def zero_test_batch(
    exprs: Sequence[Expr],
    constraints: Sequence[Expr] = (),
    cfg: TestConfig = DEFAULT_CONFIG,
) -> List[bool]:
    """Test many expressions against zero over a shared point stream.

    Each expression accumulates its own accepted points (a point rejected
    for one expression may serve another), so verdicts match individual
    identity_test runs in spirit while sharing evaluation batches.
    """
    exprs = [con(e) for e in exprs]
    n = len(exprs)
    verdicts: List[Optional[bool]] = [None] * n
    live = [i for i, e in enumerate(exprs) if e is not ZERO]
    for i, e in enumerate(exprs):
        if e is ZERO:
            verdicts[i] = True
    if not live:
        return [bool(v) for v in verdicts]
    kind, block = classify_constraints(constraints)
    names = set(block)
    for i in live:
        names |= exprs[i].free
    var_names = tuple(sorted(names))
    stream = point_stream(var_names, kind, block, cfg, "zero-batch")
    counts = {i: 0 for i in live}
    confirm_pts: Dict[int, List[Dict[str, QC]]] = {i: [] for i in live}
    attempts = 0
    cap = cfg.points * cfg.max_attempt_factor
    batch = max(cfg.points, 16)
    while live and attempts < cap:
        pts = [next(stream) for _ in range(batch)]
        attempts += batch
        vals, stats = _eval_double_at([exprs[i] for i in live], var_names, pts)
        still = []
        for row, i in enumerate(live):
            dead = False
            for j, pt in enumerate(pts):
                if stats[row, j] != 0:
                    continue
                v = vals[row, j]
                if abs(v) >= cfg.rel_tol * max(1.0, abs(v)):
                    if not _confirm_equal_mp(exprs[i], ZERO, pt, cfg):
                        verdicts[i] = False
                        dead = True
                        break
                counts[i] += 1
                if len(confirm_pts[i]) < cfg.confirm_points:
                    confirm_pts[i].append(pt)
                if counts[i] >= cfg.points:
                    break
            if dead:
                continue
            if counts[i] >= cfg.points:
                ok = all(
                    _confirm_equal_mp(exprs[i], ZERO, pt, cfg) for pt in confirm_pts[i]
                )
                verdicts[i] = ok
            else:
                still.append(i)
        live = still
    if live:
        raise InconclusiveSampling(f"expressions {live} starved of sample points")
    return [bool(v) for v in verdicts]


# ---------------------------------------------------------------------------
# sampled matrices, rank, reconstruction


def sample_matrix(
    exprs: Sequence[Expr],
    constraints: Sequence[Expr] = (),
    cfg: TestConfig = DEFAULT_CONFIG,
    n_points: Optional[int] = None,
    extra_vars: Sequence[str] = (),
    tag: str = "matrix",
):
    """Evaluate expressions at shared accepted points.

    Returns (values, points): values has shape (n_points, n_exprs); a point
    is accepted only if every expression evaluates cleanly there.
    """
    exprs = [con(e) for e in exprs]
    n_points = n_points or cfg.points
    kind, block = classify_constraints(constraints)
    names = set(block) | set(extra_vars)
    for e in exprs:
        names |= e.free
    var_names = tuple(sorted(names))
    stream = point_stream(var_names, kind, block, cfg, tag)
    rows: List[np.ndarray] = []
    points: List[Dict[str, QC]] = []
    attempts = 0
    cap = n_points * cfg.max_attempt_factor
    batch = max(n_points, 16)
    while len(rows) < n_points and attempts < cap:
        pts = [next(stream) for _ in range(batch)]
        attempts += batch
        vals, stats = _eval_double_at(exprs, var_names, pts)
        for j, pt in enumerate(pts):
            if np.any(stats[:, j] != 0):
                continue
            rows.append(vals[:, j].copy())
            points.append(pt)
            if len(rows) >= n_points:
                break
    if len(rows) < n_points:
        raise InconclusiveSampling(
            f"accepted {len(rows)}/{n_points} joint points after {attempts} attempts"
        )
    return np.array(rows), points


def numeric_rank(matrix: np.ndarray, cfg: TestConfig = DEFAULT_CONFIG, high=None) -> int:
    """Singular-value rank at threshold 1e-9 * s_max, with an optional
    high-precision recount when a singular value sits near the threshold."""
    if matrix.size == 0:
        return 0
    s = np.linalg.svd(matrix, compute_uv=False)
    if s[0] == 0:
        return 0
    th = 1e-9 * s[0]
    marginal = np.any((s > th / 1e3) & (s < th * 1e3))
    if marginal and high is not None:
        with mpmath.workdps(cfg.digits + 10):
            m = high()
            sv = mpmath.svd_c(m, compute_uv=False)
            vals = sorted((float(x) for x in sv), reverse=True)
        th = 1e-9 * vals[0] if vals and vals[0] > 0 else 0
        return sum(1 for x in vals if x > th)
    return int(np.sum(s > th))


def reconstruct_qc(value, mp=None, max_den: int = 10 ** 6, rel_tol=None) -> QC:
    """Identify a numeric value as an exact element of Q(i, Z).

    Tries Gaussian rationals of bounded denominator first, then an
    integer-relation search over the Z power basis.  The tolerance tracks
    the working precision unless given; callers are expected to verify the
    identification independently (symbolically or at higher precision).
    Raises ReconstructionError if nothing matches.
    """
    if mp is None:
        mp = mpmath.mp
    v = mp.mpc(value)
    tol = mp.mpf(rel_tol) if rel_tol is not None else mp.mpf(10) ** (-(mp.dps - 8))
    scale = max(1, abs(v))
    if abs(v) < tol:
        return QC.make(0, 0)
    for bound in (1, 12, 1000, max_den):
        fr = Fraction(float(v.real)).limit_denominator(bound)
        fi = Fraction(float(v.imag)).limit_denominator(bound)
        cand = QC.make(fr, fi)
        if abs(cand.to_mpc(mp) - v) < tol * scale:
            return cand
    # Integer relation over a Q-independent real basis.  Real and imaginary
    # parts of Q(i, Z) elements lie in span_Q{1, Re Z, Im Z, Im Z^2}
    # (Re Z^2 = -1/2 - Re Z, Re Z^3 = Re Z^2, Im Z^3 = -Im Z^2).
    z1 = mp.expjpi(mp.mpf(2) / 5)
    z2 = z1 * z1
    basis_vals = [mp.mpf(1), z1.real, z1.imag, z2.imag]

    def solve_part(x):
        rel = mpmath.pslq([x] + basis_vals, maxcoeff=10 ** 12, maxsteps=10 ** 5)
        if not rel or rel[0] == 0:
            return None
        denom = -rel[0]
        return [Fraction(c, denom) for c in rel[1:]]

    cr = solve_part(v.real)
    ci = solve_part(v.imag)
    if cr is None or ci is None:
        raise ReconstructionError(f"no exact identification for {v}")
    from .field import QC_Z

    zpow = [QC.make(1)]
    for _ in range(5):
        zpow.append(zpow[-1] * QC_Z)
    half = QC.make(Fraction(1, 2))
    ihalf = QC.make(0, Fraction(-1, 2))  # 1/(2i)
    basis_qc = [
        QC.make(1),
        (zpow[1] + zpow[4]) * half,
        (zpow[1] - zpow[4]) * ihalf,
        (zpow[2] - zpow[3]) * ihalf,
    ]

    def assemble(coeffs):
        acc = QC.make(0)
        for c, b in zip(coeffs, basis_qc):
            acc = acc + QC.make(c) * b
        return acc

    cand = assemble(cr) + QC.make(0, 1) * assemble(ci)
    if abs(cand.to_mpc(mp) - v) < tol * scale:
        return cand
    raise ReconstructionError(f"PSLQ candidate failed verification for {v}")
