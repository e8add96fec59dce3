"""Charts of the conformal dictionary and the transforms between them.

Three charts describe the same Laplace system: flat Cartesian (x, y, z),
the 3-sphere (s1..s4 with sum s^2 = 1), and projective pentaspherical
coordinates (x1..x5 on the null cone sum x^2 = 0).  Potentials convert by
V_F = (x4+ix5)^2 V_B = (1+s4)^2 V_S together with the coordinate maps;
points convert exactly in rational arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

from .diffop import ChartMap, DiffOp, gauge_conjugate_power, laplacian
from .errors import SingularLocus, UnknownParameter
from .expr import (
    Expr,
    ONE,
    ZERO,
    add,
    con,
    differentiate,
    div,
    gauss,
    mul,
    pow_,
    sqrt,
    sub,
    substitute,
    sym,
    symbols,
)
from .field import QC
from .numeric import SamplePoint, TestConfig, DEFAULT_CONFIG, derive_seed, point_stream

FLAT = ("x", "y", "z")
SPHERE = ("s1", "s2", "s3", "s4")
PENTA = ("x1", "x2", "x3", "x4", "x5")

X, Y, Zc = symbols("x y z")
S1, S2, S3, S4 = symbols("s1 s2 s3 s4")
P1, P2, P3, P4, P5 = symbols("x1 x2 x3 x4 x5")

R2 = add(X ** 2, Y ** 2, Zc ** 2)
_I = gauss(0, 1)

# sphere coordinates of a flat point
SPHERE_OF_FLAT = {
    "s1": div(2 * X, R2 + 1),
    "s2": div(2 * Y, R2 + 1),
    "s3": div(2 * Zc, R2 + 1),
    "s4": div(1 - R2, R2 + 1),
}

# flat coordinates of a sphere point (singular at s4 = -1)
FLAT_OF_SPHERE = {
    "x": div(S1, 1 + S4),
    "y": div(S2, 1 + S4),
    "z": div(S3, 1 + S4),
}

# T=1 pentaspherical representative of a flat point
PENTA_OF_FLAT = {
    "x1": 2 * X,
    "x2": 2 * Y,
    "x3": 2 * Zc,
    "x4": R2 - 1,
    "x5": _I * (R2 + 1),
}

# flat coordinates of a null-cone point (projective; singular at x4+ix5 = 0)
_DEN = add(P4, mul(_I, P5))
FLAT_OF_PENTA = {
    "x": mul(-1, P1, pow_(_DEN, -1)),
    "y": mul(-1, P2, pow_(_DEN, -1)),
    "z": mul(-1, P3, pow_(_DEN, -1)),
}

# sphere coordinates of a null-cone point: s_j = i x_j / x5, s4 = -i x4 / x5
SPHERE_OF_PENTA = {
    "s1": mul(_I, P1, pow_(P5, -1)),
    "s2": mul(_I, P2, pow_(P5, -1)),
    "s3": mul(_I, P3, pow_(P5, -1)),
    "s4": mul(-1, _I, P4, pow_(P5, -1)),
}

STEREOGRAPHIC = ChartMap(
    "stereographic",
    x_chart="sphere",
    x_coords=SPHERE,
    u_chart="flat",
    u_coords=FLAT,
    x_of_u=tuple(SPHERE_OF_FLAT[n] for n in SPHERE),
)


@dataclass(frozen=True)
class Chart:
    id: str
    coords: Tuple[str, ...]
    constraints: Tuple[Expr, ...] = ()


FLAT_CHART = Chart("flat", FLAT)
SPHERE_CHART = Chart("sphere", SPHERE, (add(*[pow_(sym(s), 2) for s in SPHERE], -1),))
PENTA_CHART = Chart("penta", PENTA, (add(*[pow_(sym(p), 2) for p in PENTA]),))

_CHARTS = {c.id: c for c in (FLAT_CHART, SPHERE_CHART, PENTA_CHART)}


def get_chart(chart_id: str) -> Chart:
    return _CHARTS[chart_id]


# ---------------------------------------------------------------------------
# point conversion (exact)


def _qc_env(values: Dict[str, QC]):
    return values


def convert_point(values: Dict[str, QC], src: str, dst: str) -> Dict[str, QC]:
    """Convert an exact point between charts; raises SingularLocus off-domain."""
    if src == dst:
        return dict(values)
    if src == "flat":
        Xv, Yv, Zv = values["x"], values["y"], values["z"]
        r2 = Xv * Xv + Yv * Yv + Zv * Zv
        one = QC.make(1)
        if dst == "sphere":
            d = r2 + one
            if d.is_zero():
                raise SingularLocus("r^2 = -1 has no sphere image")
            di = d.inv()
            two = QC.make(2)
            return {
                "s1": two * Xv * di,
                "s2": two * Yv * di,
                "s3": two * Zv * di,
                "s4": (one - r2) * di,
            }
        if dst == "penta":
            two = QC.make(2)
            i = QC.make(0, 1)
            return {
                "x1": two * Xv,
                "x2": two * Yv,
                "x3": two * Zv,
                "x4": r2 - one,
                "x5": i * (r2 + one),
            }
    if src == "sphere":
        one = QC.make(1)
        d = values["s4"] + one
        if dst == "flat":
            if d.is_zero():
                raise SingularLocus("s4 = -1 is the stereographic pole")
            di = d.inv()
            return {"x": values["s1"] * di, "y": values["s2"] * di, "z": values["s3"] * di}
        if dst == "penta":
            return convert_point(convert_point(values, "sphere", "flat"), "flat", "penta")
    if src == "penta":
        i = QC.make(0, 1)
        den = values["x4"] + i * values["x5"]
        if dst == "flat":
            if den.is_zero():
                raise SingularLocus("x4 + i x5 = 0 is the point at infinity")
            dinv = den.inv()
            m = QC.make(-1)
            return {
                "x": m * values["x1"] * dinv,
                "y": m * values["x2"] * dinv,
                "z": m * values["x3"] * dinv,
            }
        if dst == "sphere":
            return convert_point(convert_point(values, "penta", "flat"), "flat", "sphere")
    raise ValueError(f"no conversion {src} -> {dst}")


def sample_null_cone(seed: int, cfg: Optional[TestConfig] = None) -> SamplePoint:
    """Deterministic exact point on the null cone (image of a flat sample)."""
    cfg = (cfg or DEFAULT_CONFIG).with_(seed=seed)
    stream = point_stream(PENTA, "nullcone", PENTA, cfg, "null-cone-sample")
    values = next(stream)
    return SamplePoint(values, digits=cfg.digits, provenance=f"seed={seed}")


# ---------------------------------------------------------------------------
# potentials


@dataclass(frozen=True)
class PotentialFamily:
    """V = sum_j a_j V^(j) on a chart; members are parameter-free."""

    chart: str
    members: Tuple[Tuple[str, Expr], ...]
    singular: Tuple[Expr, ...] = ()

    def __post_init__(self):
        names = [p for p, _ in self.members]
        if len(set(names)) != len(names):
            raise ValueError("duplicate parameter names")
        for p, b in self.members:
            if b.free & set(names):
                raise ValueError(f"member {p} is not parameter-free")

    @property
    def params(self) -> Tuple[str, ...]:
        return tuple(p for p, _ in self.members)

    def basis(self) -> Tuple[Expr, ...]:
        return tuple(b for _, b in self.members)

    def potential(self) -> Expr:
        return add(*[mul(sym(p), b) for p, b in self.members])

    def member(self, param: str) -> Expr:
        for p, b in self.members:
            if p == param:
                return b
        raise UnknownParameter(param)

    def relabel(self, mapping: Dict[str, str]) -> "PotentialFamily":
        return PotentialFamily(
            self.chart,
            tuple((mapping.get(p, p), b) for p, b in self.members),
            self.singular,
        )


def potential_to_penta(v: Expr, src: str) -> Expr:
    """Express a potential as the degree(-2) null-cone density V_B."""
    if src == "penta":
        return v
    if src == "flat":
        return mul(substitute(v, FLAT_OF_PENTA), pow_(_DEN, -2))
    if src == "sphere":
        # V_B = -V_S(s(x)) / x5^2
        return mul(-1, substitute(v, SPHERE_OF_PENTA), pow_(P5, -2))
    raise ValueError(src)


def potential_from_penta(v_b: Expr, dst: str) -> Expr:
    if dst == "penta":
        return v_b
    if dst == "flat":
        # (x4+ix5)^2 V_B on the T=1 section, where x4+ix5 = -2
        return mul(4, substitute(v_b, PENTA_OF_FLAT))
    if dst == "sphere":
        # V_S = (1+s4)^(-2) V_F (s -> flat substitution)
        v_f = mul(4, substitute(v_b, PENTA_OF_FLAT))
        v_s = substitute(v_f, FLAT_OF_SPHERE)
        return mul(v_s, pow_(add(1, S4), -2))
    raise ValueError(dst)


def convert_potential(v: PotentialFamily, dst: str) -> PotentialFamily:
    """Basiswise conformal-factor conversion between charts."""
    if v.chart == dst:
        return v
    members = tuple(
        (p, potential_from_penta(potential_to_penta(b, v.chart), dst))
        for p, b in v.members
    )
    return PotentialFamily(dst, members, v.singular)


# ---------------------------------------------------------------------------
# systems


@dataclass(frozen=True)
class LaplaceSystem:
    """Hamiltonian H = (1/metric) Delta + V with its potential family."""

    family: PotentialFamily
    metric: Expr = ONE  # conformal factor: ds^2 = metric * (flat)
    tag: str = ""

    @property
    def chart(self) -> str:
        return self.family.chart

    def hamiltonian(self) -> DiffOp:
        chart = get_chart(self.chart)
        lap = laplacian(chart.id, chart.coords)
        if self.metric is not ONE:
            lap = lap.scale(pow_(self.metric, -1))
        return lap + DiffOp.mult(chart.id, chart.coords, self.family.potential())


def flat_system(members, tag: str = "") -> LaplaceSystem:
    fam = PotentialFamily("flat", tuple((p, con(b)) for p, b in members))
    return LaplaceSystem(fam, ONE, tag)


# ---------------------------------------------------------------------------
# curvature and self-adjoint form


def scalar_curvature(lam: Expr) -> Expr:
    """Scalar curvature of ds^2 = lam (dx^2+dy^2+dz^2) on the flat chart."""
    lam = con(lam)
    grads = [differentiate(lam, n) for n in FLAT]
    lap = add(*[differentiate(g, n) for g, n in zip(grads, FLAT)])
    grad2 = add(*[mul(g, g) for g in grads])
    return add(
        mul(-2, lap, pow_(lam, -2)),
        mul(con(Fraction(3, 2)), grad2, pow_(lam, -3)),
    )


def self_adjoint_form(lam: Expr, v: PotentialFamily) -> LaplaceSystem:
    """H-hat = (1/lam) Delta + V-hat with V-hat = V + R/8.

    The curvature shift lands on a fresh constant-coupling member when the
    space has constant curvature; otherwise it deforms the basis members
    only through the explicit R/8 term (kept as a parameter-free member
    with coupling 1).
    """
    lam = con(lam)
    if v.chart != "flat":
        raise ValueError("self_adjoint_form acts on the flat chart")
    shift = mul(con(Fraction(1, 8)), scalar_curvature(lam))
    members = v.members + (("_curv", shift),) if shift is not ZERO else v.members
    fam = PotentialFamily("flat", members, v.singular)
    return LaplaceSystem(fam, lam, tag="self-adjoint")


def measure_form_hamiltonian(lam: Expr, v: Expr) -> DiffOp:
    """The formally self-adjoint operator lam^(-3/2) d_k (lam^(1/2) d_k .) + V."""
    lam = con(lam)
    op = DiffOp.zero("flat", FLAT)
    for n in FLAT:
        d = DiffOp.partial("flat", FLAT, n)
        inner = DiffOp.mult("flat", FLAT, pow_(lam, Fraction(1, 2))).compose(d)
        op = op + DiffOp.mult("flat", FLAT, pow_(lam, Fraction(-3, 2))).compose(d).compose(inner)
    return op + DiffOp.mult("flat", FLAT, con(v))


def gauge_normalize(lam: Expr, v: Expr) -> DiffOp:
    """e^R H e^{-R} with R = (1/4) ln lam, computed without materializing R."""
    h = measure_form_hamiltonian(lam, v)
    return gauge_conjugate_power(h, con(lam), Fraction(-1, 4))


# ---------------------------------------------------------------------------
# conformal Stackel transform


def conformal_stackel_transform(sys: LaplaceSystem, u_param: str) -> LaplaceSystem:
    """Divide the Laplace operator by the chosen basis member U.

    The chosen member's coupling becomes the additive constant of the new
    system, the metric becomes U, and all other members are divided by U.
    """
    fam = sys.family
    if fam.chart != "flat":
        raise ValueError("CST is defined on the flat-chart Laplace form")
    u0 = fam.member(u_param)
    if u0 is ONE:
        return LaplaceSystem(fam, sys.metric, sys.tag)
    u_inv = pow_(u0, -1)
    members = []
    for p, b in fam.members:
        if p == u_param:
            members.append((p, ONE))
        else:
            members.append((p, mul(b, u_inv)))
    new_fam = PotentialFamily("flat", tuple(members), fam.singular)
    return LaplaceSystem(new_fam, u0, tag=f"{sys.tag}/CST[{u_param}]")


# ---------------------------------------------------------------------------
# conformal reflattening induced by an O(5) change of pentaspherical frame


def penta_frame_change(rows: Sequence[Sequence[QC]]):
    """Flat-chart data of x' -> x where penta(x) = R . penta(x').

    Returns (coordinate map dict for substitution into V_F, conformal factor)
    so that V'_F = factor * V_F(g(x', y', z')).
    """
    comps = []
    for r in range(5):
        acc = []
        for cidx, name in enumerate(PENTA):
            q = rows[r][cidx]
            if q.is_zero():
                continue
            acc.append(mul(con(q), PENTA_OF_FLAT[name]))
        comps.append(add(*acc))
    den = add(comps[3], mul(_I, comps[4]))
    dinv = pow_(den, -1)
    gmap = {
        "x": mul(-1, comps[0], dinv),
        "y": mul(-1, comps[1], dinv),
        "z": mul(-1, comps[2], dinv),
    }
    factor = mul(4, pow_(den, -2))
    return gmap, factor


def apply_frame_change(v_flat: Expr, rows: Sequence[Sequence[QC]]) -> Expr:
    gmap, factor = penta_frame_change(rows)
    return mul(factor, substitute(v_flat, gmap))
