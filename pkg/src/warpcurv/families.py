"""Closed-form warping-function families and their verification machinery.

Each generator returns the complete list of families matching the supplied
constants, or an empty list when no closed form exists.  A family knows

* its governed profile: the function its linear ODE controls (the warping
  itself or an auxiliary power of it),
* a residual system: exact expressions that vanish identically on the
  family, evaluated over a t-grid,
* how to rebuild the actual warping expressions for end-to-end checks.

Families without a closed form (`numeric_only`) carry the governing ODE
right-hand side instead and are handled by the integrator.

Nonexistence in the contradiction branches is evidenced by lattice scans:
the residual system stays bounded away from zero over the whole lattice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .einstein import ResidualReport
from .errors import (
    ExprError,
    InvalidDimension,
    LengthMismatch,
    NonPositiveWarping,
    StepTooCoarse,
    UnsupportedType,
    WarpcurvError,
)
from .exprs import Const, Cos, Exp, Prod, ScalarExpr, Sin, Sqrt, Var, eval_jet

_T = Var("t")
_EQ_TOL = 1e-9


def _close(a, b, tol=_EQ_TOL):
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


def _exp_t(rate):
    return Exp(Prod(Const(rate), _T))


def _cos_t(omega):
    return Cos(Prod(Const(omega), _T))


def _sin_t(omega):
    return Sin(Prod(Const(omega), _T))


def _sum_exp(c1, r1, c2, r2):
    return Const(c1) * _exp_t(r1) + Const(c2) * _exp_t(r2)


def profile_derivatives(expr, ts):
    """u, u', u'' of a single-variable expression over a grid."""
    ts = np.asarray(ts, dtype=float)
    vals = np.zeros((3, len(ts)))
    for j, t in enumerate(ts):
        jet = eval_jet(expr, ("t",), [t], order=2)
        vals[0, j] = jet.val
        vals[1, j] = jet.grad[0]
        vals[2, j] = jet.hess[0, 0]
    return vals


@dataclass
class SolutionFamily:
    """One classified closed-form (or integrator-backed) solution family."""

    family_id: str
    case: str
    profile_name: str
    params: dict
    free_params: tuple
    param_ranges: dict
    constraints: tuple = ()
    numeric_only: bool = False
    ode_order: int = 2
    _profile_builder: object = None
    _residuals: object = None
    _ode_rhs: object = None
    _warpings: object = None

    def merged(self, overrides=None):
        p = dict(self.params)
        if overrides:
            p.update(overrides)
        return p

    def profile(self, overrides=None) -> ScalarExpr:
        if self.numeric_only:
            raise WarpcurvError(f"{self.family_id} has no closed-form profile")
        return self._profile_builder(self.merged(overrides))

    def check_positive(self, overrides=None, interval=(0.0, 1.0), samples=33):
        expr = self.profile(overrides)
        ts = np.linspace(*interval, samples)
        try:
            vals = profile_derivatives(expr, ts)[0]
        except ExprError as exc:
            raise NonPositiveWarping(str(exc)) from exc
        if np.min(vals) <= 0.0:
            raise NonPositiveWarping(
                f"{self.family_id} profile not positive on {interval}"
            )

    def residuals(self, ts, overrides=None):
        """Residual arrays of the governing system, keyed by equation name."""
        if self.numeric_only:
            raise WarpcurvError(f"{self.family_id} is integrator-backed only")
        p = self.merged(overrides)
        return self._residuals(self._profile_builder(p), p, np.asarray(ts, dtype=float))

    def max_residual(self, ts, overrides=None):
        res = self.residuals(ts, overrides)
        return max(float(np.max(np.abs(v))) for v in res.values())

    def ode_rhs(self, overrides=None):
        """Right-hand side of u'' = f(t, u, u') (or u' = f(t, u) if first order)."""
        return self._ode_rhs(self.merged(overrides))

    def warpings(self, overrides=None):
        """Warping expressions for instantiating a full product spec."""
        if self._warpings is None:
            raise WarpcurvError(f"{self.family_id} does not map back to warpings")
        p = self.merged(overrides)
        expr = None if self.numeric_only else self._profile_builder(p)
        return self._warpings(expr, p)

    def sample_params(self, rng, interval=(0.0, 1.0), max_tries=80):
        """Admissible random parameter draw keeping the profile positive."""
        for _ in range(max_tries):
            out = dict(self.params)
            for name in self.free_params:
                if name == "sign":
                    out[name] = float(rng.choice([-1.0, 1.0]))
                else:
                    lo, hi = self.param_ranges.get(name, (0.25, 1.75))
                    out[name] = float(rng.uniform(lo, hi))
            if self.numeric_only:
                return out
            try:
                self.check_positive(out, interval)
            except NonPositiveWarping:
                continue
            return out
        raise NonPositiveWarping(
            f"could not sample admissible parameters for {self.family_id}"
        )


# ---------------------------------------------------------------------------
# Robertson-Walker Einstein families


def _grw_einstein_residual_fn(l, lam, lam_fiber):
    def residuals(expr, p, ts):
        f, df, ddf = profile_derivatives(expr, ts)
        trace = l * (1.0 - ddf / f) - lam
        fiber = lam_fiber + (1 - l) * df**2 + (lam / l - 1 - lam) * f**2 + l * df * f
        return {"einstein-trace": trace, "einstein-fiber": fiber}

    return residuals


def grw_einstein_family(l, lam, lam_fiber):
    """Closed-form warpings making interval x fiber Einstein at constant lam.

    Exactly two families exist: the exponential warping with both constants
    zero, and the constant warping sqrt(lam_fiber / l) when lam equals the
    fiber dimension and the fiber constant is positive.
    """
    if l < 2:
        raise InvalidDimension("fiber dimension must exceed 1")
    out = []
    if _close(lam, 0.0) and _close(lam_fiber, 0.0):
        out.append(SolutionFamily(
            family_id="grw-einstein-exponential",
            case="exponential",
            profile_name="f",
            params={"c1": 1.0, "l": l, "lam": 0.0, "lam_fiber": 0.0},
            free_params=("c1",),
            param_ranges={"c1": (0.2, 2.0)},
            constraints=("c1 > 0",),
            _profile_builder=lambda p: Const(p["c1"]) * _exp_t(1.0),
            _residuals=_grw_einstein_residual_fn(l, 0.0, 0.0),
            _ode_rhs=lambda p: (lambda t, u, v: u),
            _warpings=lambda expr, p: [expr],
        ))
    if _close(lam, float(l)) and lam_fiber > _EQ_TOL:
        c = math.sqrt(lam_fiber / l)
        out.append(SolutionFamily(
            family_id="grw-einstein-constant",
            case="constant",
            profile_name="f",
            params={"l": l, "lam": float(l), "lam_fiber": lam_fiber, "c": c},
            free_params=(),
            param_ranges={},
            constraints=("lam_fiber > 0",),
            _profile_builder=lambda p: Const(p["c"]),
            _residuals=_grw_einstein_residual_fn(l, float(l), lam_fiber),
            _ode_rhs=lambda p: (lambda t, u, v: 0.0 * u),
            _warpings=lambda expr, p: [expr],
        ))
    return out


# ---------------------------------------------------------------------------
# Robertson-Walker constant-scalar families


def grw_scalar_threshold(l):
    """Target scalar value separating real from complex characteristic roots."""
    if l == 3:
        return 75.0 / 16.0
    return l**3 / (4.0 * (l + 1.0)) + l


def grw_scalar_discriminant(l, scalar):
    """Discriminant of the characteristic polynomial of the profile equation."""
    if l == 3:
        return 25.0 / 4.0 - 4.0 * scalar / 3.0
    return l**2 / 4.0 + (l + 1.0) * (l - scalar) / l


def _grw_scalar_identity(l, scalar, s_fiber, v, dv, ddv):
    """Residual of the closed-form scalar curvature at warping f = sqrt(v)."""
    f = np.sqrt(v)
    df = dv / (2.0 * f)
    ddf = ddv / (2.0 * f) - dv**2 / (4.0 * v * f)
    return (
        s_fiber / v
        - 2.0 * l * ddf / f
        - l * (l - 1) * (df / f) ** 2
        + l
        + l**2 * df / f
        - scalar
    )


def _v_family(fid, case, params, builder, scalar, s_fiber,
              ranges=None):
    def residuals(expr, p, ts):
        v, dv, ddv = profile_derivatives(expr, ts)
        ode = ddv - 1.5 * dv + (scalar / 3.0 - 1.0) * v - s_fiber / 3.0
        scal = _grw_scalar_identity(3, scalar, s_fiber, v, dv, ddv)
        return {"profile-ode": ode, "scalar-identity": scal}

    if ranges is None:
        # keep v positive despite a possibly large negative constant part
        lift = max(0.0, -params.get("shift", 0.0))
        ranges = {"c1": (0.5 + 1.15 * lift, 1.8 + 1.3 * lift), "c2": (0.1, 1.0)}
    return SolutionFamily(
        family_id=fid,
        case=case,
        profile_name="v",
        params=params,
        free_params=("c1", "c2"),
        param_ranges=ranges,
        constraints=("v > 0 on the interval",),
        _profile_builder=builder,
        _residuals=residuals,
        _ode_rhs=lambda p: (
            lambda t, u, w: 1.5 * w - (scalar / 3.0 - 1.0) * u + s_fiber / 3.0
        ),
        _warpings=lambda expr, p: [Sqrt(expr)],
    )


def _w_family(fid, case, params, builder, l, scalar):
    expo = 4.0 / (l + 1.0)

    def residuals(expr, p, ts):
        w, dw, ddw = profile_derivatives(expr, ts)
        ode = ddw - (l / 2.0) * dw + ((l + 1.0) / 4.0) * ((scalar - l) / l) * w
        v = w**expo
        dv = expo * w ** (expo - 1) * dw
        ddv = expo * (expo - 1) * w ** (expo - 2) * dw**2 + expo * w ** (expo - 1) * ddw
        scal = _grw_scalar_identity(l, scalar, 0.0, v, dv, ddv)
        return {"profile-ode": ode, "scalar-identity": scal}

    return SolutionFamily(
        family_id=fid,
        case=case,
        profile_name="w",
        params={**params, "exponent": expo},
        free_params=("c1", "c2"),
        param_ranges={"c1": (0.4, 1.5), "c2": (0.05, 0.8)},
        constraints=("w > 0 on the interval",),
        _profile_builder=builder,
        _residuals=residuals,
        _ode_rhs=lambda p: (
            lambda t, u, w: (l / 2.0) * w - ((l + 1.0) / 4.0) * ((scalar - l) / l) * u
        ),
        _warpings=lambda expr, p: [expr ** (p["exponent"] / 2.0)],
    )


def grw_scalar_family(l, scalar, s_fiber):
    """Warping families giving constant total scalar curvature.

    A three-dimensional fiber admits closed forms for any fiber scalar;
    other dimensions only for vanishing fiber scalar, otherwise the
    governing equation is nonlinear and the family is integrator-backed.
    """
    if l < 1:
        raise InvalidDimension("fiber dimension must be at least 1")
    families = []
    if l == 3:
        if _close(scalar, 3.0):
            families.append(_v_family(
                "grw-scalar-l3-degenerate", "degenerate-trace",
                {"c1": 1.0, "c2": 0.3, "scalar": 3.0, "s_fiber": s_fiber, "l": 3},
                lambda p: (Const(p["c1"]) + Const(-2.0 * p["s_fiber"] / 9.0) * _T
                           + Const(p["c2"]) * _exp_t(1.5)),
                3.0, s_fiber,
                ranges={"c1": (0.6, 2.0), "c2": (0.05, 0.8)},
            ))
            return families
        disc = grw_scalar_discriminant(3, scalar)
        shift = s_fiber / (scalar - 3.0)
        if disc > _EQ_TOL:
            rp = (1.5 + math.sqrt(disc)) / 2.0
            rm = (1.5 - math.sqrt(disc)) / 2.0
            families.append(_v_family(
                "grw-scalar-l3-distinct-roots", "distinct-roots",
                {"c1": 1.0, "c2": 0.5, "scalar": scalar, "s_fiber": s_fiber,
                 "l": 3, "shift": shift, "r_plus": rp, "r_minus": rm},
                lambda p: _sum_exp(p["c1"], p["r_plus"], p["c2"], p["r_minus"])
                + Const(p["shift"]),
                scalar, s_fiber,
            ))
        elif abs(disc) <= _EQ_TOL:
            families.append(_v_family(
                "grw-scalar-l3-double-root", "double-root",
                {"c1": 1.0, "c2": 0.4, "scalar": scalar, "s_fiber": s_fiber,
                 "l": 3, "shift": shift},
                lambda p: (Const(p["c1"]) + Const(p["c2"]) * _T) * _exp_t(0.75)
                + Const(p["shift"]),
                scalar, s_fiber,
            ))
        else:
            omega = math.sqrt(-disc) / 2.0
            families.append(_v_family(
                "grw-scalar-l3-complex-roots", "complex-roots",
                {"c1": 1.0, "c2": 0.4, "scalar": scalar, "s_fiber": s_fiber,
                 "l": 3, "shift": shift, "omega": omega},
                lambda p: _exp_t(0.75) * (Const(p["c1"]) * _cos_t(p["omega"])
                                          + Const(p["c2"]) * _sin_t(p["omega"]))
                + Const(p["shift"]),
                scalar, s_fiber,
                ranges={"c1": (0.8, 1.8), "c2": (0.05, 0.5)},
            ))
        return families

    if abs(s_fiber) <= _EQ_TOL:
        disc = grw_scalar_discriminant(l, scalar)
        common = {"scalar": scalar, "s_fiber": 0.0, "l": l}
        if disc > _EQ_TOL:
            rp = (l / 2.0 + math.sqrt(disc)) / 2.0
            rm = (l / 2.0 - math.sqrt(disc)) / 2.0
            families.append(_w_family(
                "grw-scalar-power-distinct-roots", "distinct-roots",
                {"c1": 1.0, "c2": 0.5, "r_plus": rp, "r_minus": rm, **common},
                lambda p: _sum_exp(p["c1"], p["r_plus"], p["c2"], p["r_minus"]),
                l, scalar,
            ))
        elif abs(disc) <= _EQ_TOL:
            families.append(_w_family(
                "grw-scalar-power-double-root", "double-root",
                {"c1": 1.0, "c2": 0.4, **common},
                lambda p: (Const(p["c1"]) + Const(p["c2"]) * _T) * _exp_t(l / 4.0),
                l, scalar,
            ))
        else:
            omega = math.sqrt(-disc) / 2.0
            families.append(_w_family(
                "grw-scalar-power-complex-roots", "complex-roots",
                {"c1": 1.0, "c2": 0.3, "omega": omega, **common},
                lambda p: _exp_t(l / 4.0) * (Const(p["c1"]) * _cos_t(p["omega"])
                                             + Const(p["c2"]) * _sin_t(p["omega"])),
                l, scalar,
            ))
        return families

    # fiber scalar present and l != 3: nonlinear equation, integrator only
    expo = 4.0 / (l + 1.0)
    families.append(SolutionFamily(
        family_id="grw-scalar-power-forced",
        case="forced-nonlinear",
        profile_name="w",
        params={"scalar": scalar, "s_fiber": s_fiber, "l": l, "exponent": expo,
                "w0": 1.0, "dw0": 0.2},
        free_params=("w0", "dw0"),
        param_ranges={"w0": (0.6, 1.6), "dw0": (-0.3, 0.6)},
        constraints=("w > 0 along the integration",),
        numeric_only=True,
        _ode_rhs=lambda p: (lambda t, u, v: (
            (p["l"] / 2.0) * v
            - ((p["l"] + 1.0) / 4.0) * ((p["scalar"] - p["l"]) / p["l"]) * u
            + ((p["l"] + 1.0) / 4.0) * (p["s_fiber"] / p["l"]) * u ** (1.0 - p["exponent"])
        )),
    ))
    return families


# ---------------------------------------------------------------------------
# Generalized Kasner spacetimes


def kasner_invariants(p, dims):
    """Aggregates (zeta, eta) = (sum l_i p_i, sum l_i p_i^2)."""
    if len(p) != len(dims):
        raise LengthMismatch("exponent and dimension lists differ in length")
    p = np.asarray(p, dtype=float)
    dims = np.asarray(dims, dtype=float)
    return float(dims @ p), float(dims @ p**2)


@dataclass
class KasnerSpec:
    """Single-profile power-law warpings phi^{p_i} over an interval base."""

    exponents: tuple
    dims: tuple
    phi: ScalarExpr

    def __post_init__(self):
        zeta, eta = kasner_invariants(self.exponents, self.dims)
        if eta < -1e-12:
            raise WarpcurvError("eta must be nonnegative")
        if abs(eta) <= 1e-12 and any(abs(x) > 1e-12 for x in self.exponents):
            raise WarpcurvError("eta vanishes only for all-zero exponents")
        if zeta**2 > eta * sum(self.dims) + 1e-9:
            raise WarpcurvError("zeta^2 exceeds the Cauchy-Schwarz bound eta * sum(dims)")
        self.zeta = zeta
        self.eta = eta


def _kasner_system_values(exponents, dims, lam, lam_fibers, phi, dphi, ddphi):
    zeta, eta = kasner_invariants(exponents, dims)
    ltot = float(sum(dims))
    rows = [(eta - zeta) * (dphi / phi) ** 2 + zeta * ddphi / phi + lam - ltot]
    for pi, lam_i in zip(exponents, lam_fibers):
        rows.append(
            lam_i * phi ** (-2.0 * pi)
            - pi * ddphi / phi
            - (zeta - 1.0) * pi * (dphi / phi) ** 2
            + zeta * dphi / phi
            - lam
        )
    return rows


def kasner_einstein_residuals(kspec: KasnerSpec, lam, lam_fibers, grid,
                              tolerance=1e-10):
    """Residuals of the Kasner Einstein classification system.

    One trace equation plus one equation per fiber:
        (eta - zeta) phi'^2/phi^2 + zeta phi''/phi + lam - sum l_i = 0
        lam_i phi^{-2 p_i} - p_i phi''/phi - (zeta - 1) p_i phi'^2/phi^2
            + zeta phi'/phi - lam = 0
    This is the classification system the closed-form families satisfy; for
    exponent vectors that are not all equal it is weaker than the pointwise
    Einstein property of the generic connection (see the oracle tests).
    """
    if len(lam_fibers) != len(kspec.exponents):
        raise LengthMismatch("need one fiber constant per fiber")
    ts = np.asarray(grid, dtype=float)
    phi, dphi, ddphi = profile_derivatives(kspec.phi, ts)
    if np.min(phi) <= 0.0:
        raise NonPositiveWarping("profile must stay positive on the grid")
    rows = _kasner_system_values(kspec.exponents, kspec.dims, lam, lam_fibers,
                                 phi, dphi, ddphi)
    reports = [ResidualReport.from_values("kasner-trace", ts, rows[0], tolerance)]
    for i, row in enumerate(rows[1:]):
        reports.append(ResidualReport.from_values(f"kasner-fiber-{i}", ts, row, tolerance))
    return reports


def kasner_scalar_identity(kspec: KasnerSpec, scalar, s_fibers, grid):
    """Residual of the closed-form scalar curvature for a Kasner profile."""
    ts = np.asarray(grid, dtype=float)
    phi, dphi, ddphi = profile_derivatives(kspec.phi, ts)
    zeta, eta = kspec.zeta, kspec.eta
    nbar1 = float(sum(kspec.dims))  # total dimension minus one
    total = np.zeros(len(ts))
    for pi, si in zip(kspec.exponents, s_fibers):
        total += si * phi ** (-2.0 * pi)
    total += -2.0 * zeta * ddphi / phi
    total += -(eta + zeta**2 - 2.0 * zeta) * (dphi / phi) ** 2
    total += nbar1 * zeta * dphi / phi + nbar1
    return total - scalar


def _check_type(kind, dims):
    if kind == "II":
        if tuple(dims) != (1, 2):
            raise UnsupportedType("type II requires fiber dimensions (1, 2)")
    elif kind == "III":
        if tuple(dims) != (1, 1, 1):
            raise UnsupportedType("type III requires fiber dimensions (1, 1, 1)")
    else:
        raise UnsupportedType(f"unsupported Kasner type {kind!r}")


def _kasner_einstein_residual_fn(exponents, dims, lam, lam_fibers):
    def residuals(expr, p, ts):
        phi, dphi, ddphi = profile_derivatives(expr, ts)
        rows = _kasner_system_values(exponents, dims, lam, lam_fibers,
                                     phi, dphi, ddphi)
        return {f"kasner-eq-{k}": row for k, row in enumerate(rows)}

    return residuals


def _kasner_scalar_residual_fn(exponents, dims, scalar, s_fibers):
    def residuals(expr, p, ts):
        kspec = KasnerSpec(tuple(exponents), tuple(dims), expr)
        return {"scalar-identity": kasner_scalar_identity(kspec, scalar, s_fibers, ts)}

    return residuals


def _phi_exp_family(fid, case, rate_sq, params, residual_builder):
    """Family phi = c0 exp(sign sqrt(rate_sq) t)."""
    rate = math.sqrt(rate_sq)

    def builder(p):
        return Const(p["c0"]) * _exp_t(p["sign"] * rate)

    return SolutionFamily(
        family_id=fid,
        case=case,
        profile_name="phi",
        params={**params, "c0": 1.0, "sign": 1.0, "rate": rate},
        free_params=("c0", "sign"),
        param_ranges={"c0": (0.3, 1.8)},
        constraints=("c0 > 0",),
        _profile_builder=builder,
        _residuals=residual_builder,
        _ode_rhs=lambda p: (lambda t, u, v: rate_sq * u),
        _warpings=lambda expr, p: [expr ** pi for pi in p["p"]],
    )


def kasner_einstein_families(kind, p, dims, lam, lam_fibers):
    """Einstein families of the Kasner classification system.

    Type II (fiber dimensions 1 and 2): either the trace-free exponent case
    with both constants zero, or a vanishing second exponent with constants
    (-6, -9).  Type III (three one-dimensional fibers, not all exponents
    equal): only the trace-free case at zero Einstein constant.
    """
    _check_type(kind, dims)
    zeta, eta = kasner_invariants(p, dims)
    out = []
    if kind == "II":
        p1, p2 = p
        if abs(lam_fibers[0]) > _EQ_TOL:
            raise WarpcurvError("a one-dimensional fiber has zero Einstein constant")
        lam2 = lam_fibers[1]
        if _close(zeta, 0.0) and eta > _EQ_TOL and _close(lam, 0.0) and _close(lam2, 0.0):
            out.append(_phi_exp_family(
                "kasner2-einstein-null-trace", "trace-free-exponents", 3.0 / eta,
                {"p": tuple(p), "dims": tuple(dims), "lam": 0.0,
                 "lam_fibers": tuple(lam_fibers), "zeta": zeta, "eta": eta},
                _kasner_einstein_residual_fn(p, dims, 0.0, lam_fibers),
            ))
        if (abs(p2) <= _EQ_TOL and abs(p1) > _EQ_TOL
                and _close(lam, -6.0) and _close(lam2, -9.0)):
            rate = 3.0 / zeta
            out.append(SolutionFamily(
                family_id="kasner2-einstein-exponential",
                case="degenerate-second-exponent",
                profile_name="phi",
                params={"c1": 1.0, "p": tuple(p), "dims": tuple(dims), "lam": -6.0,
                        "lam_fibers": tuple(lam_fibers), "zeta": zeta, "eta": eta,
                        "rate": rate},
                free_params=("c1",),
                param_ranges={"c1": (0.3, 1.8)},
                constraints=("c1 > 0",),
                _profile_builder=lambda q: Const(q["c1"]) * _exp_t(q["rate"]),
                _residuals=_kasner_einstein_residual_fn(p, dims, -6.0, lam_fibers),
                _ode_rhs=lambda q: (lambda t, u, v: q["rate"] ** 2 * u),
                _warpings=lambda expr, q: [expr ** pi for pi in q["p"]],
            ))
        return out
    if any(abs(x) > _EQ_TOL for x in lam_fibers):
        raise WarpcurvError("one-dimensional fibers have zero Einstein constants")
    distinct = any(abs(p[i] - p[j]) > _EQ_TOL
                   for i in range(3) for j in range(i + 1, 3))
    if distinct and _close(lam, 0.0) and _close(zeta, 0.0) and eta > _EQ_TOL:
        out.append(_phi_exp_family(
            "kasner3-einstein-null-trace", "trace-free-exponents", 3.0 / eta,
            {"p": tuple(p), "dims": tuple(dims), "lam": 0.0,
             "lam_fibers": (0.0, 0.0, 0.0), "zeta": zeta, "eta": eta},
            _kasner_einstein_residual_fn(p, dims, 0.0, (0.0, 0.0, 0.0)),
        ))
    return out


def kasner_scalar_threshold(zeta, eta):
    return 9.0 * zeta**2 / (4.0 * (eta + zeta**2)) + 3.0


def kasner_scalar_discriminant(zeta, eta, scalar):
    return 9.0 / 4.0 - (scalar - 3.0) * (eta + zeta**2) / zeta**2


def _psi_family(fid, case, params, psi_builder, exponents, dims, scalar,
                s_fibers, coeff0, inhom=0.0):
    """Auxiliary-profile family: psi'' - (3/2) psi' + coeff0 psi + inhom = 0,
    with warping profile phi = psi^{2 zeta / (eta + zeta^2)}."""
    zeta, eta = kasner_invariants(exponents, dims)
    mu = 2.0 * zeta / (eta + zeta**2)
    shift = -inhom / coeff0 if abs(inhom) > 0.0 else 0.0

    def psi_full(p):
        psi = psi_builder(p)
        return psi + Const(shift) if abs(shift) > 0.0 else psi

    def residuals(expr, p, ts):
        psi, dpsi, ddpsi = profile_derivatives(expr, ts)
        ode = ddpsi - 1.5 * dpsi + coeff0 * psi + inhom
        kspec = KasnerSpec(tuple(exponents), tuple(dims), expr ** mu)
        scal = kasner_scalar_identity(kspec, scalar, s_fibers, ts)
        return {"profile-ode": ode, "scalar-identity": scal}

    lift = max(0.0, -shift)
    return SolutionFamily(
        family_id=fid,
        case=case,
        profile_name="psi",
        params={**params, "mu": mu, "shift": shift},
        free_params=("c1", "c2"),
        param_ranges={"c1": (0.5 + 1.15 * lift, 1.6 + 1.3 * lift), "c2": (0.05, 0.7)},
        constraints=("psi > 0 on the interval",),
        _profile_builder=psi_full,
        _residuals=residuals,
        _ode_rhs=lambda p: (lambda t, u, v: 1.5 * v - coeff0 * u - inhom),
        _warpings=lambda expr, p: [(expr ** p["mu"]) ** pi for pi in exponents],
    )


def _psi_root_families(fid_prefix, exponents, dims, scalar, s_fibers,
                       coeff0, disc, inhom=0.0):
    if disc > _EQ_TOL:
        rp = (1.5 + math.sqrt(disc)) / 2.0
        rm = (1.5 - math.sqrt(disc)) / 2.0
        return [_psi_family(
            f"{fid_prefix}-distinct-roots", "distinct-roots",
            {"c1": 1.0, "c2": 0.4, "r_plus": rp, "r_minus": rm, "scalar": scalar},
            lambda p: _sum_exp(p["c1"], p["r_plus"], p["c2"], p["r_minus"]),
            exponents, dims, scalar, s_fibers, coeff0, inhom,
        )]
    if abs(disc) <= _EQ_TOL:
        return [_psi_family(
            f"{fid_prefix}-double-root", "double-root",
            {"c1": 1.0, "c2": 0.3, "scalar": scalar},
            lambda p: (Const(p["c1"]) + Const(p["c2"]) * _T) * _exp_t(0.75),
            exponents, dims, scalar, s_fibers, coeff0, inhom,
        )]
    omega = math.sqrt(-disc) / 2.0
    return [_psi_family(
        f"{fid_prefix}-complex-roots", "complex-roots",
        {"c1": 1.0, "c2": 0.25, "omega": omega, "scalar": scalar},
        lambda p: _exp_t(0.75) * (Const(p["c1"]) * _cos_t(p["omega"])
                                  + Const(p["c2"]) * _sin_t(p["omega"])),
        exponents, dims, scalar, s_fibers, coeff0, inhom,
    )]


def _constant_phi_family(fid, p, dims, scalar, s_fibers):
    return SolutionFamily(
        family_id=fid,
        case="constant",
        profile_name="phi",
        params={"c0": 1.0, "p": tuple(p), "dims": tuple(dims), "scalar": scalar},
        free_params=("c0",),
        param_ranges={"c0": (0.3, 2.0)},
        constraints=("c0 > 0",),
        _profile_builder=lambda q: Const(q["c0"]),
        _residuals=_kasner_scalar_residual_fn(p, dims, scalar, s_fibers),
        _ode_rhs=lambda q: (lambda t, u, v: 0.0 * u),
        _warpings=lambda expr, q: [expr ** pi for pi in q["p"]],
    )


def kasner_scalar_families(kind, p, dims, scalar, s_fibers):
    """Constant-scalar-curvature families for four-dimensional Kasner types.

    Type III has the complete closed-form classification keyed on the
    discriminant; type II linearizes only when the surface fiber's scalar
    vanishes, the second exponent vanishes, or the exponent combination
    degenerates to a constant forcing term, and otherwise falls back to the
    integrator.
    """
    _check_type(kind, dims)
    zeta, eta = kasner_invariants(p, dims)
    if len(s_fibers) != len(dims):
        raise LengthMismatch("need one fiber scalar per fiber")
    out = []
    if kind == "III":
        if any(abs(s) > _EQ_TOL for s in s_fibers):
            raise WarpcurvError("one-dimensional fibers have zero scalar curvature")
        if abs(zeta) <= _EQ_TOL:
            if _close(scalar, 3.0):
                out.append(_constant_phi_family("kasner3-scalar-static", p, dims,
                                                scalar, s_fibers))
            elif eta > _EQ_TOL and scalar < 3.0:
                out.append(_phi_exp_family(
                    "kasner3-scalar-exponential", "exponential",
                    (3.0 - scalar) / eta,
                    {"p": tuple(p), "dims": tuple(dims), "scalar": scalar,
                     "zeta": zeta, "eta": eta},
                    _kasner_scalar_residual_fn(p, dims, scalar, s_fibers),
                ))
            return out
        disc = kasner_scalar_discriminant(zeta, eta, scalar)
        coeff0 = (scalar - 3.0) * (eta + zeta**2) / (4.0 * zeta**2)
        out.extend(_psi_root_families("kasner3-scalar", p, dims, scalar, s_fibers,
                                      coeff0, disc))
        return out

    # type II
    if abs(s_fibers[0]) > _EQ_TOL:
        raise WarpcurvError("the one-dimensional fiber has zero scalar curvature")
    s2 = s_fibers[1]
    if abs(zeta) <= _EQ_TOL:
        if abs(eta) <= _EQ_TOL:
            if _close(scalar, s2 + 3.0):
                out.append(_constant_phi_family("kasner2-scalar-static", p, dims,
                                                scalar, s_fibers))
            return out
        if abs(s2) <= _EQ_TOL:
            if _close(scalar, 3.0):
                out.append(_constant_phi_family("kasner2-scalar-static", p, dims,
                                                scalar, s_fibers))
            elif scalar < 3.0:
                out.append(_phi_exp_family(
                    "kasner2-scalar-exponential", "exponential",
                    (3.0 - scalar) / eta,
                    {"p": tuple(p), "dims": tuple(dims), "scalar": scalar,
                     "zeta": zeta, "eta": eta},
                    _kasner_scalar_residual_fn(p, dims, scalar, s_fibers),
                ))
            return out
        out.append(_kasner2_first_order_numeric(p, dims, scalar, s2, eta))
        return out
    mu_expo = 1.0 - 4.0 * p[1] * zeta / (eta + zeta**2)
    coeff0 = (scalar - 3.0) * (eta + zeta**2) / (4.0 * zeta**2)
    if abs(s2) <= _EQ_TOL:
        disc = kasner_scalar_discriminant(zeta, eta, scalar)
        out.extend(_psi_root_families("kasner2-scalar", p, dims, scalar, s_fibers,
                                      coeff0, disc))
        return out
    if abs(p[1]) <= _EQ_TOL:
        # fiber term proportional to the profile: fold into the coefficient
        eff = scalar - 3.0 - s2
        disc = 9.0 / 4.0 - eff * (eta + zeta**2) / zeta**2
        coeff = eff * (eta + zeta**2) / (4.0 * zeta**2)
        out.extend(_psi_root_families("kasner2-scalar-merged", p, dims, scalar,
                                      s_fibers, coeff, disc))
        return out
    if abs(mu_expo) <= _EQ_TOL and not _close(scalar, 3.0):
        # fiber term constant: inhomogeneous linear equation
        disc = kasner_scalar_discriminant(zeta, eta, scalar)
        inhom = -s2 * (eta + zeta**2) / (4.0 * zeta**2)
        out.extend(_psi_root_families("kasner2-scalar-offset", p, dims, scalar,
                                      s_fibers, coeff0, disc, inhom=inhom))
        return out
    out.append(_kasner2_second_order_numeric(p, dims, scalar, s2, zeta, eta, mu_expo))
    return out


def _kasner2_first_order_numeric(p, dims, scalar, s2, eta):
    def rhs(q):
        sign = q.get("sign", 1.0)

        def f(t, u):
            rad = (s2 * u ** (-2.0 * p[1]) + 3.0 - scalar) / eta
            if rad < 0:
                raise NonPositiveWarping("gradient radicand went negative")
            return sign * u * math.sqrt(rad)

        return f

    return SolutionFamily(
        family_id="kasner2-scalar-forced-gradient",
        case="forced-first-order",
        profile_name="phi",
        params={"p": tuple(p), "dims": tuple(dims), "scalar": scalar, "s2": s2,
                "eta": eta, "phi0": 1.0, "sign": 1.0},
        free_params=("phi0", "sign"),
        param_ranges={"phi0": (0.6, 1.5)},
        constraints=("radicand nonnegative along the flow",),
        numeric_only=True,
        ode_order=1,
        _ode_rhs=rhs,
    )


def _kasner2_second_order_numeric(p, dims, scalar, s2, zeta, eta, mu_expo):
    coef = (eta + zeta**2) / (4.0 * zeta**2)

    def rhs(q):
        def f(t, u, v):
            return 1.5 * v + coef * ((3.0 - scalar) * u + s2 * u ** mu_expo)

        return f

    return SolutionFamily(
        family_id="kasner2-scalar-forced",
        case="forced-nonlinear",
        profile_name="psi",
        params={"p": tuple(p), "dims": tuple(dims), "scalar": scalar, "s2": s2,
                "zeta": zeta, "eta": eta, "mu_expo": mu_expo,
                "psi0": 1.0, "dpsi0": 0.2},
        free_params=("psi0", "dpsi0"),
        param_ranges={"psi0": (0.6, 1.5), "dpsi0": (-0.2, 0.5)},
        constraints=("psi > 0 along the integration",),
        numeric_only=True,
        _ode_rhs=rhs,
    )


# ---------------------------------------------------------------------------
# Runge-Kutta machinery


def rk4_integrate(rhs, t0, u0, v0, t1, n_steps):
    """Classical fourth-order integration of u'' = rhs(t, u, u')."""
    h = (t1 - t0) / n_steps
    ts = np.empty(n_steps + 1)
    us = np.empty(n_steps + 1)
    t, u, v = t0, float(u0), float(v0)
    ts[0], us[0] = t, u
    for k in range(n_steps):
        k1u, k1v = v, rhs(t, u, v)
        k2u, k2v = v + h / 2 * k1v, rhs(t + h / 2, u + h / 2 * k1u, v + h / 2 * k1v)
        k3u, k3v = v + h / 2 * k2v, rhs(t + h / 2, u + h / 2 * k2u, v + h / 2 * k2v)
        k4u, k4v = v + h * k3v, rhs(t + h, u + h * k3u, v + h * k3v)
        u += h / 6 * (k1u + 2 * k2u + 2 * k3u + k4u)
        v += h / 6 * (k1v + 2 * k2v + 2 * k3v + k4v)
        t = t0 + (k + 1) * h
        ts[k + 1], us[k + 1] = t, u
    return ts, us


def rk4_integrate_first_order(rhs, t0, u0, t1, n_steps):
    """Classical fourth-order integration of u' = rhs(t, u)."""
    h = (t1 - t0) / n_steps
    ts = np.empty(n_steps + 1)
    us = np.empty(n_steps + 1)
    t, u = t0, float(u0)
    ts[0], us[0] = t, u
    for k in range(n_steps):
        k1 = rhs(t, u)
        k2 = rhs(t + h / 2, u + h / 2 * k1)
        k3 = rhs(t + h / 2, u + h / 2 * k2)
        k4 = rhs(t + h, u + h * k3)
        u += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t = t0 + (k + 1) * h
        ts[k + 1], us[k + 1] = t, u
    return ts, us


def ode_cross_check(family: SolutionFamily, overrides=None, interval=(0.0, 1.0),
                    n_steps=1000, tolerance=1e-6, hard_limit=1e-4):
    """Integrate the family's governing equation from its own initial data.

    The closed form supplies the initial value and slope; the integration
    must track it over the interval.  Deviations beyond `hard_limit` raise
    StepTooCoarse.
    """
    if family.numeric_only:
        raise WarpcurvError(f"{family.family_id} has no closed form to compare against")
    p = family.merged(overrides)
    expr = family._profile_builder(p)
    t0, t1 = interval
    jet = eval_jet(expr, ("t",), [t0], order=1)
    rhs = family._ode_rhs(p)
    ts, us = rk4_integrate(rhs, t0, jet.val, jet.grad[0], t1, n_steps)
    exact = profile_derivatives(expr, ts)[0]
    dev = float(np.max(np.abs(us - exact)))
    if dev > hard_limit:
        raise StepTooCoarse(f"{family.family_id}: integration deviates by {dev:.3e}")
    return ResidualReport("rk4-cross-check", ts, dev, tolerance, dev < tolerance)


def solve_numeric_profile(family: SolutionFamily, overrides=None,
                          interval=(0.0, 1.0), n_steps=1000):
    """Integrate a numeric-only family from its stored initial data."""
    p = family.merged(overrides)
    rhs = family._ode_rhs(p)
    u0 = p.get("w0", p.get("psi0", p.get("phi0", 1.0)))
    if family.ode_order == 1:
        return rk4_integrate_first_order(rhs, interval[0], u0, interval[1], n_steps)
    v0 = p.get("dw0", p.get("dpsi0", 0.0))
    return rk4_integrate(rhs, interval[0], u0, v0, interval[1], n_steps)


# ---------------------------------------------------------------------------
# Nonexistence scans


@dataclass
class ScanReport:
    case_id: str
    grid_shape: tuple
    min_max_residual: float
    threshold: float
    passed: bool
    detail: str = ""


def scan_grw_einstein_oscillatory(l=2, lam=5.0, lam_fiber=1.0, c_range=(-2.0, 2.0),
                                  n_c=41, t_points=33, threshold=0.01):
    """Scan the oscillatory-warping branch for Einstein solutions.

    For lam > l the trace equation forces f = c1 cos(bt) + c2 sin(bt); over
    the (c1, c2) lattice (origin excluded) the fiber equation's residual
    stays bounded away from zero, evidencing nonexistence.
    """
    if lam <= l:
        raise WarpcurvError("scan applies to the oscillatory branch lam > l")
    b = math.sqrt(lam / l - 1.0)
    ts = np.linspace(0.0, 1.0, t_points)
    cos_t, sin_t = np.cos(b * ts), np.sin(b * ts)
    axis = np.linspace(c_range[0], c_range[1], n_c)
    best = np.inf
    for c1 in axis:
        for c2 in axis:
            if c1 == 0.0 and c2 == 0.0:
                continue
            f = c1 * cos_t + c2 * sin_t
            df = b * (-c1 * sin_t + c2 * cos_t)
            res = lam_fiber + (1 - l) * df**2 + (lam / l - 1 - lam) * f**2 + l * df * f
            best = min(best, float(np.max(np.abs(res))))
    return ScanReport(
        case_id="grw-einstein-oscillatory",
        grid_shape=(n_c, n_c),
        min_max_residual=best,
        threshold=threshold,
        passed=best >= threshold,
        detail=f"l={l}, lam={lam}, lam_fiber={lam_fiber}",
    )


def scan_kasner2_einstein_oscillatory(lam=5.0, lam2=1.0, p1=1.0, c_range=(-2.0, 2.0),
                                      n_c=41, t_points=33, threshold=0.01):
    """Scan the oscillatory Kasner branch (lam > 3) for Einstein solutions.

    Uses exponents (p1, 0) so the profile equals the auxiliary oscillator;
    the trace equation holds by construction while the per-fiber equations
    stay bounded away from zero over the lattice.
    """
    if lam <= 3.0:
        raise WarpcurvError("scan applies to the oscillatory branch lam > 3")
    p = (p1, 0.0)
    dims = (1, 2)
    zeta, eta = kasner_invariants(p, dims)
    a = math.sqrt((lam - 3.0) * eta / zeta**2)
    ts = np.linspace(0.0, 1.0, t_points)
    cos_t, sin_t = np.cos(a * ts), np.sin(a * ts)
    axis = np.linspace(c_range[0], c_range[1], n_c)
    big = 1e6
    best = np.inf
    for c1 in axis:
        for c2 in axis:
            if c1 == 0.0 and c2 == 0.0:
                continue
            psi = c1 * cos_t + c2 * sin_t
            dpsi = a * (-c1 * sin_t + c2 * cos_t)
            ddpsi = -a * a * psi
            with np.errstate(divide="ignore", invalid="ignore"):
                rows = _kasner_system_values(p, dims, lam, (0.0, lam2),
                                             psi, dpsi, ddpsi)
            worst = 0.0
            for r in rows:
                r = np.where(np.isfinite(r), np.abs(r), big)
                worst = max(worst, float(np.max(r)))
            best = min(best, worst)
    return ScanReport(
        case_id="kasner2-einstein-oscillatory",
        grid_shape=(n_c, n_c),
        min_max_residual=best,
        threshold=threshold,
        passed=best >= threshold,
        detail=f"lam={lam}, lam2={lam2}, p=({p1}, 0)",
    )


def scan_kasner3_einstein_linear(p=(1.0, 2.0, 3.0), lam=5.0, c_range=(0.1, 2.0),
                                 n_c=41, t_points=33, threshold=0.01):
    """Scan affine-profile candidates phi^zeta = c1 + c2 t for type III.

    In the nonzero-trace branch the per-fiber equations force phi^zeta to be
    affine in t; the scan shows no admissible pair comes close to solving
    the full system.
    """
    dims = (1, 1, 1)
    zeta, eta = kasner_invariants(p, dims)
    if abs(zeta) <= _EQ_TOL:
        raise WarpcurvError("scan applies to the nonzero-trace branch")
    ts = np.linspace(0.0, 1.0, t_points)
    c1_axis = np.linspace(c_range[0], c_range[1], n_c)
    c2_axis = np.linspace(-0.9 * c_range[0], c_range[1], n_c)
    big = 1e6
    best = np.inf
    for c1 in c1_axis:
        for c2 in c2_axis:
            base = c1 + c2 * ts
            if np.min(base) <= 1e-6:
                continue
            ratio = (c2 / zeta) / base  # phi'/phi
            ddphi_over = -(c2**2 / zeta) / base**2 + ratio**2  # phi''/phi
            rows = [(eta - zeta) * ratio**2 + zeta * ddphi_over + lam - 3.0]
            for pi in p:
                rows.append(-pi * (ddphi_over + (zeta - 1.0) * ratio**2)
                            + zeta * ratio - lam)
            worst = 0.0
            for r in rows:
                r = np.where(np.isfinite(r), np.abs(r), big)
                worst = max(worst, float(np.max(r)))
            best = min(best, worst)
    return ScanReport(
        case_id="kasner3-einstein-linear",
        grid_shape=(n_c, n_c),
        min_max_residual=best,
        threshold=threshold,
        passed=best >= threshold,
        detail=f"p={tuple(p)}, lam={lam}",
    )
