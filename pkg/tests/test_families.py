"""Solution-family generators, residuals, integrator cross-checks, scans."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from warpcurv.errors import (
    InvalidDimension,
    LengthMismatch,
    NonPositiveWarping,
    StepTooCoarse,
    UnsupportedType,
    WarpcurvError,
)
from warpcurv.families import (
    KasnerSpec,
    grw_einstein_family,
    grw_scalar_discriminant,
    grw_scalar_family,
    grw_scalar_threshold,
    kasner_einstein_families,
    kasner_einstein_residuals,
    kasner_invariants,
    kasner_scalar_discriminant,
    kasner_scalar_families,
    kasner_scalar_threshold,
    ode_cross_check,
    rk4_integrate,
    scan_grw_einstein_oscillatory,
    scan_kasner2_einstein_oscillatory,
    scan_kasner3_einstein_linear,
    solve_numeric_profile,
)
from warpcurv.exprs import parse_expr

TS = np.linspace(0.0, 1.0, 33)


def draws(fam, rng, n=3):
    return [fam.sample_params(rng) for _ in range(n)]


# -- Robertson-Walker Einstein families --------------------------------------


def test_einstein_exponential_family(rng):
    fams = grw_einstein_family(2, 0.0, 0.0)
    assert [f.family_id for f in fams] == ["grw-einstein-exponential"]
    for params in draws(fams[0], rng):
        assert fams[0].max_residual(TS, params) < 1e-10


def test_einstein_constant_family(rng):
    fams = grw_einstein_family(2, 2.0, 1.0)
    assert [f.family_id for f in fams] == ["grw-einstein-constant"]
    fam = fams[0]
    assert fam.params["c"] == pytest.approx(1 / math.sqrt(2))
    assert fam.max_residual(TS) < 1e-12


def test_einstein_no_family_cases():
    assert grw_einstein_family(2, 5.0, 1.0) == []
    assert grw_einstein_family(2, 0.0, 1.0) == []
    assert grw_einstein_family(2, 2.0, -1.0) == []
    with pytest.raises(InvalidDimension):
        grw_einstein_family(1, 0.0, 0.0)


# -- Robertson-Walker scalar families -----------------------------------------


@pytest.mark.parametrize("scalar,s_fiber,expected", [
    (3.0, 9.0, "grw-scalar-l3-degenerate"),
    (2.0, 9.0, "grw-scalar-l3-distinct-roots"),
    (75.0 / 16.0, 0.0, "grw-scalar-l3-double-root"),
    (75.0 / 16.0, 2.0, "grw-scalar-l3-double-root"),
    (6.0, 1.0, "grw-scalar-l3-complex-roots"),
])
def test_scalar_l3_cases(scalar, s_fiber, expected, rng):
    fams = grw_scalar_family(3, scalar, s_fiber)
    assert [f.family_id for f in fams] == [expected]
    for params in draws(fams[0], rng):
        assert fams[0].max_residual(TS, params) < 1e-10


def test_scalar_l3_degenerate_profile():
    fam = grw_scalar_family(3, 3.0, 9.0)[0]
    expr = fam.profile({"c1": 1.0, "c2": 1.0})
    # v = c1 - 2 t + c2 e^{1.5 t} for fiber scalar 9
    from warpcurv.exprs import eval_value
    got = eval_value(expr, ("t",), [0.5])
    assert got == pytest.approx(1.0 - 2.0 * 0.5 + math.exp(0.75))


@pytest.mark.parametrize("l", [2, 4, 5])
def test_scalar_power_cases(l, rng):
    thr = grw_scalar_threshold(l)
    for scalar, expected in [
        (thr - 1.0, f"grw-scalar-power-distinct-roots"),
        (thr, f"grw-scalar-power-double-root"),
        (thr + 1.0, f"grw-scalar-power-complex-roots"),
    ]:
        fams = grw_scalar_family(l, scalar, 0.0)
        assert [f.family_id for f in fams] == [expected]
        for params in draws(fams[0], rng):
            assert fams[0].max_residual(TS, params) < 1e-10


def test_scalar_threshold_sharp():
    for l in (2, 3, 5):
        thr = grw_scalar_threshold(l)
        assert grw_scalar_discriminant(l, thr - 1e-6) > 0
        assert grw_scalar_discriminant(l, thr + 1e-6) < 0
        assert abs(grw_scalar_discriminant(l, thr)) < 1e-9


def test_scalar_forced_family_numeric():
    fams = grw_scalar_family(2, 1.0, 2.0)
    assert fams[0].numeric_only
    ts, us = solve_numeric_profile(fams[0])
    assert np.all(us > 0)
    # central finite differences of the numeric profile satisfy the equation
    h = ts[1] - ts[0]
    mid = slice(1, -1)
    ddu = (us[2:] - 2 * us[1:-1] + us[:-2]) / h**2
    du = (us[2:] - us[:-2]) / (2 * h)
    p = fams[0].params
    l, scalar, s_f, expo = p["l"], p["scalar"], p["s_fiber"], p["exponent"]
    res = ddu - (l / 2) * du + ((l + 1) / 4) * ((scalar - l) / l) * us[mid] \
        - ((l + 1) / 4) * (s_f / l) * us[mid] ** (1 - expo)
    assert np.max(np.abs(res)) < 1e-5


# -- Kasner machinery ---------------------------------------------------------


def test_kasner_invariants_values():
    assert kasner_invariants((1, 1, -1), (1, 1, 1)) == (1.0, 3.0)
    zeta, eta = kasner_invariants((1.0, -0.5), (1, 2))
    assert zeta == pytest.approx(0.0)
    assert eta == pytest.approx(1.5)
    assert kasner_invariants((0.0, 0.0), (1, 2)) == (0.0, 0.0)
    with pytest.raises(LengthMismatch):
        kasner_invariants((1.0,), (1, 2))


@settings(max_examples=40, deadline=None)
@given(st.permutations([(1.0, 1), (-0.5, 2), (2.0, 1)]))
def test_kasner_invariants_permutation_invariant(pairs):
    p = [x for x, _ in pairs]
    dims = [d for _, d in pairs]
    zeta, eta = kasner_invariants(p, dims)
    assert zeta == pytest.approx(1.0 - 1.0 + 2.0)
    assert eta == pytest.approx(1.0 + 0.5 + 4.0)


def test_kasner_spec_invariants():
    k = KasnerSpec((1.0, -0.5), (1, 2), parse_expr("exp(t)"))
    assert k.zeta == pytest.approx(0.0)
    assert k.eta == pytest.approx(1.5)
    assert k.zeta**2 <= k.eta * sum(k.dims) + 1e-12
    with pytest.raises(WarpcurvError):
        KasnerSpec((1.0, 0.5), (0, 0), parse_expr("exp(t)"))  # eta = 0, p != 0


def test_kasner_einstein_residual_examples():
    # degenerate second exponent: phi = c1 e^{3t}, lam = -6, lam_2 = -9
    kspec = KasnerSpec((1.0, 0.0), (1, 2), parse_expr("1.2*exp(3*t)"))
    reports = kasner_einstein_residuals(kspec, -6.0, (0.0, -9.0), TS)
    assert all(r.passed for r in reports)
    # trace-free exponents: zeta = 0, phi = c0 e^{sqrt(3/eta) t}, lam = 0
    eta = 1.5
    rate = math.sqrt(3.0 / eta)
    kspec = KasnerSpec((1.0, -0.5), (1, 2), parse_expr(f"0.8*exp({rate}*t)"))
    reports = kasner_einstein_residuals(kspec, 0.0, (0.0, 0.0), TS)
    assert all(r.passed for r in reports)
    # three circles, zeta = 0, eta = 6: phi = c0 e^{sqrt(1/2) t}
    kspec = KasnerSpec((1.0, 1.0, -2.0), (1, 1, 1),
                       parse_expr(f"exp({math.sqrt(0.5)}*t)"))
    reports = kasner_einstein_residuals(kspec, 0.0, (0.0, 0.0, 0.0), TS)
    assert all(r.passed for r in reports)


def test_kasner_einstein_positive_profile_required():
    kspec = KasnerSpec((1.0, 0.0), (1, 2), parse_expr("t - 0.5"))
    with pytest.raises(NonPositiveWarping):
        kasner_einstein_residuals(kspec, 0.0, (0.0, 0.0), TS)


def test_kasner_einstein_families(rng):
    fams = kasner_einstein_families("II", (1.0, -0.5), (1, 2), 0.0, (0.0, 0.0))
    assert [f.family_id for f in fams] == ["kasner2-einstein-null-trace"]
    fams2 = kasner_einstein_families("II", (1.0, 0.0), (1, 2), -6.0, (0.0, -9.0))
    assert [f.family_id for f in fams2] == ["kasner2-einstein-exponential"]
    fams3 = kasner_einstein_families("III", (1.0, 1.0, -2.0), (1, 1, 1),
                                     0.0, (0.0, 0.0, 0.0))
    assert [f.family_id for f in fams3] == ["kasner3-einstein-null-trace"]
    for fam in fams + fams2 + fams3:
        for params in draws(fam, rng):
            assert fam.max_residual(TS, params) < 1e-10
    assert kasner_einstein_families("II", (1.0, 2.0), (1, 2), 5.0, (0.0, 1.0)) == []
    assert kasner_einstein_families("III", (1.0, 2.0, 3.0), (1, 1, 1),
                                    5.0, (0.0, 0.0, 0.0)) == []
    with pytest.raises(UnsupportedType):
        kasner_einstein_families("I", (1.0,), (3,), 0.0, (0.0,))
    with pytest.raises(UnsupportedType):
        kasner_einstein_families("II", (1.0, 2.0), (2, 2), 0.0, (0.0, 0.0))


def test_kasner3_scalar_families(rng):
    fams = kasner_scalar_families("III", (0.0, 0.0, 0.0), (1, 1, 1), 3.0,
                                  (0.0, 0.0, 0.0))
    assert [f.family_id for f in fams] == ["kasner3-scalar-static"]
    assert kasner_scalar_families("III", (0.0, 0.0, 0.0), (1, 1, 1), 4.0,
                                  (0.0, 0.0, 0.0)) == []

    fams = kasner_scalar_families("III", (1.0, 1.0, -2.0), (1, 1, 1), 0.0,
                                  (0.0, 0.0, 0.0))
    assert [f.family_id for f in fams] == ["kasner3-scalar-exponential"]
    assert fams[0].params["rate"] == pytest.approx(math.sqrt(0.5))  # sqrt((3-0)/6)

    # eta = 3 variant: rate sqrt((3 - 0)/3) = 1
    a = math.sqrt(1.5)
    fams = kasner_scalar_families("III", (a, -a, 0.0), (1, 1, 1), 0.0,
                                  (0.0, 0.0, 0.0))
    assert fams[0].params["rate"] == pytest.approx(1.0)

    z, e = kasner_invariants((1.0, 2.0, 3.0), (1, 1, 1))
    thr = kasner_scalar_threshold(z, e)
    table = [
        (thr - 1.0, "kasner3-scalar-distinct-roots"),
        (thr, "kasner3-scalar-double-root"),
        (thr + 1.0, "kasner3-scalar-complex-roots"),
    ]
    for scalar, fid in table:
        fams = kasner_scalar_families("III", (1.0, 2.0, 3.0), (1, 1, 1), scalar,
                                      (0.0, 0.0, 0.0))
        assert [f.family_id for f in fams] == [fid]
        for params in draws(fams[0], rng):
            assert fams[0].max_residual(TS, params) < 1e-10


def test_kasner3_families_invariant_under_exponent_permutation():
    # the three one-dimensional fibers are interchangeable
    z, e = kasner_invariants((1.0, 2.0, 3.0), (1, 1, 1))
    thr = kasner_scalar_threshold(z, e)
    reference = None
    for perm in [(1.0, 2.0, 3.0), (3.0, 1.0, 2.0), (2.0, 3.0, 1.0)]:
        assert kasner_invariants(perm, (1, 1, 1)) == (z, e)
        fams = kasner_scalar_families("III", perm, (1, 1, 1), thr, (0, 0, 0))
        ids = [(f.family_id, f.params["mu"], f.params["shift"]) for f in fams]
        if reference is None:
            reference = ids
        assert ids == reference


def test_kasner3_scalar_threshold_sharp():
    z, e = kasner_invariants((1.0, 2.0, 3.0), (1, 1, 1))
    thr = kasner_scalar_threshold(z, e)
    assert kasner_scalar_discriminant(z, e, thr - 1e-6) > 0
    assert kasner_scalar_discriminant(z, e, thr + 1e-6) < 0


def test_kasner2_scalar_families(rng):
    # vanishing fiber scalar: same closed forms as the three-circle case
    fams = kasner_scalar_families("II", (1.0, 0.5), (1, 2), 2.0, (0.0, 0.0))
    assert fams and not fams[0].numeric_only
    for params in draws(fams[0], rng):
        assert fams[0].max_residual(TS, params) < 1e-10

    # vanishing second exponent: coefficient merge
    fams = kasner_scalar_families("II", (1.0, 0.0), (1, 2), 2.0, (0.0, 1.5))
    assert [f.family_id for f in fams] == ["kasner2-scalar-merged-distinct-roots"]
    for params in draws(fams[0], rng):
        assert fams[0].max_residual(TS, params) < 1e-10

    # exponent degeneration 4 p2 zeta = eta + zeta^2: p = (-1, 1)
    z, e = kasner_invariants((-1.0, 1.0), (1, 2))
    assert 4 * 1.0 * z == pytest.approx(e + z**2)
    fams = kasner_scalar_families("II", (-1.0, 1.0), (1, 2), 2.0, (0.0, 1.5))
    assert [f.family_id for f in fams] == ["kasner2-scalar-offset-distinct-roots"]
    for params in draws(fams[0], rng):
        assert fams[0].max_residual(TS, params) < 1e-10

    # otherwise integrator-backed
    fams = kasner_scalar_families("II", (1.0, 0.25), (1, 2), 2.0, (0.0, 1.5))
    assert fams[0].numeric_only
    ts, us = solve_numeric_profile(fams[0])
    assert np.all(np.isfinite(us))

    fams = kasner_scalar_families("II", (1.0, -0.5), (1, 2), 2.0, (0.0, 1.5))
    assert fams[0].numeric_only and fams[0].ode_order == 1
    ts, us = solve_numeric_profile(fams[0])
    assert np.all(us > 0)


def test_kasner_static_scalar_value(rng):
    # all exponents zero forces scalar = fiber scalar + 3 in type II
    fams = kasner_scalar_families("II", (0.0, 0.0), (1, 2), -2.0 + 3.0,
                                  (0.0, -2.0))
    assert [f.family_id for f in fams] == ["kasner2-scalar-static"]
    assert fams[0].max_residual(TS) < 1e-12
    assert kasner_scalar_families("II", (0.0, 0.0), (1, 2), 5.0, (0.0, -2.0)) == []


# -- integrator ---------------------------------------------------------------


def test_rk4_convergence():
    # u'' = -u with u(0) = 0, u'(0) = 1 has solution sin t
    ts, us = rk4_integrate(lambda t, u, v: -u, 0.0, 0.0, 1.0, 1.0, 1000)
    assert np.max(np.abs(us - np.sin(ts))) < 1e-12


def test_ode_cross_check_families(rng):
    fams = []
    fams += grw_einstein_family(2, 0.0, 0.0)
    fams += grw_scalar_family(3, 2.0, 9.0)
    fams += grw_scalar_family(2, 4.0, 0.0)
    fams += kasner_einstein_families("II", (1.0, 0.0), (1, 2), -6.0, (0.0, -9.0))
    for fam in fams:
        rep = ode_cross_check(fam, fam.sample_params(rng))
        assert rep.passed, (fam.family_id, rep.max_abs_residual)


def test_ode_cross_check_constant_family():
    fam = grw_einstein_family(2, 2.0, 1.0)[0]
    rep = ode_cross_check(fam)
    assert rep.max_abs_residual < 1e-12


def test_ode_cross_check_step_guard():
    fam = grw_scalar_family(3, 6.0, 1.0)[0]
    with pytest.raises(StepTooCoarse):
        ode_cross_check(fam, interval=(0.0, 40.0), n_steps=8)


def test_positivity_guard():
    fam = grw_scalar_family(3, 2.0, 9.0)[0]
    # shift = 9 / (2 - 3) = -9 drags v negative for tiny coefficients
    with pytest.raises(NonPositiveWarping):
        fam.check_positive({"c1": 0.1, "c2": 0.1})


# -- nonexistence scans --------------------------------------------------------


def test_scan_grw_einstein():
    rep = scan_grw_einstein_oscillatory(l=2, lam=5.0, lam_fiber=1.0, n_c=41)
    assert rep.passed and rep.min_max_residual >= 0.01
    assert rep.grid_shape == (41, 41)


def test_scan_kasner2_einstein():
    rep = scan_kasner2_einstein_oscillatory(lam=5.0, lam2=1.0, n_c=41)
    assert rep.passed and rep.min_max_residual >= 0.01


def test_scan_kasner3_einstein():
    rep = scan_kasner3_einstein_linear(p=(1.0, 2.0, 3.0), lam=5.0, n_c=41)
    assert rep.passed and rep.min_max_residual >= 0.01


def test_scan_guards():
    with pytest.raises(WarpcurvError):
        scan_grw_einstein_oscillatory(l=2, lam=1.0)
    with pytest.raises(WarpcurvError):
        scan_kasner2_einstein_oscillatory(lam=2.0)
