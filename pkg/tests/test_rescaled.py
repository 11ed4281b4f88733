import cmath
import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from neckflow.analysis import eigen_check, front_face_solution, theta_decay_rate
from neckflow.errors import ConfigError, NonMorseError
from neckflow.flow import hamilton_rhs
from neckflow.metric import GeneralAnsatz, MorseModel, PhasePoint, WarpedProduct, unit_speed_state
from neckflow.rescaled import (Potential, RescaledState, change_chart, critical_points,
                               eigenvalues_analytic, from_rescaled, front_face_rhs,
                               gamma_min_reference, hamiltonian_reformulation_check,
                               integrate_front_face, linearization, morse_potential, morse_report,
                               potential_of, rescaled_rhs, to_rescaled, torus_potential, _mplus_shoot)
from neckflow.scaling import PowerFamily

SF2, SF4 = PowerFamily(2.0), PowerFamily(4.0)
MORSE = MorseModel(2, 0.7)
POT = morse_potential(2, 0.7)


def tilted_family():
    """Ansatz whose S depends on z at the corner, so the reference geodesic bends."""
    def S(chart, a, c, y):
        z = a * c if chart == "Z" else c
        return 2.0 + 0.3 * math.cos(y) + 0.5 * z * math.sin(y)
    return GeneralAnsatz(2, SF2, S=S)


# ---------------------------------------------------------------------------
# charts and the rescaled field


def test_zero_eta_gives_zero_theta():
    for z in (0.0, 0.5, 3.0, -3.0):
        assert to_rescaled(MORSE, 0.1, PhasePoint(z, 1.0, 0.9, 0.0)).theta == 0.0


def test_theta_at_waist():
    rs = to_rescaled(MORSE, 0.1, PhasePoint(0.0, 0.4, 0.8, 0.02))
    assert rs.chart == "Z"
    assert rs.theta == pytest.approx(1000 * 0.02, rel=1e-13)


@settings(max_examples=150, deadline=None)
@given(eps=st.floats(1e-3, 1.0), z=st.floats(-3.0, 3.0), y=st.floats(0, 6.28),
       xi=st.floats(-1, 1), eta=st.floats(-1e-3, 1e-3))
def test_round_trip(eps, z, y, xi, eta):
    s = PhasePoint(z, y, xi, eta)
    e2, back = from_rescaled(MORSE, to_rescaled(MORSE, eps, s))
    assert e2 == pytest.approx(eps, rel=1e-13)
    assert back.z == pytest.approx(z, rel=1e-13, abs=1e-15)
    assert back.eta == pytest.approx(eta, rel=1e-13, abs=1e-300)
    assert (back.y, back.xi) == (y, xi)


def test_chart_choice_follows_switch():
    assert to_rescaled(MORSE, 0.1, PhasePoint(0.5, 0, 1, 0)).chart == "Z"
    assert to_rescaled(MORSE, 0.01, PhasePoint(0.5, 0, 1, 0)).chart == "E"
    assert to_rescaled(MORSE, 0.01, PhasePoint(-0.5, 0, 1, 0)).chart == "Eminus"


def test_front_face_field():
    for Z in (-3.0, 0.0, 1.5):
        rs = RescaledState("Z", Z, 0.0, 0.8, 1.0, 0.3)
        d = rescaled_rhs(MORSE, rs)
        assert d[0] == pytest.approx(SF2.f_jet(Z)[0], rel=1e-14)
        assert d[1] == 0.0
        assert d[3] == 0.0


def test_rescaled_field_needs_kappa():
    fam = WarpedProduct(3, SF2, kappa=3)
    with pytest.raises(ConfigError):
        rescaled_rhs(fam, RescaledState("Z", 0.0, 0.1, 0.0, 1.0, 0.0))


def _pushed_forward(fam, eps, s):
    """w * Hamilton field pushed through the chart map, as (a', c', y', xi', theta')."""
    k = fam.k
    w, wz, _ = fam.sf.jet(eps, s.z)
    zd, yd, xid, etad = hamilton_rhs(fam, eps, s)
    zp = w * zd
    thp = w * (etad - (2 * k - 1) * s.eta * wz * zd / w) / w ** (2 * k - 1)
    rs = to_rescaled(fam, eps, s)
    if rs.chart == "Z":
        head = [zp / eps, 0.0]
    else:
        head = [-eps / s.z**2 * zp * math.copysign(1.0, s.z), zp]
    return rs, np.array(head + [w * yd, w * xid, thp])


FAMS = [MORSE, WarpedProduct(2, SF2, S=0.4), WarpedProduct(3, SF4, S=1.0), tilted_family()]


@settings(max_examples=80, deadline=None)
@given(i=st.integers(0, 3), eps=st.floats(0.02, 0.3), z=st.floats(-0.5, 0.5),
       y=st.floats(0, 6.28), theta=st.floats(-0.5, 0.5))
def test_chain_rule_consistency(i, eps, z, y, theta):
    fam = FAMS[i]
    w = fam.sf.jet(eps, z)[0]
    if w**fam.kappa * 2.5 >= 0.9:
        return
    s = unit_speed_state(fam, eps, z, y, theta * w ** (2 * fam.k - 1), True)
    rs, ref = _pushed_forward(fam, eps, s)
    got = rescaled_rhs(fam, rs)
    tol = 1e-9 if i < 3 else 1e-6  # finite-difference coefficients for the general ansatz
    assert np.max(np.abs(got - ref) / (np.abs(ref) + 1e-3)) < tol


@pytest.mark.parametrize("fam", [MORSE, WarpedProduct(2, SF4, S=0.3)])
@pytest.mark.parametrize("Z", [2.0, 11.0, -9.0])
def test_chart_switch_consistency(fam, Z):
    eps = 0.01
    rz = RescaledState("Z", Z, eps, 1.1, 0.7, 0.2)
    re = change_chart(rz, "E" if Z > 0 else "Eminus")
    dz, de = rescaled_rhs(fam, rz), rescaled_rhs(fam, re)
    sgn = 1.0 if Z > 0 else -1.0
    mapped = np.array([-sgn * dz[0] / Z**2, eps * dz[0], dz[2], dz[3], dz[4]])
    assert np.max(np.abs(mapped - de) / (np.abs(de) + 1e-12)) < 1e-10
    assert change_chart(re, "Z").a == pytest.approx(Z, rel=1e-15)


def test_change_chart_rejects_uncovered_point():
    with pytest.raises(ValueError):
        change_chart(RescaledState("Z", -2.0, 0.1, 0, 1, 0), "E")


# ---------------------------------------------------------------------------
# front face


def test_front_face_rhs_vanishes_at_critical_points():
    for cp in critical_points(POT):
        for chart in ("E", "Eminus"):
            assert np.allclose(front_face_rhs(chart, 0.0, cp.y_c, 0.0, POT, SF2, 2), 0.0, atol=1e-14)


def test_front_face_rhs_flat_specialization():
    Z, y, th = 0.7, 1.2, 0.4
    cp, yp, thp = front_face_rhs("Z", Z, y, th, POT, SF2, 2)
    f, df = SF2.f_jet(Z)
    assert cp == f
    assert yp == th
    assert thp == pytest.approx(-3 * df * th - 0.5 * POT.grad(y), rel=1e-15)


def test_theta_norm_evolution():
    sol = front_face_solution(MORSE, -1.0, 0.3, 0.6, 4.0)
    h = 1e-4
    for tau in np.linspace(0.5, 3.5, 7):
        Z, y, th = sol(tau)[0]
        a, b = sol(tau + h)[0][2], sol(tau - h)[0][2]
        lhs = (a * a - b * b) / (2 * h)
        rhs = -2 * 3 * SF2.f_jet(Z)[1] * th * th - POT.grad(y) * th
        assert lhs == pytest.approx(rhs, rel=1e-6, abs=1e-7)


def test_morse_front_face_limit():
    tr = integrate_front_face(POT, 2, SF2, "Z", 0.0, 0.3, 0.0)
    assert tr.converged
    assert tr.limit is not None
    assert abs(POT.grad(tr.limit.y_c)) < 1e-10
    assert tr.limit.classification == "min"
    assert {"Z", "E"} <= set(tr.chart)
    assert tr.lyapunov_violations() == 0


def test_maximum_is_fixed_point():
    tr = integrate_front_face(POT, 2, SF2, "E", 0.0, 0.0, 0.0)
    assert tr.converged
    assert tr.limit.classification == "max"
    assert np.all(tr.y == 0.0)


def test_front_face_rejects_minus_side_start():
    with pytest.raises(ConfigError):
        integrate_front_face(POT, 2, SF2, "Eminus", 0.0, 0.3, 0.0)


@settings(max_examples=15, deadline=None)
@given(y0=st.floats(0, 6.28), th0=st.floats(-1.0, 1.0), Z0=st.floats(0.0, 5.0))
def test_reachable_limits_and_lyapunov(y0, th0, Z0):
    tr = integrate_front_face(POT, 2, SF2, "Z", Z0, y0, th0)
    G0 = POT.value(y0) + th0 * th0
    assert tr.lyapunov_violations() == 0
    # theta bounded by the dissipation balance
    smin = min(POT.value(c.y_c) for c in critical_points(POT))
    assert np.max(np.abs(tr.theta)) <= math.sqrt(max(G0 - smin, 0.0)) + 1e-9
    if tr.converged:
        assert tr.limit.value <= G0 + 1e-9


def test_theta_decay_rate_constant_potential():
    fam = WarpedProduct(2, SF2, S=0.0)
    nu, r2 = theta_decay_rate(fam)
    assert nu >= min(1.5, 1.0) - 0.1
    assert r2 > 0.99


# ---------------------------------------------------------------------------
# critical points, linearization, Morse data


def test_morse_critical_points():
    cps = critical_points(POT)
    assert [c.y_c for c in cps] == pytest.approx([0, math.pi / 2, math.pi, 3 * math.pi / 2], abs=1e-12)
    a = {round(c.y_c, 6): c.hess_eigs[0] for c in cps}
    # S_yy = -2 c1 cos 2y with c1 = k(k-1) delta^2, so |a| = 2k(k-1)delta^2 = 1.96
    assert a[round(math.pi / 2, 6)] == pytest.approx(1.96, rel=1e-12)
    assert a[0.0] == pytest.approx(-1.96, rel=1e-12)
    assert [c.classification for c in cps] == ["max", "min", "max", "min"]
    for c in cps:
        assert abs(POT.grad(c.y_c)) < 1e-10


def test_symbolic_hessian_of_builtin():
    import sympy as sp
    y = sp.symbols("y")
    S = 2 * (1 - sp.Rational(49, 100) * sp.sin(y) ** 2)
    assert float(sp.diff(S, y, 2).subs(y, sp.pi / 2)) == pytest.approx(1.96, rel=1e-15)


def test_constant_potential_is_degenerate():
    pot = potential_of(WarpedProduct(2, SF2, S=0.5))
    assert critical_points(pot).degenerate
    with pytest.raises(NonMorseError):
        morse_report(pot)


def test_torus_critical_points():
    cps = critical_points(torus_potential())
    assert len(cps) == 4
    assert sorted(c.morse_index for c in cps) == [0, 1, 1, 2]
    pts = {tuple(round(v, 9) for v in c.y_c) for c in cps}
    pi = round(math.pi, 9)
    assert pts == {(0.0, 0.0), (0.0, pi), (pi, 0.0), (pi, pi)}
    assert morse_report(torus_potential()).euler_sum == 0


def test_non_morse_warning():
    pot = Potential(lambda y: math.sin(y) ** 3, lambda y: 3 * math.sin(y) ** 2 * math.cos(y))
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        critical_points(pot)
    assert any("non-Morse" in str(x.message) for x in w)


@pytest.mark.parametrize("cp", critical_points(POT), ids=lambda c: f"y{c.y_c:.3f}")
def test_linearization_eigenvalues(cp):
    ff = np.linalg.eigvals(linearization(cp, "front_face", POT, 2))
    mu = eigenvalues_analytic(cp.hess_eigs[0], 2)
    pred = np.sort_complex(np.array([-1.0, mu[0], mu[1]], dtype=complex))
    assert np.max(np.abs(np.sort_complex(ff) - pred)) < 1e-8
    mp = np.linalg.eigvals(linearization(cp, "M_plus", POT, 2, MORSE))
    assert np.min(np.abs(mp - 1.0)) < 1e-8
    J = oracles.fd_jacobian(lambda x: front_face_rhs("E", x[0], x[1], x[2], POT, SF2, 2),
                            [0.0, cp.y_c, 0.0])
    assert np.max(np.abs(J - linearization(cp, "front_face", POT, 2))) < 1e-5


def test_eigen_check_agrees():
    for row in eigen_check(MORSE):
        assert row["max_error"] < 1e-8
        assert row["mplus_has_plus_one"]


def test_linearization_rejects_non_morse():
    cp = critical_points(POT)[0]
    bad = type(cp)(cp.y_c, cp.side, cp.value, (0.0,), 0, "min")
    with pytest.raises(NonMorseError):
        linearization(bad, "front_face", POT, 2)


def test_eigenvalues_analytic_examples():
    assert eigenvalues_analytic(4.0, 2) == pytest.approx((-1.0, -2.0), abs=1e-15)
    up, dn = eigenvalues_analytic(-4.0, 2)
    assert up.real == pytest.approx((-3 + math.sqrt(17)) / 2, rel=1e-15)
    assert dn.real == pytest.approx((-3 - math.sqrt(17)) / 2, rel=1e-15)
    assert up.real > 0 > dn.real
    c1, c2 = eigenvalues_analytic(8.0, 2)
    assert c1.real == pytest.approx(-1.5) and c2.real == pytest.approx(-1.5)
    assert c1.imag != 0.0
    assert c1 == pytest.approx((-3 + cmath.sqrt(-7)) / 2)


@settings(max_examples=100, deadline=None)
@given(a=st.floats(-20, 20), k=st.integers(1, 5))
def test_eigenvalues_solve_characteristic_polynomial(a, k):
    for mu in eigenvalues_analytic(a, k):
        assert abs(mu * mu + (2 * k - 1) * mu + a / 2) < 1e-9 * (1 + abs(a))


def test_morse_report_circle():
    rep = morse_report(POT)
    assert rep.n_min == rep.n_max == 2
    assert rep.euler_sum == 0
    for c, codim in zip(rep.points, rep.stable_codim):
        assert codim == (0 if c.classification == "min" else 1)
    assert rep.unstable_dim_mplus == tuple(i + 1 for i in rep.indices)


# ---------------------------------------------------------------------------
# reference geodesics


def test_reference_rejects_constant_potential():
    fam = MorseModel(2, 0.0)
    with pytest.raises(NonMorseError):
        cps = critical_points(potential_of(fam))
        if cps.degenerate:
            raise NonMorseError("constant corner potential")


def test_reference_rejects_maximum():
    cp = critical_points(POT)[0]
    with pytest.raises(ConfigError):
        gamma_min_reference(MORSE, cp, 0.5)


def test_morse_reference_is_vertical():
    for cp in (c for c in critical_points(POT) if c.classification == "min"):
        rs, dev = gamma_min_reference(MORSE, cp, 0.5, return_deviation=True)
        assert rs.y == pytest.approx(cp.y_c, abs=1e-12)
        assert rs.theta == pytest.approx(0.0, abs=1e-12)
        assert dev < 1e-6


def test_reference_flow_property():
    fam = tilted_family()
    cp = next(c for c in critical_points(potential_of(fam)) if c.classification == "min")
    assert cp.y_c == pytest.approx(math.pi, abs=1e-10)
    r1 = gamma_min_reference(fam, cp, 0.2)
    r2 = gamma_min_reference(fam, cp, 0.4)
    assert abs(r1.theta) > 1e-3
    cont = _mplus_shoot(fam, cp, 0.4, (0.2, r1.y, r1.theta), 1e-12).x_final
    assert cont[1] == pytest.approx(r2.y, abs=1e-8)
    assert cont[3] == pytest.approx(r2.theta, abs=1e-8)


# ---------------------------------------------------------------------------
# time-dependent Hamiltonian form


@pytest.mark.parametrize("sf", [SF2, SF4])
def test_reformulation_agrees(sf):
    res = hamiltonian_reformulation_check(POT, 2, sf, 0.3, 0.4, 6.0)
    assert res["max_deviation"] < 1e-7


def test_reformulation_closed_form_p2():
    res = hamiltonian_reformulation_check(POT, 2, SF2, 0.3, 0.4, 4.0)
    assert res["dev_sinh"] < 1e-9
    assert res["dev_cosh"] < 1e-9


def test_reformulation_stationary_start():
    cp = critical_points(POT)[1]
    res = hamiltonian_reformulation_check(POT, 2, SF2, cp.y_c, 0.0, 3.0)
    assert res["dev_y"] < 1e-12
    tr = integrate_front_face(POT, 2, SF2, "Z", 0.0, cp.y_c, 0.0, tau_max=3.0)
    assert np.max(np.abs(tr.y - cp.y_c)) < 1e-12
