import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from neckflow.errors import ConfigError
from neckflow.flow import (StopCondition, ambient_oracle_integrate, angular_length, angular_momentum,
                           hamilton_rhs, integrate, reverse_state, velocity_from_state)
from neckflow.metric import (EllipticSurface, GeneralAnsatz, MorseModel, PhasePoint, WarpedProduct,
                             hamiltonian, impact_state, metric_tensor, unit_speed_state)
from neckflow.report import TRACE_HEADER, trace_rows, write_csv
from neckflow.scaling import PowerFamily

SF2, SF4 = PowerFamily(2.0), PowerFamily(4.0)
PHI = math.acos(0.95)


def test_stop_condition_needs_a_bound():
    with pytest.raises(ConfigError):
        StopCondition()


def test_warped_rhs_closed_forms():
    fam = WarpedProduct(2, SF2)
    eps, s = 0.3, PhasePoint(0.2, 1.0, 0.6, 0.05)
    w = SF2.w(eps, s.z)
    zd, yd, xid, etad = hamilton_rhs(fam, eps, s)
    assert zd == pytest.approx(s.xi, rel=1e-14)
    assert yd == pytest.approx(s.eta / w**4, rel=1e-14)
    assert etad == 0.0
    wz = SF2.jet(eps, s.z)[1]
    assert xid == pytest.approx(2 * s.eta**2 * wz / w**5, rel=1e-12)


def _fd_symplectic(fam, eps, s, h=1e-6):
    def H(z, y, xi, eta):
        return hamiltonian(fam, eps, PhasePoint(z, y, xi, eta))
    x = [s.z, s.y, s.xi, s.eta]
    g = []
    for i in range(4):
        a, b = list(x), list(x)
        a[i] += h
        b[i] -= h
        g.append((H(*a) - H(*b)) / (2 * h))
    return np.array([g[2], g[3], -g[0], -g[1]])


FAMS = [WarpedProduct(2, SF2, S=0.4), MorseModel(2, 0.7), EllipticSurface(2, 0.8),
        GeneralAnsatz(2, SF2, S=lambda ch, a, c, y: 1.0 + 0.3 * math.cos(y),
                      b=lambda ch, a, c, y: 0.2 * math.sin(y))]


@settings(max_examples=60, deadline=None)
@given(i=st.integers(0, 3), eps=st.floats(0.1, 0.5), z=st.floats(-0.4, 0.4),
       y=st.floats(0, 2 * math.pi), xi=st.floats(-1, 1), eta=st.floats(-0.01, 0.01))
def test_rhs_is_symplectic_gradient(i, eps, z, y, xi, eta):
    fam = FAMS[i]
    s = PhasePoint(z, y, xi, eta)
    got = hamilton_rhs(fam, eps, s)
    ref = _fd_symplectic(fam, eps, s)
    scale = np.abs(ref).max() + 1e-3
    assert np.max(np.abs(got - ref)) / scale < 1e-6


@pytest.mark.parametrize("z,y,xi,eta", [(0.4, 1.1, 0.3, 0.2), (-0.8, 2.5, -0.7, 0.05),
                                        (1.0, 0.3, 0.9, -0.4)])
def test_elliptic_rhs_matches_explicit_equations(z, y, xi, eta):
    fam = EllipticSurface(2, 0.8)
    got = hamilton_rhs(fam, 0.7, PhasePoint(z, y, xi, eta))
    ref = oracles.elliptic_equations(2, 0.8, 4.0, 0.7, z, y, xi, eta)
    assert got == pytest.approx(np.array(ref), rel=1e-12, abs=1e-12)


def test_pass_reaches_z1():
    fam = WarpedProduct(2, SF4)
    eps = 0.5
    s = unit_speed_state(fam, eps, -1.0, 0.0, 0.2)
    tr = integrate(fam, eps, s, StopCondition(reach_z=1.0, turning_point=True), tol=1e-10)
    assert tr.events[-1].kind == "z-crossing"
    assert abs(tr.final.z - 1.0) < 1e-10


def test_turn_back_records_turning_point():
    fam = WarpedProduct(2, SF4)
    eps, L = 0.5, 0.3
    s = unit_speed_state(fam, eps, -1.0, 0.0, L)
    tr = integrate(fam, eps, s, StopCondition(reach_z=1.0, turning_point=True), tol=1e-10)
    ev = tr.event("turning-point")
    assert ev is not None
    assert ev.state.z == pytest.approx(oracles.clairaut_turning_point(L, eps), abs=1e-8)
    assert abs(hamilton_rhs(fam, eps, ev.state)[0]) < 1e-8


@pytest.mark.parametrize("fam,eps", [(WarpedProduct(2, SF2), 0.1), (EllipticSurface(2, 0.8), 0.3)])
def test_time_reversal(fam, eps):
    s0 = impact_state(fam, eps, 0.3, PHI)
    fw = integrate(fam, eps, s0, StopCondition(reach_z=1.0), tol=1e-12)
    bw = integrate(fam, eps, reverse_state(fw.final), StopCondition(reach_z=0.0), tol=1e-12,
                   energy_check=False)
    back = bw.final
    assert back.z == pytest.approx(s0.z, abs=1e-7)
    assert back.y == pytest.approx(s0.y, abs=1e-7)
    assert -back.xi == pytest.approx(s0.xi, abs=1e-7)
    assert -back.eta == pytest.approx(s0.eta, abs=1e-7)


def test_vertical_geodesic_on_revolution_has_zero_angle():
    fam = EllipticSurface(2, 0.0)
    s = unit_speed_state(fam, 0.3, -1.0, 0.7, 0.0)
    tr = integrate(fam, 0.3, s, StopCondition(reach_z=1.0))
    assert angular_length(tr) == 0.0
    assert angular_length(tr, "gauss") == 0.0


def test_warped_angular_length_matches_quadrature():
    fam = WarpedProduct(2, SF4)
    eps, L = 0.5, 0.2
    s = unit_speed_state(fam, eps, -1.0, 0.0, L)
    tr = integrate(fam, eps, s, StopCondition(reach_z=1.0), tol=1e-11)
    ref = oracles.warped_length_mp(L, eps, 2, 4.0)
    assert angular_length(tr) == pytest.approx(ref, abs=1e-6)
    assert angular_length(tr, "gauss") == pytest.approx(ref, abs=1e-6)


def test_elliptic_winds_more_at_smaller_eps():
    fam = EllipticSurface(2, 0.8)
    out = {}
    for eps in (1.0, 0.3):
        s = impact_state(fam, eps, 0.0, PHI)
        tr = integrate(fam, eps, s, StopCondition(reach_z=1.0), tol=1e-10)
        out[eps] = angular_length(tr)
        assert math.isfinite(out[eps])
    assert out[0.3] > out[1.0]
    assert out[0.3] * 0.3 == pytest.approx(out[1.0], rel=1.0)


@pytest.mark.parametrize("fam,eps", [(WarpedProduct(2, SF2), 0.05), (MorseModel(2, 0.7), 0.1),
                                     (EllipticSurface(2, 0.8), 0.2)])
def test_energy_budget(fam, eps):
    tol = 1e-10
    s = impact_state(fam, eps, 0.4, PHI)
    tr = integrate(fam, eps, s, StopCondition(reach_z=0.45), tol=tol)
    assert tr.max_energy_error <= 100 * tol
    assert np.all(np.diff(tr.t) > 0)


def test_momentum_examples():
    fam = WarpedProduct(2, SF2)
    assert angular_momentum(fam, 0.1, PhasePoint(0.3, 0.0, 1.0, 0.0)) == 0.0
    s = impact_state(fam, 0.1, 0.0, PHI)
    tr = integrate(fam, 0.1, s, StopCondition(reach_z=1.0), tol=1e-10)
    assert np.max(np.abs(tr.L - tr.L[0])) <= 1e-8
    # Clairaut: L = W cos(angle to the cross-section), cos = W |ydot| at unit speed
    for row in tr.states[:: max(1, len(tr.t) // 25)]:
        st_ = PhasePoint.from_array(row)
        W = SF2.w(0.1, st_.z) ** 2
        cos_phi = W * abs(velocity_from_state(fam, 0.1, st_)[1])
        assert angular_momentum(fam, 0.1, st_) == pytest.approx(W * cos_phi, rel=1e-12)


def _oracle_start(fam, eps, z, y, eta):
    s = unit_speed_state(fam, eps, z, y, eta)
    zd, pd = velocity_from_state(fam, eps, s)
    return s, (z, y, zd, pd)


def test_oracle_agrees_with_hamiltonian_flow():
    fam = EllipticSurface(2, 0.8)
    s, u0 = _oracle_start(fam, 1.0, -1.0, 0.3, 0.5)
    tr = integrate(fam, 1.0, s, StopCondition(reach_z=1.0), tol=1e-12)
    orc = ambient_oracle_integrate(2, 0.8, fam.sf, 1.0, u0, StopCondition(reach_z=1.0))
    assert orc.reached
    assert abs(tr.final.z - orc.z[-1]) < 1e-6
    assert abs(tr.final.y - orc.phi[-1]) < 1e-6


def test_oracle_clairaut_and_speed():
    fam = EllipticSurface(2, 0.0)
    _, u0 = _oracle_start(fam, 0.5, -1.0, 0.3, 0.2)
    orc = ambient_oracle_integrate(2, 0.0, fam.sf, 0.5, u0, StopCondition(reach_z=1.0))
    W2 = np.array([fam.W_jet(0.5, z)[0] ** 2 for z in orc.z])
    c = W2 * orc.phidot
    assert np.max(np.abs(c - c[0])) < 1e-8
    fam8 = EllipticSurface(2, 0.8)
    _, u0 = _oracle_start(fam8, 0.5, -1.0, 0.3, 0.2)
    orc = ambient_oracle_integrate(2, 0.8, fam8.sf, 0.5, u0, StopCondition(reach_z=1.0))
    sp = [np.array([zd, pd]) @ metric_tensor(fam8, 0.5, z, p) @ np.array([zd, pd])
          for z, p, zd, pd in zip(orc.z, orc.phi, orc.zdot, orc.phidot)]
    assert np.max(np.abs(np.array(sp) - 1.0)) < 1e-8


def test_max_time_and_angle_stops():
    fam = WarpedProduct(2, SF2)
    s = impact_state(fam, 0.05, 0.0, PHI)
    tr = integrate(fam, 0.05, s, StopCondition(t_max=0.3), tol=1e-10)
    assert tr.events[-1].kind == "max-time"
    assert tr.t[-1] == pytest.approx(0.3, abs=1e-10)
    tr = integrate(fam, 0.05, s, StopCondition(angular_length_max=5.0), tol=1e-10)
    assert tr.events[-1].kind == "max-angular-length"
    assert angular_length(tr) == pytest.approx(5.0, abs=1e-9)


def test_integrate_rejects_non_unit_state():
    fam = WarpedProduct(2, SF2)
    with pytest.raises(ConfigError):
        integrate(fam, 0.1, PhasePoint(0.0, 0.0, 2.0, 0.0), StopCondition(reach_z=1.0))


def test_trace_csv(tmp_path):
    fam = WarpedProduct(2, SF2)
    tr = integrate(fam, 0.2, impact_state(fam, 0.2, 0.0, PHI), StopCondition(reach_z=1.0))
    path = tmp_path / "trace.csv"
    write_csv(path, TRACE_HEADER, trace_rows(tr))
    lines = path.read_text().splitlines()
    assert lines[0] == "t,z,y,xi,eta,energy,L"
    assert len(lines) == len(tr.t) + 1
    last = [float(v) for v in lines[-1].split(",")]
    assert last[1] == tr.states[-1, 0]
