"""Geodesic flow of the exact Hamiltonian, with a hand-off to slowed time near the waist.

Traces are integrated in segments.  Away from the waist the state is
``(z, y, xi, eta)`` in arclength time ``t``.  Where ``w < w_switch`` the
driver uses the rescaled momentum ``theta = eta / w^(2k-1)`` and the slowed
time ``tau`` with ``dt/dtau = w``, which keeps the step size bounded as the
neck closes.  Both systems carry ``t`` and the angular length as extra
components, so samples are reported uniformly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from . import _kernels as K
from ._accel import njit
from .errors import CapExceededError, ConfigError, NumericalError
from .integrator import STATUS_EVENT, STATUS_MAXSTEPS, Event, solve
from .metric import MetricFamily, PhasePoint, hamiltonian
from .scaling import PowerFamily, ScalingFunction, power_w_jet

MODE_T, MODE_TAU = 0, 1
BIG = 1e300

EVENT_NAMES = ("z-crossing", "turning-point", "max-time", "max-angular-length",
               "zdot-threshold", "handoff")


@dataclass(frozen=True)
class StopCondition:
    """When to end a trace.  At least one bound must be present."""

    reach_z: Optional[float] = None
    turning_point: bool = False
    t_max: Optional[float] = None
    angular_length_max: Optional[float] = None
    zdot_below: Optional[float] = None
    max_steps: int = 400_000

    def __post_init__(self):
        if (self.reach_z is None and not self.turning_point and self.t_max is None
                and self.angular_length_max is None and self.zdot_below is None):
            raise ConfigError("stop condition needs at least one bound")


@dataclass(frozen=True)
class TraceEvent:
    kind: str
    t: float
    state: PhasePoint


@dataclass
class GeodesicTrace:
    """Samples at accepted steps plus dense-output segments.

    ``states`` columns are ``z, y, xi, eta``; ``angle`` is the angular length
    accumulated up to each sample.
    """

    fam: MetricFamily
    eps: float
    t: np.ndarray
    states: np.ndarray
    angle: np.ndarray
    energy: np.ndarray
    L: np.ndarray
    events: list
    segments: list = field(repr=False, default_factory=list)
    dense_output: bool = True

    @property
    def max_energy_error(self):
        return float(np.max(np.abs(self.energy - 1.0)))

    @property
    def final(self) -> PhasePoint:
        return PhasePoint.from_array(self.states[-1])

    def event(self, kind):
        for e in self.events:
            if e.kind == kind:
                return e
        return None

    def state_at(self, t):
        """Dense evaluation (z, y, xi, eta) at arclength time ``t``."""
        for mode, sol in self.segments:
            tcol = sol.xs[:, 4]
            if tcol[0] - 1e-15 <= t <= tcol[-1] + 1e-15:
                if mode == MODE_T:
                    x = sol(t)[0]
                else:
                    x = _tau_segment_at(sol, t)
                return _to_physical(self.fam, self.eps, mode, x[None, :])[0]
        raise ValueError(f"t={t} outside trace")


def _tau_segment_at(sol, t):
    steps = sol.step_t
    tvals = sol.xs[:, 4]
    i = int(np.clip(np.searchsorted(tvals, t) - 1, 0, len(steps) - 2))
    lo, hi = steps[i], steps[i + 1]
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if sol(mid)[0][4] < t:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15 * max(1.0, abs(hi)):
            break
    return sol(0.5 * (lo + hi))[0]


# ---------------------------------------------------------------------------
# right-hand sides


@njit
def _geodesic_events(t, x, params, evp):
    g = np.empty(6)
    g[0] = x[0] - evp[0]
    zdot = K.rhs(t, x, params)[0]
    if params[K.P_MODE] == 1:
        zdot /= power_w_jet(params[K.P_P], params[K.P_EPS], x[0])[0]
    g[1] = zdot if evp[6] > 0 else np.nan
    g[2] = x[4] - evp[1]
    g[3] = x[5] - evp[2]
    g[4] = zdot - evp[3]
    g[5] = abs(x[0]) - (evp[4] if params[K.P_MODE] == 0 else evp[5])
    return g


def _py_system(fam: MetricFamily, eps: float):
    sf, k = fam.sf, fam.k

    def fun(t, x, params):
        mode = params[K.P_MODE]
        z, y, xi, m = x[0], x[1], x[2], x[3]
        w, wz, _ = sf.jet(eps, z)
        if fam.fd_xi:
            co = fam.coefficients(eps, z, y, need_z=False)
        else:
            co = fam.coefficients(eps, z, y)
        out = np.empty(x.shape[0])
        D = K.assemble(mode, float(k), w, wz, xi, m, *co, out)
        if fam.fd_xi:
            eta = m if mode == 0 else w ** (2 * k - 1) * m
            hz = max(1e-6, 1e-6 * abs(z))
            two = lambda s: fam.two_ham(eps, s, y, xi, eta)
            dHz = 0.5 * (two(z - 2 * hz) - 8 * two(z - hz) + 8 * two(z + hz) - two(z + 2 * hz)) / (12 * hz)
            out[2] = -dHz if mode == 0 else -w * dHz
        if not (D > 0.0 and co.H > 0.0):
            out[:] = np.nan
        return out

    def evfun(t, x, params, evp):
        g = np.empty(6)
        g[0] = x[0] - evp[0]
        zdot = fun(t, x, params)[0]
        if params[K.P_MODE] == 1:
            zdot /= sf.jet(eps, x[0])[0]
        g[1] = zdot if evp[6] > 0 else np.nan
        g[2] = x[4] - evp[1]
        g[3] = x[5] - evp[2]
        g[4] = zdot - evp[3]
        g[5] = abs(x[0]) - (evp[4] if params[K.P_MODE] == 0 else evp[5])
        return g

    return fun, evfun


def system(fam: MetricFamily, eps: float, mode: int):
    """(rhs, event function, params) for a family at fixed eps and time mode."""
    kp = fam.kernel_params()
    if kp is not None:
        params = kp.copy()
        params[K.P_MODE] = mode
        params[K.P_EPS] = eps
        return K.rhs, _geodesic_events, params
    fun, evfun = _py_system(fam, eps)
    params = np.array([-1.0, mode, 0.0, fam.k, fam.kappa, eps, 0.0, 0.0, 0.0])
    return fun, evfun, params


def hamilton_rhs(fam: MetricFamily, eps: float, state: PhasePoint):
    """(zdot, ydot, xidot, etadot) of the exact Hamiltonian flow."""
    fun, _, params = system(fam, eps, MODE_T)
    x = np.array([state.z, state.y, state.xi, state.eta, 0.0, 0.0])
    out = fun(0.0, x, params)
    if not np.all(np.isfinite(out)):
        raise NumericalError(f"state outside the metric domain: {state}")
    return out[:4].copy()


def energy_of(fam, eps, mode, x):
    """2 Ham for a raw state vector in either mode."""
    kp = fam.kernel_params()
    if kp is not None:
        params = kp.copy()
        params[K.P_MODE] = mode
        params[K.P_EPS] = eps
        return K.energy(np.asarray(x, dtype=float), params)
    z = x[0]
    eta = x[3] if mode == MODE_T else fam.sf.jet(eps, z)[0] ** (2 * fam.k - 1) * x[3]
    return 2.0 * hamiltonian(fam, eps, PhasePoint(z, x[1], x[2], eta))


def _to_physical(fam, eps, mode, xs):
    out = xs[:, :4].copy()
    if mode == MODE_TAU:
        w = np.array([fam.sf.jet(eps, z)[0] for z in xs[:, 0]])
        out[:, 3] = w ** (2 * fam.k - 1) * xs[:, 3]
    return out


def z_at_w(sf: ScalingFunction, eps, w):
    """Non-negative z with w(eps, z) = w, or 0 if w <= eps."""
    if w <= eps:
        return 0.0
    if isinstance(sf, PowerFamily):
        p = sf.p
        return w * (1.0 - (eps / w) ** p) ** (1.0 / p)
    return brentq(lambda z: sf.jet(eps, z)[0] - w, 0.0, w, xtol=1e-15)


def default_w_switch(eps):
    return max(10.0 * eps, 1e-3)


def integrate(fam: MetricFamily, eps: float, state0: PhasePoint, stop: StopCondition,
              tol: float = 1e-10, w_switch: Optional[float] = None, atol: Optional[float] = None,
              raise_on_cap: bool = True, energy_check: bool = True) -> GeodesicTrace:
    """Integrate a unit-speed geodesic until the first stop condition fires."""
    e0 = energy_of(fam, eps, MODE_T, [state0.z, state0.y, state0.xi, state0.eta])
    if energy_check and abs(e0 - 1.0) > 1e-12:
        raise ConfigError(f"initial state is not unit speed: 2H - 1 = {e0 - 1.0:.3e}")
    atol = tol if atol is None else atol
    if w_switch is None:
        w_switch = default_w_switch(eps)
    z_in = z_at_w(fam.sf, eps, w_switch) if w_switch > eps else -1.0
    z_out = z_at_w(fam.sf, eps, 1.25 * w_switch) if w_switch > eps else -1.0
    k = fam.k
    nan = float("nan")
    evp = np.array([
        nan if stop.reach_z is None else stop.reach_z,
        nan if stop.t_max is None else stop.t_max,
        nan if stop.angular_length_max is None else stop.angular_length_max,
        nan if stop.zdot_below is None else stop.zdot_below,
        z_in, z_out, 1.0 if stop.turning_point else 0.0,
    ])
    w0 = fam.sf.jet(eps, state0.z)[0]
    mode = MODE_TAU if abs(state0.z) < z_in else MODE_T
    m0 = state0.eta if mode == MODE_T else state0.eta / w0 ** (2 * k - 1)
    x = np.array([state0.z, state0.y, state0.xi, m0, 0.0, 0.0])

    ts, sts, angs, segments, events = [], [], [], [], []
    steps_left = stop.max_steps
    indep = 0.0
    while True:
        fun, evfun, params = system(fam, eps, mode)
        evs = (
            Event("z-crossing", 0, True),
            Event("turning-point", 0, True),
            Event("max-time", 1, True),
            Event("max-angular-length", 1, True),
            Event("zdot-threshold", -1, True),
            Event("handoff", -1 if mode == MODE_T else 1, True),
        )
        sol = solve(fun, indep, x, params, BIG, rtol=tol, atol=atol, events=evs, evfun=evfun,
                    evparams=evp, max_steps=steps_left)
        steps_left -= len(sol.ts) - 1
        segments.append((mode, sol))
        phys = _to_physical(fam, eps, mode, sol.xs)
        start = 0 if not ts else 1
        ts.append(sol.xs[start:, 4])
        sts.append(phys[start:])
        angs.append(sol.xs[start:, 5])
        for name, tt, xe in sol.events:
            if name == "handoff":
                continue
            pe = _to_physical(fam, eps, mode, xe[None, :])[0]
            events.append(TraceEvent(name, float(xe[4]), PhasePoint.from_array(pe)))
        if sol.status == STATUS_EVENT and sol.events and sol.events[-1][0] == "handoff":
            x = sol.x_final
            w = fam.sf.jet(eps, x[0])[0]
            if mode == MODE_T:
                x[3] = x[3] / w ** (2 * k - 1)
                mode = MODE_TAU
            else:
                x[3] = x[3] * w ** (2 * k - 1)
                mode = MODE_T
            indep = 0.0
            continue
        if sol.status == STATUS_MAXSTEPS or steps_left <= 0:
            if raise_on_cap:
                raise CapExceededError(f"step cap {stop.max_steps} reached at t={sol.xs[-1, 4]:.6g}")
            events.append(TraceEvent("max-steps", float(sol.xs[-1, 4]),
                                     PhasePoint.from_array(phys[-1])))
        if not np.all(np.isfinite(sol.xs[-1])):
            raise NumericalError("trace left the metric domain")
        break

    t = np.concatenate(ts)
    states = np.concatenate(sts)
    angle = np.concatenate(angs)
    en = np.array([energy_of(fam, eps, MODE_T, s) for s in states])
    hf = np.array([fam.h_factor(eps, s[0], s[1]) for s in states])
    L = np.abs(states[:, 3]) / np.sqrt(hf)
    return GeodesicTrace(fam, eps, t, states, angle, en, L, events, segments)


_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


def angular_length(trace: GeodesicTrace, method: str = "cointegrated") -> float:
    """Angular length int |ydot|_h dt of a trace.

    ``"cointegrated"`` returns the quadrature component carried by the
    integrator; ``"gauss"`` re-integrates |ydot|_h with 8-point Gauss-Legendre
    on every dense-output step.
    """
    if method == "cointegrated":
        return float(trace.angle[-1])
    if method != "gauss":
        raise ValueError(method)
    total = 0.0
    for mode, sol in trace.segments:
        fun, _, params = system(trace.fam, trace.eps, mode)
        st = sol.step_t
        for i in range(len(st) - 1):
            a, b = st[i], st[i + 1]
            if i == len(st) - 2:
                b = sol.ts[-1]
            if b == a:
                continue
            nodes = 0.5 * (b - a) * _GL_X + 0.5 * (a + b)
            xs = sol(nodes)
            sp = np.array([fun(0.0, xx, params)[5] for xx in xs])
            total += 0.5 * (b - a) * float(_GL_W @ sp)
    return total


def angular_momentum(fam: MetricFamily, eps: float, state: PhasePoint) -> float:
    """L = |eta|_h."""
    return abs(state.eta) / math.sqrt(fam.h_factor(eps, state.z, state.y))


def reverse_state(state: PhasePoint) -> PhasePoint:
    return state.reversed()


# ---------------------------------------------------------------------------
# ambient Lagrangian oracle for the elliptic surface


def elliptic_lagrangian_rhs(k, delta, sf: ScalingFunction, eps):
    """Second-order geodesic equations of the elliptic surface in (z, phi).

    The phi-equation carries the coefficient delta^2 sin(phi) cos(phi), as
    obtained from the Christoffel symbols of the induced metric.
    """
    d2 = delta * delta

    def rhs(t, u):
        z, phi, zd, pd = u
        w, wz, wzz = sf.jet(eps, z)
        W = w**k
        Wz = k * w ** (k - 1) * wz
        Wzz = k * (k - 1) * w ** (k - 2) * wz * wz + k * w ** (k - 1) * wzz
        s, c = math.sin(phi), math.cos(phi)
        e2 = 1.0 - d2 * c * c
        den = e2 + Wz * Wz * (1.0 - d2)
        zdd = -(1.0 - d2) * Wz / den * (Wzz * zd * zd - W * pd * pd)
        pdd = -d2 * s * c / den * (pd * pd - Wzz / W * zd * zd) - 2.0 * Wz / W * zd * pd
        return [zd, pd, zdd, pdd]

    return rhs


@dataclass
class OracleTrace:
    t: np.ndarray
    z: np.ndarray
    phi: np.ndarray
    zdot: np.ndarray
    phidot: np.ndarray
    reached: bool


def ambient_oracle_integrate(k, delta, sf: ScalingFunction, eps, state0, stop: StopCondition,
                             rtol=1e-12, atol=1e-13) -> OracleTrace:
    """Integrate the Lagrangian equations from (z, phi, zdot, phidot).

    Uses scipy's DOP853, deliberately a different integrator from the one
    driving the Hamiltonian flow.
    """
    events = []
    if stop.reach_z is not None:
        z1 = stop.reach_z

        def hit(t, u):
            return u[0] - z1

        hit.terminal = True
        events.append(hit)
    T = stop.t_max if stop.t_max is not None else 1e6
    sol = solve_ivp(elliptic_lagrangian_rhs(k, delta, sf, eps), (0.0, T), list(state0),
                    method="DOP853", rtol=rtol, atol=atol, events=events or None,
                    dense_output=False)
    if sol.status < 0:
        raise NumericalError(sol.message)
    reached = bool(events) and sol.status == 1
    if reached:
        te, ue = sol.t_events[0][0], sol.y_events[0][0]
        t = np.append(sol.t, te)
        u = np.hstack([sol.y, ue[:, None]])
    else:
        t, u = sol.t, sol.y
    return OracleTrace(t, u[0], u[1], u[2], u[3], reached)


def velocity_from_state(fam: MetricFamily, eps, state: PhasePoint):
    """(zdot, ydot) of a cotangent state."""
    r = hamilton_rhs(fam, eps, state)
    return float(r[0]), float(r[1])
