"""Blow-up charts, the rescaled vector field and the front-face dynamics.

Charts: ``Z`` with coordinates (Z = z/eps, eps), ``E`` with (E = eps/z, z) for
z > 0 and ``Eminus`` with (E = eps/|z|, z) for z < 0.  The rescaled momentum
is ``theta = eta / w^(2k-1)`` and time is slowed by ``dt/dtau = w``.  On the
front face (w = 0) with unit energy xi = 1 the flow reduces to

    Z' = f(Z),  y' = theta#,  theta' = -(2k-1) f'(Z) theta - 1/2 d_y (S + |theta|^2).
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import brentq, root

from . import _kernels as K
from .errors import (ConfigError, EulerCharacteristicError, NonMorseError, NumericalError,
                     SeedSensitivityError)
from .flow import MODE_TAU, _geodesic_events, _py_system, system
from .integrator import STATUS_EVENT, Event, solve
from .metric import (EllipticSurface, MetricFamily, MorseModel, PhasePoint, WarpedProduct,
                     Z_SWITCH, blowup_point, unit_speed_state)
from .scaling import PowerFamily, ScalingFunction

Z_HI, Z_LO = 12.0, 8.0
TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class RescaledState:
    """Point of the rescaled cotangent bundle in one blow-up chart.

    ``chart`` is ``"Z"`` (a = Z, c = eps), ``"E"`` (a = E, c = z >= 0) or
    ``"Eminus"`` (a = E, c = z <= 0).
    """

    chart: str
    a: float
    c: float
    y: float
    xi: float
    theta: float

    @property
    def eps(self):
        return self.c if self.chart == "Z" else abs(self.a * self.c)

    @property
    def z(self):
        return self.a * self.c if self.chart == "Z" else self.c


def _w_from_chart(sf, chart, a, c):
    if chart == "Z":
        f, df = sf.f_jet(a)
        return c * f, df
    F, dF = sf.F_jet(a)
    G = F - a * dF
    return abs(c) * F, (G if chart == "E" else -G)


def to_rescaled(fam: MetricFamily, eps: float, state: PhasePoint, z_switch=Z_SWITCH):
    w = fam.sf.jet(eps, state.z)[0]
    chart, a, c = blowup_point(eps, state.z, z_switch)
    return RescaledState(chart, a, c, state.y, state.xi, state.eta / w ** (2 * fam.k - 1))


def from_rescaled(fam: MetricFamily, rs: RescaledState):
    eps, z = rs.eps, rs.z
    w = _w_from_chart(fam.sf, rs.chart, rs.a, rs.c)[0]
    return eps, PhasePoint(z, rs.y, rs.xi, w ** (2 * fam.k - 1) * rs.theta)


def change_chart(rs: RescaledState, chart: str) -> RescaledState:
    """Re-express a state in another chart (same geometric point)."""
    if chart == rs.chart:
        return rs
    eps, z = rs.eps, rs.z
    if chart == "Z":
        if eps == 0.0:
            raise ValueError("Z chart needs eps > 0")
        return replace(rs, chart="Z", a=z / eps, c=eps)
    if chart == "E" and z > 0.0:
        return replace(rs, chart="E", a=eps / z, c=z)
    if chart == "Eminus" and z < 0.0:
        return replace(rs, chart="Eminus", a=-eps / z, c=z)
    raise ValueError(f"point not covered by chart {chart}")


def _wm_dz(chart, m, w, sf, a, c, q_a, q_c):
    """w^m times the z-derivative at fixed eps of a chart function q (m >= 1)."""
    if chart == "Z":
        f = sf.f_jet(a)[0]
        return c ** (m - 1) * f**m * q_a
    F = sf.F_jet(a)[0]
    sgn = 1.0 if chart == "E" else -1.0
    return w**m * q_c - sgn * abs(c) ** (m - 1) * F**m * a * q_a


def rescaled_rhs(fam: MetricFamily, rs: RescaledState):
    """Tangent (a', c', y', xi', theta') of the rescaled field in the chart of ``rs``."""
    k = fam.k
    if fam.kappa < 2 * k - 2:
        raise ConfigError("the rescaled field needs kappa >= 2k - 2")
    if not fam.is_ansatz:
        return _rescaled_rhs_chain(fam, rs)
    kap = fam.kappa
    sf = fam.sf
    chart, a, c, y, xi, th = rs.chart, rs.a, rs.c, rs.y, rs.xi, rs.theta
    (S, S_a, S_c, S_y), (b, b_a, b_c, b_y), (h, h_a, h_c, h_y) = fam.blowup_data(chart, a, c, y)
    w, G = _w_from_chart(sf, chart, a, c)
    D = 1.0 - w**kap * S - w ** (2 * k) * b * b / h
    P = (xi - w ** (2 * k - 1) * b * th / h) / D  # = zdot
    zp = w * P
    beta_a = (b_a * h - b * h_a) / h**2
    beta_c = (b_c * h - b * h_c) / h**2
    bb_a = (2 * b * b_a * h - b * b * h_a) / h**2
    bb_c = (2 * b * b_c * h - b * b * h_c) / h**2
    inv_h_y = -h_y / h**2
    beta_y = (b_y * h - b * h_y) / h**2
    bb_y = (2 * b * b_y * h - b * b * h_y) / h**2

    yp = th / h - zp * b / h
    thp = (-0.5 * th * th * inv_h_y + zp * th * beta_y - (2 * k - 1) * G * P * th
           - 0.5 * P * P * (w ** (kap - 2 * k + 2) * S_y + w * w * bb_y))
    xip = (k * th * th * w ** (2 * k - 2) * G / h
           + 0.5 * th * th * _wm_dz(chart, 2 * k - 1, w, sf, a, c, h_a, h_c) / h**2
           + P * th * _wm_dz(chart, 2 * k, w, sf, a, c, beta_a, beta_c)
           + 0.5 * P * P * (-kap * w**kap * G * S
                            - _wm_dz(chart, kap + 1, w, sf, a, c, S_a, S_c)
                            - 2 * k * w ** (2 * k) * G * b * b / h
                            - _wm_dz(chart, 2 * k + 1, w, sf, a, c, bb_a, bb_c)))
    if chart == "Z":
        f = sf.f_jet(a)[0]
        return np.array([f * P, 0.0, yp, xip, thp])
    F = sf.F_jet(a)[0]
    sgn = 1.0 if chart == "E" else -1.0
    return np.array([-sgn * a * F * P, zp, yp, xip, thp])


def _rescaled_rhs_chain(fam, rs):
    eps = rs.eps
    if rs.chart == "Z" and eps == 0.0 or rs.chart != "Z" and rs.c == 0.0:
        raise ConfigError("front-face evaluation needs an ansatz family")
    fun, _, params = system(fam, eps, MODE_TAU)
    x = np.array([rs.z, rs.y, rs.xi, rs.theta, 0.0, 0.0])
    d = fun(0.0, x, params)
    if rs.chart == "Z":
        return np.array([d[0] / eps, 0.0, d[1], d[2], d[3]])
    return np.array([-rs.a * d[0] / rs.c, d[0], d[1], d[2], d[3]])


# ---------------------------------------------------------------------------
# corner potentials S+ on the cross-section


@dataclass(frozen=True)
class Potential:
    """S on the front face.  ``value``/``grad``/``hess`` act on y (float or array).

    ``metric`` returns (h, h') for a circle cross-section (None: flat).
    ``ff`` optionally gives a Z-dependent front-face value ``(S, grad)`` as a
    function of ``(chart, coord, y)``.  ``kernel`` holds (c0, c1) when
    S = c0 - c1 sin^2 y on a flat circle, enabling the compiled path.
    """

    value: Callable
    grad: Callable
    hess: Optional[Callable] = None
    dim: int = 1
    metric: Optional[Callable] = None
    ff: Optional[Callable] = None
    kernel: Optional[tuple] = None
    name: str = "S"

    def h(self, y):
        return 1.0 if self.metric is None else self.metric(y)[0]

    def hessian(self, y):
        if self.hess is not None:
            return np.atleast_2d(self.hess(y))
        if self.dim == 1:
            e = 1e-5
            return np.array([[(self.grad(y + e) - self.grad(y - e)) / (2 * e)]])
        H = np.empty((self.dim, self.dim))
        e = 1e-5
        for j in range(self.dim):
            d = np.zeros(self.dim)
            d[j] = e
            H[:, j] = (np.asarray(self.grad(y + d)) - np.asarray(self.grad(y - d))) / (2 * e)
        return 0.5 * (H + H.T)

    def on_ff(self, chart, coord, y):
        if self.ff is not None:
            return self.ff(chart, coord, y)
        return self.value(y), self.grad(y)


def morse_potential(k, delta):
    """S+ = k(k-1)(1 - delta^2 sin^2 y) of the built-in Morse model."""
    c0 = k * (k - 1.0)
    c1 = c0 * delta**2
    return Potential(
        value=lambda y: c0 - c1 * math.sin(y) ** 2,
        grad=lambda y: -c1 * math.sin(2 * y),
        hess=lambda y: -2 * c1 * math.cos(2 * y),
        kernel=(c0, c1), name=f"morse(k={k},delta={delta})")


def potential_of(fam: MetricFamily) -> Potential:
    if isinstance(fam, MorseModel):
        return morse_potential(fam.k, fam.delta)
    if isinstance(fam, WarpedProduct) and fam.h is None:
        s = fam.S
        return Potential(lambda y: s, lambda y: 0.0, lambda y: 0.0, kernel=(s, 0.0))
    if isinstance(fam, EllipticSurface):
        d2 = fam.delta**2
        return Potential(fam.S_corner, fam.dS_corner, fam.d2S_corner,
                         metric=lambda y: (1 - d2 * math.cos(y) ** 2, d2 * math.sin(2 * y)),
                         name="elliptic")
    hm = None
    if hasattr(fam, "h") and callable(getattr(fam, "h", None)):
        e = 1e-5

        def hm(y):
            h0 = fam.cross_metric(y)
            return h0, (fam.cross_metric(y + e) - fam.cross_metric(y - e)) / (2 * e)
    return Potential(fam.S_corner, fam.dS_corner, fam.d2S_corner, metric=hm)


def torus_potential(c1=1.0, c2=2.0):
    """Separable S+ = c1 cos y1 + c2 cos y2 on the flat 2-torus."""
    return Potential(
        value=lambda y: c1 * math.cos(y[0]) + c2 * math.cos(y[1]),
        grad=lambda y: np.array([-c1 * math.sin(y[0]), -c2 * math.sin(y[1])]),
        hess=lambda y: np.diag([-c1 * math.cos(y[0]), -c2 * math.cos(y[1])]),
        dim=2, name="torus")


# ---------------------------------------------------------------------------
# front face


def front_face_rhs(chart, coord, y, theta, pot: Potential, sf: ScalingFunction, k: int):
    """(coord', y', theta') on the front face with xi = 1."""
    y = np.asarray(y, dtype=float) if pot.dim > 1 else float(y)
    th = np.asarray(theta, dtype=float) if pot.dim > 1 else float(theta)
    if chart == "Z":
        f, df = sf.f_jet(coord)
        cp, g = f, df
    else:
        F, dF = sf.F_jet(abs(coord))
        dF = math.copysign(dF, coord)
        g = F - coord * dF
        if chart == "E":
            cp = -coord * F
        else:
            cp, g = coord * F, -g
    _, gS = pot.on_ff(chart, coord, y)
    if pot.dim == 1 and pot.metric is not None:
        h, hy = pot.metric(y)
        yp = th / h
        dth2 = -th * th * hy / h**2
    else:
        yp = th
        dth2 = 0.0 * th
    thp = -(2 * k - 1) * g * th - 0.5 * (np.asarray(gS) + dth2)
    return cp, yp, thp


@dataclass(frozen=True)
class CriticalPoint:
    y_c: object
    side: str
    value: float
    hess_eigs: tuple
    morse_index: int
    classification: str


class CriticalSet(list):
    """List of critical points; ``degenerate`` flags a constant potential."""

    degenerate = False


def _classify(eigs):
    neg = sum(1 for e in eigs if e < 0)
    if neg == 0:
        return neg, "min"
    if neg == len(eigs):
        return neg, "max"
    return neg, "saddle"


def critical_points(pot: Potential, samples: int = 2048, side: str = "M+"):
    """All critical points of S on the circle or flat torus, polished by root refinement."""
    out = CriticalSet()
    if pot.dim == 1:
        ys = np.linspace(0.0, TWO_PI, samples, endpoint=False)
        g = np.array([pot.grad(y) for y in ys])
        scale = max(1.0, max(abs(pot.value(y)) for y in ys[:: max(1, samples // 64)]))
        if np.max(np.abs(g)) < 1e-12 * scale:
            out.degenerate = True
            return out
        roots = []
        for i in range(samples):
            j = (i + 1) % samples
            a, b = ys[i], ys[i] + TWO_PI / samples
            if g[i] == 0.0:
                roots.append(ys[i])
            elif g[i] * g[j] < 0.0:
                roots.append(brentq(pot.grad, a, b, xtol=1e-15, rtol=1e-15, maxiter=200) % TWO_PI)
        roots = [0.0 if TWO_PI - r < 1e-11 else r for r in roots]
        for yc in sorted(set(round(r, 11) for r in roots)):
            yc = float(brentq(pot.grad, yc - 1e-9, yc + 1e-9, xtol=1e-15)) if pot.grad(yc) != 0.0 and \
                pot.grad(yc - 1e-9) * pot.grad(yc + 1e-9) < 0 else float(yc)
            a = float(pot.hessian(yc)[0, 0]) / pot.h(yc)
            if abs(a) < 1e-8:
                import warnings
                warnings.warn(f"non-Morse critical point at y={yc}")
            idx, cls = _classify([a])
            out.append(CriticalPoint(yc, side, float(pot.value(yc)), (a,), idx, cls))
        return out
    # flat torus: seed from a grid, refine with a root finder on grad S
    n = 64
    grid = np.linspace(0.0, TWO_PI, n, endpoint=False)
    G = np.array([[np.linalg.norm(pot.grad(np.array([u, v]))) for v in grid] for u in grid])
    found = []
    for i in range(n):
        for j in range(n):
            nb = [G[(i + di) % n, (j + dj) % n] for di in (-1, 0, 1) for dj in (-1, 0, 1)]
            if G[i, j] <= min(nb):
                sol = root(pot.grad, np.array([grid[i], grid[j]]), tol=1e-14)
                if sol.success and np.linalg.norm(pot.grad(sol.x)) < 1e-10:
                    yc = np.mod(sol.x, TWO_PI)
                    yc[np.abs(yc - TWO_PI) < 1e-9] = 0.0
                    if not any(np.max(np.abs(((yc - f + math.pi) % TWO_PI) - math.pi)) < 1e-6
                               for f in found):
                        found.append(yc)
    if not found or max(np.max(np.abs(pot.grad(np.array([u, v])))) for u in grid[::8] for v in grid[::8]) < 1e-12:
        out.degenerate = True
        return out
    for yc in sorted(found, key=lambda v: (round(v[0], 9), round(v[1], 9))):
        eigs = tuple(float(e) for e in np.linalg.eigvalsh(pot.hessian(yc)))
        idx, cls = _classify(eigs)
        out.append(CriticalPoint(tuple(float(v) for v in yc), side, float(pot.value(yc)),
                                 eigs, idx, cls))
    return out


def eigenvalues_analytic(a: float, k: int):
    """mu+- = (-(2k-1) +- sqrt((2k-1)^2 - 2a)) / 2."""
    r = cmath.sqrt((2 * k - 1) ** 2 - 2 * a)
    return (-(2 * k - 1) + r) / 2, (-(2 * k - 1) - r) / 2


def _corner_Q_b(fam, cp, h):
    if isinstance(fam, (MorseModel, WarpedProduct)) or fam is None:
        return 0.0, 0.0
    if not fam.is_ansatz:
        return 0.0, 0.0
    yc = cp.y_c
    dz = 1e-4

    def Sy(z):
        e = 1e-5
        return (fam.S("E", 0.0, z, yc + e) - fam.S("E", 0.0, z, yc - e)) / (2 * e)

    Q = 0.5 * (-3 * Sy(0.0) + 4 * Sy(dz) - Sy(2 * dz)) / (2 * dz)
    bsharp = fam.b("E", 0.0, 0.0, yc) / h
    return Q, bsharp


def linearization(cp: CriticalPoint, where: str, pot: Potential, k: int,
                  fam: Optional[MetricFamily] = None):
    """Linearization at a corner critical point.

    ``front_face``: variables (E, y, theta).  ``M_plus``: variables (z, y, theta).
    """
    if any(abs(e) < 1e-8 for e in cp.hess_eigs):
        raise NonMorseError(f"critical point {cp.y_c} is degenerate")
    n = pot.dim
    yc = np.asarray(cp.y_c, dtype=float) if n > 1 else cp.y_c
    Hs = pot.hessian(yc)
    hinv = np.eye(n) if n > 1 else np.array([[1.0 / pot.h(yc)]])
    M = np.zeros((2 * n + 1, 2 * n + 1))
    M[1:n + 1, n + 1:] = hinv
    M[n + 1:, 1:n + 1] = -0.5 * Hs
    M[n + 1:, n + 1:] = -(2 * k - 1) * np.eye(n)
    if where == "front_face":
        M[0, 0] = -1.0
    elif where == "M_plus":
        M[0, 0] = 1.0
        if n == 1:
            Q, bs = _corner_Q_b(fam, cp, pot.h(yc))
            M[1, 0] = -bs
            M[2, 0] = Q
    else:
        raise ValueError(where)
    return M


@dataclass(frozen=True)
class MorseReport:
    points: tuple
    indices: tuple
    stable_codim: tuple
    unstable_dim_mplus: tuple
    euler_sum: int
    euler_characteristic: int
    n_min: int
    n_max: int
    n_saddle: int


def morse_report(pot: Potential, chi: int = 0):
    """Indices, stable codimensions and the Euler-characteristic check."""
    cps = critical_points(pot)
    if cps.degenerate or not cps:
        raise NonMorseError("potential has no Morse critical points")
    for c in cps:
        if any(abs(e) < 1e-8 for e in c.hess_eigs):
            raise NonMorseError(f"degenerate critical point at {c.y_c}")
    ind = tuple(c.morse_index for c in cps)
    es = sum((-1) ** i for i in ind)
    if es != chi:
        raise EulerCharacteristicError(f"sum of (-1)^index = {es}, expected {chi}")
    return MorseReport(tuple(cps), ind, ind, tuple(i + 1 for i in ind), es, chi,
                       sum(c.classification == "min" for c in cps),
                       sum(c.classification == "max" for c in cps),
                       sum(c.classification == "saddle" for c in cps))


# ---------------------------------------------------------------------------
# front-face integration


@dataclass
class FrontFaceTrace:
    tau: np.ndarray
    chart: list
    coord: np.ndarray
    y: np.ndarray
    theta: np.ndarray
    G: np.ndarray
    limit: Optional[CriticalPoint]
    converged: bool
    segments: list = field(repr=False, default_factory=list)

    def Z(self):
        """Z coordinate of every sample (inf at E = 0)."""
        out = np.empty_like(self.coord)
        for i, (c, v) in enumerate(zip(self.chart, self.coord)):
            if c == "Z":
                out[i] = v
            elif c == "E":
                out[i] = np.inf if v == 0 else 1.0 / v
            else:
                out[i] = -np.inf if v == 0 else -1.0 / v
        return out

    def lyapunov_violations(self, rel=4.0 * np.finfo(float).eps):
        """Accepted steps with Z >= 0 where G increased beyond round-off."""
        Zs = self.Z()
        dG = np.diff(self.G)
        thr = rel * np.maximum(np.abs(self.G[1:]), 1.0)
        mask = Zs[:-1] >= 0.0
        return int(np.sum((dG > thr) & mask))


def _ff_python(pot, sf, k):
    n = pot.dim
    charts = {0.0: "Z", 1.0: "E", 2.0: "Eminus"}

    def fun(t, x, params):
        chart = charts[params[0]]
        if n == 1:
            cp, yp, thp = front_face_rhs(chart, x[0], x[1], x[2], pot, sf, k)
            return np.array([cp, yp, thp])
        cp, yp, thp = front_face_rhs(chart, x[0], x[1:1 + n], x[1 + n:], pot, sf, k)
        return np.concatenate([[cp], yp, thp])

    def evfun(t, x, params, evp):
        g = np.empty(2)
        if params[0] == 0.0:
            g[0] = abs(x[0]) - Z_HI
            g[1] = np.nan
            return g
        g[0] = x[0] - 1.0 / Z_LO
        tol = evp[0]
        yc = evp[1:].reshape(-1, n) if evp.shape[0] > 1 else None
        y = x[1:1 + n]
        if yc is None:
            dist = 0.0
        else:
            dd = np.abs(((y[None, :] - yc + math.pi) % TWO_PI) - math.pi)
            dist = float(np.min(np.linalg.norm(dd, axis=1)))
        g[1] = float(np.linalg.norm(x[1 + n:])) + abs(x[0]) + dist - tol
        return g

    return fun, evfun


def _state_G(pot, n, chart, coord, y, th):
    S = pot.on_ff(chart, coord, y if n > 1 else float(y))[0]
    if n == 1:
        return S + th * th / pot.h(y)
    return S + float(np.dot(th, th))


def integrate_front_face(pot: Potential, k: int, sf: ScalingFunction, chart: str, coord: float,
                         y0, theta0, tau_max: float = 200.0, tol_conv: float = 1e-8,
                         rtol: float = 1e-12, atol: float = 1e-12, crit=None,
                         switching: bool = True) -> FrontFaceTrace:
    """Integrate the front-face flow with Z <-> E chart switching and classify the limit."""
    if chart in ("E", "Eminus") and coord == 0.0 and chart == "Eminus":
        raise ConfigError("start lies on the M- side")
    n = pot.dim
    cps = critical_points(pot) if crit is None else crit
    ycs = [c.y_c for c in cps]
    evp = np.concatenate([[tol_conv], np.ravel(np.array(ycs, dtype=float))]) if ycs else np.array([tol_conv])
    use_kernel = pot.kernel is not None and n == 1 and isinstance(sf, PowerFamily) and pot.ff is None
    if use_kernel:
        fun, evfun = K.front_face_rhs, K.front_face_events
    else:
        fun, evfun = _ff_python(pot, sf, k)
    code = {"Z": 0.0, "E": 1.0, "Eminus": 2.0}
    names = {0.0: "Z", 1.0: "E", 2.0: "Eminus"}
    x = np.concatenate([[coord], np.atleast_1d(y0), np.atleast_1d(theta0)]).astype(float)
    tau0 = 0.0
    taus, charts, xs, segs = [], [], [], []
    converged = False
    limit = None
    # the convergence event fires on entry, so a start already at a corner point is handled here
    if chart != "Z" and evfun(0.0, x, np.array([code[chart]]), evp)[1] < 0.0:
        taus.append(np.array([0.0]))
        charts.append(chart)
        xs.append(x[None, :])
        converged = True
    while not converged:
        cc = code[chart]
        if use_kernel:
            params = np.array([cc, sf.p, k, pot.kernel[0], pot.kernel[1]])
        else:
            params = np.array([cc])
        evs = (Event("chart", 1 if switching else 0, switching), Event("converged", -1, True))
        ev_on = evp if switching else evp
        sol = solve(fun, tau0, x, params, tau_max, rtol=rtol, atol=atol, events=evs,
                    evfun=evfun, evparams=ev_on, max_steps=2_000_000)
        segs.append((chart, sol))
        start = 0 if not taus else 1
        taus.append(sol.ts[start:])
        charts.extend([chart] * (len(sol.ts) - start))
        xs.append(sol.xs[start:])
        if sol.status == STATUS_EVENT:
            name = sol.events[-1][0]
            x = sol.x_final
            tau0 = sol.t_final
            if name == "converged":
                converged = True
                break
            if chart == "Z":
                chart = "E" if x[0] > 0 else "Eminus"
                x[0] = abs(1.0 / x[0])
            else:
                x[0] = (1.0 / x[0]) * (1.0 if chart == "E" else -1.0)
                chart = "Z"
            continue
        break
    tau = np.concatenate(taus)
    X = np.concatenate(xs)
    ys = X[:, 1:1 + n] if n > 1 else X[:, 1]
    ths = X[:, 1 + n:] if n > 1 else X[:, 2]
    G = np.array([_state_G(pot, n, c, X[i, 0], ys[i], ths[i]) for i, c in enumerate(charts)])
    if converged and cps:
        yl = X[-1, 1:1 + n]
        dists = [np.linalg.norm(np.abs(((yl - np.atleast_1d(c.y_c) + math.pi) % TWO_PI) - math.pi))
                 for c in cps]
        limit = cps[int(np.argmin(dists))]
    return FrontFaceTrace(tau, charts, X[:, 0], ys, ths, G, limit, converged, segs)


# ---------------------------------------------------------------------------
# the reference geodesic from a minimum into M+


def _mplus_shoot(fam, cp, z1, seed, tol):
    k = fam.k
    fun, evfun, params = system(fam, 0.0, MODE_TAU)
    z0, y0, th0 = seed
    xi0 = unit_speed_state(fam, 0.0, z0, y0, z0 ** (2 * k - 1) * th0, True).xi
    nan = float("nan")
    evp = np.array([z1, nan, nan, nan, nan, nan, 0.0])
    evs = (Event("z", 1, True), Event("tp", 0, False), Event("t", 0, False), Event("A", 0, False),
           Event("zd", 0, False), Event("sw", 0, False))
    x0 = np.array([z0, y0, xi0, th0, 0.0, 0.0])
    sol = solve(fun, 0.0, x0, params, 1e6, rtol=tol, atol=tol, events=evs, evfun=evfun,
                evparams=evp, max_steps=1_000_000, h_init=1e-3, h_max=0.25)
    if sol.status != STATUS_EVENT:
        raise NumericalError("reference geodesic did not reach z1")
    return sol


def gamma_min_reference(fam: MetricFamily, cp: CriticalPoint, z1: float, delta0: float = 1e-8,
                        tol: float = 1e-12, return_deviation: bool = False):
    """State at z = z1 (eps = 0) of the geodesic leaving the corner minimum ``cp``."""
    if cp.classification != "min":
        raise ConfigError("reference geodesics start at minima")
    if fam.kappa != 2 * fam.k - 2:
        raise ConfigError("reference geodesic needs kappa = 2k - 2")
    pot = potential_of(fam)
    M = linearization(cp, "M_plus", pot, fam.k, fam)
    vals, vecs = np.linalg.eig(M)
    i = int(np.argmin(np.abs(vals - 1.0)))
    v = np.real(vecs[:, i])
    v = v / np.linalg.norm(v)
    if v[0] < 0:
        v = -v

    def shoot(d):
        sol = _mplus_shoot(fam, cp, z1, (d * v[0], cp.y_c + d * v[1], d * v[2]), tol)
        return sol.x_final

    xa = shoot(delta0)
    xb = shoot(0.5 * delta0)
    dev = float(np.max(np.abs(xa[1:4] - xb[1:4])))
    if dev > 1e-5:
        raise SeedSensitivityError(f"halving the seed moved the z1 state by {dev:.3e}")
    rs = RescaledState("E", 0.0, z1, float(xa[1]), float(xa[2]), float(xa[3]))
    return (rs, dev) if return_deviation else rs


# ---------------------------------------------------------------------------
# time-dependent Hamiltonian form on the front face


def hamiltonian_reformulation_check(pot: Potential, k: int, sf: ScalingFunction, y0, theta0,
                                    tau_end: float, Z0: float = 0.0, rtol: float = 1e-13,
                                    atol: float = 1e-13, samples: int = 401):
    """Compare the front-face flow with the (y, Theta) system in the time s.

    Theta = e^psi theta with e^psi = f(Z)^(2k-1), ds/dtau = e^-psi,
    dy/ds = Theta, dTheta/ds = -1/2 e^(2 psi) d_y S.  Returns a dict of
    sup-norm deviations; for p = 2 it also reports the mismatch of Z(tau) and
    e^psi against sinh and cosh^(2k-1).
    """
    n = pot.dim
    if n != 1 or pot.metric is not None:
        raise ConfigError("reformulation check implemented for the flat circle")
    ffun, _ = _ff_python(pot, sf, k)
    # front face in the Z chart, with psi as an extra component
    def fa(t, x, params):
        d = ffun(t, x[:3], params)
        return np.append(d, (2 * k - 1) * sf.f_jet(x[0])[1])

    psi0 = (2 * k - 1) * math.log(sf.f_jet(Z0)[0])
    A = solve(fa, 0.0, [Z0, y0, theta0, psi0], [0.0], tau_end, rtol=rtol, atol=atol)

    def fb(s, x, params):
        Z, y, Th, tau = x
        f = sf.f_jet(Z)[0]
        ep = f ** (2 * k - 1)
        return np.array([f * ep, Th, -0.5 * ep * ep * pot.grad(y), ep])

    def evb(s, x, params, evp):
        return np.array([x[3] - evp[0]])

    e0 = sf.f_jet(Z0)[0] ** (2 * k - 1)
    B = solve(fb, 0.0, [Z0, y0, e0 * theta0, 0.0], [0.0], 1e6, rtol=rtol, atol=atol,
              events=(Event("tau_end", 1, True),), evfun=evb, evparams=[tau_end])
    dev_y = dev_th = dev_Z = 0.0
    for s_i, xb in zip(B.ts, B.xs):
        xa = A(xb[3])[0]
        ep = sf.f_jet(xa[0])[0] ** (2 * k - 1)
        dev_y = max(dev_y, abs(xa[1] - xb[1]))
        dev_th = max(dev_th, abs(xa[2] - xb[2] / ep))
        dev_Z = max(dev_Z, abs(xa[0] - xb[0]) / max(1.0, abs(xa[0])))
    out = {"dev_y": dev_y, "dev_theta": dev_th, "dev_Z": dev_Z,
           "max_deviation": max(dev_y, dev_th, dev_Z), "s_end": float(B.t_final)}
    if isinstance(sf, PowerFamily) and sf.p == 2.0 and Z0 == 0.0:
        taus = np.linspace(0.0, tau_end, samples)
        XA = A(taus)
        out["dev_sinh"] = float(np.max(np.abs(XA[:, 0] - np.sinh(taus)) / np.cosh(taus)))
        ep_num = np.exp(XA[:, 3])
        ep_cf = np.cosh(taus) ** (2 * k - 1)
        out["dev_cosh"] = float(np.max(np.abs(ep_num - ep_cf) / ep_cf))
    return out


# ---------------------------------------------------------------------------
# rescaled integration at fixed eps > 0


def integrate_rescaled(fam: MetricFamily, eps: float, z0: float, y0: float, theta0: float,
                       tau_end: float, rtol: float = 1e-12, atol: float = 1e-12):
    """Integrate the slowed flow in (z, y, xi, theta, t, angle) for tau in [0, tau_end]."""
    fun, _, params = system(fam, eps, MODE_TAU)
    w = fam.sf.jet(eps, z0)[0]
    eta = w ** (2 * fam.k - 1) * theta0
    st = unit_speed_state(fam, eps, z0, y0, eta, True)
    x0 = np.array([z0, y0, st.xi, theta0, 0.0, 0.0])
    return solve(fun, 0.0, x0, params, tau_end, rtol=rtol, atol=atol, max_steps=2_000_000)
