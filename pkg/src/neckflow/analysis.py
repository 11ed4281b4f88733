"""Winding theory by quadrature and the experiment drivers that test it against simulation."""
from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from .errors import (ConfigError, DivergenceError, NeckflowError, NumericalError,
                     SingularIntegrandError)
from .flow import StopCondition, angular_length, integrate
from .integrator import solve
from .metric import (EllipticSurface, MetricFamily, MorseModel, PhasePoint, WarpedProduct,
                     impact_state, unit_speed_state)
from .rescaled import (TWO_PI, CriticalPoint, RescaledState, _mplus_shoot, critical_points,
                       front_face_rhs, integrate_front_face, integrate_rescaled, linearization,
                       potential_of, to_rescaled, eigenvalues_analytic, gamma_min_reference)
from .scaling import PowerFamily, ScalingFunction

# ---------------------------------------------------------------------------
# small helpers


def loglog_fit(x, y):
    """Least-squares line log|y| = a log x + b.  Returns (slope, intercept, r2)."""
    return linear_fit(np.log(np.asarray(x, float)), np.log(np.abs(np.asarray(y, float))))


def linear_fit(x, y):
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    A = np.vstack([x, np.ones_like(x)]).T
    (a, b), *_ = np.linalg.lstsq(A, y, rcond=None)
    ss_res = float(np.sum((y - (a * x + b)) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(a), float(b), r2


def parallel_map(fn, items, workers=1):
    """Ordered map over independent cells, in processes when workers > 1."""
    items = list(items)
    if workers is None or workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def _wrap(d):
    return (d + math.pi) % TWO_PI - math.pi


# ---------------------------------------------------------------------------
# warped products


def clairaut_classify(L: float, W_min: float) -> str:
    """Pass, Asymptotic or TurnBack according to L against the waist radius W_min."""
    if abs(L - W_min) <= 1e-14:
        return "Asymptotic"
    return "Pass" if L < W_min else "TurnBack"


@dataclass
class TrichotomyReport:
    L: float
    W_min: float
    classification: str
    simulated: str
    z_turn: Optional[float]
    angular_length: Optional[float]
    z_final: float
    zdot_final: float

    @property
    def consistent(self):
        return self.classification == self.simulated


def warped_turning_point(W: Callable, L: float, z_lo: float = -1.0):
    """z0 < 0 with W(z0) = L, by bracketed root finding on [z_lo, 0]."""
    return brentq(lambda z: W(z)[0] - L, z_lo, 0.0, xtol=1e-15, rtol=1e-15)


def trichotomy_run(L: float, eps: float = 0.5, k: int = 2, p: float = 4.0, z_start: float = -1.0,
                   z_end: float = 1.0, tol: float = 1e-11, zdot_floor: float = 1e-4,
                   max_steps: int = 400_000, continue_t: float = 20.0) -> TrichotomyReport:
    """Simulate the warped product W = w_p^k from z_start upward with angular momentum L."""
    fam = WarpedProduct(k, PowerFamily(p))
    W_min = eps**k
    cls = clairaut_classify(L, W_min)
    st = unit_speed_state(fam, eps, z_start, 0.0, L, True)
    stop = StopCondition(reach_z=z_end, turning_point=True, zdot_below=zdot_floor,
                         max_steps=max_steps)
    tr = integrate(fam, eps, st, stop, tol=tol, raise_on_cap=False)
    kinds = [e.kind for e in tr.events]
    fin = tr.final
    if kinds and kinds[-1] == "zdot-threshold":
        # slow approach: either a turning point just ahead or the separatrix
        more = integrate(fam, eps, fin, StopCondition(reach_z=0.0, turning_point=True,
                                                      t_max=continue_t, max_steps=max_steps),
                         tol=tol, raise_on_cap=False, energy_check=False)
        extra = [e.kind for e in more.events]
        if "turning-point" in extra:
            kinds = extra
            tr = more
        elif "z-crossing" in extra:
            kinds = ["crossed-waist"]
        fin = more.final if "turning-point" in extra else fin
    zdot = float(fin.xi)  # D = 1 and b = 0 for this family
    if "z-crossing" in kinds:
        sim = "Pass"
    elif "turning-point" in kinds:
        sim = "TurnBack"
    elif "zdot-threshold" in kinds and fin.z < 0.0:
        sim = "Asymptotic"
    else:
        sim = "undetermined"
    zt = tr.event("turning-point").state.z if "turning-point" in kinds else None
    angl = angular_length(tr) if sim == "Pass" else None
    return TrichotomyReport(L, W_min, cls, sim, zt, angl, float(fin.z), zdot)


@dataclass(frozen=True)
class WarpedProfile:
    """W = w_p(eps, z)^k with a cancellation-free excess W - W(0) and its inverse."""

    eps: float
    k: int
    p: float

    def __call__(self, z):
        w, wz, _ = PowerFamily(self.p).jet(self.eps, z)
        return w**self.k, self.k * w ** (self.k - 1) * wz

    def excess(self, z):
        e = self.eps
        return e**self.k * math.expm1((self.k / self.p) * math.log1p(abs(z / e) ** self.p))

    def rho(self, dW, side=-1.0):
        """z on the given side with W(z) - W(0) = dW."""
        e = self.eps
        Zp = math.expm1((self.p / self.k) * math.log1p(dW / e**self.k))
        return side * e * Zp ** (1.0 / self.p)


def warped_angular_length(W: Callable, L: float, z_range=(-1.0, 1.0), form: str = "z") -> float:
    """Angular length of a passing geodesic on a warped product with profile W.

    ``W(z)`` returns (W, W').  ``form="z"`` integrates L / (W sqrt(W^2 - L^2)) dz.
    ``form="phi"`` integrates rho'(L / cos phi) over the Clairaut angle on a
    half-range with one end at the waist, rho being the inverse of W there.
    The phi-form needs ``W.rho``, a cancellation-free inverse of W - W(0)
    (see :class:`WarpedProfile`): root finding on W(z) - W(0) loses about half
    the digits of z near the waist, where W - W(0) ~ z^p.
    """
    a, b = z_range
    if L == 0.0:
        return 0.0
    zs = np.linspace(a, b, 2001)
    wmin = min(W(z)[0] for z in zs)
    if a <= 0.0 <= b:
        wmin = min(wmin, W(0.0)[0])
    if L >= wmin:
        raise SingularIntegrandError("L must lie below the minimum of W on the range")
    if form == "z":
        g = lambda z: L / (W(z)[0] * math.sqrt(W(z)[0] ** 2 - L * L))
        pts = [0.0] if a < 0.0 < b else None
        val, _ = quad(g, a, b, points=pts, epsabs=0.0, epsrel=1e-13, limit=400)
        return val
    if form != "phi":
        raise ValueError(form)
    if a < 0.0 and b == 0.0:
        zo, side = a, -1.0
    elif a == 0.0 and b > 0.0:
        zo, side = b, 1.0
    else:
        raise ConfigError("phi-form needs a half-range with one end at the waist")
    if not hasattr(W, "rho"):
        raise ConfigError("phi-form needs a profile with an inverse rho (see WarpedProfile)")
    W0 = W(0.0)[0]
    rho = lambda dW: W.rho(dW, side)
    phi_o = math.acos(L / W(zo)[0])
    phi_w = math.acos(L / W0)
    span = phi_o - phi_w

    def integrand(s):
        # phi = phi_w + span s^4 smooths the endpoint singularity at the waist
        if s == 0.0:
            s = 1e-300
        dphi = span * s**4
        phi = phi_w + dphi
        dW = L * 2.0 * math.sin(phi_w + 0.5 * dphi) * math.sin(0.5 * dphi) / (math.cos(phi) * math.cos(phi_w))
        z = rho(dW)
        return abs(1.0 / W(z)[1]) * 4.0 * s**3 * abs(span) if z != 0.0 else 0.0

    val, _ = quad(integrand, 0.0, 1.0, epsabs=0.0, epsrel=1e-13, limit=400)
    return val


# ---------------------------------------------------------------------------
# winding constant


def _f2k_minus_one(sf, Z, k):
    if isinstance(sf, PowerFamily):
        return math.expm1((2.0 * k / sf.p) * math.log1p(abs(Z) ** sf.p))
    return sf.f_jet(Z)[0] ** (2 * k) - 1.0


def winding_constant(v: float, sf: ScalingFunction, k: int, return_error: bool = False):
    """C_v = int_0^inf dZ / (f^k sqrt(f^2k - v^2)).

    The half-line is split at Z = 1; [1, inf) is mapped to E = 1/Z in [0, 1],
    which is exact and removes any tail truncation.  For v > 0.9 the inner
    part uses the stretched variable Z = alpha * zeta with
    alpha = ((1 - v^2) / (2kc))^(1 / 2l).
    """
    if v >= 1.0:
        raise DivergenceError("C_v diverges at v = 1")
    if v < 0.0:
        raise ConfigError("v must be non-negative")
    one_m_v2 = (1.0 - v) * (1.0 + v)
    err = 0.0

    def outer(E):
        if E == 0.0:
            return 0.0
        F = sf.F_jet(E)[0]
        return E ** (2 * k - 2) / (F**k * math.sqrt(F ** (2 * k) - (v * E**k) ** 2))

    I2, e2 = quad(outer, 0.0, 1.0, epsabs=0.0, epsrel=1e-13, limit=200)
    err += e2

    def inner(Z):
        f = sf.f_jet(Z)[0]
        return 1.0 / (f**k * math.sqrt(_f2k_minus_one(sf, Z, k) + one_m_v2))

    if v <= 0.9:
        I1, e1 = quad(inner, 0.0, 1.0, epsabs=0.0, epsrel=1e-13, limit=200)
        err += e1
    else:
        ell, c = sf.order_of_minimum()
        alpha = (one_m_v2 / (2.0 * k * c)) ** (1.0 / (2 * ell))
        top = 1.0 / alpha
        edges = [0.0, 1.0]
        while edges[-1] * 10.0 < top:
            edges.append(edges[-1] * 10.0)
        edges.append(top)
        I1 = 0.0
        for lo, hi in zip(edges[:-1], edges[1:]):
            val, e1 = quad(lambda s: alpha * inner(alpha * s), lo, hi, epsabs=0.0,
                           epsrel=1e-13, limit=200)
            I1 += val
            err += e1
    return (I1 + I2, err) if return_error else I1 + I2


def winding_constant_phi(phi: float, sf: ScalingFunction, k: int):
    """The angle form C_phi = C_{cos phi}."""
    return winding_constant(math.cos(phi), sf, k)


def cv_leading_constant(ell: int, c: float, k: int, source: str = "proof") -> float:
    """Leading constant of C_v as v -> 1.

    ``source="proof"`` is the constant that the substitution argument actually
    yields; for l = 1 it is (2kc)^(-1/2) / 2.  ``source="footnote"`` returns the
    published value (2kc)^(-1/2), which is larger by a factor 2.  For l > 1
    both agree.
    """
    if ell == 1:
        base = (2.0 * k * c) ** -0.5
        return base if source == "footnote" else 0.5 * base
    J, _ = quad(lambda s: (s ** (2 * ell) + 1.0) ** -0.5 - (1.0 / s**ell if s > 1 else 0.0),
                0.0, np.inf, epsabs=0.0, epsrel=1e-12, limit=400)
    J += 1.0 / (ell - 1.0)  # int_1^inf s^-l ds
    return 2.0**-0.5 * (k * c) ** (-1.0 / (2 * ell)) * J


def cv_asymptote(v: float, ell: int, c: float, k: int, source: str = "proof") -> float:
    """Leading asymptotic form of C_v as v -> 1."""
    C = cv_leading_constant(ell, c, k, source)
    if ell == 1:
        return C * math.log(1.0 / (1.0 - v))
    return C * (1.0 - v) ** (-(ell - 1.0) / (2.0 * ell))


def cv_slope_ell1(sf, k, v_lo=1 - 1e-2, v_hi=1 - 1e-6, n=13):
    """Fitted slope of C_v against log(1/(1-v)) on a log-uniform grid of 1 - v."""
    one = np.logspace(math.log10(1 - v_lo), math.log10(1 - v_hi), n)
    x = np.log(1.0 / one)
    y = np.array([winding_constant(1.0 - o, sf, k) for o in one])
    return linear_fit(x, y)


def cv_loglog_slope(sf, k, v_lo=1 - 1e-2, v_hi=1 - 1e-6, n=13):
    """Fitted slope of log C_v against log(1 - v)."""
    one = np.logspace(math.log10(1 - v_lo), math.log10(1 - v_hi), n)
    y = np.array([winding_constant(1.0 - o, sf, k) for o in one])
    return loglog_fit(one, y)


# ---------------------------------------------------------------------------
# winding experiment


@dataclass
class WindingCell:
    eps: float
    phi: float
    y0: float
    v0: float
    angl_measured: float
    angl_predicted: float
    rel_error: float
    remainder: float
    energy_error: float
    error: Optional[str] = None


@dataclass
class WindingReport:
    """Cells per (phi, eps, start phase y0) plus per-(phi, eps) aggregates and fits.

    The remainder magnitude of a (phi, eps) pair is the largest |R| over the
    start phases; for warped products R does not depend on the phase.
    """

    cells: list
    C_phi: dict
    fits: dict
    k: int

    def groups(self):
        out = {}
        for c in self.cells:
            out.setdefault((c.phi, c.eps), []).append(c)
        return out

    def rows(self):
        rows = []
        for (phi, eps), cs in self.groups().items():
            ok = [c for c in cs if c.error is None]
            pred = cs[0].angl_predicted
            meas = float(np.mean([c.angl_measured for c in ok])) if ok else float("nan")
            rows.append((eps, phi, cs[0].v0, meas, pred, (meas - pred) / pred))
        return rows


def _winding_cell(args):
    fam, eps, phi, y0, z0, tol, C, w_switch = args
    v0 = math.cos(phi)
    pred = C * v0 / eps ** (fam.k - 1)
    try:
        st = impact_state(fam, eps, y0, phi, True)
        tr = integrate(fam, eps, st, StopCondition(reach_z=z0, max_steps=5_000_000), tol=tol,
                       w_switch=w_switch)
        a = angular_length(tr)
        R = a * eps ** (fam.k - 1) - C * v0
        return WindingCell(eps, phi, y0, v0, a, pred, (a - pred) / pred, R, tr.max_energy_error)
    except NeckflowError as exc:
        nan = float("nan")
        return WindingCell(eps, phi, y0, v0, nan, pred, nan, nan, nan,
                           f"{type(exc).__name__}: {exc}")


def winding_experiment(fam: MetricFamily, phis: Sequence[float], eps_list: Sequence[float],
                       z0: float = 1.0, tol: float = 1e-12, phases: Sequence[float] = (0.0,),
                       workers: int = 1, w_switch: Optional[float] = None) -> WindingReport:
    """Angular length from the waist to z0 against C_phi cos(phi) / eps^(k-1)."""
    C = {phi: winding_constant(math.cos(phi), fam.sf, fam.k) for phi in phis}
    jobs = [(fam, eps, phi, y0, z0, tol, C[phi], w_switch) for phi in phis for eps in eps_list
            for y0 in phases]
    cells = parallel_map(_winding_cell, jobs, workers)
    rep = WindingReport(cells, C, {}, fam.k)
    groups = rep.groups()
    for phi in phis:
        e, Rmax, Rmean, ratio = [], [], [], []
        for eps in eps_list:
            ok = [c for c in groups[(phi, eps)] if c.error is None]
            if not ok:
                continue
            R = np.array([c.remainder for c in ok])
            e.append(eps)
            Rmax.append(float(np.max(np.abs(R))))
            Rmean.append(float(np.mean(R)))
            ratio.append(float(np.mean([c.angl_measured / c.angl_predicted for c in ok])))
        fit = {"eps": e, "remainder_max": Rmax, "remainder_mean": Rmean, "ratio": ratio}
        good = [i for i, r in enumerate(Rmax) if r > 0.0]
        if len(good) >= 2:
            ee = np.array([e[i] for i in good])
            rr = np.array([Rmax[i] for i in good])
            slope, icpt, r2 = loglog_fit(ee, rr)
            # k = 2 shape R ~ eps log(1/eps): log(|R| / eps) linear in log log(1/eps)
            s2, _, r2b = linear_fit(np.log(np.log(1.0 / ee)), np.log(rr / ee))
            fit.update({"remainder_exponent": slope, "remainder_intercept": icpt, "r2": r2,
                        "eps_log_slope": s2, "eps_log_r2": r2b})
        rep.fits[phi] = fit
    return rep


# ---------------------------------------------------------------------------
# angular momentum drift


def _dense_samples(trace, per_step=8):
    """(z, L) on a refined grid of every integration step."""
    zs, Ls = [trace.states[:, 0]], [trace.L]
    fam, eps = trace.fam, trace.eps
    k = fam.k
    for mode, sol in trace.segments:
        st = sol.step_t
        for i in range(len(st) - 1):
            b = st[i + 1] if i < len(st) - 2 else sol.ts[-1]
            ts = st[i] + (b - st[i]) * (np.arange(1, per_step) / per_step)
            X = sol(ts)
            for x in X:
                z, y, m = x[0], x[1], x[3]
                w = fam.sf.jet(eps, z)[0]
                eta = m if mode == 0 else w ** (2 * k - 1) * m
                zs.append(np.array([z]))
                Ls.append(np.array([abs(eta) / math.sqrt(fam.h_factor(eps, z, y))]))
    return np.concatenate(zs), np.concatenate(Ls)


@dataclass
class DriftReport:
    eps: float
    phi: float
    L0: float
    r: np.ndarray
    drift: np.ndarray
    ratio: np.ndarray
    slope: float
    limit: float


def momentum_drift_experiment(fam: MetricFamily, eps_list: Sequence[float], phi: float = math.acos(0.95),
                              r_min: float = 1e-3, r_max: float = 1e-1, n_r: int = 21,
                              y0: float = 0.3, tol: float = 1e-12):
    """sup_{|z| <= r} |L(z) - L0| for geodesics through the waist."""
    out = []
    rs = np.logspace(math.log10(r_min), math.log10(r_max), n_r)
    for eps in eps_list:
        st = impact_state(fam, eps, y0, phi, True)
        L0 = st.eta / math.sqrt(fam.h_factor(eps, 0.0, y0))
        L0 = abs(L0)
        zs, Ls = [], []
        for s in (st, st.reversed()):
            tr = integrate(fam, eps, s, StopCondition(reach_z=r_max if s is st else -r_max,
                                                     max_steps=2_000_000), tol=tol)
            z, L = _dense_samples(tr)
            zs.append(z)
            Ls.append(L)
        z = np.concatenate(zs)
        L = np.concatenate(Ls)
        dev = np.abs(L - L0)
        drift = np.array([dev[np.abs(z) <= r].max(initial=0.0) for r in rs])
        ratio = drift / rs
        slope = float(np.sum(drift * rs) / np.sum(rs * rs))
        out.append(DriftReport(eps, phi, L0, rs, drift, ratio, slope, float(ratio[0])))
    return out


# ---------------------------------------------------------------------------
# Poincare map and focussing


@dataclass
class Endpoint:
    y0: float
    theta0: float
    state: Optional[RescaledState]
    error: Optional[str] = None


def _poincare_cell(args):
    fam, eps, y0, th0, z1, tol, w_switch = args
    try:
        w = fam.sf.jet(eps, 0.0)[0]
        st = unit_speed_state(fam, eps, 0.0, y0, w ** (2 * fam.k - 1) * th0, True)
        tr = integrate(fam, eps, st, StopCondition(reach_z=z1, max_steps=5_000_000), tol=tol,
                       w_switch=w_switch)
        fin = tr.final
        return Endpoint(y0, th0, to_rescaled(fam, eps, fin, z_switch=0.0))
    except NeckflowError as exc:
        return Endpoint(y0, th0, None, f"{type(exc).__name__}: {exc}")


def poincare_map(fam: MetricFamily, eps: float, starts, z1: float, tol: float = 1e-11,
                 workers: int = 1, w_switch: Optional[float] = None):
    """Endpoints at the first crossing of z = z1 of unit upward geodesics from the waist.

    ``starts`` are (y, theta) with theta the rescaled momentum at z = 0.
    Endpoints are returned in the E chart.
    """
    if eps <= 0.0:
        raise ConfigError("the Poincare map needs eps > 0")
    jobs = [(fam, eps, y, th, z1, tol, w_switch) for y, th in starts]
    return parallel_map(_poincare_cell, jobs, workers)


def section_distance(a: RescaledState, b: RescaledState, with_E: bool = True) -> float:
    """Euclidean distance in (E, y, theta) with y reduced to the nearest representative."""
    dE = a.a - b.a if with_E else 0.0
    return math.sqrt(dE * dE + _wrap(a.y - b.y) ** 2 + (a.theta - b.theta) ** 2)


def reference_state(fam: MetricFamily, cp: CriticalPoint, z1: float, delta0: float = 1e-8,
                    tol: float = 1e-12):
    """State at z1 (eps = 0) of the M+ geodesic leaving a corner critical point along z."""
    if cp.classification == "min":
        return gamma_min_reference(fam, cp, z1, delta0, tol)
    pot = potential_of(fam)
    M = linearization(cp, "M_plus", pot, fam.k, fam)
    vals, vecs = np.linalg.eig(M)
    v = np.real(vecs[:, int(np.argmin(np.abs(vals - 1.0)))])
    v = v / np.linalg.norm(v)
    if v[0] < 0:
        v = -v
    x = _mplus_shoot(fam, cp, z1, (delta0 * v[0], cp.y_c + delta0 * v[1], delta0 * v[2]), tol).x_final
    return RescaledState("E", 0.0, z1, float(x[1]), float(x[2]), float(x[3]))


def check_section_domain(fam: MetricFamily, eps_list, z1: float, n: int = 64):
    """Raise DegenerateMetricError unless the metric is positive on 0 <= z <= z1 for every eps."""
    from .metric import _block
    for eps in eps_list:
        for z in np.linspace(0.0, z1, n + 1):
            if eps == 0.0 and z == 0.0:
                continue
            for y in np.linspace(0.0, TWO_PI, n, endpoint=False):
                _block(fam, eps, float(z), float(y))


@dataclass
class FocussingRow:
    eps: float
    seed: int
    y0: float
    theta0: float
    y_end: float
    theta_end: float
    dist_to_min: float
    basin: str
    error: Optional[str] = None


@dataclass
class FocussingReport:
    rows: list
    critical: list
    references: dict
    rho: Optional[float]
    r2: Optional[float]
    rho_no_E: Optional[float]
    r2_no_E: Optional[float]
    mean_dist: dict
    histogram: dict
    symmetric: Optional[bool]
    flagged_max: list
    attractor: dict
    mode: str
    rho_intercept: Optional[float] = None

    def minima_fraction(self, eps):
        rs = [r for r in self.rows if r.eps == eps]
        return sum(r.basin.startswith("min") for r in rs) / max(1, len(rs))


def _basin_label(cp, i):
    return f"{cp.classification}@{cp.y_c:.6f}"


def _symmetry_maps(fam):
    if isinstance(fam, (MorseModel, EllipticSurface)):
        return [lambda y: -y, lambda y: y + math.pi]
    return []


def _check_symmetry(rows, crit, maps, n_seeds):
    """Basins of mirrored seeds are the mirrored basins."""
    by_eps = {}
    for r in rows:
        by_eps.setdefault(r.eps, {})[round(r.y0 % TWO_PI, 9)] = r
    ys = [c.y_c for c in crit]

    def nearest(y):
        return int(np.argmin([abs(_wrap(y - yc)) for yc in ys]))

    for eps, seeds in by_eps.items():
        for r in seeds.values():
            if r.error or r.basin == "none":
                continue
            for g in maps:
                key = round(g(r.y0) % TWO_PI, 9)
                img = seeds.get(key)
                if img is None:
                    for kk, vv in seeds.items():
                        if abs(_wrap(kk - key)) < 1e-7:
                            img = vv
                    if img is None:
                        continue
                src = next(i for i, c in enumerate(crit) if _basin_label(c, i) == r.basin)
                tgt = nearest(g(crit[src].y_c))
                if img.basin != _basin_label(crit[tgt], tgt):
                    return False
    return True


def focussing_experiment(fam: MetricFamily, eps_list: Sequence[float], n_seeds: int = 10,
                         theta0: float = 0.0, z1: float = 1.0, tol: float = 1e-11,
                         delta0: float = 1e-8, workers: int = 1, seeds=None,
                         w_switch: Optional[float] = None) -> FocussingReport:
    """Endpoints at z1 of waist geodesics, their basins and the focussing exponent."""
    if fam.kappa != 2 * fam.k - 2:
        raise ConfigError("focussing needs kappa = 2k - 2")
    check_section_domain(fam, list(eps_list) + [0.0], z1)
    pot = potential_of(fam)
    crit = critical_points(pot)
    if seeds is None:
        seeds = [(TWO_PI * j / n_seeds, theta0) for j in range(n_seeds)]
    mode = "constant" if crit.degenerate or not crit else "morse"
    refs = {}
    if mode == "morse":
        for i, cp in enumerate(crit):
            refs[_basin_label(cp, i)] = reference_state(fam, cp, z1, delta0)
    rows = []
    for eps in eps_list:
        eps_rows = poincare_map(fam, eps, seeds, z1, tol, workers, w_switch)
        for j, ep in enumerate(eps_rows):
            if ep.state is None:
                rows.append(FocussingRow(eps, j, ep.y0, ep.theta0, float("nan"), float("nan"),
                                         float("nan"), "none", ep.error))
                continue
            s = ep.state
            if mode == "morse":
                dists = {lab: section_distance(s, ref) for lab, ref in refs.items()}
                basin = min(dists, key=lambda lab: (dists[lab], lab))
                dmin = min(d for lab, d in dists.items() if lab.startswith("min"))
            else:
                basin, dmin = "none", float("nan")
            rows.append(FocussingRow(eps, j, ep.y0, ep.theta0, float(s.y % TWO_PI), float(s.theta),
                                     float(dmin), basin))
    hist = {}
    for r in rows:
        hist.setdefault(repr(r.eps), {}).setdefault(r.basin, 0)
        hist[repr(r.eps)][r.basin] += 1
    mean_d, mean_d2 = {}, {}
    for eps in eps_list:
        sel = [r for r in rows if r.eps == eps and r.basin.startswith("min")]
        if sel:
            mean_d[eps] = float(np.exp(np.mean(np.log([r.dist_to_min for r in sel]))))
            d2 = [section_distance(RescaledState("E", 0, 1, r.y_end, 0, r.theta_end),
                                   refs[r.basin], with_E=False) for r in sel]
            d2 = [max(d, 1e-300) for d in d2]
            mean_d2[eps] = float(np.exp(np.mean(np.log(d2))))
    rho = r2 = rho2 = r22 = icpt = None
    if len(mean_d) >= 2:
        e = sorted(mean_d)
        rho, icpt, r2 = loglog_fit(e, [mean_d[x] for x in e])
        rho2, _, r22 = loglog_fit(e, [mean_d2[x] for x in e])
        if r2 < 0.9:
            warnings.warn(f"focussing fit has R^2 = {r2:.3f} < 0.9")
    sym = _check_symmetry(rows, crit, _symmetry_maps(fam), n_seeds) if mode == "morse" else None
    flagged = [(r.eps, r.seed) for r in rows if r.theta0 == 0.0 and r.basin.startswith("max")]
    attractor = attractor_report(fam, rows, crit, eps_list) if mode == "morse" else {}
    return FocussingReport(rows, list(crit), refs, rho, r2, rho2, r22, mean_d, hist, sym,
                           flagged, attractor, mode, icpt)


def _axis_label(y):
    """Which coordinate axis of the cross-section plane a direction y lies on."""
    c, s = abs(math.cos(y)), abs(math.sin(y))
    if s < 1e-6:
        return "v=0"
    if c < 1e-6:
        return "u=0"
    return "off-axis"


def attractor_report(fam, rows, crit, eps_list):
    """Empirical attracting axis at the smallest eps against the linearization prediction."""
    k = fam.k
    stable = []
    for cp in crit:
        mu = eigenvalues_analytic(cp.hess_eigs[0], k)
        if all(m.real < 0 for m in mu):
            stable.append(cp)
    predicted = sorted({_axis_label(c.y_c) for c in stable})
    eps = min(eps_list)
    counts = {}
    for r in rows:
        if r.eps != eps or r.error:
            continue
        j = int(np.argmin([abs(_wrap(r.y_end - c.y_c)) for c in crit]))
        lab = _axis_label(crit[j].y_c)
        counts[lab] = counts.get(lab, 0) + 1
    empirical = max(sorted(counts), key=lambda lab: counts[lab]) if counts else None
    return {"predicted": predicted, "empirical": empirical, "counts": counts,
            "consistent": empirical in predicted if empirical else False}


# ---------------------------------------------------------------------------
# front-face limit


def front_face_solution(fam: MetricFamily, Z0: float, y0: float, theta0: float, T: float,
                        rtol=1e-12, atol=1e-12):
    """Front-face trajectory in the Z chart on [0, T] (dense)."""
    pot = potential_of(fam)
    sf, k = fam.sf, fam.k

    def fun(t, x, params):
        return np.array(front_face_rhs("Z", x[0], x[1], x[2], pot, sf, k))

    return solve(fun, 0.0, [Z0, y0, theta0], [0.0], T, rtol=rtol, atol=atol)


def front_face_limit_check(fam: MetricFamily, eps_list: Sequence[float], y0: float, theta0: float,
                           T: float = 5.0, samples: int = 501, tol: float = 1e-12):
    """sup over tau in [0, T] of the distance between the eps-flow and the front-face flow.

    Distance: |dZ| / (1 + |Z|) + |dy| + |dtheta|, both started at Z = 0.
    """
    ff = front_face_solution(fam, 0.0, y0, theta0, T, tol, tol)
    taus = np.linspace(0.0, T, samples)
    X = ff(taus)
    devs = []
    for eps in eps_list:
        sol = integrate_rescaled(fam, eps, 0.0, y0, theta0, T, tol, tol)
        Y = sol(taus)
        Z = Y[:, 0] / eps
        d = (np.abs(Z - X[:, 0]) / (1.0 + np.abs(X[:, 0])) + np.abs(_wrap(Y[:, 1] - X[:, 1]))
             + np.abs(Y[:, 3] - X[:, 2]))
        devs.append(float(d.max()))
    ratios = [devs[i + 1] / devs[i] for i in range(len(devs) - 1)]
    return {"eps": list(eps_list), "deviation": devs, "ratios": ratios}


def theta_decay_rate(fam: MetricFamily, y0: float = 0.3, theta0: float = 0.5,
                     window=(5.0, 15.0), samples: int = 201):
    """Fitted rate nu in |theta| ~ exp(-nu tau) for the front-face flow from Z = 0."""
    sol = front_face_solution(fam, 0.0, y0, theta0, window[1])
    taus = np.linspace(window[0], window[1], samples)
    th = np.abs(sol(taus)[:, 2])
    slope, _, r2 = linear_fit(taus, np.log(th))
    return -slope, r2


# ---------------------------------------------------------------------------
# eigenvalue check and oracle check


def jacobian_fd(fun, x, h=1e-6):
    x = np.asarray(x, float)
    n = len(x)
    J = np.empty((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        J[:, j] = (np.asarray(fun(x + e)) - np.asarray(fun(x - e))) / (2 * h)
    return J


def eigen_check(fam: MetricFamily):
    """Finite-difference Jacobian eigenvalues at each corner critical point (E chart)."""
    pot = potential_of(fam)
    k = fam.k
    out = []
    for cp in critical_points(pot):
        f = lambda x: front_face_rhs("E", x[0], x[1], x[2], pot, fam.sf, k)
        J = jacobian_fd(f, [0.0, cp.y_c, 0.0])
        ev = np.sort_complex(np.linalg.eigvals(J))
        mu = eigenvalues_analytic(cp.hess_eigs[0], k)
        pred = np.sort_complex(np.array([-1.0, mu[0], mu[1]], dtype=complex))
        Mp = linearization(cp, "M_plus", pot, k, fam)
        evp = np.linalg.eigvals(Mp)
        out.append({"y_c": cp.y_c, "a": cp.hess_eigs[0], "classification": cp.classification,
                    "numeric": ev, "predicted": pred, "max_error": float(np.max(np.abs(ev - pred))),
                    "mplus_has_plus_one": bool(np.min(np.abs(evp - 1.0)) < 1e-10)})
    return out


def oracle_check(k: int = 2, delta: float = 0.8, eps: float = 1.0, z_start: float = -1.0,
                 y0: float = 0.3, phi_impact: float = math.acos(0.95), z1: float = 1.0,
                 tol: float = 1e-12):
    """Hamiltonian flow on the elliptic surface against the ambient Lagrangian integration."""
    from .flow import ambient_oracle_integrate, velocity_from_state
    fam = EllipticSurface(k, delta)
    eta = 0.5 * math.sqrt(fam.coefficients(eps, z_start, y0).H)
    st = unit_speed_state(fam, eps, z_start, y0, eta * math.cos(phi_impact), True)
    tr = integrate(fam, eps, st, StopCondition(reach_z=z1), tol=tol)
    zd, pd = velocity_from_state(fam, eps, st)
    orc = ambient_oracle_integrate(k, delta, fam.sf, eps, (z_start, y0, zd, pd),
                                   StopCondition(reach_z=z1))
    fin = tr.final
    return {"hamiltonian": (fin.z, fin.y), "oracle": (orc.z[-1], orc.phi[-1]),
            "dz": abs(fin.z - orc.z[-1]), "dphi": abs(fin.y - orc.phi[-1]),
            "energy_error": tr.max_energy_error, "trace": tr}
