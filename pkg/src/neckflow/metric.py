"""Metric families of the neck ansatz and their Hamiltonians.

Every family with a circle cross-section is reduced to the 2x2 coefficients

    g = A dz^2 + 2 B dz dy + H dy^2

together with their first partial derivatives.  The cometric is then

    2 Ham = eta^2 / H + (xi - beta eta)^2 / D,   beta = B / H,  D = A - B beta,

which for the ansatz ``A = 1 - w^kappa S``, ``B = w^2k b``, ``H = w^2k h``
gives ``D = 1 - w^kappa S - w^2k |b|^2``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np

from ._accel import njit
from .errors import ConfigError, DegenerateMetricError, NoSolutionError
from .scaling import PowerFamily, ScalingFunction

Z_SWITCH = 10.0

# kernel family ids (see _kernels.py)
FAM_ANSATZ_B0 = 0
FAM_ELLIPTIC = 1


class Coefficients(NamedTuple):
    A: float
    A_z: float
    A_y: float
    B: float
    B_z: float
    B_y: float
    H: float
    H_z: float
    H_y: float


@dataclass(frozen=True)
class PhasePoint:
    """Cotangent state (z, y, xi, eta) with y unwrapped on the universal cover."""

    z: float
    y: float
    xi: float
    eta: float

    def as_array(self):
        return np.array([self.z, self.y, self.xi, self.eta], dtype=float)

    @classmethod
    def from_array(cls, a):
        return cls(float(a[0]), float(a[1]), float(a[2]), float(a[3]))

    def reversed(self):
        return PhasePoint(self.z, self.y, -self.xi, -self.eta)


def reduce_angle(y):
    """Fundamental-domain representative in [0, 2 pi)."""
    r = math.fmod(y, 2.0 * math.pi)
    if r < 0.0:
        r += 2.0 * math.pi
    if r >= 2.0 * math.pi:
        r = 0.0
    return r


def blowup_point(eps, z, z_switch=Z_SWITCH):
    """Chart tag and coordinates for (eps, z): ("Z", Z, eps), ("E", E, z) or ("Eminus", E, z)."""
    if eps > 0.0 and abs(z) <= z_switch * eps:
        return "Z", z / eps, eps
    if z > 0.0:
        return "E", eps / z, z
    if z < 0.0:
        return "Eminus", -eps / z, z
    raise DegenerateMetricError("blow-up point undefined at eps = z = 0")


def blowup_to_eps_z(chart, a, c):
    if chart == "Z":
        return c, a * c
    if chart in ("E", "Eminus"):
        return abs(a * c), c
    raise ValueError(chart)


def _fd4(fun, x, h):
    return (fun(x - 2 * h) - 8 * fun(x - h) + 8 * fun(x + h) - fun(x + 2 * h)) / (12 * h)


class MetricFamily:
    """Base class.  Subclasses implement :meth:`coefficients`."""

    k: int
    sf: ScalingFunction
    kappa: int
    is_ansatz = True
    fd_xi = False

    def coefficients(self, eps, z, y) -> Coefficients:
        raise NotImplementedError

    def kernel_params(self) -> Optional[np.ndarray]:
        """Parameters for the compiled kernel or None for the Python path."""
        return None

    # cross-section metric h at (eps, z, y): H / w^2k
    def h_factor(self, eps, z, y):
        w = self.sf.jet(eps, z)[0]
        return self.coefficients(eps, z, y).H / w ** (2 * self.k)

    def S_corner(self, y):
        """S on the corner (front face meets z > 0), as a function of y."""
        raise NotImplementedError

    def dS_corner(self, y):
        return _fd4(self.S_corner, y, 1e-4)

    def d2S_corner(self, y):
        return _fd4(self.dS_corner, y, 1e-4)

    def cross_metric(self, y):
        """Cross-section metric coefficient h(y) used on the front face."""
        return 1.0

    def blowup_data(self, chart, a, c, y):
        """(S, b, h) and their derivatives in the chart coordinates (a, c) and y.

        Returns three tuples ``(value, d_a, d_c, d_y)``.
        """
        raise NotImplementedError

    def check_kappa(self):
        if not (self.k <= self.kappa <= 2 * self.k):
            raise ConfigError(f"kappa must lie in [k, 2k], got {self.kappa} for k={self.k}")


def _ansatz_coefficients(k, kappa, w, wz, S, S_z, S_y, b, b_z, b_y, h, h_z, h_y):
    wk = w**kappa
    w2k = w ** (2 * k)
    dwk = kappa * w ** (kappa - 1) * wz if kappa > 0 else 0.0
    dw2k = 2 * k * w ** (2 * k - 1) * wz
    A = 1.0 - wk * S
    A_z = -dwk * S - wk * S_z
    A_y = -wk * S_y
    return Coefficients(
        A, A_z, A_y,
        w2k * b, dw2k * b + w2k * b_z, w2k * b_y,
        w2k * h, dw2k * h + w2k * h_z, w2k * h_y,
    )


Provider = Callable[[str, float, float, float], float]


@dataclass(frozen=True)
class GeneralAnsatz(MetricFamily):
    """g = (1 - w^kappa S) dz^2 + 2 w^2k b dz dy + w^2k h dy^2 on a circle.

    ``S``, ``b`` and ``h`` are called as ``provider(chart, a, c, y)`` with the
    blow-up coordinates of :func:`blowup_point`; ``h`` must be positive.
    Derivatives are taken by fourth-order central differences.
    """

    k: int
    sf: ScalingFunction
    S: Provider
    b: Provider = field(default=lambda chart, a, c, y: 0.0)
    h: Provider = field(default=lambda chart, a, c, y: 1.0)
    kappa: Optional[int] = None

    def __post_init__(self):
        if self.kappa is None:
            object.__setattr__(self, "kappa", 2 * self.k - 2)
        self.check_kappa()

    def _eval(self, prov, eps, z, y):
        chart, a, c = blowup_point(eps, z)
        return prov(chart, a, c, y)

    def raw(self, eps, z, y):
        return tuple(self._eval(p, eps, z, y) for p in (self.S, self.b, self.h))

    fd_xi = True

    def coefficients(self, eps, z, y, need_z=True):
        w, wz, _ = self.sf.jet(eps, z)
        hz = max(1e-6, 1e-6 * abs(z))
        vals = []
        for prov in (self.S, self.b, self.h):
            v = self._eval(prov, eps, z, y)
            vz = _fd4(lambda s: self._eval(prov, eps, s, y), z, hz) if need_z else 0.0
            vy = _fd4(lambda s: self._eval(prov, eps, z, s), y, 1e-4)
            vals.append((v, vz, vy))
        (S, Sz, Sy), (b, bz, by), (h, hz_, hy) = vals
        return _ansatz_coefficients(self.k, self.kappa, w, wz, S, Sz, Sy, b, bz, by, h, hz_, hy)

    def two_ham(self, eps, z, y, xi, eta):
        w = self.sf.jet(eps, z)[0]
        S, b, h = self.raw(eps, z, y)
        D = 1.0 - w**self.kappa * S - w ** (2 * self.k) * b * b / h
        u = xi - b * eta / h
        return eta * eta / (w ** (2 * self.k) * h) + u * u / D

    def blowup_data(self, chart, a, c, y):
        out = []
        for prov in (self.S, self.b, self.h):
            v = prov(chart, a, c, y)
            ha = 1e-5 * max(1.0, abs(a))
            hc = 1e-5 * max(1.0, abs(c))
            if chart != "Z" and a < 2 * ha:
                # one-sided in E near the corner E = 0
                da = (-3 * v + 4 * prov(chart, a + ha, c, y) - prov(chart, a + 2 * ha, c, y)) / (2 * ha)
            else:
                da = _fd4(lambda s: prov(chart, s, c, y), a, ha)
            if chart == "Z" and c < 2 * hc:
                dc = (-3 * v + 4 * prov(chart, a, c + hc, y) - prov(chart, a, c + 2 * hc, y)) / (2 * hc)
            else:
                dc = _fd4(lambda s: prov(chart, a, s, y), c, hc)
            dy = _fd4(lambda s: prov(chart, a, c, s), y, 1e-4)
            out.append((v, da, dc, dy))
        return tuple(out)

    def S_corner(self, y):
        return self.S("E", 0.0, 0.0, y)

    def cross_metric(self, y):
        return self.h("E", 0.0, 0.0, y)


@dataclass(frozen=True)
class WarpedProduct(MetricFamily):
    """(1 - w^kappa S) dz^2 + w^2k h(y) dy^2 with constant S.

    ``h`` is either None (flat circle) or a callable returning ``(h(y), h'(y))``.
    """

    k: int
    sf: ScalingFunction
    S: float = 0.0
    h: Optional[Callable[[float], tuple]] = None
    kappa: Optional[int] = None

    def __post_init__(self):
        if self.kappa is None:
            object.__setattr__(self, "kappa", 2 * self.k - 2)
        self.check_kappa()

    def coefficients(self, eps, z, y):
        w, wz, _ = self.sf.jet(eps, z)
        h, hy = (1.0, 0.0) if self.h is None else self.h(y)
        return _ansatz_coefficients(self.k, self.kappa, w, wz, self.S, 0.0, 0.0,
                                    0.0, 0.0, 0.0, h, 0.0, hy)

    def kernel_params(self):
        if self.h is not None or self.sf.kernel_p is None:
            return None
        return np.array([FAM_ANSATZ_B0, 0.0, self.sf.kernel_p, self.k, self.kappa,
                         0.0, self.S, 0.0, 0.0])

    def blowup_data(self, chart, a, c, y):
        h, hy = (1.0, 0.0) if self.h is None else self.h(y)
        return (self.S, 0.0, 0.0, 0.0), (0.0, 0.0, 0.0, 0.0), (h, 0.0, 0.0, hy)

    def profile_W(self, eps, z):
        return self.sf.jet(eps, z)[0] ** self.k

    def S_corner(self, y):
        return self.S

    def dS_corner(self, y):
        return 0.0

    def d2S_corner(self, y):
        return 0.0

    def cross_metric(self, y):
        return 1.0 if self.h is None else self.h(y)[0]


@dataclass(frozen=True)
class MorseModel(MetricFamily):
    """Ansatz with S = k(k-1)(1 - delta^2 sin^2 y), b = 0, h = dy^2."""

    k: int
    delta: float
    sf: ScalingFunction = PowerFamily(2.0)
    kappa: Optional[int] = None

    def __post_init__(self):
        if self.kappa is None:
            object.__setattr__(self, "kappa", 2 * self.k - 2)
        self.check_kappa()

    @property
    def s0(self):
        return self.k * (self.k - 1.0)

    @property
    def s1(self):
        return self.k * (self.k - 1.0) * self.delta**2

    def S_corner(self, y):
        return self.s0 - self.s1 * math.sin(y) ** 2

    def dS_corner(self, y):
        return -self.s1 * math.sin(2.0 * y)

    def d2S_corner(self, y):
        return -2.0 * self.s1 * math.cos(2.0 * y)

    def coefficients(self, eps, z, y):
        w, wz, _ = self.sf.jet(eps, z)
        return _ansatz_coefficients(self.k, self.kappa, w, wz, self.S_corner(y), 0.0,
                                    self.dS_corner(y), 0.0, 0.0, 0.0, 1.0, 0.0, 0.0)

    def kernel_params(self):
        if self.sf.kernel_p is None:
            return None
        return np.array([FAM_ANSATZ_B0, 0.0, self.sf.kernel_p, self.k, self.kappa,
                         0.0, self.s0, self.s1, 0.0])

    def blowup_data(self, chart, a, c, y):
        return ((self.S_corner(y), 0.0, 0.0, self.dS_corner(y)), (0.0, 0.0, 0.0, 0.0),
                (1.0, 0.0, 0.0, 0.0))


@dataclass(frozen=True)
class EllipticSurface(MetricFamily):
    """Surface z -> W(z) * (cos phi, sqrt(1 - delta^2) sin phi) in R^3, W = w^k.

    Coordinates are (z, phi); this is not of ansatz form, the exact induced
    metric is used.
    """

    k: int
    delta: float
    sf: ScalingFunction = PowerFamily(4.0)
    is_ansatz = False

    def __post_init__(self):
        if not 0.0 <= self.delta < 1.0:
            raise ConfigError("delta must lie in [0, 1)")
        object.__setattr__(self, "kappa", 2 * self.k - 2)

    def W_jet(self, eps, z):
        w, wz, wzz = self.sf.jet(eps, z)
        k = self.k
        W = w**k
        Wz = k * w ** (k - 1) * wz
        Wzz = k * (k - 1) * w ** (k - 2) * wz * wz + k * w ** (k - 1) * wzz
        return W, Wz, Wzz

    def coefficients(self, eps, z, y):
        W, Wz, Wzz = self.W_jet(eps, z)
        d2 = self.delta**2
        s, c = math.sin(y), math.cos(y)
        e2 = 1.0 - d2 * c * c
        A = 1.0 + Wz * Wz * (1.0 - d2 * s * s)
        return Coefficients(
            A, 2.0 * Wz * Wzz * (1.0 - d2 * s * s), -2.0 * d2 * Wz * Wz * s * c,
            -d2 * W * Wz * s * c, -d2 * (Wz * Wz + W * Wzz) * s * c,
            -d2 * W * Wz * (c * c - s * s),
            W * W * e2, 2.0 * W * Wz * e2, 2.0 * d2 * W * W * s * c,
        )

    def kernel_params(self):
        if self.sf.kernel_p is None:
            return None
        return np.array([FAM_ELLIPTIC, 0.0, self.sf.kernel_p, self.k, self.kappa,
                         0.0, self.delta, 0.0, 0.0])

    def e2psi(self, y):
        return 1.0 - self.delta**2 * math.cos(y) ** 2

    def cross_metric(self, y):
        return self.e2psi(y)

    def S_corner(self, y):
        return self.k * (self.k - 1.0) * (1.0 - self.delta**2 * math.sin(y) ** 2)

    def dS_corner(self, y):
        return -self.k * (self.k - 1.0) * self.delta**2 * math.sin(2.0 * y)

    def d2S_corner(self, y):
        return -2.0 * self.k * (self.k - 1.0) * self.delta**2 * math.cos(2.0 * y)

    def embedding(self, eps, z, phi):
        W = self.W_jet(eps, z)[0]
        return np.array([z, W * math.cos(phi), math.sqrt(1.0 - self.delta**2) * W * math.sin(phi)])


def ellipse_curve(delta):
    """Curve sampler phi -> (c, c', c'') for the ellipse (cos, sqrt(1-delta^2) sin)."""
    q = math.sqrt(1.0 - delta**2)

    def curve(phi):
        s, c = math.sin(phi), math.cos(phi)
        return (np.array([c, q * s]), np.array([-s, q * c]), np.array([-c, -q * s]))

    return curve


@dataclass(frozen=True)
class AmbientSurface(MetricFamily):
    """Pullback of the Euclidean metric under (z, phi) -> (z, w^k(eps, z) * curve(phi))."""

    k: int
    sf: ScalingFunction
    curve: Callable[[float], tuple]
    is_ansatz = False

    def __post_init__(self):
        object.__setattr__(self, "kappa", 2 * self.k - 2)

    def W_jet(self, eps, z):
        return EllipticSurface.W_jet(self, eps, z)

    def coefficients(self, eps, z, y):
        W, Wz, Wzz = self.W_jet(eps, z)
        c, c1, c2 = self.curve(y)
        cc, cc1, c1c1 = c @ c, c @ c1, c1 @ c1
        return Coefficients(
            1.0 + Wz * Wz * cc, 2.0 * Wz * Wzz * cc, 2.0 * Wz * Wz * cc1,
            W * Wz * cc1, (Wz * Wz + W * Wzz) * cc1, W * Wz * (c1c1 + c @ c2),
            W * W * c1c1, 2.0 * W * Wz * c1c1, 2.0 * W * W * (c1 @ c2),
        )

    def cross_metric(self, y):
        c1 = self.curve(y)[1]
        return float(c1 @ c1)

    def S_corner(self, y):
        c = self.curve(y)[0]
        return self.k * (self.k - 1.0) * float(c @ c)


def ambient_coefficients(surface: MetricFamily, eps, z, y):
    """(A, B, H) of the pullback metric A dz^2 + 2 B dz dphi + H dphi^2."""
    co = surface.coefficients(eps, z, y)
    return co.A, co.B, co.H


def _block(fam, eps, z, y):
    co = fam.coefficients(eps, z, y)
    beta = co.B / co.H
    D = co.A - co.B * beta
    if not (co.H > 0.0 and D > 0.0):
        raise DegenerateMetricError(
            f"metric not positive definite at eps={eps}, z={z}, y={y} (D={D}, H={co.H})"
        )
    return co, beta, D


def metric_tensor(fam: MetricFamily, eps, z, y):
    co, _, _ = _block(fam, eps, z, y)
    return np.array([[co.A, co.B], [co.B, co.H]])


def cometric(fam: MetricFamily, eps, z, y):
    co, beta, D = _block(fam, eps, z, y)
    return np.array([[1.0 / D, -beta / D], [-beta / D, 1.0 / co.H + beta * beta / D]])


def hamiltonian(fam: MetricFamily, eps, state: PhasePoint):
    co, beta, D = _block(fam, eps, state.z, state.y)
    u = state.xi - beta * state.eta
    return 0.5 * (state.eta**2 / co.H + u * u / D)


def unit_speed_state(fam: MetricFamily, eps, z, y, eta, upward=True):
    """Solve 2 Ham = 1 for xi with the requested sign of dz/dt."""
    co, beta, D = _block(fam, eps, z, y)
    rest = 1.0 - eta * eta / co.H
    if rest < 0.0:
        raise NoSolutionError("horizontal momentum exceeds unit energy")
    u = math.sqrt(D * rest)
    return PhasePoint(z, y, beta * eta + (u if upward else -u), eta)


def angular_momentum(fam: MetricFamily, eps, state: PhasePoint):
    """L = |eta|_h, with h the cross-section metric at (eps, z, y)."""
    return abs(state.eta) / math.sqrt(fam.h_factor(eps, state.z, state.y))


def impact_state(fam: MetricFamily, eps, y, phi, upward=True):
    """Unit state on the waist meeting it at angle phi: |eta|_h = eps^k cos phi."""
    L = eps**fam.k * math.cos(phi)
    eta = L * math.sqrt(fam.h_factor(eps, 0.0, y))
    return unit_speed_state(fam, eps, 0.0, y, eta, upward)


def induced_S_frontface(p, k, Z, y):
    """S on the front face for the ambient construction with w = w_p.

    ``y`` is the cross-section point (a vector) or its squared norm.
    """
    y2 = float(np.dot(y, y)) if np.ndim(y) else float(y)
    if Z < 0:
        raise ValueError("Z must be non-negative")
    f = (1.0 + Z**p) ** (1.0 / p)
    return k * y2 * Z ** (p - 2.0) / f ** (2.0 * p - 2.0) * ((k - 1.0) * Z**p + (p - 1.0))
