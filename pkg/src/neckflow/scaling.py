"""Scaling functions w(eps, z) and their blow-up profiles.

A scaling function is 1-homogeneous, equals ``eps`` on the waist ``z = 0``
and ``|z|`` at ``eps = 0``.  In the blow-up charts it is written as
``w = eps * f(Z)`` with ``Z = z / eps`` and ``w = z * F(E)`` with ``E = eps / z``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from ._accel import njit
from .errors import DegeneratePointError, UnsupportedFamilyError


@njit
def power_w_jet(p, eps, z):
    """(w, w_z, w_zz) for w = (eps^p + |z|^p)^(1/p)."""
    az = abs(z)
    if az >= eps:
        r = eps / az
        w = az * (1.0 + r**p) ** (1.0 / p)
    else:
        r = az / eps
        w = eps * (1.0 + r**p) ** (1.0 / p)
    q = az / w
    wz = q ** (p - 1.0)
    if z < 0.0:
        wz = -wz
    # (p-1) eps^p |z|^(p-2) / w^(2p-1), arranged to avoid overflow
    e = eps / w
    if p == 2.0:
        wzz = e * e / w
    elif az == 0.0:
        wzz = 0.0
    else:
        wzz = (p - 1.0) * e**p * q ** (p - 2.0) / w
    return w, wz, wzz


@njit
def power_f_jet(p, Z):
    """(f, f') with f(Z) = (1 + |Z|^p)^(1/p)."""
    aZ = abs(Z)
    if aZ > 1.0:
        f = aZ * (1.0 + aZ ** (-p)) ** (1.0 / p)
    else:
        f = (1.0 + aZ**p) ** (1.0 / p)
    df = (aZ / f) ** (p - 1.0)
    if Z < 0.0:
        df = -df
    return f, df


@njit
def power_F_jet(p, E):
    """(F, F') with F(E) = (E^p + 1)^(1/p), E >= 0."""
    F = (1.0 + E**p) ** (1.0 / p)
    dF = (E / F) ** (p - 1.0)
    return F, dF


class ScalingFunction:
    """Interface for 1-homogeneous scaling functions.

    Subclasses provide the jet of ``w`` and of the two profile functions,
    plus the order of the minimum of ``f`` at ``Z = 0``.  ``kernel_p`` is the
    exponent used by the compiled kernels, or ``None`` for custom families
    which then run on the pure-Python path.
    """

    kernel_p: float | None = None

    def jet(self, eps, z):
        raise NotImplementedError

    def f_jet(self, Z):
        raise NotImplementedError

    def F_jet(self, E):
        raise NotImplementedError

    def order_of_minimum(self):
        raise UnsupportedFamilyError(f"{type(self).__name__} has no known expansion order")

    def w(self, eps, z):
        return self.jet(eps, z)[0]


@dataclass(frozen=True)
class PowerFamily(ScalingFunction):
    """w_p(eps, z) = (eps^p + |z|^p)^(1/p) for p >= 2."""

    p: float = 2.0

    def __post_init__(self):
        if not (math.isfinite(self.p) and self.p >= 2.0):
            raise UnsupportedFamilyError(f"power family needs p >= 2, got {self.p}")

    @property
    def kernel_p(self):
        return float(self.p)

    def jet(self, eps, z):
        eps, z = float(eps), float(z)
        if eps < 0.0:
            raise ValueError("eps must be non-negative")
        if eps == 0.0 and z == 0.0:
            raise DegeneratePointError("w is not smooth at eps = z = 0")
        return power_w_jet(float(self.p), eps, z)

    def f_jet(self, Z):
        return power_f_jet(float(self.p), float(Z))

    def F_jet(self, E):
        if E < 0.0:
            raise ValueError("E must be non-negative")
        return power_F_jet(float(self.p), float(E))

    def order_of_minimum(self):
        p = self.p
        if p != int(p) or int(p) % 2:
            raise UnsupportedFamilyError(
                f"f = (1+|Z|^p)^(1/p) has no even-order Taylor minimum for p = {p}"
            )
        return int(p) // 2, 1.0 / p


def scaling_jet(sf: ScalingFunction, eps: float, z: float):
    """Return (w, w_z, w_zz) at (eps, z)."""
    return sf.jet(eps, z)


def profile_jet(sf: ScalingFunction, chart: str, coord: float):
    """Return (f(Z), f'(Z)) for chart ``"Z"`` or (F(E), F'(E)) for chart ``"E"``."""
    if not math.isfinite(coord):
        raise ValueError("coordinate must be finite")
    if chart == "Z":
        return sf.f_jet(coord)
    if chart == "E":
        return sf.F_jet(coord)
    raise ValueError(f"unknown chart {chart!r}")


def order_of_minimum(sf: ScalingFunction):
    """(l, c) with f(Z) = 1 + c Z^(2l) + o(Z^(2l))."""
    return sf.order_of_minimum()
