"""Compiled right-hand sides for the built-in circle families.

State layout ``x = [z, y, xi, m, t, A]`` where ``m`` is ``eta`` in physical
time (mode 0) or the rescaled momentum ``theta = eta / w^(2k-1)`` in the
slowed time ``tau`` with ``dt/dtau = w`` (mode 1).  ``t`` and the angular
length ``A`` ride along as quadrature components.

Parameter layout ``[family, mode, p, k, kappa, eps, c0, c1, c2]``.
"""
import math

import numpy as np

from ._accel import njit
from .scaling import power_w_jet, power_f_jet, power_F_jet

P_FAM, P_MODE, P_P, P_K, P_KAPPA, P_EPS, P_C0, P_C1, P_C2 = range(9)
NSTATE = 6


@njit
def coefficients(params, z, y):
    """(w, w_z, A, A_z, A_y, B, B_z, B_y, H, H_z, H_y) for a compiled family."""
    fam = int(params[P_FAM])
    p = params[P_P]
    k = params[P_K]
    eps = params[P_EPS]
    w, wz, wzz = power_w_jet(p, eps, z)
    if fam == 0:
        kap = params[P_KAPPA]
        s2 = math.sin(y) ** 2
        S = params[P_C0] - params[P_C1] * s2
        Sy = -params[P_C1] * math.sin(2.0 * y)
        wk = w**kap
        A = 1.0 - wk * S
        A_z = -kap * w ** (kap - 1.0) * wz * S
        A_y = -wk * Sy
        w2k = w ** (2.0 * k)
        H = w2k
        H_z = 2.0 * k * w ** (2.0 * k - 1.0) * wz
        return w, wz, A, A_z, A_y, 0.0, 0.0, 0.0, H, H_z, 0.0
    # elliptic surface
    d2 = params[P_C0] ** 2
    W = w**k
    Wz = k * w ** (k - 1.0) * wz
    Wzz = k * (k - 1.0) * w ** (k - 2.0) * wz * wz + k * w ** (k - 1.0) * wzz
    s = math.sin(y)
    c = math.cos(y)
    e2 = 1.0 - d2 * c * c
    A = 1.0 + Wz * Wz * (1.0 - d2 * s * s)
    A_z = 2.0 * Wz * Wzz * (1.0 - d2 * s * s)
    A_y = -2.0 * d2 * Wz * Wz * s * c
    B = -d2 * W * Wz * s * c
    B_z = -d2 * (Wz * Wz + W * Wzz) * s * c
    B_y = -d2 * W * Wz * (c * c - s * s)
    H = W * W * e2
    H_z = 2.0 * W * Wz * e2
    H_y = 2.0 * d2 * W * W * s * c
    return w, wz, A, A_z, A_y, B, B_z, B_y, H, H_z, H_y


@njit
def assemble(mode, k, w, wz, xi, m, A, A_z, A_y, B, B_z, B_y, H, H_z, H_y, out):
    """Hamilton's equations for 2 Ham = eta^2/H + (xi - beta eta)^2 / D."""
    if mode == 0:
        eta = m
    else:
        eta = w ** (2.0 * k - 1.0) * m
    beta = B / H
    D = A - B * beta
    u = (xi - beta * eta) / D
    dHeta = eta / H - beta * u
    beta_z = B_z / H - B * H_z / (H * H)
    beta_y = B_y / H - B * H_y / (H * H)
    D_z = A_z - B_z * beta - B * beta_z
    D_y = A_y - B_y * beta - B * beta_y
    dHz = -0.5 * eta * eta * H_z / (H * H) - u * beta_z * eta - 0.5 * u * u * D_z
    dHy = -0.5 * eta * eta * H_y / (H * H) - u * beta_y * eta - 0.5 * u * u * D_y
    speed = abs(dHeta) * math.sqrt(H) / w**k
    if mode == 0:
        out[0] = u
        out[1] = dHeta
        out[2] = -dHz
        out[3] = -dHy
        out[4] = 1.0
        out[5] = speed
    else:
        zp = w * u
        out[0] = zp
        out[1] = w * dHeta
        out[2] = -w * dHz
        out[3] = -w * dHy / w ** (2.0 * k - 1.0) - (2.0 * k - 1.0) * (wz * zp / w) * m
        out[4] = w
        out[5] = w * speed
    return D


@njit
def rhs(t, x, params):
    out = np.empty(x.shape[0])
    w, wz, A, A_z, A_y, B, B_z, B_y, H, H_z, H_y = coefficients(params, x[0], x[1])
    D = assemble(params[P_MODE], params[P_K], w, wz, x[2], x[3],
                 A, A_z, A_y, B, B_z, B_y, H, H_z, H_y, out)
    if not (D > 0.0 and H > 0.0):
        out[:] = np.nan
    return out


@njit
def energy(x, params):
    """2 Ham at a state in either mode."""
    w, wz, A, A_z, A_y, B, B_z, B_y, H, H_z, H_y = coefficients(params, x[0], x[1])
    k = params[P_K]
    eta = x[3] if params[P_MODE] == 0 else w ** (2.0 * k - 1.0) * x[3]
    beta = B / H
    D = A - B * beta
    u = x[2] - beta * eta
    return eta * eta / H + u * u / D


# ---------------------------------------------------------------------------
# front face with S(y) = c0 - c1 sin^2 y on a flat circle
# state [coord, y, theta]; params [chart(0=Z, 1=E, 2=Eminus), p, k, c0, c1]


@njit
def front_face_rhs(t, x, params):
    out = np.empty(3)
    p = params[1]
    k = params[2]
    Sy = -params[4] * math.sin(2.0 * x[1])
    if params[0] == 0.0:
        f, df = power_f_jet(p, x[0])
        out[0] = f
        g = df
    else:
        # even extension past E = 0 so trial stages may overshoot
        F, dF = power_F_jet(p, abs(x[0]))
        if x[0] < 0.0:
            dF = -dF
        g = F - x[0] * dF
        if params[0] == 1.0:
            out[0] = -x[0] * F
        else:
            out[0] = x[0] * F
            g = -g
    out[1] = x[2]
    out[2] = -(2.0 * k - 1.0) * g * x[2] - 0.5 * Sy
    return out


@njit
def wrap_dist(y, yc):
    d = (y - yc) % (2.0 * math.pi)
    if d > math.pi:
        d = 2.0 * math.pi - d
    return d


@njit
def front_face_events(t, x, params, evp):
    """[chart exit, convergence]; evp = [tol_conv, y_c ...]."""
    g = np.empty(2)
    chart = params[0]
    if chart == 0.0:
        g[0] = abs(x[0]) - 12.0
        g[1] = np.nan
    else:
        g[0] = x[0] - 0.125
        dist = np.inf
        for i in range(1, evp.shape[0]):
            dist = min(dist, wrap_dist(x[1], evp[i]))
        if evp.shape[0] == 1:
            dist = 0.0
        g[1] = abs(x[2]) + abs(x[0]) + dist - evp[0]
    return g
