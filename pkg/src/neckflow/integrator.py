"""Dormand-Prince 5(4) integrator with dense output, PI step control and events.

The stepping loop is a single function that runs either compiled (when the
right-hand side is a compiled kernel) or as plain Python with a Python
right-hand side.  Events are sign changes of the components of an event
function ``g(t, x, params, evparams)``, located by bisection on the dense
output.  A NaN component never fires, which is how unused events are
switched off.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._accel import is_jitted, njit, py_func
from .errors import CapExceededError, DegenerateMetricError, StepFailureError

STATUS_END, STATUS_EVENT, STATUS_MAXSTEPS, STATUS_FAIL, STATUS_DOMAIN = 0, 1, 2, 3, 4
MAX_EVENTS = 512

# Butcher tableau
C2, C3, C4, C5 = 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9
A21 = 1.0 / 5
A31, A32 = 3.0 / 40, 9.0 / 40
A41, A42, A43 = 44.0 / 45, -56.0 / 15, 32.0 / 9
A51, A52, A53, A54 = 19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729
A61, A62, A63, A64, A65 = 9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656
A71, A73, A74, A75, A76 = 35.0 / 384, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84
E1, E3, E4, E5, E6, E7 = (71.0 / 57600, -71.0 / 16695, 71.0 / 1920, -17253.0 / 339200,
                          22.0 / 525, -1.0 / 40)
D1, D3, D4, D5, D6, D7 = (-12715105075.0 / 11282082432, 87487479700.0 / 32700410799,
                          -10690763975.0 / 1880347072, 701980252875.0 / 199316789632,
                          -1453857185.0 / 822651844, 69997945.0 / 29380423)


@njit
def _interp(cont, s):
    return cont[0] + s * (cont[1] + (1.0 - s) * (cont[2] + s * (cont[3] + (1.0 - s) * cont[4])))


@njit
def _err_norm(err, x0, x1, rtol, atol):
    acc = 0.0
    n = err.shape[0]
    for i in range(n):
        sc = atol + rtol * max(abs(x0[i]), abs(x1[i]))
        acc += (err[i] / sc) ** 2
    return np.sqrt(acc / n)


@njit
def _grow2(a, n):
    b = np.empty((n, a.shape[1]))
    b[: a.shape[0]] = a
    return b


@njit
def _grow3(a, n):
    b = np.empty((n, a.shape[1], a.shape[2]))
    b[: a.shape[0]] = a
    return b


@njit
def _grow1(a, n):
    b = np.empty(n)
    b[: a.shape[0]] = a
    return b


# not cached on disk: the loop is specialised on the jitted callables passed in,
# and numba cannot reliably pickle those signatures
@njit(cache=False)
def dopri_loop(fun, evfun, t0, x0, params, evparams, t_end, rtol, atol, h_init, h_max,
               max_steps, ev_dir, ev_term):
    n = x0.shape[0]
    nev = ev_dir.shape[0]
    cap = 256
    ts = np.empty(cap)
    xs = np.empty((cap, n))
    cont = np.empty((cap, 5, n))
    ts[0] = t0
    xs[0] = x0
    nacc = 0
    ev_code = np.zeros(MAX_EVENTS, dtype=np.int64)
    ev_t = np.zeros(MAX_EVENTS)
    ev_x = np.zeros((MAX_EVENTS, n))
    nrec = 0
    status = STATUS_END

    t = t0
    x = x0.copy()
    t_stop = t0
    xstop = x0.copy()
    k1 = fun(t, x, params)
    nfev = 1
    direction = 1.0 if t_end >= t0 else -1.0
    span = abs(t_end - t0)

    if h_init > 0.0:
        h = h_init
    else:
        d0 = _err_norm(x, x, x * 0.0, rtol, atol)
        d1 = _err_norm(k1, x, x * 0.0, rtol, atol)
        if d0 < 1e-5 or d1 < 1e-5:
            h0 = 1e-6
        else:
            h0 = 0.01 * d0 / d1
        h0 = min(h0, span)
        # second estimate from an explicit Euler step (Hairer's starting-step rule)
        f1 = fun(t + direction * h0, x + direction * h0 * k1, params)
        nfev += 1
        d2 = _err_norm(f1 - k1, x, x * 0.0, rtol, atol) / h0
        dm = max(d1, d2)
        if not np.isfinite(dm):
            h = h0
        elif dm <= 1e-15:
            h = max(1e-6, h0 * 1e-3)
        else:
            h = (0.01 / dm) ** 0.2
        h = min(100.0 * h0, h, span)
    h = min(h, h_max)

    gold = evfun(t, x, params, evparams)

    facold = 1e-4
    beta = 0.04
    expo1 = 0.2 - beta * 0.75
    safe = 0.9
    reject = False
    nonfinite = False
    steps = 0
    while True:
        if steps >= max_steps:
            status = STATUS_MAXSTEPS
            break
        remaining = abs(t_end - t)
        if remaining <= 1e-14 * max(1.0, abs(t)):
            status = STATUS_END
            break
        if h > remaining:
            h = remaining
        if h < 1e-14 * max(1.0, abs(t)):
            status = STATUS_DOMAIN if nonfinite else STATUS_FAIL
            break
        hs = direction * h
        k2 = fun(t + C2 * hs, x + hs * (A21 * k1), params)
        k3 = fun(t + C3 * hs, x + hs * (A31 * k1 + A32 * k2), params)
        k4 = fun(t + C4 * hs, x + hs * (A41 * k1 + A42 * k2 + A43 * k3), params)
        k5 = fun(t + C5 * hs, x + hs * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4), params)
        xs6 = x + hs * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5)
        k6 = fun(t + hs, xs6, params)
        xnew = x + hs * (A71 * k1 + A73 * k3 + A74 * k4 + A75 * k5 + A76 * k6)
        k7 = fun(t + hs, xnew, params)
        nfev += 6
        steps += 1
        err = hs * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)
        en = _err_norm(err, x, xnew, rtol, atol)
        if not np.isfinite(en):
            h *= 0.25
            reject = True
            nonfinite = True
            continue
        nonfinite = False
        fac11 = max(en, 1e-300) ** expo1
        fac = fac11 / facold**beta
        fac = max(0.1, min(5.0, fac / safe))
        if en > 1.0:
            h = h / min(5.0, fac11 / safe)
            reject = True
            continue
        # accepted
        facold = max(en, 1e-4)
        r0 = x
        r1 = xnew - x
        r2 = hs * k1 - r1
        r3 = r1 - hs * k7 - r2
        r4 = hs * (D1 * k1 + D3 * k3 + D4 * k4 + D5 * k5 + D6 * k6 + D7 * k7)
        tnew = t + hs

        # events
        t_stop = tnew
        stop_here = False
        xstop = xnew
        if nev > 0:
            roots = np.full(nev, np.inf)
            gnew = evfun(tnew, xnew, params, evparams)
            for i in range(nev):
                a = gold[i]
                b = gnew[i]
                hit = (a < 0.0 and b >= 0.0 and ev_dir[i] >= 0) or (a > 0.0 and b <= 0.0 and ev_dir[i] <= 0)
                if hit:
                    lo = 0.0
                    hi = 1.0
                    for _ in range(200):
                        if (hi - lo) * h <= 1e-14 * max(1.0, abs(t)):
                            break
                        mid = 0.5 * (lo + hi)
                        xm = np.empty(n)
                        for j in range(n):
                            xm[j] = r0[j] + mid * (r1[j] + (1.0 - mid) * (r2[j] + mid * (r3[j] + (1.0 - mid) * r4[j])))
                        gm = evfun(t + mid * hs, xm, params, evparams)[i]
                        if (gm < 0.0) == (a < 0.0) and gm != 0.0:
                            lo = mid
                        else:
                            hi = mid
                    roots[i] = hi
            order = np.argsort(roots)
            for jj in range(nev):
                i = order[jj]
                if not np.isfinite(roots[i]):
                    break
                s = roots[i]
                xe = np.empty(n)
                for j in range(n):
                    xe[j] = r0[j] + s * (r1[j] + (1.0 - s) * (r2[j] + s * (r3[j] + (1.0 - s) * r4[j])))
                if nrec < MAX_EVENTS:
                    ev_code[nrec] = i
                    ev_t[nrec] = t + s * hs
                    ev_x[nrec] = xe
                    nrec += 1
                if ev_term[i]:
                    stop_here = True
                    t_stop = t + s * hs
                    xstop = xe
                    break
            gold = gnew

        if nacc + 1 >= cap:
            cap *= 2
            ts = _grow1(ts, cap)
            xs = _grow2(xs, cap)
            cont = _grow3(cont, cap)
        cont[nacc, 0] = r0
        cont[nacc, 1] = r1
        cont[nacc, 2] = r2
        cont[nacc, 3] = r3
        cont[nacc, 4] = r4
        nacc += 1
        ts[nacc] = tnew
        xs[nacc] = xnew
        if stop_here:
            status = STATUS_EVENT
            break
        t = tnew
        x = xnew
        k1 = k7
        hn = h / fac
        if reject:
            hn = min(hn, h)
        reject = False
        h = min(hn, h_max)
    return (ts[: nacc + 1], xs[: nacc + 1], cont[:nacc], status,
            ev_code[:nrec], ev_t[:nrec], ev_x[:nrec], nfev, t_stop, xstop)


@dataclass(frozen=True)
class Event:
    name: str
    direction: int = 0
    terminal: bool = True


@njit
def no_events(t, x, params, evparams):
    return np.empty(0)


@dataclass
class Solution:
    """Output of :func:`solve`.  ``cont`` holds per-step dense-output coefficients.

    When the last step ended on a terminal event, ``ts[-1]`` is the event time
    while the last dense segment still spans the full step; :meth:`__call__`
    accounts for this through ``step_t``.
    """

    ts: np.ndarray
    xs: np.ndarray
    cont: np.ndarray
    step_t: np.ndarray
    status: int
    events: list
    nfev: int

    def __call__(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if self.cont.shape[0] == 0:
            return np.repeat(self.xs[:1], t.size, axis=0)
        t0, t1 = self.step_t[0], self.step_t[-1]
        sgn = 1.0 if t1 >= t0 else -1.0
        idx = np.searchsorted(sgn * self.step_t, sgn * t, side="right") - 1
        idx = np.clip(idx, 0, self.cont.shape[0] - 1)
        h = self.step_t[idx + 1] - self.step_t[idx]
        s = (t - self.step_t[idx]) / h
        c = self.cont[idx]
        s = s[:, None]
        return c[:, 0] + s * (c[:, 1] + (1 - s) * (c[:, 2] + s * (c[:, 3] + (1 - s) * c[:, 4])))

    @property
    def t_final(self):
        return float(self.ts[-1])

    @property
    def x_final(self):
        return self.xs[-1].copy()


def solve(fun, t0, x0, params, t_end, rtol=1e-10, atol=1e-10, events=(), evfun=None,
          evparams=(), max_steps=200_000, h_init=0.0, h_max=np.inf, raise_on_cap=False):
    """Integrate ``x' = fun(t, x, params)`` from ``t0`` towards ``t_end``.

    ``events`` describes the components of ``evfun`` in order.
    """
    x0 = np.asarray(x0, dtype=float)
    params = np.asarray(params, dtype=float)
    evparams = np.asarray(evparams, dtype=float)
    if evfun is None:
        evfun = no_events
        events = ()
    dirs = np.array([e.direction for e in events], dtype=np.int64)
    terms = np.array([e.terminal for e in events], dtype=np.bool_)
    if is_jitted(fun) and is_jitted(evfun):
        loop = dopri_loop
    else:
        loop, fun, evfun = py_func(dopri_loop), py_func(fun), py_func(evfun)
    step_t, xs, cont, status, codes, ets, exs, nfev, t_stop, x_stop = loop(
        fun, evfun, float(t0), x0, params, evparams, float(t_end), float(rtol), float(atol),
        float(h_init), float(h_max), int(max_steps), dirs, terms)
    ts = step_t.copy()
    xs = xs.copy()
    if status == STATUS_EVENT:
        ts[-1] = t_stop
        xs[-1] = x_stop
    evs = [(events[int(c)].name, float(tt), xx.copy()) for c, tt, xx in zip(codes, ets, exs)]
    sol = Solution(ts, xs, cont, step_t, int(status), evs, int(nfev))
    if status == STATUS_DOMAIN:
        raise DegenerateMetricError(
            f"right-hand side undefined beyond t={ts[-1]:.17g}, state {xs[-1]} (metric degenerates)")
    if status == STATUS_FAIL:
        raise StepFailureError(f"step size underflow at t={ts[-1]:.17g}")
    if status == STATUS_MAXSTEPS and raise_on_cap:
        raise CapExceededError(f"step cap {max_steps} reached at t={ts[-1]:.17g}")
    return sol
