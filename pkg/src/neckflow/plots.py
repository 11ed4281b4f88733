"""Small deterministic SVG writer for report figures.

Coordinates are rounded to 1e-3 user units and elements are emitted in call
order, so identical inputs give identical bytes.
"""
from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

W, H = 640.0, 420.0
ML, MR, MT, MB = 70.0, 20.0, 40.0, 50.0
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")


STYLES = ("color", "mono")
MONO = {c: g for c, g in zip(COLORS, ("#000000", "#555555", "#888888", "#333333", "#aaaaaa",
                                      "#666666", "#222222"))}


def _num(x):
    return float("nan") if x is None else float(x)


def _f(x):
    s = f"{round(float(x), 3):.3f}"
    return "0.000" if s == "-0.000" else s


class Figure:
    def __init__(self, title, xlabel, ylabel, xlim, ylim, logx=False, logy=False):
        self.logx, self.logy = logx, logy
        self.x0, self.x1 = self._tx(xlim[0]), self._tx(xlim[1])
        self.y0, self.y1 = self._ty(ylim[0]), self._ty(ylim[1])
        if self.x1 == self.x0:
            self.x1 = self.x0 + 1.0
        if self.y1 == self.y0:
            self.y1 = self.y0 + 1.0
        self.items = []
        self._frame(title, xlabel, ylabel, xlim, ylim)

    def _tx(self, x):
        return math.log10(x) if self.logx else float(x)

    def _ty(self, y):
        return math.log10(y) if self.logy else float(y)

    def px(self, x):
        return ML + (self._tx(x) - self.x0) / (self.x1 - self.x0) * (W - ML - MR)

    def py(self, y):
        return H - MB - (self._ty(y) - self.y0) / (self.y1 - self.y0) * (H - MT - MB)

    def _frame(self, title, xlabel, ylabel, xlim, ylim):
        self.items.append(f'<rect x="{_f(ML)}" y="{_f(MT)}" width="{_f(W - ML - MR)}" '
                          f'height="{_f(H - MT - MB)}" fill="none" stroke="#000"/>')
        self.text(W / 2, 24, title, size=15, raw=True)
        self.text(W / 2, H - 12, xlabel, raw=True)
        self.items.append(f'<text x="16" y="{_f(H / 2)}" font-size="13" text-anchor="middle" '
                          f'transform="rotate(-90 16 {_f(H / 2)})">{escape(ylabel)}</text>')
        for v, lab in self._ticks(xlim, self.logx):
            x = self.px(v)
            self.items.append(f'<line x1="{_f(x)}" y1="{_f(H - MB)}" x2="{_f(x)}" y2="{_f(H - MB + 5)}" stroke="#000"/>')
            self.text(x, H - MB + 18, lab, size=11, raw=True)
        for v, lab in self._ticks(ylim, self.logy):
            y = self.py(v)
            self.items.append(f'<line x1="{_f(ML - 5)}" y1="{_f(y)}" x2="{_f(ML)}" y2="{_f(y)}" stroke="#000"/>')
            self.items.append(f'<text x="{_f(ML - 8)}" y="{_f(y + 4)}" font-size="11" '
                              f'text-anchor="end">{escape(lab)}</text>')

    @staticmethod
    def _ticks(lim, log):
        lo, hi = min(lim), max(lim)
        if log:
            a, b = math.floor(math.log10(lo)), math.ceil(math.log10(hi))
            return [(10.0**e, f"1e{e}") for e in range(a, b + 1) if lo <= 10.0**e <= hi * (1 + 1e-12)]
        vals = np.linspace(lo, hi, 5)
        return [(float(v), f"{v:.3g}") for v in vals]

    def line(self, xs, ys, color=COLORS[0], width=1.5, dash=None):
        xy = [(_num(x), _num(y)) for x, y in zip(xs, ys)]
        pts = " ".join(f"{_f(self.px(x))},{_f(self.py(y))}" for x, y in xy
                       if np.isfinite(x) and np.isfinite(y))
        d = f' stroke-dasharray="{dash}"' if dash else ""
        self.items.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                          f'stroke-width="{width}"{d}/>')

    def points(self, xs, ys, color=COLORS[0], r=3.0):
        for x, y in zip(xs, ys):
            x, y = _num(x), _num(y)
            if np.isfinite(x) and np.isfinite(y):
                self.items.append(f'<circle cx="{_f(self.px(x))}" cy="{_f(self.py(y))}" r="{_f(r)}" '
                                  f'fill="{color}"/>')

    def vline(self, x, color="#d62728", dash="6,4"):
        px = self.px(x)
        self.items.append(f'<line x1="{_f(px)}" y1="{_f(MT)}" x2="{_f(px)}" y2="{_f(H - MB)}" '
                          f'stroke="{color}" stroke-dasharray="{dash}"/>')

    def text(self, x, y, s, size=12, raw=False, anchor="middle"):
        if not raw:
            x, y = self.px(x), self.py(y)
        self.items.append(f'<text x="{_f(x)}" y="{_f(y)}" font-size="{size}" '
                          f'text-anchor="{anchor}">{escape(s)}</text>')

    def legend(self, entries):
        for i, (lab, color) in enumerate(entries):
            y = MT + 16 + 16 * i
            self.items.append(f'<rect x="{_f(W - MR - 150)}" y="{_f(y - 9)}" width="10" height="10" fill="{color}"/>')
            self.items.append(f'<text x="{_f(W - MR - 135)}" y="{_f(y)}" font-size="11">{escape(lab)}</text>')

    def svg(self, style="color"):
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{int(W)}" height="{int(H)}" '
                f'viewBox="0 0 {int(W)} {int(H)}" font-family="sans-serif">')
        body = "\n".join(self.items)
        if style == "mono":
            for c, g in MONO.items():
                body = body.replace(c, g)
        return f'{head}\n<rect width="100%" height="100%" fill="#fff"/>\n{body}\n</svg>\n'

    def save(self, path, style="color"):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.svg(style))


def _lim(vals, log=False, pad=0.05):
    vals = [_num(x) for x in vals]
    v = np.asarray([x for x in vals if np.isfinite(x) and (x > 0 or not log)], float)
    if v.size == 0:
        return (1.0, 10.0) if log else (0.0, 1.0)
    lo, hi = float(v.min()), float(v.max())
    if log:
        return lo / 1.5, hi * 1.5
    if hi == lo:
        return lo - 1.0, hi + 1.0
    d = (hi - lo) * pad
    return lo - d, hi + d


# ---------------------------------------------------------------------------
# report figures


def winding_angl(summary):
    """Measured and predicted angular length against eps (log-log)."""
    rows = summary["rows"]
    eps = [r["epsilon"] for r in rows]
    vals = [r["angl_measured"] for r in rows] + [r["angl_predicted"] for r in rows]
    fig = Figure("angular length through the waist", "epsilon", "angular length",
                 _lim(eps, True), _lim(vals, True), logx=True, logy=True)
    for i, phi in enumerate(sorted({r["phi"] for r in rows})):
        sel = sorted((r for r in rows if r["phi"] == phi), key=lambda r: r["epsilon"])
        c = COLORS[i % len(COLORS)]
        fig.line([r["epsilon"] for r in sel], [r["angl_predicted"] for r in sel], c, dash="5,3")
        fig.points([r["epsilon"] for r in sel], [r["angl_measured"] for r in sel], c)
    fig.legend([("measured (dots)", COLORS[0]), ("C_phi cos(phi)/eps^(k-1)", COLORS[0])])
    return fig


def winding_remainder(summary):
    """log-log remainder magnitude against eps with the fitted slope."""
    pts = []
    for phi, fit in sorted(summary["fits"].items()):
        pts += [(e, r) for e, r in zip(fit["eps"], fit["remainder_max"]) if r > 0]
    fig = Figure("winding remainder |R|", "epsilon", "|R|", _lim([p[0] for p in pts], True),
                 _lim([p[1] for p in pts], True), logx=True, logy=True)
    for i, (phi, fit) in enumerate(sorted(summary["fits"].items())):
        c = COLORS[i % len(COLORS)]
        e = [x for x, r in zip(fit["eps"], fit["remainder_max"]) if r > 0]
        r = [x for x in fit["remainder_max"] if x > 0]
        fig.points(e, r, c)
        if "remainder_exponent" in fit and len(e) >= 2:
            a, b = fit["remainder_exponent"], fit["remainder_intercept"]
            fig.line([min(e), max(e)], [math.exp(b) * min(e) ** a, math.exp(b) * max(e) ** a], c)
            fig.text(ML + 10, MT + 18 + 16 * i, f"phi={float(phi):.4f}: slope {a:.3f}", size=11,
                     raw=True, anchor="start")
    return fig


def focussing_scatter(summary):
    """Endpoints (y, theta) at z1 on the unrolled cross-section, critical points dashed red."""
    rows = [r for r in summary["rows"]
            if r["y_end"] is not None and np.isfinite(r["y_end"]) and r["theta_end"] is not None]
    th = [r["theta_end"] for r in rows]
    fig = Figure(f"endpoints at z1 = {summary['config']['z1']}", "y", "theta",
                 (0.0, 2 * math.pi), _lim(th + [0.0]))
    for cp in summary["critical_points"]:
        fig.vline(cp["y_c"])
    eps_list = summary["config"]["eps"]
    for i, eps in enumerate(eps_list):
        sel = [r for r in rows if r["epsilon"] == eps]
        fig.points([r["y_end"] for r in sel], [r["theta_end"] for r in sel], COLORS[i % len(COLORS)])
    fig.legend([(f"eps={e}", COLORS[i % len(COLORS)]) for i, e in enumerate(eps_list)])
    return fig


def focussing_distance(summary):
    """Mean distance to the reference geodesics against eps with the fitted power law."""
    md = summary["mean_distance"]
    if not md:
        return None
    e = [float(k) for k in md]
    d = [md[k] for k in md]
    fig = Figure("distance to gamma_min at z1", "epsilon", "geometric mean distance",
                 _lim(e, True), _lim(d, True), logx=True, logy=True)
    fig.points(e, d)
    if summary.get("rho") is not None:
        a, b = summary["rho"], summary["rho_intercept"]
        fig.line([min(e), max(e)], [math.exp(b) * min(e) ** a, math.exp(b) * max(e) ** a],
                 COLORS[1])
        fig.text(ML + 10, MT + 18, f"rho = {a:.3f}, R^2 = {summary['r2']:.4f}", raw=True,
                 anchor="start")
    return fig


def trichotomy_portrait(summary):
    """Energy curves zdot^2 + L^2 / W(z)^2 = 1 for each L."""
    cfg = summary["config"]
    eps = cfg["eps"][0]
    k = cfg["metric"]["k"]
    p = cfg["metric"].get("p", 4.0)
    z = np.linspace(-1.0, 1.0, 801)
    Wz = (np.abs(z) ** p + eps**p) ** (k / p)
    fig = Figure("phase portrait", "z", "zdot", (-1.0, 1.0), (-1.05, 1.05))
    styles = {"Pass": (COLORS[2], "6,4"), "Asymptotic": (COLORS[0], None),
              "TurnBack": (COLORS[1], "2,3")}
    for row in summary["rows"]:
        L = row["L"]
        q = 1.0 - (L / Wz) ** 2
        c, dash = styles.get(row["classification"], (COLORS[3], None))
        for sgn in (1.0, -1.0):
            seg = np.where(q >= 0, sgn * np.sqrt(np.clip(q, 0, None)), np.nan)
            # split at gaps so the polyline does not bridge forbidden bands
            idx = np.where(np.isfinite(seg))[0]
            if idx.size == 0:
                continue
            breaks = np.where(np.diff(idx) > 1)[0]
            for part in np.split(idx, breaks + 1):
                fig.line(z[part], seg[part], c, dash=dash)
    fig.legend([(f"L={r['L']} ({r['classification']})",
                 styles.get(r["classification"], (COLORS[3], None))[0]) for r in summary["rows"]])
    return fig


def frontface_deviation(summary):
    e = summary["eps"]
    d = summary["deviation"]
    fig = Figure("rescaled flow vs front face", "epsilon", "sup deviation",
                 _lim(e, True), _lim(d, True), logx=True, logy=True)
    fig.points(e, d)
    fig.line(e, d, dash="4,3")
    return fig


def eigen_plot(summary):
    pts = summary["rows"]
    re = [r["numeric_re"] for r in pts] + [r["predicted_re"] for r in pts]
    im = [r["numeric_im"] for r in pts] + [r["predicted_im"] for r in pts]
    fig = Figure("linearization eigenvalues", "Re mu", "Im mu", _lim(re), _lim(im + [0.0]))
    fig.points([r["predicted_re"] for r in pts], [r["predicted_im"] for r in pts], COLORS[1], r=5)
    fig.points([r["numeric_re"] for r in pts], [r["numeric_im"] for r in pts], COLORS[0], r=2.5)
    fig.legend([("closed form", COLORS[1]), ("Jacobian", COLORS[0])])
    return fig


def oracle_plot(summary):
    tr = summary["trace"]
    fig = Figure("elliptic geodesic: phi against z", "z", "phi", _lim(tr["z"]), _lim(tr["phi"]))
    fig.line(tr["z"], tr["phi"])
    fig.points([summary["oracle"][0]], [summary["oracle"][1]], COLORS[1], r=4)
    return fig


FIGURES = {
    "winding": {"angl_vs_eps": winding_angl, "remainder": winding_remainder},
    "focussing": {"endpoints": focussing_scatter, "distance": focussing_distance},
    "trichotomy": {"phase_portrait": trichotomy_portrait},
    "frontface_limit": {"deviation": frontface_deviation},
    "eigencheck": {"eigenvalues": eigen_plot},
    "oracle_check": {"trace": oracle_plot},
}
