"""CSV, key/value and SVG outputs.

Numbers are written as their shortest round-trip ``repr`` so that identical
runs produce byte-identical files.  Column order is fixed:

timeseries.csv
    time, linf_1..linf_m, lp_1..lp_m, weighted_mass, min_1..min_m,
    fp_iters, contraction_ratio
snapshot_<t>.csv
    x, u_1..u_m  (boundary nodes included, where u = 0)
convergence.csv
    h, error, slope  (slope repeated on every row)
"""

import math
from pathlib import Path

import numpy as np


def fmt(x):
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def _write_rows(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(v if isinstance(v, str) else fmt(v) for v in row) + "\n")


def timeseries_header(m):
    cols = ["time"]
    cols += [f"linf_{i + 1}" for i in range(m)]
    cols += [f"lp_{i + 1}" for i in range(m)]
    cols += ["weighted_mass"]
    cols += [f"min_{i + 1}" for i in range(m)]
    cols += ["fp_iters", "contraction_ratio"]
    return cols


def write_timeseries(path, report):
    m = report.linf_norms.shape[0]
    wm = report.weighted_mass
    rows = []
    for j, t in enumerate(report.times):
        row = [t, *report.linf_norms[:, j], *report.lp_norms[:, j],
               np.nan if wm is None else wm[j], *report.min_values[:, j],
               str(int(report.fp_iters[j])), report.contraction_ratios[j]]
        rows.append(row)
    _write_rows(path, timeseries_header(m), rows)


def snapshot_name(t):
    return f"snapshot_{t:.6f}.csv"


def write_snapshot(path, mesh, state):
    m = state.U.shape[0]
    full = np.zeros((m, mesh.n + 2))
    full[:, 1:-1] = state.U
    rows = [[x, *full[:, j]] for j, x in enumerate(mesh.all_nodes)]
    _write_rows(path, ["x"] + [f"u_{i + 1}" for i in range(m)], rows)


def write_keyvalue(path, items):
    """One ``key = value`` per line, in the given order."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for key, val in items:
            if isinstance(val, float):
                val = fmt(val)
            fh.write(f"{key} = {val}\n")


def read_keyvalue(path):
    out = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip() and not line.startswith("#"):
            key, _, val = line.partition("=")
            out[key.strip()] = val.strip()
    return out


def write_convergence(path, fit):
    rows = [[h, e, fit.fitted_slope] for h, e in zip(fit.h_values, fit.errors)]
    _write_rows(path, ["h", "error", "slope"], rows)


_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _ticks(lo, hi, count=5):
    return [lo + (hi - lo) * i / (count - 1) for i in range(count)]


def line_plot_svg(series, title="", xlabel="", ylabel="", logx=False, logy=False,
                  width=640, height=400, markers=False):
    """Minimal SVG 1.1 line chart.

    ``series`` is a list of (label, x, y).  Non-finite points and, on log axes,
    non-positive points are dropped.
    """
    ml, mr, mt, mb = 70, 120, 30, 50
    pw, ph = width - ml - mr, height - mt - mb
    tx = np.log10 if logx else (lambda v: v)
    ty = np.log10 if logy else (lambda v: v)

    cleaned = []
    for label, x, y in series:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        ok = np.isfinite(x) & np.isfinite(y)
        if logx:
            ok &= x > 0
        if logy:
            ok &= y > 0
        with np.errstate(divide="ignore", invalid="ignore"):
            cleaned.append((label, tx(x[ok]), ty(y[ok])))
    xs = np.concatenate([c[1] for c in cleaned]) if cleaned else np.array([])
    ys = np.concatenate([c[2] for c in cleaned]) if cleaned else np.array([])
    if xs.size == 0:
        xs, ys = np.array([0.0, 1.0]), np.array([0.0, 1.0])
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    px = lambda v: ml + (v - x0) / (x1 - x0) * pw
    py = lambda v: mt + ph - (v - y0) / (y1 - y0) * ph

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<text x="{ml + pw / 2:.1f}" y="18" text-anchor="middle" font-size="14">{title}</text>',
        f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for v in _ticks(x0, x1):
        lab = f"1e{v:.1f}" if logx else f"{v:.3g}"
        out.append(f'<line x1="{px(v):.2f}" y1="{mt + ph}" x2="{px(v):.2f}" y2="{mt + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{px(v):.2f}" y="{mt + ph + 18}" text-anchor="middle" font-size="11">{lab}</text>')
    for v in _ticks(y0, y1):
        lab = f"1e{v:.1f}" if logy else f"{v:.3g}"
        out.append(f'<line x1="{ml - 5}" y1="{py(v):.2f}" x2="{ml}" y2="{py(v):.2f}" stroke="black"/>')
        out.append(f'<text x="{ml - 8}" y="{py(v) + 4:.2f}" text-anchor="end" font-size="11">{lab}</text>')
    out.append(f'<text x="{ml + pw / 2:.1f}" y="{height - 10}" text-anchor="middle" font-size="12">{xlabel}</text>')
    out.append(f'<text x="15" y="{mt + ph / 2:.1f}" text-anchor="middle" font-size="12" '
               f'transform="rotate(-90 15 {mt + ph / 2:.1f})">{ylabel}</text>')
    for i, (label, x, y) in enumerate(cleaned):
        color = _COLORS[i % len(_COLORS)]
        if x.size:
            pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, y))
            out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
            if markers:
                out.extend(f'<circle cx="{px(a):.2f}" cy="{py(b):.2f}" r="3" fill="{color}"/>'
                           for a, b in zip(x, y))
        ly = mt + 15 + 18 * i
        out.append(f'<line x1="{ml + pw + 10}" y1="{ly}" x2="{ml + pw + 30}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{ml + pw + 35}" y="{ly + 4}" font-size="11">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def norms_svg(report):
    m = report.linf_norms.shape[0]
    series = [(f"Linf u{i + 1}", report.times, report.linf_norms[i]) for i in range(m)]
    series += [(f"L{report.p:g} u{i + 1}", report.times, report.lp_norms[i]) for i in range(m)]
    positive = all(np.all(s[2][np.isfinite(s[2])] > 0) for s in series)
    return line_plot_svg(series, "norms vs time", "t", "norm", logy=positive)


def convergence_svg(fit):
    h, e = fit.h_values, fit.errors
    ref = e[0] * (h / h[0]) ** fit.fitted_slope
    return line_plot_svg([("L2 error", h, e), (f"slope {fit.fitted_slope:.3f}", h, ref)],
                         "manufactured-solution error", "h", "error",
                         logx=True, logy=True, markers=True)
