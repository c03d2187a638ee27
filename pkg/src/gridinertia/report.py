"""CSV and SVG report artifacts.

CSV is the canonical data format; SVG figures are derived views written as
plain text with no plotting dependency.  All float formatting goes through
repr so identical inputs produce identical bytes.
"""

import math

import numpy as np


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path, header, rows):
    """Write rows of cells; floats via repr, None as empty."""
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_cell(v) for v in row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_history_csv(path, history):
    write_csv(path, ("epoch", "train_mse", "val_mse", "lr"), history)


def write_predictions_csv(path, y_true, y_pred):
    rows = [(i, float(t), float(p), abs(float(p) - float(t)))
            for i, (t, p) in enumerate(zip(y_true, y_pred))]
    write_csv(path, ("index", "y_true", "y_pred", "abs_error"), rows)


def write_metrics_csv(path, rows):
    """rows: (label, metrics) pairs."""
    out = [(label, m.n, m.mu, m.acc, m.mse, m.r2) for label, m in rows]
    write_csv(path, ("model", "n", "mu", "acc", "mse", "r2"), out)


def write_selection_csv(path, trace):
    rows = [(r.round, r.candidate, "+".join(f.value for f in r.features),
             r.acc, r.mse, r.r2, r.selected) for r in trace]
    write_csv(path, ("round", "candidate", "features", "acc", "mse", "r2",
                     "selected"), rows)


def write_placement_csv(path, rows):
    """rows: (budget, placement, report) triples."""
    out = [(budget, ";".join(str(b) for b in placement.selected_buses),
            report.score, report.fully_observable)
           for budget, placement, report in rows]
    write_csv(path, ("budget", "selected_buses", "score", "fully_observable"),
              out)


def write_observability_csv(path, report):
    rows = [(bus_idx + 1, flag) for bus_idx, flag in enumerate(report.o)]
    write_csv(path, ("bus", "observed"), rows)


# --------------------------------------------------------------------------
# SVG figures
# --------------------------------------------------------------------------

_W, _H = 640, 420
_ML, _MR, _MT, _MB = 70, 20, 30, 50
_PLOT_W = _W - _ML - _MR
_PLOT_H = _H - _MT - _MB
_FG = "#202020"
_SERIES = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")


def _fmt(value):
    return f"{value:.2f}".rstrip("0").rstrip(".")


def _axis_ticks(lo, hi, n=5):
    if hi <= lo:
        hi = lo + 1.0
    span = hi - lo
    step = 10 ** math.floor(math.log10(span / n))
    for mult in (1, 2, 5, 10):
        if span / (step * mult) <= n:
            step *= mult
            break
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-12 * span:
        ticks.append(round(t, 12))
        t += step
    return ticks or [lo, hi]


class _Canvas:
    """Minimal SVG assembly with a fixed plot area and data transform."""

    def __init__(self, title, x_label, y_label, x_range, y_range):
        self.x_lo, self.x_hi = x_range
        self.y_lo, self.y_hi = y_range
        if self.x_hi <= self.x_lo:
            self.x_hi = self.x_lo + 1.0
        if self.y_hi <= self.y_lo:
            self.y_hi = self.y_lo + 1.0
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" '
            f'height="{_H}" viewBox="0 0 {_W} {_H}">',
            f'<rect width="{_W}" height="{_H}" fill="white"/>',
            f'<text x="{_W / 2:.1f}" y="20" text-anchor="middle" '
            f'font-family="sans-serif" font-size="14" fill="{_FG}">'
            f'{title}</text>',
        ]
        self._frame(x_label, y_label)

    def x_px(self, x):
        frac = (x - self.x_lo) / (self.x_hi - self.x_lo)
        return _ML + frac * _PLOT_W

    def y_px(self, y):
        frac = (y - self.y_lo) / (self.y_hi - self.y_lo)
        return _MT + (1.0 - frac) * _PLOT_H

    def _frame(self, x_label, y_label):
        p = self.parts
        p.append(f'<rect x="{_ML}" y="{_MT}" width="{_PLOT_W}" '
                 f'height="{_PLOT_H}" fill="none" stroke="{_FG}"/>')
        for tick in _axis_ticks(self.x_lo, self.x_hi):
            px = self.x_px(tick)
            p.append(f'<line x1="{px:.1f}" y1="{_MT + _PLOT_H}" x2="{px:.1f}" '
                     f'y2="{_MT + _PLOT_H + 5}" stroke="{_FG}"/>')
            p.append(f'<text x="{px:.1f}" y="{_MT + _PLOT_H + 20}" '
                     f'text-anchor="middle" font-family="sans-serif" '
                     f'font-size="11" fill="{_FG}">{_fmt(tick)}</text>')
        for tick in _axis_ticks(self.y_lo, self.y_hi):
            py = self.y_px(tick)
            p.append(f'<line x1="{_ML - 5}" y1="{py:.1f}" x2="{_ML}" '
                     f'y2="{py:.1f}" stroke="{_FG}"/>')
            p.append(f'<text x="{_ML - 8}" y="{py + 4:.1f}" text-anchor="end" '
                     f'font-family="sans-serif" font-size="11" '
                     f'fill="{_FG}">{_fmt(tick)}</text>')
        p.append(f'<text x="{_ML + _PLOT_W / 2:.1f}" y="{_H - 12}" '
                 f'text-anchor="middle" font-family="sans-serif" '
                 f'font-size="12" fill="{_FG}">{x_label}</text>')
        p.append(f'<text x="18" y="{_MT + _PLOT_H / 2:.1f}" '
                 f'text-anchor="middle" font-family="sans-serif" '
                 f'font-size="12" fill="{_FG}" transform="rotate(-90 18 '
                 f'{_MT + _PLOT_H / 2:.1f})">{y_label}</text>')

    def polyline(self, xs, ys, color, label=None, index=0):
        pts = " ".join(f"{self.x_px(x):.1f},{self.y_px(y):.1f}"
                       for x, y in zip(xs, ys))
        self.parts.append(f'<polyline points="{pts}" fill="none" '
                          f'stroke="{color}" stroke-width="1.5"/>')
        if label:
            y = _MT + 16 + 16 * index
            x = _ML + _PLOT_W - 150
            self.parts.append(f'<line x1="{x}" y1="{y - 4}" x2="{x + 24}" '
                              f'y2="{y - 4}" stroke="{color}" stroke-width="1.5"/>')
            self.parts.append(f'<text x="{x + 30}" y="{y}" '
                              f'font-family="sans-serif" font-size="11" '
                              f'fill="{_FG}">{label}</text>')

    def circles(self, xs, ys, color, r=2.5):
        for x, y in zip(xs, ys):
            self.parts.append(f'<circle cx="{self.x_px(x):.1f}" '
                              f'cy="{self.y_px(y):.1f}" r="{r}" fill="{color}" '
                              f'fill-opacity="0.6"/>')

    def bars(self, edges, counts, color):
        for i, count in enumerate(counts):
            x0 = self.x_px(edges[i])
            x1 = self.x_px(edges[i + 1])
            y0 = self.y_px(count)
            y1 = self.y_px(0.0)
            self.parts.append(f'<rect x="{x0:.1f}" y="{y0:.1f}" '
                              f'width="{x1 - x0:.1f}" '
                              f'height="{y1 - y0:.1f}" fill="{color}" '
                              f'stroke="white" stroke-width="0.5"/>')

    def save(self, path):
        self.parts.append("</svg>")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(self.parts) + "\n")


def write_learning_curve_svg(path, history):
    """Train/validation MSE per epoch."""
    if not history:
        canvas = _Canvas("Learning curve (no epochs)", "epoch", "MSE",
                         (0.0, 1.0), (0.0, 1.0))
        canvas.save(path)
        return
    epochs = [row[0] for row in history]
    train = [row[1] for row in history]
    val = [row[2] for row in history]
    finite = [v for v in train + val if math.isfinite(v)]
    hi = max(finite) if finite else 1.0
    canvas = _Canvas("Learning curve", "epoch", "MSE",
                     (min(epochs), max(epochs)), (0.0, hi * 1.05))
    canvas.polyline(epochs, train, _SERIES[0], "train", 0)
    canvas.polyline(epochs, val, _SERIES[1], "validation", 1)
    canvas.save(path)


def write_scatter_svg(path, y_true, y_pred):
    """Predicted vs. true labels with the identity diagonal."""
    y_true = [float(v) for v in y_true]
    y_pred = [float(v) for v in y_pred]
    lo = min(y_true + y_pred)
    hi = max(y_true + y_pred)
    pad = 0.05 * (hi - lo or 1.0)
    canvas = _Canvas("Predictions", "true inertia (s)",
                     "predicted inertia (s)", (lo - pad, hi + pad),
                     (lo - pad, hi + pad))
    canvas.polyline([lo - pad, hi + pad], [lo - pad, hi + pad], "#999999")
    canvas.circles(y_true, y_pred, _SERIES[0])
    canvas.save(path)


def write_error_hist_svg(path, abs_errors, bins=20):
    """Histogram of absolute prediction errors."""
    errs = np.asarray(list(abs_errors), dtype=np.float64)
    hi = float(errs.max()) if errs.size and errs.max() > 0 else 1.0
    counts, edges = np.histogram(errs, bins=bins, range=(0.0, hi))
    canvas = _Canvas("Absolute error distribution", "absolute error (s)",
                     "count", (0.0, hi), (0.0, float(counts.max() or 1) * 1.1))
    canvas.bars(edges, counts, _SERIES[0])
    canvas.save(path)
