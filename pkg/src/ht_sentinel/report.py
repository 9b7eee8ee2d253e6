"""Trajectory tables, grouped statistics and SVG plots.

Floats are written with ``repr`` (shortest round-trip form), so reading a
CSV back reproduces every value exactly. Files always use LF line endings
and never depend on the locale.
"""

import csv
import io
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from .calibration import SCHEMA
from .criterion import EpochRecord, Trajectory
from .errors import FormatError, InvalidConfigError, InvalidInputError

TRAJECTORY_COLUMNS = (
    "epoch",
    "alpha",
    "x_min",
    "n_tail",
    "d_tilde",
    "d_star",
    "indicator",
    "r_exp",
    "p_value",
    "heavy_tailed",
    "phase",
)
PLOT_KINDS = ("trajectory", "histogram", "esd_loglog")


def _cell(value):
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def trajectory_csv(trajectory, segmentation=None):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRAJECTORY_COLUMNS)
    for r in trajectory.records:
        phase = segmentation.phase_of(r.epoch) if segmentation is not None else ""
        row = [getattr(r, name) for name in TRAJECTORY_COLUMNS[:-1]]
        writer.writerow([_cell(v) for v in row] + [phase])
    return buf.getvalue()


def trajectory_summary(trajectory, segmentation=None, decision=None, failures=()):
    doc = {"schema": SCHEMA, "model_label": trajectory.model_label, "n_records": len(trajectory)}
    if segmentation is not None:
        doc["phase_rules"] = asdict(segmentation.rules)
        doc["segmentation"] = {"phase1_end": segmentation.phase1_end, "phase2_end": segmentation.phase2_end}
    if decision is not None:
        doc["stop"] = {
            "mode": decision.mode.value,
            "stop_epoch": decision.stop_epoch,
            "peak_indicator": decision.peak_indicator,
            "triggered": decision.triggered,
        }
    doc["failures"] = [dict(f) for f in failures]
    return doc


def write_trajectory(trajectory, segmentation, decision, path_prefix, failures=()):
    """Write ``<prefix>.csv`` and ``<prefix>.json``; return both paths."""
    prefix = Path(path_prefix)
    csv_path = prefix.with_name(prefix.name + ".csv")
    json_path = prefix.with_name(prefix.name + ".json")
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(trajectory_csv(trajectory, segmentation))
    doc = trajectory_summary(trajectory, segmentation, decision, failures)
    with open(json_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return csv_path, json_path


def read_trajectory_csv(path, model_label=""):
    """Parse a trajectory CSV; returns ``(Trajectory, phases)``."""
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != TRAJECTORY_COLUMNS:
        raise FormatError("unexpected trajectory CSV header", line=1)
    records, phases = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(TRAJECTORY_COLUMNS):
            raise FormatError(f"line {lineno}: expected {len(TRAJECTORY_COLUMNS)} fields", line=lineno)
        values = dict(zip(TRAJECTORY_COLUMNS, row))
        try:
            kwargs = {
                name: int(values[name]) if name in ("epoch", "n_tail") else float(values[name])
                for name in EpochRecord.input_fields()
            }
        except ValueError as exc:
            raise FormatError(f"line {lineno}: {exc}", line=lineno) from None
        records.append(EpochRecord(**kwargs))
        phases.append(int(values["phase"]) if values["phase"] else None)
    return Trajectory(tuple(records), model_label), phases


@dataclass(frozen=True)
class GroupStats:
    first_epoch: int
    last_epoch: int
    size: int
    alpha_mean: float
    alpha_std: float
    x_min_mean: float
    x_min_std: float


def grouped_stats(trajectory, group_size):
    """Population mean and std of alpha and x_min over consecutive record groups.

    The last group holds the leftover records when the length is not a
    multiple of ``group_size``.
    """
    group_size = int(group_size)
    if group_size < 1:
        raise InvalidConfigError(f"group_size must be at least 1, got {group_size}")
    epochs = trajectory.epochs
    alpha = trajectory.column("alpha")
    x_min = trajectory.column("x_min")
    out = []
    for start in range(0, len(epochs), group_size):
        sl = slice(start, start + group_size)
        out.append(
            GroupStats(
                first_epoch=int(epochs[sl][0]),
                last_epoch=int(epochs[sl][-1]),
                size=len(epochs[sl]),
                alpha_mean=float(alpha[sl].mean()),
                alpha_std=float(alpha[sl].std()),
                x_min_mean=float(x_min[sl].mean()),
                x_min_std=float(x_min[sl].std()),
            )
        )
    return out


# plotting

WIDTH, HEIGHT = 640, 400
MARGIN = {"left": 70, "right": 20, "top": 40, "bottom": 50}
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


def _num(v):
    return repr(round(float(v), 3))


class _Frame:
    """Maps data coordinates to pixels inside the plot margins."""

    def __init__(self, xlim, ylim):
        self.x0, self.x1 = _widen(*xlim)
        self.y0, self.y1 = _widen(*ylim)
        self.left = MARGIN["left"]
        self.right = WIDTH - MARGIN["right"]
        self.top = MARGIN["top"]
        self.bottom = HEIGHT - MARGIN["bottom"]

    def px(self, x):
        return self.left + (np.asarray(x, float) - self.x0) / (self.x1 - self.x0) * (self.right - self.left)

    def py(self, y):
        return self.bottom - (np.asarray(y, float) - self.y0) / (self.y1 - self.y0) * (self.bottom - self.top)


def _widen(lo, hi):
    lo, hi = float(lo), float(hi)
    if hi > lo:
        return lo, hi
    pad = max(abs(lo) * 0.05, 0.5)
    return lo - pad, hi + pad


def _ticks(lo, hi, count=5):
    return [lo + (hi - lo) * i / (count - 1) for i in range(count)]


def _axes(frame, title, xlabel, ylabel, log_axes=False):
    parts = [
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<line class="axis" x1="{frame.left}" y1="{frame.bottom}" x2="{frame.right}" y2="{frame.bottom}" stroke="black"/>',
        f'<line class="axis" x1="{frame.left}" y1="{frame.top}" x2="{frame.left}" y2="{frame.bottom}" stroke="black"/>',
        f'<text x="{WIDTH / 2}" y="{frame.top / 2 + 6}" text-anchor="middle" font-size="15">{escape(title)}</text>',
        f'<text x="{WIDTH / 2}" y="{HEIGHT - 10}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
        f'<text x="16" y="{HEIGHT / 2}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 16 {HEIGHT / 2})">{escape(ylabel)}</text>',
    ]
    fmt = (lambda v: f"1e{v:.2g}") if log_axes else (lambda v: f"{v:.4g}")
    for t in _ticks(frame.x0, frame.x1):
        x = _num(frame.px(t))
        parts.append(f'<line x1="{x}" y1="{frame.bottom}" x2="{x}" y2="{frame.bottom + 5}" stroke="black"/>')
        parts.append(f'<text x="{x}" y="{frame.bottom + 18}" text-anchor="middle" font-size="10">{fmt(t)}</text>')
    for t in _ticks(frame.y0, frame.y1):
        y = _num(frame.py(t))
        parts.append(f'<line x1="{frame.left - 5}" y1="{y}" x2="{frame.left}" y2="{y}" stroke="black"/>')
        parts.append(f'<text x="{frame.left - 8}" y="{y}" text-anchor="end" font-size="10">{fmt(t)}</text>')
    return parts


def _polyline(frame, x, y, color, label, cls="series", dash=None):
    pts = " ".join(f"{_num(a)},{_num(b)}" for a, b in zip(frame.px(x), frame.py(y)))
    extra = f' stroke-dasharray="{dash}"' if dash else ""
    return (
        f'<polyline class="{cls}" data-label="{escape(label)}" points="{pts}" '
        f'fill="none" stroke="{color}" stroke-width="1.5"{extra}/>'
    )


def _legend(labels):
    parts = []
    for i, label in enumerate(labels):
        y = MARGIN["top"] + 14 * i + 4
        x = WIDTH - MARGIN["right"] - 150
        color = PALETTE[i % len(PALETTE)]
        parts.append(f'<rect x="{x}" y="{y - 8}" width="10" height="10" fill="{color}"/>')
        parts.append(f'<text x="{x + 14}" y="{y + 1}" font-size="10">{escape(label)}</text>')
    return parts


def _normalize(series):
    if isinstance(series, dict):
        items = list(series.items())
    else:
        items = [(f"series {i}", s) for i, s in enumerate(series)]
    if not items:
        raise InvalidInputError("nothing to plot: no series given")
    return items


def _xy(data):
    if isinstance(data, tuple) and len(data) == 2:
        x, y = np.asarray(data[0], float), np.asarray(data[1], float)
    else:
        y = np.asarray(data, float)
        x = np.arange(y.size, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise InvalidInputError("series x and y must be 1-D and of equal length")
    if y.size == 0:
        raise InvalidInputError("cannot plot an empty series")
    return x, y


def _svg(parts):
    body = "\n".join(parts)
    return (
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">\n{body}\n</svg>\n'
    )


def _trajectory_svg(items, title, xlabel, ylabel, markers):
    data = [(label, *_xy(d)) for label, d in items]
    xs = np.concatenate([x for _, x, _ in data])
    ys = np.concatenate([y for _, _, y in data])
    frame = _Frame((xs.min(), xs.max()), (ys.min(), ys.max()))
    parts = _axes(frame, title, xlabel, ylabel)
    if frame.y0 < 0 < frame.y1:
        y = _num(frame.py(0.0))
        parts.append(f'<line class="zero" x1="{frame.left}" y1="{y}" x2="{frame.right}" y2="{y}" stroke="#999"/>')
    for name, pos in markers:
        x = _num(frame.px(pos))
        parts.append(
            f'<line class="marker" data-label="{escape(name)}" x1="{x}" y1="{frame.top}" x2="{x}" '
            f'y2="{frame.bottom}" stroke="#555" stroke-dasharray="4 3"/>'
        )
    for i, (label, x, y) in enumerate(data):
        parts.append(_polyline(frame, x, y, PALETTE[i % len(PALETTE)], label))
    return parts + _legend([label for label, _, _ in data])


def _histogram_svg(items, title, xlabel, ylabel, bins):
    data = []
    for label, values in items:
        v = np.asarray(values, float).ravel()
        if v.size == 0:
            raise InvalidInputError("cannot plot an empty series")
        data.append((label, v))
    everything = np.concatenate([v for _, v in data])
    edges = np.linspace(*_widen(everything.min(), everything.max()), int(bins) + 1)
    counts = [np.histogram(v, bins=edges)[0] for _, v in data]
    frame = _Frame((edges[0], edges[-1]), (0.0, max(int(c.max()) for c in counts) * 1.05 or 1.0))
    parts = _axes(frame, title, xlabel, ylabel)
    base = frame.py(0.0)
    for i, ((label, _), c) in enumerate(zip(data, counts)):
        color = PALETTE[i % len(PALETTE)]
        opacity = 1.0 if len(data) == 1 else 0.5
        for left, right, count in zip(frame.px(edges[:-1]), frame.px(edges[1:]), c):
            top = frame.py(count)
            parts.append(
                f'<rect class="bar" data-label="{escape(label)}" x="{_num(left)}" y="{_num(top)}" '
                f'width="{_num(right - left)}" height="{_num(base - top)}" fill="{color}" fill-opacity="{opacity}"/>'
            )
    return parts + _legend([label for label, _ in data])


def plotting_positions(values):
    """Sorted positive values and their survival estimates ``(n - i + 0.5) / n``."""
    v = np.sort(np.asarray(values, float).ravel())
    v = v[v > 0]
    n = v.size
    return v, (n - np.arange(1, n + 1) + 0.5) / n


def _esd_svg(items, title, xlabel, ylabel, fit):
    data = []
    for label, values in items:
        v, surv = plotting_positions(values)
        if v.size == 0:
            raise InvalidInputError("cannot plot an empty series (no positive values)")
        data.append((label, np.log10(v), np.log10(surv), v.size))
    xs = np.concatenate([d[1] for d in data])
    ys = np.concatenate([d[2] for d in data])
    overlay = None
    if fit is not None:
        n_total = data[0][3]
        x_hi = 10 ** xs.max()
        lx = np.log10([fit.x_min, max(x_hi, fit.x_min)])
        head = math.log10(fit.n_tail / n_total)
        ly = head - (fit.alpha - 1.0) * (lx - lx[0])
        overlay = (lx, ly)
        xs, ys = np.concatenate([xs, lx]), np.concatenate([ys, ly])
    frame = _Frame((xs.min(), xs.max()), (ys.min(), ys.max()))
    parts = _axes(frame, title, xlabel, ylabel, log_axes=True)
    for i, (label, x, y, _) in enumerate(data):
        parts.append(_polyline(frame, x, y, PALETTE[i % len(PALETTE)], label))
    if overlay is not None:
        parts.append(
            _polyline(frame, *overlay, "black", f"power law alpha={fit.alpha:.3f}", cls="overlay", dash="6 3")
        )
    return parts + _legend([label for label, *_ in data])


def render_plot(series, kind, path=None, *, title="", xlabel="", ylabel="", bins=50, fit=None, markers=()):
    """Render a static SVG and return its text (also written to ``path`` if given).

    series: mapping ``label -> data`` (or a list of data).
    trajectory: data is ``(x, y)`` or ``y``; one polyline per series, plus
    dashed vertical ``markers`` given as ``(name, x)`` pairs.
    histogram: data is a value array; ``bins`` bars per series over shared edges.
    esd_loglog: data is an eigenvalue array, drawn as the empirical survival
    function on log10 axes. ``fit`` (a power-law fit) adds the model tail as a
    straight line starting at ``x_min``, scaled to the tail's share of the
    first series.
    """
    if kind not in PLOT_KINDS:
        raise InvalidConfigError(f"unknown plot kind {kind!r}; expected one of {PLOT_KINDS}")
    items = _normalize(series)
    if kind == "trajectory":
        parts = _trajectory_svg(items, title, xlabel, ylabel, markers)
    elif kind == "histogram":
        if int(bins) < 1:
            raise InvalidConfigError("bins must be at least 1")
        parts = _histogram_svg(items, title, xlabel, ylabel, bins)
    else:
        parts = _esd_svg(items, title, xlabel or "log10 eigenvalue", ylabel or "log10 P(X >= x)", fit)
    text = _svg(parts)
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    return text
