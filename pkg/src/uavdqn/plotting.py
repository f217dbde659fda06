"""Dependency-free SVG charts and the CSV readers feeding them.

Output is a pure function of the input data: coordinates are printed with
fixed precision and nothing time- or environment-dependent is embedded.
"""
from __future__ import annotations

import csv
import os
from html import escape

import numpy as np

from .harness import RECORD_HEADER
from .world import SNAPSHOT_HEADER, horizontal_distances, nearest_station

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
           "#8c564b", "#e377c2", "#17becf", "#7f7f7f", "#bcbd22")
WIDTH, HEIGHT = 720, 480
MARGIN = dict(left=80, right=150, top=40, bottom=56)

EPISODES_HEADER = ("episode", "mean_sum_rate_bps", "total_reward")
COMPARE_HEADER = ("seed", "policy", "t", "sum_rate_bps")


class CsvParseError(ValueError):
    pass


def _f(v: float) -> str:
    return f"{v:.2f}"


def _nice_ticks(lo: float, hi: float, n: int = 5):
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10 ** np.floor(np.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = np.ceil(lo / step) * step
    return [float(v) for v in np.arange(start, hi + step * 1e-9, step)]


def _tick_label(v: float) -> str:
    return f"{v:.6g}"


class _Frame:
    def __init__(self, xlim, ylim, title, xlabel, ylabel, equal=False):
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim
        if self.x1 <= self.x0:
            self.x1 = self.x0 + 1.0
        if self.y1 <= self.y0:
            pad = abs(self.y0) * 0.05 or 1.0
            self.y0, self.y1 = self.y0 - pad, self.y1 + pad
        self.pw = WIDTH - MARGIN["left"] - MARGIN["right"]
        self.ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]
        if equal:
            side = min(self.pw, self.ph)
            self.pw = self.ph = side
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" '
            f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
            f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
            f'<text x="{WIDTH / 2:.1f}" y="24" text-anchor="middle" font-family="sans-serif" '
            f'font-size="16">{escape(title)}</text>',
        ]
        self._axes(xlabel, ylabel)

    def px(self, x):
        return MARGIN["left"] + (x - self.x0) / (self.x1 - self.x0) * self.pw

    def py(self, y):
        return MARGIN["top"] + self.ph - (y - self.y0) / (self.y1 - self.y0) * self.ph

    def _axes(self, xlabel, ylabel):
        left, top = MARGIN["left"], MARGIN["top"]
        bottom = top + self.ph
        self.parts.append(f'<rect x="{left}" y="{top}" width="{self.pw}" height="{self.ph}" '
                          'fill="none" stroke="black"/>')
        for v in _nice_ticks(self.x0, self.x1):
            x = _f(self.px(v))
            self.parts.append(f'<line x1="{x}" y1="{bottom}" x2="{x}" y2="{bottom + 5}" stroke="black"/>')
            self.parts.append(f'<text x="{x}" y="{bottom + 18}" text-anchor="middle" '
                              f'font-family="sans-serif" font-size="11">{_tick_label(v)}</text>')
        for v in _nice_ticks(self.y0, self.y1):
            y = _f(self.py(v))
            self.parts.append(f'<line x1="{left - 5}" y1="{y}" x2="{left}" y2="{y}" stroke="black"/>')
            self.parts.append(f'<text x="{left - 8}" y="{y}" text-anchor="end" dominant-baseline="middle" '
                              f'font-family="sans-serif" font-size="11">{_tick_label(v)}</text>')
        self.parts.append(f'<text x="{left + self.pw / 2:.1f}" y="{HEIGHT - 14}" text-anchor="middle" '
                          f'font-family="sans-serif" font-size="13">{escape(xlabel)}</text>')
        self.parts.append(f'<text x="18" y="{top + self.ph / 2:.1f}" text-anchor="middle" '
                          f'font-family="sans-serif" font-size="13" '
                          f'transform="rotate(-90 18 {top + self.ph / 2:.1f})">{escape(ylabel)}</text>')

    def polyline(self, xs, ys, color, width=1.5):
        pts = " ".join(f"{_f(self.px(x))},{_f(self.py(y))}" for x, y in zip(xs, ys))
        self.parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="{width}" points="{pts}"/>')

    def mark(self, x, y, color, shape="circle", size=3.0):
        cx, cy = _f(self.px(x)), _f(self.py(y))
        if shape == "circle":
            self.parts.append(f'<circle class="mark" cx="{cx}" cy="{cy}" r="{size}" fill="{color}"/>')
        elif shape == "triangle":
            x, y = self.px(x), self.py(y)
            pts = f"{_f(x)},{_f(y - size)} {_f(x - size)},{_f(y + size)} {_f(x + size)},{_f(y + size)}"
            self.parts.append(f'<polygon class="mark" points="{pts}" fill="{color}" stroke="black"/>')
        else:
            s = 2 * size
            self.parts.append(f'<rect class="mark" x="{_f(self.px(x) - size)}" y="{_f(self.py(y) - size)}" '
                              f'width="{s}" height="{s}" fill="{color}" stroke="black"/>')

    def legend(self, entries):
        x = MARGIN["left"] + self.pw + 12
        for i, (label, color) in enumerate(entries):
            y = MARGIN["top"] + 14 + 18 * i
            self.parts.append(f'<line x1="{x}" y1="{y}" x2="{x + 20}" y2="{y}" stroke="{color}" stroke-width="3"/>')
            self.parts.append(f'<text x="{x + 26}" y="{y + 4}" font-family="sans-serif" '
                              f'font-size="12">{escape(label)}</text>')

    def render(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


def line_chart(series, title, xlabel, ylabel) -> str:
    """``series`` is a list of ``(label, xs, ys)``."""
    xs_all = np.concatenate([np.asarray(s[1], float) for s in series])
    ys_all = np.concatenate([np.asarray(s[2], float) for s in series])
    frame = _Frame((xs_all.min(), xs_all.max()), (ys_all.min(), ys_all.max()),
                   title, xlabel, ylabel)
    for i, (_, xs, ys) in enumerate(series):
        frame.polyline(xs, ys, PALETTE[i % len(PALETTE)])
    frame.legend([(label, PALETTE[i % len(PALETTE)]) for i, (label, _, _) in enumerate(series)])
    return frame.render()


def moving_average(values, window: int = 100) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    csum = np.cumsum(np.insert(values, 0, 0.0))
    idx = np.arange(1, len(values) + 1)
    lo = np.maximum(idx - window, 0)
    return (csum[idx] - csum[lo]) / (idx - lo)


def training_curve_svg(episode_means, window: int = 100) -> str:
    episodes = np.arange(len(episode_means))
    scaled = np.asarray(episode_means, dtype=float) / 1e6
    return line_chart(
        [("episode mean", episodes, scaled),
         (f"{window}-episode avg", episodes, moving_average(scaled, window))],
        "Sum data rate vs training episodes", "episode", "mean sum rate (Mbit/s)")


def timeseries_svg(curves: dict) -> str:
    """``curves`` maps policy name to a per-time-step sum-rate array."""
    series = [(name, np.arange(len(v)), np.asarray(v, float) / 1e6) for name, v in curves.items()]
    return line_chart(series, "Sum data rate comparison", "time instant t", "sum rate (Mbit/s)")


def snapshot_svg(ues, uavs, gbs, area=None) -> str:
    """Scatter of UEs colored by their (nearest) serving station."""
    ues, uavs, gbs = (np.asarray(a, float).reshape(-1, 2) for a in (ues, uavs, gbs))
    stations = np.concatenate([uavs, gbs])
    pts = np.concatenate([ues, stations])
    if area is None:
        area = (float(pts[:, 0].max()) if len(pts) else 1.0, float(pts[:, 1].max()) if len(pts) else 1.0)
    frame = _Frame((0.0, area[0]), (0.0, area[1]), "UE association snapshot", "x (m)", "y (m)",
                   equal=True)
    serving = nearest_station(horizontal_distances(ues, stations)) if len(stations) else []
    for (x, y), s in zip(ues, serving):
        frame.mark(x, y, PALETTE[int(s) % len(PALETTE)], "circle", 2.5)
    for j, (x, y) in enumerate(uavs):
        frame.mark(x, y, PALETTE[j % len(PALETTE)], "triangle", 7.0)
    for k, (x, y) in enumerate(gbs):
        frame.mark(x, y, PALETTE[(len(uavs) + k) % len(PALETTE)], "square", 6.0)
    entries = [(f"UAV-BS {j}", PALETTE[j % len(PALETTE)]) for j in range(len(uavs))]
    entries += [(f"GBS {k}", PALETTE[(len(uavs) + k) % len(PALETTE)]) for k in range(len(gbs))]
    frame.legend(entries)
    return frame.render()


def read_csv(path):
    """Header tuple and data rows; raises :class:`CsvParseError` on empty input."""
    with open(path, encoding="utf-8", newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise CsvParseError(f"{path}: empty file")
    header, data = tuple(rows[0]), rows[1:]
    if not data:
        raise CsvParseError(f"{path}: no data rows")
    return header, data


def _numbers(path, data, columns, header):
    """Parse the named numeric columns; row numbers are 1-based file lines."""
    idx = [header.index(c) for c in columns]
    out = np.empty((len(data), len(columns)))
    for r, row in enumerate(data):
        if len(row) != len(header):
            raise CsvParseError(f"{path}: row {r + 2}: expected {len(header)} fields, got {len(row)}")
        try:
            out[r] = [float(row[i]) for i in idx]
        except ValueError as exc:
            raise CsvParseError(f"{path}: row {r + 2}: {exc}") from None
    return out


def _snapshot_from(path, header, data):
    kinds = {"ue": [], "uav": [], "gbs": []}
    values = _numbers(path, data, ("x", "y"), header)
    for r, row in enumerate(data):
        if row[0] not in kinds:
            raise CsvParseError(f"{path}: row {r + 2}: unknown kind {row[0]!r}")
        kinds[row[0]].append(values[r])
    return {k: np.array(v).reshape(-1, 2) for k, v in kinds.items()}


def _record_curves(path, header, data):
    nums = _numbers(path, data, ("episode", "t", "sum_rate_bps"), header)
    policies = [row[2] for row in data]
    out = {}
    for name in dict.fromkeys(policies):
        sel = np.array([p == name for p in policies])
        ep, t, rate = nums[sel].T
        out[name] = (ep.astype(int), t.astype(int), rate)
    return out


def render_file(path, area=None) -> dict:
    """Render one CSV into ``{file name: svg text}``."""
    header, data = read_csv(path)
    stem = os.path.splitext(os.path.basename(path))[0]
    svgs = {}
    if header == SNAPSHOT_HEADER:
        snap = _snapshot_from(path, header, data)
        svgs[f"{stem}_snapshot.svg"] = snapshot_svg(snap["ue"], snap["uav"], snap["gbs"], area)
    elif header == EPISODES_HEADER:
        means = _numbers(path, data, ("mean_sum_rate_bps",), header)[:, 0]
        svgs[f"{stem}_training.svg"] = training_curve_svg(means)
    elif header == RECORD_HEADER:
        curves = _record_curves(path, header, data)
        for name, (ep, t, rate) in curves.items():
            n_ep, horizon = ep.max() - ep.min() + 1, t.max() + 1
            grid = np.full((n_ep, horizon), np.nan)
            grid[ep - ep.min(), t] = rate
            if n_ep > 1 and len(curves) == 1:
                svgs[f"{stem}_training.svg"] = training_curve_svg(np.nanmean(grid, axis=1))
        overlay = {}
        for name, (ep, t, rate) in curves.items():
            horizon = t.max() + 1
            sums, counts = np.bincount(t, rate, horizon), np.bincount(t, minlength=horizon)
            # Agent rows repeat the step's sum rate, so a plain mean is unaffected.
            overlay[name] = sums / np.maximum(counts, 1)
        svgs[f"{stem}_timeseries.svg"] = timeseries_svg(overlay)
    elif header == COMPARE_HEADER:
        nums = _numbers(path, data, ("t", "sum_rate_bps"), header)
        policies = [row[1] for row in data]
        overlay = {}
        for name in dict.fromkeys(policies):
            sel = np.array([p == name for p in policies])
            t = nums[sel, 0].astype(int)
            horizon = t.max() + 1
            overlay[name] = np.bincount(t, nums[sel, 1], horizon) / np.maximum(
                np.bincount(t, minlength=horizon), 1)
        svgs[f"{stem}_timeseries.svg"] = timeseries_svg(overlay)
    else:
        raise CsvParseError(f"{path}: row 1: unrecognised header {','.join(header)!r}")
    return svgs


def write_text(path, text):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def run_plot(paths, out_dir, area=None) -> list[str]:
    """Render every input before writing, so a bad file leaves nothing behind."""
    if not paths:
        raise CsvParseError("no record files given")
    rendered = {}
    for path in paths:
        rendered.update(render_file(path, area))
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for name, text in rendered.items():
        target = os.path.join(out_dir, name)
        write_text(target, text)
        written.append(target)
    return written
