"""CSV, binary, JSON and SVG output.

Floats are written with ``repr`` so text files round-trip exactly and repeated
runs produce identical bytes.

Binary path layout (all little-endian)::

    magic     4 bytes   b"PSLE"
    version   uint32    1
    n         uint32    number of force points
    m         uint64    number of rows
    dt        float64
    seed      uint64
    sigma     float64   nan when the path reached its end time
    kappa     float64
    betas     n x float64
    rows      m x (4 + n + 2) float64: t, W, Z_1..Z_n, D_re, D_im, A
"""
from __future__ import annotations

import csv
import json
import math
import struct
from pathlib import Path

import numpy as np

from .driving import DrivingPath
from .geometry import PolygonSnapshot

MAGIC = b"PSLE"
VERSION = 1
_HEADER = struct.Struct("<4sIIQdQdd")


def _f(x: float) -> str:
    return repr(float(x))


def path_columns(n: int) -> list[str]:
    return ["t", "W", *[f"Z_{k + 1}" for k in range(n)], "D_re", "D_im", "A"]


def path_matrix(path: DrivingPath) -> np.ndarray:
    return np.column_stack([path.t, path.W, path.Z, path.D.real, path.D.imag, path.A])


def write_csv(file, header, rows) -> None:
    with open(file, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_f(v) for v in row])


def read_csv(file) -> tuple[list[str], np.ndarray]:
    with open(file, newline="", encoding="utf-8") as fh:
        r = csv.reader(fh)
        header = next(r)
        data = np.array([[float(v) for v in row] for row in r], dtype=float)
    return header, data.reshape(-1, len(header))


def write_path_csv(path: DrivingPath, file) -> None:
    write_csv(file, path_columns(path.n), path_matrix(path))


def write_path_binary(path: DrivingPath, file) -> None:
    sigma = math.nan if path.sigma is None else path.sigma
    head = _HEADER.pack(MAGIC, VERSION, path.n, path.m, path.dt, int(path.seed) & (2**64 - 1),
                        sigma, path.kappa)
    body = np.ascontiguousarray(path_matrix(path), dtype="<f8")
    with open(file, "wb") as fh:
        fh.write(head)
        fh.write(np.asarray(path.betas, dtype="<f8").tobytes())
        fh.write(body.tobytes())


def read_path_binary(file) -> DrivingPath:
    raw = Path(file).read_bytes()
    magic, version, n, m, dt, seed, sigma, kappa = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise ValueError("not a path dump")
    if version != VERSION:
        raise ValueError(f"unsupported dump version {version}")
    off = _HEADER.size
    betas = np.frombuffer(raw, "<f8", n, off)
    off += 8 * n
    rows = np.frombuffer(raw, "<f8", m * (n + 5), off).reshape(m, n + 5)
    return DrivingPath(
        t=rows[:, 0].copy(), W=rows[:, 1].copy(), Z=rows[:, 2:2 + n].copy(),
        D=rows[:, 2 + n] + 1j * rows[:, 3 + n], A=rows[:, 4 + n].copy(),
        betas=tuple(betas.tolist()), kappa=kappa, dt=dt, seed=seed,
        sigma=None if math.isnan(sigma) else sigma,
    )


def write_flow_csv(flow, file) -> None:
    write_csv(file, ["t", "re_g", "im_g", "log_dg_re", "log_dg_im"],
              zip(flow.times, flow.trajectory.real, flow.trajectory.imag,
                  flow.log_deriv.real, flow.log_deriv.imag))


def write_trace_csv(trace, file) -> None:
    write_csv(file, ["t", "re", "im"], zip(trace.times, trace.points.real, trace.points.imag))


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, (complex, np.complexfloating)):
        return [_jsonable(x.real), _jsonable(x.imag)]
    return x


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2) + "\n"


def write_json(obj, file) -> None:
    Path(file).write_text(dumps(obj), encoding="utf-8")


def snapshot_dict(snap: PolygonSnapshot) -> dict:
    corners = []
    for c in snap.corners:
        corners.append({
            "beta": c.beta,
            "alpha": c.alpha,
            "finite": not c.at_infinity,
            "position": None if c.at_infinity else [c.position.real, c.position.imag],
        })
    return {"time": snap.time, "closed": snap.closed, "planar": snap.planar,
            "turning_sum": snap.turning_sum, "corners": corners}


# -- SVG -----------------------------------------------------------------


def viewport(points, margin: float = 0.05):
    """Bounding box of ``points`` grown by ``margin`` of its extent per side."""
    p = np.asarray(list(points), dtype=complex)
    if p.size == 0:
        return -1.0, -1.0, 1.0, 1.0
    x0, x1 = float(p.real.min()), float(p.real.max())
    y0, y1 = float(p.imag.min()), float(p.imag.max())
    w = max(x1 - x0, y1 - y0, 1e-9)
    dx = (x1 - x0) or w
    dy = (y1 - y0) or w
    return x0 - margin * dx, y0 - margin * dy, x1 + margin * dx, y1 + margin * dy


def _fmt(v: float) -> str:
    return f"{v:.6g}"


class _Svg:
    def __init__(self, box, size: int = 600):
        self.x0, self.y0, self.x1, self.y1 = box
        sx = self.x1 - self.x0
        sy = self.y1 - self.y0
        self.scale = size / max(sx, sy)
        self.w = sx * self.scale
        self.h = sy * self.scale
        self.items: list[str] = []

    def xy(self, z: complex) -> str:
        return f"{_fmt((z.real - self.x0) * self.scale)},{_fmt((self.y1 - z.imag) * self.scale)}"

    def polyline(self, pts, stroke="black", width=1.5):
        s = " ".join(self.xy(complex(z)) for z in pts)
        self.items.append(f'<polyline points="{s}" fill="none" stroke="{stroke}" '
                          f'stroke-width="{width}"/>')

    def polygon(self, pts, fill="#cfe0f3", stroke="black"):
        s = " ".join(self.xy(complex(z)) for z in pts)
        self.items.append(f'<polygon points="{s}" fill="{fill}" stroke="{stroke}" '
                          f'stroke-width="1.5"/>')

    def dot(self, z, r=3.0, fill="crimson"):
        x, y = self.xy(complex(z)).split(",")
        self.items.append(f'<circle cx="{x}" cy="{y}" r="{r}" fill="{fill}"/>')

    def text(self, z, s, size=11):
        x, y = self.xy(complex(z)).split(",")
        self.items.append(f'<text x="{x}" y="{y}" font-size="{size}" '
                          f'font-family="sans-serif">{s}</text>')

    def axes(self, ticks: int = 5):
        if self.y0 <= 0 <= self.y1:
            self.polyline([complex(self.x0, 0), complex(self.x1, 0)], stroke="#888", width=0.8)
        for v in np.linspace(self.x0, self.x1, ticks):
            self.text(complex(v, self.y0), _fmt(v), size=9)

    def render(self) -> str:
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(self.w)}" '
                f'height="{_fmt(self.h)}" viewBox="0 0 {_fmt(self.w)} {_fmt(self.h)}">')
        return "\n".join([head, *self.items, "</svg>"]) + "\n"


def trace_svg(trace, size: int = 600, box=None) -> str:
    pts = np.append(trace.points, 0j)
    svg = _Svg(box or viewport(pts), size)
    svg.axes()
    svg.polyline(trace.points)
    svg.dot(trace.points[-1])
    return svg.render()


def snapshot_svg(snap: PolygonSnapshot, size: int = 600, box=None) -> str:
    """Filled polygon for closed finite snapshots; otherwise the finite
    corners joined in order, with corners at infinity listed in a caption."""
    pts = snap.finite_positions()
    svg = _Svg(box or viewport(pts + [0j]), size)
    svg.axes()
    finite = all(not c.at_infinity for c in snap.corners)
    if snap.closed and finite and len(pts) >= 3:
        svg.polygon(pts)
    elif len(pts) >= 2:
        svg.polyline(pts)
    for z in pts:
        svg.dot(z)
    inf = [f"{k + 1}" for k, c in enumerate(snap.corners) if c.at_infinity]
    cap = f"t={_fmt(snap.time)}" + (f", corners at infinity: {' '.join(inf)}" if inf else "")
    svg.text(complex(svg.x0, svg.y1), cap)
    return svg.render()
