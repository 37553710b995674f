"""Self-contained SVG renderings of 2-D tube projections."""

from __future__ import annotations

from typing import Optional

import numpy as np

from .sets import Zonotope

PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b")


def zonotope_polygon(z: Zonotope, dims=(0, 1)) -> np.ndarray:
    """Vertices (counter-clockwise) of the projection of ``z`` onto ``dims``."""
    c = np.asarray(z.center, float)[list(dims)]
    G = np.asarray(z.generators, float)[list(dims)]
    G = G[:, np.abs(G).sum(axis=0) > 0]
    if G.shape[1] == 0:
        return c[None, :]
    # orient generators into the upper half-plane and sort by angle
    flip = (G[1] < 0) | ((G[1] == 0) & (G[0] < 0))
    G[:, flip] *= -1
    G = G[:, np.argsort(np.arctan2(G[1], G[0]))]
    start = c - G.sum(axis=1)
    pts = [start]
    for g in (2 * G).T:
        pts.append(pts[-1] + g)
    for g in (2 * G).T:
        pts.append(pts[-1] - g)
    return np.array(pts[:-1])


def time_lift(tube: list, trajectory=None, dim: int = 0):
    """Embed one state coordinate of a tube in the ``(t, x[dim])`` plane."""
    lifted = []
    for t, z in enumerate(tube):
        G = np.asarray(z.generators, float)[dim]
        lifted.append(Zonotope([float(t), float(np.asarray(z.center)[dim])],
                               np.vstack([np.zeros_like(G), G])))
    traj = None
    if trajectory is not None:
        tr = np.asarray(trajectory, float)
        traj = np.column_stack([np.arange(len(tr)), tr[:, dim]])
    return lifted, traj


def _box_polygon(lo, hi) -> np.ndarray:
    return np.array([[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]])


def render_tubes(tubes: list, path=None, trajectories: Optional[list] = None, boxes=(),
                 dims=(0, 1), size=(480, 480), title: str = "",
                 labels=("x[0]", "x[1]")) -> str:
    """Draw tube slices (list of zonotope lists), optional sample trajectories
    (``(T, n)`` arrays) and target boxes ``(lo, hi)``; returns the SVG text.
    """
    polys = [[zonotope_polygon(z, dims) for z in tube] for tube in tubes]
    pts = [p for tube in polys for p in tube]
    pts += [np.asarray(tr)[:, list(dims)] for tr in trajectories or []]
    pts += [_box_polygon(lo, hi) for lo, hi in boxes]
    allp = np.vstack(pts) if pts else np.zeros((1, 2))
    lo, hi = allp.min(axis=0), allp.max(axis=0)
    span = np.where(hi - lo > 0, hi - lo, 1.0)
    lo, hi = lo - 0.05 * span, hi + 0.05 * span
    W, H = size
    pad = 40

    def tx(p):
        p = np.atleast_2d(p)
        x = pad + (p[:, 0] - lo[0]) / (hi[0] - lo[0]) * (W - 2 * pad)
        y = H - pad - (p[:, 1] - lo[1]) / (hi[1] - lo[1]) * (H - 2 * pad)
        return np.column_stack([x, y])

    def pstr(p):
        return " ".join(f"{a:.2f},{b:.2f}" for a, b in tx(p))

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
           f'viewBox="0 0 {W} {H}">',
           f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
           f'<rect x="{pad}" y="{pad}" width="{W - 2 * pad}" height="{H - 2 * pad}" '
           'fill="none" stroke="#444"/>']
    for blo, bhi in boxes:
        out.append(f'<polygon points="{pstr(_box_polygon(blo, bhi))}" fill="#ddd" '
                   'fill-opacity="0.5" stroke="#888" stroke-dasharray="4,2"/>')
    for k, tube in enumerate(polys):
        col = PALETTE[k % len(PALETTE)]
        for p in tube:
            if len(p) == 1:
                x, y = tx(p)[0]
                out.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="2" fill="{col}"/>')
            else:
                out.append(f'<polygon points="{pstr(p)}" fill="{col}" fill-opacity="0.25" '
                           f'stroke="{col}" stroke-width="0.8"/>')
    for tr in trajectories or []:
        tr = np.asarray(tr)[:, list(dims)]
        out.append(f'<polyline points="{pstr(tr)}" fill="none" stroke="#222" '
                   'stroke-width="0.6" stroke-opacity="0.6"/>')
    out.append(f'<text x="{W / 2:.0f}" y="{H - 8}" text-anchor="middle" font-size="12">'
               f'{labels[0]}</text>')
    out.append(f'<text x="12" y="{H / 2:.0f}" font-size="12" transform="rotate(-90 12 {H / 2:.0f})" '
               f'text-anchor="middle">{labels[1]}</text>')
    for v, anchor, x, y in ((lo[0], "start", pad, H - pad + 14), (hi[0], "end", W - pad, H - pad + 14),
                            (lo[1], "end", pad - 4, H - pad), (hi[1], "end", pad - 4, pad + 10)):
        out.append(f'<text x="{x}" y="{y}" text-anchor="{anchor}" font-size="10">{v:.3g}</text>')
    if title:
        out.append(f'<text x="{W / 2:.0f}" y="20" text-anchor="middle" font-size="14">{title}</text>')
    out.append("</svg>")
    text = "\n".join(out)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text
