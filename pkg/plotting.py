#!/usr/bin/env python3
"""
Static SVG Rendering of Rate Regions
====================================

Draws simulated stable/unstable grid points and the analytic region's
wireframe for 3-flow switches in a fixed isometric projection. Output bytes
depend only on the inputs.
"""

import itertools
import logging
import math
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from jinja2 import Environment, FileSystemLoader, select_autoescape
from scipy.spatial import HalfspaceIntersection

from errors import DomainError
from rate_region import RateRegion

logger = logging.getLogger(__name__)

TEMPLATE_DIR = Path(__file__).resolve().parent / "templates"
WIDTH, HEIGHT = 640, 560
TIGHT_TOL = 1e-9

_env = Environment(
    loader=FileSystemLoader(str(TEMPLATE_DIR)),
    autoescape=select_autoescape(["svg", "j2"]),
    keep_trailing_newline=True,
)


def region_vertices(region: RateRegion, q: Optional[Sequence[float]] = None) -> np.ndarray:
    """Vertices of {lam >= 0 : A lam <= b}; empty when the region has no interior."""
    a, b = region.halfspaces(q)
    k = region.num_flows
    a_full = np.vstack([a, -np.eye(k)])
    b_full = np.concatenate([b, np.zeros(k)])
    if np.min(b) <= 0:
        return np.zeros((0, k))
    # a small multiple of (1, ..., 1) is strictly inside every plane
    t = 0.5 * float(np.min(b / a.sum(axis=1)))
    interior = np.full(k, t)
    hs = HalfspaceIntersection(np.hstack([a_full, -b_full[:, None]]), interior)
    rounded = {tuple(np.round(v, 9)) for v in hs.intersections}
    return np.array(sorted(rounded))


def wireframe_edges(region: RateRegion, q: Optional[Sequence[float]] = None) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Pairs of vertices joined by a polytope edge (two independent shared tight planes)."""
    vertices = region_vertices(region, q)
    if len(vertices) == 0:
        return []
    a, b = region.halfspaces(q)
    k = region.num_flows
    a_full = np.vstack([a, -np.eye(k)])
    b_full = np.concatenate([b, np.zeros(k)])
    tight = [frozenset(np.flatnonzero(np.abs(a_full @ v - b_full) < 1e-7)) for v in vertices]
    edges = []
    for i, j in itertools.combinations(range(len(vertices)), 2):
        common = sorted(tight[i] & tight[j])
        if len(common) >= k - 1 and np.linalg.matrix_rank(a_full[common]) >= k - 1:
            edges.append((vertices[i], vertices[j]))
    return edges


class IsometricProjection:
    """Maps (lam1, lam2, lam3) in [0, extent]^3 to SVG canvas coordinates."""

    def __init__(self, extent: float, width: int = WIDTH, height: int = HEIGHT):
        self.extent = extent if extent > 0 else 1.0
        self.scale = 0.42 * width / self.extent
        self.cx = width / 2.0
        self.cy = height * 0.62

    def __call__(self, point: Sequence[float]) -> Tuple[float, float]:
        x, y, z = point
        sx = self.cx + (x - y) * math.cos(math.pi / 6) * self.scale
        sy = self.cy + (x + y) * math.sin(math.pi / 6) * self.scale - z * self.scale
        return round(sx, 2), round(sy, 2)


def render_region_svg(region: RateRegion, points: Sequence[Tuple[Sequence[float], bool]] = (),
                      title: str = "", q: Optional[Sequence[float]] = None) -> str:
    """SVG text for a 3-flow region plus ``(lam, stable)`` points."""
    if region.num_flows != 3:
        raise DomainError(f"SVG plots support exactly 3 flows, got {region.num_flows}")

    edges = wireframe_edges(region, q)
    extent = max([1e-9] + [max(lam) for lam, _ in points] + [float(np.max(e)) for pair in edges for e in pair])
    extent = 1.0 if extent <= 1e-9 else extent * 1.08
    project = IsometricProjection(extent)

    def as_line(p0, p1) -> Dict[str, float]:
        (x1, y1), (x2, y2) = project(p0), project(p1)
        return {"x1": x1, "y1": y1, "x2": x2, "y2": y2}

    axes = []
    for i, label in enumerate(("λ1", "λ2", "λ3")):
        tip = [0.0, 0.0, 0.0]
        tip[i] = extent
        line = as_line((0.0, 0.0, 0.0), tip)
        line.update({"lx": line["x2"] + 6, "ly": line["y2"] + (14 if i < 2 else -6), "label": label})
        axes.append(line)

    stable, unstable = [], []
    for lam, is_stable in points:
        x, y = project(lam)
        (stable if is_stable else unstable).append({"x": x, "y": y})

    template = _env.get_template("region_plot.svg.j2")
    return template.render(
        width=WIDTH, height=HEIGHT, title=title, axes=axes,
        stable=stable, unstable=unstable, radius=2.2,
        edges=[as_line(p0, p1) for p0, p1 in edges],
    )


def write_region_svg(path: Union[str, Path], region: RateRegion,
                     points: Sequence[Tuple[Sequence[float], bool]] = (), title: str = "",
                     q: Optional[Sequence[float]] = None) -> Path:
    path = Path(path)
    path.write_text(render_region_svg(region, points, title, q), encoding="utf-8")
    logger.info(f"✅ Plot written to {path}")
    return path
