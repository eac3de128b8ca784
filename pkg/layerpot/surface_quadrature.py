"""
Quadrature nodes where grid lines cross the surface, and the smooth-integrand
rule built on them.

For each axis k the lines parallel to e_k through the box grid are scanned for
sign changes of phi; each bracketing cell yields one root. A root belongs to
chart k when |n.e_k| >= cos(theta) and carries the weight
h^2 sigma_k(n) / |n.e_k|.
"""

import math
import logging
from dataclasses import dataclass

import numpy as np

from .errors import RootRefinementError
from .level_surface import CHART_AXES, normal, resolution_limit
from .sphere_pou import PouParams, pou_weights

logger = logging.getLogger(__name__)


@dataclass
class QuadNode:
    pos: np.ndarray
    n: np.ndarray
    zeta: np.ndarray
    w_axis: np.ndarray
    chart_flags: tuple


@dataclass
class NodeSet:
    """Struct-of-arrays node set, ordered by (axis, j1, j2, cell)."""

    h: float
    theta: float
    pos: np.ndarray
    normal: np.ndarray
    axis: np.ndarray
    index: np.ndarray
    zeta: np.ndarray
    w_axis: np.ndarray

    def __len__(self):
        return len(self.pos)

    def __getitem__(self, i):
        flags = tuple(bool(self.axis[i] == k) for k in range(3))
        return QuadNode(pos=self.pos[i], n=self.normal[i], zeta=self.zeta[i], w_axis=self.w_axis[i], chart_flags=flags)

    @property
    def counts(self):
        return tuple(int(np.count_nonzero(self.axis == k)) for k in range(3))

    @property
    def weight(self):
        """h^2 sigma_k / |n.e_k| for the node's own chart k."""
        rows = np.arange(len(self.pos))
        return self.h**2 * self.zeta[rows, self.axis] * self.w_axis[rows, self.axis]

    def chart(self, k):
        """Indices of the nodes lying in chart k."""
        return np.flatnonzero(self.axis == k)


def grid_ticks(h, half_width):
    """Box-grid coordinates (j - N/2) h, j = 0..N, exact multiples of h."""
    n = int(round(2.0 * half_width / h))
    return (np.arange(n + 1) - n // 2) * h


def sample_grid(surface, ticks):
    """phi on the full tensor grid, evaluated one x1-slab at a time."""
    size = len(ticks)
    values = np.empty((size, size, size))
    x2, x3 = np.meshgrid(ticks, ticks, indexing="ij")
    slab = np.empty((size, size, 3))
    slab[..., 1] = x2
    slab[..., 2] = x3
    for a, x1 in enumerate(ticks):
        slab[..., 0] = x1
        values[a] = surface.phi(slab)
    return values


def _refine_roots(surface, base, axis, lo, hi, f_lo, tol, max_iter, lines):
    """Safeguarded Newton on phi restricted to lines base + t e_axis, t in [lo, hi]."""
    lo, hi, f_lo = lo.copy(), hi.copy(), f_lo.copy()
    neg_lo = f_lo < 0
    pts = base.copy()
    f_hi = surface.phi(_with(pts, axis, hi))
    x = lo - f_lo * (hi - lo) / (f_hi - f_lo)
    x = np.where(np.isfinite(x) & (x > lo) & (x < hi), x, 0.5 * (lo + hi))

    active = np.arange(len(x))
    for _ in range(max_iter):
        p = _with(pts[active], axis, x[active])
        f = surface.phi(p)
        d = surface.grad(p)[:, axis]

        same = (f < 0) == neg_lo[active]
        lo[active] = np.where(same, x[active], lo[active])
        hi[active] = np.where(same, hi[active], x[active])

        with np.errstate(divide="ignore", invalid="ignore"):
            newton = x[active] - f / d
        mid = 0.5 * (lo[active] + hi[active])
        ok = np.isfinite(newton) & (newton >= lo[active]) & (newton <= hi[active])
        nxt = np.where(ok, newton, mid)

        step = np.abs(nxt - x[active])
        x[active] = nxt
        done = (step <= tol) | (f == 0.0)
        active = active[~done]
        if not active.size:
            return x

    first = active[0]
    raise RootRefinementError(
        f"root refinement along axis {axis} line {tuple(lines[first])} did not converge in {max_iter} steps",
        axis=axis,
        line=tuple(int(v) for v in lines[first]),
        iterations=max_iter,
    )


def _with(points, axis, values):
    out = points.copy()
    out[:, axis] = values
    return out


def generate_nodes(surface, h, theta, half_width=1.1, root_tolerance=1e-13, max_iter=100, values=None):
    """Find R_{h,k,theta} for k = 0, 1, 2 on the box (-half_width, half_width)^3.

    `values` may hold phi already sampled on the grid (as produced by sample_grid).
    """
    params = PouParams(theta=theta)
    ticks = grid_ticks(h, half_width)
    if values is None:
        values = sample_grid(surface, ticks)
    tol = root_tolerance * 2.0 * half_width
    cos_theta = math.cos(theta)

    parts = []
    for k in range(3):
        i, j = CHART_AXES[k]
        lines = np.moveaxis(values, k, -1)
        negative = lines < 0
        a, b, m = np.nonzero(negative[..., :-1] != negative[..., 1:])
        if not a.size:
            continue
        base = np.empty((a.size, 3))
        base[:, i] = ticks[a]
        base[:, j] = ticks[b]
        base[:, k] = 0.0
        line_index = np.stack([a, b], axis=-1)
        roots = _refine_roots(
            surface, base, k, ticks[m], ticks[m + 1], lines[a, b, m], tol, max_iter, line_index
        )
        pos = _with(base, k, roots)
        n = normal(surface, pos)
        keep = np.abs(n[:, k]) >= cos_theta
        logger.debug(f"axis {k}: {a.size} crossings, {int(keep.sum())} inside the chart cap")
        parts.append((k, pos[keep], n[keep], line_index[keep]))

    if parts:
        pos = np.concatenate([p[1] for p in parts])
        n = np.concatenate([p[2] for p in parts])
        axis = np.concatenate([np.full(len(p[1]), p[0], dtype=int) for p in parts])
        index = np.concatenate([p[3] for p in parts])
    else:
        pos, n = np.empty((0, 3)), np.empty((0, 3))
        axis, index = np.empty(0, dtype=int), np.empty((0, 2), dtype=int)

    zeta = pou_weights(n, params) if len(n) else np.empty((0, 3))
    w_axis = np.zeros((len(pos), 3))
    rows = np.arange(len(pos))
    w_axis[rows, axis] = 1.0 / np.abs(n[rows, axis])

    nodes = NodeSet(h=h, theta=theta, pos=pos, normal=n, axis=axis, index=index, zeta=zeta, w_axis=w_axis)
    logger.info(f"Generated {len(nodes)} quadrature nodes for {surface.name} at h={h:.6g} (per axis {nodes.counts})")

    if len(nodes):
        _, _, h0 = resolution_limit(surface, pos, theta)
        if h >= h0:
            logger.warning(f"h={h:.4g} is not below the resolution limit h0={h0:.4g} for {surface.name}")
    return nodes


def integrate_smooth(nodes, f):
    """h^2 sum_k sum_{x in R_k} sigma_k(n) f(x) / |n.e_k|.

    f is either a callable on node positions or an array of node values.
    """
    values = f(nodes.pos) if callable(f) else np.asarray(f, dtype=float)
    return float(np.sum(nodes.weight * values))


def dump_nodes(nodes, path):
    """One node per line: x y z nx ny nz zeta1 zeta2 zeta3 w1 w2 w3."""
    table = np.hstack([nodes.pos, nodes.normal, nodes.zeta, nodes.w_axis])
    header = "x y z nx ny nz zeta1 zeta2 zeta3 w1 w2 w3"
    np.savetxt(path, table, fmt="%.16e", header=header)
    logger.info(f"Wrote {len(nodes)} nodes to {path}")
