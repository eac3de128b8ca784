"""
Box grid around the surface, irregular-node classification, and the
extension of near-surface values to the whole grid.

The extension solves  Delta_h u_h = Delta_h u_{h,delta}  at irregular nodes
and  Delta_h u_h = 0  elsewhere, with u_h = 0 on the box boundary, by a
3-D type-I discrete sine transform, which diagonalizes the 7-point Laplacian.
"""

import math
import logging
from dataclasses import dataclass

import numpy as np
from scipy.fft import dstn, idstn

from .errors import MissingGridValueError
from .surface_quadrature import grid_ticks, sample_grid

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BoxGrid:
    """Nodes (j - N/2) h, j = 0..N, of the box (-L, L)^3 with h = 2L/N."""

    half_width: float = 1.1
    n: int = 64

    def __post_init__(self):
        if self.n < 4 or self.n % 2:
            raise ValueError(f"grid size must be an even number of cells, got {self.n}")

    @property
    def h(self):
        return 2.0 * self.half_width / self.n

    @property
    def shape(self):
        return (self.n + 1,) * 3

    @property
    def ticks(self):
        return grid_ticks(self.h, self.half_width)

    def points(self, index):
        """Coordinates of nodes given as an (M, 3) integer index array."""
        return self.ticks[np.asarray(index)]


def classify_nodes(grid, surface, values=None):
    """Boolean array, True at irregular nodes.

    A node is irregular when phi changes sign along one of the six edges of its
    7-point stencil. `values` may hold phi already sampled on the grid.
    """
    if values is None:
        values = sample_grid(surface, grid.ticks)
    negative = values < 0
    irregular = np.zeros(grid.shape, dtype=bool)
    for axis in range(3):
        lo = [slice(None)] * 3
        hi = [slice(None)] * 3
        lo[axis] = slice(None, -1)
        hi[axis] = slice(1, None)
        crossing = negative[tuple(lo)] != negative[tuple(hi)]
        irregular[tuple(lo)] |= crossing
        irregular[tuple(hi)] |= crossing
    logger.info(f"{int(irregular.sum())} irregular nodes of {irregular.size} at N={grid.n}")
    return irregular


def stencil_closure(mask):
    """mask together with the six neighbours of every masked node."""
    out = mask.copy()
    for axis in range(3):
        out |= np.roll(mask, 1, axis=axis) & _not_wrapped(mask.shape, axis, 1)
        out |= np.roll(mask, -1, axis=axis) & _not_wrapped(mask.shape, axis, -1)
    return out


def _not_wrapped(shape, axis, shift):
    keep = np.ones(shape, dtype=bool)
    edge = [slice(None)] * 3
    edge[axis] = 0 if shift > 0 else -1
    keep[tuple(edge)] = False
    return keep


def target_mask(grid, irregular):
    """Nodes where u_{h,delta} is needed: irregular nodes and their stencils."""
    return stencil_closure(irregular)


def discrete_laplacian(u, h):
    """7-point Laplacian at interior nodes, shape (N-1,)^3."""
    center = u[1:-1, 1:-1, 1:-1]
    total = -6.0 * center
    total = total + u[2:, 1:-1, 1:-1] + u[:-2, 1:-1, 1:-1]
    total = total + u[1:-1, 2:, 1:-1] + u[1:-1, :-2, 1:-1]
    total = total + u[1:-1, 1:-1, 2:] + u[1:-1, 1:-1, :-2]
    return total / h**2


def solve_dirichlet(forcing, h):
    """Solve Delta_h u = forcing on interior nodes with u = 0 on the boundary."""
    m = forcing.shape[0]
    j = np.arange(1, m + 1)
    eig = (2.0 * np.cos(math.pi * j / (m + 1)) - 2.0) / h**2
    denom = eig[:, None, None] + eig[None, :, None] + eig[None, None, :]
    coeffs = dstn(forcing, type=1, norm="ortho") / denom
    interior = idstn(coeffs, type=1, norm="ortho")
    u = np.zeros((m + 2,) * 3)
    u[1:-1, 1:-1, 1:-1] = interior
    return u


def extend_potential(grid, values, irregular):
    """u_h on every node from u_{h,delta} given at irregular nodes and their stencils.

    `values` is a full grid array, NaN where no value was computed.
    """
    values = np.asarray(values, dtype=float)
    interior_irregular = np.zeros(grid.shape, dtype=bool)
    interior_irregular[1:-1, 1:-1, 1:-1] = irregular[1:-1, 1:-1, 1:-1]
    needed = stencil_closure(interior_irregular)
    missing = needed & np.isnan(values)
    if np.any(missing):
        nodes = np.argwhere(missing)
        logger.error(f"{len(nodes)} grid values missing for the extension, first {nodes[0].tolist()}")
        raise MissingGridValueError(
            f"u_h,delta missing at {len(nodes)} nodes, e.g. {nodes[:5].tolist()}",
            nodes=nodes,
        )

    forcing = np.zeros((grid.n - 1,) * 3)
    filled = np.where(needed, values, 0.0)
    lap = discrete_laplacian(filled, grid.h)
    inner = interior_irregular[1:-1, 1:-1, 1:-1]
    forcing[inner] = lap[inner]
    return solve_dirichlet(forcing, grid.h)
