"""
Single and double layer potentials near and on the surface.

    v(x) = int G(y - x) psi(y) dS_y        ~ v_delta + T1 + T2
    w(x) = int dG/dn_y(y - x) phi(y) dS_y  ~ w_delta + N1 + N2

where v_delta, w_delta are the quadrature sums of the regularized kernels.
The double layer is computed in subtracted form,
    w_delta = sum w_y dG_delta/dn_y [phi(y) - phi(z)] + chi phi(z),
so a constant density returns chi exactly.

Values of the density and its chart derivatives at the foot point z come
from local quadratic least-squares fits over nodes of one chart.
"""

import math
import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.spatial import cKDTree

from .errors import ConfigurationError, InsufficientStencil
from .level_surface import DEFAULT_THETA, CHART_AXES, chart_geometry, closest_point, normal, surface_laplacian_coeffs
from .sphere_pou import PouParams, pou_weights
from .regularized_kernels import NEAR, ON_SURFACE, Smoothing
from .corrections import LatticeSumParams, TargetCharts, t1, t2, n1, n2, t2_on_surface
from .summation import DIRECT, SourceSet, SummationParams, evaluate

logger = logging.getLogger(__name__)

# quadratic basis 1, a1, a2, a1^2, a1 a2, a2^2
BASIS_SIZE = 6
MAX_NEIGHBOURS = 64


@dataclass
class Density:
    """Density values at the quadrature nodes."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if not np.all(np.isfinite(self.values)):
            raise ValueError("density values must be finite at every node")

    @classmethod
    def from_function(cls, nodes, f):
        return cls(values=f(nodes.pos))


@dataclass
class PotentialReport:
    """Per-target pieces of a layer potential; total = raw_sum + corrections + jump_term."""

    raw_sum: np.ndarray
    t1_or_n1: np.ndarray
    t2_or_n2: np.ndarray
    jump_term: np.ndarray
    total: np.ndarray
    b: np.ndarray = None


@dataclass(frozen=True)
class EvaluationOptions:
    theta: float = DEFAULT_THETA
    lattice: LatticeSumParams = field(default_factory=LatticeSumParams)
    stencil_radius: float = 3.0
    min_stencil: int = 8
    projection_tolerance: float = 1e-12
    projection_max_iter: int = 50
    summation: SummationParams = field(default_factory=SummationParams)

    def __post_init__(self):
        if not self.stencil_radius > 0:
            raise ConfigurationError(f"stencil_radius must be positive, got {self.stencil_radius}", key="stencil_radius", value=self.stencil_radius)
        if self.min_stencil < BASIS_SIZE:
            raise ConfigurationError(f"min_stencil must be at least {BASIS_SIZE}, got {self.min_stencil}", key="min_stencil", value=self.min_stencil)
        if self.projection_max_iter < 1:
            raise ConfigurationError(f"projection max_iter must be at least 1, got {self.projection_max_iter}", key="max_iter", value=self.projection_max_iter)


class ChartFitter:
    """Weighted quadratic fits of node values in the chart coordinates of one axis.

    The stencil is every chart-k node whose projection lies within
    radius_ratio * h of the projection of z, on the same sheet as z.
    """

    def __init__(self, nodes, values, radius_ratio=3.0, min_stencil=8):
        self.nodes = nodes
        self.values = np.asarray(values, dtype=float)
        self.radius = radius_ratio * nodes.h
        self.min_stencil = min_stencil
        # nodes of another sheet with the same orientation lie farther away than this
        self.reach = self.radius / math.cos(nodes.theta)
        self._trees = {}

    def _tree(self, k):
        if k not in self._trees:
            members = self.nodes.chart(k)
            i, j = CHART_AXES[k]
            tree = cKDTree(self.nodes.pos[members][:, [i, j]]) if members.size else None
            self._trees[k] = (tree, members)
        return self._trees[k]

    def fit(self, z, normals, k):
        """Quadratic coefficients about each z (T, 3) in chart k.

        Returns (coeffs (T, 6), counts (T,)); coefficients are in units where the
        chart coordinates are scaled by h, NaN where fewer than min_stencil
        nodes qualify.
        """
        z = np.atleast_2d(z)
        tree, members = self._tree(k)
        coeffs = np.full((len(z), BASIS_SIZE), np.nan)
        if tree is None:
            return coeffs, np.zeros(len(z), dtype=int)
        i, j = CHART_AXES[k]
        count = min(MAX_NEIGHBOURS, members.size)
        dist, idx = tree.query(z[:, [i, j]], k=count, distance_upper_bound=self.radius)
        dist = dist.reshape(len(z), count)
        idx = idx.reshape(len(z), count)
        found = np.isfinite(dist)
        node = members[np.where(found, idx, 0)]
        same_sheet = (self.nodes.normal[node, k] * normals[:, None, k] > 0) & (
            np.linalg.norm(self.nodes.pos[node] - z[:, None, :], axis=-1) <= self.reach
        )
        use = found & same_sheet

        h = self.nodes.h
        a1 = (self.nodes.pos[node, i] - z[:, None, i]) / h
        a2 = (self.nodes.pos[node, j] - z[:, None, j]) / h
        basis = np.stack([np.ones_like(a1), a1, a2, a1 * a1, a1 * a2, a2 * a2], axis=-1)
        weight = np.where(use, np.exp(-(np.where(found, dist, 0.0) / (2.0 * h)) ** 2), 0.0)
        root_w = np.sqrt(weight)
        lhs = basis * root_w[..., None]
        # fit the deviation from the nearest node so a constant density has zero derivatives
        base = self.values[node[:, 0]]
        rhs = (self.values[node] - base[:, None]) * root_w
        counts = use.sum(axis=1)
        ok = counts >= self.min_stencil
        if np.any(ok):
            pinv = np.linalg.pinv(lhs[ok])
            coeffs[ok] = np.einsum("tbk,tk->tb", pinv, rhs[ok])
            coeffs[ok, 0] += base[ok]
        return coeffs, counts


def _derivatives(coeffs, h):
    """(value, d1, d2, d11, d12, d22) in chart coordinates from scaled coefficients."""
    c = coeffs
    return c[:, 0], c[:, 1] / h, c[:, 2] / h, 2.0 * c[:, 3] / h**2, c[:, 4] / h**2, 2.0 * c[:, 5] / h**2


def density_at(z, density, nodes, k, radius_ratio=3.0, min_stencil=8):
    """Density value at surface point(s) z from a fit over chart-k nodes."""
    pts = np.atleast_2d(np.asarray(z, dtype=float))
    fitter = ChartFitter(nodes, density.values, radius_ratio, min_stencil)
    n = _nearest_normals(nodes, pts)
    coeffs, counts = fitter.fit(pts, n, k)
    _raise_if_short(counts, min_stencil, k)
    value = coeffs[:, 0]
    return float(value[0]) if np.ndim(z) == 1 else value


def chart_derivatives(z, density, nodes, k, order=1, surface=None, radius_ratio=3.0, min_stencil=8, theta=DEFAULT_THETA):
    """Chart derivatives of the density at z from a fit over chart-k nodes.

    order 1: (d1, d2). order 2: (d1, d2, d11, d12, d22, Delta_S), which needs `surface`.
    """
    pts = np.atleast_2d(np.asarray(z, dtype=float))
    fitter = ChartFitter(nodes, density.values, radius_ratio, min_stencil)
    n = normal(surface, pts) if surface is not None else _nearest_normals(nodes, pts)
    coeffs, counts = fitter.fit(pts, n, k)
    _raise_if_short(counts, min_stencil, k)
    _, d1, d2, d11, d12, d22 = _derivatives(coeffs, nodes.h)
    if order == 1:
        out = (d1, d2)
    else:
        if surface is None:
            raise ValueError("second-order chart derivatives need the surface for Delta_S")
        lap = _surface_laplacian(surface, pts, k, d1, d2, d11, d12, d22, theta)
        out = (d1, d2, d11, d12, d22, lap)
    if np.ndim(z) == 1:
        return tuple(float(v[0]) for v in out)
    return out


def _nearest_normals(nodes, pts):
    _, idx = cKDTree(nodes.pos).query(pts)
    return nodes.normal[idx]


def _raise_if_short(counts, min_stencil, k):
    short = counts < min_stencil
    if np.any(short):
        worst = int(np.min(counts))
        raise InsufficientStencil(
            f"only {worst} chart-{k} nodes within the stencil radius (need {min_stencil})",
            chart=k,
            count=worst,
        )


def _surface_laplacian(surface, pts, k, d1, d2, d11, d12, d22, theta):
    g_inv, c = surface_laplacian_coeffs(surface, pts, k, theta=theta)
    return (g_inv[:, 0, 0] * d11 + 2.0 * g_inv[:, 0, 1] * d12 + g_inv[:, 1, 1] * d22
            + c[:, 0] * d1 + c[:, 1] * d2)


def target_charts(surface, z, n, h, theta):
    """Partition-of-unity weights, lattice offsets and inverse metrics at foot points z."""
    zeta = pou_weights(n, PouParams(theta=theta))
    nu = np.zeros((len(z), 3, 2))
    g_inv = np.broadcast_to(np.eye(2), (len(z), 3, 2, 2)).copy()
    for k in range(3):
        rows = np.flatnonzero(zeta[:, k] > 0)
        if rows.size:
            geom = chart_geometry(surface, z[rows], k, h, theta=theta)
            nu[rows, k] = geom.nu
            g_inv[rows, k] = geom.g_inv
    return TargetCharts(zeta=zeta, nu=nu, g_inv=g_inv)


def _frame(x, surface, delta, options):
    return closest_point(surface, np.atleast_2d(x), delta,
                         tol=options.projection_tolerance, max_iter=options.projection_max_iter)


def _values_at_foot(frame, fitter, nodes, options):
    """Density values at z from the chart with the largest |n_k|, falling back to the others."""
    value = np.full(len(frame.z), np.nan)
    order = np.argsort(-np.abs(frame.n), axis=1)
    for rank in range(3):
        for k in range(3):
            rows = np.flatnonzero(np.isnan(value) & (order[:, rank] == k))
            if rows.size:
                coeffs, _ = fitter.fit(frame.z[rows], frame.n[rows], k)
                value[rows] = coeffs[:, 0]
    missing = np.isnan(value)
    if np.any(missing):
        raise InsufficientStencil(
            f"no chart has {options.min_stencil} stencil nodes near {int(missing.sum())} foot points",
            chart=None,
            count=0,
        )
    return value


def single_layer_near(x, surface, nodes, density, delta, options=EvaluationOptions()):
    """Single layer at points x near the surface: raw sum + T1 + T2."""
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    frame = _frame(pts, surface, delta, options)
    smoothing = Smoothing(delta, NEAR)
    sources = SourceSet(nodes.pos, nodes.weight * density.values)
    raw = evaluate(pts, sources, smoothing, options.summation)

    fitter = ChartFitter(nodes, density.values, options.stencil_radius, options.min_stencil)
    psi_z = _values_at_foot(frame, fitter, nodes, options)
    charts = target_charts(surface, frame.z, frame.n, nodes.h, options.theta)
    first = t1(psi_z, frame.lam, delta, frame.H)
    second = t2(psi_z, frame.lam, delta, nodes.h, charts, options.lattice)
    zero = np.zeros(len(raw))
    return PotentialReport(raw_sum=raw, t1_or_n1=np.asarray(first), t2_or_n2=second, jump_term=zero,
                           total=raw + first + second, b=frame.b)


def _subtracted_double_sum(targets, nodes, density, phi_at, smoothing, options):
    """sum w_y dG/dn_y [phi(y) - phi_at], as S1 - phi_at S0 so constants cancel exactly."""
    w = nodes.weight
    s1 = evaluate(targets, SourceSet(nodes.pos, (w * density.values)[:, None] * nodes.normal), smoothing, options.summation)
    s0 = evaluate(targets, SourceSet(nodes.pos, w[:, None] * nodes.normal), smoothing, options.summation)
    return s1 - phi_at * s0


def double_layer_near(x, surface, nodes, density, delta, options=EvaluationOptions()):
    """Double layer at points x near the surface: subtracted raw sum + chi phi(z) + N1 + N2."""
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    frame = _frame(pts, surface, delta, options)
    smoothing = Smoothing(delta, NEAR)
    h = nodes.h

    fitter = ChartFitter(nodes, density.values, options.stencil_radius, options.min_stencil)
    phi_z = _values_at_foot(frame, fitter, nodes, options)
    raw = _subtracted_double_sum(pts, nodes, density, phi_z, smoothing, options)

    level = surface.phi(pts)
    chi = np.where(level < 0, 1.0, np.where(level > 0, 0.0, 0.5))
    jump = chi * phi_z

    charts = target_charts(surface, frame.z, frame.n, h, options.theta)
    dphi = np.zeros((len(pts), 3, 2))
    available = np.zeros((len(pts), 3), dtype=bool)
    lap_chart = np.full((len(pts), 3), np.nan)
    for k in range(3):
        rows = np.flatnonzero(charts.zeta[:, k] > 0)
        if not rows.size:
            continue
        coeffs, counts = fitter.fit(frame.z[rows], frame.n[rows], k)
        ok = counts >= options.min_stencil
        if not np.all(ok):
            # zeta_k is tiny where a chart runs out of nodes; drop its share
            logger.warning(f"chart {k}: {int((~ok).sum())} targets lack stencil nodes, N2 contribution set to 0")
        _, d1, d2, d11, d12, d22 = _derivatives(coeffs, h)
        dphi[rows, k, 0] = d1
        dphi[rows, k, 1] = d2
        available[rows, k] = ok
        if np.any(ok):
            lap_chart[rows[ok], k] = _surface_laplacian(
                surface, frame.z[rows[ok]], k, d1[ok], d2[ok], d11[ok], d12[ok], d22[ok], options.theta
            )

    # Delta_S from the chart with the largest |n_k| that has a fit
    lap = np.full(len(pts), np.nan)
    order = np.argsort(-np.abs(frame.n), axis=1)
    rows = np.arange(len(pts))
    for rank in range(3):
        candidate = lap_chart[rows, order[:, rank]]
        lap = np.where(np.isnan(lap), candidate, lap)
    if np.any(np.isnan(lap)):
        raise InsufficientStencil(
            f"surface Laplacian unavailable at {int(np.isnan(lap).sum())} foot points",
            chart=None,
            count=0,
        )

    first = n1(lap, frame.lam, delta)
    second = n2(dphi, frame.lam, delta, h, charts, options.lattice, available=available)
    return PotentialReport(raw_sum=raw, t1_or_n1=np.asarray(first), t2_or_n2=second, jump_term=jump,
                           total=raw + jump + first + second, b=frame.b)


def _on_targets(nodes, target_nodes):
    return np.arange(len(nodes)) if target_nodes is None else np.asarray(target_nodes, dtype=int)


def _on_surface_options(options):
    """The fifth-order kernels are summed directly."""
    if options.summation.backend == DIRECT:
        return options
    logger.warning(f"{options.summation.backend} summation does not support on-surface kernels, using direct")
    return replace(options, summation=replace(options.summation, backend=DIRECT))


def single_layer_on(target_nodes, surface, nodes, density, delta, options=EvaluationOptions()):
    """Single layer at quadrature nodes (indices; None for all): fifth-order kernel + on-surface T2."""
    options = _on_surface_options(options)
    idx = _on_targets(nodes, target_nodes)
    smoothing = Smoothing(delta, ON_SURFACE)
    sources = SourceSet(nodes.pos, nodes.weight * density.values)
    raw = evaluate(nodes.pos[idx], sources, smoothing, options.summation)
    psi_x = density.values[idx]
    charts = target_charts(surface, nodes.pos[idx], nodes.normal[idx], nodes.h, options.theta)
    second = t2_on_surface(psi_x, delta, nodes.h, charts, options.lattice)
    zero = np.zeros(len(idx))
    return PotentialReport(raw_sum=raw, t1_or_n1=zero, t2_or_n2=second, jump_term=zero,
                           total=raw + second, b=zero.copy())


def double_layer_on(target_nodes, surface, nodes, density, delta, options=EvaluationOptions()):
    """Double layer at quadrature nodes: fifth-order subtracted sum + phi(x)/2, no corrections."""
    options = _on_surface_options(options)
    idx = _on_targets(nodes, target_nodes)
    smoothing = Smoothing(delta, ON_SURFACE)
    phi_x = density.values[idx]
    raw = _subtracted_double_sum(nodes.pos[idx], nodes, density, phi_x, smoothing, options)
    jump = 0.5 * phi_x
    zero = np.zeros(len(idx))
    return PotentialReport(raw_sum=raw, t1_or_n1=zero, t2_or_n2=zero.copy(), jump_term=jump,
                           total=raw + jump, b=zero.copy())
