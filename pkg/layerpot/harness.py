"""
Convergence harness.

The test potential is u = (sin x1 + sin x2) exp(x3) inside the surface and
u = 0 outside. By Green's representation u = w - v, with w the double layer
of phi = u and v the single layer of psi = du/dn (interior limit). On the
surface the representation gives u/2.
"""

import math
import time
import logging
from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import ConfigurationError
from .settings import validate_theta
from .surfaces import make_surface
from .level_surface import normal
from .surface_quadrature import generate_nodes, grid_ticks, sample_grid, dump_nodes
from .grid_embedding import BoxGrid, classify_nodes, target_mask, extend_potential
from .layer_potentials import (
    Density,
    EvaluationOptions,
    single_layer_near,
    double_layer_near,
    single_layer_on,
    double_layer_on,
)
from .corrections import LatticeSumParams
from .summation import BACKENDS, SummationParams, TreecodeParams

logger = logging.getLogger(__name__)

MODES = ("near", "on", "both")
# near targets are irregular nodes and their neighbours, all within 2h of the surface
BIN_EDGES = (0.0, 1.0, 2.0)


def u_inside(x):
    x = np.asarray(x, dtype=float)
    return (np.sin(x[..., 0]) + np.sin(x[..., 1])) * np.exp(x[..., 2])


def grad_u_inside(x):
    x = np.asarray(x, dtype=float)
    e = np.exp(x[..., 2])
    return np.stack([np.cos(x[..., 0]) * e, np.cos(x[..., 1]) * e, (np.sin(x[..., 0]) + np.sin(x[..., 1])) * e], axis=-1)


def exact_solution(x, surface):
    """u_inside in the domain, 0 outside (and half the interior value on the surface)."""
    x = np.asarray(x, dtype=float)
    level = surface.phi(x)
    inside = u_inside(x)
    return np.where(level < 0, inside, np.where(level > 0, 0.0, 0.5 * inside))


def densities(y, n):
    """(phi, psi) = (u_inside, n . grad u_inside) at surface points y with normals n."""
    return u_inside(y), np.einsum("...i,...i->...", n, grad_u_inside(y))


@dataclass
class CaseConfig:
    surface: str = "rot-ellipsoid"
    n: int = 64
    delta_ratio: float = 2.0
    theta_degrees: float = 70.0
    mode: str = "both"
    backend: str = "direct"
    half_width: float = 1.1
    output: str = None
    dump_nodes: str = None

    def validate(self):
        if self.n < 8 or self.n % 2:
            raise ConfigurationError(f"N must be an even number of cells of at least 8, got {self.n}", key="n", value=self.n)
        if not self.delta_ratio > 0:
            raise ConfigurationError(f"delta/h must be positive, got {self.delta_ratio}", key="delta_ratio", value=self.delta_ratio)
        if self.mode not in MODES:
            raise ConfigurationError(f"mode must be one of {MODES}, got {self.mode!r}", key="mode", value=self.mode)
        if self.backend not in BACKENDS:
            raise ConfigurationError(f"backend must be one of {BACKENDS}, got {self.backend!r}", key="backend", value=self.backend)
        validate_theta(math.radians(self.theta_degrees))
        return self

    @property
    def h(self):
        return 2.0 * self.half_width / self.n

    @property
    def theta(self):
        return math.radians(self.theta_degrees)


@dataclass
class ErrorRow:
    e2_irreg: float = math.nan
    einf_irreg: float = math.nan
    e2_reg: float = math.nan
    einf_reg: float = math.nan
    e2_quad: float = math.nan
    einf_quad: float = math.nan

    def as_tuple(self):
        return tuple(asdict(self).values())


@dataclass
class CaseResult:
    config: CaseConfig
    errors: ErrorRow
    nodes: int
    targets: int
    seconds: float
    bins: dict = field(default_factory=dict)


def norms(errors):
    """(L2 with equal point weights, Linf); NaN for an empty set."""
    errors = np.abs(np.asarray(errors, dtype=float))
    if not errors.size:
        return math.nan, math.nan
    return float(np.sqrt(np.mean(errors**2))), float(np.max(errors))


def bin_errors(errors, b, h, edges=BIN_EDGES):
    """Max |error| per |b|/h bin [edges[i], edges[i+1])."""
    ratio = np.abs(b) / h
    out = {}
    for lo, hi in zip(edges[:-1], edges[1:]):
        sel = (ratio >= lo) & (ratio < hi)
        out[(lo, hi)] = float(np.max(np.abs(errors[sel]))) if np.any(sel) else math.nan
    return out


def bin_ratio(bins):
    """Largest ratio between the max errors of neighbouring populated bins; NaN with fewer than two."""
    values = [v for v in bins.values() if not math.isnan(v) and v > 0]
    if len(values) < 2:
        return math.nan
    return max(max(a, b) / min(a, b) for a, b in zip(values[:-1], values[1:]))


def evaluation_options(settings, theta, backend):
    """EvaluationOptions from the [corrections], [projection], [summation] and [treecode] sections."""
    corrections = settings["corrections"]
    treecode = settings["treecode"]
    summation = settings["summation"]
    try:
        return _options(settings, corrections, treecode, summation, theta, backend)
    except ValueError as e:
        # getint / getfloat on text that is not a number
        raise ConfigurationError(f"unreadable value in config.ini: {e}") from e


def _options(settings, corrections, treecode, summation, theta, backend):
    return EvaluationOptions(
        theta=theta,
        lattice=LatticeSumParams(
            cutoff=corrections.getint("lattice_cutoff"),
            early_exit=corrections.getboolean("early_exit"),
        ),
        stencil_radius=corrections.getfloat("stencil_radius"),
        min_stencil=corrections.getint("min_stencil"),
        projection_tolerance=settings["projection"].getfloat("tolerance"),
        projection_max_iter=settings["projection"].getint("max_iter"),
        summation=SummationParams(
            backend=backend,
            chunk_pairs=summation.getint("chunk_pairs"),
            workers=summation.getint("workers"),
            treecode=TreecodeParams(
                degree=treecode.getint("degree"),
                separation=treecode.getfloat("separation"),
                leaf_capacity=treecode.getint("leaf_capacity"),
            ),
        ),
    )


def near_errors(surface, grid, nodes, phi_density, psi_density, delta, options, grid_values):
    """u_{h,delta} at irregular nodes and their stencils, then u_h by extension.

    Returns (irregular errors, errors at every target, b at every target,
    regular-node errors, target count).
    """
    irregular = classify_nodes(grid, surface, grid_values)
    targets = target_mask(grid, irregular)
    index = np.argwhere(targets)
    points = grid.points(index)
    logger.info(f"Evaluating near-surface potential at {len(points)} grid nodes")

    w = double_layer_near(points, surface, nodes, phi_density, delta, options)
    v = single_layer_near(points, surface, nodes, psi_density, delta, options)
    u_hd = w.total - v.total

    exact = exact_solution(points, surface)
    on_irregular = irregular[tuple(index.T)]
    target_errors = u_hd - exact
    irregular_errors = target_errors[on_irregular]

    values = np.full(grid.shape, np.nan)
    values[tuple(index.T)] = u_hd
    u_h = extend_potential(grid, values, irregular)

    regular = ~irregular
    regular[0, :, :] = regular[-1, :, :] = False
    regular[:, 0, :] = regular[:, -1, :] = False
    regular[:, :, 0] = regular[:, :, -1] = False
    reg_index = np.argwhere(regular)
    reg_exact = exact_solution(grid.points(reg_index), surface)
    regular_errors = u_h[regular] - reg_exact
    return irregular_errors, target_errors, w.b, regular_errors, len(points)


def on_errors(surface, nodes, phi_density, psi_density, delta, options):
    """Errors of w - v against u/2 at every quadrature node."""
    logger.info(f"Evaluating on-surface potential at {len(nodes)} quadrature nodes")
    w = double_layer_on(None, surface, nodes, phi_density, delta, options)
    v = single_layer_on(None, surface, nodes, psi_density, delta, options)
    return w.total - v.total - 0.5 * u_inside(nodes.pos)


def run_case(config, settings):
    """Run one case of the convergence study and return its CaseResult."""
    config.validate()
    started = time.perf_counter()
    logger.info(f"Starting case {asdict(config)}")
    effective = {section: dict(settings[section]) for section in settings.sections()}
    logger.debug(f"Effective settings: {effective}")

    surface = make_surface(config.surface)
    grid = BoxGrid(half_width=config.half_width, n=config.n)
    h = grid.h
    delta = config.delta_ratio * h
    options = evaluation_options(settings, config.theta, config.backend)

    grid_values = sample_grid(surface, grid_ticks(h, grid.half_width))
    nodes = generate_nodes(
        surface, h, config.theta, grid.half_width,
        root_tolerance=settings["quadrature"].getfloat("root_tolerance"),
        values=grid_values,
    )
    if config.dump_nodes:
        dump_nodes(nodes, config.dump_nodes)

    phi_vals, psi_vals = densities(nodes.pos, normal(surface, nodes.pos))
    phi_density = Density(phi_vals)
    psi_density = Density(psi_vals)

    errors = ErrorRow()
    bins = {}
    targets = 0
    if config.mode in ("near", "both"):
        irr, near, b, reg, targets = near_errors(surface, grid, nodes, phi_density, psi_density, delta, options, grid_values)
        errors.e2_irreg, errors.einf_irreg = norms(irr)
        errors.e2_reg, errors.einf_reg = norms(reg)
        bins = bin_errors(near, b, h)
        logger.info(f"Largest ratio between neighbouring |b|/h bins: {bin_ratio(bins):.2f}")
    if config.mode in ("on", "both"):
        quad = on_errors(surface, nodes, phi_density, psi_density, delta, options)
        errors.e2_quad, errors.einf_quad = norms(quad)

    seconds = time.perf_counter() - started
    logger.info(f"Case {config.surface} N={config.n} delta/h={config.delta_ratio}: {errors} in {seconds:.1f}s")
    return CaseResult(config=config, errors=errors, nodes=len(nodes), targets=targets, seconds=seconds, bins=bins)
