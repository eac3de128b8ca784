"""
Implicit surfaces {phi = 0} and the differential geometry the layer potential
corrections need.

Conventions used throughout layerpot:
- phi < 0 inside the domain, phi > 0 outside, so grad(phi)/|grad(phi)| is the
  outward normal.
- Mean curvature H = (k1 + k2)/2 with 2H = -div(n); the unit sphere has H = -1.
- Coordinate axes are 0-based (axis 2 is x3). The Monge chart for axis k uses
  the two remaining coordinates in increasing order as (alpha1, alpha2).

All functions accept a single point of shape (3,) or a stack of shape (T, 3)
and are pure functions of the (immutable) surface description.
"""

import math
import logging
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .errors import DegenerateGradientError, ProjectionError, ChartConditionError

logger = logging.getLogger(__name__)

DEFAULT_THETA = math.radians(70.0)

# in-plane coordinate pairs for each projection axis
CHART_AXES = {0: (1, 2), 1: (0, 2), 2: (0, 1)}


class LevelSurface:
    """A closed surface given as the zero set of phi.

    Subclasses implement phi, grad and hess on arrays of shape (..., 3) and
    set `bbox` to a pair of corners enclosing the surface.
    """

    name = "surface"
    bbox = (np.array([-1.0, -1.0, -1.0]), np.array([1.0, 1.0, 1.0]))
    # typical |grad phi|, used to scale the degenerate-gradient threshold
    gradient_scale = 1.0

    def phi(self, x):
        raise NotImplementedError

    def grad(self, x):
        raise NotImplementedError

    def hess(self, x):
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}({self.name!r})"


class SampledLevelSurface(LevelSurface):
    """A level set known only through values on a uniform grid.

    phi is the cubic-spline interpolant of the samples; grad and hess are
    centered differences of that interpolant.
    """

    def __init__(self, values, origin, spacing, name="sampled"):
        self.values = np.asarray(values, dtype=float)
        self.origin = np.asarray(origin, dtype=float)
        self.spacing = float(spacing)
        self.name = name
        axes = [self.origin[i] + self.spacing * np.arange(size) for i, size in enumerate(self.values.shape)]
        self.interpolant = RegularGridInterpolator(axes, self.values, method="cubic", bounds_error=False, fill_value=None)
        upper = self.origin + self.spacing * (np.array(self.values.shape) - 1)
        self.bbox = (self.origin.copy(), upper)
        self.step = 1e-3 * self.spacing

    @classmethod
    def from_surface(cls, surface, half_width, n):
        """Sample an analytic surface on the (n+1)^3 nodes of (-L, L)^3."""
        ticks = np.linspace(-half_width, half_width, n + 1)
        grid = np.stack(np.meshgrid(ticks, ticks, ticks, indexing="ij"), axis=-1)
        values = surface.phi(grid)
        origin = np.full(3, -half_width)
        return cls(values, origin, 2.0 * half_width / n, name=f"sampled-{surface.name}")

    def phi(self, x):
        x = np.asarray(x, dtype=float)
        return self.interpolant(x.reshape(-1, 3)).reshape(x.shape[:-1])

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        out = np.empty(x.shape)
        for i in range(3):
            e = np.zeros(3)
            e[i] = self.step
            out[..., i] = (self.phi(x + e) - self.phi(x - e)) / (2 * self.step)
        return out

    def hess(self, x):
        x = np.asarray(x, dtype=float)
        out = np.empty(x.shape + (3,))
        step = 10 * self.step
        for i in range(3):
            e = np.zeros(3)
            e[i] = step
            out[..., :, i] = (self.grad(x + e) - self.grad(x - e)) / (2 * step)
        return 0.5 * (out + np.swapaxes(out, -1, -2))


@dataclass
class NearPointFrame:
    """x = z + b*n, with lam = b/delta and H the mean curvature at z."""

    z: np.ndarray
    b: np.ndarray
    n: np.ndarray
    lam: np.ndarray
    H: np.ndarray


@dataclass
class ChartGeometry:
    """Monge-patch data for projection axis `axis` at surface points.

    f_grad and f_hess are the derivatives of x_axis = f(alpha1, alpha2).
    """

    axis: int
    g: np.ndarray
    g_inv: np.ndarray
    sqrt_g: np.ndarray
    nu: np.ndarray
    gamma: np.ndarray
    f_grad: np.ndarray
    f_hess: np.ndarray
    mean_curvature: np.ndarray
    gauss_curvature: np.ndarray


def _as_points(x):
    x = np.asarray(x, dtype=float)
    return np.atleast_2d(x), x.ndim == 1


def _check_gradient(surface, x, grad_norm):
    threshold = 1e-13 * surface.gradient_scale
    bad = grad_norm < threshold
    if np.any(bad):
        point = np.atleast_2d(x)[np.flatnonzero(np.atleast_1d(bad))[0]]
        raise DegenerateGradientError(
            f"|grad phi| below {threshold:.1e} at {point}; surface is under-resolved there",
            point=point,
            gradient_norm=float(np.min(grad_norm)),
        )


def normal(surface, x):
    """Unit outward normal grad(phi)/|grad(phi)|."""
    pts, single = _as_points(x)
    g = surface.grad(pts)
    norm = np.linalg.norm(g, axis=-1)
    _check_gradient(surface, pts, norm)
    n = g / norm[:, None]
    return n[0] if single else n


def mean_curvature(surface, x):
    """Level-set mean curvature, 2H = -|grad phi|^-3 (phi_ii phi_j^2 - phi_i phi_j phi_ij)."""
    pts, single = _as_points(x)
    g = surface.grad(pts)
    hs = surface.hess(pts)
    norm = np.linalg.norm(g, axis=-1)
    _check_gradient(surface, pts, norm)
    trace = np.trace(hs, axis1=-2, axis2=-1)
    ghg = np.einsum("ti,tij,tj->t", g, hs, g)
    H = -(trace * norm**2 - ghg) / (2.0 * norm**3)
    return H[0] if single else H


def closest_point(surface, x, delta, tol=1e-12, max_iter=50):
    """Project points onto the surface and build their NearPointFrame.

    Damped Newton on the Lagrange system
        z - x + mu*grad(phi)(z) = 0,  phi(z) = 0
    started from one Newton step along grad(phi) from x.
    """
    pts, single = _as_points(x)
    count = len(pts)

    g0 = surface.grad(pts)
    g0_sq = np.einsum("ti,ti->t", g0, g0)
    _check_gradient(surface, pts, np.sqrt(g0_sq))
    z = pts - (surface.phi(pts) / g0_sq)[:, None] * g0
    gz = surface.grad(z)
    mu = np.einsum("ti,ti->t", pts - z, gz) / np.einsum("ti,ti->t", gz, gz)

    def residual(zz, mm):
        gg = surface.grad(zz)
        r = np.empty((len(zz), 4))
        r[:, :3] = zz - pts[active] + mm[:, None] * gg
        r[:, 3] = surface.phi(zz)
        return r, gg

    active = np.arange(count)
    iterations = 0
    worst = 0.0
    while active.size and iterations <= max_iter:
        r, gg = residual(z[active], mu[active])
        res_norm = np.max(np.abs(r), axis=1)
        done = res_norm <= tol
        if np.all(done):
            active = active[:0]
            break
        active = active[~done]
        r, gg, res_norm = r[~done], gg[~done], res_norm[~done]
        if iterations == max_iter:
            worst = float(np.max(res_norm))
            break

        za, ma = z[active], mu[active]
        jac = np.zeros((len(active), 4, 4))
        jac[:, :3, :3] = np.eye(3) + ma[:, None, None] * surface.hess(za)
        jac[:, :3, 3] = gg
        jac[:, 3, :3] = gg
        step = np.linalg.solve(jac, -r[..., None])[..., 0]

        # backtrack until the residual decreases
        alpha = np.ones(len(active))
        pending = np.ones(len(active), dtype=bool)
        for _ in range(12):
            zt = za + alpha[:, None] * step[:, :3]
            mt = ma + alpha * step[:, 3]
            rt, _ = residual(zt, mt)
            better = np.max(np.abs(rt), axis=1) < res_norm
            pending &= ~better
            if not np.any(pending):
                break
            alpha = np.where(pending, 0.5 * alpha, alpha)
        z[active] = za + alpha[:, None] * step[:, :3]
        mu[active] = ma + alpha * step[:, 3]
        iterations += 1

    if active.size:
        point = pts[active[0]]
        logger.error(f"Closest point failed for {active.size} points, first at {point}")
        raise ProjectionError(
            f"closest-point iteration did not converge in {max_iter} steps at {point}",
            point=point,
            iterations=max_iter,
            residual=worst,
        )

    n = normal(surface, z)
    b = np.einsum("ti,ti->t", pts - z, n)
    H = mean_curvature(surface, z)
    frame = NearPointFrame(z=z, b=b, n=n, lam=b / delta, H=H)
    if single:
        return NearPointFrame(z=z[0], b=b[0], n=n[0], lam=frame.lam[0], H=H[0])
    return frame


def chart_geometry(surface, z, axis, h, theta=DEFAULT_THETA):
    """Metric, inverse metric, lattice offsets and curvatures of the axis chart at z."""
    pts, single = _as_points(z)
    i, j = CHART_AXES[axis]
    g_phi = surface.grad(pts)
    h_phi = surface.hess(pts)
    norm = np.linalg.norm(g_phi, axis=-1)
    _check_gradient(surface, pts, norm)

    gamma = np.abs(g_phi[:, axis]) / norm
    bad = gamma < math.cos(theta) * (1 - 1e-12)
    if np.any(bad):
        first = np.flatnonzero(bad)[0]
        raise ChartConditionError(
            f"chart {axis} requested at {pts[first]} where |n.e_k| = {gamma[first]:.4f} < cos(theta)",
            point=pts[first],
            axis=axis,
            gamma=float(gamma[first]),
        )

    pk = g_phi[:, axis]
    f1 = -g_phi[:, i] / pk
    f2 = -g_phi[:, j] / pk
    f_grad = np.stack([f1, f2], axis=-1)

    def f_second(a, fa, b, fb):
        return -(h_phi[:, a, b] + h_phi[:, a, axis] * fb + h_phi[:, b, axis] * fa
                 + h_phi[:, axis, axis] * fa * fb) / pk

    f11 = f_second(i, f1, i, f1)
    f12 = f_second(i, f1, j, f2)
    f22 = f_second(j, f2, j, f2)
    f_hess = np.stack([np.stack([f11, f12], -1), np.stack([f12, f22], -1)], -2)

    det = 1.0 + f1**2 + f2**2
    g = np.stack([np.stack([1 + f1**2, f1 * f2], -1), np.stack([f1 * f2, 1 + f2**2], -1)], -2)
    g_inv = np.stack([np.stack([1 + f2**2, -f1 * f2], -1), np.stack([-f1 * f2, 1 + f1**2], -1)], -2)
    g_inv = g_inv / det[:, None, None]

    # + when x_axis > f(alpha) is the outside, i.e. phi increases along e_axis
    sign = np.sign(pk)
    H = sign * 0.5 * det**-1.5 * ((1 + f2**2) * f11 + (1 + f1**2) * f22 - 2 * f1 * f2 * f12)
    K = (f11 * f22 - f12**2) / det**2

    alpha = pts[:, [i, j]] / h
    nu = alpha - np.floor(alpha)
    nu[nu >= 1.0] = 0.0

    geom = ChartGeometry(
        axis=axis, g=g, g_inv=g_inv, sqrt_g=np.sqrt(det), nu=nu, gamma=gamma,
        f_grad=f_grad, f_hess=f_hess, mean_curvature=H, gauss_curvature=K,
    )
    if single:
        return ChartGeometry(
            axis=axis, g=g[0], g_inv=g_inv[0], sqrt_g=geom.sqrt_g[0], nu=nu[0], gamma=gamma[0],
            f_grad=f_grad[0], f_hess=f_hess[0], mean_curvature=H[0], gauss_curvature=K[0],
        )
    return geom


def surface_laplacian_coeffs(surface, z, axis, theta=DEFAULT_THETA):
    """Return (g_inv, c) with Delta_S u = sum g^ij d_i d_j u + sum c_i d_i u in the axis chart.

    c_i = -/+ (2/sqrt(g)) H f_i, upper sign when phi increases along e_axis.
    """
    pts, single = _as_points(z)
    geom = chart_geometry(surface, pts, axis, h=1.0, theta=theta)
    H = mean_curvature(surface, pts)
    sign = np.sign(surface.grad(pts)[:, axis])
    c = -(sign * 2.0 * H / geom.sqrt_g)[:, None] * geom.f_grad
    if single:
        return geom.g_inv[0], c[0]
    return geom.g_inv, c


def resolution_limit(surface, points, theta=DEFAULT_THETA):
    """C1 = min |grad phi|, C2 = max ||D^2 phi||_2 over points, and h0 = 2 C1 cos(theta) / C2."""
    pts, _ = _as_points(points)
    c1 = float(np.min(np.linalg.norm(surface.grad(pts), axis=-1)))
    c2 = float(np.max(np.linalg.norm(surface.hess(pts), ord=2, axis=(-2, -1))))
    h0 = 2.0 * c1 * math.cos(theta) / c2 if c2 > 0 else math.inf
    return c1, c2, h0
