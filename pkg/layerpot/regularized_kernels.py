"""
Regularized Laplace kernels G = -1/(4 pi r) and grad G(y) = y/(4 pi r^3).

"near" kernels (third order) are used off the surface, "on_surface" kernels
(fifth order) at quadrature nodes. Each is written through radial factors
that stay finite at r = 0:

    G_delta(y)      = -single_factor(r/delta) / (4 pi delta)
    grad G_delta(y) =  y * grad_factor(r/delta) / (4 pi delta^3)
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

NEAR = "near"
ON_SURFACE = "on_surface"
VARIANTS = (NEAR, ON_SURFACE)

TWO_OVER_SQRT_PI = 2.0 / math.sqrt(math.pi)
SERIES_CUTOFF = 1e-4


@dataclass(frozen=True)
class Smoothing:
    delta: float
    variant: str = NEAR

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown smoothing variant {self.variant!r}")


def single_factor(rho, variant=NEAR):
    """s(rho)/rho for the single-layer smoothing s."""
    rho = np.asarray(rho, dtype=float)
    small = rho < SERIES_CUTOFF
    safe = np.where(small, 1.0, rho)
    rho2 = rho * rho
    if variant == NEAR:
        full = erf(safe) / safe
        series = TWO_OVER_SQRT_PI * (1.0 - rho2 / 3.0)
    else:
        poly = TWO_OVER_SQRT_PI / 3.0 * (5.0 - 2.0 * safe**2) * np.exp(-safe**2)
        full = erf(safe) / safe + poly
        series = TWO_OVER_SQRT_PI * (8.0 / 3.0 - 8.0 * rho2 / 3.0)
    return np.where(small, series, full)


def grad_factor(rho, variant=NEAR):
    """s(rho)/rho^3 for the gradient smoothing s."""
    rho = np.asarray(rho, dtype=float)
    small = rho < SERIES_CUTOFF
    safe = np.where(small, 1.0, rho)
    rho2 = rho * rho
    gauss = np.exp(-safe**2)
    if variant == NEAR:
        s = erf(safe) - TWO_OVER_SQRT_PI * safe * gauss
        series = TWO_OVER_SQRT_PI * (2.0 / 3.0 - 2.0 * rho2 / 5.0)
    else:
        s = erf(safe) - TWO_OVER_SQRT_PI * (safe - 2.0 * safe**3 / 3.0) * gauss
        series = TWO_OVER_SQRT_PI * (4.0 / 3.0 - 16.0 * rho2 / 15.0)
    return np.where(small, series, s / safe**3)


def single_kernel(y, smoothing):
    """G_delta at offsets y of shape (..., 3)."""
    r = np.linalg.norm(np.asarray(y, dtype=float), axis=-1)
    out = -single_factor(r / smoothing.delta, smoothing.variant) / (4.0 * math.pi * smoothing.delta)
    return out if out.ndim else float(out)


def grad_kernel(y, smoothing):
    """grad G_delta at offsets y of shape (..., 3); zero at y = 0."""
    y = np.asarray(y, dtype=float)
    r = np.linalg.norm(y, axis=-1)
    factor = grad_factor(r / smoothing.delta, smoothing.variant) / (4.0 * math.pi * smoothing.delta**3)
    return y * factor[..., None]


def laplace_single(y):
    """Unregularized G(y) = -1/(4 pi |y|)."""
    return -1.0 / (4.0 * math.pi * np.linalg.norm(np.asarray(y, dtype=float), axis=-1))


def laplace_grad(y):
    """Unregularized grad G(y) = y / (4 pi |y|^3)."""
    y = np.asarray(y, dtype=float)
    r = np.linalg.norm(y, axis=-1)
    return y / (4.0 * math.pi * r[..., None] ** 3)
