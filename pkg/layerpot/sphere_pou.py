"""Partition of unity on the unit sphere, composed with the surface normal."""

import math
from dataclasses import dataclass

import numpy as np

from .settings import validate_theta


@dataclass(frozen=True)
class PouParams:
    theta: float = math.radians(70.0)

    def __post_init__(self):
        validate_theta(self.theta)

    @classmethod
    def from_degrees(cls, degrees):
        return cls(theta=math.radians(degrees))


def bump(r):
    """exp(r^2 / (r^2 - 1)) on |r| < 1, zero elsewhere."""
    r = np.asarray(r, dtype=float)
    r2 = r * r
    inside = r2 < 1.0
    out = np.zeros_like(r2)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        out[inside] = np.exp(r2[inside] / (r2[inside] - 1.0))
    return out if out.ndim else float(out)


def pou_weights(u, params=PouParams()):
    """(sigma_1, sigma_2, sigma_3) for unit vectors u of shape (3,) or (M, 3)."""
    u = np.asarray(u, dtype=float)
    cosines = np.clip(np.abs(u), 0.0, 1.0)
    angles = np.arccos(cosines)
    b = bump(angles / params.theta)
    total = np.sum(b, axis=-1, keepdims=True)
    assert np.all(total > 0), "partition of unity denominator vanished; theta too small"
    return b / total
