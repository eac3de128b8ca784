"""
Built-in implicit surfaces and the surfaces.json catalogue.

Every surface has phi < 0 inside and analytic first and second derivatives.
"""

import os
import json
import math
import logging

import numpy as np

from .errors import ConfigurationError
from .level_surface import LevelSurface
from .settings import parent_dir

logger = logging.getLogger(__name__)

surfaces_file_path = os.path.join(parent_dir, "surfaces.json")


def rotation_matrix(degrees_x, degrees_y, degrees_z):
    """Rz(degrees_z) @ Ry(degrees_y) @ Rx(degrees_x)."""
    ax, ay, az = (math.radians(d) for d in (degrees_x, degrees_y, degrees_z))
    rx = np.array([[1, 0, 0], [0, math.cos(ax), -math.sin(ax)], [0, math.sin(ax), math.cos(ax)]])
    ry = np.array([[math.cos(ay), 0, math.sin(ay)], [0, 1, 0], [-math.sin(ay), 0, math.cos(ay)]])
    rz = np.array([[math.cos(az), -math.sin(az), 0], [math.sin(az), math.cos(az), 0], [0, 0, 1]])
    return rz @ ry @ rx


class Quadric(LevelSurface):
    """phi = x^T A x - 1 with A symmetric positive definite."""

    def __init__(self, matrix, name, extent):
        self.matrix = np.asarray(matrix, dtype=float)
        self.name = name
        self.bbox = (np.full(3, -extent), np.full(3, extent))

    def phi(self, x):
        x = np.asarray(x, dtype=float)
        return np.einsum("...i,ij,...j->...", x, self.matrix, x) - 1.0

    def grad(self, x):
        return 2.0 * np.asarray(x, dtype=float) @ self.matrix

    def hess(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(2.0 * self.matrix, x.shape + (3,)).copy()


class Ellipsoid(Quadric):
    """Ellipsoid with semi-axes `axes`, rotated by `rotation` (body frame y = R^T x)."""

    def __init__(self, axes=(1.0, 0.8, 0.6), rotation=None, name="ellipsoid"):
        self.axes = tuple(float(a) for a in axes)
        self.rotation = np.eye(3) if rotation is None else np.asarray(rotation, dtype=float)
        diag = np.diag([1.0 / a**2 for a in self.axes])
        super().__init__(self.rotation @ diag @ self.rotation.T, name, max(self.axes))


class Sphere(Quadric):
    def __init__(self, radius=1.0, name="sphere"):
        self.radius = float(radius)
        super().__init__(np.eye(3) / self.radius**2, name, self.radius)


class Plane(LevelSurface):
    """The plane x3 = offset; only used for local geometry checks."""

    name = "plane"

    def __init__(self, offset=0.0):
        self.offset = float(offset)

    def phi(self, x):
        return np.asarray(x, dtype=float)[..., 2] - self.offset

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape)
        out[..., 2] = 1.0
        return out

    def hess(self, x):
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape + (3,))


class Torus(LevelSurface):
    """(sqrt(x1^2 + x2^2) - c)^2 + x3^2 - a^2 with tube radius a and center radius c."""

    def __init__(self, a=0.3, c=0.7, name="torus"):
        self.a = float(a)
        self.c = float(c)
        self.name = name
        r = self.a + self.c
        self.bbox = (np.array([-r, -r, -self.a]), np.array([r, r, self.a]))

    def _rho(self, x):
        # the symmetry axis is far outside the surface; keep it finite there
        return np.maximum(np.hypot(x[..., 0], x[..., 1]), 1e-300)

    def phi(self, x):
        x = np.asarray(x, dtype=float)
        rho = np.hypot(x[..., 0], x[..., 1])
        return (rho - self.c) ** 2 + x[..., 2] ** 2 - self.a**2

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        rho = self._rho(x)
        factor = 2.0 * (rho - self.c) / rho
        return np.stack([factor * x[..., 0], factor * x[..., 1], 2.0 * x[..., 2]], axis=-1)

    def hess(self, x):
        x = np.asarray(x, dtype=float)
        rho = self._rho(x)
        out = np.zeros(x.shape + (3,))
        c_rho3 = self.c / rho**3
        base = 1.0 - self.c / rho
        out[..., 0, 0] = 2.0 * (base + c_rho3 * x[..., 0] ** 2)
        out[..., 1, 1] = 2.0 * (base + c_rho3 * x[..., 1] ** 2)
        out[..., 0, 1] = out[..., 1, 0] = 2.0 * c_rho3 * x[..., 0] * x[..., 1]
        out[..., 2, 2] = 2.0
        return out


class Molecule(LevelSurface):
    """c - sum_k exp(-|x - x_k|^2 / r^2): four fused Gaussian atoms."""

    DEFAULT_CENTERS = (
        (math.sqrt(3) / 3, 0.0, -math.sqrt(6) / 12),
        (-math.sqrt(3) / 6, 0.5, -math.sqrt(6) / 12),
        (-math.sqrt(3) / 6, -0.5, -math.sqrt(6) / 12),
        (0.0, 0.0, math.sqrt(6) / 4),
    )

    def __init__(self, centers=DEFAULT_CENTERS, r=0.5, c=0.6, name="molecule"):
        self.centers = np.asarray(centers, dtype=float)
        self.r = float(r)
        self.c = float(c)
        self.name = name
        reach = self.r * math.sqrt(math.log(len(self.centers) / self.c))
        self.bbox = (self.centers.min(axis=0) - reach, self.centers.max(axis=0) + reach)

    def _terms(self, x):
        d = np.asarray(x, dtype=float)[..., None, :] - self.centers
        e = np.exp(-np.einsum("...ki,...ki->...k", d, d) / self.r**2)
        return d, e

    def phi(self, x):
        _, e = self._terms(x)
        return self.c - e.sum(axis=-1)

    def grad(self, x):
        d, e = self._terms(x)
        return (2.0 / self.r**2) * np.einsum("...k,...ki->...i", e, d)

    def hess(self, x):
        d, e = self._terms(x)
        r2 = self.r**2
        outer = np.einsum("...k,...ki,...kj->...ij", e, d, d)
        return (2.0 / r2) * e.sum(axis=-1)[..., None, None] * np.eye(3) - (4.0 / r2**2) * outer


class Cassini(LevelSurface):
    """(|x|^2 + a^2)^2 - 4 a^2 (x1^2 + x2^2) - b^4, a single peanut when b > a."""

    def __init__(self, a=0.65, b=0.7, name="cassini"):
        self.a = float(a)
        self.b = float(b)
        self.name = name
        reach = math.sqrt(self.a**2 + self.b**2)
        self.bbox = (np.full(3, -reach), np.full(3, reach))

    def phi(self, x):
        x = np.asarray(x, dtype=float)
        s = np.einsum("...i,...i->...", x, x) + self.a**2
        return s**2 - 4 * self.a**2 * (x[..., 0] ** 2 + x[..., 1] ** 2) - self.b**4

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        s = np.einsum("...i,...i->...", x, x) + self.a**2
        out = 4.0 * s[..., None] * x
        out[..., :2] -= 8.0 * self.a**2 * x[..., :2]
        return out

    def hess(self, x):
        x = np.asarray(x, dtype=float)
        s = np.einsum("...i,...i->...", x, x) + self.a**2
        out = 4.0 * s[..., None, None] * np.eye(3) + 8.0 * np.einsum("...i,...j->...ij", x, x)
        out[..., 0, 0] -= 8.0 * self.a**2
        out[..., 1, 1] -= 8.0 * self.a**2
        return out


def _build(kind, name, params):
    if kind == "ellipsoid":
        rotation = None
        if "rotation_degrees" in params:
            rotation = rotation_matrix(*params["rotation_degrees"])
        return Ellipsoid(axes=params.get("axes", (1.0, 0.8, 0.6)), rotation=rotation, name=name)
    if kind == "sphere":
        return Sphere(radius=params.get("radius", 1.0), name=name)
    if kind == "torus":
        return Torus(a=params.get("a", 0.3), c=params.get("c", 0.7), name=name)
    if kind == "molecule":
        return Molecule(
            centers=params.get("centers", Molecule.DEFAULT_CENTERS),
            r=params.get("r", 0.5),
            c=params.get("c", 0.6),
            name=name,
        )
    if kind == "cassini":
        return Cassini(a=params.get("a", 0.65), b=params.get("b", 0.7), name=name)
    raise ConfigurationError(f"Unknown surface kind '{kind}' for '{name}'", key="kind", value=kind)


def load_surface_definitions(path=None):
    with open(path or surfaces_file_path, "r") as f:
        definitions = json.load(f)
    return {entry["id"]: entry for entry in definitions["surfaces"]}


def make_surface(surface_id, definitions=None):
    """Build a surface from its catalogue id."""
    if definitions is None:
        definitions = load_surface_definitions()
    if surface_id not in definitions:
        known = ", ".join(sorted(definitions))
        raise ConfigurationError(f"Unknown surface '{surface_id}' (known: {known})", key="surface", value=surface_id)
    entry = definitions[surface_id]
    surface = _build(entry["kind"], surface_id, entry.get("params", {}))
    logger.debug(f"Built surface {surface_id}: {entry}")
    return surface
