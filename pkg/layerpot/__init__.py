"""Laplace single and double layer potentials near and on implicit surfaces."""

from .errors import LayerPotError
from .level_surface import LevelSurface, SampledLevelSurface, closest_point, chart_geometry
from .surfaces import make_surface
from .sphere_pou import PouParams, bump, pou_weights
from .surface_quadrature import NodeSet, generate_nodes, integrate_smooth
from .regularized_kernels import Smoothing
from .layer_potentials import (
    Density,
    EvaluationOptions,
    single_layer_near,
    double_layer_near,
    single_layer_on,
    double_layer_on,
)
from .grid_embedding import BoxGrid, extend_potential
from .harness import CaseConfig, run_case

__all__ = [
    "LayerPotError",
    "LevelSurface",
    "SampledLevelSurface",
    "closest_point",
    "chart_geometry",
    "make_surface",
    "PouParams",
    "bump",
    "pou_weights",
    "NodeSet",
    "generate_nodes",
    "integrate_smooth",
    "Smoothing",
    "Density",
    "EvaluationOptions",
    "single_layer_near",
    "double_layer_near",
    "single_layer_on",
    "double_layer_on",
    "BoxGrid",
    "extend_potential",
    "CaseConfig",
    "run_case",
]
