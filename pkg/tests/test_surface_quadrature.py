import math

import numpy as np
import pytest

from layerpot.errors import RootRefinementError
from layerpot.surface_quadrature import dump_nodes, generate_nodes, grid_ticks, integrate_smooth
from layerpot.surfaces import Torus

THETA = math.radians(70.0)


def test_grid_ticks_are_multiples_of_h():
    ticks = grid_ticks(0.1, 1.0)
    assert len(ticks) == 21
    assert ticks[10] == 0.0
    assert np.allclose(ticks / 0.1, np.arange(-10, 11), atol=1e-12)


def test_nodes_lie_on_surface_in_their_caps(sphere, sphere_nodes):
    nodes = sphere_nodes
    assert len(nodes) == sum(nodes.counts)
    assert np.max(np.abs(sphere.phi(nodes.pos))) < 1e-12
    rows = np.arange(len(nodes))
    assert np.all(np.abs(nodes.normal[rows, nodes.axis]) >= math.cos(THETA))
    # every node sits on a grid line of its own axis
    for k in range(3):
        others = [a for a in range(3) if a != k]
        coords = nodes.pos[nodes.chart(k)][:, others] / nodes.h
        assert np.allclose(coords, np.round(coords), atol=1e-9)


def test_node_accessor(sphere_nodes):
    node = sphere_nodes[0]
    assert node.chart_flags.count(True) == 1
    assert node.w_axis[sphere_nodes.axis[0]] == pytest.approx(1 / abs(node.n[sphere_nodes.axis[0]]))


def test_sphere_area(sphere_nodes):
    assert integrate_smooth(sphere_nodes, lambda x: 1.0) == pytest.approx(4 * math.pi, rel=2e-4)


def test_sphere_moment(sphere_nodes):
    # int x3^2 dS = 4 pi / 3 on the unit sphere
    value = integrate_smooth(sphere_nodes, lambda x: x[:, 2] ** 2)
    assert value == pytest.approx(4 * math.pi / 3, rel=2e-4)


def test_odd_integrand_cancels(sphere_nodes):
    assert abs(integrate_smooth(sphere_nodes, sphere_nodes.pos[:, 0])) < 1e-12


def test_torus_area():
    torus = Torus(a=0.3, c=0.7)
    nodes = generate_nodes(torus, 2.2 / 64, THETA, 1.1)
    assert integrate_smooth(nodes, lambda x: 1.0) == pytest.approx(4 * math.pi**2 * 0.3 * 0.7, rel=2e-3)


def test_no_crossings_gives_empty_set(sphere):
    class Far:
        name = "far"

        def phi(self, x):
            return np.ones(np.shape(x)[:-1])

    nodes = generate_nodes(Far(), 0.25, THETA, 1.0)
    assert len(nodes) == 0
    assert nodes.counts == (0, 0, 0)


def test_root_refinement_failure(sphere):
    with pytest.raises(RootRefinementError) as excinfo:
        generate_nodes(sphere, 0.25, THETA, 1.5, root_tolerance=0.0, max_iter=1)
    assert excinfo.value.iterations == 1


def test_dump_nodes(tmp_path, sphere_nodes):
    path = tmp_path / "nodes.txt"
    dump_nodes(sphere_nodes, path)
    table = np.loadtxt(path)
    assert table.shape == (len(sphere_nodes), 12)
    assert np.allclose(table[:, :3], sphere_nodes.pos, rtol=1e-15)


def test_sphere_area_converges_fast(sphere):
    sizes = (32, 64, 128)
    errors = []
    for n in sizes:
        nodes = generate_nodes(sphere, 2.2 / n, THETA, 1.1)
        errors.append(abs(integrate_smooth(nodes, lambda x: 1.0) - 4 * math.pi) / (4 * math.pi))
    assert errors[-1] < 1e-6
    orders = [math.log2(coarse / fine) for coarse, fine in zip(errors[:-1], errors[1:])]
    assert min(orders) >= 4
