import math

import numpy as np
import pytest

from layerpot.errors import ConfigurationError, UnsupportedKernelError
from layerpot.harness import densities
from layerpot.regularized_kernels import NEAR, ON_SURFACE, Smoothing, grad_kernel, single_kernel
from layerpot.summation import (
    DIRECT,
    TREECODE,
    SourceSet,
    SummationParams,
    Treecode,
    TreecodeParams,
    direct_sum,
    evaluate,
    multi_indices,
    treecode_sum,
)
from layerpot.surface_quadrature import generate_nodes
from layerpot.surfaces import Sphere


@pytest.fixture(scope="module")
def cloud():
    rng = np.random.default_rng(12)
    positions = rng.uniform(-1, 1, size=(3000, 3))
    charges = rng.normal(size=3000)
    dipoles = rng.normal(size=(3000, 3))
    targets = rng.uniform(-1.2, 1.2, size=(200, 3))
    return positions, charges, dipoles, targets


def test_empty_inputs():
    smoothing = Smoothing(0.1)
    empty = SourceSet(np.empty((0, 3)), np.empty(0))
    assert np.all(direct_sum(np.zeros((4, 3)), empty, smoothing) == 0.0)
    assert np.all(treecode_sum(np.zeros((4, 3)), empty, smoothing) == 0.0)
    sources = SourceSet([[0.0, 0.0, 0.0]], [1.0])
    assert direct_sum(np.empty((0, 3)), sources, smoothing).shape == (0,)


def test_single_source():
    smoothing = Smoothing(0.1)
    sources = SourceSet([[0.0, 0.0, 0.0]], [2.0])
    value = direct_sum([[1.0, 0.0, 0.0]], sources, smoothing)[0]
    assert value == pytest.approx(2 * single_kernel(np.array([-1.0, 0.0, 0.0]), smoothing))
    assert value == pytest.approx(-2 / (4 * math.pi))
    dipole = SourceSet([[0.0, 0.0, 0.0]], [[0.0, 0.0, 1.5]])
    x = np.array([[0.02, 0.0, -0.05]])
    expected = 1.5 * grad_kernel(-x[0], smoothing)[2]
    assert direct_sum(x, dipole, smoothing)[0] == pytest.approx(expected)


def test_order_and_chunking_do_not_matter(cloud):
    positions, charges, _, targets = cloud
    smoothing = Smoothing(0.05)
    reference = direct_sum(targets, SourceSet(positions, charges), smoothing)
    perm = np.random.default_rng(0).permutation(len(positions))
    shuffled = direct_sum(targets, SourceSet(positions[perm], charges[perm]), smoothing, chunk_pairs=10_000)
    threaded = direct_sum(targets, SourceSet(positions, charges), smoothing, chunk_pairs=50_000, workers=3)
    assert np.allclose(shuffled, reference, rtol=1e-12, atol=1e-12)
    assert np.allclose(threaded, reference, rtol=1e-12, atol=1e-12)


def test_source_validation():
    with pytest.raises(ValueError):
        SourceSet(np.zeros((3, 3)), np.ones(2))
    with pytest.raises(ValueError):
        SourceSet(np.zeros((1, 3)), [np.nan])


def test_multi_indices():
    assert len(multi_indices(2)) == 10
    assert multi_indices(1)[0] == (0, 0, 0)
    assert all(sum(k) <= 12 for k in multi_indices(12))
    assert len(multi_indices(12)) == 455


@pytest.mark.parametrize("kind", ["charges", "dipoles"])
def test_treecode_matches_direct(cloud, kind):
    positions, charges, dipoles, targets = cloud
    strengths = charges if kind == "charges" else dipoles
    sources = SourceSet(positions, strengths)
    smoothing = Smoothing(0.01)
    exact = direct_sum(targets, sources, smoothing)
    approx = treecode_sum(targets, sources, smoothing, TreecodeParams(degree=12, separation=0.4, leaf_capacity=20))
    assert np.max(np.abs(approx - exact)) < 1e-4 * np.max(np.abs(exact))


def test_treecode_with_tight_separation_is_direct(cloud):
    positions, charges, _, targets = cloud
    sources = SourceSet(positions, charges)
    smoothing = Smoothing(0.05)
    exact = direct_sum(targets, sources, smoothing)
    approx = treecode_sum(targets, sources, smoothing, TreecodeParams(degree=4, separation=1e-3))
    assert np.allclose(approx, exact, rtol=1e-10, atol=1e-10)


def test_treecode_moments_of_root_cluster(cloud):
    positions, charges, _, _ = cloud
    tree = Treecode(SourceSet(positions, charges), Smoothing(0.05), TreecodeParams(degree=2))
    root = tree.root
    d = positions - root.center
    assert root.moments[0] == pytest.approx(charges.sum())
    assert root.moments[tree.index_of[(1, 0, 0)]] == pytest.approx(np.sum(charges * d[:, 0]))
    assert root.moments[tree.index_of[(0, 1, 1)]] == pytest.approx(np.sum(charges * d[:, 1] * d[:, 2]))


def test_treecode_rejects_on_surface_kernel(cloud):
    positions, charges, _, targets = cloud
    sources = SourceSet(positions, charges)
    with pytest.raises(UnsupportedKernelError) as excinfo:
        treecode_sum(targets, sources, Smoothing(0.05, ON_SURFACE))
    assert excinfo.value.kernel == ON_SURFACE
    with pytest.raises(UnsupportedKernelError):
        Treecode(sources, Smoothing(0.05, ON_SURFACE))


def test_evaluate_dispatch(cloud):
    positions, charges, _, targets = cloud
    sources = SourceSet(positions[:200], charges[:200])
    smoothing = Smoothing(0.05, NEAR)
    direct = evaluate(targets, sources, smoothing, SummationParams(backend=DIRECT))
    tree = evaluate(targets, sources, smoothing, SummationParams(backend=TREECODE))
    assert np.max(np.abs(direct - tree)) < 1e-3 * np.max(np.abs(direct))
    with pytest.raises(ValueError):
        evaluate(targets, sources, smoothing, SummationParams(backend="fmm"))


def test_invalid_treecode_params():
    with pytest.raises(ConfigurationError) as excinfo:
        TreecodeParams(separation=1.5)
    assert excinfo.value.key == "separation"
    with pytest.raises(ConfigurationError):
        TreecodeParams(degree=0)
    with pytest.raises(ConfigurationError):
        SummationParams(workers=0)


def test_treecode_error_decreases_with_degree(cloud):
    positions, charges, _, targets = cloud
    sources = SourceSet(positions, charges)
    smoothing = Smoothing(0.01)
    exact = direct_sum(targets, sources, smoothing)
    errors = [
        np.max(np.abs(treecode_sum(targets, sources, smoothing, TreecodeParams(degree=p)) - exact))
        for p in (4, 8, 12)
    ]
    assert errors[0] > errors[1] > errors[2]


@pytest.mark.slow
def test_treecode_on_sphere_nodes_at_default_params():
    # p = 12, s = 0.5, N0 = 20 on the N = 64 sphere; deviation about 4e-7 relative
    nodes = generate_nodes(Sphere(1.0), 2.2 / 64, math.radians(70.0), 1.1)
    _, psi = densities(nodes.pos, nodes.normal)
    sources = SourceSet(nodes.pos, nodes.weight * psi)
    rng = np.random.default_rng(3)
    picked = rng.choice(len(nodes), 300, replace=False)
    targets = nodes.pos[picked] + rng.uniform(-1, 1, size=(300, 1)) * nodes.h * nodes.normal[picked]
    smoothing = Smoothing(2 * nodes.h)
    exact = direct_sum(targets, sources, smoothing)
    scale = np.max(np.abs(exact))
    errors = [
        np.max(np.abs(treecode_sum(targets, sources, smoothing, TreecodeParams(degree=p)) - exact)) / scale
        for p in (4, 8, 12)
    ]
    assert errors[0] > errors[1] > errors[2]
    assert errors[2] < 2e-6
