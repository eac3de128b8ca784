"""
Summation backends for sums of regularized kernels over quadrature nodes.

A kernel is applied at offsets (source - target): scalar strengths give
sum_y q_y G_delta(y - x), vector strengths give sum_y q_y . grad G_delta(y - x).
"""

import math
import logging
from dataclasses import dataclass, field
from concurrent.futures import ThreadPoolExecutor
from itertools import product

import numpy as np
from scipy.special import gamma, gammainc

from .errors import ConfigurationError, UnsupportedKernelError
from .regularized_kernels import NEAR, single_factor, grad_factor

logger = logging.getLogger(__name__)

DIRECT = "direct"
TREECODE = "treecode"
BACKENDS = (DIRECT, TREECODE)


@dataclass
class SourceSet:
    positions: np.ndarray
    strengths: np.ndarray

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float).reshape(-1, 3)
        self.strengths = np.asarray(self.strengths, dtype=float)
        if len(self.strengths) != len(self.positions):
            raise ValueError(f"{len(self.positions)} positions but {len(self.strengths)} strengths")
        if not np.all(np.isfinite(self.strengths)):
            raise ValueError("source strengths must be finite")

    @property
    def is_dipole(self):
        return self.strengths.ndim == 2

    def __len__(self):
        return len(self.positions)


@dataclass(frozen=True)
class TreecodeParams:
    degree: int = 12
    separation: float = 0.5
    leaf_capacity: int = 20

    def __post_init__(self):
        if self.degree < 1:
            raise ConfigurationError(f"treecode degree must be at least 1, got {self.degree}", key="degree", value=self.degree)
        if not 0 < self.separation < 1:
            raise ConfigurationError(f"treecode separation must lie in (0, 1), got {self.separation}", key="separation", value=self.separation)
        if self.leaf_capacity < 1:
            raise ConfigurationError(f"leaf capacity must be at least 1, got {self.leaf_capacity}", key="leaf_capacity", value=self.leaf_capacity)


@dataclass(frozen=True)
class SummationParams:
    backend: str = DIRECT
    chunk_pairs: int = 2_000_000
    workers: int = 1
    treecode: TreecodeParams = field(default_factory=TreecodeParams)

    def __post_init__(self):
        if self.chunk_pairs < 1:
            raise ConfigurationError(f"chunk_pairs must be positive, got {self.chunk_pairs}", key="chunk_pairs", value=self.chunk_pairs)
        if self.workers < 1:
            raise ConfigurationError(f"workers must be at least 1, got {self.workers}", key="workers", value=self.workers)


def _pair_values(offsets, strengths, smoothing, dipole):
    r = np.linalg.norm(offsets, axis=-1)
    rho = r / smoothing.delta
    if dipole:
        factor = grad_factor(rho, smoothing.variant) / (4.0 * math.pi * smoothing.delta**3)
        return np.einsum("...i,...i->...", offsets, strengths) * factor
    return -single_factor(rho, smoothing.variant) / (4.0 * math.pi * smoothing.delta) * strengths


def direct_sum(targets, sources, smoothing, chunk_pairs=2_000_000, workers=1):
    """Exact O(T M) sum over all sources, chunked over targets."""
    targets = np.asarray(targets, dtype=float).reshape(-1, 3)
    out = np.zeros(len(targets))
    if not len(sources) or not len(targets):
        return out
    step = max(1, chunk_pairs // len(sources))
    dipole = sources.is_dipole

    def run(start):
        chunk = targets[start:start + step]
        offsets = sources.positions[None, :, :] - chunk[:, None, :]
        values = _pair_values(offsets, sources.strengths[None], smoothing, dipole)
        out[start:start + step] = values.sum(axis=1)

    starts = range(0, len(targets), step)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, starts))
    else:
        for start in starts:
            run(start)
    return out


def multi_indices(degree):
    """All (k1, k2, k3) with |k| <= degree, ordered by total degree."""
    return [k for n in range(degree + 1) for k in product(range(n + 1), repeat=3) if sum(k) == n]


class Cluster:
    """Octree box of sources[start:stop] (in tree order)."""

    def __init__(self, number, start, stop, center, half):
        self.number = number
        self.start = start
        self.stop = stop
        self.center = center
        self.half = half
        self.radius = 0.0
        self.children = []
        self.moments = None


class Treecode:
    """Cluster-particle treecode for the near-variant regularized kernels.

    Far clusters are evaluated through a degree-p Taylor expansion of G_delta
    about the cluster center; the Taylor coefficients follow from
    d_i g_m = R_i g_(m+1) with g_m = (1/r d/dr)^m [erf(r/delta)/r].
    """

    def __init__(self, sources, smoothing, params=TreecodeParams()):
        if smoothing.variant != NEAR:
            raise UnsupportedKernelError(
                f"treecode supports only the near kernels, not {smoothing.variant!r}",
                kernel=smoothing.variant,
            )
        self.sources = sources
        self.smoothing = smoothing
        self.params = params
        self.indices = multi_indices(params.degree)
        self.index_of = {k: i for i, k in enumerate(self.indices)}
        self.powers = np.array(self.indices)
        self._plan = self._recurrence_plan()
        # index of k - e_i (0 where k_i = 0, masked by the k_i weight)
        self._lower = np.array([
            [self.index_of[tuple(np.subtract(k, np.eye(3, dtype=int)[i]))] if k[i] else 0 for k in self.indices]
            for i in range(3)
        ])

        lo = sources.positions.min(axis=0)
        hi = sources.positions.max(axis=0)
        center = 0.5 * (lo + hi)
        half = 0.5 * float(np.max(hi - lo)) * (1 + 1e-12) + 1e-300
        self.order = np.arange(len(sources))
        self.clusters = []
        self.root = self._build(0, len(sources), center, half)
        self.positions = sources.positions[self.order]
        self.strengths = sources.strengths[self.order]
        for cluster in self.clusters:
            self._moments(cluster)
        self.centers = np.array([c.center for c in self.clusters])
        self.moment_table = np.array([c.moments for c in self.clusters])
        logger.debug(f"Treecode with {len(self.clusters)} clusters over {len(sources)} sources")

    def _recurrence_plan(self):
        plan = []
        for idx, k in enumerate(self.indices):
            n = sum(k)
            if n == 0:
                continue
            i = next(axis for axis in range(3) if k[axis] > 0)
            one = list(k)
            one[i] -= 1
            two = list(one)
            two[i] -= 1
            plan.append((idx, n, i, k[i], self.index_of[tuple(one)], self.index_of.get(tuple(two), -1)))
        return plan

    def _build(self, start, stop, center, half):
        cluster = Cluster(len(self.clusters), start, stop, center, half)
        self.clusters.append(cluster)
        pts = self.sources.positions[self.order[start:stop]]
        cluster.radius = float(np.max(np.linalg.norm(pts - center, axis=1))) if stop > start else 0.0
        if stop - start <= self.params.leaf_capacity or half < 1e-12:
            return cluster
        octant = ((pts[:, 0] > center[0]).astype(int)
                  + 2 * (pts[:, 1] > center[1]).astype(int)
                  + 4 * (pts[:, 2] > center[2]).astype(int))
        ordering = np.argsort(octant, kind="stable")
        self.order[start:stop] = self.order[start:stop][ordering]
        counts = np.bincount(octant, minlength=8)
        offset = start
        for o in range(8):
            if counts[o] == 0:
                continue
            shift = np.array([(o & 1) * 2 - 1, (o & 2) - 1, (o & 4) / 2 - 1]) * 0.5 * half
            cluster.children.append(self._build(offset, offset + counts[o], center + shift, 0.5 * half))
            offset += counts[o]
        return cluster

    def _moments(self, cluster):
        d = self.positions[cluster.start:cluster.stop] - cluster.center
        q = self.strengths[cluster.start:cluster.stop]
        # d^k for every multi-index, shape (sources, n_indices)
        mono = np.prod(d[:, None, :] ** self.powers[None, :, :], axis=-1)
        if not self.sources.is_dipole:
            cluster.moments = q @ mono
            return
        # D_k = sum_i k_i sum_y q_i (y - c)^(k - e_i)
        base = q.T @ mono
        moments = np.zeros(len(self.indices))
        for i in range(3):
            moments += self.powers[:, i] * base[i, self._lower[i]]
        cluster.moments = moments

    def _coefficients(self, R):
        """Taylor coefficients of G_delta at offsets R (P, 3): shape (P, n_indices)."""
        p = self.params.degree
        delta = self.smoothing.delta
        r = np.linalg.norm(R, axis=1)
        m = np.arange(p + 1)[:, None]
        x = (r / delta) ** 2
        g = ((-2.0) ** m * gamma(m + 0.5) / math.sqrt(math.pi)
             * gammainc(m + 0.5, x[None, :]) / r[None, :] ** (2 * m + 1))
        a = np.zeros((p + 1, len(self.indices), len(r)))
        a[:, 0, :] = g
        for idx, n, i, ki, one, two in self._plan:
            levels = p - n + 1
            value = R[:, i] * a[1:levels + 1, one, :]
            if two >= 0:
                value = value + a[1:levels + 1, two, :]
            a[:levels, idx, :] = value / ki
        return -a[0].T / (4.0 * math.pi)

    def evaluate(self, targets, chunk_pairs=2_000_000):
        targets = np.asarray(targets, dtype=float).reshape(-1, 3)
        out = np.zeros(len(targets))
        if not len(self.sources) or not len(targets):
            return out
        s = self.params.separation
        far_t, far_c, near = [], [], []
        stack = [(self.root, np.arange(len(targets)))]
        while stack:
            cluster, tids = stack.pop()
            dist = np.linalg.norm(targets[tids] - cluster.center, axis=1)
            accept = cluster.radius < s * dist
            if np.any(accept):
                far_t.append(tids[accept])
                far_c.append(np.full(int(accept.sum()), cluster.number))
            rest = tids[~accept]
            if not rest.size:
                continue
            if not cluster.children:
                near.append((cluster, rest))
            else:
                stack.extend((child, rest) for child in cluster.children)

        if far_t:
            t_all = np.concatenate(far_t)
            c_all = np.concatenate(far_c)
            centers = self.centers[c_all]
            moments = self.moment_table[c_all]
            step = max(1, chunk_pairs // (len(self.indices) * (self.params.degree + 1)))
            for start in range(0, len(t_all), step):
                sl = slice(start, start + step)
                R = centers[sl] - targets[t_all[sl]]
                coeff = self._coefficients(R)
                np.add.at(out, t_all[sl], np.einsum("pk,pk->p", coeff, moments[sl]))

        dipole = self.sources.is_dipole
        for cluster, tids in near:
            src = self.positions[cluster.start:cluster.stop]
            q = self.strengths[cluster.start:cluster.stop]
            offsets = src[None, :, :] - targets[tids][:, None, :]
            out[tids] += _pair_values(offsets, q[None], self.smoothing, dipole).sum(axis=1)
        return out


def treecode_sum(targets, sources, smoothing, params=TreecodeParams(), chunk_pairs=2_000_000):
    """Approximate direct_sum with a cluster-particle treecode."""
    if smoothing.variant != NEAR:
        raise UnsupportedKernelError(
            f"treecode supports only the near kernels, not {smoothing.variant!r}",
            kernel=smoothing.variant,
        )
    if not len(sources):
        return np.zeros(len(np.asarray(targets).reshape(-1, 3)))
    tree = Treecode(sources, smoothing, params)
    return tree.evaluate(targets, chunk_pairs=chunk_pairs)


def evaluate(targets, sources, smoothing, params=SummationParams()):
    """Dispatch to the configured backend."""
    if params.backend == TREECODE:
        return treecode_sum(targets, sources, smoothing, params.treecode, params.chunk_pairs)
    if params.backend != DIRECT:
        raise ValueError(f"unknown summation backend {params.backend!r}")
    return direct_sum(targets, sources, smoothing, params.chunk_pairs, params.workers)
