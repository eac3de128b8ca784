"""
Analytic corrections added to the regularized quadrature sums.

Single layer:  v = v_delta + T1 + T2
Double layer:  w = w_delta + N1 + N2
On the surface the single layer uses t2_on_surface and no T1; the double
layer needs no correction.

T1 and N1 remove the smoothing error to leading order, the lattice sums T2,
N2 and t2_on_surface remove the discretization error of the regularized
integrand. The lattice sums run over the half lattice
Q = {n2 > 0} U {n2 = 0, n1 > 0} with |n_j| <= cutoff.
"""

import math
import logging
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc, erfcx

from .errors import ConfigurationError

logger = logging.getLogger(__name__)

SQRT_PI = math.sqrt(math.pi)

# E(p, q) <= 3 exp(-q^2); beyond this q every term is below 1e-18
Q_CUT = 6.5

CHUNK_TARGETS = 4096


@dataclass(frozen=True)
class LatticeSumParams:
    cutoff: int = 20
    early_exit: bool = True

    def __post_init__(self):
        if self.cutoff < 1:
            raise ConfigurationError(f"lattice cutoff must be at least 1, got {self.cutoff}", key="lattice_cutoff", value=self.cutoff)


@dataclass
class TargetCharts:
    """Per-target, per-axis chart data: zeta (T, 3), nu (T, 3, 2), g_inv (T, 3, 2, 2).

    Axes with zeta = 0 are ignored, whatever their nu and g_inv hold.
    """

    zeta: np.ndarray
    nu: np.ndarray
    g_inv: np.ndarray

    def __len__(self):
        return len(self.zeta)


def lattice(cutoff):
    """Half lattice Q with |n_j| <= cutoff, shape (cutoff * (2 cutoff + 1) + cutoff, 2)."""
    r = np.arange(-cutoff, cutoff + 1)
    n1, n2 = np.meshgrid(r, r, indexing="ij")
    n1, n2 = n1.ravel(), n2.ravel()
    keep = (n2 > 0) | ((n2 == 0) & (n1 > 0))
    return np.stack([n1[keep], n2[keep]], axis=-1)


def e_factor(p, q):
    """E(p, q) = exp(2pq) erfc(p + q) + exp(-2pq) erfc(-p + q), for q > 0, without overflow."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)

    def half(s):
        a = s + q
        with np.errstate(over="ignore", under="ignore"):
            scaled = erfcx(np.maximum(a, 0.0)) * np.exp(-s * s - q * q)
            direct = np.exp(np.minimum(2.0 * s * q, 0.0)) * erfc(np.minimum(a, 0.0))
        return np.where(a >= 0.0, scaled, direct)

    out = half(p) + half(-p)
    return out if out.ndim else float(out)


def _bracket(lam):
    lam = np.abs(lam)
    return lam * erfc(lam) - np.exp(-lam * lam) / SQRT_PI


def t1(psi_z, lam, delta, H):
    """(delta/2) (1 + H lam delta) psi(z) [|lam| erfc|lam| - exp(-lam^2)/sqrt(pi)]."""
    lam = np.asarray(lam, dtype=float)
    out = 0.5 * delta * (1.0 + np.asarray(H) * lam * delta) * np.asarray(psi_z) * _bracket(lam)
    return out if np.ndim(out) else float(out)


def n1(lap_s_phi, lam, delta):
    """delta^2 (Delta_S phi) (lam/4) [|lam| erfc|lam| - exp(-lam^2)/sqrt(pi)]."""
    lam = np.asarray(lam, dtype=float)
    out = delta**2 * np.asarray(lap_s_phi) * 0.25 * lam * _bracket(lam)
    return out if np.ndim(out) else float(out)


def f_factor(xi):
    """(pi/xi) erfc(xi/2) + sqrt(pi) exp(-xi^2/4) (1 + xi^2/6)."""
    xi = np.asarray(xi, dtype=float)
    out = math.pi / xi * erfc(0.5 * xi) + SQRT_PI * np.exp(-0.25 * xi * xi) * (1.0 + xi * xi / 6.0)
    return out if out.ndim else float(out)


def discretization_factor(theta, delta_ratio):
    """exp(-pi^2 cos^2(theta) (delta/h)^2), the size of the uncorrected discretization error."""
    return math.exp(-(math.pi**2) * math.cos(theta) ** 2 * delta_ratio**2)


def _min_gamma(g_inv):
    # gamma^2 is the smallest eigenvalue of the inverse metric
    a, b, d = g_inv[:, 0, 0], g_inv[:, 0, 1], g_inv[:, 1, 1]
    smallest = 0.5 * (a + d - np.sqrt((a - d) ** 2 + 4.0 * b * b))
    return math.sqrt(max(float(np.min(smallest)), 1e-30))


def _chart_sums(charts, delta, h, params, term):
    """Accumulate sum_k zeta_k sum_{n in Q} term(...) over the charts of every target.

    term(k, rows, Q, norm, q, phase) returns contributions of shape (len(rows), len(Q)).
    """
    total = np.zeros(len(charts))
    for k in range(3):
        rows = np.flatnonzero(charts.zeta[:, k] > 0)
        for start in range(0, rows.size, CHUNK_TARGETS):
            chunk = rows[start:start + CHUNK_TARGETS]
            nu = charts.nu[chunk, k]
            g_inv = charts.g_inv[chunk, k]

            rings = params.cutoff
            if params.early_exit:
                reach = Q_CUT * h / (math.pi * delta * _min_gamma(g_inv))
                rings = min(params.cutoff, max(1, math.ceil(reach)))
            Q = lattice(rings).astype(float)

            norm = np.sqrt(np.einsum("pi,tij,pj->tp", Q, g_inv, Q))
            q = math.pi * delta * norm / h
            phase = 2.0 * math.pi * (nu @ Q.T)
            contrib = term(k, chunk, Q, norm, q, phase)
            if params.early_exit:
                contrib = np.where(q <= Q_CUT, contrib, 0.0)
            total[chunk] += charts.zeta[chunk, k] * contrib.sum(axis=1)
    return total


def t2(psi_z, lam, delta, h, charts, params=LatticeSumParams()):
    """(h/4pi) psi(z) sum_k zeta_k sum_{n in Q} cos(2 pi n.nu) E(lam, pi delta |n| / h) / |n|."""
    lam = np.broadcast_to(np.asarray(lam, dtype=float), (len(charts),))
    psi_z = np.broadcast_to(np.asarray(psi_z, dtype=float), (len(charts),))

    def term(k, rows, Q, norm, q, phase):
        return np.cos(phase) * e_factor(lam[rows, None], q) / norm

    return h / (4.0 * math.pi) * psi_z * _chart_sums(charts, delta, h, params, term)


def n2(dphi, lam, delta, h, charts, params=LatticeSumParams(), available=None):
    """-(delta lam/2) sum_k zeta_k sum_r c_r^(k) d_r phi, with
    c_r = sum_{n in Q} sin(2 pi n.nu) (g^rs n_s / |n|) E(lam, pi delta |n| / h).

    dphi has shape (T, 3, 2): the two chart derivatives of the density per axis.
    Charts flagged unavailable contribute zero.
    """
    lam = np.broadcast_to(np.asarray(lam, dtype=float), (len(charts),))
    dphi = np.asarray(dphi, dtype=float)
    if available is None:
        available = np.ones((len(charts), 3), dtype=bool)
    dphi = np.where(available[..., None], np.nan_to_num(dphi), 0.0)

    def term(k, rows, Q, norm, q, phase):
        # (g^rs n_s) d_r phi, contracted before the lattice weights
        directional = np.einsum("trs,ps,tr->tp", charts.g_inv[rows, k], Q, dphi[rows, k])
        return np.sin(phase) * e_factor(lam[rows, None], q) / norm * directional

    return -0.5 * delta * lam * _chart_sums(charts, delta, h, params, term)


def t2_on_surface(psi_z, delta, h, charts, params=LatticeSumParams()):
    """(delta/pi) psi(z) sum_k zeta_k sum_{n in Q} cos(2 pi n.nu) F(2 pi |n| delta / h)."""
    psi_z = np.broadcast_to(np.asarray(psi_z, dtype=float), (len(charts),))

    def term(k, rows, Q, norm, q, phase):
        return np.cos(phase) * f_factor(2.0 * q)

    return delta / math.pi * psi_z * _chart_sums(charts, delta, h, params, term)
