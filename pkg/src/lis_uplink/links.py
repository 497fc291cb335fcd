"""Per-unit link bundles shared by the sampling and closed-form paths.

For one receiving unit (n, k), everything about its N*K incoming links is
held in array form: LOS vectors, per-antenna distances, candidate Rician
factors, LOS probabilities. A coherence block fixes the random channel
statistics (LOS gating coins and scattered-path angles); fading and noise
are then drawn from those statistics. Both the Monte Carlo samplers and
the closed-form moment formulas consume the same objects, so the two
evaluation routes stay conditioned on identical channel laws.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np

from .channel import cgauss, rician_mixing, root_matrix_from_angles
from .config import SystemConfig
from .scenario import (
    Deployment,
    center_distances,
    data_snrs,
    los_probability,
    pilot_snrs,
    rician_factor,
    unit_antenna_grid,
)

# RNG stream domains (SeedSequence spawn keys): placement draws, per-unit
# block draws, frozen-coin draws for the variance-scaling diagnostic, and
# per-realization draws of that diagnostic.
DOMAIN_PLACEMENT = 0
DOMAIN_BLOCK = 1
DOMAIN_SCALING_COINS = 2
DOMAIN_SCALING_BLOCK = 3


def stream(seed: int, *key: int) -> np.random.Generator:
    """Deterministic substream addressed by integers; independent of worker
    scheduling because the address, not the call order, selects the state."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(x) for x in key)))


def placement_rng(seed: int, placement_idx: int) -> np.random.Generator:
    return stream(seed, DOMAIN_PLACEMENT, placement_idx)


def block_rng(seed: int, placement_idx: int, block_idx: int, n: int, k: int) -> np.random.Generator:
    return stream(seed, DOMAIN_BLOCK, placement_idx, block_idx, n, k)


@dataclass(frozen=True)
class UnitLinkGeometry:
    """Deterministic geometry of every link arriving at unit (n, k)."""

    n: int
    k: int
    antennas: np.ndarray      # (M, 3)
    distances: np.ndarray     # (N, K, M) device-to-antenna distances
    hlos: np.ndarray          # (N, K, M) LOS vectors of all incoming links
    beta2_sum: np.ndarray     # (N, K) sum over antennas of the LOS gains^2
    center_dist: np.ndarray   # (N, K) device-to-unit-center distances
    kappa_cand: np.ndarray    # (N, K) Rician factor if the link carries LOS
    p_los: np.ndarray         # (N, K) LOS probability of each link

    @property
    def own_power(self) -> float:
        """Serving-link LOS power sum_m beta_m^2."""
        return float(self.beta2_sum[self.n, self.k])


def build_unit_geometry(
    deployment: Deployment, config: SystemConfig, n: int, k: int
) -> UnitLinkGeometry:
    antennas = unit_antenna_grid(deployment, config, n, k)
    normal = deployment.frames[n].normal
    # z: perpendicular offset of every device to panel n's plane
    z = np.einsum("lji,i->lj", deployment.devices - deployment.frames[n].origin, normal)
    if np.any(z <= 0):
        raise ValueError("every device must lie on the front side of every panel plane")
    diff = deployment.devices[:, :, np.newaxis, :] - antennas[np.newaxis, np.newaxis, :, :]
    d = np.sqrt(np.einsum("ljmi,ljmi->ljm", diff, diff))
    beta = np.sqrt(z[:, :, np.newaxis] / d) / np.sqrt(4.0 * np.pi * d * d)
    hlos = beta * np.exp(-2j * np.pi * d / config.lam)
    cdist = center_distances(deployment, n, k)
    return UnitLinkGeometry(
        n=n,
        k=k,
        antennas=antennas,
        distances=d,
        hlos=hlos,
        beta2_sum=np.einsum("ljm->lj", beta * beta),
        center_dist=cdist,
        kappa_cand=rician_factor(cdist),
        p_los=los_probability(cdist, config.d_C),
    )


class LinkWorld:
    """Deployment-level cache: per-unit link geometry plus power control."""

    def __init__(self, deployment: Deployment, config: SystemConfig):
        self.deployment = deployment
        self.config = config
        self.rho_p = pilot_snrs(deployment, config)   # (N, K)
        self.rho_d = data_snrs(deployment, config)    # (N, K)
        self._units: dict[tuple[int, int], UnitLinkGeometry] = {}

    def unit(self, n: int, k: int) -> UnitLinkGeometry:
        key = (n, k)
        if key not in self._units:
            self._units[key] = build_unit_geometry(self.deployment, self.config, n, k)
        return self._units[key]


@dataclass(frozen=True)
class UnitBlockDraw:
    """Raw randomness of one coherence block for one unit: gating coins and
    scattered-path angles (the block's channel statistics), then fading and
    estimation noise. Coins and angles are drawn first with M-independent
    shapes so sweeps over M stay paired."""

    coins: np.ndarray    # (N, K) uniforms for the LOS gates
    angles: np.ndarray   # (N, K, P, 2) scattered-path angles
    g: np.ndarray        # (N, K, P) complex fading
    w: np.ndarray        # (M,) complex estimation noise


def draw_unit_block(
    rng: np.random.Generator, N: int, K: int, P: int, M: int,
    coins: np.ndarray | None = None,
) -> UnitBlockDraw:
    drawn_coins = rng.random((N, K)) if coins is None else coins
    angles = rng.uniform(-np.pi / 2.0, np.pi / 2.0, size=(N, K, P, 2))
    g = cgauss(rng, (N, K, P))
    w = cgauss(rng, (M,))
    return UnitBlockDraw(coins=drawn_coins, angles=angles, g=g, w=w)


@dataclass(frozen=True)
class UnitChannelStats:
    """Conditional channel law of one block: LOS means, mixing, and
    correlation roots for every incoming link of unit (n, k)."""

    geom: UnitLinkGeometry
    kappa: np.ndarray       # (N, K) effective Rician factors (inf on own slot)
    los_scale: np.ndarray   # (N, K) sqrt(kappa/(kappa+1))
    nlos_scale: np.ndarray  # (N, K) sqrt(1/(kappa+1))
    hbar: np.ndarray        # (N, K, M) LOS means (own slot: full LOS vector)
    roots: np.ndarray       # (N, K, M, P) correlation roots

    @property
    def nlos_var(self) -> np.ndarray:
        """Scattered-power fraction 1/(kappa+1) per link."""
        return self.nlos_scale**2


def make_unit_stats(
    geom: UnitLinkGeometry,
    draw: UnitBlockDraw,
    config: SystemConfig,
    interference: str = "rician",
) -> UnitChannelStats:
    """Apply the LOS gates and build this block's channel statistics.

    interference="rician": every interference link keeps LOS with its
    distance-dependent probability. "nlos_inter": links from other panels
    are forced pure-scattered (their gates are still consumed so draws stay
    aligned across regimes); same-panel links gate normally.
    """
    N, K = geom.p_los.shape
    gated = draw.coins < geom.p_los
    kappa = np.where(gated, geom.kappa_cand, 0.0)
    if interference == "nlos_inter":
        other = np.arange(N)[:, np.newaxis] != geom.n
        kappa = np.where(other, 0.0, kappa)
    elif interference != "rician":
        raise ValueError(f"unknown interference regime {interference!r}")
    kappa = kappa.astype(float)
    kappa[geom.n, geom.k] = np.inf  # serving link is deterministic LOS
    los_scale, nlos_scale = rician_mixing(kappa)
    hbar = los_scale[:, :, np.newaxis] * geom.hlos
    roots = root_matrix_from_angles(draw.angles, geom.distances, config)
    return UnitChannelStats(
        geom=geom, kappa=kappa, los_scale=los_scale, nlos_scale=nlos_scale,
        hbar=hbar, roots=roots,
    )


def sample_unit_channels(stats: UnitChannelStats, g: np.ndarray) -> np.ndarray:
    """Sample all incoming link channels (N, K, M) given fading g (N, K, P):
    h = hbar + sqrt(1/(kappa+1)) * root @ g. The serving slot stays exactly
    the LOS vector."""
    scattered = np.einsum("ljmp,ljp->ljm", stats.roots, g)
    return stats.hbar + stats.nlos_scale[:, :, np.newaxis] * scattered


def slice_stats(stats: UnitChannelStats, K: int) -> UnitChannelStats:
    """Restrict a unit's block statistics to the first K devices per panel
    (array views, no copies). Valid when the unit's own pilot index is
    below K; used for nested device-count sweeps."""
    geom = stats.geom
    if geom.k >= K:
        raise ValueError(f"unit pilot index {geom.k} not active with K={K}")
    geom_k = dataclasses.replace(
        geom,
        distances=geom.distances[:, :K],
        hlos=geom.hlos[:, :K],
        beta2_sum=geom.beta2_sum[:, :K],
        center_dist=geom.center_dist[:, :K],
        kappa_cand=geom.kappa_cand[:, :K],
        p_los=geom.p_los[:, :K],
    )
    return dataclasses.replace(
        stats,
        geom=geom_k,
        kappa=stats.kappa[:, :K],
        los_scale=stats.los_scale[:, :K],
        nlos_scale=stats.nlos_scale[:, :K],
        hbar=stats.hbar[:, :K],
        roots=stats.roots[:, :K],
    )


@dataclass(frozen=True)
class BlockTerms:
    """Matched-filter scalars of one coherence block for one unit.

    The receive filter is the least-squares channel estimate
    h_hat = h_los + e, with e the pilot-contamination-plus-noise error.
    X is the error's alignment with the serving LOS vector, Y the leakage
    toward each interfering link, Z the filter norm (noise beam power).
    """

    X: float
    Y: np.ndarray          # (N, K) |h_hat^H h_lj|^2, serving slot zeroed
    Z: float
    I: float               # rho-weighted composite interference
    signal: float          # (sum_m beta_m^2)^2 of the serving link
    gamma: float           # estimated-CSI SINR
    I_perfect: float       # composite when the filter is h_los itself
    gamma_perfect: float   # perfect-CSI SINR


class BlockKernel:
    """One block's sampled inner products for one unit, assembled into
    interference scalars at any pilot length.

    Per-device pilot power control makes same-panel pilots cancel in the
    despread output, so the estimation error is the root-SNR-ratio-weighted
    sum of other-panel same-pilot channels plus white noise shrunk by
    sqrt(t * rho_p_own); only that shrink factor depends on t, so a pilot
    sweep reuses every sampled product.
    """

    def __init__(
        self,
        stats: UnitChannelStats,
        g: np.ndarray,
        w: np.ndarray,
        rho_p: np.ndarray,
        rho_d: np.ndarray,
    ):
        geom = stats.geom
        n, k = geom.n, geom.k
        self.n, self.k = n, k
        ch = sample_unit_channels(stats, g)
        hlos = geom.hlos[n, k]

        sqrt_ratio = np.sqrt(rho_p[:, k] / rho_p[n, k])
        sqrt_ratio[n] = 0.0
        contam = np.einsum("l,lm->m", sqrt_ratio, ch[:, k])
        u = hlos + contam

        self.rho_p_own = float(rho_p[n, k])
        self.rho_d = np.asarray(rho_d, dtype=float)
        self.rho_d_own = float(rho_d[n, k])
        self.signal = geom.own_power**2
        self.beta2_sum = geom.own_power

        self.A = np.einsum("m,ljm->lj", np.conj(u), ch)
        self.C = np.einsum("m,ljm->lj", np.conj(w), ch)
        self.Xc = complex(np.einsum("m,m->", np.conj(contam), hlos))
        self.Xw = complex(np.einsum("m,m->", np.conj(w), hlos))
        self.u_norm2 = float(np.sum(np.abs(u) ** 2))
        self.uw = complex(np.einsum("m,m->", np.conj(u), w))
        self.w_norm2 = float(np.sum(np.abs(w) ** 2))

        A_pure = np.einsum("m,ljm->lj", np.conj(hlos), ch)
        Y_pure = np.abs(A_pure) ** 2
        Y_pure[n, k] = 0.0
        self.I_perfect = float(np.sum(self.rho_d * Y_pure)) + geom.own_power
        self.gamma_perfect = self.rho_d_own * self.signal / self.I_perfect

    def terms(self, t) -> BlockTerms:
        s = math.sqrt(float(t) * self.rho_p_own)
        Y = np.abs(self.A + self.C / s) ** 2
        Y[self.n, self.k] = 0.0
        X = abs(self.Xc + self.Xw / s) ** 2
        Z = self.u_norm2 + 2.0 * self.uw.real / s + self.w_norm2 / (s * s)
        I = self.rho_d_own * X + float(np.sum(self.rho_d * Y)) + Z
        return BlockTerms(
            X=float(X),
            Y=Y,
            Z=float(Z),
            I=float(I),
            signal=self.signal,
            gamma=self.rho_d_own * self.signal / I,
            I_perfect=self.I_perfect,
            gamma_perfect=self.gamma_perfect,
        )

    def gamma(self, t) -> float:
        return self.terms(t).gamma


def unit_block_terms(
    stats: UnitChannelStats,
    draw: UnitBlockDraw,
    t: int,
    rho_p: np.ndarray,
    rho_d: np.ndarray,
) -> BlockTerms:
    """Sample one block's interference scalars for unit (n, k)."""
    return BlockKernel(stats, draw.g, draw.w, rho_p, rho_d).terms(t)
