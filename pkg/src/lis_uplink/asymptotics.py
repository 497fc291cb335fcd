"""Closed-form moments of the matched-filter terms and their large-M limits.

Conditioned on one coherence block's channel statistics (LOS gates and
scattered-path angles fixed), the filter-output terms X, Y, Z are quadratic
forms in complex Gaussians, so their means have closed forms. Every noise
contribution carries a 1/t factor, which makes the composite interference
mean an affine function of 1/t. In the large-M limit (fixed aperture,
refined lattice) the serving power approaches a deterministic solid-angle
expression and the SINR approaches a deterministic ratio; dropping the
vanishing fluctuation terms gives the interference-floor bound.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass

import numpy as np

from .config import LayoutConfig, PlacementConfig, SystemConfig
from .links import (
    DOMAIN_SCALING_BLOCK,
    DOMAIN_SCALING_COINS,
    LinkWorld,
    UnitChannelStats,
    draw_unit_block,
    make_unit_stats,
    placement_rng,
    stream,
    unit_block_terms,
)
from .scenario import place_devices
from .sinr import rate_log


@dataclass(frozen=True)
class _MomentParts:
    """Pilot-length-independent ingredients of one unit's moments.

    Every variance has the shape const + noise/t; the two coefficients are
    stored separately so moments can be re-evaluated at any pilot length.
    """

    n: int
    k: int
    M: int
    mu_x: complex
    var_x_const: float
    var_x_noise: float          # coefficient of 1/t
    mu_y: np.ndarray            # (N, K) complex, serving slot zero
    var_y_const: np.ndarray     # (N, K)
    var_y_noise: np.ndarray     # (N, K) coefficients of 1/t
    q_bar: np.ndarray           # (M,) mean of the channel estimate
    var_z_const_m: np.ndarray   # (M,)
    var_z_noise_m: float        # per-antenna coefficient of 1/t
    beta2_sum: float            # serving-link LOS power
    rho_p_own: float


def _moment_parts(stats: UnitChannelStats, pilot_snrs: np.ndarray) -> _MomentParts:
    geom = stats.geom
    n, k = geom.n, geom.k
    N, K = geom.p_los.shape
    M = geom.hlos.shape[2]
    hlos_own = geom.hlos[n, k]
    rho_p_own = float(pilot_snrs[n, k])

    # Contaminators: same-pilot devices on other panels, weighted by the
    # root of their pilot-SNR ratio. Same-panel pilots are orthogonal after
    # despreading and drop out exactly.
    sqrt_ratio = np.sqrt(pilot_snrs[:, k] / rho_p_own)
    sqrt_ratio[n] = 0.0
    ratio = sqrt_ratio**2
    cont_w = ratio * stats.nlos_var[:, k]  # scattered-power weight per contaminator

    mu_e = np.einsum("l,lm->m", sqrt_ratio, stats.hbar[:, k])
    q_bar = hlos_own + mu_e

    roots_k = stats.roots[:, k]                     # (N, M, P) contaminator roots
    rowpow = np.einsum("lmp->lm", np.abs(roots_k) ** 2)  # per-antenna row power

    # X = |e^H h_los|^2: mean of the Gaussian scalar plus its variance.
    mu_x = complex(np.einsum("m,m->", np.conj(mu_e), hlos_own))
    proj_x = np.einsum("lmp,m->lp", np.conj(roots_k), hlos_own)
    var_x_const = float(np.einsum("l,lp->", cont_w, np.abs(proj_x) ** 2))
    var_x_noise = geom.own_power / rho_p_own

    # Y_lj = |h_hat^H h_lj|^2: mean from the two fixed means; variance from
    # the estimate's fluctuation against the interferer mean (EL) plus the
    # interferer's scattered part against the full estimate (EN).
    mu_y = np.einsum("m,ljm->lj", np.conj(q_bar), stats.hbar)
    hbar_norm2 = np.einsum("ljm->lj", np.abs(stats.hbar) ** 2)

    proj_el = np.einsum("cmp,ljm->cljp", np.conj(roots_k), stats.hbar)
    el_const = np.einsum("c,cljp->lj", cont_w, np.abs(proj_el) ** 2)
    el_noise = hbar_norm2 / rho_p_own

    proj_en = np.einsum("m,ljmp->ljp", np.conj(q_bar), stats.roots)
    term_a = np.einsum("ljp->lj", np.abs(proj_en) ** 2)
    term_b = np.zeros((N, K))
    for c in range(N):
        if cont_w[c] == 0.0:
            continue
        cross = np.einsum("mp,ljmq->ljpq", np.conj(roots_k[c]), stats.roots)
        term_b += cont_w[c] * np.einsum("ljpq->lj", np.abs(cross) ** 2)
    rootfrob = np.einsum("ljmp->lj", np.abs(stats.roots) ** 2)
    en_const = stats.nlos_var * (term_a + term_b)
    en_noise = stats.nlos_var * rootfrob / rho_p_own

    var_y_const = el_const + en_const
    var_y_noise = el_noise + en_noise
    mu_y[n, k] = 0.0
    var_y_const[n, k] = 0.0
    var_y_noise[n, k] = 0.0

    # Z = ||h_hat||^2: per-antenna mean q_bar plus per-antenna variance.
    var_z_const_m = np.einsum("c,cm->m", cont_w, rowpow)
    var_z_noise_m = 1.0 / rho_p_own

    return _MomentParts(
        n=n,
        k=k,
        M=M,
        mu_x=mu_x,
        var_x_const=var_x_const,
        var_x_noise=var_x_noise,
        mu_y=mu_y,
        var_y_const=var_y_const,
        var_y_noise=var_y_noise,
        q_bar=q_bar,
        var_z_const_m=var_z_const_m,
        var_z_noise_m=var_z_noise_m,
        beta2_sum=geom.own_power,
        rho_p_own=rho_p_own,
    )


def _check_t(t) -> float:
    t = float(t)
    if t <= 0:
        raise ValueError(f"pilot length must be positive, got {t}")
    return t


def lemma1_moments(stats: UnitChannelStats, t, pilot_snrs: np.ndarray):
    """Mean and variance of the error-alignment term X for unit (n, k).

    Returns (mu_x, var_x); the second moment is var_x + |mu_x|^2.
    """
    t = _check_t(t)
    parts = _moment_parts(stats, np.asarray(pilot_snrs, dtype=float))
    return parts.mu_x, parts.var_x_const + parts.var_x_noise / t


def lemma2_moments(stats: UnitChannelStats, t, pilot_snrs: np.ndarray):
    """Per-interferer mean and variance of the leakage terms Y.

    Returns (mu_y, var_y) as (N, K) arrays with the serving slot zeroed.
    The mean is exact; the variance treats the estimate's fluctuation and
    the interferer's scattered part as independent, which is accurate up
    to O(1/M) relative error for same-pilot interferers.
    """
    t = _check_t(t)
    parts = _moment_parts(stats, np.asarray(pilot_snrs, dtype=float))
    return parts.mu_y, parts.var_y_const + parts.var_y_noise / t


def lemma3_moments(stats: UnitChannelStats, t, pilot_snrs: np.ndarray):
    """Per-antenna mean and variance of the filter norm Z.

    Returns (mu_z_m, var_z_m, mu_Z) with mu_Z = sum_m (var + |mu|^2).
    """
    t = _check_t(t)
    parts = _moment_parts(stats, np.asarray(pilot_snrs, dtype=float))
    var_z_m = parts.var_z_const_m + parts.var_z_noise_m / t
    mu_Z = float(np.sum(var_z_m) + np.sum(np.abs(parts.q_bar) ** 2))
    return parts.q_bar, var_z_m, mu_Z


@dataclass(frozen=True)
class MomentSet:
    """Closed-form moments of one unit's X, Y, Z terms at pilot length t,
    plus the split coefficients needed to re-evaluate them at any t."""

    n: int
    k: int
    t: float
    M: int
    mu_x: complex
    var_x: float
    mu_y: np.ndarray          # (N, K) complex, serving slot zero
    var_y: np.ndarray         # (N, K) at the build t
    mu_z_m: np.ndarray        # (M,) complex (equals q_bar)
    var_z_m: np.ndarray       # (M,) at the build t
    q_bar: np.ndarray
    rho_d: np.ndarray         # (N, K) data SNRs used in the assembly
    rho_d_own: float
    rho_p_own: float
    beta2_sum: float
    z_own: float              # device's perpendicular distance to its panel
    L: float                  # panel half-side
    parts: _MomentParts

    # ---- per-term second moments, re-evaluable in t ----

    def _t(self, t) -> float:
        return _check_t(self.t if t is None else t)

    def mu_X(self, t=None) -> float:
        t = self._t(t)
        p = self.parts
        return p.var_x_const + p.var_x_noise / t + abs(p.mu_x) ** 2

    def mu_Y_bar(self, t=None) -> np.ndarray:
        t = self._t(t)
        p = self.parts
        return p.var_y_const + p.var_y_noise / t + np.abs(p.mu_y) ** 2

    def mu_Z(self, t=None) -> float:
        t = self._t(t)
        p = self.parts
        return float(
            np.sum(p.var_z_const_m)
            + self.M * p.var_z_noise_m / t
            + np.sum(np.abs(p.q_bar) ** 2)
        )

    # ---- named views of the interferer grids ----

    @property
    def mu_y_njk(self) -> np.ndarray:
        """Same-panel interferer means (K-1,)."""
        row = np.delete(self.mu_y[self.n], self.k)
        return row

    @property
    def var_y_njk(self) -> np.ndarray:
        return np.delete(self.var_y[self.n], self.k)

    @property
    def mu_y_lnjk(self) -> np.ndarray:
        """Other-panel interferer means ((N-1)*K,)."""
        return np.delete(self.mu_y, self.n, axis=0).ravel()

    @property
    def var_y_lnjk(self) -> np.ndarray:
        return np.delete(self.var_y, self.n, axis=0).ravel()

    # ---- composite interference ----

    def mu_I_bar(self, t=None) -> float:
        return mu_I(self, self.rho_d, self._t(t))

    @property
    def mu_I_hat(self) -> float:
        """Pilot-length-independent floor: only the squared means survive."""
        p = self.parts
        return float(
            self.rho_d_own * abs(p.mu_x) ** 2
            + np.sum(self.rho_d * np.abs(p.mu_y) ** 2)
        )


def build_moment_set(
    stats: UnitChannelStats,
    t,
    pilot_snrs: np.ndarray,
    data_snrs: np.ndarray,
    z_own: float,
    L: float,
) -> MomentSet:
    """Evaluate all closed-form moments of one unit at pilot length t."""
    t = _check_t(t)
    pilot_snrs = np.asarray(pilot_snrs, dtype=float)
    data_snrs = np.asarray(data_snrs, dtype=float)
    parts = _moment_parts(stats, pilot_snrs)
    var_z_m = parts.var_z_const_m + parts.var_z_noise_m / t
    return MomentSet(
        n=parts.n,
        k=parts.k,
        t=t,
        M=parts.M,
        mu_x=parts.mu_x,
        var_x=parts.var_x_const + parts.var_x_noise / t,
        mu_y=parts.mu_y,
        var_y=parts.var_y_const + parts.var_y_noise / t,
        mu_z_m=parts.q_bar,
        var_z_m=var_z_m,
        q_bar=parts.q_bar,
        rho_d=data_snrs,
        rho_d_own=float(data_snrs[parts.n, parts.k]),
        rho_p_own=parts.rho_p_own,
        beta2_sum=parts.beta2_sum,
        z_own=float(z_own),
        L=float(L),
        parts=parts,
    )


def mu_I(moments: MomentSet, data_snrs: np.ndarray, t) -> float:
    """Composite interference mean: rho-weighted X and Y second moments
    plus the filter norm, every variance evaluated at pilot length t."""
    t = _check_t(t)
    rho = np.asarray(data_snrs, dtype=float)
    p = moments.parts
    rho_own = float(rho[moments.n, moments.k])
    const = (
        rho_own * (p.var_x_const + abs(p.mu_x) ** 2)
        + float(np.sum(rho * (p.var_y_const + np.abs(p.mu_y) ** 2)))
        + float(np.sum(p.var_z_const_m) + np.sum(np.abs(p.q_bar) ** 2))
    )
    noise = (
        rho_own * p.var_x_noise
        + float(np.sum(rho * p.var_y_noise))
        + moments.M * p.var_z_noise_m
    )
    return const + noise / t


def quarter_solid_angle(L: float, z: float) -> float:
    """Solid angle of one panel quadrant seen from boresight distance z."""
    if z <= 0:
        raise ValueError(f"boresight distance must be positive, got {z}")
    return math.atan(L * L / (z * math.sqrt(2.0 * L * L + z * z)))


@dataclass(frozen=True)
class AsymptoticSse:
    """Deterministic large-M SSE of one panel and its interference-floor
    bound, per device."""

    p: np.ndarray          # (K,) quadrant solid angles
    p_bar: np.ndarray      # (K,) deterministic serving powers M^2 p^2/(16 pi^2 L^4)
    gamma_bar: np.ndarray  # (K,) deterministic SINRs
    gamma_hat: np.ndarray  # (K,) floor-bound SINRs (inf if interference-free)
    sse_bar: float
    sse_hat: float
    t: float
    T: int
    prelog: float


def _bound_sinrs(p_bar: np.ndarray, floors: np.ndarray, rho_own: np.ndarray) -> np.ndarray:
    out = np.empty_like(p_bar)
    for i, (pb, fl, rho) in enumerate(zip(p_bar, floors, rho_own)):
        out[i] = math.inf if fl == 0.0 else rho * pb / fl
    return out


def theorem1_sse(moment_sets: list[MomentSet], t, T: int) -> AsymptoticSse:
    """Deterministic SSE of one panel at pilot length t.

    moment_sets: one MomentSet per served device of the same panel.
    """
    t = _check_t(t)
    if not moment_sets:
        raise ValueError("need at least one unit's moments")
    if t > T:
        raise ValueError(f"pilot length t={t} exceeds the block length T={T}")
    M = moment_sets[0].M
    p = np.array([quarter_solid_angle(ms.L, ms.z_own) for ms in moment_sets])
    L4 = np.array([ms.L**4 for ms in moment_sets])
    p_bar = M * M * p * p / (16.0 * math.pi**2 * L4)
    rho_own = np.array([ms.rho_d_own for ms in moment_sets])
    mu_bar = np.array([ms.mu_I_bar(t) for ms in moment_sets])
    gamma_bar = rho_own * p_bar / mu_bar
    floors = np.array([ms.mu_I_hat for ms in moment_sets])
    gamma_hat = _bound_sinrs(p_bar, floors, rho_own)
    prelog = 1.0 - t / T
    if prelog <= 0.0:
        sse_bar = 0.0
        sse_hat = 0.0
    else:
        sse_bar = float(prelog * np.sum(rate_log(1.0 + gamma_bar)))
        sse_hat = float(prelog * np.sum(rate_log(1.0 + gamma_hat)))
    return AsymptoticSse(
        p=p,
        p_bar=p_bar,
        gamma_bar=gamma_bar,
        gamma_hat=gamma_hat,
        sse_bar=sse_bar,
        sse_hat=sse_hat,
        t=t,
        T=int(T),
        prelog=float(prelog),
    )


def theorem2_bound(moment_sets: list[MomentSet], t, T: int):
    """Interference-floor bound of one panel: (mu_I_hat per device,
    sse_hat, gamma_hat per device). Infinite when a device sees no LOS
    interference at all (callers exclude such units from ratios)."""
    res = theorem1_sse(moment_sets, t, T)
    floors = np.array([ms.mu_I_hat for ms in moment_sets])
    return floors, res.sse_hat, res.gamma_hat


def moment_report(moment_sets: list[MomentSet], sse: AsymptoticSse | None = None) -> dict:
    """JSON-ready per-unit moment tables (consumed by the test suite)."""
    units = []
    for ms in moment_sets:
        units.append(
            {
                "n": ms.n,
                "k": ms.k,
                "t": ms.t,
                "M": ms.M,
                "mu_x": [ms.mu_x.real, ms.mu_x.imag],
                "var_x": ms.var_x,
                "mu_X": ms.mu_X(),
                "mu_Y_bar_total": float(np.sum(ms.mu_Y_bar())),
                "mu_Z": ms.mu_Z(),
                "mu_I_bar": ms.mu_I_bar(),
                "mu_I_hat": ms.mu_I_hat,
            }
        )
    report: dict = {"units": units}
    if sse is not None:
        report["sse_bar"] = sse.sse_bar
        report["sse_hat"] = sse.sse_hat
        report["gamma_bar"] = [float(g) for g in sse.gamma_bar]
    return report


def write_moment_report(path, moment_sets, sse=None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(moment_report(moment_sets, sse), fh, indent=2, sort_keys=True)


@dataclass(frozen=True)
class ScalingDiagnostics:
    """Variance-scaling table of the normalized interference I/M^2 on a
    fixed deployment with the lattice refined."""

    M_values: tuple
    var_I: np.ndarray          # sample variance of I/M^2 per M
    mean_I: np.ndarray         # sample mean of I/M^2 per M
    slope: float               # log-log regression slope of var_I vs M
    mean_X: np.ndarray         # closed-form mu_X/M^2, averaged over draws
    mean_Y: np.ndarray         # rho-weighted closed-form leakage /M^2
    mean_Z: np.ndarray         # closed-form mu_Z/M^2
    mean_mu_x_sq: np.ndarray   # |mu_x|^2/M^2 (contamination LOS floor)
    realizations: int

    def rows(self) -> list[dict]:
        out = []
        for i, M in enumerate(self.M_values):
            out.append(
                {
                    "M": int(M),
                    "var_I_over_M2": float(self.var_I[i]),
                    "mean_I_over_M2": float(self.mean_I[i]),
                    "mu_X_over_M2": float(self.mean_X[i]),
                    "mu_Y_over_M2": float(self.mean_Y[i]),
                    "mu_Z_over_M2": float(self.mean_Z[i]),
                    "mu_x_sq_over_M2": float(self.mean_mu_x_sq[i]),
                }
            )
        return out


def scaling_diagnostics(
    config: SystemConfig,
    layout: LayoutConfig,
    M_values,
    realizations: int,
    *,
    placement: PlacementConfig | None = None,
    placement_idx: int = 0,
    unit: tuple[int, int] = (0, 0),
) -> ScalingDiagnostics:
    """Sample the variance of I/M^2 over a lattice-refinement sweep.

    The deployment and the LOS gates are frozen once; each realization
    redraws scattered-path angles, fading, and noise. Freezing the gates
    keeps the channel law fixed so the sweep isolates the lattice effect;
    drawing angles before fading and noise keeps realizations paired
    across M values.
    """
    M_values = tuple(int(M) for M in M_values)
    if len(M_values) < 3:
        raise ValueError("scaling diagnostics needs at least 3 array sizes")
    if realizations < 2:
        raise ValueError("need at least 2 realizations for a variance")
    placement = placement or PlacementConfig()
    deployment = place_devices(
        config, layout, placement_rng(config.seed, placement_idx), placement=placement
    )
    n, k = unit
    N, K = config.N, config.K
    coins = stream(config.seed, DOMAIN_SCALING_COINS, placement_idx).random((N, K))
    t = config.pilot_len

    var_I = np.zeros(len(M_values))
    mean_I = np.zeros(len(M_values))
    mean_X = np.zeros(len(M_values))
    mean_Y = np.zeros(len(M_values))
    mean_Z = np.zeros(len(M_values))
    mean_mu_x_sq = np.zeros(len(M_values))

    for i, M in enumerate(M_values):
        cfg = dataclasses.replace(config, M=M)
        world = LinkWorld(deployment, cfg)
        geom = world.unit(n, k)
        M2 = float(M * M)
        samples = np.zeros(realizations)
        acc_X = acc_Y = acc_Z = acc_mx = 0.0
        for r in range(realizations):
            rng = stream(cfg.seed, DOMAIN_SCALING_BLOCK, placement_idx, r)
            draw = draw_unit_block(rng, N, K, cfg.P, M, coins=coins)
            stats = make_unit_stats(geom, draw, cfg)
            terms = unit_block_terms(stats, draw, t, world.rho_p, world.rho_d)
            samples[r] = terms.I / M2
            ms = build_moment_set(
                stats, t, world.rho_p, world.rho_d,
                z_own=deployment.devices_local[n, k, 2], L=cfg.L,
            )
            acc_X += ms.mu_X() / M2
            acc_Y += float(np.sum(ms.rho_d * ms.mu_Y_bar())) / M2
            acc_Z += ms.mu_Z() / M2
            acc_mx += abs(ms.mu_x) ** 2 / M2
        var_I[i] = float(np.var(samples, ddof=1))
        mean_I[i] = float(np.mean(samples))
        mean_X[i] = acc_X / realizations
        mean_Y[i] = acc_Y / realizations
        mean_Z[i] = acc_Z / realizations
        mean_mu_x_sq[i] = acc_mx / realizations

    logM = np.log(np.asarray(M_values, dtype=float))
    slope = float(np.polyfit(logM, np.log(var_I), 1)[0])
    return ScalingDiagnostics(
        M_values=M_values,
        var_I=var_I,
        mean_I=mean_I,
        slope=slope,
        mean_X=mean_X,
        mean_Y=mean_Y,
        mean_Z=mean_Z,
        mean_mu_x_sq=mean_mu_x_sq,
        realizations=realizations,
    )
