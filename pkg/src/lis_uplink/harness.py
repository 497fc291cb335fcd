"""Monte Carlo experiment engine: figure runners, aggregation, CSV output.

Randomness is addressed, not sequenced: every placement and every
(block, unit) pair gets its own seed-derived substream, so results do not
depend on scheduling. Workers parallelize over placements; records are
concatenated in placement order and aggregated with fixed-order
reductions, which makes output files byte-identical for any worker count.
"""

from __future__ import annotations

import dataclasses
import json
import math
import os
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .asymptotics import build_moment_set, theorem1_sse
from .channel import cgauss
from .config import (
    ConfigError,
    ExperimentConfig,
    LayoutConfig,
    PlacementConfig,
    RunConfig,
    SystemConfig,
)
from .links import (
    DOMAIN_BLOCK,
    BlockKernel,
    LinkWorld,
    draw_unit_block,
    make_unit_stats,
    placement_rng,
    slice_stats,
    stream,
)
from .optimize import expected_floor_table, nse_of_gammas, optimal_num_devices
from .scenario import place_devices
from .sinr import rate_log

# Default sweep per experiment preset (variable, values). fig8 sweeps the
# admitted-device count over the whole placeable pool, so its grid is
# derived at run time.
_DEFAULT_SWEEPS: dict[str, tuple[str, tuple]] = {
    "fig4": ("M", (36, 144, 400, 900)),
    "fig5": ("M", (100, 400, 900)),
    "fig6": ("M", (100, 400, 900)),
    "fig6b": ("M", (100, 400, 900)),
    "fig7": ("t", (8, 12, 16, 24, 32, 48, 64, 96, 128, 192, 256, 384, 500)),
    "fig8": ("K", ()),
    "fig9": ("M", (100, 196, 400)),
    "oracle": ("M", (16, 100)),
}
_DEFAULT_REGIME = {"fig6": "nlos_inter", "fig6b": "nlos_inter"}

_MC_KSWEEP_CAP = 225  # sampled device-count curves cap the array size here
_DEFAULT_K_GRID = (1, 2, 4, 6, 8, 10, 12, 14, 16, 18, 20, 24, 28, 32, 36, 40)


@dataclass(frozen=True)
class ExperimentSpec:
    """A fully resolved experiment: configuration plus concrete sweep."""

    system: SystemConfig
    layout: LayoutConfig
    placement: PlacementConfig
    experiment: ExperimentConfig

    @classmethod
    def from_run_config(cls, rc: RunConfig) -> "ExperimentSpec":
        exp = rc.experiment
        want_var, want_vals = _DEFAULT_SWEEPS[exp.id]
        if exp.sweep_values == ():
            var, values = want_var, want_vals
        else:
            if exp.sweep_variable != want_var:
                raise ConfigError(
                    f"experiment {exp.id!r} sweeps {want_var!r}, "
                    f"got sweep_variable={exp.sweep_variable!r}",
                    "experiment.sweep_variable",
                )
            var, values = want_var, exp.sweep_values
        if var == "t":
            lo, hi = rc.system.pilot_len, rc.system.T
            bad = [v for v in values if not (lo <= v <= hi)]
            if bad:
                raise ConfigError(
                    f"pilot sweep values must lie in [{lo}, {hi}], got {bad}",
                    "experiment.sweep_values",
                )
        interference = exp.interference or _DEFAULT_REGIME.get(exp.id, "rician")
        resolved = dataclasses.replace(
            exp, sweep_variable=var, sweep_values=values, interference=interference
        )
        return cls(
            system=rc.system,
            layout=rc.layout,
            placement=rc.placement,
            experiment=resolved,
        )

    @property
    def seed(self) -> int:
        return self.system.seed

    def resolved_run_config(self) -> RunConfig:
        return RunConfig(
            system=self.system,
            layout=self.layout,
            placement=self.placement,
            experiment=self.experiment,
        )

    def to_dict(self) -> dict:
        return self.resolved_run_config().to_dict()


@dataclass(frozen=True)
class RawRecord:
    """One per-realization sample of one curve."""

    sweep_value: float
    label: str
    placement: int
    realization: int
    value: float


@dataclass(frozen=True)
class StatSummary:
    """Aggregated statistics of one curve at one sweep point."""

    sweep_value: float
    mean: float
    variance: float
    stderr: float
    count: int
    label: str


@dataclass(frozen=True)
class ExperimentResult:
    spec: ExperimentSpec
    records: list
    summaries: list
    extras: dict


def summarize(records) -> list[StatSummary]:
    """Group records by (label, sweep value) into StatSummary rows.

    The reduction is order-fixed (records arrive placement-major), so the
    output is deterministic for a given record set.
    """
    groups: dict[tuple[str, float], list[float]] = {}
    for r in records:
        groups.setdefault((r.label, float(r.sweep_value)), []).append(r.value)
    out = []
    for (label, sweep), vals in sorted(groups.items()):
        arr = np.asarray(vals, dtype=float)
        n = arr.size
        mean = float(np.mean(arr))
        var = float(np.var(arr, ddof=1)) if n > 1 else 0.0
        out.append(
            StatSummary(
                sweep_value=sweep,
                mean=mean,
                variance=var,
                stderr=math.sqrt(var / n),
                count=n,
                label=label,
            )
        )
    return out


# ---------------------------------------------------------------------------
# worker plumbing


def resolve_workers(workers=None) -> int:
    """Explicit argument, else LIS_SIM_WORKERS, else 1."""
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get("LIS_SIM_WORKERS", "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigError(
                f"LIS_SIM_WORKERS must be an integer, got {env!r}", "LIS_SIM_WORKERS"
            ) from exc
    return 1


def _pmap(fn, tasks, workers: int) -> list:
    if workers <= 1 or len(tasks) <= 1:
        return [fn(task) for task in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        return list(pool.map(fn, tasks, chunksize=1))


def _place(spec: ExperimentSpec, p_idx: int, K=None, allow_partial=False):
    return place_devices(
        spec.system,
        spec.layout,
        placement_rng(spec.seed, p_idx),
        placement=spec.placement,
        K=K,
        allow_partial=allow_partial,
    )


def _unit_rng(seed: int, p_idx: int, b_idx: int, n_key: int, k: int):
    return stream(seed, DOMAIN_BLOCK, p_idx, b_idx, n_key, k)


def _panel0_draw(draw):
    """Panel-0 slice of a multi-panel draw: the single-LIS twin sees the
    same gates, angles, fading, and receiver noise, so multi-vs-single
    differences are paired and carry only the inter-panel terms."""
    return dataclasses.replace(
        draw, coins=draw.coins[:1], angles=draw.angles[:1], g=draw.g[:1]
    )


# ---------------------------------------------------------------------------
# figure workers (module-level for pickling)


def _worker_se_variance(task):
    """Per-device SE variance of unit (0, 0) across fast-fading draws,
    multi- and single-LIS. The slow state (gates, scattering angles) is
    frozen per placement so the statistic isolates channel hardening; the
    single-LIS twin runs on the panel-0 slice of the same condition and
    shares every fading and noise draw. One record per placement carries
    the within-placement variance; curves then average over placements."""
    spec, p = task
    cfg0 = spec.system
    exp = spec.experiment
    dep = _place(spec, p)
    dep1 = dep.panel(0)
    recs = []
    extras = {"mean_se": {}}
    for M in exp.sweep_values:
        cfg = dataclasses.replace(cfg0, M=int(M))
        cfg1 = dataclasses.replace(cfg, N=1)
        world = LinkWorld(dep, cfg)
        world1 = LinkWorld(dep1, cfg1)
        geom = world.unit(0, 0)
        geom1 = world1.unit(0, 0)
        t, T = cfg.pilot_len, cfg.T
        prelog = 1.0 - t / T
        cond = draw_unit_block(
            _unit_rng(spec.seed, p, 0, 0, 0), cfg.N, cfg.K, cfg.P, cfg.M
        )
        cond1 = _panel0_draw(cond)
        pairs = (
            ("multi-LIS SE variance",
             make_unit_stats(geom, cond, cfg, exp.interference), world, slice(None)),
            ("single-LIS SE variance",
             make_unit_stats(geom1, cond1, cfg1, exp.interference), world1, slice(0, 1)),
        )
        se = {label: np.empty(exp.realizations) for label, *_ in pairs}
        for b in range(exp.realizations):
            rng = _unit_rng(spec.seed, p, b + 1, 0, 0)
            g = cgauss(rng, (cfg.N, cfg.K, cfg.P))
            w = cgauss(rng, (cfg.M,))
            for label, stats, wd, rows in pairs:
                kern = BlockKernel(stats, g[rows], w, wd.rho_p, wd.rho_d)
                se[label][b] = prelog * float(rate_log(1.0 + kern.gamma(t)))
        for label, *_ in pairs:
            var = float(np.var(se[label], ddof=1)) if exp.realizations > 1 else 0.0
            recs.append((float(M), label, p, 0, var))
            extras["mean_se"].setdefault(label, {})[int(M)] = float(np.mean(se[label]))
    return {"records": recs, "extras": extras}


def _worker_ergodic(task):
    """Panel-0 SSE samples plus paired analytic curves. The single-LIS
    world reuses the panel-0 slice of each multi-LIS draw, so the
    multi-vs-single gap is a paired difference."""
    spec, p = task
    cfg0 = spec.system
    exp = spec.experiment
    stride = exp.theory_stride or max(1, exp.realizations // 8)
    dep = _place(spec, p)
    dep1 = dep.panel(0)
    recs = []
    for M in exp.sweep_values:
        cfg = dataclasses.replace(cfg0, M=int(M))
        cfg1 = dataclasses.replace(cfg, N=1)
        world = LinkWorld(dep, cfg)
        world1 = LinkWorld(dep1, cfg1)
        t, T = cfg.pilot_len, cfg.T
        prelog = 1.0 - t / T
        geoms = [world.unit(0, k) for k in range(cfg.K)]
        geoms1 = [world1.unit(0, k) for k in range(cfg.K)]
        for b in range(exp.realizations):
            gammas = np.empty(cfg.K)
            gammas1 = np.empty(cfg.K)
            sets = [] if b % stride == 0 else None
            sets1 = [] if sets is not None else None
            for k in range(cfg.K):
                rng = _unit_rng(spec.seed, p, b, 0, k)
                draw = draw_unit_block(rng, cfg.N, cfg.K, cfg.P, cfg.M)
                draw1 = _panel0_draw(draw)
                stats = make_unit_stats(geoms[k], draw, cfg, exp.interference)
                stats1 = make_unit_stats(geoms1[k], draw1, cfg1, exp.interference)
                kern = BlockKernel(stats, draw.g, draw.w, world.rho_p, world.rho_d)
                kern1 = BlockKernel(stats1, draw1.g, draw1.w, world1.rho_p, world1.rho_d)
                gammas[k] = kern.gamma(t)
                gammas1[k] = kern1.gamma(t)
                if sets is not None:
                    z_own = dep.devices_local[0, k, 2]
                    sets.append(
                        build_moment_set(stats, t, world.rho_p, world.rho_d,
                                         z_own=z_own, L=cfg.L)
                    )
                    sets1.append(
                        build_moment_set(stats1, t, world1.rho_p, world1.rho_d,
                                         z_own=z_own, L=cfg.L)
                    )
            recs.append((float(M), "multi-LIS imperfect CSI", p, b,
                         prelog * float(np.sum(rate_log(1.0 + gammas)))))
            recs.append((float(M), "single-LIS imperfect CSI", p, b,
                         prelog * float(np.sum(rate_log(1.0 + gammas1)))))
            if sets is not None:
                for th_labels, th_sets in (
                    (("Theorem 1", "Theorem 2 bound"), sets),
                    (("Theorem 1 single-LIS", "Theorem 2 bound single-LIS"), sets1),
                ):
                    th = theorem1_sse(th_sets, t, T)
                    recs.append((float(M), th_labels[0], p, b, th.sse_bar))
                    if math.isfinite(th.sse_hat):
                        # an interference-free draw has an unbounded floor;
                        # such blocks are excluded from the bound curve
                        recs.append((float(M), th_labels[1], p, b, th.sse_hat))
    return {"records": recs, "extras": {}}


def _worker_csi(task):
    """Panel-0 SSE with estimated and with exact filters, multi and single,
    all four curves from the same paired draws."""
    spec, p = task
    cfg0 = spec.system
    exp = spec.experiment
    dep = _place(spec, p)
    dep1 = dep.panel(0)
    recs = []
    for M in exp.sweep_values:
        cfg = dataclasses.replace(cfg0, M=int(M))
        cfg1 = dataclasses.replace(cfg, N=1)
        world = LinkWorld(dep, cfg)
        world1 = LinkWorld(dep1, cfg1)
        t, T = cfg.pilot_len, cfg.T
        prelog = 1.0 - t / T
        geoms = [world.unit(0, k) for k in range(cfg.K)]
        geoms1 = [world1.unit(0, k) for k in range(cfg.K)]
        for b in range(exp.realizations):
            gam = {lab: np.empty(cfg.K) for lab in ("multi", "single")}
            gam_p = {lab: np.empty(cfg.K) for lab in ("multi", "single")}
            for k in range(cfg.K):
                rng = _unit_rng(spec.seed, p, b, 0, k)
                draw = draw_unit_block(rng, cfg.N, cfg.K, cfg.P, cfg.M)
                draw1 = _panel0_draw(draw)
                stats = make_unit_stats(geoms[k], draw, cfg, exp.interference)
                stats1 = make_unit_stats(geoms1[k], draw1, cfg1, exp.interference)
                kern = BlockKernel(stats, draw.g, draw.w, world.rho_p, world.rho_d)
                kern1 = BlockKernel(stats1, draw1.g, draw1.w, world1.rho_p, world1.rho_d)
                gam["multi"][k] = kern.gamma(t)
                gam["single"][k] = kern1.gamma(t)
                gam_p["multi"][k] = kern.gamma_perfect
                gam_p["single"][k] = kern1.gamma_perfect
            for lab, tag in (("multi", "multi-LIS"), ("single", "single-LIS")):
                recs.append(
                    (float(M), f"{tag} imperfect CSI", p, b,
                     prelog * float(np.sum(rate_log(1.0 + gam[lab]))))
                )
                recs.append(
                    (float(M), f"{tag} perfect CSI", p, b,
                     prelog * float(np.sum(rate_log(1.0 + gam_p[lab]))))
                )
    return {"records": recs, "extras": {}}


def _worker_pilot(task):
    """SSE versus pilot length on a fixed array size; sampled kernels are
    reused across the whole t grid."""
    spec, p = task
    cfg = spec.system
    exp = spec.experiment
    stride = exp.theory_stride or max(1, exp.realizations // 2)
    t_values = [int(v) for v in exp.sweep_values]
    dep = _place(spec, p)
    world = LinkWorld(dep, cfg)
    T = cfg.T
    geoms = [world.unit(0, k) for k in range(cfg.K)]
    recs = []
    for b in range(exp.realizations):
        kernels = []
        sets = [] if b % stride == 0 else None
        for k in range(cfg.K):
            rng = _unit_rng(spec.seed, p, b, 0, k)
            draw = draw_unit_block(rng, cfg.N, cfg.K, cfg.P, cfg.M)
            stats = make_unit_stats(geoms[k], draw, cfg, exp.interference)
            kernels.append(BlockKernel(stats, draw.g, draw.w, world.rho_p, world.rho_d))
            if sets is not None:
                sets.append(
                    build_moment_set(
                        stats, cfg.pilot_len, world.rho_p, world.rho_d,
                        z_own=dep.devices_local[0, k, 2], L=cfg.L,
                    )
                )
        for t in t_values:
            prelog = 1.0 - t / T
            if prelog <= 0.0:
                sse = 0.0
            else:
                gam = np.array([kern.gamma(t) for kern in kernels])
                sse = prelog * float(np.sum(rate_log(1.0 + gam)))
            recs.append((float(t), "multi-LIS imperfect CSI", p, b, sse))
            if sets is not None:
                recs.append((float(t), "Theorem 1", p, b, theorem1_sse(sets, t, T).sse_bar))
    return {"records": recs, "extras": {}}


def _worker_ksweep(task):
    """Deterministic NSE(K) curve over the placeable pool plus a sampled
    cross-check curve at a tractable array size."""
    spec, p = task
    cfg = spec.system
    exp = spec.experiment
    T = cfg.T
    pool_target = spec.placement.pool_size or min(T - 1, 40)
    dep = _place(spec, p, K=pool_target, allow_partial=True)
    pool = dep.K

    table = expected_floor_table(dep, cfg, regime=exp.interference)
    sol = optimal_num_devices(table.gamma_hat, T, K_values=range(1, pool + 1))
    recs = [
        (float(Kv), "Theorem 2 bound NSE", p, 0, float(v))
        for Kv, v in zip(sol.K_values, sol.nse_curve)
        if math.isfinite(v)
    ]

    mc_M = cfg.M if cfg.M <= _MC_KSWEEP_CAP else 196
    cfg_mc = dataclasses.replace(cfg, M=mc_M, K=pool, t=None)
    grid = [int(v) for v in exp.sweep_values] or list(_DEFAULT_K_GRID)
    K_grid = sorted({K for K in grid if 1 <= K <= pool} | {sol.K_opt})
    world = LinkWorld(dep, cfg_mc)
    for b in range(exp.realizations):
        gam = {K: np.empty((cfg.N, K)) for K in K_grid}
        for n in range(cfg.N):
            for k in range(pool):
                active = [K for K in K_grid if k < K]
                if not active:
                    continue
                geom = world.unit(n, k)
                rng = _unit_rng(spec.seed, p, b, n, k)
                draw = draw_unit_block(rng, cfg.N, pool, cfg_mc.P, mc_M)
                stats = make_unit_stats(geom, draw, cfg_mc, exp.interference)
                for K in active:
                    sliced = slice_stats(stats, K)
                    kern = BlockKernel(
                        sliced, draw.g[:, :K], draw.w,
                        world.rho_p[:, :K], world.rho_d[:, :K],
                    )
                    gam[K][n, k] = kern.gamma(K)  # pilot length t = K
        for K in K_grid:
            recs.append((float(K), "Monte Carlo NSE", p, b, nse_of_gammas(gam[K], K, T)))

    extras = {
        "pool": pool,
        "K_opt": sol.K_opt,
        "nse_opt": sol.nse_opt,
        "mc_M": mc_M,
        "K_grid": list(K_grid),
        "det_curve": [float(v) for v in sol.nse_curve],
    }
    return {"records": recs, "extras": extras}


def _worker_nse_vs_m(task):
    """NSE versus array size under three admission policies: the
    deterministic optimum, its sampled value, and fixed K=20."""
    spec, p = task
    cfg0 = spec.system
    exp = spec.experiment
    T = cfg0.T
    pool_target = spec.placement.pool_size or min(T - 1, 40)
    dep = _place(spec, p, K=pool_target, allow_partial=True)
    pool = dep.K
    recs = []
    extras = {"pool": pool, "K_opt": {}}
    for M in exp.sweep_values:
        cfgM = dataclasses.replace(cfg0, M=int(M), K=pool, t=None)
        table = expected_floor_table(dep, cfgM, regime=exp.interference)
        sol = optimal_num_devices(table.gamma_hat, T, K_values=range(1, pool + 1))
        K_opt = sol.K_opt
        K_fix = min(20, pool)
        extras["K_opt"][int(M)] = K_opt
        recs.append((float(M), "Theorem 2 bound NSE at optimized K", p, 0, sol.nse_opt))
        world = LinkWorld(dep, cfgM)
        for K, label in ((K_opt, "Monte Carlo NSE at optimized K"),
                         (K_fix, "Monte Carlo NSE at K=20")):
            for b in range(exp.realizations):
                gam = np.empty((cfg0.N, K))
                for n in range(cfg0.N):
                    for k in range(K):
                        geom = world.unit(n, k)
                        rng = _unit_rng(spec.seed, p, b, n, k)
                        draw = draw_unit_block(rng, cfg0.N, pool, cfgM.P, cfgM.M)
                        stats = make_unit_stats(geom, draw, cfgM, exp.interference)
                        sliced = slice_stats(stats, K)
                        kern = BlockKernel(
                            sliced, draw.g[:, :K], draw.w,
                            world.rho_p[:, :K], world.rho_d[:, :K],
                        )
                        gam[n, k] = kern.gamma(K)
                recs.append((float(M), label, p, b, nse_of_gammas(gam, K, T)))
    return {"records": recs, "extras": extras}


def _worker_oracle(task):
    """Sampling oracle: conditional means of X, Y, Z, I versus their
    closed forms on one frozen channel-statistics draw per array size.

    The gating coins and scattered-path angles come from the same
    substream at every M (they are drawn before anything M-shaped), so the
    two array sizes share one channel condition and the leakage-formula
    error can be compared across M.
    """
    spec, p = task
    cfg0 = spec.system
    exp = spec.experiment
    dep = _place(spec, p)
    recs = []
    report = []
    n, k = 0, 0
    R = exp.realizations
    for M in exp.sweep_values:
        cfg = dataclasses.replace(cfg0, M=int(M))
        world = LinkWorld(dep, cfg)
        geom = world.unit(n, k)
        t = cfg.pilot_len
        cond = draw_unit_block(_unit_rng(spec.seed, p, 0, n, k), cfg.N, cfg.K, cfg.P, cfg.M)
        stats = make_unit_stats(geom, cond, cfg, exp.interference)
        ms = build_moment_set(
            stats, t, world.rho_p, world.rho_d,
            z_own=dep.devices_local[n, k, 2], L=cfg.L,
        )
        M2 = float(cfg.M) ** 2
        X = np.empty(R)
        Y_tot = np.empty(R)
        Z = np.empty(R)
        I = np.empty(R)
        for r in range(R):
            rng = _unit_rng(spec.seed, p, r + 1, n, k)
            g = cgauss(rng, (cfg.N, cfg.K, cfg.P))
            w = cgauss(rng, (cfg.M,))
            terms = BlockKernel(stats, g, w, world.rho_p, world.rho_d).terms(t)
            X[r], Z[r], I[r] = terms.X, terms.Z, terms.I
            Y_tot[r] = float(np.sum(world.rho_d * terms.Y))
            recs.append((float(M), "X", p, r, terms.X))
            recs.append((float(M), "Y total", p, r, Y_tot[r]))
            recs.append((float(M), "Z", p, r, terms.Z))
            recs.append((float(M), "I over M^2", p, r, terms.I / M2))

        closed_Y = float(np.sum(ms.rho_d * ms.mu_Y_bar()))
        closed_I = ms.mu_I_bar()

        def _entry(samples, closed):
            mean = float(np.mean(samples))
            stderr = float(np.std(samples, ddof=1) / math.sqrt(R))
            z = (mean - closed) / stderr if stderr > 0 else 0.0
            rel = abs(closed - mean) / abs(mean) if mean != 0 else math.inf
            return {"closed": closed, "mc_mean": mean, "mc_stderr": stderr,
                    "z": z, "rel_err": rel}

        report.append(
            {
                "M": int(M),
                "unit": [n, k],
                "t": t,
                "kappa": [[float(v) for v in row] for row in stats.kappa],
                "X": _entry(X, ms.mu_X()),
                "Y_total": _entry(Y_tot, closed_Y),
                "Z": _entry(Z, ms.mu_Z()),
                "I": _entry(I, closed_I),
                "I_over_M2": _entry(I / M2, closed_I / M2),
            }
        )
    return {"records": recs, "extras": {"oracle": report}}


def _worker_asymptotic(task):
    """Analytic curves only: per-block closed forms with no receive-side
    sampling (the gates and scattering angles are still drawn per block)."""
    spec, p = task
    cfg0 = spec.system
    exp = spec.experiment
    dep = _place(spec, p)
    recs = []
    for M in exp.sweep_values:
        cfg = dataclasses.replace(cfg0, M=int(M))
        world = LinkWorld(dep, cfg)
        t, T = cfg.pilot_len, cfg.T
        geoms = [world.unit(0, k) for k in range(cfg.K)]
        for b in range(exp.realizations):
            sets = []
            for k in range(cfg.K):
                rng = _unit_rng(spec.seed, p, b, 0, k)
                draw = draw_unit_block(rng, cfg.N, cfg.K, cfg.P, cfg.M)
                stats = make_unit_stats(geoms[k], draw, cfg, exp.interference)
                sets.append(
                    build_moment_set(
                        stats, t, world.rho_p, world.rho_d,
                        z_own=dep.devices_local[0, k, 2], L=cfg.L,
                    )
                )
            th = theorem1_sse(sets, t, T)
            recs.append((float(M), "Theorem 1", p, b, th.sse_bar))
            if math.isfinite(th.sse_hat):
                recs.append((float(M), "Theorem 2 bound", p, b, th.sse_hat))
    return {"records": recs, "extras": {}}


def run_asymptotic(rc: RunConfig, workers=None) -> ExperimentResult:
    """Run the analytic-curve branch of an M-sweep experiment."""
    _expect_id(rc, ("fig4", "fig5", "fig6", "fig6b"))
    spec = ExperimentSpec.from_run_config(rc)
    nworkers = resolve_workers(workers)
    tasks = [(spec, p) for p in range(spec.experiment.placements)]
    outs = _pmap(_worker_asymptotic, tasks, nworkers)
    records = [RawRecord(*tup) for out in outs for tup in out["records"]]
    extras = {"placements": [out["extras"] for out in outs]}
    return ExperimentResult(
        spec=spec, records=records, summaries=summarize(records), extras=extras
    )


_RUNNERS = {
    "fig4": _worker_se_variance,
    "fig5": _worker_ergodic,
    "fig6": _worker_ergodic,
    "fig6b": _worker_csi,
    "fig7": _worker_pilot,
    "fig8": _worker_ksweep,
    "fig9": _worker_nse_vs_m,
    "oracle": _worker_oracle,
}


def run_experiment(run_config: RunConfig, workers=None) -> ExperimentResult:
    """Resolve, run, and aggregate the experiment named by the config."""
    spec = ExperimentSpec.from_run_config(run_config)
    nworkers = resolve_workers(workers)
    fn = _RUNNERS[spec.experiment.id]
    tasks = [(spec, p) for p in range(spec.experiment.placements)]
    outs = _pmap(fn, tasks, nworkers)
    records = [RawRecord(*tup) for out in outs for tup in out["records"]]
    extras = {"placements": [out["extras"] for out in outs]}
    return ExperimentResult(
        spec=spec,
        records=records,
        summaries=summarize(records),
        extras=extras,
    )


def _expect_id(rc: RunConfig, allowed: tuple[str, ...]):
    if rc.experiment.id not in allowed:
        raise ConfigError(
            f"runner expects experiment.id in {allowed}, got {rc.experiment.id!r}",
            "experiment.id",
        )


def run_se_variance(rc: RunConfig, workers=None) -> ExperimentResult:
    _expect_id(rc, ("fig4",))
    return run_experiment(rc, workers)


def run_ergodic_sse(rc: RunConfig, workers=None) -> ExperimentResult:
    _expect_id(rc, ("fig5", "fig6"))
    return run_experiment(rc, workers)


def run_csi_comparison(rc: RunConfig, workers=None) -> ExperimentResult:
    _expect_id(rc, ("fig6b",))
    return run_experiment(rc, workers)


def run_pilot_sweep(rc: RunConfig, workers=None) -> ExperimentResult:
    _expect_id(rc, ("fig7",))
    return run_experiment(rc, workers)


def run_k_sweep(rc: RunConfig, workers=None) -> ExperimentResult:
    _expect_id(rc, ("fig8", "fig9"))
    return run_experiment(rc, workers)


def run_moment_oracle(rc: RunConfig, workers=None) -> ExperimentResult:
    _expect_id(rc, ("oracle",))
    return run_experiment(rc, workers)


# ---------------------------------------------------------------------------
# output files

CSV_HEADER = "sweep_value,mean,variance,stderr,count,label"
RAW_HEADER = "sweep_value,placement,realization,value,label"


def _fmt(x: float) -> str:
    return repr(float(x))


def _slug(label: str) -> str:
    return re.sub(r"[^a-z0-9]+", "-", label.lower()).strip("-")


def _jsonable(value):
    if isinstance(value, dict):
        return {str(key): _jsonable(v) for key, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    return value


def write_outputs(result: ExperimentResult, out_dir) -> list[Path]:
    """Write one CSV per curve, the optional raw-record CSV, and the JSON
    manifest (config echo, seed, content hash). Bytes depend only on the
    result content, never on worker scheduling."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    exp_id = result.spec.experiment.id
    rc = result.spec.resolved_run_config()
    files: list[Path] = []

    labels = sorted({s.label for s in result.summaries})
    for label in labels:
        if "," in label:
            raise ValueError(f"curve label may not contain a comma: {label!r}")
        rows = [s for s in result.summaries if s.label == label]
        rows.sort(key=lambda s: s.sweep_value)
        path = out / f"{exp_id}_{_slug(label)}.csv"
        lines = [CSV_HEADER]
        for s in rows:
            lines.append(
                f"{_fmt(s.sweep_value)},{_fmt(s.mean)},{_fmt(s.variance)},"
                f"{_fmt(s.stderr)},{s.count},{s.label}"
            )
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        files.append(path)

    if result.spec.experiment.raw_records:
        path = out / f"{exp_id}_raw.csv"
        lines = [RAW_HEADER]
        for r in result.records:
            lines.append(
                f"{_fmt(r.sweep_value)},{r.placement},{r.realization},"
                f"{_fmt(r.value)},{r.label}"
            )
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        files.append(path)

    manifest = {
        "experiment_id": exp_id,
        "seed": result.spec.seed,
        "config": rc.to_dict(),
        "config_hash": rc.content_hash(),
        "outputs": [f.name for f in files],
        "extras": _jsonable(result.extras),
    }
    mpath = out / f"{exp_id}_manifest.json"
    mpath.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    files.append(mpath)
    return files


# ---------------------------------------------------------------------------
# presets


def preset_run_config(experiment_id: str, seed: int = 0) -> RunConfig:
    """Desk-scale defaults per figure: the reference scenario (3 GHz,
    2L = 0.5 m, 0 dB pilot and 3 dB data targets, T = 500 or 50) with
    sample counts sized for a single workstation."""
    if experiment_id not in _RUNNERS:
        raise ConfigError(
            f"unknown experiment id {experiment_id!r}; choose from "
            + ", ".join(sorted(_RUNNERS)),
            "experiment.id",
        )
    system = SystemConfig(M=900, K=8, N=4, T=500, seed=seed)
    layout = LayoutConfig()
    placement = PlacementConfig()
    if experiment_id == "fig4":
        system = dataclasses.replace(system, K=20)
        experiment = ExperimentConfig(id="fig4", realizations=500, placements=10)
    elif experiment_id == "fig5":
        experiment = ExperimentConfig(id="fig5", realizations=24, placements=4)
    elif experiment_id == "fig6":
        experiment = ExperimentConfig(id="fig6", realizations=24, placements=4)
    elif experiment_id == "fig6b":
        experiment = ExperimentConfig(id="fig6b", realizations=48, placements=4)
    elif experiment_id == "fig7":
        experiment = ExperimentConfig(
            id="fig7", realizations=24, placements=4, theory_stride=12
        )
    elif experiment_id == "fig8":
        system = dataclasses.replace(system, K=20, T=50)
        experiment = ExperimentConfig(id="fig8", realizations=8, placements=12)
    elif experiment_id == "fig9":
        system = dataclasses.replace(system, M=400, K=20, T=50)
        experiment = ExperimentConfig(id="fig9", realizations=4, placements=3)
    else:  # oracle
        system = dataclasses.replace(system, M=100, K=2, N=2, P=4)
        layout = LayoutConfig(name="line", d_x=0.5)
        experiment = ExperimentConfig(id="oracle", realizations=10000, placements=1)
    return RunConfig(system=system, layout=layout, placement=placement, experiment=experiment)
