"""Pilot-length and device-count optimization on the deterministic SSE.

The pilot-length problem maximizes the prelog-weighted deterministic SSE
over t in [K, T]; the objective is unimodal (increasing SINR against a
linearly shrinking prelog), so a golden-section search plus an integer
refinement finds the global integer optimum. In the interference-floor
regime the SINR no longer depends on t and the optimum collapses to t = K.

The device-count problem scores K = 1..T with the floor-bound SINRs,
t = K, and devices admitted in fixed priority order; LOS gates enter
through their expectation, which keeps the curve deterministic for a
given deployment.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass

import numpy as np

from .asymptotics import quarter_solid_angle, theorem1_sse
from .config import SystemConfig
from .links import build_unit_geometry
from .scenario import Deployment, data_snrs, pilot_snrs
from .sinr import rate_log


@dataclass(frozen=True)
class PilotSolution:
    """Result of the pilot-length search."""

    t_opt_continuous: float
    t_opt: int
    objective_opt: float
    curve: tuple          # ((t, objective) pairs, evaluation order)
    iterations: int

    def trace(self) -> dict:
        return {
            "t_opt_continuous": self.t_opt_continuous,
            "t_opt": self.t_opt,
            "objective_opt": self.objective_opt,
            "iterations": self.iterations,
            "evaluations": [[float(t), float(v)] for t, v in self.curve],
        }

    def trace_json(self) -> str:
        return json.dumps(self.trace(), sort_keys=True)


_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


def optimal_pilot_length(moments, T: int, K: int, M: int | None = None) -> PilotSolution:
    """Maximize the deterministic SSE over the pilot length t in [K, T].

    moments: either a list of MomentSet (one per served device of the
    panel) or a callable t -> objective. Golden-section search shrinks the
    bracket below one symbol, then the neighboring integers and the
    interval endpoints are compared; ties prefer the smaller t.
    """
    if K < 1 or T < K:
        raise ValueError(f"need 1 <= K <= T, got K={K}, T={T}")
    if callable(moments):
        objective = moments
    else:
        sets = list(moments)
        if not sets:
            raise ValueError("need at least one unit's moments")

        def objective(t: float) -> float:
            return theorem1_sse(sets, t, T).sse_bar

    evals: list[tuple[float, float]] = []

    def f(t: float) -> float:
        v = float(objective(float(t)))
        if not math.isfinite(v):
            raise ValueError(f"objective is not finite at t={t}: {v}")
        evals.append((float(t), v))
        return v

    a, b = float(K), float(T)
    iterations = 0
    if b - a > 0.5:
        c = b - _INVPHI * (b - a)
        d = a + _INVPHI * (b - a)
        fc, fd = f(c), f(d)
        while b - a > 0.5:
            if fc >= fd:
                b, d, fd = d, c, fc
                c = b - _INVPHI * (b - a)
                fc = f(c)
            else:
                a, c, fc = c, d, fd
                d = a + _INVPHI * (b - a)
                fd = f(d)
            iterations += 1
    t_star = 0.5 * (a + b)

    candidates = {K, T, int(math.floor(t_star)), int(math.ceil(t_star)),
                  int(math.floor(a)), int(math.ceil(b))}
    best_t, best_v = None, -math.inf
    for t in sorted(c for c in candidates if K <= c <= T):
        v = f(t)
        if v > best_v + 1e-12:
            best_t, best_v = t, v
    return PilotSolution(
        t_opt_continuous=float(t_star),
        t_opt=int(best_t),
        objective_opt=float(best_v),
        curve=tuple(evals),
        iterations=iterations,
    )


def corollary1_t(K: int, T: int | None = None) -> int:
    """Pilot length in the interference-floor regime: exactly K symbols
    (one orthogonal pilot per served device, prelog maximal)."""
    K = int(K)
    if K < 1:
        raise ValueError(f"need K >= 1, got {K}")
    if T is not None and K >= int(T):
        warnings.warn(
            f"K={K} >= T={T}: the whole block is training (degenerate)",
            stacklevel=2,
        )
    return K


@dataclass(frozen=True)
class ExpectedFloorTable:
    """Deterministic interference floors of every unit, cumulative in the
    number of admitted devices.

    floor(n, k; K) = base[n, k] + sum_{j<K} leak[n, k, j]; devices are
    admitted in placement order, so growing K only appends leak columns.
    """

    base: np.ndarray      # (N, Kp) rho-weighted expected |mu_x|^2
    leak: np.ndarray      # (N, Kp, Kp) summed-over-panels leakage per admitted j
    p_bar: np.ndarray     # (N, Kp) deterministic serving powers
    rho_d_own: np.ndarray  # (N, Kp)

    @property
    def pool(self) -> int:
        return self.base.shape[1]

    def floors(self, K: int) -> np.ndarray:
        """(N, K) floor values for the first K devices."""
        if not (1 <= K <= self.pool):
            raise ValueError(f"K={K} outside [1, {self.pool}]")
        return self.base[:, :K] + np.sum(self.leak[:, :K, :K], axis=2)

    def gamma_hat(self, K: int) -> np.ndarray:
        """(N, K) floor-bound SINRs with K admitted devices."""
        fl = self.floors(K)
        rho = self.rho_d_own[:, :K]
        pb = self.p_bar[:, :K]
        with np.errstate(divide="ignore"):
            return np.where(fl > 0.0, rho * pb / fl, np.inf)


def expected_floor_table(
    deployment: Deployment, config: SystemConfig, regime: str = "rician"
) -> ExpectedFloorTable:
    """Build the expected-gating floor table over the full device pool.

    The LOS gate of each link enters through its expectation: squared
    means of sums of independently gated LOS terms expand into the squared
    expected sum plus a Bernoulli variance term. A same-pilot interferer
    shares its gate with its own contamination term, so that one term is
    pulled out of the expectation before squaring.

    regime follows the sampler: "rician" gates every interference link by
    its LOS probability; "nlos_inter" strips the LOS component from links
    arriving from other panels, leaving only same-panel floors.
    """
    if regime not in ("rician", "nlos_inter"):
        raise ValueError(f"unknown interference regime {regime!r}")
    N, Kp = deployment.N, deployment.K
    cfg = config
    if cfg.N != N or cfg.K != Kp:
        import dataclasses as _dc

        cfg = _dc.replace(config, N=N, K=Kp, t=None)
    rho_p = pilot_snrs(deployment, cfg)
    rho_d = data_snrs(deployment, cfg)
    M = cfg.M

    base = np.zeros((N, Kp))
    leak = np.zeros((N, Kp, Kp))
    p_bar = np.zeros((N, Kp))
    for n in range(N):
        for k in range(Kp):
            geom = build_unit_geometry(deployment, cfg, n, k)
            p = geom.p_los
            s = np.sqrt(geom.kappa_cand / (geom.kappa_cand + 1.0))
            if regime == "nlos_inter":
                s = np.where(np.arange(N)[:, np.newaxis] == n, s, 0.0)
            s2 = s * s
            hlos = geom.hlos
            own = hlos[n, k]
            u = np.einsum("m,ljm->lj", np.conj(own), hlos)
            V = np.einsum("cm,ljm->clj", np.conj(hlos[:, k]), hlos)

            a = np.sqrt(rho_p[:, k] / rho_p[n, k]) * s[:, k]
            a[n] = 0.0
            pk = p[:, k]

            x = a * np.conj(u[:, k])
            base[n, k] = rho_d[n, k] * (
                np.abs(np.sum(pk * x)) ** 2 + float(np.sum(pk * (1.0 - pk) * np.abs(x) ** 2))
            )

            mean_in = u + np.einsum("c,clj->lj", a * pk, V)
            var_in = np.einsum("c,clj->lj", a * a * pk * (1.0 - pk), np.abs(V) ** 2)
            for l in range(N):
                if l == n or a[l] == 0.0:
                    continue
                # same-pilot interferer: its gate is the c=l contamination gate
                mean_in[l, k] += a[l] * (1.0 - pk[l]) * V[l, l, k]
                var_in[l, k] -= a[l] ** 2 * pk[l] * (1.0 - pk[l]) * np.abs(V[l, l, k]) ** 2
            w = rho_d * p * s2 * (np.abs(mean_in) ** 2 + var_in)
            w[n, k] = 0.0
            leak[n, k] = np.einsum("lj->j", w)

            z_own = deployment.devices_local[n, k, 2]
            pq = quarter_solid_angle(cfg.L, z_own)
            p_bar[n, k] = M * M * pq * pq / (16.0 * math.pi**2 * cfg.L**4)

    return ExpectedFloorTable(base=base, leak=leak, p_bar=p_bar, rho_d_own=rho_d)


@dataclass(frozen=True)
class SchedulingSolution:
    """Result of the device-count search."""

    K_opt: int
    nse_opt: float
    K_values: tuple
    nse_curve: np.ndarray
    priority_order: tuple  # admission order of pool devices (per panel)

    def trace(self) -> dict:
        return {
            "K_opt": self.K_opt,
            "nse_opt": self.nse_opt,
            "K_values": [int(k) for k in self.K_values],
            "nse_curve": [float(v) for v in self.nse_curve],
        }

    def trace_json(self) -> str:
        return json.dumps(self.trace(), sort_keys=True)


def network_nse(sse_values, N: int | None = None) -> float:
    """Network spectral efficiency: arithmetic mean of the per-panel SSEs."""
    values = np.asarray(sse_values, dtype=float)
    if values.size == 0:
        raise ValueError("need at least one panel SSE")
    if N is not None and values.size != N:
        raise ValueError(f"got {values.size} panel SSEs for N={N}")
    return float(np.mean(values))


def nse_of_gammas(gammas: np.ndarray, K: int, T: int) -> float:
    """NSE for K admitted devices at t = K: prelog times the mean over
    panels of the per-panel SE sums."""
    gammas = np.asarray(gammas, dtype=float)
    prelog = 1.0 - K / T
    if prelog <= 0.0:
        return 0.0
    per_panel = np.sum(rate_log(1.0 + gammas), axis=-1)
    return float(prelog * np.mean(per_panel))


def optimal_num_devices(
    gamma_hat_provider,
    T: int,
    N: int | None = None,
    K_values=None,
    K_max: int | None = None,
) -> SchedulingSolution:
    """Score K = 1..min(K_max, T) admitted devices and return the argmax.

    gamma_hat_provider: K -> (N, K) deterministic SINRs of the first K
    devices per panel (pilot length t = K). The caller bounds the sweep to
    the placeable pool via K_max or an explicit K_values grid.
    """
    if K_values is None:
        top = min(int(K_max), int(T)) if K_max is not None else int(T)
        K_values = range(1, top + 1)
    K_values = [int(K) for K in K_values]
    if not K_values:
        raise ValueError("empty device-count candidate set")
    curve = np.empty(len(K_values))
    for i, K in enumerate(K_values):
        gam = np.asarray(gamma_hat_provider(K), dtype=float)
        if N is not None and gam.shape[0] != N:
            raise ValueError(f"provider returned {gam.shape[0]} panels, expected {N}")
        curve[i] = nse_of_gammas(gam, K, T)
    # A diverging objective means some unit has a zero deterministic floor
    # at that K, so the asymptotic bound carries no scheduling information
    # there; such K are kept in the curve but excluded from the argmax.
    finite = np.isfinite(curve)
    if not np.any(finite):
        raise ValueError("no admissible device count has a finite objective")
    masked = np.where(finite, curve, -np.inf)
    best = int(np.argmax(masked))  # first index wins ties: smallest K
    pool = max(K_values)
    return SchedulingSolution(
        K_opt=K_values[best],
        nse_opt=float(curve[best]),
        K_values=tuple(K_values),
        nse_curve=curve,
        priority_order=tuple(range(pool)),
    )
