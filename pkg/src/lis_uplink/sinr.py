"""Matched-filter SINR decomposition and instantaneous spectral efficiency.

The receiver beamforms with the estimated serving channel. The desired
power is the deterministic squared LOS energy; interference splits into an
estimation-error alignment term, per-interferer leakage terms, and the
filter-noise term, each scaled by the transmitter's data SNR.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Single spectral-log base shared with the closed-form module: rates in bits.
def rate_log(x):
    """log2, the spectral-efficiency log (bits per channel use)."""
    return np.log2(x)


@dataclass(frozen=True)
class InterferenceBreakdown:
    """Composite interference of one unit for one realization."""

    S: float             # desired power (sum_m beta_m^2)^2
    X: float             # error-alignment power |e^H h_los|^2
    Y_intra: np.ndarray  # (K-1,) same-panel leakage |h_hat^H h|^2
    Y_inter: np.ndarray  # ((N-1)*K,) other-panel leakage |h_hat^H h|^2
    Z: float             # filter norm ||h_los + e||^2 (noise beam power)
    I: float             # rho-weighted sum per the SINR denominator

    def reassemble(self, rho_own: float, rho_intra: np.ndarray, rho_inter: np.ndarray) -> float:
        """Recompute I from the stored parts (consistency check)."""
        return float(
            rho_own * self.X
            + np.sum(rho_intra * self.Y_intra)
            + np.sum(rho_inter * self.Y_inter)
            + self.Z
        )


@dataclass(frozen=True)
class SseResult:
    """Per-device spectral efficiencies and their panel sum."""

    per_device_se: np.ndarray  # (K,) bits/s/Hz
    sse: float                 # prelog * sum of per-device SE
    prelog: float              # 1 - t/T
    gamma: np.ndarray          # (K,) SINRs


def desired_power(h_los) -> float:
    """Deterministic matched-filter signal power (sum_m beta_m^2)^2 of the
    serving LOS channel; accepts the channel vector or its gain array."""
    v = np.asarray(h_los)
    return float(np.sum(np.abs(v) ** 2) ** 2)


def interference_power(
    estimate,
    channels: np.ndarray,
    rho_d: np.ndarray,
    n: int,
    k: int,
) -> InterferenceBreakdown:
    """Exact interference decomposition for unit (n, k).

    estimate: ChannelEstimate with the error recorded; channels: (N, K, M)
    link realizations toward this unit (the serving slot is ignored as an
    interferer); rho_d: (N, K) data SNRs.
    """
    h_hat = estimate.estimate
    e = estimate.error
    h_los = estimate.h_los
    if e is None or h_los is None:
        raise ValueError("estimate must carry its error decomposition")
    channels = np.asarray(channels)
    N, K, M = channels.shape
    rho_d = np.asarray(rho_d, dtype=float)

    X = float(np.abs(np.einsum("m,m->", np.conj(e), h_los)) ** 2)
    Z = float(np.sum(np.abs(h_hat) ** 2))
    leak = np.abs(np.einsum("m,ljm->lj", np.conj(h_hat), channels)) ** 2

    intra_mask = np.zeros((N, K), dtype=bool)
    intra_mask[n, :] = True
    intra_mask[n, k] = False
    inter_mask = np.ones((N, K), dtype=bool)
    inter_mask[n, :] = False

    S = desired_power(h_los)
    I = (
        rho_d[n, k] * X
        + float(np.sum(rho_d[intra_mask] * leak[intra_mask]))
        + float(np.sum(rho_d[inter_mask] * leak[inter_mask]))
        + Z
    )
    return InterferenceBreakdown(
        S=S,
        X=X,
        Y_intra=leak[intra_mask],
        Y_inter=leak[inter_mask],
        Z=Z,
        I=I,
    )


def instantaneous_sinr(S: float, I: float, rho_nk: float) -> float:
    """Received SINR gamma = rho * S / I."""
    if I <= 0:
        raise ValueError(f"interference-plus-noise power must be positive, got {I}")
    return float(rho_nk) * float(S) / float(I)


def instantaneous_sse(gammas, t: int, T: int) -> SseResult:
    """Panel sum spectral efficiency with the (1 - t/T) training prelog."""
    gammas = np.asarray(gammas, dtype=float)
    if not (0 <= t <= T):
        raise ValueError(f"pilot length t={t} must lie in [0, T={T}]")
    prelog = 1.0 - t / T
    per_device = rate_log(1.0 + gammas)
    return SseResult(
        per_device_se=per_device,
        sse=float(prelog * np.sum(per_device)),
        prelog=float(prelog),
        gamma=gammas,
    )
