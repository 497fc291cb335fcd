"""Pilot training and least-squares channel estimation.

Devices transmit t-symbol orthonormal pilot sequences; the same pilot book
is reused by every panel, so despreading removes same-panel interference
exactly while same-index devices of other panels leak through and
contaminate the estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import cgauss


@dataclass(frozen=True)
class PilotBook:
    """t x K matrix with orthonormal columns; column k is device k's pilot."""

    matrix: np.ndarray  # (t, K) complex

    @property
    def t(self) -> int:
        return self.matrix.shape[0]

    @property
    def K(self) -> int:
        return self.matrix.shape[1]

    def column(self, k: int) -> np.ndarray:
        return self.matrix[:, k]


def pilot_book(t: int, K: int) -> PilotBook:
    """Deterministic orthonormal pilot book: the first K columns of the
    t-point discrete-Fourier basis, scaled to unit column norm."""
    t, K = int(t), int(K)
    if t < K:
        raise ValueError(f"pilot length t={t} must be >= K={K}")
    s = np.arange(t)[:, np.newaxis]
    k = np.arange(K)[np.newaxis, :]
    matrix = np.exp(-2j * math.pi * s * k / t) / math.sqrt(t)
    return PilotBook(matrix=matrix)


def received_pilot(
    channels: np.ndarray,
    book: PilotBook,
    pilot_snrs: np.ndarray,
    rng: np.random.Generator | None,
) -> np.ndarray:
    """Received M x t pilot block at one unit.

    channels: (N, K, M) link channels toward this unit; device j of every
    panel sends pilot column j with amplitude sqrt(t * rho_p) (t-symbol
    energy at its controlled per-symbol SNR). rng=None disables the
    unit-variance additive noise block.
    """
    channels = np.asarray(channels)
    N, K, M = channels.shape
    if book.K != K:
        raise ValueError(f"pilot book has {book.K} columns, need {K}")
    amps = np.sqrt(book.t * np.asarray(pilot_snrs, dtype=float))  # (N, K)
    y = np.einsum("lj,ljm,tj->mt", amps, channels, book.matrix)
    if rng is not None:
        y = y + cgauss(rng, (M, book.t))
    return y


@dataclass(frozen=True)
class ChannelEstimate:
    """LS estimate of one serving channel and its decomposition."""

    estimate: np.ndarray          # (M,) h_hat
    error: np.ndarray | None      # (M,) h_hat - h_los when the LOS is known
    h_los: np.ndarray | None      # (M,) deterministic serving channel


def ls_estimate(
    Y_p: np.ndarray,
    psi_k: np.ndarray,
    t: int,
    rho_p_nk: float,
    h_los: np.ndarray | None = None,
) -> ChannelEstimate:
    """Least-squares despreading: h_hat = Y_p conj(psi_k) / sqrt(t rho_p).

    With a single panel and no noise this recovers the serving channel; with
    pilot reuse it adds the scaled same-index channels of other panels plus
    noise of per-antenna variance 1/(t rho_p)."""
    if rho_p_nk <= 0:
        raise ValueError(f"pilot SNR must be positive, got {rho_p_nk}")
    est = (np.asarray(Y_p) @ np.conj(psi_k)) / math.sqrt(t * rho_p_nk)
    error = est - h_los if h_los is not None else None
    return ChannelEstimate(estimate=est, error=error, h_los=h_los)


def synthesize_error_direct(
    contaminator_channels: np.ndarray,
    snr_ratios: np.ndarray,
    t: int,
    rho_p_own: float,
    rng: np.random.Generator | None = None,
    noise: np.ndarray | None = None,
) -> np.ndarray:
    """Draw the estimation error directly from its definition, skipping the
    M x t pilot block: e = sum_l sqrt(rho_ratio_l) h_l + w / sqrt(t rho_p).

    contaminator_channels: (C, M) same-index channels of the other panels
    (full realizations, reused from the block so the data phase sees the
    same channels). noise overrides the fresh w draw; with rng and noise
    both None the noise term is omitted (infinite-energy limit).
    """
    channels = np.atleast_2d(np.asarray(contaminator_channels))
    ratios = np.sqrt(np.asarray(snr_ratios, dtype=float))
    if channels.shape[0] != ratios.shape[0]:
        raise ValueError("one SNR ratio per contaminator channel required")
    e = np.einsum("c,cm->m", ratios.astype(complex), channels)
    if noise is None and rng is not None:
        noise = cgauss(rng, channels.shape[1])
    if noise is not None:
        e = e + noise / math.sqrt(t * rho_p_own)
    return e
