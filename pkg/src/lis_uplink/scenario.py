"""Multi-LIS geometry, device placement, and link-budget scalars.

Each LIS is a planar panel with its own local frame (panel in the local
z = 0 plane, devices at local z > 0). A device's LIS unit is the 2L x 2L
patch of the panel directly under the device: unit centers are the (x, y)
projections of the devices, so every device sits at boresight of its own
unit. Placement rejects draws until all same-panel unit squares are
pairwise disjoint.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .config import LayoutConfig, PlacementConfig, SystemConfig


class InfeasiblePlacementError(RuntimeError):
    """Raised when the rejection sampler exhausts its attempt budget."""


@dataclass(frozen=True)
class LisFrame:
    """Rigid placement of one panel: local coordinates -> global."""

    origin: np.ndarray    # (3,) global position of the panel center
    rotation: np.ndarray  # (3, 3) local->global rotation

    def to_global(self, points_local: np.ndarray) -> np.ndarray:
        return points_local @ self.rotation.T + self.origin

    def to_local(self, points_global: np.ndarray) -> np.ndarray:
        return (points_global - self.origin) @ self.rotation

    @property
    def normal(self) -> np.ndarray:
        """Global unit normal of the panel plane (local +z)."""
        return self.rotation[:, 2]


def build_layout(layout: LayoutConfig, N: int) -> list[LisFrame]:
    """Construct panel frames for the requested arrangement.

    line: N coplanar panels along x, adjacent edges separated by d_x.
    quad: target panel at the origin, two coplanar side panels at
    x = +-(x_l + d_x), and a facing panel whose plane sits at z = d_z
    turned back toward the target (its devices hang between the planes).
    """
    identity = np.eye(3)
    if layout.name == "quad" or (layout.name == "auto" and N == 4):
        if N != 4:
            raise ValueError(f"quad layout requires N=4, got N={N}")
        offset = layout.x_l + layout.d_x  # center-to-center: two half-panels + gap
        facing = np.diag([-1.0, 1.0, -1.0])  # half-turn about y: local +z -> global -z
        return [
            LisFrame(np.array([0.0, 0.0, 0.0]), identity),
            LisFrame(np.array([-offset, 0.0, 0.0]), identity),
            LisFrame(np.array([+offset, 0.0, 0.0]), identity),
            LisFrame(np.array([0.0, 0.0, layout.d_z]), facing),
        ]
    if layout.name == "quad":
        raise ValueError(f"quad layout requires N=4, got N={N}")
    pitch = layout.x_l + layout.d_x
    first = -0.5 * (N - 1) * pitch
    return [
        LisFrame(np.array([first + n * pitch, 0.0, 0.0]), identity)
        for n in range(N)
    ]


@dataclass(frozen=True)
class Deployment:
    """Placed devices and their LIS units for one scenario draw."""

    frames: tuple[LisFrame, ...]
    devices_local: np.ndarray      # (N, K, 3) in each panel's frame, z > 0
    devices: np.ndarray            # (N, K, 3) global
    unit_centers_local: np.ndarray  # (N, K, 3) on the local z=0 plane
    unit_centers: np.ndarray       # (N, K, 3) global

    @property
    def lis_origins(self) -> np.ndarray:
        return np.stack([f.origin for f in self.frames])

    @property
    def N(self) -> int:
        return self.devices.shape[0]

    @property
    def K(self) -> int:
        return self.devices.shape[1]

    def subset(self, K: int) -> "Deployment":
        """First-K-devices view (the placement is sequential, so subsets
        of a larger pool are exactly what a smaller placement would give)."""
        if not (1 <= K <= self.K):
            raise ValueError(f"subset size {K} outside [1, {self.K}]")
        return Deployment(
            frames=self.frames,
            devices_local=self.devices_local[:, :K],
            devices=self.devices[:, :K],
            unit_centers_local=self.unit_centers_local[:, :K],
            unit_centers=self.unit_centers[:, :K],
        )

    def panel(self, n: int) -> "Deployment":
        """Single-panel view: panel n alone with its own devices (the
        matching single-LIS system for gap comparisons)."""
        if not (0 <= n < self.N):
            raise ValueError(f"panel index {n} outside [0, {self.N})")
        return Deployment(
            frames=(self.frames[n],),
            devices_local=self.devices_local[n : n + 1],
            devices=self.devices[n : n + 1],
            unit_centers_local=self.unit_centers_local[n : n + 1],
            unit_centers=self.unit_centers[n : n + 1],
        )


def place_devices(
    config: SystemConfig,
    geometry: LayoutConfig | list[LisFrame],
    rng: np.random.Generator,
    *,
    placement: PlacementConfig | None = None,
    K: int | None = None,
    allow_partial: bool = False,
) -> Deployment:
    """Draw K devices per panel, uniform in the x_l x y_l x box_height box,
    resampling each device until its unit square is disjoint from the ones
    already placed on the same panel.

    Deterministic given the generator state; raises
    InfeasiblePlacementError when the per-device attempt budget runs out.
    With allow_partial, budget exhaustion instead stops that panel and all
    panels are truncated to the smallest realized count, so the result is
    the largest placeable common pool (a prefix of the full draw).
    """
    placement = placement or PlacementConfig()
    if isinstance(geometry, LayoutConfig):
        layout = geometry
        frames = build_layout(geometry, config.N)
    else:
        layout = LayoutConfig()
        frames = list(geometry)
    if len(frames) != config.N:
        raise ValueError(f"geometry provides {len(frames)} panels, config.N={config.N}")
    K = int(K) if K is not None else config.K
    half_x, half_y = 0.5 * layout.x_l, 0.5 * layout.y_l
    side = 2.0 * config.L

    per_panel: list[list[np.ndarray]] = []
    for n in range(config.N):
        accepted: list[np.ndarray] = []
        for k in range(K):
            for _ in range(placement.attempt_budget):
                u = rng.random(3)
                x = (2.0 * u[0] - 1.0) * half_x
                y = (2.0 * u[1] - 1.0) * half_y
                z = u[2] * layout.box_height
                if z == 0.0:
                    continue  # zero-probability boundary; a device on the plane has no geometry
                if all(
                    max(abs(x - q[0]), abs(y - q[1])) >= side for q in accepted
                ):
                    accepted.append(np.array([x, y, z]))
                    break
            else:
                if allow_partial:
                    break
                raise InfeasiblePlacementError(
                    f"infeasible placement: panel {n} device {k} found no "
                    f"disjoint unit square in {placement.attempt_budget} attempts"
                )
        per_panel.append(accepted)

    pool = min(len(acc) for acc in per_panel)
    if pool == 0:
        raise InfeasiblePlacementError(
            "infeasible placement: a panel accepted no devices at all"
        )
    devices_local = np.stack([np.stack(acc[:pool]) for acc in per_panel])

    centers_local = devices_local.copy()
    centers_local[..., 2] = 0.0
    devices = np.stack([frames[n].to_global(devices_local[n]) for n in range(config.N)])
    centers = np.stack([frames[n].to_global(centers_local[n]) for n in range(config.N)])
    return Deployment(
        frames=tuple(frames),
        devices_local=devices_local,
        devices=devices,
        unit_centers_local=centers_local,
        unit_centers=centers,
    )


def _lattice_offsets(config: SystemConfig) -> tuple[np.ndarray, np.ndarray]:
    """Centered lattice offsets along the horizontal (local x) and vertical
    (local y) axes; index m = iv * sqrt(M) + ih matches the Kronecker order
    of the steering vectors."""
    side = config.m_side
    idx = np.arange(side)
    off = (idx + 0.5) * config.spacing - 0.5 * side * config.spacing
    return off, off  # horizontal, vertical share the square geometry


def antenna_position(
    deployment: Deployment, config: SystemConfig, n: int, k: int, m: int
) -> np.ndarray:
    """Global position of antenna m of unit (n, k); row-major lattice with
    the vertical index major, matching the steering-vector Kronecker order."""
    if not (0 <= m < config.M):
        raise IndexError(f"antenna index {m} outside [0, {config.M})")
    side = config.m_side
    iv, ih = divmod(int(m), side)
    off_h, off_v = _lattice_offsets(config)
    local = deployment.unit_centers_local[n, k] + np.array([off_h[ih], off_v[iv], 0.0])
    return deployment.frames[n].to_global(local)


def unit_antenna_grid(
    deployment: Deployment, config: SystemConfig, n: int, k: int
) -> np.ndarray:
    """All M antenna positions of unit (n, k), shape (M, 3), global frame,
    ordered m = iv * sqrt(M) + ih."""
    off_h, off_v = _lattice_offsets(config)
    side = config.m_side
    local = np.zeros((side, side, 3))
    local[..., 0] = off_h[np.newaxis, :]
    local[..., 1] = off_v[:, np.newaxis]
    local = local.reshape(config.M, 3) + deployment.unit_centers_local[n, k]
    return deployment.frames[n].to_global(local)


def los_probability(d, d_C: float):
    """Probability that a link of center distance d carries an LOS path:
    a linear ramp from 1 at d = 0 down to 0 at the cutoff d_C and beyond."""
    d = np.asarray(d, dtype=float)
    out = np.clip((d_C - d) / d_C, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def rician_factor(d):
    """Linear Rician factor of a link at center distance d meters,
    10^((13 - 0.03 d)/10)."""
    d = np.asarray(d, dtype=float)
    out = 10.0 ** ((13.0 - 0.03 * d) / 10.0)
    return float(out) if out.ndim == 0 else out


def transmit_snr(device, unit_center, target: float, mode: str = "pilot") -> float:
    """Transmit SNR that makes the received SNR at the unit-center antenna
    equal ``target``: rho * beta_center^2 = target.

    Coordinates are in the panel frame, whose plane contains the unit
    center; the center-antenna LOS gain is beta^2 = (z/d) / (4 pi d^2)
    with d the device-to-center distance and z the perpendicular offset.
    """
    if mode not in ("pilot", "data"):
        raise ValueError(f"mode must be pilot|data, got {mode!r}")
    delta = np.asarray(device, float) - np.asarray(unit_center, float)
    d = float(np.linalg.norm(delta))
    z = float(delta[2])
    if d <= 0.0 or z <= 0.0:
        raise ValueError("device sits on the LIS plane; channel gain undefined")
    beta2_center = (z / d) / (4.0 * math.pi * d * d)
    return float(target) / beta2_center


def pilot_snrs(deployment: Deployment, config: SystemConfig) -> np.ndarray:
    """Per-device pilot transmit SNR (N, K) from the power-control rule."""
    return _snr_grid(deployment, config.rho_p_tgt, "pilot")


def data_snrs(deployment: Deployment, config: SystemConfig) -> np.ndarray:
    """Per-device data transmit SNR (N, K) from the power-control rule."""
    return _snr_grid(deployment, config.rho_tgt, "data")


def _snr_grid(deployment: Deployment, target: float, mode: str) -> np.ndarray:
    N, K = deployment.N, deployment.K
    out = np.empty((N, K))
    for n in range(N):
        for k in range(K):
            dev = deployment.devices_local[n, k]
            center = np.array([dev[0], dev[1], 0.0])
            out[n, k] = transmit_snr(dev, center, target, mode)
    return out


def center_distances(deployment: Deployment, n: int, k: int) -> np.ndarray:
    """Distance from every device (l, j) to the center of unit (n, k),
    shape (N, K). Feeds the Rician factor and the LOS probability."""
    diff = deployment.devices - deployment.unit_centers[n, k]
    return np.sqrt(np.einsum("lji,lji->lj", diff, diff))


def perpendicular_offsets(deployment: Deployment, n: int) -> np.ndarray:
    """Perpendicular distance of every device to panel n's plane, shape
    (N, K); positive for devices on the panel's front side."""
    frame = deployment.frames[n]
    rel = deployment.devices - frame.origin
    return rel @ frame.normal
