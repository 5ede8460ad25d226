"""Single-object motion, extent, measurement-rate and sensor models."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .distributions import (D, IW_OFFSET, GammaParams, InverseWishartParams, polar_noise_cov)
from .errors import DegeneratePosition

STATE_DIM = 5
H = np.hstack([np.eye(2), np.zeros((2, 3))])

DEFAULT_BIRTH_DOF = 20.0


def tau_from_ne(n_e, birth_dof, Ts):
    """Time constant whose one-step dof retention equals that of a Wishart
    transition with ``n_e`` degrees of freedom applied at ``birth_dof``."""
    retention = n_e / (n_e + birth_dof - IW_OFFSET)
    return -Ts / math.log(retention)


@dataclass(frozen=True)
class MotionConfig:
    Ts: float = 1.0
    sigma_v: float = 0.2
    sigma_omega: float = 0.2 * math.pi / 180
    n_e: float = 120.0
    eta: float = 2.0
    tau_ext: float | None = None

    def __post_init__(self):
        if self.tau_ext is None:
            object.__setattr__(self, "tau_ext", tau_from_ne(self.n_e, DEFAULT_BIRTH_DOF, self.Ts))

    @property
    def ext_decay(self) -> float:
        return math.exp(-self.Ts / self.tau_ext)

    def problems(self):
        out = []
        if not self.Ts > 0:
            out.append("sampling period Ts must be positive")
        if not self.eta > 1:
            out.append("forgetting factor must exceed 1")
        if not self.n_e > 0:
            out.append("extent transition dof n_e must be positive")
        if not self.tau_ext > 0:
            out.append("extent time constant tau_ext must be positive")
        if self.sigma_v < 0 or self.sigma_omega < 0:
            out.append("process noise standard deviations must be non-negative")
        return out


@dataclass(frozen=True)
class MeasModel:
    sigma_r: float = 1.0
    sigma_phi: float = 0.01 * math.pi / 180
    rho: float = 0.75
    H: np.ndarray = field(default_factory=lambda: H.copy(), compare=False, repr=False)

    def noise_cov(self, pos):
        return polar_noise_cov(pos, self.sigma_r, self.sigma_phi)

    def problems(self):
        out = []
        if not (0 < self.rho <= 1):
            out.append("extent scaling rho must lie in (0, 1]")
        if self.sigma_r < 0 or self.sigma_phi < 0:
            out.append("measurement noise standard deviations must be non-negative")
        if not np.array_equal(self.H, H):
            out.append("observation matrix must be [I2 | 0]")
        return out


def predict_kinematics(x, cfg: MotionConfig):
    x = np.asarray(x, dtype=float)
    px, py, v, phi, omega = x
    ts = cfg.Ts
    return x + np.array([ts * v * math.cos(phi), ts * v * math.sin(phi), 0.0, ts * omega, 0.0])


def kinematics_jacobian(x, cfg: MotionConfig):
    _, _, v, phi, _ = np.asarray(x, dtype=float)
    ts = cfg.Ts
    F = np.eye(STATE_DIM)
    c, s = math.cos(phi), math.sin(phi)
    F[0, 2] = ts * c
    F[0, 3] = -ts * v * s
    F[1, 2] = ts * s
    F[1, 3] = ts * v * c
    F[3, 4] = ts
    return F


def process_noise(cfg: MotionConfig):
    G = np.zeros((STATE_DIM, 2))
    G[2, 0] = cfg.Ts
    G[4, 1] = cfg.Ts
    return G @ np.diag([cfg.sigma_v**2, cfg.sigma_omega**2]) @ G.T


def rotation(angle):
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, -s], [s, c]])


def rotate_extent(X, omega, Ts):
    M = rotation(omega * Ts)
    out = M @ np.asarray(X, dtype=float) @ M.T
    return 0.5 * (out + out.T)


def predict_extent(iw: InverseWishartParams, x, cfg: MotionConfig) -> InverseWishartParams:
    """Rotate the extent with the yaw rate of ``x`` and forget dof exponentially."""
    dof, scale = _predict_extent_raw(iw.dof, iw.scale, float(np.asarray(x)[4]), cfg)
    return InverseWishartParams(dof, scale, iw.dim)


def _predict_extent_raw(dof, scale, omega, cfg: MotionConfig):
    decay = cfg.ext_decay
    excess = dof - IW_OFFSET
    dof_new = IW_OFFSET + decay * excess
    return dof_new, ((dof_new - IW_OFFSET) / excess) * rotate_extent(scale, omega, cfg.Ts)


def predict_rate(g: GammaParams, cfg: MotionConfig) -> GammaParams:
    return GammaParams(g.alpha / cfg.eta, g.beta / cfg.eta)


def polar_to_cartesian(r, phi):
    return np.array([r * math.cos(phi), r * math.sin(phi)])


def converted_noise_cov(p, mm: MeasModel):
    p = np.asarray(p, dtype=float)
    if math.hypot(p[0], p[1]) < 1e-9:
        raise DegeneratePosition("noise covariance is undefined at the sensor origin")
    return mm.noise_cov(p)


__all__ = [
    "D", "H", "STATE_DIM", "MotionConfig", "MeasModel", "predict_kinematics", "kinematics_jacobian",
    "process_noise", "rotate_extent", "predict_extent", "predict_rate", "polar_to_cartesian",
    "converted_noise_cov", "rotation", "tau_from_ne",
]
