"""Gamma, Gaussian and inverse-Wishart parameter containers plus the
closed-form evidence terms of the conjugate GGIW measurement update.

All 2x2 linear algebra is written in closed form over a leading batch axis so
that the filters can score every (component, cell) pair in one call.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import DofTooSmall, SingularMatrix

D = 2  # extent dimension, planar only
IW_OFFSET = 2 * D + 2
LOG_PI = np.log(np.pi)


@dataclass(frozen=True, eq=False)
class GammaParams:
    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError(f"gamma parameters must be positive, got {self.alpha}, {self.beta}")

    @property
    def var(self) -> float:
        return self.alpha / self.beta**2


@dataclass(frozen=True, eq=False)
class GaussianParams:
    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.cov, dtype=float)
        if cov.shape != (mean.size, mean.size):
            raise ValueError(f"covariance shape {cov.shape} does not match mean of length {mean.size}")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)


@dataclass(frozen=True, eq=False)
class InverseWishartParams:
    dof: float
    scale: np.ndarray
    dim: int = D

    def __post_init__(self):
        scale = np.asarray(self.scale, dtype=float)
        if scale.shape != (self.dim, self.dim):
            raise ValueError(f"scale must be {self.dim}x{self.dim}")
        object.__setattr__(self, "scale", scale)


@dataclass(frozen=True, eq=False)
class GGIWParams:
    rate: GammaParams
    kin: GaussianParams
    ext: InverseWishartParams

    def __post_init__(self):
        if self.kin.mean.size != 5:
            raise ValueError("kinematic state must have length 5")
        if self.ext.dim != D:
            raise ValueError("extent dimension is fixed to 2")


def is_spd(a, sym_tol=1e-9) -> bool:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or not np.all(np.isfinite(a)):
        return False
    if np.max(np.abs(a - a.T), initial=0.0) > sym_tol * max(1.0, np.max(np.abs(a), initial=0.0)):
        return False
    return bool(np.linalg.eigvalsh(0.5 * (a + a.T))[0] > 0)


def gamma_mean(g: GammaParams) -> float:
    return g.alpha / g.beta


def iw_mean(iw: InverseWishartParams) -> np.ndarray:
    """Expected extent matrix ``V / (v - 2d - 2)``."""
    denom = iw.dof - (2 * iw.dim + 2)
    if denom <= 0:
        raise DofTooSmall(f"inverse-Wishart mean needs dof > {2 * iw.dim + 2}, got {iw.dof}")
    return iw.scale / denom


def log_cell_count_evidence(alpha, beta, n):
    """Log negative-binomial mass: Poisson count marginalised over a gamma rate."""
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    n = np.asarray(n, dtype=float)
    return (gammaln(alpha + n) - gammaln(alpha) - gammaln(n + 1.0)
            + alpha * (np.log(beta) - np.log1p(beta)) - n * np.log1p(beta))


def cell_count_evidence(g: GammaParams, n: int) -> float:
    return float(np.exp(log_cell_count_evidence(g.alpha, g.beta, n)))


# -- batched 2x2 helpers ---------------------------------------------------

def det2(a):
    return a[..., 0, 0] * a[..., 1, 1] - a[..., 0, 1] * a[..., 1, 0]


def inv2(a):
    det = det2(a)
    out = np.empty_like(a)
    out[..., 0, 0] = a[..., 1, 1]
    out[..., 1, 1] = a[..., 0, 0]
    out[..., 0, 1] = -a[..., 0, 1]
    out[..., 1, 0] = -a[..., 1, 0]
    return out / det[..., None, None]


def sqrtm2(a):
    """Principal square root of symmetric positive-definite 2x2 matrices."""
    s = np.sqrt(det2(a))
    t = np.sqrt(a[..., 0, 0] + a[..., 1, 1] + 2.0 * s)
    out = a.copy()
    out[..., 0, 0] += s
    out[..., 1, 1] += s
    return out / t[..., None, None]


def logdet2(a):
    return np.log(det2(a))


def log_multigamma2(a):
    """log of the bivariate gamma function."""
    return 0.5 * LOG_PI + gammaln(a) + gammaln(a - 0.5)


def polar_noise_cov(pos, sigma_r, sigma_phi):
    """Converted range/bearing noise covariance at each row of ``pos``."""
    pos = np.asarray(pos, dtype=float)
    r2 = pos[..., 0] ** 2 + pos[..., 1] ** 2
    phi = np.arctan2(pos[..., 1], pos[..., 0])
    c, s = np.cos(phi), np.sin(phi)
    vr, vp = sigma_r**2, r2 * sigma_phi**2
    out = np.empty(pos.shape[:-1] + (2, 2))
    out[..., 0, 0] = c * c * vr + s * s * vp
    out[..., 1, 1] = s * s * vr + c * c * vp
    out[..., 0, 1] = out[..., 1, 0] = c * s * (vr - vp)
    return out


@dataclass
class UpdateTerms:
    """Batched quantities of the conjugate update of one predicted GGIW
    marginal with one cell. Every array carries the batch axis first."""

    eps: np.ndarray       # centroid innovation
    S: np.ndarray
    S_inv: np.ndarray
    dof_post: np.ndarray
    scale_post: np.ndarray
    alpha_post: np.ndarray
    beta_post: np.ndarray
    log_evidence: np.ndarray


def update_terms(alpha, beta, pos, hph, dof, scale, n, centroid, scatter, noise_cov, rho,
                 with_evidence=True) -> UpdateTerms:
    """Conjugate GGIW update quantities and log marginal likelihood.

    Parameters
    ----------
    alpha, beta, dof, n : (N,) arrays
    pos : (N, 2) predicted position ``H m``
    hph : (N, 2, 2) predicted position covariance ``H P H^T``
    scale : (N, 2, 2) inverse-Wishart scale
    centroid : (N, 2) cell mean
    scatter : (N, 2, 2) centred scatter matrix of the cell
    noise_cov : (N, 2, 2) sensor noise ``R`` at the predicted position
    rho : float extent scaling

    Returns
    -------
    UpdateTerms
        ``log_evidence`` is ``log ∫ P(W | xi) p(xi) dxi`` with the set
        likelihood ``n! PS(n; gamma) prod N(z; Hx, rho X + R)``.
    """
    n = np.asarray(n, dtype=float)
    dof = np.asarray(dof, dtype=float)
    if np.any(dof <= IW_OFFSET):
        raise DofTooSmall("predicted inverse-Wishart dof must exceed 2d + 2")
    x_hat = scale / (dof - IW_OFFSET)[:, None, None]
    r_hat = rho * x_hat + noise_cov
    S = hph + r_hat / n[:, None, None]
    det_s = det2(S)
    det_r = det2(r_hat)
    if np.any(~(det_s > 1e-300)) or np.any(~(det_r > 1e-300)):
        raise SingularMatrix("innovation or measurement-spread covariance is singular")
    S_inv = inv2(S)
    eps = centroid - pos

    x_sqrt = sqrtm2(x_hat)
    a = x_sqrt @ inv2(sqrtm2(S))
    ae = np.einsum("nij,nj->ni", a, eps)
    n_hat = ae[:, :, None] * ae[:, None, :]
    b = x_sqrt @ inv2(sqrtm2(r_hat))
    z_hat = b @ scatter @ np.swapaxes(b, 1, 2)
    scale_post = scale + n_hat + z_hat
    scale_post = 0.5 * (scale_post + np.swapaxes(scale_post, 1, 2))
    dof_post = dof + n

    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    log_ev = None
    if with_evidence:
        log_gamma = (gammaln(alpha + n) - gammaln(alpha)
                     + alpha * np.log(beta) - (alpha + n) * np.log1p(beta))
        ld_x = logdet2(x_hat)
        log_spatial = (-0.5 * n * D * LOG_PI - 0.5 * D * np.log(n)
                       + 0.5 * n * ld_x - 0.5 * np.log(det_s) - 0.5 * (n - 1.0) * np.log(det_r))
        nu, nu_post = dof - D - 1.0, dof_post - D - 1.0
        log_iw = (log_multigamma2(0.5 * nu_post) - log_multigamma2(0.5 * nu)
                  + 0.5 * nu * logdet2(scale) - 0.5 * nu_post * logdet2(scale_post))
        log_ev = log_gamma + log_spatial + log_iw
    return UpdateTerms(eps=eps, S=S, S_inv=S_inv, dof_post=dof_post, scale_post=scale_post,
                       alpha_post=alpha + n, beta_post=beta + 1.0, log_evidence=log_ev)


def log_translation_integral(terms: UpdateTerms, x_hat):
    """``log ∫ evidence(eps) d eps`` for terms evaluated at zero innovation.

    The innovation only enters the evidence through the posterior scale, as
    ``|V + Z + N(eps)|^(-a)`` with ``a = (v + n - 3) / 2``; that factor is a
    bivariate-t kernel in ``eps`` whose integral is closed form. Used for
    births whose position prior is uniform over the surveillance area.
    """
    if np.any(terms.eps != 0.0):
        raise ValueError("terms must be evaluated at zero innovation")
    a = 0.5 * (terms.dof_post - D - 1.0)
    log_det_a = logdet2(x_hat) - np.log(det2(terms.S)) - logdet2(terms.scale_post)
    return terms.log_evidence + LOG_PI - np.log(a - 1.0) - 0.5 * log_det_a


def cell_stats(points):
    """Centroid and centred scatter matrix of an (n, 2) cell."""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    centroid = points.mean(axis=0)
    dev = points - centroid
    return centroid, dev.T @ dev


def cell_evidence(comp: GGIWParams, cell, meas_model) -> float:
    """Log marginal likelihood of a non-empty measurement cell under a
    predicted GGIW density. Clutter normalisation is left to the filters."""
    points = np.asarray(cell, dtype=float).reshape(-1, 2)
    if len(points) == 0:
        raise ValueError("cell must be non-empty")
    centroid, scatter = cell_stats(points)
    m, P = comp.kin.mean, comp.kin.cov
    pos = m[:2]
    terms = update_terms(
        np.array([comp.rate.alpha]), np.array([comp.rate.beta]), pos[None], P[None, :2, :2],
        np.array([comp.ext.dof]), comp.ext.scale[None], np.array([float(len(points))]),
        centroid[None], scatter[None], meas_model.noise_cov(pos)[None], meas_model.rho)
    return float(terms.log_evidence[0])
