"""Expectation propagation for the box-constrained integer least-squares problem.

The discrete prior over the label set is replaced by a diagonal Gaussian with
natural parameters ``(gamma, lam)``. Each iteration forms the Gaussian
posterior, removes each coordinate's own prior term (cavity), moment-matches
against the discrete label set, and refines ``(gamma, lam)`` with damping.
The residual variance of ``c - G p`` is unknown and re-estimated every
iteration from the soft estimate.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError

__all__ = [
    "EpConfig",
    "EpState",
    "gaussian_posterior",
    "cavity",
    "discrete_moments",
    "refine_prior",
    "estimate_variance",
    "ep_solve",
]

_LAMBDA_FLOOR = 1e-12


@dataclass
class EpConfig:
    max_iterations: int = 10
    damping: float = 0.5
    variance_floor: float = 1e-8
    cavity_variance_floor: float = 1e-8

    def validate(self):
        if not 0.0 <= self.damping <= 1.0:
            raise ValueError(f"damping must be in [0, 1], got {self.damping}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.variance_floor <= 0 or self.cavity_variance_floor <= 0:
            raise ValueError("variance floors must be positive")
        return self


@dataclass
class EpState:
    """Iterate of the EP solver; ``history`` collects per-iteration diagnostics."""

    gamma: np.ndarray
    lam: np.ndarray
    sigma2: float = 1.0
    sigma2_prev: float = 1.0
    precision_error: float = 0.0
    mu: np.ndarray = None
    Sigma: np.ndarray = None
    p_hat: np.ndarray = None
    v: np.ndarray = None
    clamp_events: int = 0
    cavity_updates: int = 0
    history: list = field(default_factory=list)


def gaussian_posterior(G, c, gamma, lam, sigma2):
    """Mean and covariance of the Gaussian-prior posterior.

    ``Sigma = (G^T G / sigma2 + diag(lam))^-1`` and
    ``mu = Sigma (G^T c / sigma2 + gamma)``.
    """
    G = np.asarray(G, dtype=float)
    precision = G.T @ G / sigma2 + np.diag(lam)
    try:
        factor = cho_factor(precision)
    except LinAlgError as exc:
        raise FloatingPointError("EP posterior precision is not positive definite") from exc
    Sigma = cho_solve(factor, np.eye(G.shape[1]))
    Sigma = 0.5 * (Sigma + Sigma.T)
    mu = cho_solve(factor, G.T @ c / sigma2 + gamma)
    return mu, Sigma


def cavity(mu, Sigma_diag, gamma, lam, floor=1e-8):
    """Cavity marginals after dividing out each coordinate's prior factor.

    Returns ``(p_obs, v_obs, clamped)``; ``clamped`` marks coordinates whose
    cavity variance came out non-positive and was replaced by ``floor``.
    """
    mu, s, gamma, lam = (np.asarray(a, dtype=float) for a in (mu, Sigma_diag, gamma, lam))
    denom = 1.0 - s * lam
    clamped = denom <= 0
    with np.errstate(divide="ignore", invalid="ignore"):
        v_obs = np.where(clamped, floor, s / np.where(clamped, 1.0, denom))
    p_obs = v_obs * (mu / s - gamma)
    return p_obs, v_obs, clamped


def discrete_moments(p_obs, v_obs, labels, floor=1e-8):
    """Mean and variance of the cavity Gaussian restricted to ``labels``."""
    p_obs = np.asarray(p_obs, dtype=float)[..., None]
    v_obs = np.asarray(v_obs, dtype=float)[..., None]
    logw = -0.5 * (labels - p_obs) ** 2 / v_obs
    logw -= logw.max(axis=-1, keepdims=True)
    w = np.exp(logw)
    w /= w.sum(axis=-1, keepdims=True)
    mean = np.sum(w * labels, axis=-1)
    var = np.sum(w * (labels - mean[..., None]) ** 2, axis=-1)
    return mean, np.maximum(var, floor)


def refine_prior(v, p_hat, v_obs, p_obs, damping, lam_prev, gamma_prev):
    """Damped moment-matching update of the Gaussian prior parameters.

    A coordinate whose raw precision comes out negative keeps its previous
    ``(lam, gamma)`` instead of being floored; flooring only ``lam`` leaves a
    stale ``gamma`` that locks the coordinate onto a wrong label.
    """
    lam_raw = 1.0 / v - 1.0 / v_obs
    gamma_raw = p_hat / v - p_obs / v_obs
    negative = lam_raw < 0
    lam_raw = np.where(negative, lam_prev, lam_raw)
    gamma_raw = np.where(negative, gamma_prev, gamma_raw)
    lam = (1.0 - damping) * lam_raw + damping * lam_prev
    gamma = (1.0 - damping) * gamma_raw + damping * gamma_prev
    return np.maximum(lam, _LAMBDA_FLOOR), gamma


def estimate_variance(c, G, p_hat, sigma2_prev, sigma2_prevprev, floor=1e-8):
    """Residual variance per real dimension, padded by the squared change of
    the previous two estimates.

    The padding is capped at the residual energy itself. Uncapped, a squared
    variance difference feeds back on itself and diverges once the estimate
    exceeds about twice the dimension.
    """
    r = np.asarray(c) - np.asarray(G) @ np.asarray(p_hat)
    energy = float(r @ r)
    eps = min((sigma2_prev - sigma2_prevprev) ** 2, energy)
    return max((energy + eps) / r.size, floor)


def ep_solve(prob, cfg=None, return_state=False):
    """Approximate ILS solution by EP followed by a nearest-label decision.

    Parameters
    ----------
    prob : IlsProblem-like
        ``G``, ``c`` and ``labels`` attributes.
    cfg : EpConfig, optional
    return_state : bool
        Also return the final :class:`EpState`.
    """
    cfg = (cfg or EpConfig()).validate()
    G = np.asarray(prob.G, dtype=float)
    c = np.asarray(prob.c, dtype=float)
    labels = np.asarray(prob.labels, dtype=float)
    n = G.shape[1]
    st = EpState(gamma=np.zeros(n), lam=np.ones(n))
    for _ in range(cfg.max_iterations):
        st.mu, st.Sigma = gaussian_posterior(G, c, st.gamma, st.lam, st.sigma2)
        p_obs, v_obs, clamped = cavity(
            st.mu, np.diag(st.Sigma), st.gamma, st.lam, cfg.cavity_variance_floor
        )
        st.clamp_events += int(clamped.sum())
        st.cavity_updates += n
        st.p_hat, st.v = discrete_moments(p_obs, v_obs, labels, cfg.variance_floor)
        st.lam, st.gamma = refine_prior(
            st.v, st.p_hat, v_obs, p_obs, cfg.damping, st.lam, st.gamma
        )
        new_sigma2 = estimate_variance(
            c, G, st.p_hat, st.sigma2, st.sigma2_prev, cfg.variance_floor
        )
        st.precision_error = (st.sigma2 - st.sigma2_prev) ** 2
        st.sigma2_prev, st.sigma2 = st.sigma2, new_sigma2
        if return_state:
            st.history.append(
                {
                    "min_eig": float(np.linalg.eigvalsh(st.Sigma)[0]),
                    "finite": bool(
                        np.all(np.isfinite(st.mu))
                        and np.all(np.isfinite(st.Sigma))
                        and np.all(np.isfinite(st.p_hat))
                        and np.all(np.isfinite(st.v))
                    ),
                    "sigma2": st.sigma2,
                }
            )
    p = labels[np.argmin(np.abs(st.p_hat[:, None] - labels[None, :]), axis=1)]
    return (p, st) if return_state else p
