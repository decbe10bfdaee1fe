"""Iterative WMMSE precoding with an alphabet-constrained precoder update.

Conventions
-----------
``H`` is the K x M channel (row ``k`` is ``h_k^T``), ``P`` the M x K
precoder (column ``k`` serves UE ``k``). The AAS scales the precoder by
``alpha = sqrt(q / tr(P P^H))`` before transmission, so rates are evaluated
on ``alpha P`` with the true noise power. Inside the WMMSE updates the noise
enters as ``N0 / alpha`` recomputed from the current iterate.
"""
from dataclasses import dataclass, field
import logging

import numpy as np
from scipy.linalg import cholesky, solve_triangular, LinAlgError

from .quantizer import quantize

__all__ = [
    "IlsProblem",
    "WmmseConfig",
    "WmmseState",
    "wf_init",
    "power_scaling",
    "effective_noise",
    "sinr",
    "receiver_gain",
    "receiver_gains",
    "mse_weight",
    "mse_weights",
    "ue_mse",
    "ue_mses",
    "wmmse_objective",
    "real_embedding",
    "to_real",
    "from_real",
    "reduce_to_ils",
    "reduce_all",
    "solve_p5",
    "sum_rate",
    "bisect_omega",
    "QuantizedSubproblem",
    "run_wmmse",
]

log = logging.getLogger(__name__)

_D_FLOOR = 1e-12


@dataclass
class IlsProblem:
    """Real integer least-squares instance ``min ||c - G p||^2, p in labels^n``."""

    G: np.ndarray
    c: np.ndarray
    labels: np.ndarray

    @property
    def dim(self):
        return self.G.shape[0]

    def objective(self, p):
        r = self.c - self.G @ p
        return float(r @ r)


@dataclass
class WmmseConfig:
    """Settings of the outer WMMSE loop.

    ``power_tol`` is relative to ``power``; ``omega_tol`` is the absolute
    bracket width at which the multiplier search stops.
    """

    max_iterations: int = 30
    tol: float = 1e-4
    solver: str = "sd"
    weights: np.ndarray = None
    power: float = 1.0
    noise_power: float = 1.0
    power_tol: float = 1e-3
    omega_tol: float = 1e-8
    bisection_max_iter: int = 100

    def validate(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not self.power > 0 or not self.noise_power > 0:
            raise ValueError("power and noise_power must be positive")
        if self.weights is not None and np.any(np.asarray(self.weights) < 0):
            raise ValueError("UE weights must be non-negative")
        return self


@dataclass
class WmmseState:
    P: np.ndarray
    beta: np.ndarray
    d: np.ndarray
    omega: float = np.nan
    objective_trace: list = field(default_factory=list)
    sum_rate_trace: list = field(default_factory=list)
    converged: bool = False
    n_iter: int = 0


def wf_init(H, q, N0):
    """Wiener-filter (regularized zero-forcing) precoder ``H^H (H H^H + K N0/q I)^-1``."""
    H = np.asarray(H, dtype=complex)
    K = H.shape[0]
    A = H @ H.conj().T + (K * N0 / q) * np.eye(K)
    try:
        return H.conj().T @ np.linalg.inv(A)
    except np.linalg.LinAlgError as exc:
        raise ValueError("singular WF system: N0 = 0 with a rank-deficient channel") from exc


def power_scaling(P, q):
    """``alpha = sqrt(q / tr(P P^H))``; 1 for an all-zero precoder."""
    power = float(np.sum(np.abs(P) ** 2))
    return np.sqrt(q / power) if power > 0 else 1.0


def effective_noise(P, q, N0):
    return N0 / power_scaling(P, q)


def _gains(H, P):
    # G[k, i] = h_k^T p_i
    return np.asarray(H) @ np.asarray(P)


def sinr(H, P, noise):
    HP = _gains(H, P)
    power = np.abs(HP) ** 2
    signal = np.diag(power)
    interference = power.sum(axis=1) - signal
    return signal / (interference + noise)


def receiver_gains(H, P, noise):
    HP = _gains(H, P)
    total = np.sum(np.abs(HP) ** 2, axis=1) + noise
    return np.conj(np.diag(HP)) / total


def receiver_gain(H, P, k, noise):
    """MMSE receiver gain of UE ``k``."""
    return receiver_gains(H, P, noise)[k]


def mse_weights(H, P, noise, weights=None):
    d = (1.0 + sinr(H, P, noise)) / np.log(2)
    if weights is not None:
        d = np.asarray(weights, dtype=float) * d
    return np.maximum(d, _D_FLOOR)


def mse_weight(H, P, k, noise, weight=1.0):
    """Optimal MSE weight ``u_k (1 + SINR_k) / ln 2`` of UE ``k``."""
    return max(weight * (1.0 + sinr(H, P, noise)[k]) / np.log(2), _D_FLOOR)


def ue_mses(H, P, beta, noise):
    HP = _gains(H, P)
    total = np.sum(np.abs(HP) ** 2, axis=1) + noise
    beta = np.asarray(beta)
    return np.abs(beta) ** 2 * total - 2.0 * np.real(beta * np.diag(HP)) + 1.0


def ue_mse(H, P, beta_k, k, noise):
    """Detection MSE of UE ``k`` for receiver gain ``beta_k``."""
    HP = _gains(H, P)
    total = np.sum(np.abs(HP[k]) ** 2) + noise
    return float(abs(beta_k) ** 2 * total - 2.0 * np.real(beta_k * HP[k, k]) + 1.0)


def wmmse_objective(d, e):
    return float(np.sum(d * e - np.log2(d)))


def real_embedding(A):
    """Real 2n x 2n matrix acting on ``[Re x; Im x]`` like ``A`` acts on ``x``."""
    return np.block([[A.real, -A.imag], [A.imag, A.real]])


def to_real(x):
    x = np.asarray(x)
    return np.concatenate([x.real, x.imag], axis=0)


def from_real(x):
    n = x.shape[0] // 2
    return x[:n] + 1j * x[n:]


def _lagrangian_terms(H, d, beta, omega):
    H = np.asarray(H, dtype=complex)
    sd = np.sqrt(np.asarray(d, dtype=float))
    DH = (sd * np.asarray(beta))[:, None] * H
    V = DH.conj().T @ DH + omega * np.eye(H.shape[1])
    F = sd[:, None] * DH  # row i is f_i^T
    return V, F


def reduce_all(H, d, beta, omega, labels):
    """Per-UE integer least-squares problems sharing one triangular factor.

    The quadratic ``p^H V p - 2 Re(f_i^T p)`` with
    ``V = H^H D^H D H + omega I`` is written on ``[Re p; Im p]`` and
    triangularized by a real Cholesky factor ``V_R = G^T G``; then
    ``||c_i - G p||^2 - c_i^T c_i`` reproduces it exactly.
    """
    V, F = _lagrangian_terms(H, d, beta, omega)
    try:
        G = cholesky(real_embedding(V), lower=False)
    except LinAlgError as exc:
        raise np.linalg.LinAlgError(
            f"Lagrangian quadratic form is not positive definite (omega={omega})"
        ) from exc
    labels = np.asarray(labels, dtype=float)
    # linear term Re(f^T p) = [Re f; -Im f]^T [Re p; Im p]
    Gl = np.concatenate([F.real, -F.imag], axis=1).T
    C = solve_triangular(G, Gl, trans="T", lower=False)
    return [IlsProblem(G, C[:, i].copy(), labels) for i in range(F.shape[0])]


def reduce_to_ils(H, d, beta, omega, i, labels):
    """Integer least-squares problem for the precoding column of UE ``i``."""
    return reduce_all(H, d, beta, omega, labels)[i]


def solve_p5(H, d, beta, omega, labels, ils_solver):
    """Alphabet-constrained minimizer of the Lagrangian for fixed ``omega``.

    The K columns are independent; each is solved by ``ils_solver``.
    """
    probs = reduce_all(H, d, beta, omega, labels)
    cols = [from_real(ils_solver(prob)) for prob in probs]
    return np.stack(cols, axis=1)


def sum_rate(H, P, q, N0, weights=None):
    """Weighted sum rate in bit/s/Hz of the AAS-scaled precoder ``alpha P``."""
    P = np.asarray(P)
    power = float(np.sum(np.abs(P) ** 2))
    if power == 0:
        raise ValueError("sum rate undefined for an all-zero precoder")
    alpha = np.sqrt(q / power)
    rates = np.log2(1.0 + sinr(H, alpha * P, N0))
    if weights is None:
        return float(np.sum(rates))
    return float(np.dot(np.asarray(weights, dtype=float), rates))


def bisect_omega(
    H,
    d,
    beta,
    q,
    N0,
    ils_solver,
    labels,
    incumbent,
    weights=None,
    power_tol=1e-3,
    omega_tol=1e-8,
    max_iter=100,
):
    """Search the multiplier so that ``tr(P P^H)`` approaches ``q``.

    Each candidate ``P(omega)`` replaces the incumbent only when it strictly
    improves the (weighted) sum rate, so the returned precoder is never
    worse than ``incumbent``. The bracket starts at ``[0, 1]`` and its upper
    end doubles until the candidate power drops below ``q``.

    Returns
    -------
    omega : float
        Multiplier of the accepted candidate (nan if none was accepted).
    P : ndarray
        Best precoder seen.
    """
    best_P = incumbent
    best_rate = sum_rate(H, incumbent, q, N0, weights) if np.any(incumbent) else -np.inf
    best_omega = np.nan
    tol = power_tol * q
    n_eval = 0

    def excess(omega):
        nonlocal best_P, best_rate, best_omega, n_eval
        n_eval += 1
        P = solve_p5(H, d, beta, omega, labels, ils_solver)
        rate = sum_rate(H, P, q, N0, weights)
        if rate > best_rate:
            best_P, best_rate, best_omega = P, rate, omega
        return float(np.sum(np.abs(P) ** 2)) - q

    lo, hi = 0.0, 1.0
    g = excess(hi)
    while g > 0 and hi < 2.0**30 and n_eval < max_iter:
        lo, hi = hi, 2.0 * hi
        g = excess(hi)
    while abs(g) >= tol and hi - lo >= omega_tol and n_eval < max_iter:
        mid = 0.5 * (lo + hi)
        g = excess(mid)
        if g > 0:
            lo = mid
        else:
            hi = mid
    return best_omega, best_P


class QuantizedSubproblem:
    """Precoder update over the fronthaul alphabet via multiplier bisection.

    A continuous incumbent (the WF start) is first scaled to full power and
    quantized so the update always returns an alphabet-feasible matrix.
    """

    def __init__(self, quantizer, ils_solver, power_tol=1e-3, omega_tol=1e-8, max_iter=100):
        self.quantizer = quantizer
        self.ils_solver = ils_solver
        self.power_tol = power_tol
        self.omega_tol = omega_tol
        self.max_iter = max_iter

    def feasible(self, P, q):
        if np.all(self.quantizer.contains(P)):
            return P
        return quantize(power_scaling(P, q) * P, self.quantizer)

    def __call__(self, H, d, beta, q, N0, incumbent, weights=None):
        incumbent = self.feasible(incumbent, q)
        omega, P = bisect_omega(
            H,
            d,
            beta,
            q,
            N0,
            self.ils_solver,
            self.quantizer.labels,
            incumbent,
            weights=weights,
            power_tol=self.power_tol,
            omega_tol=self.omega_tol,
            max_iter=self.max_iter,
        )
        return P, omega


def _update(H, P, cfg):
    noise = effective_noise(P, cfg.power, cfg.noise_power)
    beta = receiver_gains(H, P, noise)
    d = mse_weights(H, P, noise, cfg.weights)
    e = ue_mses(H, P, beta, noise)
    return beta, d, wmmse_objective(d, e)


def _safe_rate(H, P, cfg):
    if not np.any(P):
        return 0.0
    return sum_rate(H, P, cfg.power, cfg.noise_power, cfg.weights)


def initial_state(H, cfg):
    """WF start, scaled to full power, with its receivers, weights and objective."""
    P = wf_init(H, cfg.power, cfg.noise_power)
    P = power_scaling(P, cfg.power) * P
    beta, d, f = _update(H, P, cfg)
    return WmmseState(P=P, beta=beta, d=d, objective_trace=[f], sum_rate_trace=[_safe_rate(H, P, cfg)])


def run_wmmse(H, cfg, subproblem_solver, state=None):
    """Block-coordinate WMMSE loop.

    Parameters
    ----------
    H : ndarray of shape (K, M)
        Channel known at the BBU.
    cfg : WmmseConfig
    subproblem_solver : callable
        ``solver(H, d, beta, q, N0, incumbent, weights=...) -> (P, omega)``
        minimizing the weighted sum MSE for fixed receivers and weights.
    state : WmmseState, optional
        Start from this state instead of the WF initialization.

    Returns
    -------
    P : ndarray of shape (M, K)
    state : WmmseState
    """
    cfg.validate()
    H = np.asarray(H, dtype=complex)
    st = state if state is not None else initial_state(H, cfg)
    f_prev = st.objective_trace[-1]
    for n in range(1, cfg.max_iterations + 1):
        P, omega = subproblem_solver(
            H, st.d, st.beta, cfg.power, cfg.noise_power, st.P, weights=cfg.weights
        )
        beta, d, f = _update(H, P, cfg)
        st.P, st.beta, st.d, st.omega = P, beta, d, omega
        st.objective_trace.append(f)
        st.sum_rate_trace.append(_safe_rate(H, P, cfg))
        st.n_iter = n
        if abs(f - f_prev) <= cfg.tol:
            st.converged = True
            break
        f_prev = f
    if not st.converged:
        log.debug("WMMSE stopped at max_iterations=%d without converging", cfg.max_iterations)
    return st.P, st
