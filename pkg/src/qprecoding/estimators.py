"""scikit-learn style precoders.

``fit(H)`` computes a precoder for one channel realization, ``transform(S)``
maps data symbols to the AAS transmit signal ``alpha P S`` and ``score(H)``
returns the (weighted) sum rate of the fitted precoder on a channel, which
may differ from the one used for fitting when the CSI is imperfect.

Example
-------
>>> import numpy as np
>>> from qprecoding import WMMSEPrecoder
>>> rng = np.random.default_rng(0)
>>> H = (rng.standard_normal((2, 4)) + 1j * rng.standard_normal((2, 4))) / np.sqrt(2)
>>> est = WMMSEPrecoder(solver="sd", levels=4, noise_power=0.1).fit(H)
>>> est.precoder_.shape
(4, 2)
"""
import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .baselines import (
    ContinuousSubproblem,
    half_aware_precoding,
    heuristic_refine,
    unaware_precoding,
)
from .ep import EpConfig, ep_solve
from .quantizer import build_quantizer, default_step_size
from .sd import sphere_decode
from .validation import (
    check_channel,
    check_levels,
    check_positive,
    check_symbols,
    check_weights,
)
from .wmmse import QuantizedSubproblem, WmmseConfig, power_scaling, run_wmmse, sinr, sum_rate

__all__ = [
    "SD_MAX_NODES",
    "SdSolver",
    "EpSolver",
    "make_ils_solver",
    "WMMSEPrecoder",
    "UnawarePrecoder",
    "HalfAwarePrecoder",
    "HeuristicPrecoder",
    "InfiniteResolutionPrecoder",
]


# Node budget of the sphere decoder inside WMMSE. The largest search seen at
# 25 dB (M = 8, K = 2, L = 8, 30 channels, 5546 searches) visited 2.1e6
# nodes; about 0.7 s per truncated search at 1.5e7 nodes/s.
SD_MAX_NODES = 10_000_000


class SdSolver:
    """Picklable ILS callable around :func:`sphere_decode` with a node budget.

    ``calls`` and ``truncated`` count searches and budget hits since the
    last :meth:`reset`.
    """

    def __init__(self, max_nodes=SD_MAX_NODES):
        self.max_nodes = max_nodes
        self.reset()

    def reset(self):
        self.calls = 0
        self.truncated = 0

    def __call__(self, prob):
        res = sphere_decode(prob, return_info=True, max_nodes=self.max_nodes)
        self.calls += 1
        self.truncated += res.truncated
        return res.p


class EpSolver:
    """Picklable ILS callable wrapping :func:`ep_solve` with a fixed config."""

    def __init__(self, cfg=None):
        self.cfg = cfg or EpConfig()

    def __call__(self, prob):
        return ep_solve(prob, self.cfg)


def make_ils_solver(name, ep_config=None, sd_max_nodes=SD_MAX_NODES):
    if name == "sd":
        return SdSolver(sd_max_nodes)
    if name == "ep":
        return EpSolver(ep_config)
    raise ValueError(f"unknown ILS solver {name!r}; expected 'sd' or 'ep'")


class WMMSEPrecoder(TransformerMixin, BaseEstimator):
    """Quantization-aware WMMSE precoder.

    Parameters
    ----------
    solver : {'sd', 'ep'}
        Solver of the per-UE integer least-squares problems.
    levels : int
        Real quantization levels per dimension of the fronthaul alphabet.
    step : float, optional
        Quantizer step; by default the MSE-optimal step for a Gaussian input
        of complex variance ``power / (K M)``.
    power, noise_power : float
        Transmit power budget ``q`` and receiver noise power ``N0``.
    max_iter, tol : int, float
        Outer WMMSE iteration cap and objective-change tolerance.
    weights : array-like of shape (K,), optional
        UE priorities of the weighted sum rate.
    ep_max_iter, ep_damping : int, float
        EP settings (ignored by the sphere decoder).
    power_tol, omega_tol : float
        Stopping rules of the multiplier bisection.
    sd_max_nodes : int, optional
        Node budget per sphere-decoder search; ``None`` keeps every search
        exact. Budget hits are counted in ``sd_truncated_``.

    Attributes
    ----------
    precoder_ : ndarray of shape (M, K)
        Alphabet-constrained precoder (continuous for the infinite-resolution
        reference), before the AAS scaling.
    scaling_ : float
        AAS factor ``alpha`` bringing ``precoder_`` to the power budget.
    n_iter_, converged_ : int, bool
        Outer iterations run and whether the objective change fell below ``tol``.
    objective_trace_, sum_rate_trace_ : list of float
        Per-iteration WMMSE objective and sum rate, starting at the initial point.
    sd_truncated_ : int
        Sphere-decoder searches stopped by the node budget.
    """

    def __init__(
        self,
        solver="sd",
        levels=8,
        step=None,
        power=1.0,
        noise_power=1.0,
        max_iter=30,
        tol=1e-4,
        weights=None,
        ep_max_iter=10,
        ep_damping=0.5,
        power_tol=1e-3,
        omega_tol=1e-8,
        sd_max_nodes=SD_MAX_NODES,
    ):
        self.solver = solver
        self.levels = levels
        self.step = step
        self.power = power
        self.noise_power = noise_power
        self.max_iter = max_iter
        self.tol = tol
        self.weights = weights
        self.ep_max_iter = ep_max_iter
        self.ep_damping = ep_damping
        self.power_tol = power_tol
        self.omega_tol = omega_tol
        self.sd_max_nodes = sd_max_nodes

    # -- helpers -----------------------------------------------------------
    def _wmmse_config(self, K):
        return WmmseConfig(
            max_iterations=int(self.max_iter),
            tol=check_positive(self.tol, "tol"),
            solver=self.solver,
            weights=check_weights(self.weights, K),
            power=check_positive(self.power, "power"),
            noise_power=check_positive(self.noise_power, "noise_power"),
            power_tol=self.power_tol,
            omega_tol=self.omega_tol,
        ).validate()

    def _quantizer(self, K, M):
        levels = check_levels(self.levels)
        step = self.step
        if step is None:
            step = default_step_size(levels, self.power, K, M)
        return build_quantizer(levels, check_positive(step, "step"))

    def _ils_solver(self):
        ep_cfg = EpConfig(max_iterations=int(self.ep_max_iter), damping=float(self.ep_damping))
        return make_ils_solver(self.solver, ep_cfg.validate(), self.sd_max_nodes)

    def _store(self, P, state, quantizer, ils_solver):
        self.precoder_ = P
        self.quantizer_ = quantizer
        self.state_ = state
        self.n_iter_ = state.n_iter if state is not None else 0
        self.converged_ = bool(state.converged) if state is not None else True
        self.objective_trace_ = list(state.objective_trace) if state is not None else []
        self.sum_rate_trace_ = list(state.sum_rate_trace) if state is not None else []
        self.scaling_ = power_scaling(P, self.power) if np.any(P) else 1.0
        self.sd_truncated_ = int(getattr(ils_solver, "truncated", 0))
        return self

    def _solve(self, H, cfg, quantizer, ils_solver):
        sub = QuantizedSubproblem(quantizer, ils_solver, cfg.power_tol, cfg.omega_tol)
        return run_wmmse(H, cfg, sub)

    # -- estimator API -----------------------------------------------------
    def fit(self, H, y=None):
        """Compute the precoder for channel ``H`` of shape (K, M)."""
        H = check_channel(H)
        K, M = H.shape
        cfg = self._wmmse_config(K)
        quantizer = self._quantizer(K, M)
        self.n_ues_, self.n_antennas_ = K, M
        ils_solver = self._ils_solver()
        P, state = self._solve(H, cfg, quantizer, ils_solver)
        return self._store(P, state, quantizer, ils_solver)

    def transform(self, S):
        """Transmit signal ``alpha P S`` for data symbols ``S`` of shape (K, T)."""
        check_is_fitted(self, "precoder_")
        S = check_symbols(S, self.n_ues_)
        return self.scaling_ * self.precoder_ @ S

    def predict(self, H):
        """Per-UE rates in bit/s/Hz of the fitted precoder on channel ``H``."""
        check_is_fitted(self, "precoder_")
        H = check_channel(H)
        if not np.any(self.precoder_):
            return np.zeros(H.shape[0])
        return np.log2(1.0 + sinr(H, self.scaling_ * self.precoder_, self.noise_power))

    def score(self, H, y=None):
        """Weighted sum rate of the fitted precoder on channel ``H``."""
        check_is_fitted(self, "precoder_")
        H = check_channel(H)
        if not np.any(self.precoder_):
            return 0.0
        return sum_rate(H, self.precoder_, self.power, self.noise_power, check_weights(self.weights, H.shape[0]))


class UnawarePrecoder(WMMSEPrecoder):
    """Continuous WMMSE followed by entrywise quantization."""

    def _solve(self, H, cfg, quantizer, ils_solver):
        return unaware_precoding(H, cfg, quantizer)


class HalfAwarePrecoder(WMMSEPrecoder):
    """Continuous WMMSE with a quantization-aware final update."""

    def _solve(self, H, cfg, quantizer, ils_solver):
        return half_aware_precoding(H, cfg, quantizer, ils_solver)


class HeuristicPrecoder(WMMSEPrecoder):
    """Greedy GI-ordered refinement of the quantized continuous WMMSE precoder."""

    def _solve(self, H, cfg, quantizer, ils_solver):
        P_unq, state = run_wmmse(H, cfg, ContinuousSubproblem())
        P = heuristic_refine(H, P_unq, quantizer, cfg.power, cfg.noise_power, cfg.weights)
        return P, state


class InfiniteResolutionPrecoder(WMMSEPrecoder):
    """Continuous WMMSE without a fronthaul alphabet (upper reference)."""

    def _solve(self, H, cfg, quantizer, ils_solver):
        return run_wmmse(H, cfg, ContinuousSubproblem())
