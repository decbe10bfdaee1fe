"""Monte-Carlo experiment engine and fronthaul load accounting.

Every trial owns a random stream derived from ``(seed, trial)``, so the
channel of trial ``t`` does not depend on how many trials run, and all
schemes and SNR points of a trial see the same channel draw (common random
numbers). CSI noise is drawn from a second per-trial stream that is reset for
each SNR point, so only its scale changes across the SNR grid.
"""
from dataclasses import dataclass, field, asdict
import logging

import numpy as np
from joblib import Parallel, delayed

from .channel import ChannelConfig, CsiModel, draw_channel, estimate_csi
from .estimators import (
    SD_MAX_NODES,
    HalfAwarePrecoder,
    HeuristicPrecoder,
    InfiniteResolutionPrecoder,
    UnawarePrecoder,
    WMMSEPrecoder,
)

__all__ = [
    "SCHEMES",
    "ExperimentConfig",
    "ResultRow",
    "TrialRecord",
    "run_experiment",
    "run_trial",
    "make_estimator",
    "draw_weights",
    "fronthaul_capacity",
]

log = logging.getLogger(__name__)

SCHEMES = ("infinite_res", "sd", "ep", "half_aware", "heuristic", "unaware")
_CONTINUOUS = ("infinite_res", "unaware", "heuristic")
# solver failures the engine records instead of raising
_TRIAL_ERRORS = (np.linalg.LinAlgError, FloatingPointError, ValueError, ZeroDivisionError)


@dataclass
class ExperimentConfig:
    """Monte-Carlo experiment description.

    ``weights`` is ``'uniform'``, ``'random'`` (integers from {1, 2} drawn
    per trial and normalized to sum to K) or an explicit length-K list.
    ``design_weights`` chooses whether the precoder is optimized for the
    true weights or for uniform ones; rates are always evaluated with the
    true weights. ``continuous_max_iterations`` caps the continuous WMMSE
    runs of the infinite-resolution, Unaware and Heuristic schemes;
    ``max_iterations`` caps the quantization-aware runs and is the ``N`` of
    Half-aware. ``sd_max_nodes`` is the node budget of each sphere-decoder
    search (0 searches exhaustively); budget hits are reported per cell.
    """

    schemes: list = field(default_factory=lambda: ["infinite_res", "sd", "ep", "half_aware", "heuristic", "unaware"])
    snr_grid_db: list = field(default_factory=lambda: [-10.0, 0.0, 10.0, 20.0, 30.0, 40.0])
    M: int = 16
    K: int = 4
    L: int = 8
    trials: int = 100
    seed: int = 0
    power: float = 1.0
    max_iterations: int = 30
    continuous_max_iterations: int = 200
    tol: float = 1e-4
    ep_max_iterations: int = 10
    ep_damping: float = 0.5
    sd_max_nodes: int = SD_MAX_NODES
    weights: object = "uniform"
    design_weights: str = "true"
    n_jobs: int = 1
    csi: CsiModel = field(default_factory=CsiModel)
    channel: ChannelConfig = field(default_factory=ChannelConfig)

    def validate(self):
        if not self.schemes:
            raise ValueError("schemes must be non-empty")
        unknown = [s for s in self.schemes if s not in SCHEMES]
        if unknown:
            raise ValueError(f"unknown schemes {unknown}; choose from {list(SCHEMES)}")
        if not len(self.snr_grid_db):
            raise ValueError("snr_grid_db must be non-empty")
        if int(self.trials) != self.trials or self.trials < 1:
            raise ValueError("trials must be an integer >= 1")
        if int(self.L) != self.L or self.L < 2:
            raise ValueError("L must be an integer >= 2")
        if not self.power > 0:
            raise ValueError("power must be positive")
        if int(self.sd_max_nodes) != self.sd_max_nodes or self.sd_max_nodes < 0:
            raise ValueError("sd_max_nodes must be an integer >= 0 (0: no budget)")
        if self.design_weights not in ("true", "uniform"):
            raise ValueError("design_weights must be 'true' or 'uniform'")
        if isinstance(self.weights, str):
            if self.weights not in ("uniform", "random"):
                raise ValueError("weights must be 'uniform', 'random' or a list")
        elif len(self.weights) != self.K:
            raise ValueError(f"explicit weights need length K={self.K}")
        self.channel.M, self.channel.K = int(self.M), int(self.K)
        self.channel.validate()
        self.csi.validate()
        return self


@dataclass
class ResultRow:
    scheme: str
    snr_db: float
    mean_sum_rate: float
    std_error: float
    trials: int
    converged_fraction: float
    mean_iterations: float
    failures: int = 0
    truncated_solves: int = 0

    @property
    def flagged(self):
        """More than 1% of the trials of this cell failed."""
        return self.failures > 0.01 * (self.trials + self.failures)

    def as_dict(self):
        return asdict(self)


@dataclass
class TrialRecord:
    scheme: str
    snr_db: float
    trial: int
    sum_rate: float
    converged: bool
    iterations: int
    failed: bool = False
    truncated_solves: int = 0
    objective_trace: list = None
    sum_rate_trace: list = None


def draw_weights(rng, K):
    """Integers from {1, 2} normalized to sum to K."""
    u = rng.integers(1, 3, size=K).astype(float)
    return u * K / u.sum()


def make_estimator(scheme, cfg, noise_power, weights):
    """Estimator running ``scheme`` for one SNR point."""
    common = dict(
        levels=int(cfg.L),
        power=cfg.power,
        noise_power=noise_power,
        tol=cfg.tol,
        weights=weights,
        ep_max_iter=cfg.ep_max_iterations,
        ep_damping=cfg.ep_damping,
        sd_max_nodes=int(cfg.sd_max_nodes) or None,
    )
    n_cont = int(cfg.continuous_max_iterations)
    if scheme == "infinite_res":
        return InfiniteResolutionPrecoder(max_iter=n_cont, **common)
    if scheme == "unaware":
        return UnawarePrecoder(max_iter=n_cont, **common)
    if scheme == "heuristic":
        return HeuristicPrecoder(max_iter=n_cont, **common)
    if scheme == "half_aware":
        return HalfAwarePrecoder(solver="sd", max_iter=int(cfg.max_iterations), **common)
    if scheme in ("sd", "ep"):
        return WMMSEPrecoder(solver=scheme, max_iter=int(cfg.max_iterations), **common)
    raise ValueError(f"unknown scheme {scheme!r}")


def _trial_streams(seed, trial):
    ss = np.random.SeedSequence([int(seed), int(trial)])
    channel_ss, csi_ss, weight_ss = ss.spawn(3)
    return channel_ss, csi_ss, weight_ss


def run_trial(cfg, trial, keep_traces=False):
    """All (scheme, SNR) records of one channel realization."""
    channel_ss, csi_ss, weight_ss = _trial_streams(cfg.seed, trial)
    H = draw_channel(cfg.channel, np.random.default_rng(channel_ss)).H
    K = H.shape[0]
    if isinstance(cfg.weights, str):
        true_w = draw_weights(np.random.default_rng(weight_ss), K) if cfg.weights == "random" else None
    else:
        true_w = np.asarray(cfg.weights, dtype=float)
    design_w = true_w if cfg.design_weights == "true" else None

    records = []
    for snr in cfg.snr_grid_db:
        noise = cfg.power / 10.0 ** (snr / 10.0)
        H_hat = estimate_csi(H, cfg.csi, np.random.default_rng(csi_ss), snr_db=snr)
        for scheme in cfg.schemes:
            est = make_estimator(scheme, cfg, noise, design_w)
            try:
                est.fit(H_hat)
                est.set_params(weights=true_w)
                rate = est.score(H)
            except _TRIAL_ERRORS as exc:
                log.warning("trial %d, %s at %g dB failed: %s", trial, scheme, snr, exc)
                records.append(TrialRecord(scheme, snr, trial, np.nan, False, 0, failed=True))
                continue
            records.append(
                TrialRecord(
                    scheme,
                    snr,
                    trial,
                    rate,
                    est.converged_,
                    est.n_iter_,
                    truncated_solves=est.sd_truncated_,
                    objective_trace=est.objective_trace_ if keep_traces else None,
                    sum_rate_trace=est.sum_rate_trace_ if keep_traces else None,
                )
            )
    return records


def _aggregate(cfg, records):
    rows = []
    for scheme in cfg.schemes:
        for snr in cfg.snr_grid_db:
            cell = [r for r in records if r.scheme == scheme and r.snr_db == snr]
            ok = [r for r in cell if not r.failed]
            n_fail = len(cell) - len(ok)
            rates = np.array([r.sum_rate for r in ok])
            n = rates.size
            mean = float(rates.mean()) if n else float("nan")
            se = float(rates.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
            row = ResultRow(
                scheme=scheme,
                snr_db=float(snr),
                mean_sum_rate=mean,
                std_error=se,
                trials=n,
                converged_fraction=float(np.mean([r.converged for r in ok])) if n else 0.0,
                mean_iterations=float(np.mean([r.iterations for r in ok])) if n else 0.0,
                failures=n_fail,
                truncated_solves=int(sum(r.truncated_solves for r in ok)),
            )
            if row.flagged:
                log.warning("%s at %g dB: %d of %d trials failed", scheme, snr, n_fail, len(cell))
            if row.truncated_solves:
                log.info("%s at %g dB: %d sphere-decoder searches hit the node budget", scheme, snr, row.truncated_solves)
            rows.append(row)
    return rows


def run_experiment(cfg, return_records=False, trace_trial=None):
    """Run every scheme at every SNR point over ``cfg.trials`` channels.

    Parameters
    ----------
    cfg : ExperimentConfig
    return_records : bool
        Also return the per-trial :class:`TrialRecord` list.
    trace_trial : int, optional
        Keep the per-iteration objective and sum-rate traces of this trial.

    Returns
    -------
    rows : list of ResultRow
        One row per (scheme, SNR), schemes in config order.
    records : list of TrialRecord
        Only with ``return_records``; sorted by trial index.
    """
    cfg.validate()
    trials = range(int(cfg.trials))
    if cfg.n_jobs == 1:
        per_trial = [run_trial(cfg, t, keep_traces=(t == trace_trial)) for t in trials]
    else:
        per_trial = Parallel(n_jobs=cfg.n_jobs)(
            delayed(run_trial)(cfg, t, keep_traces=(t == trace_trial)) for t in trials
        )
    # aggregation order is fixed by trial index regardless of execution order
    records = [r for recs in per_trial for r in recs]
    rows = _aggregate(cfg, records)
    return (rows, records) if return_records else rows


def fronthaul_capacity(M, K, tau_s, eta_bits, n_precoding, n_oversampling):
    """Fronthaul bits per coherence block for separate vs joint transport.

    ``C_separate = 2 M K n_precoding + tau_s K eta_bits`` ships the quantized
    precoder once plus the quantized data symbols; ``C_joint = M tau_s
    eta_bits n_oversampling`` ships the precoded, oversampled antenna signals.
    """
    args = (M, K, tau_s, eta_bits, n_precoding, n_oversampling)
    if any(int(a) != a or a < 0 for a in args):
        raise ValueError("fronthaul_capacity expects non-negative integers")
    M, K, tau_s, eta_bits, n_precoding, n_oversampling = (int(a) for a in args)
    c_separate = 2 * M * K * n_precoding + tau_s * K * eta_bits
    c_joint = M * tau_s * eta_bits * n_oversampling
    return c_separate, c_joint
