"""Quantization-aware multi-user MIMO downlink precoding.

The precoder is computed at a baseband unit and sent over a limited
fronthaul, so its entries must come from a finite alphabet. The main entry
points are the scikit-learn style estimators (:class:`WMMSEPrecoder` and the
baseline precoders) and :func:`run_experiment` for Monte-Carlo sweeps.
"""
from .quantizer import (
    QuantizerSpec,
    build_quantizer,
    default_step_size,
    optimal_step_size,
    quantize,
)
from .channel import ChannelConfig, ChannelMatrix, CsiModel, draw_channel, estimate_csi
from .wmmse import IlsProblem, WmmseConfig, WmmseState, run_wmmse, sum_rate, wf_init
from .sd import brute_force_ils, sphere_decode
from .ep import EpConfig, ep_solve
from .baselines import continuous_p3, half_aware_precoding, heuristic_refine, unaware_precoding
from .estimators import (
    HalfAwarePrecoder,
    HeuristicPrecoder,
    InfiniteResolutionPrecoder,
    UnawarePrecoder,
    WMMSEPrecoder,
)
from .eval import ExperimentConfig, ResultRow, fronthaul_capacity, run_experiment

__version__ = "0.1.0"

__all__ = [
    "QuantizerSpec",
    "build_quantizer",
    "default_step_size",
    "optimal_step_size",
    "quantize",
    "ChannelConfig",
    "ChannelMatrix",
    "CsiModel",
    "draw_channel",
    "estimate_csi",
    "IlsProblem",
    "WmmseConfig",
    "WmmseState",
    "run_wmmse",
    "sum_rate",
    "wf_init",
    "brute_force_ils",
    "sphere_decode",
    "EpConfig",
    "ep_solve",
    "continuous_p3",
    "half_aware_precoding",
    "heuristic_refine",
    "unaware_precoding",
    "WMMSEPrecoder",
    "UnawarePrecoder",
    "HalfAwarePrecoder",
    "HeuristicPrecoder",
    "InfiniteResolutionPrecoder",
    "ExperimentConfig",
    "ResultRow",
    "fronthaul_capacity",
    "run_experiment",
]
