"""Input checks shared by the estimators, the experiment engine and the CLI."""
import numbers

import numpy as np

__all__ = [
    "check_channel",
    "check_precoder",
    "check_symbols",
    "check_weights",
    "check_positive",
    "check_levels",
]


def check_channel(H, name="H"):
    """Return ``H`` as a finite complex (K, M) array with ``M >= K >= 1``."""
    H = np.asarray(H)
    if H.ndim == 1:
        H = H[None, :]
    if H.ndim != 2:
        raise ValueError(f"{name} must be 2-D (K, M), got shape {H.shape}")
    K, M = H.shape
    if K < 1 or M < 1:
        raise ValueError(f"{name} is empty")
    if M < K:
        raise ValueError(f"{name} has more UEs ({K}) than antennas ({M})")
    H = H.astype(complex)
    if not np.all(np.isfinite(H)):
        raise ValueError(f"{name} contains NaN or Inf")
    return H


def check_precoder(P, shape=None, name="P"):
    P = np.asarray(P, dtype=complex)
    if P.ndim != 2:
        raise ValueError(f"{name} must be 2-D (M, K), got shape {P.shape}")
    if shape is not None and P.shape != tuple(shape):
        raise ValueError(f"{name} has shape {P.shape}, expected {tuple(shape)}")
    if not np.all(np.isfinite(P)):
        raise ValueError(f"{name} contains NaN or Inf")
    return P


def check_symbols(S, K):
    """Data symbols as a (K, T) array; a length-K vector becomes one column."""
    S = np.asarray(S, dtype=complex)
    if S.ndim == 1:
        S = S[:, None]
    if S.ndim != 2 or S.shape[0] != K:
        raise ValueError(f"symbols must have {K} rows, got shape {S.shape}")
    return S


def check_weights(weights, K):
    """``None`` or a non-negative length-K vector of UE priorities."""
    if weights is None:
        return None
    w = np.asarray(weights, dtype=float).ravel()
    if w.shape != (K,):
        raise ValueError(f"weights must have length {K}, got {w.shape[0]}")
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and non-negative")
    return w


def check_positive(value, name):
    if not isinstance(value, numbers.Real) or not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be a positive finite number, got {value!r}")
    return float(value)


def check_levels(levels):
    if isinstance(levels, bool) or not isinstance(levels, numbers.Integral) or levels < 2:
        raise ValueError(f"levels must be an integer >= 2, got {levels!r}")
    return int(levels)
