"""Reference precoders: infinite resolution, Unaware, Half-aware and Heuristic."""
import numpy as np
from scipy.optimize import brentq

from .quantizer import quantize, quantize_indices
from .wmmse import (
    QuantizedSubproblem,
    WmmseConfig,
    _update,
    _safe_rate,
    initial_state,
    power_scaling,
    run_wmmse,
    sum_rate,
)

__all__ = [
    "continuous_p3",
    "ContinuousSubproblem",
    "unaware_precoding",
    "half_aware_precoding",
    "generated_interference",
    "heuristic_candidates",
    "heuristic_refine",
]


def continuous_p3(H, d, beta, q, return_omega=False):
    """Weighted-MSE minimizing precoder over complex matrices with ``tr(P P^H) <= q``.

    ``P(omega) = (H^H D^H D H + omega I)^-1 H^H D^H sqrt(diag(d))`` with the
    smallest ``omega >= 0`` meeting the power budget. At ``omega = 0`` a
    singular quadratic form is inverted on its range (minimum-norm solution).
    """
    H = np.asarray(H, dtype=complex)
    sd = np.sqrt(np.asarray(d, dtype=float))
    DH = (sd * np.asarray(beta))[:, None] * H
    lam, U = np.linalg.eigh(DH.conj().T @ DH)
    B = (sd[:, None] * DH).conj().T
    Y = U.conj().T @ B
    keep = lam > 1e-12 * max(lam.max(), 1e-300)
    lam_k, Y_k = lam[keep], Y[keep]
    row_power = np.sum(np.abs(Y_k) ** 2, axis=1)

    def power(omega):
        return float(np.sum(row_power / (lam_k + omega) ** 2))

    if lam_k.size == 0 or power(0.0) <= q:
        omega = 0.0
    else:
        hi = max(1e-12, float(lam_k.max()))
        while power(hi) > q:
            hi *= 2.0
        omega = brentq(lambda w: power(w) - q, 0.0, hi, xtol=1e-14, rtol=1e-13)
    P = U[:, keep] @ (Y_k / (lam_k + omega)[:, None])
    return (P, omega) if return_omega else P


class ContinuousSubproblem:
    """Infinite-resolution precoder update for :func:`run_wmmse`."""

    def __call__(self, H, d, beta, q, N0, incumbent, weights=None):
        P, omega = continuous_p3(H, d, beta, q, return_omega=True)
        return P, omega


def unaware_precoding(H, cfg, spec):
    """Continuous WMMSE to convergence, then entrywise quantization.

    Returns the quantized precoder and the continuous WMMSE state.
    """
    P_unq, st = run_wmmse(H, cfg, ContinuousSubproblem())
    return quantize(P_unq, spec), st


def half_aware_precoding(H, cfg, spec, ils_solver):
    """Continuous WMMSE for ``N - 1`` iterations and one quantized final update.

    ``N`` is ``cfg.max_iterations``. The final update uses the receivers and
    weights of the continuous iterate and starts from its quantized version.
    """
    if cfg.max_iterations > 1:
        inner = WmmseConfig(**{**cfg.__dict__, "max_iterations": cfg.max_iterations - 1})
        _, st = run_wmmse(H, inner, ContinuousSubproblem())
    else:
        st = initial_state(np.asarray(H, dtype=complex), cfg)
    solver = QuantizedSubproblem(
        spec, ils_solver, cfg.power_tol, cfg.omega_tol, cfg.bisection_max_iter
    )
    P, omega = solver(H, st.d, st.beta, cfg.power, cfg.noise_power, st.P, weights=cfg.weights)
    beta, d, f = _update(np.asarray(H, dtype=complex), P, cfg)
    st.P, st.beta, st.d, st.omega = P, beta, d, omega
    st.objective_trace.append(f)
    st.sum_rate_trace.append(_safe_rate(H, P, cfg))
    st.n_iter += 1
    return P, st


def generated_interference(H, P_scaled, k=None):
    """Interference power column ``k`` of ``H P`` leaks onto the other UEs.

    Without ``k`` all K values are returned.
    """
    power = np.abs(np.asarray(H) @ np.asarray(P_scaled)) ** 2
    gi = power.sum(axis=0) - np.diag(power)
    return gi if k is None else float(gi[k])


def _second_nearest(x, spec):
    idx = quantize_indices(x, spec)
    labels = spec.labels
    up = np.minimum(idx + 1, spec.levels - 1)
    down = np.maximum(idx - 1, 0)
    use_up = np.abs(labels[up] - x) < np.abs(labels[down] - x)
    # at the alphabet edge the only neighbour is the inner one
    use_up = np.where(idx == 0, True, np.where(idx == spec.levels - 1, False, use_up))
    return idx, np.where(use_up, up, down)


def heuristic_candidates(x, spec):
    """Up to four alphabet points from the nearest / second nearest labels per dimension.

    The first candidate is always ``quantize(x)``.
    """
    re1, re2 = _second_nearest(np.real(x), spec)
    im1, im2 = _second_nearest(np.imag(x), spec)
    out = []
    for r in (re1, re2):
        for i in (im1, im2):
            z = complex(spec.labels[r], spec.labels[i])
            if z not in out:
                out.append(z)
    return out


def heuristic_refine(H, P_unquantized, spec, q, N0, weights=None):
    """Greedy entrywise refinement of the quantized continuous precoder.

    UE columns are visited by decreasing generated interference (ties by UE
    index), rows by ascending antenna index; each entry takes whichever of
    its candidate points gives the highest sum rate with the others fixed.
    """
    H = np.asarray(H, dtype=complex)
    P_unq = np.asarray(P_unquantized, dtype=complex)
    P = quantize(P_unq, spec)
    gi = generated_interference(H, power_scaling(P, q) * P)
    order = sorted(range(P.shape[1]), key=lambda k: (-gi[k], k))
    current = sum_rate(H, P, q, N0, weights)
    for k in order:
        for m in range(P.shape[0]):
            best_z, best_rate = P[m, k], current
            for z in heuristic_candidates(P_unq[m, k], spec):
                if z == P[m, k]:
                    continue
                P[m, k] = z
                rate = sum_rate(H, P, q, N0, weights)
                if rate > best_rate:
                    best_z, best_rate = z, rate
            P[m, k] = best_z
            current = best_rate
    return P
