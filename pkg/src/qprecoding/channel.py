"""Rician/ULA channel generation and imperfect-CSI models."""
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ChannelConfig",
    "ChannelMatrix",
    "CsiModel",
    "AQNM_TABLE",
    "ula_response",
    "path_loss_db",
    "draw_channel",
    "local_scattering_covariance",
    "ls_estimate",
    "aqnm_distortion",
    "aqnm_quantize_csi",
    "estimate_csi",
]

# distortion factor for B_H = 1..5 bits per complex entry (Gaussian input)
AQNM_TABLE = {1: 0.3634, 2: 0.1175, 3: 0.03454, 4: 0.009497, 5: 0.002499}


@dataclass
class ChannelConfig:
    """Parameters of the single-cell Rician channel draw.

    ``normalize_path_loss`` rescales the drawn path losses so that their mean
    over the K UEs is one, keeping relative near-far differences while making
    ``q / N0`` the average receive SNR per antenna.
    """

    M: int = 16
    K: int = 4
    rician_factor: float = 10.0
    angle_range: tuple = (-np.pi / 3, np.pi / 3)
    distance_range: tuple = (10.0, 200.0)
    nlos_model: str = "uncorrelated"
    angular_std: float = np.deg2rad(10.0)
    normalize_path_loss: bool = True

    def validate(self):
        if not (int(self.M) == self.M and int(self.K) == self.K):
            raise ValueError("M and K must be integers")
        if not self.M >= self.K >= 1:
            raise ValueError(f"need M >= K >= 1, got M={self.M}, K={self.K}")
        if self.rician_factor < 0:
            raise ValueError("rician_factor must be non-negative")
        lo, hi = self.angle_range
        if not lo < hi:
            raise ValueError("angle_range must be a non-degenerate interval")
        lo, hi = self.distance_range
        if not 0 < lo < hi:
            raise ValueError("distance_range must be a non-degenerate positive interval")
        if self.nlos_model not in ("uncorrelated", "correlated"):
            raise ValueError(f"unknown nlos_model {self.nlos_model!r}")
        if self.nlos_model == "correlated" and not self.angular_std > 0:
            raise ValueError("angular_std must be positive")
        return self


@dataclass
class ChannelMatrix:
    """K x M channel with per-UE linear path-loss gains."""

    H: np.ndarray
    path_loss: np.ndarray
    angles: np.ndarray = None
    distances: np.ndarray = None


@dataclass
class CsiModel:
    """How the BBU sees the channel.

    ``uplink_snr_db = None`` ties the pilot SNR ``q_U / sigma_U^2`` to the
    downlink SNR of the experiment cell.
    """

    mode: str = "perfect"
    pilot_length: int = 4
    uplink_power: float = 1.0
    uplink_noise: float = None
    uplink_snr_db: float = None
    csi_bits: int = 3

    def validate(self):
        if self.mode not in ("perfect", "ls_estimate", "ls_plus_aqnm"):
            raise ValueError(f"unknown CSI mode {self.mode!r}")
        if self.pilot_length < 1:
            raise ValueError("pilot_length must be >= 1")
        if self.mode == "ls_plus_aqnm" and self.csi_bits < 1:
            raise ValueError("csi_bits must be >= 1")
        if self.uplink_power <= 0:
            raise ValueError("uplink_power must be positive")
        return self


def ula_response(angle, M):
    """Half-wavelength ULA steering vector ``exp(j m pi sin(angle))``."""
    m = np.arange(M)
    return np.exp(1j * m * np.pi * np.sin(angle))


def path_loss_db(distance):
    """3GPP UMi path loss in dB (no shadow fading), distance in meters."""
    distance = np.asarray(distance, dtype=float)
    if np.any(distance <= 0):
        raise ValueError("distance must be positive")
    out = -37.5 - 22.0 * np.log10(distance)
    return out[()] if out.ndim == 0 else out


def local_scattering_covariance(angle, M, angular_std, n_nodes=64):
    """Spatial covariance of a ULA under Gaussian local scattering.

    ``R[m, n] = E[exp(j pi (m - n) sin(angle + delta))]`` with
    ``delta ~ N(0, angular_std^2)``, integrated with Gauss-Hermite nodes.
    """
    x, w = np.polynomial.hermite_e.hermegauss(n_nodes)
    w = w / w.sum()
    diff = np.arange(M)[:, None] - np.arange(M)[None, :]
    phase = np.pi * np.sin(angle + angular_std * x)
    return np.tensordot(w, np.exp(1j * diff[None, :, :] * phase[:, None, None]), axes=1)


def _crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def draw_channel(cfg, rng):
    """Draw one K x M channel realization.

    The draw order (angles, distances, NLoS) is fixed so a given generator
    state always yields the same channel.
    """
    cfg.validate()
    M, K = int(cfg.M), int(cfg.K)
    angles = rng.uniform(*cfg.angle_range, size=K)
    distances = rng.uniform(*cfg.distance_range, size=K)
    rho = 10.0 ** (path_loss_db(distances) / 10.0)
    if cfg.normalize_path_loss:
        rho = rho / rho.mean()
    w = _crandn(rng, K, M)
    if cfg.nlos_model == "correlated":
        nlos = np.empty_like(w)
        for k in range(K):
            R = local_scattering_covariance(angles[k], M, cfg.angular_std)
            vals, vecs = np.linalg.eigh(R)
            root = vecs * np.sqrt(np.clip(vals, 0, None))
            nlos[k] = root @ w[k]
    else:
        nlos = w
    los = np.stack([ula_response(a, M) for a in angles])
    kappa = cfg.rician_factor
    if np.isinf(kappa):
        a, b = 1.0, 0.0
    else:
        a, b = np.sqrt(kappa / (kappa + 1)), np.sqrt(1 / (kappa + 1))
    H = np.sqrt(rho)[:, None] * (a * los + b * nlos)
    return ChannelMatrix(H=H, path_loss=rho, angles=angles, distances=distances)


def ls_estimate(h, model, rng):
    """Least-squares pilot estimate of channel rows ``h`` (shape (M,) or (K, M)).

    The despread pilot is ``y = sqrt(q_U) tau_p h + n`` where ``n`` collects
    ``tau_p`` noise samples weighted by a unit-modulus pilot, so each entry has
    variance ``tau_p sigma_U^2``. Dividing by ``sqrt(q_U) tau_p`` leaves an
    error of variance ``sigma_U^2 / (q_U tau_p)`` per entry.
    """
    h = np.asarray(h, dtype=complex)
    tau = model.pilot_length
    q_u = model.uplink_power
    noise = _uplink_noise(model)
    gain = np.sqrt(q_u) * tau
    y = gain * h + np.sqrt(tau * noise) * _crandn(rng, *h.shape)
    return y / gain


def _uplink_noise(model):
    if model.uplink_noise is not None:
        return float(model.uplink_noise)
    if model.uplink_snr_db is not None:
        return model.uplink_power / 10.0 ** (model.uplink_snr_db / 10.0)
    raise ValueError("CsiModel needs uplink_noise or uplink_snr_db")


def aqnm_distortion(bits):
    """AQNM distortion factor for ``bits`` per complex entry."""
    if int(bits) != bits or bits < 1:
        raise ValueError(f"bits must be a positive integer, got {bits!r}")
    if bits in AQNM_TABLE:
        return AQNM_TABLE[int(bits)]
    return np.pi * np.sqrt(3) / 2 * 2.0 ** (-2 * bits)


def aqnm_quantize_csi(H_hat, bits, rng, eta=None):
    """Additive quantization noise model of fronthauled CSI.

    Returns ``(1 - eta) H_hat + N`` where ``N`` has per-entry variance
    ``eta (1 - eta) E|h|^2`` with the second moment taken as each row's mean
    power. ``eta`` overrides the table/closed-form lookup when given.
    """
    H_hat = np.asarray(H_hat, dtype=complex)
    if eta is None:
        eta = aqnm_distortion(bits)
    H2 = np.atleast_2d(H_hat)
    power = np.mean(np.abs(H2) ** 2, axis=-1, keepdims=True)
    noise = np.sqrt(eta * (1 - eta) * power) * _crandn(rng, *H2.shape)
    out = (1 - eta) * H2 + noise
    return out.reshape(H_hat.shape)


def estimate_csi(H, model, rng, snr_db=None):
    """Apply the CSI model to the true channel ``H`` and return the BBU's view."""
    model.validate()
    if model.mode == "perfect":
        return np.array(H, dtype=complex)
    if model.uplink_noise is None and model.uplink_snr_db is None:
        if snr_db is None:
            raise ValueError("pilot SNR is tied to the downlink SNR, which was not given")
        model = CsiModel(**{**model.__dict__, "uplink_snr_db": snr_db})
    H_hat = ls_estimate(H, model, rng)
    if model.mode == "ls_plus_aqnm":
        H_hat = aqnm_quantize_csi(H_hat, model.csi_bits, rng)
    return H_hat
