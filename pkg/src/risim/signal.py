"""OFDM line-of-sight channels through the RIS, reception and beam training.

Channel conventions: ``h_tx`` is the incident wave at the elements (the
plane-wave illumination from the BS) and ``h_rx`` is the array response
toward the UE, so that ``h_rx^T diag(psi) h_tx`` is the array factor of the
configured surface evaluated at the UE. A UE physically at local direction
``(theta, phi)`` is served by a codeword whose design reflect direction is
``(theta, phi + 180)``; see :func:`steering_direction`.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .codebook import DEFAULT_STATES, Codebook, Codeword, ElementStateModel
from .core import (
    Antenna,
    ArrayGeometry,
    Direction,
    GeometryError,
    Pose3D,
    SPEED_OF_LIGHT,
    local_direction,
)
from .link import thermal_noise, watts_to_dbm

DEFAULT_SEED = 5800


@dataclass(frozen=True)
class OfdmConfig:
    subcarriers: int = 64
    bandwidth: float = 20e6
    center_frequency: float = 5.8e9
    total_power: float = 0.01
    noise_variance: float = thermal_noise(20e6 / 64, 10.0)

    def __post_init__(self):
        if self.subcarriers < 1:
            raise ValueError("need at least one subcarrier")
        if not (self.bandwidth > 0 and self.center_frequency > 0 and self.total_power > 0):
            raise ValueError("bandwidth, centre frequency and power must be positive")
        if self.noise_variance < 0:
            raise ValueError("noise variance must be non-negative")

    @property
    def frequencies(self) -> np.ndarray:
        k = np.arange(self.subcarriers) - self.subcarriers // 2
        return self.center_frequency + k * self.bandwidth / self.subcarriers

    @property
    def symbol_power(self) -> float:
        return self.total_power / self.subcarriers

    @property
    def rho(self) -> float:
        return self.total_power / (self.subcarriers * self.noise_variance)

    def pilots(self) -> np.ndarray:
        """Constant-modulus pilots with E|s_k|^2 = P/K."""
        return np.full(self.subcarriers, np.sqrt(self.symbol_power), dtype=complex)


@dataclass(frozen=True, eq=False)
class ChannelSet:
    h_tx: np.ndarray  # (K, M*N)
    h_rx: np.ndarray  # (K, M*N)
    h_tr: np.ndarray  # (K,)
    ris_blocked: bool = False
    direct_blocked: bool = False

    def __post_init__(self):
        h_tx = np.atleast_2d(np.asarray(self.h_tx, dtype=complex))
        h_rx = np.atleast_2d(np.asarray(self.h_rx, dtype=complex))
        h_tr = np.atleast_1d(np.asarray(self.h_tr, dtype=complex))
        if h_tx.shape != h_rx.shape or h_tr.shape != (h_tx.shape[0],):
            raise ValueError("inconsistent channel dimensions")
        object.__setattr__(self, "h_tx", h_tx)
        object.__setattr__(self, "h_rx", h_rx)
        object.__setattr__(self, "h_tr", h_tr)

    @property
    def subcarriers(self) -> int:
        return self.h_tx.shape[0]

    def ris_gain(self, psi: np.ndarray) -> np.ndarray:
        """Per-subcarrier cascaded gain ``h_rx^T diag(psi) h_tx``."""
        psi = np.asarray(psi)
        if psi.shape != (self.h_tx.shape[1],):
            raise ValueError(
                f"interaction vector has length {psi.size}, channels expect {self.h_tx.shape[1]}"
            )
        return (self.h_rx * self.h_tx) @ psi

    def scaled(self, factor: float) -> "ChannelSet":
        return ChannelSet(
            self.h_tx * factor, self.h_rx, self.h_tr * factor, self.ris_blocked, self.direct_blocked
        )


def interaction_from_codeword(
    codeword: Codeword, states: ElementStateModel = DEFAULT_STATES
) -> np.ndarray:
    """RIS reflection vector ``psi`` realised by a codeword."""
    psi = states.reflection(codeword.bits)
    if codeword.dither is not None:
        psi = psi * np.exp(1j * np.radians(codeword.dither))
    return psi


def steering_direction(ris: Pose3D, point) -> Direction:
    """Design reflect direction that steers the RIS beam onto ``point``."""
    direction, _ = local_direction(ris, point)
    return direction.mirrored()


def _leg_amplitude(gain: float, cos_theta: float, area: float, eta: float, rng: float, size: int):
    # product of the two legs reproduces the bistatic radar equation for a
    # perfectly phased aperture (coherent sum of ``size`` elements)
    return np.sqrt(gain * cos_theta * area / size) * eta**0.25 / (np.sqrt(4.0 * np.pi) * rng)


def synthesize_channels(
    bs: Pose3D,
    ris: Pose3D,
    ue,
    geometry: ArrayGeometry,
    ofdm: OfdmConfig,
    *,
    bs_antenna: Antenna = Antenna(),
    ue_antenna: Antenna = Antenna(),
    eta: float = 1.0,
    direct_blocked: bool = False,
    ris_blocked: bool = False,
    narrowband: bool = False,
) -> ChannelSet:
    """Line-of-sight BS->RIS, RIS->UE and BS->UE channels on every subcarrier.

    ``bs`` and ``ris`` are world poses, ``ue`` a world point. The antennas'
    boresights are world vectors. Raises :class:`GeometryError` when the BS
    is not in front of the surface; a UE behind the surface zeroes the RIS
    path and sets ``ris_blocked``.
    """
    freqs = (
        np.full(ofdm.subcarriers, ofdm.center_frequency) if narrowband else ofdm.frequencies
    )
    k = 2.0 * np.pi * freqs / SPEED_OF_LIGHT
    bs_pos, ris_pos, ue_pos = bs.origin, ris.origin, np.asarray(ue, dtype=float)
    dir_bs, r_i = local_direction(ris, bs_pos)
    xf, yf = geometry.coordinates
    n_el = geometry.size

    try:
        dir_ue, r_d = local_direction(ris, ue_pos)
    except GeometryError:
        ris_blocked = True
        dir_ue, r_d = None, None

    if ris_blocked:
        h_tx = np.zeros((ofdm.subcarriers, n_el), complex)
        h_rx = np.zeros((ofdm.subcarriers, n_el), complex)
    else:
        g_bs = bs_antenna.gain_toward(ris_pos - bs_pos)
        g_ue = ue_antenna.gain_toward(ris_pos - ue_pos)
        a_tx = _leg_amplitude(g_bs, np.cos(np.radians(dir_bs.theta)), geometry.area, eta, r_i, n_el)
        a_rx = _leg_amplitude(g_ue, np.cos(np.radians(dir_ue.theta)), geometry.area, eta, r_d, n_el)
        ui, vi = dir_bs.uv
        ud, vd = dir_ue.mirrored().uv
        # incident wave at the elements and the response toward the UE
        h_tx = a_tx * np.exp(1j * np.outer(k, xf * ui + yf * vi - r_i))
        h_rx = a_rx * np.exp(-1j * np.outer(k, xf * ud + yf * vd + r_d))

    if direct_blocked:
        h_tr = np.zeros(ofdm.subcarriers, complex)
    else:
        d = float(np.linalg.norm(ue_pos - bs_pos))
        if d == 0:
            raise GeometryError("BS and UE coincide")
        g = bs_antenna.gain_toward(ue_pos - bs_pos) * ue_antenna.gain_toward(bs_pos - ue_pos)
        lam = SPEED_OF_LIGHT / freqs
        h_tr = np.sqrt(g) * lam / (4.0 * np.pi * d) * np.exp(-1j * k * d)
    return ChannelSet(h_tx, h_rx, h_tr, ris_blocked, direct_blocked)


def noise_generator(seed: int, *key: int) -> np.random.Generator:
    """Counter-based (Philox) stream for ``(seed, *key)``; independent per key."""
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def complex_noise(rng: np.random.Generator, n: int, variance: float) -> np.ndarray:
    z = rng.standard_normal((n, 2))
    return np.sqrt(variance / 2.0) * (z[:, 0] + 1j * z[:, 1])


def receive(
    channels: ChannelSet,
    psi: np.ndarray,
    ofdm: OfdmConfig,
    symbols: np.ndarray | None = None,
    noise_seed: int | Sequence[int] | None = None,
) -> np.ndarray:
    """Received sample on every subcarrier.

    Noise of variance ``ofdm.noise_variance`` is added when ``noise_seed``
    is given; a sequence seed is read as ``(seed, *stream_key)``.
    """
    s = ofdm.pilots() if symbols is None else np.asarray(symbols, dtype=complex)
    if s.shape != (channels.subcarriers,):
        raise ValueError("one symbol per subcarrier is required")
    r = channels.ris_gain(psi) * s + channels.h_tr * s
    if noise_seed is not None and ofdm.noise_variance > 0:
        seed, *key = np.atleast_1d(noise_seed).tolist()
        r = r + complex_noise(noise_generator(seed, *key), r.size, ofdm.noise_variance)
    return r


def achievable_rate(channels: ChannelSet, psi: np.ndarray, rho: float) -> float:
    """Spectral efficiency (bit/s/Hz) averaged over subcarriers."""
    if not rho > 0:
        raise ValueError("rho must be positive")
    g = channels.ris_gain(psi)
    return float(np.mean(np.log2(1.0 + rho * np.abs(g) ** 2)))


@dataclass(frozen=True, eq=False)
class SweepResult:
    powers: np.ndarray  # W, sum over subcarriers of |r_k|^2
    selected: int

    def to_csv(self, codebook: Codebook) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["codeword_index", "design_theta_deg", "design_phi_deg", "rx_power_dbm", "selected_flag"])
        for i, (cw, p) in enumerate(zip(codebook, self.powers)):
            dbm = float(watts_to_dbm(p)) if p > 0 else float("-inf")
            w.writerow([i, f"{cw.reflect.theta:.6g}", f"{cw.reflect.phi:.6g}", f"{dbm:.6g}", int(i == self.selected)])
        return buf.getvalue()


def select_max(powers, rtol: float = 1e-12) -> int:
    """Index of the largest value; near-ties go to the lowest index."""
    powers = np.asarray(powers, dtype=float)
    best = powers.max()
    return int(np.flatnonzero(powers >= best - rtol * abs(best))[0])


def beam_sweep(
    codebook: Codebook | Sequence[Codeword],
    channels: ChannelSet | Callable[[Codeword], ChannelSet],
    ofdm: OfdmConfig,
    seed: int | None = None,
    states: ElementStateModel = DEFAULT_STATES,
    stream: Sequence[int] = (),
) -> SweepResult:
    """Try every codeword and select the one maximising received power.

    ``seed=None`` gives noiseless measurements. Noise for codeword ``i`` is
    drawn from the stream ``(seed, *stream, i)``, so the result does not
    depend on evaluation order.
    """
    words = list(codebook)
    if not words:
        raise ValueError("codebook is empty")
    s = ofdm.pilots()
    powers = np.empty(len(words))
    for i, cw in enumerate(words):
        ch = channels(cw) if callable(channels) else channels
        key = None if seed is None else (seed, *stream, i)
        r = receive(ch, interaction_from_codeword(cw, states), ofdm, s, key)
        powers[i] = float(np.sum(np.abs(r) ** 2))
    return SweepResult(powers, select_max(powers))
