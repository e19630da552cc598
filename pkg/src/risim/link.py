"""Bistatic radar-equation link budget."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .core import WaveParams, from_db


def monostatic_rcs(area: float, eta: float, wave: WaveParams) -> float:
    """Monostatic RCS (m^2) of a flat, electrically large plate."""
    if not area > 0:
        raise ValueError("area must be positive")
    if not 0 < eta <= 1:
        raise ValueError("efficiency must lie in (0, 1]")
    return 4.0 * np.pi * eta * area**2 / wave.wavelength**2


def _check_angle(name: str, angle: float):
    if not 0.0 <= angle < 90.0:
        raise ValueError(f"{name} must lie in [0, 90) degrees, got {angle!r}")


def bistatic_rcs(
    area: float, eta: float, wave: WaveParams, theta_i: float, theta_d: float
) -> float:
    """Bistatic RCS (m^2) with the projected-aperture cosine factors."""
    _check_angle("theta_i", theta_i)
    _check_angle("theta_d", theta_d)
    c = np.cos(np.radians(theta_i)) * np.cos(np.radians(theta_d))
    return monostatic_rcs(area, eta, wave) * float(c)


@dataclass(frozen=True)
class LinkParams:
    """Parameters of the BS -> RIS -> UE link.

    Gains are linear; use :meth:`from_dbi` to build from dBi values.
    """

    p_t: float
    g_bs: float
    g_ue: float
    r_i: float
    r_d: float
    area: float
    eta: float = 1.0
    theta_i: float = 0.0
    theta_d: float = 0.0
    noise_power: float = 1e-12

    def __post_init__(self):
        for name in ("p_t", "g_bs", "g_ue", "area", "noise_power"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        for name in ("r_i", "r_d"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be a positive distance")
        if not 0 < self.eta <= 1:
            raise ValueError("eta must lie in (0, 1]")
        _check_angle("theta_i", self.theta_i)
        _check_angle("theta_d", self.theta_d)

    @classmethod
    def from_dbi(cls, p_t, g_bs_dbi, g_ue_dbi, r_i, r_d, area, **kw) -> "LinkParams":
        return cls(p_t, float(from_db(g_bs_dbi)), float(from_db(g_ue_dbi)), r_i, r_d, area, **kw)

    def with_(self, **changes) -> "LinkParams":
        return replace(self, **changes)


def received_power_from_rcs(params: LinkParams, wave: WaveParams, sigma: float) -> float:
    """Bistatic radar equation for a given scattering cross section."""
    lam = wave.wavelength
    return (
        params.p_t * params.g_bs * params.g_ue * lam**2 * sigma
        / ((4.0 * np.pi) ** 3 * params.r_i**2 * params.r_d**2)
    )


def received_power(params: LinkParams, wave: WaveParams) -> float:
    """Received power (W) through the RIS, using the bistatic RCS."""
    sigma = bistatic_rcs(params.area, params.eta, wave, params.theta_i, params.theta_d)
    return received_power_from_rcs(params, wave, sigma)


def snr(p_r: float, noise_power: float) -> float:
    """SNR in dB."""
    if not noise_power > 0:
        raise ValueError("noise power must be positive")
    return float(10.0 * np.log10(p_r / noise_power))


def watts_to_dbm(p):
    return 10.0 * np.log10(np.asarray(p, dtype=float)) + 30.0


def thermal_noise(bandwidth: float, noise_figure_db: float = 0.0, temperature: float = 290.0) -> float:
    """kTB noise power (W) at the receiver input plus noise figure."""
    return 1.380649e-23 * temperature * bandwidth * float(from_db(noise_figure_db))


@dataclass(frozen=True)
class PathlossTable:
    angles: tuple[float, ...]
    distances: tuple[float, ...]
    power: np.ndarray  # W, shape (len(angles), len(distances))
    noise_power: float

    def rows(self):
        for i, a in enumerate(self.angles):
            for j, d in enumerate(self.distances):
                p = float(self.power[i, j])
                yield a, d, p, snr(p, self.noise_power)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["angle_deg", "distance_m", "received_power_dbm", "snr_db"])
        for a, d, p, s in self.rows():
            w.writerow([f"{a:.6g}", f"{d:.6g}", f"{float(watts_to_dbm(p)):.6g}", f"{s:.6g}"])
        return buf.getvalue()


def pathloss_curve(
    template: LinkParams,
    wave: WaveParams,
    distances: Sequence[float],
    reflect_angles: Sequence[float],
) -> PathlossTable:
    """Received power for every (reflect angle, RIS-UE distance) pair."""
    distances, reflect_angles = tuple(distances), tuple(reflect_angles)
    if not distances or not reflect_angles:
        raise ValueError("distances and angles must be non-empty")
    power = np.array(
        [
            [received_power(template.with_(r_d=d, theta_d=a), wave) for d in distances]
            for a in reflect_angles
        ]
    )
    return PathlossTable(reflect_angles, distances, power, template.noise_power)


def distance_exponent(distances, powers) -> float:
    """Least-squares slope of log10(P) against log10(d)."""
    slope, _ = np.polyfit(np.log10(distances), np.log10(powers), 1)
    return float(slope)
