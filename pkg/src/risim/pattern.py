"""Array-factor synthesis, feed illumination and pattern metrics."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .codebook import DEFAULT_STATES, Codeword, ElementStateModel
from .core import (
    ArrayGeometry,
    Direction,
    GeometryError,
    WaveParams,
    taper_exponent,
)

PLANES = ("azimuth", "elevation")
DEFAULT_STEP = 0.25


@dataclass(frozen=True, eq=False)
class Illumination:
    """Complex per-element excitation of the incident field."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=complex).ravel()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return self.weights.size

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.weights)

    @property
    def phase_deg(self) -> np.ndarray:
        return np.degrees(np.angle(self.weights))

    def scaled(self, factor: float) -> "Illumination":
        return Illumination(self.weights * factor)


@dataclass(frozen=True, eq=False)
class PatternCut:
    plane: str
    angles: np.ndarray
    af: np.ndarray

    def __post_init__(self):
        angles = np.asarray(self.angles, dtype=float)
        if angles.size > 1 and np.any(np.diff(angles) <= 0):
            raise ValueError("angle grid must be strictly increasing")
        object.__setattr__(self, "angles", angles)
        object.__setattr__(self, "af", np.asarray(self.af, dtype=complex))

    @property
    def power(self) -> np.ndarray:
        return np.abs(self.af) ** 2

    @property
    def gain_db(self) -> np.ndarray:
        """Gain normalised to the cut maximum (dB)."""
        p = self.power
        peak = p.max()
        if peak == 0:
            return np.zeros_like(p)
        with np.errstate(divide="ignore"):
            return 10.0 * np.log10(p / peak)

    def level_at(self, angle: float) -> float:
        """Normalised gain (dB) interpolated at ``angle``."""
        return float(np.interp(angle, self.angles, self.gain_db))


@dataclass
class PatternMetrics:
    main_lobe_angle: float
    peak_gain: float
    hpbw: float
    sll: float
    grating_lobes: list[tuple[float, float]] = field(default_factory=list)
    hpbw_lower_bound: bool = False

    def to_dict(self) -> dict:
        return {
            "main_lobe_angle_deg": self.main_lobe_angle,
            "peak_gain_db": self.peak_gain,
            "hpbw_deg": self.hpbw,
            "hpbw_lower_bound": self.hpbw_lower_bound,
            "sll_db": self.sll,
            "grating_lobes": [{"angle_deg": a, "level_db": lv} for a, lv in self.grating_lobes],
        }


def plane_wave_illumination(
    geometry: ArrayGeometry, wave: WaveParams, incident: Direction
) -> Illumination:
    """Unit-magnitude plane wave arriving from ``incident``."""
    u, v = incident.uv
    xf, yf = geometry.coordinates
    return Illumination(np.exp(1j * wave.k0 * (xf * u + yf * v)))


def feed_position(distance: float, angle: float, plane: str = "azimuth") -> np.ndarray:
    """Local-frame position of a feed ``distance`` away at a signed cut ``angle``."""
    return distance * Direction.from_cut_angle(angle, plane).unit_vector()


def feed_illumination(
    geometry: ArrayGeometry,
    wave: WaveParams,
    feed_position,
    feed_gain_dbi: float = 12.5,
    q: float | None = None,
) -> Illumination:
    """Spherical-wave illumination from a cos^q feed aimed at the array centre.

    Magnitudes follow ``cos^q(off-boresight) / r`` normalised to peak 1, the
    phase is ``-k0 r`` with ``r`` the exact element-feed distance. ``q``
    defaults to the value implied by ``feed_gain_dbi``.
    """
    feed = np.asarray(feed_position, dtype=float)
    if feed.shape != (3,) or feed[2] <= 0:
        raise GeometryError("feed must sit in front of the surface (local z > 0)")
    if q is None:
        q = taper_exponent(feed_gain_dbi)
    elements = geometry.positions()
    delta = elements - feed
    r = np.linalg.norm(delta, axis=1)
    boresight = -feed / np.linalg.norm(feed)
    cos_off = np.clip(delta @ boresight / r, 0.0, 1.0)
    mag = cos_off**q / r
    mag = mag / mag.max()
    # reference the phase to the feed-centre distance so weights stay O(1)
    phase = -wave.k0 * (r - np.linalg.norm(feed))
    return Illumination(mag * np.exp(1j * phase))


def _element_weights(
    codeword: Codeword, illumination: Illumination, states: ElementStateModel
) -> np.ndarray:
    if len(illumination) != len(codeword):
        raise ValueError(
            f"illumination has {len(illumination)} weights, codeword has {len(codeword)} bits"
        )
    w = illumination.weights * states.reflection(codeword.bits)
    if codeword.dither is not None:
        w = w * np.exp(1j * np.radians(codeword.dither))
    return w


def _uv_grid(directions) -> tuple[np.ndarray, np.ndarray]:
    uv = np.array([d.uv for d in directions], dtype=float).reshape(-1, 2)
    return uv[:, 0], uv[:, 1]


def array_factor_many(
    geometry: ArrayGeometry,
    wave: WaveParams,
    codeword: Codeword,
    illumination: Illumination,
    directions,
    states: ElementStateModel = DEFAULT_STATES,
    element_cos: bool = False,
) -> np.ndarray:
    """Vectorised :func:`array_factor` over a sequence of directions."""
    codeword.check_geometry(geometry)
    w = _element_weights(codeword, illumination, states)
    u, v = _uv_grid(directions)
    xf, yf = geometry.coordinates
    steering = np.exp(-1j * wave.k0 * (np.outer(u, xf) + np.outer(v, yf)))
    af = steering @ w
    if element_cos:
        af = af * np.sqrt(np.clip(1.0 - u**2 - v**2, 0.0, None))
    return af


def array_factor(
    geometry: ArrayGeometry,
    wave: WaveParams,
    codeword: Codeword,
    illumination: Illumination,
    direction: Direction,
    states: ElementStateModel = DEFAULT_STATES,
    element_cos: bool = False,
) -> complex:
    """Complex array factor of the configured surface toward ``direction``."""
    return complex(
        array_factor_many(
            geometry, wave, codeword, illumination, [direction], states, element_cos
        )[0]
    )


def angle_grid(start: float = -90.0, stop: float = 90.0, step: float = DEFAULT_STEP) -> np.ndarray:
    n = int(round((stop - start) / step)) + 1
    return np.round(start + step * np.arange(n), 9)


def pattern_cut(
    geometry: ArrayGeometry,
    wave: WaveParams,
    codeword: Codeword,
    illumination: Illumination,
    plane: str = "azimuth",
    angles=None,
    states: ElementStateModel = DEFAULT_STATES,
    element_cos: bool = False,
) -> PatternCut:
    """Sample the array factor along a principal-plane cut."""
    if plane not in PLANES:
        raise ValueError(f"plane must be one of {PLANES}, got {plane!r}")
    angles = angle_grid() if angles is None else np.atleast_1d(np.asarray(angles, dtype=float))
    if angles.size == 0:
        raise ValueError("angle grid is empty")
    if np.any(np.abs(angles) > 90.0):
        raise ValueError("cut angles must lie within [-90, 90] degrees")
    dirs = [Direction.from_cut_angle(a, plane) for a in angles]
    af = array_factor_many(geometry, wave, codeword, illumination, dirs, states, element_cos)
    return PatternCut(plane, angles, af)


def rcs_pattern(
    geometry: ArrayGeometry,
    wave: WaveParams,
    codeword: Codeword,
    incident: Direction,
    angles=None,
    plane: str = "azimuth",
    states: ElementStateModel = DEFAULT_STATES,
) -> PatternCut:
    """Normalised bistatic scattering cut under plane-wave illumination."""
    illum = plane_wave_illumination(geometry, wave, incident)
    return pattern_cut(geometry, wave, codeword, illum, plane, angles, states)


def _crossing(angles, gain, i0, i1, level):
    """Linear interpolation of the angle where gain crosses ``level`` between samples."""
    g0, g1 = gain[i0], gain[i1]
    if g1 == g0:
        return angles[i0]
    t = (level - g0) / (g1 - g0)
    return angles[i0] + t * (angles[i1] - angles[i0])


def analyze_pattern(cut: PatternCut, hint: float | None = None) -> PatternMetrics:
    """Main lobe, half-power beamwidth, side-lobe level and grating lobes.

    When several separate lobes share the global maximum (a 1-bit surface
    lit from broadside has mirror-image twin beams), ``hint`` picks the one
    nearest to that angle; without a hint such a pattern is rejected.
    """
    angles = cut.angles
    if angles.size < 3:
        raise ValueError("pattern metrics need at least three samples")
    gain = cut.gain_db
    p = cut.power
    if p.max() == 0:
        raise ValueError("pattern is identically zero")
    ipk = int(np.argmax(p))
    peaks = np.flatnonzero(np.isclose(p, p[ipk], rtol=1e-12, atol=0))
    if peaks.size > 1 and np.any(np.diff(peaks) > 1):
        if hint is None:
            raise ValueError("pattern has no unique global peak")
        ipk = int(peaks[np.argmin(np.abs(angles[peaks] - hint))])
    n = angles.size

    lower_bound = ipk in (0, n - 1)
    # -3 dB crossings, walking outward from the peak
    left = ipk
    while left > 0 and gain[left] > -3.0:
        left -= 1
    right = ipk
    while right < n - 1 and gain[right] > -3.0:
        right += 1
    if gain[left] > -3.0:
        a_left, lower_bound = angles[0], True
    else:
        a_left = _crossing(angles, gain, left, left + 1, -3.0)
    if gain[right] > -3.0:
        a_right, lower_bound = angles[-1], True
    else:
        a_right = _crossing(angles, gain, right - 1, right, -3.0)
    hpbw = float(a_right - a_left)
    if hpbw <= 0:
        # single-sample lobe narrower than the grid
        hpbw, lower_bound = float(np.min(np.diff(angles))), True

    # main-lobe region: first local minimum on each side of the peak
    lo = ipk
    while lo > 0 and p[lo - 1] <= p[lo]:
        lo -= 1
    hi = ipk
    while hi < n - 1 and p[hi + 1] <= p[hi]:
        hi += 1

    interior = np.arange(1, n - 1)
    is_max = (p[interior] >= p[interior - 1]) & (p[interior] > p[interior + 1])
    is_max |= (p[interior] > p[interior - 1]) & (p[interior] >= p[interior + 1])
    maxima = list(interior[is_max])
    # edge samples count as lobes when the pattern still rises toward them
    if n > 1 and p[0] > p[1]:
        maxima.insert(0, 0)
    if n > 1 and p[-1] > p[-2]:
        maxima.append(n - 1)
    side = [i for i in maxima if i < lo or i > hi]
    sll = float(max(gain[i] for i in side)) if side else float("-inf")
    grating = [(float(angles[i]), float(gain[i])) for i in side if gain[i] >= -3.0]
    peak_gain = float(20.0 * np.log10(np.abs(cut.af[ipk])))
    return PatternMetrics(float(angles[ipk]), peak_gain, hpbw, sll, grating, lower_bound)


# -- export -------------------------------------------------------------------


def _g6(x: float) -> str:
    return f"{x:.6g}"


def cut_to_csv(cut: PatternCut) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["angle_deg", "af_real", "af_imag", "gain_db_normalized"])
    for a, af, g in zip(cut.angles, cut.af, cut.gain_db):
        w.writerow([_g6(a), _g6(af.real), _g6(af.imag), _g6(g)])
    return buf.getvalue()


def cut_from_csv(text: str, plane: str = "azimuth") -> PatternCut:
    rows = list(csv.DictReader(io.StringIO(text)))
    angles = [float(r["angle_deg"]) for r in rows]
    af = [complex(float(r["af_real"]), float(r["af_imag"])) for r in rows]
    return PatternCut(plane, angles, af)
