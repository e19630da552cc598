"""Geometry, wave and direction primitives.

Conventions used throughout the package:

* angles are degrees at every public boundary and radians internally;
* the RIS lies in its local x-y plane with the surface normal along +z;
  x runs along the 16-element (azimuth) dimension, y along the 10-element
  (elevation) dimension;
* per-element vectors are flattened with the x index ``m`` running fastest,
  i.e. ``flat = n * M + m``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0

DEFAULT_ROWS = 16
DEFAULT_COLS = 10
DEFAULT_PITCH = 25.85e-3


class GeometryError(ValueError):
    """Raised for invalid or infeasible geometric configurations."""


@dataclass(frozen=True)
class WaveParams:
    frequency: float

    def __post_init__(self):
        if not self.frequency > 0:
            raise ValueError(f"frequency must be positive, got {self.frequency!r}")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.frequency

    @property
    def k0(self) -> float:
        return 2.0 * np.pi / self.wavelength


def wave_from_frequency(frequency: float) -> WaveParams:
    """Return the free-space wave parameters at ``frequency`` (Hz)."""
    return WaveParams(float(frequency))


@dataclass(frozen=True)
class Direction:
    """Direction in the RIS frame.

    ``theta`` is measured from the surface normal, ``phi`` is the azimuth in
    the surface plane counted from the local x axis. Both are degrees.
    """

    theta: float
    phi: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.theta <= 90.0:
            raise ValueError(f"theta must lie in [0, 90] degrees, got {self.theta!r}")
        phi = float(self.phi) % 360.0
        # -0.0 % 360 and 359.9999999... both map to values that must stay < 360
        if phi >= 360.0:
            phi = 0.0
        object.__setattr__(self, "phi", phi)

    @classmethod
    def from_cut_angle(cls, angle: float, plane: str = "azimuth") -> "Direction":
        """Map a signed 1-D cut angle onto (theta, phi).

        The azimuth cut is the local x-z plane (phi 0/180), the elevation cut
        is the y-z plane (phi 90/270).
        """
        base = {"azimuth": 0.0, "elevation": 90.0}[plane]
        return cls(abs(float(angle)), base if angle >= 0 else base + 180.0)

    @property
    def uv(self) -> tuple[float, float]:
        t, p = np.radians(self.theta), np.radians(self.phi)
        return float(np.sin(t) * np.cos(p)), float(np.sin(t) * np.sin(p))

    def unit_vector(self) -> np.ndarray:
        u, v = self.uv
        return np.array([u, v, np.cos(np.radians(self.theta))])

    def mirrored(self) -> "Direction":
        """The direction with the in-plane component reversed."""
        return Direction(self.theta, self.phi + 180.0)

    def to_list(self) -> list[float]:
        return [float(self.theta), float(self.phi)]


BROADSIDE = Direction(0.0, 0.0)


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform planar grid of ``rows`` x ``cols`` elements centred on the origin.

    ``rows`` (M) counts elements along x and ``cols`` (N) along y.
    """

    rows: int = DEFAULT_ROWS
    cols: int = DEFAULT_COLS
    spacing_x: float = DEFAULT_PITCH
    spacing_y: float = DEFAULT_PITCH

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("array must have at least one element per axis")
        if not (self.spacing_x > 0 and self.spacing_y > 0):
            raise ValueError("element spacing must be positive")

    @property
    def size(self) -> int:
        return self.rows * self.cols

    @property
    def area(self) -> float:
        """Physical aperture area (m^2), one pitch per element."""
        return self.rows * self.spacing_x * self.cols * self.spacing_y

    @property
    def x(self) -> np.ndarray:
        return (np.arange(self.rows) - (self.rows - 1) / 2.0) * self.spacing_x

    @property
    def y(self) -> np.ndarray:
        return (np.arange(self.cols) - (self.cols - 1) / 2.0) * self.spacing_y

    @cached_property
    def coordinates(self) -> tuple[np.ndarray, np.ndarray]:
        """Flattened element coordinates ``(x_flat, y_flat)``, m fastest."""
        xx, yy = np.meshgrid(self.x, self.y, indexing="xy")
        return xx.ravel(), yy.ravel()

    def positions(self) -> np.ndarray:
        """Element positions in the local frame, shape ``(M*N, 3)``."""
        xf, yf = self.coordinates
        return np.column_stack([xf, yf, np.zeros_like(xf)])

    def to_dict(self) -> dict:
        return {
            "rows": self.rows,
            "cols": self.cols,
            "spacing_x": self.spacing_x,
            "spacing_y": self.spacing_y,
        }


def _unit(vec) -> np.ndarray:
    v = np.asarray(vec, dtype=float)
    norm = np.linalg.norm(v)
    if norm == 0:
        raise GeometryError("zero-length vector has no direction")
    return v / norm


@dataclass(frozen=True)
class Pose3D:
    """Position plus unit orientation (surface normal or antenna boresight)."""

    position: tuple[float, float, float]
    orientation: tuple[float, float, float] = (0.0, 0.0, 1.0)

    def __post_init__(self):
        pos = tuple(float(c) for c in self.position)
        if len(pos) != 3:
            raise ValueError("position must have three coordinates")
        object.__setattr__(self, "position", pos)
        object.__setattr__(self, "orientation", tuple(float(c) for c in _unit(self.orientation)))

    @property
    def origin(self) -> np.ndarray:
        return np.array(self.position)

    def frame(self) -> np.ndarray:
        """Rows are the local x, y, z axes expressed in world coordinates.

        Local x is horizontal (perpendicular to world z and the normal), local
        y completes the right-handed frame. For a horizontal surface local x
        falls back to world x.
        """
        n = np.array(self.orientation)
        x = np.cross([0.0, 0.0, 1.0], n)
        if np.linalg.norm(x) < 1e-12:
            x = np.array([1.0, 0.0, 0.0]) - n[0] * n
        x = _unit(x)
        y = np.cross(n, x)
        return np.vstack([x, y, n])

    def to_local(self, point) -> np.ndarray:
        return self.frame() @ (np.asarray(point, dtype=float) - self.origin)


def array_response(geometry: ArrayGeometry, wave: WaveParams, direction: Direction) -> np.ndarray:
    """Far-field array response ``exp(-j k0 (x u + y v))`` per element."""
    u, v = direction.uv
    xf, yf = geometry.coordinates
    return np.exp(-1j * wave.k0 * (xf * u + yf * v))


def local_direction(ris: Pose3D, point) -> tuple[Direction, float]:
    """Direction and range of a world ``point`` as seen from the RIS.

    Raises :class:`GeometryError` when the point coincides with the RIS or
    lies in or behind the surface plane.
    """
    local = ris.to_local(point)
    rng = float(np.linalg.norm(local))
    if rng == 0.0:
        raise GeometryError("point coincides with the RIS position")
    if local[2] <= 1e-12 * rng:
        raise GeometryError("point lies in or behind the RIS surface plane")
    theta = float(np.degrees(np.arctan2(np.hypot(local[0], local[1]), local[2])))
    if np.hypot(local[0], local[1]) <= 1e-12 * rng:
        phi = 0.0
    else:
        phi = float(np.degrees(np.arctan2(local[1], local[0])))
    return Direction(theta, phi), rng


@dataclass(frozen=True)
class Antenna:
    """Transceiver antenna with a cos^q field pattern about its boresight.

    ``boresight=None`` makes the antenna isotropic with gain ``gain_dbi``.
    The exponent is fixed by the peak gain through ``G = 2 (2q + 1)``.
    """

    gain_dbi: float = 0.0
    boresight: tuple[float, float, float] | None = None
    exponent: float = field(init=False)

    def __post_init__(self):
        if self.boresight is not None:
            object.__setattr__(self, "boresight", tuple(float(c) for c in _unit(self.boresight)))
        object.__setattr__(self, "exponent", taper_exponent(self.gain_dbi))

    @property
    def peak_gain(self) -> float:
        return float(10.0 ** (self.gain_dbi / 10.0))

    def gain_toward(self, vector) -> float:
        """Linear power gain in the direction of ``vector`` (world frame)."""
        if self.boresight is None:
            return self.peak_gain
        c = float(np.dot(_unit(vector), self.boresight))
        if c <= 0.0:
            return 0.0
        return self.peak_gain * c ** (2.0 * self.exponent)


def taper_exponent(gain_dbi: float) -> float:
    """Field-pattern exponent q of a cos^q antenna with peak gain ``gain_dbi``."""
    g = 10.0 ** (gain_dbi / 10.0)
    return max((g / 2.0 - 1.0) / 2.0, 0.0)


def db(x):
    return 10.0 * np.log10(x)


def from_db(x):
    return 10.0 ** (np.asarray(x, dtype=float) / 10.0)


def wrap_degrees(phase):
    """Wrap degrees into (-180, 180]."""
    wrapped = np.mod(np.asarray(phase, dtype=float) + 180.0, 360.0) - 180.0
    return np.where(wrapped == -180.0, 180.0, wrapped)
