"""Continuous phase design and 1-bit codewords/codebooks."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import ArrayGeometry, Direction, WaveParams, wave_from_frequency, wrap_degrees

CODEBOOK_FORMAT = "risim-codebook"
CODEBOOK_VERSION = 1


@dataclass(frozen=True)
class ElementStateModel:
    """Complex reflection coefficient of the two switch states."""

    state0: complex = 1.0 + 0.0j
    state1: complex = -1.0 + 0.0j

    def __post_init__(self):
        for name in ("state0", "state1"):
            mag = abs(getattr(self, name))
            if not 0.0 < mag <= 1.0 + 1e-12:
                raise ValueError(f"{name} magnitude must lie in (0, 1], got {mag}")

    @classmethod
    def from_polar(cls, mag0=1.0, phase0=0.0, mag1=1.0, phase1=180.0) -> "ElementStateModel":
        return cls(
            complex(mag0 * np.exp(1j * np.radians(phase0))),
            complex(mag1 * np.exp(1j * np.radians(phase1))),
        )

    def reflection(self, bits) -> np.ndarray:
        bits = np.asarray(bits)
        return np.where(bits == 1, self.state1, self.state0).astype(complex)

    def to_dict(self) -> dict:
        return {
            "state0": [abs(self.state0), float(np.degrees(np.angle(self.state0)))],
            "state1": [abs(self.state1), float(np.degrees(np.angle(self.state1)))],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ElementStateModel":
        m0, p0 = d.get("state0", (1.0, 0.0))
        m1, p1 = d.get("state1", (1.0, 180.0))
        return cls.from_polar(m0, p0, m1, p1)


DEFAULT_STATES = ElementStateModel()


@dataclass(frozen=True, eq=False)
class Codeword:
    bits: np.ndarray
    incident: Direction
    reflect: Direction
    dither: np.ndarray | None = None
    dither_seed: int | None = None

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=np.uint8).ravel()
        if not np.all((bits == 0) | (bits == 1)):
            raise ValueError("codeword bits must be 0 or 1")
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)
        if self.dither is not None:
            dither = np.asarray(self.dither, dtype=float).ravel()
            if dither.shape != bits.shape:
                raise ValueError("dither length must match the number of bits")
            dither.setflags(write=False)
            object.__setattr__(self, "dither", dither)

    def __len__(self):
        return self.bits.size

    def __eq__(self, other):
        if not isinstance(other, Codeword):
            return NotImplemented
        same_dither = (self.dither is None and other.dither is None) or (
            self.dither is not None
            and other.dither is not None
            and np.array_equal(self.dither, other.dither)
        )
        return (
            np.array_equal(self.bits, other.bits)
            and self.incident == other.incident
            and self.reflect == other.reflect
            and same_dither
        )

    @property
    def bitstring(self) -> str:
        return "".join("1" if b else "0" for b in self.bits)

    def complement(self) -> "Codeword":
        return Codeword(1 - self.bits, self.incident, self.reflect, self.dither, self.dither_seed)

    def check_geometry(self, geometry: ArrayGeometry):
        if self.bits.size != geometry.size:
            raise ValueError(
                f"codeword has {self.bits.size} bits but the array has {geometry.size} elements"
            )


@dataclass(frozen=True)
class Codebook:
    incident: tuple[Direction, ...]
    reflect: tuple[Direction, ...]
    codewords: tuple[Codeword, ...]
    geometry: ArrayGeometry = field(default_factory=ArrayGeometry)
    frequency: float = 5.8e9
    dither_seed: int | None = None

    def __post_init__(self):
        if len(self.codewords) != len(self.incident) * len(self.reflect):
            raise ValueError("codebook must hold one codeword per (incident, reflect) pair")

    def __len__(self):
        return len(self.codewords)

    def __getitem__(self, i) -> Codeword:
        return self.codewords[i]

    def __iter__(self):
        return iter(self.codewords)


def ideal_phase(
    geometry: ArrayGeometry, wave: WaveParams, incident: Direction, reflect: Direction
) -> np.ndarray:
    """Continuous per-element phase (degrees) steering ``incident`` into ``reflect``."""
    ui, vi = incident.uv
    ud, vd = reflect.uv
    xf, yf = geometry.coordinates
    phi_i = wave.k0 * (xf * ui + yf * vi)
    phi_d = wave.k0 * (xf * ud + yf * vd)
    return wrap_degrees(np.degrees(phi_i - phi_d))


def quantize_phase(phi):
    """1-bit quantisation: 0 for |wrapped phase| <= 90 degrees, else 1."""
    wrapped = wrap_degrees(phi)
    bits = (np.abs(wrapped) > 90.0).astype(np.uint8)
    return int(bits) if bits.ndim == 0 else bits


def dither_offsets(size: int, seed: int) -> np.ndarray:
    """Static per-element phase offsets in [0, 360) degrees."""
    return np.random.default_rng(seed).uniform(0.0, 360.0, size)


def build_codeword(
    geometry: ArrayGeometry,
    wave: WaveParams,
    incident: Direction,
    reflect: Direction,
    dither: int | None = None,
) -> Codeword:
    """Quantised codeword; ``dither`` is an optional seed for static phase offsets."""
    phi = ideal_phase(geometry, wave, incident, reflect)
    offsets = None
    if dither is not None:
        offsets = dither_offsets(geometry.size, dither)
        phi = phi + offsets
    return Codeword(quantize_phase(phi), incident, reflect, offsets, dither)


def focal_phase(
    geometry: ArrayGeometry, wave: WaveParams, source_position, reflect: Direction
) -> np.ndarray:
    """Continuous phase (degrees) for a point source at ``source_position`` (local frame).

    The incident phase is the exact spherical path ``-k0 (r_mn - r_0)``
    instead of a plane wave, which keeps the quantisation image lobe of a
    near-field feed defocused.
    """
    src = np.asarray(source_position, dtype=float)
    r = np.linalg.norm(geometry.positions() - src, axis=1)
    phi_i = -wave.k0 * (r - np.linalg.norm(src))
    ud, vd = reflect.uv
    xf, yf = geometry.coordinates
    phi_d = wave.k0 * (xf * ud + yf * vd)
    return wrap_degrees(np.degrees(phi_i - phi_d))


def build_feed_codeword(
    geometry: ArrayGeometry,
    wave: WaveParams,
    source_position,
    reflect: Direction,
    dither: int | None = None,
) -> Codeword:
    """Like :func:`build_codeword` but compensating a near-field point feed."""
    src = np.asarray(source_position, dtype=float)
    if src.shape != (3,) or src[2] <= 0:
        raise ValueError("feed must sit in front of the surface (local z > 0)")
    incident = Direction(float(np.degrees(np.arccos(src[2] / np.linalg.norm(src)))),
                         float(np.degrees(np.arctan2(src[1], src[0]))))
    phi = focal_phase(geometry, wave, src, reflect)
    offsets = None
    if dither is not None:
        offsets = dither_offsets(geometry.size, dither)
        phi = phi + offsets
    return Codeword(quantize_phase(phi), incident, reflect, offsets, dither)


def azimuth_sweep(start: float = 0.0, stop: float = 60.0, step: float = 2.5) -> list[Direction]:
    """Signed azimuth-cut directions from ``start`` to ``stop`` inclusive."""
    if step <= 0:
        raise ValueError("step must be positive")
    n = int(np.floor((stop - start) / step + 1e-9)) + 1
    angles = start + step * np.arange(n)
    return [Direction.from_cut_angle(round(float(a), 9)) for a in angles]


DEFAULT_REFLECT_SET = tuple(azimuth_sweep(0.0, 60.0, 2.5))


def build_codebook(
    geometry: ArrayGeometry,
    wave: WaveParams,
    incident: Sequence[Direction],
    reflect: Sequence[Direction] = DEFAULT_REFLECT_SET,
    dither: int | None = None,
) -> Codebook:
    """One codeword per (incident, reflect) pair, reflect index fastest."""
    incident, reflect = tuple(incident), tuple(reflect)
    if not incident or not reflect:
        raise ValueError("incident and reflect direction sets must be non-empty")
    words = tuple(
        build_codeword(geometry, wave, i, d, dither) for i in incident for d in reflect
    )
    return Codebook(incident, reflect, words, geometry, wave.frequency, dither)


# -- file format -------------------------------------------------------------


def codebook_to_dict(book: Codebook) -> dict:
    return {
        "format": CODEBOOK_FORMAT,
        "version": CODEBOOK_VERSION,
        "frequency_hz": book.frequency,
        "geometry": book.geometry.to_dict(),
        "incident": [d.to_list() for d in book.incident],
        "reflect": [d.to_list() for d in book.reflect],
        "dither_seed": book.dither_seed,
        "codewords": [
            {
                "index": i,
                "incident": cw.incident.to_list(),
                "reflect": cw.reflect.to_list(),
                "bits": cw.bitstring,
            }
            for i, cw in enumerate(book.codewords)
        ],
    }


def codebook_from_dict(data: dict) -> Codebook:
    if data.get("format") != CODEBOOK_FORMAT:
        raise ValueError("not a codebook document")
    geometry = ArrayGeometry(**data["geometry"])
    seed = data.get("dither_seed")
    offsets = None if seed is None else dither_offsets(geometry.size, seed)
    words = []
    for rec in data["codewords"]:
        bits = np.frombuffer(rec["bits"].encode("ascii"), dtype=np.uint8) - ord("0")
        words.append(
            Codeword(bits, Direction(*rec["incident"]), Direction(*rec["reflect"]), offsets, seed)
        )
    for w in words:
        w.check_geometry(geometry)
    return Codebook(
        tuple(Direction(*d) for d in data["incident"]),
        tuple(Direction(*d) for d in data["reflect"]),
        tuple(words),
        geometry,
        float(data["frequency_hz"]),
        seed,
    )


def save_codebook(book: Codebook, path) -> None:
    Path(path).write_text(json.dumps(codebook_to_dict(book), indent=1) + "\n")


def load_codebook(path) -> Codebook:
    return codebook_from_dict(json.loads(Path(path).read_text()))


def wave_for(book: Codebook) -> WaveParams:
    return wave_from_frequency(book.frequency)
