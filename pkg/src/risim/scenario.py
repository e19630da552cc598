"""World scenarios, line-of-sight blockage and coverage maps."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
import yaml

from .codebook import (
    DEFAULT_STATES,
    Codebook,
    ElementStateModel,
    build_codebook,
)
from .core import (
    Antenna,
    ArrayGeometry,
    Direction,
    GeometryError,
    Pose3D,
    WaveParams,
    local_direction,
    wave_from_frequency,
)
from .link import thermal_noise
from .signal import (
    OfdmConfig,
    beam_sweep,
    interaction_from_codeword,
    synthesize_channels,
)


class InfeasibleScenario(RuntimeError):
    """The scenario violates a physical precondition (e.g. RIS cannot see the BS)."""


@dataclass(frozen=True)
class Blocker:
    """Rectangular slab: ``extents`` are full side lengths, ``yaw`` rotates about world z."""

    center: tuple[float, float, float]
    extents: tuple[float, float, float]
    yaw: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        object.__setattr__(self, "extents", tuple(float(c) for c in self.extents))
        if len(self.center) != 3 or len(self.extents) != 3:
            raise ValueError("blocker centre and extents need three components")
        if min(self.extents) <= 0:
            raise ValueError("blocker extents must be positive")

    def _rotation(self) -> np.ndarray:
        c, s = np.cos(np.radians(self.yaw)), np.sin(np.radians(self.yaw))
        return np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])

    def to_box(self, point) -> np.ndarray:
        """Coordinates of ``point`` in the slab's own axis-aligned frame."""
        return self._rotation() @ (np.asarray(point, dtype=float) - np.array(self.center))

    def contains(self, point) -> bool:
        half = np.array(self.extents) / 2.0
        return bool(np.all(np.abs(self.to_box(point)) <= half))

    def intersects(self, a, b) -> bool:
        """Closed segment/box test (slab method)."""
        p0, p1 = self.to_box(a), self.to_box(b)
        d = p1 - p0
        half = np.array(self.extents) / 2.0
        t0, t1 = 0.0, 1.0
        for axis in range(3):
            if d[axis] == 0.0:
                if abs(p0[axis]) > half[axis]:
                    return False
                continue
            ta = (-half[axis] - p0[axis]) / d[axis]
            tb = (half[axis] - p0[axis]) / d[axis]
            if ta > tb:
                ta, tb = tb, ta
            t0, t1 = max(t0, ta), min(t1, tb)
            if t0 > t1:
                return False
        return True

    def to_dict(self) -> dict:
        return {"center": list(self.center), "extents": list(self.extents), "yaw_deg": self.yaw}


def los_blocked(a, b, blockers: Sequence[Blocker]) -> bool:
    """True when the segment a-b touches any blocker."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if np.array_equal(a, b):
        raise ValueError("degenerate segment: endpoints coincide")
    return any(blk.intersects(a, b) for blk in blockers)


@dataclass(frozen=True)
class FeedSpec:
    """Near-field feed used for pattern experiments (RIS local frame)."""

    distance: float = 0.3
    angle: float = -27.5
    gain_dbi: float = 12.5

    def position(self) -> np.ndarray:
        return self.distance * Direction.from_cut_angle(self.angle).unit_vector()


@dataclass(frozen=True)
class CodebookSpec:
    reflect_deg: tuple[float, ...] = tuple(float(x) for x in np.arange(0.0, 60.01, 2.5))
    dither_seed: int | None = None


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    frequency: float
    bs: Pose3D
    bs_gain_dbi: float
    ris: Pose3D
    ue_points: np.ndarray
    ue_gain_dbi: float = 0.0
    ue_aim_at_ris: bool = False
    geometry: ArrayGeometry = field(default_factory=ArrayGeometry)
    states: ElementStateModel = DEFAULT_STATES
    eta: float = 1.0
    blockers: tuple[Blocker, ...] = ()
    ofdm: OfdmConfig = field(default_factory=OfdmConfig)
    codebook: CodebookSpec = field(default_factory=CodebookSpec)
    feed: FeedSpec | None = None

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.ue_points, dtype=float))
        if pts.size == 0 or pts.shape[1] != 3:
            raise ValueError("UE grid must be a non-empty list of 3-D points")
        object.__setattr__(self, "ue_points", pts)
        object.__setattr__(self, "blockers", tuple(self.blockers))
        if not 0 < self.eta <= 1:
            raise ValueError("efficiency must lie in (0, 1]")

    @property
    def wave(self) -> WaveParams:
        return wave_from_frequency(self.frequency)

    @property
    def bs_antenna(self) -> Antenna:
        return Antenna(self.bs_gain_dbi, self.bs.orientation)

    def ue_antenna(self, point) -> Antenna:
        if self.ue_aim_at_ris:
            return Antenna(self.ue_gain_dbi, tuple(self.ris.origin - np.asarray(point)))
        return Antenna(self.ue_gain_dbi)

    def incident_direction(self) -> Direction:
        return local_direction(self.ris, self.bs.origin)[0]

    def check_feasible(self):
        """Raise :class:`InfeasibleScenario` unless the RIS sees the BS."""
        try:
            local_direction(self.ris, self.bs.origin)
        except GeometryError as exc:
            raise InfeasibleScenario(f"BS is not in front of the RIS: {exc}") from exc
        if los_blocked(self.bs.origin, self.ris.origin, self.blockers):
            raise InfeasibleScenario("line of sight between BS and RIS is blocked")

    def with_(self, **changes) -> "Scenario":
        return replace(self, **changes)

    # -- serialisation ---------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "frequency_hz": self.frequency,
            "bs": {
                "position": list(self.bs.position),
                "boresight": list(self.bs.orientation),
                "gain_dbi": self.bs_gain_dbi,
            },
            "ris": {
                "position": list(self.ris.position),
                "normal": list(self.ris.orientation),
                **self.geometry.to_dict(),
                **self.states.to_dict(),
                "efficiency": self.eta,
            },
            "ue_grid": {
                "points": self.ue_points.tolist(),
                "gain_dbi": self.ue_gain_dbi,
                "aim_at_ris": self.ue_aim_at_ris,
            },
            "blockers": [b.to_dict() for b in self.blockers],
            "waveform": {
                "subcarriers": self.ofdm.subcarriers,
                "bandwidth_hz": self.ofdm.bandwidth,
                "tx_power_w": self.ofdm.total_power,
                "noise_variance_w": self.ofdm.noise_variance,
            },
            "codebook": {
                "reflect_deg": list(self.codebook.reflect_deg),
                "dither_seed": self.codebook.dither_seed,
            },
            "feed": None
            if self.feed is None
            else {
                "distance_m": self.feed.distance,
                "angle_deg": self.feed.angle,
                "gain_dbi": self.feed.gain_dbi,
            },
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        freq = float(d["frequency_hz"])
        bs, ris, ue = d["bs"], d["ris"], d["ue_grid"]
        wf = d.get("waveform", {})
        cb = d.get("codebook") or {}
        feed = d.get("feed")
        ofdm_defaults = OfdmConfig()
        subcarriers = int(wf.get("subcarriers", ofdm_defaults.subcarriers))
        bandwidth = float(wf.get("bandwidth_hz", ofdm_defaults.bandwidth))
        noise = wf.get("noise_variance_w")
        if noise is None:
            noise = thermal_noise(bandwidth / subcarriers, float(wf.get("noise_figure_db", 10.0)))
        return cls(
            name=str(d.get("name", "custom")),
            frequency=freq,
            bs=Pose3D(tuple(bs["position"]), tuple(bs["boresight"])),
            bs_gain_dbi=float(bs.get("gain_dbi", 0.0)),
            ris=Pose3D(tuple(ris["position"]), tuple(ris["normal"])),
            ue_points=np.asarray(ue["points"], dtype=float),
            ue_gain_dbi=float(ue.get("gain_dbi", 0.0)),
            ue_aim_at_ris=bool(ue.get("aim_at_ris", False)),
            geometry=ArrayGeometry(
                int(ris.get("rows", 16)),
                int(ris.get("cols", 10)),
                float(ris.get("spacing_x", 25.85e-3)),
                float(ris.get("spacing_y", 25.85e-3)),
            ),
            states=ElementStateModel.from_dict(ris),
            eta=float(ris.get("efficiency", 1.0)),
            blockers=tuple(
                Blocker(tuple(b["center"]), tuple(b["extents"]), float(b.get("yaw_deg", 0.0)))
                for b in d.get("blockers") or []
            ),
            ofdm=OfdmConfig(
                subcarriers=subcarriers,
                bandwidth=bandwidth,
                center_frequency=freq,
                total_power=float(wf.get("tx_power_w", ofdm_defaults.total_power)),
                noise_variance=float(noise),
            ),
            codebook=CodebookSpec(
                tuple(float(a) for a in cb.get("reflect_deg", CodebookSpec().reflect_deg)),
                cb.get("dither_seed"),
            ),
            feed=None
            if feed is None
            else FeedSpec(
                float(feed.get("distance_m", 0.3)),
                float(feed.get("angle_deg", -27.5)),
                float(feed.get("gain_dbi", 12.5)),
            ),
        )

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    @classmethod
    def from_yaml(cls, text: str) -> "Scenario":
        return cls.from_dict(yaml.safe_load(text))


# -- presets -------------------------------------------------------------------

ANTENNA_HEIGHT = 1.5


def parking_preset() -> Scenario:
    """Beam-scanning field test: feed 5 m on boresight, receiver on a 10 m arc.

    The RIS faces world +y. Receivers sit at 0..60 degrees every 2.5 degrees
    on the +x side, which maps to design reflect angles 0..60 degrees.
    """
    h = ANTENNA_HEIGHT
    ris = Pose3D((0.0, 0.0, h), (0.0, 1.0, 0.0))
    bs = Pose3D((0.0, 5.0, h), (0.0, -1.0, 0.0))
    arc = np.radians(np.arange(0.0, 60.01, 2.5))
    ue = np.column_stack([10.0 * np.sin(arc), 10.0 * np.cos(arc), np.full(arc.size, h)])
    return Scenario(
        name="parking",
        frequency=5.8e9,
        bs=bs,
        bs_gain_dbi=12.5,
        ris=ris,
        ue_points=ue,
        ue_gain_dbi=18.5,
        ue_aim_at_ris=True,
        codebook=CodebookSpec(),
        feed=FeedSpec(5.0, 0.0, 12.5),
    )


def gammage_preset() -> Scenario:
    """Coverage test behind a 5 m tall, 2 m thick wall.

    Assumed layout (the real site geometry is unpublished): the wall spans
    x in [-12, 4] m, y in [-1, 1] m; the BS horn stands south of it, the RIS
    east of its end facing west, and a 4 x 7 grid at 1.5 m pitch lies north
    of the wall. All antennas are 1.5 m above ground.
    """
    h = ANTENNA_HEIGHT
    ris_pos = np.array([12.0, 0.0, h])
    bs_pos = np.array([2.0, -10.5, h])
    xs = np.arange(4) * 1.5 - 8.0
    ys = np.arange(7) * 1.5 + 5.0
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    ue = np.column_stack([gx.ravel(), gy.ravel(), np.full(gx.size, h)])
    return Scenario(
        name="gammage",
        frequency=5.8e9,
        bs=Pose3D(tuple(bs_pos), tuple(ris_pos - bs_pos)),
        bs_gain_dbi=19.0,
        ris=Pose3D(tuple(ris_pos), (-1.0, 0.0, 0.0)),
        ue_points=ue,
        ue_gain_dbi=0.0,
        blockers=(Blocker((-4.0, 0.0, 2.5), (16.0, 2.0, 5.0)),),
        codebook=CodebookSpec(tuple(float(x) for x in np.arange(-60.0, 60.01, 2.5))),
    )


def chamber_preset() -> Scenario:
    """Anechoic-chamber reflectarray setup: 12.5 dBi feed 0.3 m away at -27.5 degrees."""
    feed = FeedSpec(0.3, -27.5, 12.5)
    ris = Pose3D((0.0, 0.0, 0.0), (0.0, 0.0, 1.0))
    bs = Pose3D(tuple(feed.position()), tuple(-feed.position()))
    cuts = np.radians(np.arange(0.0, 60.01, 15.0))
    ue = np.column_stack([-10 * np.sin(cuts), np.zeros_like(cuts), 10 * np.cos(cuts)])
    return Scenario(
        name="chamber",
        frequency=5.8e9,
        bs=bs,
        bs_gain_dbi=12.5,
        ris=ris,
        ue_points=ue,
        ue_gain_dbi=0.0,
        codebook=CodebookSpec(tuple(float(x) for x in np.arange(0.0, 60.01, 15.0))),
        feed=feed,
    )


PRESETS = {"parking": parking_preset, "gammage": gammage_preset, "chamber": chamber_preset}


# -- coverage ------------------------------------------------------------------


def scenario_codebook(scenario: Scenario, geometry: ArrayGeometry | None = None) -> Codebook | None:
    """Codebook steering the BS direction into the scenario's reflect sweep."""
    angles = scenario.codebook.reflect_deg
    if not angles:
        return None
    geometry = geometry or scenario.geometry
    reflect = [Direction.from_cut_angle(a) for a in angles]
    return build_codebook(
        geometry, scenario.wave, [scenario.incident_direction()], reflect, scenario.codebook.dither_seed
    )


@dataclass(frozen=True, eq=False)
class CoverageMap:
    points: np.ndarray
    blocked: np.ndarray
    power_no_ris: np.ndarray  # W, received signal power without the RIS
    power_ris: np.ndarray  # W, with the selected codeword
    ris_path_power: np.ndarray  # W, RIS-only contribution of the selected codeword
    best_index: np.ndarray
    noise_power: float

    @staticmethod
    def _snr(p, noise):
        # measured SNR, (S + N) / N: a fully blocked point reads 0 dB
        return 10.0 * np.log10(1.0 + p / noise)

    @property
    def snr_no_ris(self) -> np.ndarray:
        return self._snr(self.power_no_ris, self.noise_power)

    @property
    def snr_ris(self) -> np.ndarray:
        return self._snr(self.power_ris, self.noise_power)

    @property
    def improvement(self) -> np.ndarray:
        return self.snr_ris - self.snr_no_ris

    def __len__(self):
        return len(self.points)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x_m", "y_m", "blocked", "snr_no_ris_db", "snr_ris_db", "improvement_db", "best_codeword_index"])
        for p, b, s0, s1, imp, idx in zip(
            self.points, self.blocked, self.snr_no_ris, self.snr_ris, self.improvement, self.best_index
        ):
            w.writerow([f"{p[0]:.6g}", f"{p[1]:.6g}", int(b), f"{s0:.6g}", f"{s1:.6g}", f"{imp:.6g}", int(idx)])
        return buf.getvalue()


def coverage_map(
    scenario: Scenario,
    codebook: Codebook | None,
    seed: int | None = None,
    enabled: bool = True,
) -> CoverageMap:
    """Per-point SNR without and with the RIS.

    For every grid point the RIS sweeps the codebook (noisy measurements
    when ``seed`` is given, stream ``(seed, point, candidate)``) and keeps
    the codeword with the highest measured power. When the direct path is
    open each codeword is also tried with inverted polarity so the RIS
    contribution can always be aligned with it.
    """
    scenario.check_feasible()
    geometry = scenario.geometry
    words = list(codebook) if (codebook is not None and enabled) else []
    if words:
        if codebook.geometry.size != geometry.size:
            raise ValueError("codebook geometry does not match the scenario RIS")
        bs_dir = scenario.incident_direction()
        if not any(
            abs(d.theta - bs_dir.theta) < 1e-6
            and (abs(d.phi - bs_dir.phi) < 1e-6 or d.theta < 1e-9)
            for d in codebook.incident
        ):
            raise ValueError("codebook incident set does not contain the BS direction")

    ofdm = scenario.ofdm
    noise_total = ofdm.subcarriers * ofdm.noise_variance
    s = ofdm.pilots()
    n = len(scenario.ue_points)
    blocked = np.zeros(n, bool)
    p0 = np.zeros(n)
    p1 = np.zeros(n)
    pris = np.zeros(n)
    best = np.full(n, -1, int)
    psis = [interaction_from_codeword(cw, scenario.states) for cw in words]

    for j, ue in enumerate(scenario.ue_points):
        direct_blocked = los_blocked(scenario.bs.origin, ue, scenario.blockers)
        ris_blocked = los_blocked(scenario.ris.origin, ue, scenario.blockers)
        blocked[j] = direct_blocked
        ch = synthesize_channels(
            scenario.bs,
            scenario.ris,
            ue,
            geometry,
            ofdm,
            bs_antenna=scenario.bs_antenna,
            ue_antenna=scenario.ue_antenna(ue),
            eta=scenario.eta,
            direct_blocked=direct_blocked,
            ris_blocked=ris_blocked,
        )
        p0[j] = float(np.sum(np.abs(ch.h_tr * s) ** 2))
        p1[j] = p0[j]
        if not words or ch.ris_blocked:
            continue
        candidates = list(words)
        if not direct_blocked:
            candidates += [cw.complement() for cw in words]
        sweep = beam_sweep(candidates, ch, ofdm, seed, scenario.states, stream=(j,))
        k = sweep.selected
        psi = psis[k % len(words)] * (1 if k < len(words) else -1)
        g = ch.ris_gain(psi)
        p1[j] = float(np.sum(np.abs((g + ch.h_tr) * s) ** 2))
        pris[j] = float(np.sum(np.abs(g * s) ** 2))
        best[j] = k % len(words)
    return CoverageMap(scenario.ue_points.copy(), blocked, p0, p1, pris, best, noise_total)


@dataclass
class CoverageStats:
    mean_improvement_db: float
    max_improvement_db: float
    improved_count: int
    points: int
    blocked_only: bool

    def to_dict(self) -> dict:
        return {
            "mean_improvement_db": self.mean_improvement_db,
            "max_improvement_db": self.max_improvement_db,
            "improved_count": self.improved_count,
            "points": self.points,
            "blocked_only": self.blocked_only,
        }


def coverage_stats(cmap: CoverageMap) -> CoverageStats:
    """Improvement statistics over the blocked points (all points if none are blocked)."""
    if len(cmap) == 0:
        raise ValueError("coverage map is empty")
    mask = cmap.blocked
    blocked_only = bool(mask.any())
    if not blocked_only:
        mask = np.ones(len(cmap), bool)
    imp = cmap.improvement[mask]
    return CoverageStats(
        float(np.mean(imp)), float(np.max(imp)), int(np.sum(imp > 0)), int(mask.sum()), blocked_only
    )
