"""Simulation toolkit for 1-bit reconfigurable intelligent surfaces."""

__version__ = "0.1.0"

from .codebook import (
    Codebook,
    Codeword,
    ElementStateModel,
    build_codebook,
    build_codeword,
    build_feed_codeword,
    ideal_phase,
    quantize_phase,
)
from .core import (
    ArrayGeometry,
    Direction,
    GeometryError,
    Pose3D,
    WaveParams,
    array_response,
    local_direction,
    wave_from_frequency,
)
from .link import LinkParams, bistatic_rcs, monostatic_rcs, pathloss_curve, received_power, snr
from .pattern import (
    Illumination,
    PatternCut,
    PatternMetrics,
    analyze_pattern,
    array_factor,
    feed_illumination,
    pattern_cut,
    plane_wave_illumination,
    rcs_pattern,
)
from .scenario import (
    Blocker,
    CoverageMap,
    InfeasibleScenario,
    Scenario,
    coverage_map,
    coverage_stats,
    gammage_preset,
    los_blocked,
    parking_preset,
)
from .signal import (
    ChannelSet,
    OfdmConfig,
    achievable_rate,
    beam_sweep,
    interaction_from_codeword,
    receive,
    synthesize_channels,
)
