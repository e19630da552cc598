import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from risim.core import ArrayGeometry, Pose3D
from risim.scenario import (
    PRESETS,
    Blocker,
    CodebookSpec,
    CoverageMap,
    InfeasibleScenario,
    Scenario,
    coverage_map,
    coverage_stats,
    gammage_preset,
    los_blocked,
    parking_preset,
    scenario_codebook,
)
from risim.signal import interaction_from_codeword, synthesize_channels

BOX = Blocker((0.0, 0.0, 0.0), (2.0, 2.0, 2.0))
coords = st.floats(-4.0, 4.0)
points = st.tuples(coords, coords, coords)


def _sampled_blocked(a, b, box, n=20001):
    # dense point sampling along the closed segment
    t = np.linspace(0.0, 1.0, n)[:, None]
    pts = np.asarray(a) + t * (np.asarray(b) - np.asarray(a))
    return any(box.contains(p) for p in pts)


# -- blockage ---------------------------------------------------------------------


def test_no_blockers():
    assert not los_blocked((0, 0, 0), (1, 1, 1), [])


def test_segment_through_centre():
    assert los_blocked((-5, 0, 0), (5, 0, 0), [BOX])


def test_grazing_face_counts_as_blocked():
    a, b = (-5.0, 1.0, 0.0), (5.0, 1.0, 0.0)  # runs along the y = +1 face
    assert _sampled_blocked(a, b, BOX)
    assert los_blocked(a, b, [BOX])
    assert not los_blocked((-5.0, 1.0 + 1e-9, 0.0), (5.0, 1.0 + 1e-9, 0.0), [BOX])


def test_segment_ending_short_of_slab():
    assert not los_blocked((-5, 0, 0), (-1.0001, 0, 0), [BOX])
    assert los_blocked((-5, 0, 0), (-1.0, 0, 0), [BOX])


def test_degenerate_segment_rejected():
    with pytest.raises(ValueError):
        los_blocked((1, 2, 3), (1, 2, 3), [BOX])


def test_blocker_validation():
    with pytest.raises(ValueError):
        Blocker((0, 0, 0), (1, 0, 1))


@settings(max_examples=150, deadline=None)
@given(points, points, st.floats(0.0, 90.0))
def test_slab_test_matches_sampling_and_is_symmetric(a, b, yaw):
    if np.allclose(a, b):
        return
    box = Blocker((0.3, -0.2, 0.1), (2.0, 1.0, 3.0), yaw)
    got = los_blocked(a, b, [box])
    assert got == los_blocked(b, a, [box])
    if got != _sampled_blocked(a, b, box, 2001):
        # only tolerable when the segment barely clips an edge between samples
        assert got and _sampled_blocked(a, b, box, 200001)


# -- presets -------------------------------------------------------------------------


def test_parking_distances():
    sc = parking_preset()
    assert np.linalg.norm(sc.bs.origin - sc.ris.origin) == pytest.approx(5.0)
    assert_allclose(np.linalg.norm(sc.ue_points - sc.ris.origin, axis=1), 10.0)
    assert len(sc.ue_points) == 25
    assert (sc.bs_gain_dbi, sc.ue_gain_dbi) == (12.5, 18.5)


def test_gammage_path_lengths_and_grid():
    sc = gammage_preset()
    assert len(sc.ue_points) == 28
    r_i = np.linalg.norm(sc.bs.origin - sc.ris.origin)
    total = r_i + np.linalg.norm(sc.ue_points - sc.ris.origin, axis=1)
    assert total.min() >= 30.0 and total.max() <= 40.0
    assert sc.bs_gain_dbi == 19.0 and sc.ue_gain_dbi == 0.0
    assert all(los_blocked(sc.bs.origin, p, sc.blockers) for p in sc.ue_points)
    assert not any(los_blocked(sc.ris.origin, p, sc.blockers) for p in sc.ue_points)
    sc.check_feasible()


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_preset_round_trip(name):
    sc = PRESETS[name]()
    again = Scenario.from_yaml(sc.to_yaml())
    assert again.to_dict() == sc.to_dict()
    assert Scenario.from_dict(sc.to_dict()).to_yaml() == sc.to_yaml()


def test_infeasible_when_ris_cannot_see_bs():
    sc = gammage_preset()
    with pytest.raises(InfeasibleScenario):
        sc.with_(ris=Pose3D((-4.0, 3.0, 1.5), (0.0, -1.0, 0.0))).check_feasible()
    walled = sc.with_(blockers=sc.blockers + (Blocker((7.0, -5.0, 2.0), (1.0, 1.0, 4.0)),))
    with pytest.raises(InfeasibleScenario):
        coverage_map(walled, scenario_codebook(walled))


# -- coverage ------------------------------------------------------------------------


def _open_field():
    sc = gammage_preset()
    return sc.with_(blockers=())


def test_disabled_ris_leaves_map_unchanged():
    sc = _open_field()
    cmap = coverage_map(sc, scenario_codebook(sc), enabled=False)
    assert not cmap.blocked.any()
    assert_array_equal(cmap.snr_ris, cmap.snr_no_ris)


def test_empty_codebook_equals_no_ris_map():
    sc = gammage_preset().with_(codebook=CodebookSpec(()))
    assert scenario_codebook(sc) is None
    cmap = coverage_map(sc, None)
    assert_array_equal(cmap.power_ris, cmap.power_no_ris)
    assert (cmap.best_index == -1).all()


def test_every_blocked_point_improves():
    sc = gammage_preset()
    cmap = coverage_map(sc, scenario_codebook(sc), seed=3)
    assert cmap.blocked.all()
    assert (cmap.improvement > 0).all()
    assert (cmap.power_no_ris == 0).all()


def test_with_ris_never_worse_at_zero_noise():
    sc = _open_field()
    cmap = coverage_map(sc, scenario_codebook(sc))
    assert (cmap.power_ris >= cmap.power_no_ris * (1 - 1e-12)).all()


def test_removing_the_wall_never_hurts_direct_path():
    blocked = coverage_map(gammage_preset(), None)
    open_ = coverage_map(_open_field(), None)
    assert (open_.snr_no_ris >= blocked.snr_no_ris).all()


def test_boresight_point_selects_specular_codeword():
    sc = Scenario(
        name="boresight",
        frequency=5.8e9,
        bs=Pose3D((0.0, 5.0, 0.0), (0.0, -1.0, 0.0)),
        bs_gain_dbi=12.5,
        ris=Pose3D((0.0, 0.0, 0.0), (0.0, 1.0, 0.0)),
        ue_points=[(0.0, 20.0, 0.0)],
    )
    book = scenario_codebook(sc)
    cmap = coverage_map(sc, book)
    ch = synthesize_channels(sc.bs, sc.ris, sc.ue_points[0], sc.geometry, sc.ofdm,
                             bs_antenna=sc.bs_antenna, direct_blocked=True)
    powers = [np.sum(np.abs(ch.ris_gain(interaction_from_codeword(cw))) ** 2) for cw in book]
    assert cmap.best_index[0] == int(np.argmax(powers))
    assert book[cmap.best_index[0]].reflect.theta == 0.0


def test_tenfold_elements_add_20_db_of_ris_power():
    sc = gammage_preset()
    big = sc.with_(geometry=ArrayGeometry(16, 100))
    small_map = coverage_map(sc, scenario_codebook(sc))
    big_map = coverage_map(big, scenario_codebook(big))
    gain = 10 * np.log10(big_map.power_ris / small_map.power_ris)
    assert np.all(np.abs(gain - 20.0) <= 0.5)


def test_coverage_is_deterministic_per_seed():
    sc = gammage_preset()
    book = scenario_codebook(sc)
    a = coverage_map(sc, book, seed=11)
    b = coverage_map(sc, book, seed=11)
    assert a.to_csv() == b.to_csv()
    assert coverage_stats(a) == coverage_stats(b)


def test_coverage_csv_columns():
    sc = gammage_preset()
    lines = coverage_map(sc, scenario_codebook(sc)).to_csv().splitlines()
    assert lines[0] == "x_m,y_m,blocked,snr_no_ris_db,snr_ris_db,improvement_db,best_codeword_index"
    assert len(lines) == 29


def _map_with_improvements(imps, blocked):
    n = len(imps)
    noise = 1.0
    p0 = np.full(n, 1.0)
    p1 = (1 + p0) * 10 ** (np.asarray(imps) / 10) - 1  # invert the (S + N) / N rule
    return CoverageMap(np.zeros((n, 3)), np.asarray(blocked), p0, p1, p1 - p0, np.zeros(n, int), noise)


def test_stats_examples():
    s = coverage_stats(_map_with_improvements([6.0, 6.0, 6.0], [True] * 3))
    assert s.mean_improvement_db == pytest.approx(6.0) and s.max_improvement_db == pytest.approx(6.0)
    s = coverage_stats(_map_with_improvements([2.0, 4.0, 6.0, 30.0], [True, True, True, False]))
    assert s.mean_improvement_db == pytest.approx(4.0) and s.max_improvement_db == pytest.approx(6.0)
    assert s.points == 3 and s.blocked_only


def test_stats_fall_back_to_all_points():
    s = coverage_stats(_map_with_improvements([1.0, 3.0], [False, False]))
    assert not s.blocked_only and s.points == 2 and s.mean_improvement_db == pytest.approx(2.0)
