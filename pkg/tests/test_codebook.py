import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose, assert_array_equal

from risim.codebook import (
    DEFAULT_REFLECT_SET,
    Codebook,
    Codeword,
    ElementStateModel,
    azimuth_sweep,
    build_codebook,
    build_codeword,
    build_feed_codeword,
    codebook_from_dict,
    codebook_to_dict,
    ideal_phase,
    load_codebook,
    quantize_phase,
    save_codebook,
)
from risim.core import ArrayGeometry, Direction, wave_from_frequency, wrap_degrees

WAVE = wave_from_frequency(5.8e9)
GEOM = ArrayGeometry()
BROAD = Direction(0.0)

directions = st.builds(Direction, st.floats(0.0, 89.0), st.floats(0.0, 359.0))


def _brute_force_bits(geometry, wave, incident, reflect):
    # element-by-element evaluation with plain Python math
    ui, vi = incident.uv
    ud, vd = reflect.uv
    bits = []
    for n in range(geometry.cols):
        for m in range(geometry.rows):
            x = (m - (geometry.rows - 1) / 2) * geometry.spacing_x
            y = (n - (geometry.cols - 1) / 2) * geometry.spacing_y
            phi = np.degrees(wave.k0 * (x * ui + y * vi) - wave.k0 * (x * ud + y * vd))
            phi = (phi + 180.0) % 360.0 - 180.0
            bits.append(0 if abs(phi) <= 90.0 else 1)
    return np.array(bits)


# -- ideal phase -----------------------------------------------------------------


def test_origin_element_has_zero_phase():
    g = ArrayGeometry(3, 3, 0.02, 0.02)
    phi = ideal_phase(g, WAVE, Direction(20.0, 10.0), Direction(55.0, 200.0))
    assert phi[4] == pytest.approx(0.0, abs=1e-12)


def test_broadside_to_broadside_is_flat():
    assert_allclose(ideal_phase(GEOM, WAVE, BROAD, BROAD), 0.0, atol=1e-12)


def test_hand_evaluated_phase_at_60_degrees():
    g = ArrayGeometry(3, 1, 25.85e-3, 25.85e-3)
    phi = ideal_phase(g, WAVE, BROAD, Direction(60.0, 0.0))
    assert abs(phi[2] - (-155.9)) < 0.5


@given(directions, directions)
def test_ideal_phase_antisymmetric(i, d):
    a = ideal_phase(GEOM, WAVE, i, d)
    b = ideal_phase(GEOM, WAVE, d, i)
    # compare on the circle so the +/-180 edge is not an artefact
    err = np.abs(wrap_degrees(a + b))
    assert_allclose(np.minimum(err, 360.0 - err), 0.0, atol=1e-9)


# -- quantization ----------------------------------------------------------------


@pytest.mark.parametrize(
    "phi, bit", [(80.0, 0), (100.0, 1), (-90.0, 0), (90.0, 0), (270.0, 0), (180.0, 1), (-91.0, 1)]
)
def test_quantize_examples(phi, bit):
    assert quantize_phase(phi) == bit


@given(st.floats(-720.0, 720.0), st.integers(-5, 5))
def test_quantize_periodic(phi, k):
    shifted = phi + 360.0 * k
    # skip values that land within float noise of the decision boundary
    if abs(abs(float(wrap_degrees(phi))) - 90.0) < 1e-9:
        return
    assert quantize_phase(phi) == quantize_phase(shifted)


@given(st.floats(-720.0, 720.0))
def test_quantize_even(phi):
    assert quantize_phase(phi) == quantize_phase(-phi)


def test_quantize_array_input():
    assert_array_equal(quantize_phase(np.array([0.0, 95.0, -170.0])), [0, 1, 1])


# -- codewords -------------------------------------------------------------------


def test_broadside_codeword_is_all_zero():
    cw = build_codeword(GEOM, WAVE, BROAD, BROAD)
    assert len(cw) == 160 and not cw.bits.any()


def test_codeword_is_deterministic():
    a = build_codeword(GEOM, WAVE, BROAD, Direction(30.0), dither=11)
    b = build_codeword(GEOM, WAVE, BROAD, Direction(30.0), dither=11)
    assert a == b
    assert_array_equal(a.dither, b.dither)


def test_30_degree_codeword_matches_brute_force_and_is_column_constant():
    cw = build_codeword(GEOM, WAVE, BROAD, Direction(30.0, 0.0))
    oracle = _brute_force_bits(GEOM, WAVE, BROAD, Direction(30.0, 0.0))
    assert_array_equal(cw.bits, oracle)
    grid = cw.bits.reshape(GEOM.cols, GEOM.rows)  # row n holds the 16 elements along x
    assert (grid == grid[0]).all()
    assert 0 < grid[0].sum() < GEOM.rows


def test_dithered_codeword_differs_but_reproduces():
    plain = build_codeword(GEOM, WAVE, BROAD, Direction(30.0))
    d1 = build_codeword(GEOM, WAVE, BROAD, Direction(30.0), dither=3)
    d2 = build_codeword(GEOM, WAVE, BROAD, Direction(30.0), dither=3)
    assert not np.array_equal(plain.bits, d1.bits)
    assert_array_equal(d1.bits, d2.bits)
    assert d1.dither.min() >= 0.0 and d1.dither.max() < 360.0


def test_codeword_validation():
    with pytest.raises(ValueError):
        Codeword([0, 2], BROAD, BROAD)
    with pytest.raises(ValueError):
        Codeword([0, 1], BROAD, BROAD, dither=[1.0])
    cw = Codeword([0, 1, 1], BROAD, BROAD)
    with pytest.raises(ValueError):
        cw.check_geometry(GEOM)
    assert cw.bitstring == "011"
    assert_array_equal(cw.complement().bits, [1, 0, 0])


def test_feed_codeword_requires_feed_in_front():
    with pytest.raises(ValueError):
        build_feed_codeword(GEOM, WAVE, (0.0, 0.0, -1.0), Direction(30.0))


def test_distant_feed_codeword_approaches_plane_wave_design():
    far = 1e7 * Direction.from_cut_angle(-27.5).unit_vector()
    a = build_feed_codeword(GEOM, WAVE, far, Direction(30.0))
    b = build_codeword(GEOM, WAVE, Direction.from_cut_angle(-27.5), Direction(30.0))
    assert np.mean(a.bits != b.bits) < 0.02


# -- codebooks -------------------------------------------------------------------


def test_default_reflect_set_has_25_directions():
    assert len(DEFAULT_REFLECT_SET) == 25
    assert DEFAULT_REFLECT_SET[0].theta == 0.0 and DEFAULT_REFLECT_SET[-1].theta == pytest.approx(60.0)
    assert len(build_codebook(GEOM, WAVE, [BROAD])) == 25


def test_codebook_cardinality_and_order():
    inc = [BROAD, Direction(20.0)]
    refl = [Direction(10.0), Direction(20.0), Direction(30.0)]
    book = build_codebook(GEOM, WAVE, inc, refl)
    assert len(book) == 6
    pairs = [(cw.incident, cw.reflect) for cw in book]
    assert pairs == [(i, d) for i in inc for d in refl]


def test_single_broadside_codebook():
    book = build_codebook(GEOM, WAVE, [BROAD], [BROAD])
    assert len(book) == 1 and not book[0].bits.any()


def test_empty_sets_rejected():
    with pytest.raises(ValueError):
        build_codebook(GEOM, WAVE, [], [BROAD])
    with pytest.raises(ValueError):
        build_codebook(GEOM, WAVE, [BROAD], [])
    with pytest.raises(ValueError):
        Codebook((BROAD,), (BROAD, BROAD), (), GEOM)


def test_azimuth_sweep_signed():
    sweep = azimuth_sweep(-5.0, 5.0, 2.5)
    assert [d.theta for d in sweep] == [5.0, 2.5, 0.0, 2.5, 5.0]
    assert [d.phi for d in sweep] == [180.0, 180.0, 0.0, 0.0, 0.0]


@pytest.mark.parametrize("dither", [None, 42])
def test_file_round_trip_is_bit_exact(tmp_path, dither):
    book = build_codebook(GEOM, WAVE, [Direction(27.5, 180.0)], DEFAULT_REFLECT_SET, dither)
    path = tmp_path / "cb.json"
    save_codebook(book, path)
    back = load_codebook(path)
    assert len(back) == len(book)
    for a, b in zip(book, back):
        assert a == b
        assert len(b.bitstring) == 160
    assert codebook_to_dict(back) == codebook_to_dict(book)


def test_file_rejects_foreign_document():
    with pytest.raises(ValueError):
        codebook_from_dict({"format": "other"})


# -- state model -----------------------------------------------------------------


def test_state_model_defaults_and_validation():
    s = ElementStateModel()
    assert_allclose(s.reflection([0, 1]), [1.0, -1.0])
    with pytest.raises(ValueError):
        ElementStateModel(1.2, -1.0)
    lossy = ElementStateModel.from_polar(0.9, 5.0, 0.8, 175.0)
    assert ElementStateModel.from_dict(lossy.to_dict()).state1 == pytest.approx(lossy.state1)
