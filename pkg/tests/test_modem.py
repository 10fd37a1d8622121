import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import erfc

from pilotgrid.channel import apply_awgn
from pilotgrid.errors import ConfigurationError
from pilotgrid.grid import OfdmGridSpec, make_grid_pattern, make_pattern, rasterize
from pilotgrid.modem import (CONSTELLATIONS, build_frame, data_capacity, demap,
                             equalize_demap, get_constellation, modulate,
                             pilot_symbols)

FRAME = OfdmGridSpec(n_subcarriers=32, n_symbols=16)


def _q(x):
    return 0.5 * erfc(x / math.sqrt(2))


def _pattern(kind="Cell", density=0.08):
    return rasterize(make_grid_pattern(kind, density), FRAME)


def test_qpsk_labeling():
    s = math.sqrt(0.5)
    assert modulate([0, 0], "QPSK")[0] == pytest.approx(s + 1j * s)
    assert modulate([1, 0], "QPSK")[0] == pytest.approx(-s + 1j * s)
    assert modulate([0, 1], "QPSK")[0] == pytest.approx(s - 1j * s)
    assert modulate([1, 1], "QPSK")[0] == pytest.approx(-s - 1j * s)


@pytest.mark.parametrize("name", list(CONSTELLATIONS))
def test_unit_average_energy(name):
    pts = get_constellation(name).points
    assert np.mean(np.abs(pts) ** 2) == pytest.approx(1.0)
    assert len(np.unique(np.round(pts, 12))) == len(pts)


@pytest.mark.parametrize("name", list(CONSTELLATIONS))
def test_gray_neighbours_differ_in_one_bit(name):
    c = get_constellation(name)
    pts = c.points
    dmin = min(abs(a - b) for i, a in enumerate(pts) for b in pts[i + 1:])
    for i, a in enumerate(pts):
        for j, b in enumerate(pts):
            if i < j and abs(abs(a - b) - dmin) < 1e-9:
                assert bin(i ^ j).count("1") == 1


@pytest.mark.parametrize("name", list(CONSTELLATIONS))
@given(st.data())
def test_noiseless_roundtrip(name, data):
    m = get_constellation(name).bits_per_symbol
    n = data.draw(st.integers(1, 50))
    bits = np.array(data.draw(st.lists(st.integers(0, 1), min_size=m * n,
                                       max_size=m * n)), dtype=np.uint8)
    assert np.array_equal(demap(modulate(bits, name), name), bits)


def test_modulate_errors():
    with pytest.raises(ValueError):
        modulate([0, 1, 1], "QPSK")
    with pytest.raises(ValueError):
        get_constellation("64QAM")


def test_pilot_symbols_are_unit_and_deterministic():
    a, b = pilot_symbols(100, 7), pilot_symbols(100, 7)
    assert np.array_equal(a, b)
    assert np.allclose(np.abs(a), 1.0)


def test_build_frame_counts():
    pat = _pattern()
    bits = np.random.default_rng(0).integers(0, 2, data_capacity(pat, "QPSK") + 9)
    fr = build_frame(bits, pat, FRAME, "QPSK", pilot_seed=3)
    assert fr.data_mask.sum() == FRAME.n_cells - pat.n_pilots
    assert len(fr.data_bits) == 2 * fr.data_mask.sum()
    assert np.array_equal(fr.grid[pat.pilot_cells[:, 0], pat.pilot_cells[:, 1]],
                          pilot_symbols(pat.n_pilots, 3))
    assert np.array_equal(fr.data_symbols, modulate(fr.data_bits, "QPSK"))
    again = build_frame(bits, pat, FRAME, "QPSK", pilot_seed=3)
    assert np.array_equal(fr.grid, again.grid)


def test_build_frame_errors():
    pat = _pattern()
    with pytest.raises(ValueError):
        build_frame(np.zeros(10, dtype=np.uint8), pat, FRAME, "QPSK")
    with pytest.raises(ConfigurationError):
        build_frame(np.zeros(10 ** 4, dtype=np.uint8),
                    make_pattern("Cell", 0.1), FRAME, "QPSK")
    empty = rasterize(make_pattern("Rectangular", 1e-4, offset=(90.0, 90.0)),
                      FRAME)
    with pytest.raises(ConfigurationError):
        build_frame(np.zeros(10 ** 4, dtype=np.uint8), empty, FRAME, "QPSK")


def _random_frame(const="QPSK", seed=0):
    pat = _pattern()
    bits = np.random.default_rng(seed).integers(0, 2, data_capacity(pat, const))
    return build_frame(bits, pat, FRAME, const, pilot_seed=1)


def test_perfect_csi_noiseless_is_error_free():
    fr = _random_frame("16QAM")
    rng = np.random.default_rng(1)
    h = rng.standard_normal(FRAME.shape) + 1j * rng.standard_normal(FRAME.shape)
    res = equalize_demap(h * fr.grid, h, fr)
    assert res.errors == 0 and res.ber == 0.0
    assert res.n_bits == len(fr.data_bits)


def test_phase_flip_on_one_cell():
    fr = _random_frame()
    h = np.ones(FRAME.shape, dtype=complex)
    n, k = np.argwhere(fr.data_mask)[0]
    h_hat = h.copy()
    h_hat[n, k] = -1  # 180 degree estimate error flips both QPSK bits
    res = equalize_demap(fr.grid, h_hat, fr)
    assert res.errors == 2


def test_zero_estimate_counts_half_the_bits():
    fr = _random_frame()
    h_hat = np.ones(FRAME.shape, dtype=complex)
    cells = np.argwhere(fr.data_mask)[:3]
    h_hat[cells[:, 0], cells[:, 1]] = 0
    res = equalize_demap(fr.grid, h_hat, fr)
    assert res.erased_cells == 3
    assert res.errors == 3.0


def test_qpsk_awgn_matches_closed_form():
    rng = np.random.default_rng(2)
    bits = rng.integers(0, 2, 2 * 400_000).astype(np.uint8)
    snr_db = 6.0
    y, _ = apply_awgn(modulate(bits, "QPSK"), snr_db, seed=3)
    ber = np.mean(demap(y, "QPSK") != bits)
    ebn0 = 10 ** (snr_db / 10) / 2
    assert ber == pytest.approx(_q(math.sqrt(2 * ebn0)), rel=0.05)


@pytest.mark.parametrize("snr_db", [8.0, 12.0])
def test_16qam_awgn_matches_exact_gray_formula(snr_db):
    rng = np.random.default_rng(4)
    bits = rng.integers(0, 2, 4 * 300_000).astype(np.uint8)
    y, _ = apply_awgn(modulate(bits, "16QAM"), snr_db, seed=5)
    ber = np.mean(demap(y, "16QAM") != bits)
    x = math.sqrt(10 ** (snr_db / 10) / 5)
    exact = (3 * _q(x) + 2 * _q(3 * x) - _q(5 * x)) / 4
    assert ber == pytest.approx(exact, rel=0.05)
