"""Constellations, frame assembly and coherent detection.

Labeling table (bits are listed first-transmitted first; amplitudes before
normalization to unit average energy):

    QPSK   b1 b0      -> ((1-2*b1) + 1j*(1-2*b0)) / sqrt(2)
    8QAM   b2 b1 | b0 -> I from Gray pair (b2 b1), Q = 1-2*b0; / sqrt(6)
    16QAM  b3 b2 | b1 b0 -> I from (b3 b2), Q from (b1 b0);   / sqrt(10)

    Gray pair -> level:  00 -> -3,  01 -> -1,  11 -> +1,  10 -> +3
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .grid import OfdmGridSpec, PilotPattern

_GRAY_PAIR_LEVEL = {0b00: -3.0, 0b01: -1.0, 0b11: 1.0, 0b10: 3.0}


@dataclass(frozen=True, eq=False)
class Constellation:
    """``points[label]`` is the symbol carrying the integer bit label."""

    name: str
    points: np.ndarray

    @property
    def order(self) -> int:
        return len(self.points)

    @property
    def bits_per_symbol(self) -> int:
        return int(round(math.log2(self.order)))

    @property
    def labels(self) -> np.ndarray:
        return np.arange(self.order)


def _qpsk() -> Constellation:
    pts = np.array([complex(1 - 2 * (lab >> 1), 1 - 2 * (lab & 1))
                    for lab in range(4)]) / math.sqrt(2.0)
    return Constellation("QPSK", pts)


def _qam8() -> Constellation:
    pts = np.array([complex(_GRAY_PAIR_LEVEL[lab >> 1], 1 - 2 * (lab & 1))
                    for lab in range(8)]) / math.sqrt(6.0)
    return Constellation("8QAM", pts)


def _qam16() -> Constellation:
    pts = np.array([complex(_GRAY_PAIR_LEVEL[lab >> 2],
                            _GRAY_PAIR_LEVEL[lab & 0b11])
                    for lab in range(16)]) / math.sqrt(10.0)
    return Constellation("16QAM", pts)


CONSTELLATIONS = {"QPSK": _qpsk(), "8QAM": _qam8(), "16QAM": _qam16()}


def get_constellation(name) -> Constellation:
    if isinstance(name, Constellation):
        return name
    key = str(name).strip().upper()
    if key not in CONSTELLATIONS:
        raise ValueError(f"unknown modulation {name!r}; expected one of "
                         f"{', '.join(CONSTELLATIONS)}")
    return CONSTELLATIONS[key]


def _bits_to_labels(bits: np.ndarray, m: int) -> np.ndarray:
    groups = bits.reshape(-1, m).astype(np.int64)
    return groups @ (1 << np.arange(m - 1, -1, -1))


def _labels_to_bits(labels: np.ndarray, m: int) -> np.ndarray:
    shifts = np.arange(m - 1, -1, -1)
    return ((labels[:, None] >> shifts) & 1).astype(np.uint8).ravel()


def modulate(bits, constellation) -> np.ndarray:
    c = get_constellation(constellation)
    bits = np.asarray(bits, dtype=np.uint8).ravel()
    m = c.bits_per_symbol
    if len(bits) % m:
        raise ValueError(f"bit count {len(bits)} is not a multiple of {m}")
    return c.points[_bits_to_labels(bits, m)]


def hard_decision(symbols: np.ndarray, constellation,
                  chunk: int = 1 << 18) -> np.ndarray:
    """Labels of the nearest constellation points."""
    c = get_constellation(constellation)
    s = np.asarray(symbols).ravel()
    out = np.empty(len(s), dtype=np.int64)
    for i in range(0, len(s), chunk):
        part = s[i:i + chunk]
        out[i:i + chunk] = np.argmin(np.abs(part[:, None] - c.points[None]),
                                     axis=1)
    return out


def demap(symbols: np.ndarray, constellation) -> np.ndarray:
    c = get_constellation(constellation)
    return _labels_to_bits(hard_decision(symbols, c), c.bits_per_symbol)


def pilot_symbols(n: int, seed: int) -> np.ndarray:
    """Unit-magnitude QPSK pilot sequence shared by both link ends."""
    q = np.random.default_rng(seed).integers(0, 4, size=n)
    return np.exp(1j * (np.pi / 4 + np.pi / 2 * q))


@dataclass(frozen=True, eq=False)
class OfdmFrame:
    grid: np.ndarray
    pilot_cells: np.ndarray
    pilot_values: np.ndarray
    data_bits: np.ndarray
    data_mask: np.ndarray
    constellation: Constellation

    @property
    def data_symbols(self) -> np.ndarray:
        return self.grid[self.data_mask]


def data_capacity(pattern: PilotPattern, constellation) -> int:
    """Bits needed to fill every data cell of the pattern's frame."""
    c = get_constellation(constellation)
    return (pattern.frame.n_cells - pattern.n_pilots) * c.bits_per_symbol


def build_frame(bits, pattern: PilotPattern, frame: OfdmGridSpec,
                constellation, pilot_seed: int = 0) -> OfdmFrame:
    """Place pilots on the pattern cells and data symbols elsewhere.

    Data cells are filled in row-major (symbol, subcarrier) order; bits
    beyond the frame capacity are ignored.
    """
    c = get_constellation(constellation)
    if not pattern.is_rasterized or pattern.frame != frame:
        raise ConfigurationError("pattern must be rasterized on this frame")
    if pattern.n_pilots == 0:
        raise ConfigurationError("pattern has no pilots")
    need = data_capacity(pattern, c)
    bits = np.asarray(bits, dtype=np.uint8).ravel()
    if len(bits) < need:
        raise ValueError(f"need {need} bits to fill the frame, got {len(bits)}")
    bits = bits[:need]
    mask = ~pattern.pilot_mask()
    grid = np.empty(frame.shape, dtype=complex)
    grid[mask] = modulate(bits, c)
    pv = pilot_symbols(pattern.n_pilots, pilot_seed)
    grid[pattern.pilot_cells[:, 0], pattern.pilot_cells[:, 1]] = pv
    return OfdmFrame(grid=grid, pilot_cells=pattern.pilot_cells,
                     pilot_values=pv, data_bits=bits, data_mask=mask,
                     constellation=c)


@dataclass(frozen=True, eq=False)
class DemapResult:
    bits: np.ndarray
    errors: float
    n_bits: int
    erased_cells: int

    @property
    def ber(self) -> float:
        return self.errors / self.n_bits if self.n_bits else 0.0


def equalize_demap(received: np.ndarray, h_hat, frame: OfdmFrame,
                   constellation=None) -> DemapResult:
    """Zero-forcing equalization and hard decisions on the data cells.

    Cells with a zero channel estimate cannot be equalized; their bits are
    counted as half wrong.
    """
    c = get_constellation(constellation or frame.constellation)
    h = getattr(h_hat, "h_hat", h_hat)
    y = np.asarray(received)[frame.data_mask]
    hd = np.asarray(h)[frame.data_mask]
    erased = hd == 0
    s_hat = np.where(erased, 0, y / np.where(erased, 1, hd))
    bits = demap(s_hat, c)
    m = c.bits_per_symbol
    wrong = (bits != frame.data_bits).reshape(-1, m)
    errors = float(wrong[~erased].sum()) + 0.5 * m * float(erased.sum())
    return DemapResult(bits=bits, errors=errors, n_bits=len(frame.data_bits),
                       erased_cells=int(erased.sum()))
