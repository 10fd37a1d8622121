"""Synthetic doubly selective channels and AWGN.

The channel is a tapped delay line whose taps fade independently.  The
per-subcarrier response of symbol ``n`` is

    H[n, k] = sum_l h_l[n] * exp(-2j*pi*k*tau_l/n_fft)

which is exact as long as every delay fits inside the cyclic prefix.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from .errors import ConfigurationError
from .grid import OfdmGridSpec, RegularizedScale

DOPPLER_SHAPES = ("none", "classical")
MIN_OSCILLATORS = 32


@dataclass(frozen=True)
class ChannelSpec:
    """Statistical description of the fading channel.

    ``taps`` holds ``(delay_in_samples, linear_power)`` pairs whose powers
    sum to one.  ``f_max_normalized`` is the maximum Doppler shift times
    the symbol duration.  With ``awgn_only`` the response is identically 1.
    """

    taps: tuple[tuple[float, float], ...] = ((0.0, 1.0),)
    f_max_normalized: float = 0.02455
    doppler_shape: str = "classical"
    awgn_only: bool = False
    n_oscillators: int = MIN_OSCILLATORS

    def __post_init__(self):
        if self.doppler_shape not in DOPPLER_SHAPES:
            raise ValueError(f"doppler_shape must be one of {DOPPLER_SHAPES}")
        if not self.taps:
            raise ValueError("at least one tap is required")
        delays = [d for d, _ in self.taps]
        powers = [p for _, p in self.taps]
        if min(delays) < 0:
            raise ValueError("tap delays must be non-negative")
        if min(powers) < 0:
            raise ValueError("tap powers must be non-negative")
        if abs(sum(powers) - 1.0) > 1e-9:
            raise ValueError(f"tap powers must sum to 1 (got {sum(powers)!r})")
        if self.f_max_normalized < 0:
            raise ValueError("f_max_normalized must be >= 0")
        if self.n_oscillators < MIN_OSCILLATORS:
            raise ValueError(f"need at least {MIN_OSCILLATORS} oscillators")

    @property
    def tau_max(self) -> float:
        return max(d for d, _ in self.taps)

    @property
    def delays(self) -> np.ndarray:
        return np.array([d for d, _ in self.taps], dtype=float)

    @property
    def powers(self) -> np.ndarray:
        return np.array([p for _, p in self.taps], dtype=float)

    @classmethod
    def exponential(cls, decay: float, n_taps: int, **kwargs) -> "ChannelSpec":
        """Exponential power delay profile ``p_l ~ exp(-l / decay)`` on
        integer delays ``0 .. n_taps-1``."""
        return cls(taps=exponential_profile(decay, n_taps), **kwargs)

    @classmethod
    def for_response_variance(cls, variance: float, n_taps: int,
                              frame: OfdmGridSpec, **kwargs) -> "ChannelSpec":
        """Exponential profile tuned so the expected spread of ``H`` across
        the subcarriers of one symbol equals ``variance``."""
        def gap(log_decay):
            spec = cls.exponential(math.exp(log_decay), n_taps, **kwargs)
            return frequency_response_variance(spec, frame) - variance

        lo, hi = math.log(1e-3), math.log(1e3)
        if not gap(lo) < 0 < gap(hi):
            raise ValueError(f"variance {variance} unreachable with "
                             f"{n_taps} taps")
        return cls.exponential(math.exp(brentq(gap, lo, hi, xtol=1e-12)),
                               n_taps, **kwargs)


def exponential_profile(decay: float, n_taps: int):
    if not (decay > 0 and n_taps >= 1):
        raise ValueError("decay must be positive and n_taps >= 1")
    p = np.exp(-np.arange(n_taps) / decay)
    p /= p.sum()
    return tuple((float(l), float(v)) for l, v in enumerate(p))


def frequency_response_variance(spec: ChannelSpec,
                                frame: OfdmGridSpec) -> float:
    """Expected sample variance of ``H[n, :]`` over the subcarriers.

    A tap whose phase ramp averages out over the band contributes its full
    power; a tap at delay 0 contributes nothing.
    """
    k = np.arange(frame.n_subcarriers)
    ramps = np.exp(-2j * np.pi * np.outer(spec.delays, k) / frame.n_fft)
    coherent = np.abs(ramps.mean(axis=1)) ** 2
    return float(np.sum(spec.powers * (1.0 - coherent)))


def frequency_correlation(spec: ChannelSpec, frame: OfdmGridSpec,
                          dk: int) -> complex:
    """Analytic correlation ``E[H[n,k+dk] H*[n,k]]``."""
    return complex(np.sum(spec.powers
                          * np.exp(-2j * np.pi * dk * spec.delays / frame.n_fft)))


def fourth_moment(weights, coords=None) -> float:
    """Normalized fourth moment ``sum(w * x**4) / sum(w)``.

    ``coords`` defaults to ``0, 1, 2, ...`` (integer delays).
    """
    w = np.asarray(weights, dtype=float)
    x = np.arange(len(w), dtype=float) if coords is None else np.asarray(
        coords, dtype=float)
    if w.shape != x.shape:
        raise ValueError("weights and coordinates differ in length")
    if np.any(w < 0):
        raise ValueError("weights must be non-negative")
    total = w.sum()
    if not total > 0:
        raise ValueError("profile is all zero")
    return float(np.sum(w * x ** 4) / total)


def doppler_fourth_moment(spec: ChannelSpec, n_angles: int = 4096) -> float:
    """Fourth moment of the Doppler spectrum in (cycles/symbol)^4.

    The classical spectrum is the distribution of ``f_max * cos(alpha)``
    for a uniform arrival angle; for it the moment is ``3/8 * f_max**4``.
    """
    if spec.awgn_only or spec.doppler_shape == "none":
        return 0.0
    alpha = (np.arange(n_angles) + 0.5) * 2 * np.pi / n_angles
    nu = spec.f_max_normalized * np.cos(alpha)
    return fourth_moment(np.ones(n_angles), nu)


def delay_fourth_moment(spec: ChannelSpec, frame: OfdmGridSpec) -> float:
    """Fourth moment of the delay profile in (cycles/subcarrier)^4."""
    if spec.awgn_only:
        return 0.0
    return fourth_moment(spec.powers, spec.delays / frame.n_fft)


def regularized_scale(spec: ChannelSpec,
                      frame: OfdmGridSpec) -> RegularizedScale:
    """Grid scale that equalizes the channel's fourth moments, or the
    identity when either axis has no variability."""
    w1 = doppler_fourth_moment(spec)
    w2 = delay_fourth_moment(spec, frame)
    if w1 > 0 and w2 > 0:
        return RegularizedScale.from_moments(w1, w2)
    return RegularizedScale()


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    h: np.ndarray
    spec: ChannelSpec
    seed: int


def _tap_processes(spec: ChannelSpec, n_symbols: int,
                   rng: np.random.Generator) -> np.ndarray:
    n_taps = len(spec.taps)
    if spec.doppler_shape == "none" or spec.f_max_normalized == 0:
        g = (rng.standard_normal(n_taps)
             + 1j * rng.standard_normal(n_taps)) / math.sqrt(2.0)
        return np.repeat(g[:, None], n_symbols, axis=1)
    m = spec.n_oscillators
    # sum of sinusoids with random arrival angles and phases; the ensemble
    # autocorrelation is J0(2*pi*f_max*lag)
    alpha = rng.uniform(0.0, 2 * np.pi, size=(n_taps, m))
    phase = rng.uniform(0.0, 2 * np.pi, size=(n_taps, m))
    n = np.arange(n_symbols)
    arg = (2 * np.pi * spec.f_max_normalized * np.cos(alpha)[:, :, None]
           * n[None, None, :] + phase[:, :, None])
    return np.exp(1j * arg).sum(axis=1) / math.sqrt(m)


def synthesize_channel(spec: ChannelSpec, frame: OfdmGridSpec,
                       seed: int) -> ChannelRealization:
    """One realization of ``H[n, k]`` over the frame, deterministic in
    ``seed``."""
    if spec.tau_max >= frame.n_cp and not spec.awgn_only:
        raise ConfigurationError(
            f"maximum delay {spec.tau_max} does not fit in the cyclic prefix "
            f"({frame.n_cp} samples)")
    if spec.awgn_only:
        h = np.ones(frame.shape, dtype=complex)
        return ChannelRealization(h=h, spec=spec, seed=seed)
    rng = np.random.default_rng(seed)
    g = _tap_processes(spec, frame.n_symbols, rng)
    g *= np.sqrt(spec.powers)[:, None]
    k = np.arange(frame.n_subcarriers)
    ramps = np.exp(-2j * np.pi * np.outer(spec.delays, k) / frame.n_fft)
    return ChannelRealization(h=g.T @ ramps, spec=spec, seed=seed)


def noise_variance(snr_db: float, es: float = 1.0) -> float:
    if not es > 0:
        raise ValueError("symbol energy must be positive")
    if math.isinf(snr_db) and snr_db > 0:
        return 0.0
    return es / 10.0 ** (snr_db / 10.0)


def apply_awgn(symbols: np.ndarray, snr_db: float, es: float = 1.0,
               seed: int = 0) -> tuple[np.ndarray, float]:
    """Add circular complex Gaussian noise of variance ``es / 10**(snr/10)``.

    ``snr_db = inf`` disables the noise.  The unit-variance draw depends on
    ``seed`` only, so different SNRs with one seed reuse the same noise
    shape scaled to the requested power.
    """
    var = noise_variance(snr_db, es)
    symbols = np.asarray(symbols)
    if var == 0.0:
        return symbols.copy(), 0.0
    rng = np.random.default_rng(seed)
    shape = symbols.shape
    w = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    return symbols + w * math.sqrt(var / 2.0), var


def write_grid(path, h: np.ndarray, seed: int, binary: bool = False) -> None:
    """Dump a complex grid: header ``n_symbols n_subcarriers seed`` then
    row-major ``re im`` pairs."""
    h = np.asarray(h, dtype=complex)
    n_sym, n_sc = h.shape
    pairs = np.column_stack([h.real.ravel(), h.imag.ravel()])
    path = Path(path)
    if binary:
        with path.open("wb") as fh:
            fh.write(struct.pack("<qqq", n_sym, n_sc, seed))
            fh.write(pairs.astype("<f8").tobytes())
    else:
        with path.open("w") as fh:
            fh.write(f"{n_sym} {n_sc} {seed}\n")
            for re, im in pairs:
                fh.write(f"{float(re)!r} {float(im)!r}\n")


def read_grid(path, binary: bool = False) -> tuple[np.ndarray, int]:
    path = Path(path)
    if binary:
        raw = path.read_bytes()
        n_sym, n_sc, seed = struct.unpack("<qqq", raw[:24])
        pairs = np.frombuffer(raw[24:], dtype="<f8").reshape(-1, 2)
    else:
        with path.open() as fh:
            n_sym, n_sc, seed = (int(v) for v in fh.readline().split())
            pairs = np.loadtxt(fh, dtype=float, ndmin=2)
    h = (pairs[:, 0] + 1j * pairs[:, 1]).reshape(n_sym, n_sc)
    return h, seed
