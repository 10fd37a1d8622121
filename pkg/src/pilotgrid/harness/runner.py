"""Monte-Carlo BER/MSE sweeps over pattern x interpolator x SNR.

Each seed is an independent job: it draws one channel, one bit stream and
one unit noise field, and reuses them for every pattern, method and SNR
(common random numbers keep the comparisons paired).  Per-seed tallies are
exact sums that are combined in seed order, so results do not depend on
the number of workers.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from ..channel import apply_awgn, synthesize_channel
from ..errors import ConfigurationError
from ..estimator import Interpolator, Method, build_interpolator, check_compatible
from ..grid import PatternKind, PilotPattern, make_grid_pattern, rasterize
from ..modem import build_frame, data_capacity, equalize_demap, get_constellation
from .config import ExperimentConfig

log = logging.getLogger(__name__)

PERFECT = "perfect-csi"
INF = math.inf
Z95 = 1.959963984540054
LOW_CONFIDENCE_ERRORS = 100

_CHANNEL, _BITS, _NOISE = 0, 1, 2


def _stream_seed(seed: int, stream: int) -> int:
    return int(np.random.SeedSequence([seed, stream]).generate_state(1)[0])


@dataclass(frozen=True)
class Record:
    pattern: str
    method: str
    snr_db: float
    ber_total: float
    ber_floor: float
    ber_noise: float
    mse: float
    ci_halfwidth: float
    seeds: int
    bits: int
    errors: float

    @property
    def low_confidence(self) -> bool:
        return self.errors < LOW_CONFIDENCE_ERRORS


@dataclass(frozen=True)
class ExperimentResult:
    records: tuple[Record, ...]
    skipped: tuple[tuple[str, str], ...] = ()

    def get(self, pattern, method, snr_db) -> Record:
        pattern = getattr(pattern, "value", pattern)
        method = getattr(method, "value", method)
        for r in self.records:
            if (r.pattern, r.method) == (pattern, method) and (
                    r.snr_db == snr_db):
                return r
        raise KeyError((pattern, method, snr_db))

    def series(self, pattern, method) -> list[Record]:
        pattern = getattr(pattern, "value", pattern)
        method = getattr(method, "value", method)
        return [r for r in self.records
                if (r.pattern, r.method) == (pattern, method)]


@dataclass(frozen=True, eq=False)
class _Context:
    cfg: ExperimentConfig
    patterns: tuple[PilotPattern, ...]
    pairs: tuple[tuple[int, Method, Interpolator], ...]
    snrs: tuple[float, ...]


def prepare_patterns(cfg: ExperimentConfig) -> dict[PatternKind, PilotPattern]:
    scale = cfg.scale
    return {k: rasterize(make_grid_pattern(k, cfg.pilot_density, scale),
                         cfg.frame) for k in cfg.patterns}


def _context(cfg: ExperimentConfig, pairs=None,
             snrs=None) -> tuple[_Context, tuple[tuple[str, str], ...]]:
    patterns = prepare_patterns(cfg)
    kinds = list(patterns)
    wanted = pairs or [(k, m) for k in cfg.patterns for m in cfg.methods]
    built, skipped = [], []
    for kind, method in wanted:
        kind, method = PatternKind.parse(kind), Method.parse(method)
        pat = patterns.get(kind)
        if pat is None:
            raise ConfigurationError(f"pattern {kind.value} not configured")
        try:
            check_compatible(pat, method)
        except ConfigurationError as exc:
            log.info("skipping %s + %s: %s", kind.value, method.value, exc)
            skipped.append((kind.value, method.value))
            continue
        built.append((kinds.index(kind), method, build_interpolator(pat, method)))
    snr_list = tuple(cfg.snr_db if snrs is None else snrs)
    ctx = _Context(cfg=cfg, patterns=tuple(patterns.values()),
                   pairs=tuple(built), snrs=snr_list)
    return ctx, tuple(skipped)


def _run_seed(ctx: _Context, seed: int) -> dict:
    """Error counts and squared-error sums for one seed, keyed by
    ``(pattern_index, method_name, snr)``."""
    cfg = ctx.cfg
    const = get_constellation(cfg.modulation)
    h = synthesize_channel(cfg.channel, cfg.frame,
                           _stream_seed(seed, _CHANNEL)).h
    need = max(data_capacity(p, const) for p in ctx.patterns)
    bits = np.random.default_rng(_stream_seed(seed, _BITS)).integers(
        0, 2, size=need, dtype=np.uint8)
    noise_seed = _stream_seed(seed, _NOISE)
    snrs = tuple(ctx.snrs) + ((INF,) if INF not in ctx.snrs else ())
    out = {}
    frames = {}
    for pi, pat in enumerate(ctx.patterns):
        frames[pi] = build_frame(bits, pat, cfg.frame, const, cfg.pilot_seed)
    for snr in snrs:
        for pi, pat in enumerate(ctx.patterns):
            fr = frames[pi]
            y, _ = apply_awgn(h * fr.grid, snr, 1.0, noise_seed)
            res = equalize_demap(y, h, fr, const)
            out[(pi, PERFECT, snr)] = (res.errors, res.n_bits, 0.0,
                                       int(fr.data_mask.sum()))
            ls = y[pat.pilot_cells[:, 0], pat.pilot_cells[:, 1]] / fr.pilot_values
            for pj, method, interp in ctx.pairs:
                if pj != pi:
                    continue
                est = interp.apply(ls)
                res = equalize_demap(y, est, fr, const)
                err = est.h_hat[fr.data_mask] - h[fr.data_mask]
                out[(pi, method.value, snr)] = (
                    res.errors, res.n_bits, float(np.sum(np.abs(err) ** 2)),
                    len(err))
    return out


def _halfwidth(p: float, n: int) -> float:
    return Z95 * math.sqrt(max(p * (1 - p), 0.0) / n) if n else 0.0


def _aggregate(ctx: _Context, per_seed: list[dict], n_seeds: int,
               skipped=()) -> ExperimentResult:
    totals: dict = {}
    for tally in per_seed:  # seed order
        for key in sorted(tally, key=lambda k: (k[0], k[1], k[2])):
            e, b, s, c = tally[key]
            t = totals.setdefault(key, [0.0, 0, 0.0, 0])
            t[0] += e
            t[1] += b
            t[2] += s
            t[3] += c
    records = []
    series = sorted({(k[0], k[1]) for k in totals},
                    key=lambda x: (x[0], x[1] != PERFECT, x[1]))
    for pi, method in series:
        e_f, b_f = totals[(pi, method, INF)][:2]
        floor = e_f / b_f
        for snr in ctx.snrs:
            e, b, s, c = totals[(pi, method, snr)]
            ber = e / b
            records.append(Record(
                pattern=ctx.patterns[pi].kind.value, method=method,
                snr_db=snr, ber_total=ber, ber_floor=floor,
                ber_noise=max(ber - floor, 0.0),
                mse=s / c if c else 0.0,
                ci_halfwidth=_halfwidth(ber, b), seeds=n_seeds,
                bits=b, errors=e))
    return ExperimentResult(records=tuple(records), skipped=tuple(skipped))


def _run(ctx: _Context, seeds: list[int], workers: int) -> list[dict]:
    if workers <= 1:
        return [_run_seed(ctx, s) for s in seeds]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_seed, [ctx] * len(seeds), seeds))


def run_experiment(cfg: ExperimentConfig, workers: int = 1, pairs=None,
                   snrs=None, seeds: list[int] | None = None) -> ExperimentResult:
    """Full chain for every configured (pattern, method, SNR, seed).

    ``pairs`` restricts the (pattern, method) combinations; incompatible
    ones are skipped with a log message.  Perfect-CSI rows are reported
    under the method name ``perfect-csi``.
    """
    ctx, skipped = _context(cfg, pairs, snrs)
    seed_list = cfg.seed_list if seeds is None else list(seeds)
    per_seed = _run(ctx, seed_list, workers)
    return _aggregate(ctx, per_seed, len(seed_list), skipped)


def ber_floor(cfg: ExperimentConfig, pattern, method,
              seeds: list[int] | None = None, workers: int = 1) -> float:
    """BER with noise disabled: the error left by interpolation alone."""
    pattern, method = PatternKind.parse(pattern), Method.parse(method)
    cfg = replace(cfg, patterns=(pattern,), methods=(method,))
    res = run_experiment(cfg, workers=workers, pairs=[(pattern, method)],
                         snrs=(INF,), seeds=seeds)
    if not res.series(pattern, method):
        raise ConfigurationError(
            f"{method.value} cannot run on {pattern.value}")
    return res.get(pattern, method, INF).ber_total


def simulate(cfg: ExperimentConfig, pattern, method, snr_db: float,
             seeds: list[int] | None = None, workers: int = 1) -> Record:
    """One (pattern, method, SNR) point."""
    pattern, method = PatternKind.parse(pattern), Method.parse(method)
    cfg = replace(cfg, patterns=(pattern,), methods=(method,))
    res = run_experiment(cfg, workers=workers, pairs=[(pattern, method)],
                         snrs=(snr_db,), seeds=seeds)
    if not res.series(pattern, method):
        raise ConfigurationError(
            f"{method.value} cannot run on {pattern.value}")
    return res.get(pattern, method, snr_db)
