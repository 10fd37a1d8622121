"""Command-line entry point.

    pilotgrid metrics  [--out DIR] [--density D] [--resolution R]
    pilotgrid simulate --pattern Cell --method distance --snr 10 [--config F]
    pilotgrid sweep    [--config F] [--out DIR] [--seeds N] [--workers W]
    pilotgrid floor    --pattern Cell --method distance [--config F]
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from ..grid import TABLE_DENSITY, PatternKind
from ..metrics import format_metrics_table, metrics_csv, metrics_table
from .config import default_config, load_config
from .results import results_csv, write_results
from .runner import ber_floor, run_experiment, simulate


def _split(values):
    if not values:
        return None
    out = []
    for v in values:
        out += [x for x in v.split(",") if x.strip()]
    return out


def _snrs(values):
    vals = _split(values)
    return None if vals is None else tuple(float(v) for v in vals)


def _config(args):
    cfg = load_config(args.config) if args.config else default_config()
    if args.seeds is not None:
        cfg = cfg.with_overrides(seeds=args.seeds)
    if getattr(args, "pattern", None):
        cfg = cfg.with_overrides(
            patterns=tuple(PatternKind.parse(p) for p in _split(args.pattern)))
    snrs = _snrs(getattr(args, "snr", None))
    if snrs is not None:
        cfg = cfg.with_overrides(snr_db=snrs)
    for w in cfg.warnings:
        logging.warning(w)
    return cfg


def cmd_metrics(args) -> int:
    kinds = _split(args.pattern) or [k.value for k in PatternKind]
    rows = metrics_table(kinds, args.density, args.resolution)
    sys.stdout.write(format_metrics_table(rows))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "metrics.csv").write_text(metrics_csv(rows))
    return 0


def _one_pair(args):
    patterns, methods = _split(args.pattern), _split(args.method)
    if not patterns or not methods or len(patterns) > 1 or len(methods) > 1:
        raise ValueError("give exactly one --pattern and one --method")
    return patterns[0], methods[0]


def cmd_simulate(args) -> int:
    pattern, method = _one_pair(args)
    cfg = _config(args)
    snrs = _snrs(args.snr) or cfg.snr_db
    for snr in snrs:
        r = simulate(cfg, pattern, method, snr, workers=args.workers)
        print(f"{r.pattern} {r.method} snr={r.snr_db:g} dB "
              f"ber={r.ber_total:.4e} floor={r.ber_floor:.4e} "
              f"mse={r.mse:.4e} bits={r.bits}")
    return 0


def cmd_sweep(args) -> int:
    cfg = _config(args)
    pairs = None
    if args.method:
        methods = _split(args.method)
        pairs = [(p, m) for p in cfg.patterns for m in methods]
    result = run_experiment(cfg, workers=args.workers, pairs=pairs)
    out = Path(args.out or cfg.output)
    for p in write_results(result, out):
        print(p)
    return 0


def cmd_floor(args) -> int:
    pattern, method = _one_pair(args)
    cfg = _config(args)
    floor = ber_floor(cfg, pattern, method, workers=args.workers)
    print(f"{pattern} {method} ber_floor={floor:.6e}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pilotgrid",
                                description="OFDM pilot pattern workbench")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, sim=True):
        sp.add_argument("--config", help="YAML experiment file")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--pattern", action="append",
                        help="pattern kind(s), comma separated")
        if sim:
            sp.add_argument("--seeds", type=int)
            sp.add_argument("--method", action="append")
            sp.add_argument("--snr", action="append",
                            help="SNR list in dB, comma separated")
            sp.add_argument("--workers", type=int, default=1)

    m = sub.add_parser("metrics", help="maximum/average distance table")
    common(m, sim=False)
    m.add_argument("--density", type=float, default=TABLE_DENSITY)
    m.add_argument("--resolution", type=int, default=256)
    m.set_defaults(func=cmd_metrics)

    for name, func, text in (("simulate", cmd_simulate, "single point(s)"),
                             ("sweep", cmd_sweep, "full configured sweep"),
                             ("floor", cmd_floor, "noise-free BER floor")):
        s = sub.add_parser(name, help=text)
        common(s)
        s.set_defaults(func=func)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except Exception as exc:  # one-line diagnostic for any failure
        print(f"pilotgrid: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
