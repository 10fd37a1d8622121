"""Result files: one CSV of all points plus gnuplot-ready column files."""
from __future__ import annotations

import csv
import io
import math
from pathlib import Path

from .runner import PERFECT, ExperimentResult, Record

CSV_HEADER = ["pattern", "method", "snr_db", "ber_total", "ber_floor",
              "ber_noise", "mse", "ci_halfwidth", "seeds",
              "bits", "errors", "low_confidence"]
RESULTS_NAME = "results.csv"

# column files: name -> (record field, series filter)
FIGURES = {
    "ber_noise.dat": ("ber_noise", lambda p, m: m != PERFECT),
    "ber_total.dat": ("ber_total", lambda p, m: True),
    "rectangular_total.dat": (
        "ber_total", lambda p, m: p == "Rectangular"
        and m in ("distance", "bilinear")),
}


def _num(x: float) -> str:
    return repr(float(x))


def results_csv(result: ExperimentResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in result.records:
        w.writerow([r.pattern, r.method, _num(r.snr_db), _num(r.ber_total),
                    _num(r.ber_floor), _num(r.ber_noise), _num(r.mse),
                    _num(r.ci_halfwidth), r.seeds, r.bits, _num(r.errors),
                    int(r.low_confidence)])
    return buf.getvalue()


def parse_results_csv(text: str) -> list[Record]:
    rows = list(csv.DictReader(io.StringIO(text)))
    return [Record(pattern=r["pattern"], method=r["method"],
                   snr_db=float(r["snr_db"]), ber_total=float(r["ber_total"]),
                   ber_floor=float(r["ber_floor"]),
                   ber_noise=float(r["ber_noise"]), mse=float(r["mse"]),
                   ci_halfwidth=float(r["ci_halfwidth"]),
                   seeds=int(r["seeds"]), bits=int(r["bits"]),
                   errors=float(r["errors"]))
            for r in rows]


def figure_columns(result: ExperimentResult, field: str, keep) -> str:
    series = []
    for r in result.records:
        key = (r.pattern, r.method)
        if keep(*key) and key not in series:
            series.append(key)
    snrs = sorted({r.snr_db for r in result.records})
    table = {(r.pattern, r.method, r.snr_db): getattr(r, field)
             for r in result.records}
    lines = ["# snr_db " + " ".join(f"{p}:{m}" for p, m in series)]
    for s in snrs:
        vals = [table.get((p, m, s), math.nan) for p, m in series]
        lines.append(" ".join([_num(s)] + [f"{v:.6e}" for v in vals]))
    return "\n".join(lines) + "\n"


def write_results(result: ExperimentResult, path) -> list[Path]:
    """Write ``results.csv`` and the figure column files into ``path``.

    If ``path`` ends in ``.csv`` it names the CSV itself and the column
    files go next to it.
    """
    path = Path(path)
    if path.suffix == ".csv":
        out_dir, csv_path = path.parent, path
    else:
        out_dir, csv_path = path, path / RESULTS_NAME
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path.write_text(results_csv(result))
    written = [csv_path]
    for name, (field, keep) in FIGURES.items():
        p = out_dir / name
        p.write_text(figure_columns(result, field, keep))
        written.append(p)
    return written


def read_results(path) -> list[Record]:
    path = Path(path)
    if path.is_dir():
        path = path / RESULTS_NAME
    return parse_results_csv(path.read_text())
