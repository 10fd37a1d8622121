"""Maximum/average pilot distance and absorption areas.

Distances are Euclidean in regularized coordinates.  Both criteria are
evaluated by dense sampling of one fundamental domain of the lattice,
which the periodic continuation turns into a sample of the whole plane.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .grid import (PatternKind, PilotPattern, TABLE_DENSITY, make_pattern,
                   projection_spacings)

DEFAULT_RESOLUTION = 256
MIN_RESOLUTION = 100
TIE_RTOL = 1e-9

CSV_HEADER = ["kind", "D_M", "D_E", "d_t", "d_f", "density", "resolution"]


@dataclass(frozen=True)
class PatternMetrics:
    kind: PatternKind
    d_max: float
    d_avg: float
    d_t_proj: float
    d_f_proj: float
    uniform_t: bool
    uniform_f: bool
    density: float
    resolution: int


def _lattice_distance_field(basis, samples: np.ndarray):
    """Distance from each sample to the nearest lattice point, plus a
    callable for re-evaluating at arbitrary points."""
    reach = 3.0 * max(math.hypot(*basis.e1), math.hypot(*basis.e2))
    lo = samples.min(axis=0) - reach
    hi = samples.max(axis=0) + reach
    pts, _ = basis.points_in_box(lo, hi)
    tree = cKDTree(pts)

    def field(q):
        return tree.query(q)[0]

    return field(samples), field


def _refine_max(field, seeds: np.ndarray, step: np.ndarray,
                rounds: int = 6, n: int = 9) -> float:
    """Local grid search around the best samples to pin down the maximum of
    a continuous field between sample points."""
    best = -np.inf
    offs = np.linspace(-1.0, 1.0, n)
    du, dv = np.meshgrid(offs, offs, indexing="ij")
    local = np.column_stack([du.ravel(), dv.ravel()])
    for seed in seeds:
        centre = seed.copy()
        span = step.copy()
        for _ in range(rounds):
            q = centre + local @ span
            d = field(q)
            i = int(np.argmax(d))
            centre = q[i]
            span = span / (n - 1) * 2.0
        best = max(best, float(d[i]))
    return best


def pattern_metrics(pattern: PilotPattern | PatternKind | str,
                    resolution: int = DEFAULT_RESOLUTION,
                    density: float | None = None) -> PatternMetrics:
    """D_M, D_E and projection spacings of a continuous pilot lattice.

    Parameters
    ----------
    pattern : PilotPattern or kind
        A pattern from :func:`make_pattern`, or a kind name together with
        ``density``.
    resolution : int
        Samples per lattice basis vector (per period for line lattices).
    """
    if not isinstance(pattern, PilotPattern):
        if density is None:
            raise ValueError("density is required when passing a kind")
        pattern = make_pattern(pattern, density)
    if resolution < MIN_RESOLUTION:
        raise ValueError(f"resolution must be >= {MIN_RESOLUTION}")
    basis = pattern.basis
    d_t, d_f, u_t, u_f = projection_spacings(basis)

    if basis.kind.is_line:
        step = math.hypot(*basis.e1)
        x = (np.arange(resolution) + 0.5) / resolution * step
        dist = np.minimum(x, step - x)
        d_avg = float(dist.mean())
        # refine around the best sample, as for 2-D lattices
        h = step / resolution
        xf = x[np.argmax(dist)] + np.linspace(-h, h, 2001)
        d_max = float(np.minimum(np.abs(xf), np.abs(step - xf)).max())
    else:
        if basis.cell_area <= 1e-15:
            raise ValueError("degenerate lattice")
        g = (np.arange(resolution) + 0.5) / resolution
        uu, vv = np.meshgrid(g, g, indexing="ij")
        uv = np.column_stack([uu.ravel(), vv.ravel()])
        samples = uv @ basis.matrix.T + np.asarray(basis.offsets[0])
        dist, field = _lattice_distance_field(basis, samples)
        d_avg = float(dist.mean())
        top = np.argsort(dist)[-16:]
        step = basis.matrix / resolution
        d_max = max(float(dist.max()),
                    _refine_max(field, samples[top], step))

    return PatternMetrics(kind=basis.kind, d_max=d_max, d_avg=d_avg,
                          d_t_proj=d_t, d_f_proj=d_f, uniform_t=u_t,
                          uniform_f=u_f, density=pattern.density,
                          resolution=resolution)


def metrics_table(kinds, density: float = TABLE_DENSITY,
                  resolution: int = DEFAULT_RESOLUTION) -> list[PatternMetrics]:
    """One :class:`PatternMetrics` row per kind, all at the same density."""
    if not density > 0:
        raise ValueError("density must be positive")
    return [pattern_metrics(make_pattern(PatternKind.parse(k), density),
                            resolution) for k in kinds]


def metrics_csv(rows: list[PatternMetrics]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow([r.kind.value, repr(r.d_max), repr(r.d_avg),
                    repr(r.d_t_proj), repr(r.d_f_proj), repr(r.density),
                    r.resolution])
    return buf.getvalue()


def format_metrics_table(rows: list[PatternMetrics]) -> str:
    lines = [f"{'kind':<14}{'D_M':>9}{'D_E':>9}{'d_t':>9}{'d_f':>9}"]
    for r in rows:
        flag = "" if (r.uniform_t and r.uniform_f) else "  (non-uniform)"
        lines.append(f"{r.kind.value:<14}{r.d_max:9.4f}{r.d_avg:9.4f}"
                     f"{r.d_t_proj:9.4f}{r.d_f_proj:9.4f}{flag}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True, eq=False)
class AbsorptionMap:
    """Owner pilot of every grid cell.

    ``assignment[n, k]`` indexes into ``pattern.pilot_cells``; pilot cells
    own themselves.  ``boundary_flags`` marks data cells equidistant from
    two or more nearest pilots.
    """

    assignment: np.ndarray
    boundary_flags: np.ndarray
    pilot_mask: np.ndarray

    def owner_of(self, cell) -> int:
        return int(self.assignment[cell[0], cell[1]])

    def ownership_counts(self, n_pilots: int) -> np.ndarray:
        data = ~self.pilot_mask
        return np.bincount(self.assignment[data], minlength=n_pilots)


def absorption_map(pattern: PilotPattern, frame=None) -> AbsorptionMap:
    """Assign each data cell to its nearest pilot in the regularized plane.

    Exact ties go to the pilot with the larger symbol index, then the
    larger subcarrier index, and the cell is flagged as a boundary cell.
    """
    if frame is not None and pattern.frame != frame:
        raise ValueError("pattern is rasterized on a different frame")
    if not pattern.is_rasterized:
        raise ValueError("pattern is not rasterized")
    if pattern.n_pilots == 0:
        raise ValueError("pattern has no pilots")
    frame = pattern.frame
    pilots = pattern.pilot_points()
    n, k = np.meshgrid(np.arange(frame.n_symbols),
                       np.arange(frame.n_subcarriers), indexing="ij")
    cells = np.column_stack([n.ravel(), k.ravel()])
    q = pattern.regularized(cells)
    kq = min(8, len(pilots))
    dist, idx = cKDTree(pilots).query(q, k=kq)
    if kq == 1:
        dist, idx = dist[:, None], idx[:, None]
    tied = dist <= dist[:, :1] * (1 + TIE_RTOL) + 1e-12
    # rank candidates by (time, frequency) so the tie rule is a max
    pc = pattern.pilot_cells
    rank = pc[:, 0].astype(np.int64) * (frame.n_subcarriers + 1) + pc[:, 1]
    cand_rank = np.where(tied, rank[idx], -1)
    owner = idx[np.arange(len(q)), np.argmax(cand_rank, axis=1)]
    boundary = tied.sum(axis=1) > 1
    mask = pattern.pilot_mask()
    flat_mask = mask.ravel()
    boundary &= ~flat_mask
    # pilots own their own cell
    self_idx = np.full(frame.n_cells, -1)
    self_idx[pc[:, 0] * frame.n_subcarriers + pc[:, 1]] = np.arange(len(pc))
    owner = np.where(flat_mask, self_idx, owner)
    return AbsorptionMap(assignment=owner.reshape(frame.shape),
                         boundary_flags=boundary.reshape(frame.shape),
                         pilot_mask=mask)
