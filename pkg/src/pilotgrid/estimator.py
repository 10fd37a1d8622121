"""Pilot LS estimates and their interpolation to data cells.

Every interpolator here is linear in the pilot estimates, so it is built
once per (pattern, method) as a sparse ``n_cells x n_pilots`` matrix and
then applied to any number of pilot vectors.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum, IntEnum

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from .errors import ConfigurationError
from .grid import PatternKind, PilotPattern, cell_basis
from .metrics import AbsorptionMap, absorption_map

COINCIDENCE_EPS = 1e-9
CELL_SET_SIZE = 7

# lattice-index steps from a Cell pilot to its six nearest neighbours,
# counter-clockwise starting at +e1
CELL_NEIGHBOUR_STEPS = ((1, 0), (0, 1), (-1, 1), (-1, 0), (0, -1), (1, -1))


class Method(str, Enum):
    DISTANCE = "distance"
    LINEAR_FREQUENCY = "linear-frequency"
    BILINEAR = "bilinear"
    LINEAR_AXIS = "linear-axis"

    @classmethod
    def parse(cls, name) -> "Method":
        if isinstance(name, Method):
            return name
        for m in cls:
            if m.value == str(name).strip().lower():
                return m
        raise ValueError(f"unknown interpolation method {name!r}")


class Provenance(IntEnum):
    PILOT_LS = 0
    DISTANCE = 1
    LINEAR = 2
    BILINEAR = 3


_METHOD_PROVENANCE = {
    Method.DISTANCE: Provenance.DISTANCE,
    Method.LINEAR_FREQUENCY: Provenance.LINEAR,
    Method.LINEAR_AXIS: Provenance.LINEAR,
    Method.BILINEAR: Provenance.BILINEAR,
}


@dataclass(frozen=True)
class PilotObservation:
    position: tuple[int, int]
    received: complex
    transmitted: complex


@dataclass(frozen=True, eq=False)
class CirEstimate:
    h_hat: np.ndarray
    provenance: np.ndarray


@dataclass(frozen=True, eq=False)
class DistanceWeights:
    weights: np.ndarray
    distances: np.ndarray


def ls_estimate(obs: PilotObservation) -> complex:
    """Least-squares channel value ``Y / X`` at one pilot."""
    if obs.transmitted == 0:
        raise ValueError("pilot symbol must be non-zero")
    return obs.received / obs.transmitted


def ls_estimates(received: np.ndarray, transmitted: np.ndarray) -> np.ndarray:
    transmitted = np.asarray(transmitted)
    if np.any(transmitted == 0):
        raise ValueError("pilot symbols must be non-zero")
    return np.asarray(received) / transmitted


def idw_weights(distances: np.ndarray, valid: np.ndarray | None = None,
                eps: float = COINCIDENCE_EPS) -> np.ndarray:
    """Normalized inverse-distance weights along the last axis.

    Rows with a distance below ``eps`` get an indicator on that entry.
    ``valid`` masks out missing contributors.
    """
    d = np.asarray(distances, dtype=float)
    if valid is None:
        valid = np.ones(d.shape, dtype=bool)
    hit = valid & (d < eps)
    with np.errstate(divide="ignore"):
        inv = np.where(valid & ~hit, 1.0 / np.where(d > 0, d, 1.0), 0.0)
    w = inv / inv.sum(axis=-1, keepdims=True).clip(min=np.finfo(float).tiny)
    any_hit = hit.any(axis=-1)
    if np.any(any_hit):
        first = np.argmax(hit, axis=-1)
        ind = np.zeros_like(w)
        np.put_along_axis(ind, first[..., None], 1.0, axis=-1)
        w = np.where(any_hit[..., None], ind, w)
    return w


def distance_weights(data_point, pilot_points) -> DistanceWeights:
    """Inverse-distance weights of each pilot for one data point."""
    pilots = np.asarray(pilot_points, dtype=float).reshape(-1, 2)
    if len(pilots) == 0:
        raise ValueError("need at least one pilot")
    if len(np.unique(pilots, axis=0)) != len(pilots):
        raise ValueError("pilot points must be pairwise distinct")
    d = np.linalg.norm(pilots - np.asarray(data_point, dtype=float), axis=1)
    return DistanceWeights(weights=idw_weights(d), distances=d)


def predicted_pilot_mse(weights, sigma_n2: float = 1.0):
    """Pilot-noise MSE after interpolation, ``sigma_n2 * mean(sum k_i^2)``.

    ``weights`` is an ``(n_samples, n_pilots)`` array or a sequence of
    :class:`DistanceWeights`.  Returns ``(mse, factor, reduction_db)``.
    """
    if isinstance(weights, (list, tuple)):
        if not weights:
            raise ValueError("no weight samples")
        factor = float(np.mean([np.sum(w.weights ** 2) for w in weights]))
    else:
        w = np.asarray(weights, dtype=float)
        if w.size == 0:
            raise ValueError("no weight samples")
        factor = float(np.mean(np.sum(w ** 2, axis=-1)))
    return sigma_n2 * factor, factor, 10.0 * math.log10(1.0 / factor)


def cell_pilot_set(side: float = 1.0) -> np.ndarray:
    """Centre pilot at the origin followed by its six Cell neighbours."""
    b = cell_basis(side)
    pts = [(0.0, 0.0)]
    for i, j in CELL_NEIGHBOUR_STEPS:
        pts.append(tuple(i * np.asarray(b.e1) + j * np.asarray(b.e2)))
    return np.array(pts)


def cell_absorption_samples(n: int, seed: int = 0,
                            side: float = 1.0) -> np.ndarray:
    """Uniform points in the absorption area of the centre Cell pilot."""
    pts = cell_pilot_set(side)
    tree = cKDTree(pts)
    rng = np.random.default_rng(seed)
    out, have = [], 0
    r = side  # the absorption area fits well inside a disc of radius `side`
    while have < n:
        cand = rng.uniform(-r, r, size=(2 * (n - have) + 1024, 2))
        _, idx = tree.query(cand)
        keep = cand[idx == 0]
        out.append(keep)
        have += len(keep)
    return np.concatenate(out)[:n]


def cell_weight_factor(n: int = 10 ** 6, seed: int = 0):
    """Monte-Carlo ``mean(sum k_i^2)`` of the 7-pilot distance filter over
    the centre pilot's absorption area; see :func:`predicted_pilot_mse`."""
    pilots = cell_pilot_set()
    samples = cell_absorption_samples(n, seed)
    d = np.linalg.norm(samples[:, None, :] - pilots[None], axis=2)
    return predicted_pilot_mse(idw_weights(d))


@dataclass(frozen=True)
class PilotSelection:
    center: int
    pilots: tuple[int, ...]
    positions: tuple[tuple[int, int], ...]
    edge: bool


def _cell_neighbour_table(pattern: PilotPattern) -> np.ndarray:
    """``(n_pilots, 7)`` indices of each pilot and its in-frame lattice
    neighbours, -1 where a neighbour falls outside the frame."""
    ids = pattern.lattice_ids
    lookup = {(int(i), int(j)): p for p, (i, j, _) in enumerate(ids)}
    table = np.full((len(ids), CELL_SET_SIZE), -1, dtype=int)
    table[:, 0] = np.arange(len(ids))
    for p, (i, j, _) in enumerate(ids):
        for c, (di, dj) in enumerate(CELL_NEIGHBOUR_STEPS, start=1):
            table[p, c] = lookup.get((int(i + di), int(j + dj)), -1)
    return table


def select_pilot_cell(data_cell, pattern: PilotPattern,
                      absorption: AbsorptionMap | None = None) -> PilotSelection:
    """The 7-pilot Cell set used to interpolate ``data_cell``.

    The centre is the pilot whose absorption area holds the cell; the other
    six are its lattice neighbours.  Near the frame edge fewer neighbours
    exist and the selection is flagged.
    """
    if pattern.kind is not PatternKind.CELL:
        raise ValueError("pilot-cell selection needs a Cell pattern")
    if absorption is None:
        absorption = absorption_map(pattern)
    n, k = int(data_cell[0]), int(data_cell[1])
    if absorption.pilot_mask[n, k]:
        raise ValueError(f"cell {(n, k)} is a pilot")
    centre = absorption.owner_of((n, k))
    row = _cell_neighbour_table(pattern)[centre]
    members = tuple(int(p) for p in row if p >= 0)
    cells = tuple((int(pattern.pilot_cells[p][0]), int(pattern.pilot_cells[p][1]))
                  for p in members)
    return PilotSelection(center=centre, pilots=members, positions=cells,
                          edge=len(members) < CELL_SET_SIZE)


@dataclass(frozen=True, eq=False)
class Interpolator:
    """Sparse linear map from pilot estimates to the full grid."""

    matrix: sp.csr_matrix
    provenance: np.ndarray
    edge_flags: np.ndarray
    method: Method
    shape: tuple[int, int]

    def apply(self, pilot_values: np.ndarray) -> CirEstimate:
        h = self.matrix @ np.asarray(pilot_values)
        return CirEstimate(h_hat=np.asarray(h).reshape(self.shape),
                           provenance=self.provenance)


def _hold_linear(nodes: np.ndarray, x: np.ndarray):
    """Bracketing node indices and weights for 1-D linear interpolation,
    holding the end values outside ``[nodes[0], nodes[-1]]``."""
    if len(nodes) == 1:
        z = np.zeros(len(x), dtype=int)
        return z, z, np.ones(len(x)), np.zeros(len(x))
    i1 = np.clip(np.searchsorted(nodes, x, side="right"), 1, len(nodes) - 1)
    i0 = i1 - 1
    t = (x - nodes[i0]) / (nodes[i1] - nodes[i0])
    t = np.clip(t, 0.0, 1.0)
    return i0, i1, 1.0 - t, t


def _line_stage(pattern: PilotPattern, axis: int):
    """Linear interpolation inside every line (fixed coordinate on
    ``1 - axis``) that carries pilots.  Returns a sparse matrix
    ``n_cells x n_pilots`` (rows of pilot-free lines are empty) and the
    sorted list of filled lines."""
    frame = pattern.frame
    cells = pattern.pilot_cells
    size = frame.shape[axis]
    rows, cols, vals = [], [], []
    lines = np.unique(cells[:, 1 - axis])
    x = np.arange(size)
    for line in lines:
        members = np.flatnonzero(cells[:, 1 - axis] == line)
        order = np.argsort(cells[members, axis])
        members = members[order]
        nodes = cells[members, axis].astype(float)
        i0, i1, w0, w1 = _hold_linear(nodes, x)
        if axis == 1:
            flat = line * frame.n_subcarriers + x
        else:
            flat = x * frame.n_subcarriers + line
        rows += [flat, flat]
        cols += [members[i0], members[i1]]
        vals += [w0, w1]
    m = sp.csr_matrix((np.concatenate(vals),
                       (np.concatenate(rows), np.concatenate(cols))),
                      shape=(frame.n_cells, len(cells)))
    return m, lines


def _across_stage(frame, lines: np.ndarray, axis: int) -> sp.csr_matrix:
    """Cell-to-cell map that fills every cell from the two nearest filled
    lines along ``1 - axis``."""
    other = frame.shape[1 - axis]
    i0, i1, w0, w1 = _hold_linear(lines.astype(float),
                                  np.arange(other, dtype=float))
    rows, cols, vals = [], [], []
    along = np.arange(frame.shape[axis])
    for pos in range(other):
        for src, w in ((lines[i0[pos]], w0[pos]), (lines[i1[pos]], w1[pos])):
            if axis == 1:
                dst = pos * frame.n_subcarriers + along
                s = src * frame.n_subcarriers + along
            else:
                dst = along * frame.n_subcarriers + pos
                s = along * frame.n_subcarriers + src
            rows.append(dst)
            cols.append(s)
            vals.append(np.full(len(along), w))
    return sp.csr_matrix((np.concatenate(vals),
                          (np.concatenate(rows), np.concatenate(cols))),
                         shape=(frame.n_cells, frame.n_cells))


def _is_tensor_grid(cells: np.ndarray) -> bool:
    rows = np.unique(cells[:, 0])
    cols = np.unique(cells[:, 1])
    return len(rows) * len(cols) == len(cells)


def _short_axis(pattern: PilotPattern) -> int:
    """Axis (0 time, 1 frequency) along which pilots sharing a line are
    closest together in the regularized plane."""
    best, best_gap = 1, math.inf
    scale = (pattern.scale.alpha_t, pattern.scale.alpha_f)
    cells = pattern.pilot_cells
    for axis in (1, 0):
        gaps = []
        for line in np.unique(cells[:, 1 - axis]):
            pos = np.sort(cells[cells[:, 1 - axis] == line, axis])
            gaps.extend(np.diff(pos))
        if gaps:
            g = float(np.median(gaps)) * scale[axis]
            if g < best_gap:
                best, best_gap = axis, g
    return best


def _distance_rows(pattern: PilotPattern, data_flat: np.ndarray):
    """Contributor indices (``-1`` = missing) for the distance filter."""
    frame = pattern.frame
    n = data_flat // frame.n_subcarriers
    k = data_flat % frame.n_subcarriers
    cells = pattern.pilot_cells
    if pattern.kind is PatternKind.CELL:
        amap = absorption_map(pattern)
        owner = amap.assignment[n, k]
        return _cell_neighbour_table(pattern)[owner]
    if pattern.kind is PatternKind.RECTANGULAR and _is_tensor_grid(cells):
        # the four corners of the enclosing pilot rectangle
        prow = np.unique(cells[:, 0])
        pcol = np.unique(cells[:, 1])
        lookup = -np.ones((frame.n_symbols, frame.n_subcarriers), dtype=int)
        lookup[cells[:, 0], cells[:, 1]] = np.arange(len(cells))
        out = []
        for nodes, x in ((prow, n), (pcol, k)):
            hi = np.clip(np.searchsorted(nodes, x, side="left"), 0, len(nodes) - 1)
            lo = np.clip(np.searchsorted(nodes, x, side="right") - 1, 0,
                         len(nodes) - 1)
            out.append((nodes[lo], nodes[hi]))
        (r0, r1), (c0, c1) = out
        corners = np.column_stack([lookup[r0, c0], lookup[r0, c1],
                                   lookup[r1, c0], lookup[r1, c1]])
        # collapse duplicates when the cell sits on a pilot row or column
        srt = np.sort(corners, axis=1)
        dup = np.zeros_like(srt, dtype=bool)
        dup[:, 1:] = srt[:, 1:] == srt[:, :-1]
        return np.where(dup, -1, srt)
    k_near = min(CELL_SET_SIZE, len(cells))
    q = pattern.regularized(np.column_stack([n, k]))
    _, idx = cKDTree(pattern.pilot_points()).query(q, k=k_near)
    return np.asarray(idx).reshape(len(q), -1)


def check_compatible(pattern: PilotPattern, method) -> None:
    """Raise :class:`ConfigurationError` if ``method`` cannot run on
    ``pattern``."""
    method = Method.parse(method)
    if not pattern.is_rasterized:
        raise ConfigurationError("pattern must be rasterized")
    if pattern.n_pilots == 0:
        raise ConfigurationError("pattern has no pilots")
    cells = pattern.pilot_cells
    frame = pattern.frame
    if method is Method.LINEAR_FREQUENCY:
        if len(np.unique(cells[:, 0])) != frame.n_symbols:
            raise ConfigurationError(
                "linear-frequency interpolation needs pilots on every symbol")
    elif method is Method.BILINEAR:
        if not _is_tensor_grid(cells):
            raise ConfigurationError(
                f"bilinear interpolation needs a rectangular pilot grid, "
                f"not {pattern.kind.value}")
    elif method is Method.LINEAR_AXIS:
        if len(cells) < 2:
            raise ConfigurationError("linear-axis interpolation needs 2 pilots")


def build_interpolator(pattern: PilotPattern, method) -> Interpolator:
    """Sparse interpolation operator for a rasterized pattern."""
    method = Method.parse(method)
    check_compatible(pattern, method)
    frame = pattern.frame
    cells = pattern.pilot_cells
    n_p = len(cells)
    pilot_flat = cells[:, 0] * frame.n_subcarriers + cells[:, 1]
    is_pilot = np.zeros(frame.n_cells, dtype=bool)
    is_pilot[pilot_flat] = True
    data_flat = np.flatnonzero(~is_pilot)
    edge = np.zeros(frame.n_cells, dtype=bool)

    if method is Method.DISTANCE:
        contrib = _distance_rows(pattern, data_flat)
        valid = contrib >= 0
        pts = pattern.pilot_points()
        q = pattern.regularized(np.column_stack(
            [data_flat // frame.n_subcarriers, data_flat % frame.n_subcarriers]))
        d = np.linalg.norm(pts[np.where(valid, contrib, 0)] - q[:, None, :],
                           axis=2)
        w = idw_weights(d, valid)
        if pattern.kind is PatternKind.CELL:
            edge[data_flat] = ~valid.all(axis=1)
        rows = np.repeat(data_flat, contrib.shape[1])
        keep = valid.ravel()
        m = sp.csr_matrix((w.ravel()[keep],
                           (rows[keep], contrib.ravel()[keep])),
                          shape=(frame.n_cells, n_p))
    elif method is Method.LINEAR_FREQUENCY:
        m, _ = _line_stage(pattern, axis=1)
    else:
        axis = 1 if method is Method.BILINEAR else _short_axis(pattern)
        stage, lines = _line_stage(pattern, axis)
        m = _across_stage(frame, lines, axis) @ stage

    # pilot rows are the LS values themselves
    m = sp.lil_matrix(m)
    m[pilot_flat, :] = 0
    m = sp.csr_matrix(m)
    m = m + sp.csr_matrix((np.ones(n_p), (pilot_flat, np.arange(n_p))),
                          shape=(frame.n_cells, n_p))
    m.sum_duplicates()
    prov = np.full(frame.n_cells, int(_METHOD_PROVENANCE[method]), dtype=np.int8)
    prov[pilot_flat] = int(Provenance.PILOT_LS)
    return Interpolator(matrix=sp.csr_matrix(m), provenance=prov.reshape(frame.shape),
                        edge_flags=edge.reshape(frame.shape), method=method,
                        shape=frame.shape)


def pilot_estimate_grid(pattern: PilotPattern, values: np.ndarray) -> CirEstimate:
    """A :class:`CirEstimate` holding LS values on pilots and NaN elsewhere."""
    frame = pattern.frame
    h = np.full(frame.shape, np.nan + 0j, dtype=complex)
    h[pattern.pilot_cells[:, 0], pattern.pilot_cells[:, 1]] = values
    prov = np.full(frame.shape, -1, dtype=np.int8)
    prov[pattern.pilot_cells[:, 0], pattern.pilot_cells[:, 1]] = int(
        Provenance.PILOT_LS)
    return CirEstimate(h_hat=h, provenance=prov)


def interpolate(estimates_at_pilots: CirEstimate, pattern: PilotPattern,
                method) -> CirEstimate:
    """Fill every data cell from the pilot LS values in
    ``estimates_at_pilots``."""
    values = estimates_at_pilots.h_hat[pattern.pilot_cells[:, 0],
                                       pattern.pilot_cells[:, 1]]
    if np.any(~np.isfinite(values)):
        raise ValueError("every pilot cell needs a finite LS estimate")
    return build_interpolator(pattern, method).apply(values)
