"""Pilot lattices on the regularized time-frequency plane.

Coordinates are ``(t, f)`` pairs: the first axis is time (OFDM symbol
index times ``alpha_t``), the second is frequency (subcarrier index times
``alpha_f``).  A lattice is described continuously by a :class:`LatticeBasis`
and becomes a set of grid cells once :func:`rasterize` snaps it onto a
frame.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

from .errors import ConfigurationError

if TYPE_CHECKING:  # pragma: no cover
    from .channel import ChannelSpec

# Cell pattern geometry: apex angle and rotation from the time axis.
CELL_THETA = math.acos(3.0 / 5.0)
CELL_PHI = math.atan(1.0 / 3.0)

# Density used throughout the comparison table, in units of a^-2.
TABLE_DENSITY = 4.0 / (3.0 * math.sqrt(3.0))

MAX_PILOT_FRACTION = 0.5


class PatternKind(str, Enum):
    BLOCK = "Block"
    COMB = "Comb"
    RECTANGULAR = "Rectangular"
    HEXAGONAL = "Hexagonal"
    PARALLELOGRAM = "Parallelogram"
    DIAMOND = "Diamond"
    CELL = "Cell"

    @classmethod
    def parse(cls, name: "str | PatternKind") -> "PatternKind":
        if isinstance(name, PatternKind):
            return name
        for kind in cls:
            if kind.value.lower() == str(name).strip().lower():
                return kind
        raise ValueError(f"unknown pattern kind {name!r}; expected one of "
                         f"{', '.join(k.value for k in cls)}")

    @property
    def is_line(self) -> bool:
        return self in (PatternKind.BLOCK, PatternKind.COMB)


@dataclass(frozen=True)
class RegularizedScale:
    """Maps grid indices to regularized coordinates: ``t = alpha_t * n``,
    ``f = alpha_f * k``."""

    alpha_t: float = 1.0
    alpha_f: float = 1.0

    def __post_init__(self):
        if not (self.alpha_t > 0 and self.alpha_f > 0):
            raise ValueError("scale factors must be positive")

    @classmethod
    def from_moments(cls, w1_4: float, w2_4: float) -> "RegularizedScale":
        """Area-preserving scale that equalizes the fourth moments.

        ``w1_4`` is the Doppler fourth moment in (cycles/symbol)^4 and
        ``w2_4`` the delay fourth moment in (cycles/subcarrier)^4.  After
        scaling, both moments are equal, so a unit step in either
        direction carries the same channel variability.
        """
        ratio = 1.0 / eq1_scale_ratio(w1_4, w2_4)
        return cls(alpha_t=math.sqrt(ratio), alpha_f=1.0 / math.sqrt(ratio))

    @property
    def cell_area(self) -> float:
        return self.alpha_t * self.alpha_f


@dataclass(frozen=True)
class OfdmGridSpec:
    n_subcarriers: int = 128
    n_symbols: int = 64
    delta_f: float = 125e3
    n_fft: int = 128
    n_cp: int = 16
    n_tx: int = 1

    def __post_init__(self):
        if self.n_subcarriers <= 0 or self.n_symbols <= 0:
            raise ValueError("frame dimensions must be positive")
        if self.n_fft < self.n_subcarriers:
            raise ValueError("n_fft must be >= n_subcarriers")
        if self.n_cp < 0:
            raise ValueError("n_cp must be >= 0")
        if self.n_tx < 1:
            raise ValueError("n_tx must be >= 1")
        if self.delta_f <= 0:
            raise ValueError("delta_f must be positive")

    @property
    def t_useful(self) -> float:
        """Symbol duration without the guard interval, ``1/delta_f``."""
        return 1.0 / self.delta_f

    @property
    def t_spl(self) -> float:
        return self.t_useful / self.n_fft

    @property
    def t_sym(self) -> float:
        return (self.n_fft + self.n_cp) * self.t_spl

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_symbols, self.n_subcarriers)

    @property
    def n_cells(self) -> int:
        return self.n_symbols * self.n_subcarriers


@dataclass(frozen=True)
class LatticeBasis:
    """Basis vectors and coset offsets of a pilot lattice.

    For 2-D kinds the pilot set is ``{i*e1 + j*e2 + o : o in offsets}``.
    Block and Comb are line lattices: ``e1`` is the step between lines and
    ``e2`` is the unit direction along which each line is fully occupied.
    """

    e1: tuple[float, float]
    e2: tuple[float, float]
    kind: PatternKind
    offsets: tuple[tuple[float, float], ...] = ((0.0, 0.0),)
    rotation: float = 0.0

    def __post_init__(self):
        if not self.kind.is_line and self.cell_area <= 1e-15:
            raise ValueError("degenerate lattice: basis vectors are parallel")

    @property
    def matrix(self) -> np.ndarray:
        """Basis vectors as columns."""
        return np.array([self.e1, self.e2], dtype=float).T

    @property
    def cell_area(self) -> float:
        return abs(self.e1[0] * self.e2[1] - self.e1[1] * self.e2[0])

    @property
    def density(self) -> float:
        """Points per unit area (2-D kinds) or lines per unit length."""
        if self.kind.is_line:
            return 1.0 / math.hypot(*self.e1)
        return len(self.offsets) / self.cell_area

    def points_in_box(self, lo: Sequence[float], hi: Sequence[float]):
        """Lattice points inside the axis-aligned box ``[lo, hi]``.

        Returns ``(points, ids)`` where ``ids[:, :2]`` are the integer
        lattice coordinates and ``ids[:, 2]`` the coset index.
        """
        if self.kind.is_line:
            raise ValueError("line lattices have no discrete point set")
        lo = np.asarray(lo, float)
        hi = np.asarray(hi, float)
        inv = np.linalg.inv(self.matrix)
        corners = np.array([[lo[0], lo[1]], [lo[0], hi[1]],
                            [hi[0], lo[1]], [hi[0], hi[1]]])
        pts, ids = [], []
        for c, off in enumerate(self.offsets):
            coeff = (corners - np.asarray(off)) @ inv.T
            i0, j0 = np.floor(coeff.min(axis=0)).astype(int) - 1
            i1, j1 = np.ceil(coeff.max(axis=0)).astype(int) + 1
            ii, jj = np.meshgrid(np.arange(i0, i1 + 1), np.arange(j0, j1 + 1),
                                 indexing="ij")
            ij = np.stack([ii.ravel(), jj.ravel()], axis=1)
            p = ij @ self.matrix.T + np.asarray(off)
            keep = np.all((p >= lo) & (p <= hi), axis=1)
            pts.append(p[keep])
            ids.append(np.column_stack([ij[keep], np.full(keep.sum(), c)]))
        return np.concatenate(pts), np.concatenate(ids).astype(int)


@dataclass(frozen=True, eq=False)
class PilotPattern:
    """A pilot lattice, optionally rasterized onto a frame.

    ``density`` is in pilots per unit regularized area (lines per unit
    length for Block/Comb); ``target_density`` is the equivalent fraction
    of grid cells.  ``pilot_cells`` is an ``(N, 2)`` integer array of
    ``(symbol, subcarrier)`` pairs sorted lexicographically.
    """

    basis: LatticeBasis
    scale: RegularizedScale
    density: float
    target_density: float
    pilot_cells: np.ndarray | None = None
    lattice_ids: np.ndarray | None = None
    achieved_density: float | None = None
    frame: OfdmGridSpec | None = None
    collisions: int = 0
    metadata: dict = field(default_factory=dict)

    @property
    def kind(self) -> PatternKind:
        return self.basis.kind

    @property
    def is_rasterized(self) -> bool:
        return self.pilot_cells is not None

    @property
    def collision_warning(self) -> bool:
        return self.collisions > 0

    @property
    def density_error(self) -> float:
        if self.achieved_density is None:
            raise ValueError("pattern is not rasterized")
        return abs(self.achieved_density - self.target_density)

    @property
    def n_pilots(self) -> int:
        return 0 if self.pilot_cells is None else len(self.pilot_cells)

    def pilot_mask(self) -> np.ndarray:
        self._require_raster()
        mask = np.zeros(self.frame.shape, dtype=bool)
        mask[self.pilot_cells[:, 0], self.pilot_cells[:, 1]] = True
        return mask

    def regularized(self, cells: np.ndarray) -> np.ndarray:
        """Regularized coordinates of integer grid cells."""
        cells = np.asarray(cells, dtype=float)
        return cells * np.array([self.scale.alpha_t, self.scale.alpha_f])

    def pilot_points(self) -> np.ndarray:
        self._require_raster()
        return self.regularized(self.pilot_cells)

    def _require_raster(self):
        if self.pilot_cells is None or self.frame is None:
            raise ValueError("pattern is not rasterized")


def _rotate(v, angle: float) -> tuple[float, float]:
    c, s = math.cos(angle), math.sin(angle)
    return (c * v[0] - s * v[1], s * v[0] + c * v[1])


def cell_basis(side: float) -> LatticeBasis:
    """Basis of the Cell lattice with equal sides of length ``side``.

    The two sides enclose the angle ``arccos(3/5)`` and the first side is
    tilted by ``arctan(1/3)`` from the time axis; with these angles the
    projections of all lattice points on either axis are evenly spaced by
    ``side / sqrt(10)``.
    """
    if not side > 0:
        raise ValueError("side length must be positive")
    e1 = (side * math.cos(CELL_PHI), side * math.sin(CELL_PHI))
    e2 = (side * math.cos(CELL_THETA + CELL_PHI),
          side * math.sin(CELL_THETA + CELL_PHI))
    return LatticeBasis(e1=e1, e2=e2, kind=PatternKind.CELL,
                        rotation=CELL_PHI)


def _basis_for(kind: PatternKind, density: float) -> LatticeBasis:
    if kind is PatternKind.CELL:
        return cell_basis(1.0 / math.sqrt(density * math.sin(CELL_THETA)))
    if kind is PatternKind.RECTANGULAR:
        s = 1.0 / math.sqrt(density)
        return LatticeBasis((s, 0.0), (0.0, s), kind)
    if kind is PatternKind.COMB:
        # columns of pilots on every symbol, spaced along frequency
        return LatticeBasis((0.0, 1.0 / density), (1.0, 0.0), kind)
    if kind is PatternKind.BLOCK:
        return LatticeBasis((1.0 / density, 0.0), (0.0, 1.0), kind)
    if kind is PatternKind.DIAMOND:
        # centered rectangular, rows offset by half the in-row spacing;
        # aspect sqrt(3) makes every triangle equilateral
        side = math.sqrt(2.0 / (math.sqrt(3.0) * density))
        return LatticeBasis((side * math.sqrt(3.0) / 2.0, side / 2.0),
                            (0.0, side), kind)
    if kind is PatternKind.PARALLELOGRAM:
        # staggered rows: each pilot row shifted by a third of the spacing
        d = 1.0 / math.sqrt(density)
        return LatticeBasis((d, d / 3.0), (d, -2.0 * d / 3.0), kind)
    if kind is PatternKind.HEXAGONAL:
        # honeycomb with edge a: two cosets of a triangular lattice
        a = math.sqrt(4.0 / (3.0 * math.sqrt(3.0) * density))
        r3 = math.sqrt(3.0)
        return LatticeBasis((r3 * a, 0.0), (r3 * a / 2.0, 1.5 * a), kind,
                            offsets=((0.0, 0.0), (r3 * a / 2.0, a / 2.0)))
    raise ValueError(f"unknown pattern kind {kind!r}")  # pragma: no cover


def rotate_basis(basis: LatticeBasis, angle: float) -> LatticeBasis:
    """Rigidly rotate a 2-D lattice about the origin."""
    if basis.kind.is_line:
        if angle % (2 * math.pi):
            raise ValueError("line lattices cannot be rotated")
        return basis
    return replace(basis,
                   e1=_rotate(basis.e1, angle),
                   e2=_rotate(basis.e2, angle),
                   offsets=tuple(_rotate(o, angle) for o in basis.offsets),
                   rotation=basis.rotation + angle)


def grid_density(kind: PatternKind, density: float,
                 scale: RegularizedScale) -> float:
    """Fraction of grid cells that a lattice of the given density occupies."""
    kind = PatternKind.parse(kind)
    if kind is PatternKind.COMB:
        return density * scale.alpha_f
    if kind is PatternKind.BLOCK:
        return density * scale.alpha_t
    return density * scale.cell_area


def make_pattern(kind, density: float,
                 scale: RegularizedScale | None = None,
                 rotation: float = 0.0,
                 offset: tuple[float, float] = (0.0, 0.0)) -> PilotPattern:
    """Continuous pilot lattice of the requested kind and density.

    Parameters
    ----------
    kind : PatternKind or str
        One of the seven pattern kinds.
    density : float
        Pilots per unit regularized area; for Block and Comb, lines per
        unit length along the spaced axis.
    scale : RegularizedScale, optional
        Grid-to-plane scale, identity by default.
    rotation : float
        Extra rigid rotation in radians (not allowed for Block/Comb).
    offset : tuple
        Translation of the whole lattice in regularized units.
    """
    kind = PatternKind.parse(kind)
    if not density > 0:
        raise ValueError("density must be positive")
    scale = scale or RegularizedScale()
    basis = _basis_for(kind, density)
    if rotation:
        basis = rotate_basis(basis, rotation)
    if any(offset):
        basis = replace(basis, offsets=tuple(
            (o[0] + offset[0], o[1] + offset[1]) for o in basis.offsets))
    meta = {"rotation_rad": rotation}
    if kind is PatternKind.CELL:
        meta["side"] = math.hypot(*basis.e1)
    return PilotPattern(basis=basis, scale=scale, density=density,
                        target_density=grid_density(kind, density, scale),
                        metadata=meta)


def make_grid_pattern(kind, target_density: float,
                      scale: RegularizedScale | None = None,
                      **kwargs) -> PilotPattern:
    """Like :func:`make_pattern` but with the density given as the fraction
    of grid cells that should carry pilots."""
    kind = PatternKind.parse(kind)
    scale = scale or RegularizedScale()
    if not target_density > 0:
        raise ValueError("density must be positive")
    unit = grid_density(kind, 1.0, scale)
    return make_pattern(kind, target_density / unit, scale, **kwargs)


def _round_half_away(x: np.ndarray) -> np.ndarray:
    return (np.sign(x) * np.floor(np.abs(x) + 0.5)).astype(int)


def rasterize(pattern: PilotPattern, frame: OfdmGridSpec) -> PilotPattern:
    """Snap every lattice point inside the frame to its nearest grid cell.

    Points landing on an already occupied cell are merged and counted in
    ``collisions``.  Raises :class:`ConfigurationError` when more than half
    the frame would be pilots.
    """
    basis, scale = pattern.basis, pattern.scale
    at, af = scale.alpha_t, scale.alpha_f
    lo = np.array([-0.5 * at, -0.5 * af])
    hi = np.array([(frame.n_symbols - 0.5) * at,
                   (frame.n_subcarriers - 0.5) * af])

    if basis.kind.is_line:
        step = math.hypot(*basis.e1)
        axis = 1 if basis.kind is PatternKind.COMB else 0
        along = frame.n_subcarriers if axis == 1 else frame.n_symbols
        alpha = af if axis == 1 else at
        o = basis.offsets[0][axis]
        j0 = math.floor((lo[axis] - o) / step) - 1
        j1 = math.ceil((hi[axis] - o) / step) + 1
        j = np.arange(j0, j1 + 1)
        pos = o + j * step
        pos_ok = (pos >= lo[axis]) & (pos <= hi[axis])
        j, pos = j[pos_ok], pos[pos_ok]
        idx = _round_half_away(pos / alpha)
        ok = (idx >= 0) & (idx < along)
        j, idx = j[ok], idx[ok]
        other = frame.n_symbols if axis == 1 else frame.n_subcarriers
        lines, first = np.unique(idx, return_index=True)
        n_points = len(idx) * other
        rows = np.repeat(lines, other)
        cols = np.tile(np.arange(other), len(lines))
        cells = (np.column_stack([cols, rows]) if axis == 1
                 else np.column_stack([rows, cols]))
        line_ids = np.repeat(j[first], other)
        along_ids = np.tile(np.arange(other), len(lines))
        ids = np.column_stack([line_ids, along_ids, np.zeros_like(line_ids)])
    else:
        pts, ids = basis.points_in_box(lo, hi)
        n_points = len(pts)
        cells = np.column_stack([_round_half_away(pts[:, 0] / at),
                                 _round_half_away(pts[:, 1] / af)])
        ok = ((cells[:, 0] >= 0) & (cells[:, 0] < frame.n_symbols)
              & (cells[:, 1] >= 0) & (cells[:, 1] < frame.n_subcarriers))
        cells, ids = cells[ok], ids[ok]
        n_points = len(cells)
        # keep the first lattice point (in id order) that claims each cell
        order = np.lexsort((ids[:, 2], ids[:, 1], ids[:, 0]))
        cells, ids = cells[order], ids[order]
        _, first = np.unique(cells, axis=0, return_index=True)
        cells, ids = cells[first], ids[first]

    order = np.lexsort((cells[:, 1], cells[:, 0]))
    cells, ids = cells[order], ids[order]
    achieved = len(cells) / frame.n_cells
    if achieved > MAX_PILOT_FRACTION:
        raise ConfigurationError(
            f"pilot overhead {achieved:.1%} exceeds {MAX_PILOT_FRACTION:.0%}")
    return replace(pattern, pilot_cells=cells.astype(int),
                   lattice_ids=ids.astype(int), achieved_density=achieved,
                   frame=frame, collisions=int(n_points - len(cells)))


def projection_spacings(basis: LatticeBasis, window: float | None = None):
    """Gaps between the distinct time and frequency projections of a lattice.

    Returns ``(d_t, d_f, uniform_t, uniform_f)``.  ``d_t``/``d_f`` are the
    largest gaps; a direction is uniform when all gaps agree within 1%.
    A fully occupied line direction reports a spacing of 0.
    """
    if basis.kind.is_line:
        step = math.hypot(*basis.e1)
        if basis.kind is PatternKind.COMB:
            return 0.0, step, True, True
        return step, 0.0, True, True
    if window is None:
        window = 24.0 * max(math.hypot(*basis.e1), math.hypot(*basis.e2))
    pts, _ = basis.points_in_box((-window, -window), (window, window))
    out = []
    for axis in (0, 1):
        # only the central half of the window sees every projection value
        proj = pts[:, axis][np.abs(pts[:, 1 - axis]) <= window]
        proj = proj[np.abs(proj) <= window / 2]
        vals = np.unique(np.round(proj, 9))
        gaps = np.diff(vals)
        gaps = gaps[gaps > 1e-9]
        g_max = float(gaps.max())
        out.append((g_max, bool((g_max - gaps.min()) <= 0.01 * g_max)))
    (d_t, u_t), (d_f, u_f) = out
    return d_t, d_f, u_t, u_f


def eq1_scale_ratio(w1_4: float, w2_4: float) -> float:
    """Time/frequency pilot spacing ratio that balances the fourth moments:
    ``w1 * d_t**4 == w2 * d_f**4``."""
    if not (w1_4 > 0 and w2_4 > 0):
        raise ValueError("fourth moments must be positive")
    return (w2_4 / w1_4) ** 0.25


@dataclass(frozen=True)
class SamplingReport:
    doppler_product: float
    doppler_margin: float
    delay_product: float
    delay_margin: float

    @property
    def doppler_ok(self) -> bool:
        return self.doppler_margin >= 0

    @property
    def delay_ok(self) -> bool:
        return self.delay_margin >= 0

    @property
    def ok(self) -> bool:
        return self.doppler_ok and self.delay_ok

    def warnings(self) -> list[str]:
        msgs = []
        if not self.doppler_ok:
            msgs.append(f"time spacing violates f_max*T_sym*d_t <= 1/2 "
                        f"(value {self.doppler_product:.4g})")
        if not self.delay_ok:
            msgs.append(f"frequency spacing violates d_f*N_T*tau_max/T <= 1 "
                        f"(value {self.delay_product:.4g})")
        return msgs


def eq2_validate(channel: "ChannelSpec", frame: OfdmGridSpec,
                 d_t: float, d_f: float) -> SamplingReport:
    """Check the pilot sampling constraints in time and frequency.

    ``d_t`` is in OFDM symbols, ``d_f`` in subcarriers.  ``tau_max`` of the
    channel is in samples, so ``tau_max / T`` is ``tau_max / n_fft``.
    """
    if not (d_t > 0 and d_f > 0):
        raise ValueError("pilot spacings must be positive")
    doppler = channel.f_max_normalized * d_t
    delay = d_f * frame.n_tx * channel.tau_max / frame.n_fft
    return SamplingReport(doppler, 0.5 - doppler, delay, 1.0 - delay)


def pattern_spacing_cells(pattern: PilotPattern) -> tuple[float, float]:
    """Largest gaps between pilot-bearing symbols and subcarriers, in grid
    units, for a rasterized pattern."""
    pattern._require_raster()
    out = []
    for axis, size in ((0, pattern.frame.n_symbols),
                       (1, pattern.frame.n_subcarriers)):
        vals = np.unique(pattern.pilot_cells[:, axis])
        out.append(float(np.diff(vals).max()) if len(vals) > 1 else float(size))
    return out[0], out[1]


def format_pattern(pattern: PilotPattern) -> str:
    """Plain-text export: a ``#`` header line, then ``symbol,subcarrier``
    per pilot."""
    pattern._require_raster()
    b = pattern.basis
    offs = ";".join(f"{o[0]:.12g}:{o[1]:.12g}" for o in b.offsets)
    head = (f"# kind={b.kind.value} density={pattern.density:.12g} "
            f"target_density={pattern.target_density:.12g} "
            f"achieved_density={pattern.achieved_density:.12g} "
            f"e1={b.e1[0]:.12g}:{b.e1[1]:.12g} e2={b.e2[0]:.12g}:{b.e2[1]:.12g} "
            f"offsets={offs} alpha_t={pattern.scale.alpha_t:.12g} "
            f"alpha_f={pattern.scale.alpha_f:.12g}")
    lines = [head] + [f"{n},{k}" for n, k in pattern.pilot_cells]
    return "\n".join(lines) + "\n"


def parse_pattern_text(text: str) -> tuple[dict, np.ndarray]:
    """Inverse of :func:`format_pattern`: header fields and pilot cells."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith("#"):
        raise ValueError("missing pattern header line")
    header = dict(tok.split("=", 1) for tok in lines[0][1:].split())
    cells = np.array([[int(v) for v in ln.split(",")] for ln in lines[1:]],
                     dtype=int).reshape(-1, 2)
    return header, cells


def all_kinds() -> list[PatternKind]:
    return list(PatternKind)


def parse_kinds(names: Iterable[str]) -> list[PatternKind]:
    return [PatternKind.parse(n) for n in names]
