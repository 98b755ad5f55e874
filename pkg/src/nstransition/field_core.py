"""Grids, discrete fields, flow parameters and the snapshot file format.

Arrays are indexed ``[j, i]`` (row ``j`` along y, column ``i`` along x) and
node ``(i, j)`` sits at ``(i * lx / nx, j * ly / ny)``.  The vertical
coordinate of the potential-energy term is the y axis.
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _fourier
from .errors import (
    CorruptFileError,
    DomainError,
    FieldValidationError,
    ShapeError,
    SnapshotFormatError,
)

MAGIC = b"NSSNAP01"
_HEADER = struct.Struct("<8s4I3d")


@dataclass(frozen=True)
class Grid:
    """Uniform doubly periodic lattice of ``nx`` by ``ny`` nodes."""

    nx: int
    ny: int
    lx: float = 2.0 * math.pi
    ly: float = 2.0 * math.pi

    def __post_init__(self):
        for name in ("nx", "ny"):
            n = getattr(self, name)
            if isinstance(n, bool) or not isinstance(n, (int, np.integer)):
                raise DomainError(f"{name} must be an integer, got {n!r}")
            if n < 8 or n % 2:
                raise DomainError(f"{name} must be even and >= 8, got {n}")
            object.__setattr__(self, name, int(n))
        for name in ("lx", "ly"):
            value = float(getattr(self, name))
            if not (math.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be positive and finite, got {value!r}")
            object.__setattr__(self, name, value)

    @property
    def shape(self):
        return (self.ny, self.nx)

    @property
    def dx(self):
        return self.lx / self.nx

    @property
    def dy(self):
        return self.ly / self.ny

    @property
    def cell_area(self):
        return self.dx * self.dy

    def coordinates(self):
        """Return node coordinate arrays ``(X, Y)`` of shape ``(ny, nx)``."""
        x = np.arange(self.nx) * self.dx
        y = np.arange(self.ny) * self.dy
        return np.meshgrid(x, y)


def _frozen_array(data, grid, name):
    arr = np.array(data, dtype=np.float64, copy=True)
    if arr.shape != grid.shape:
        raise FieldValidationError(
            f"{name} has shape {arr.shape}, grid expects {grid.shape}")
    if not np.all(np.isfinite(arr)):
        raise FieldValidationError(f"{name} contains non-finite values")
    arr.flags.writeable = False
    return arr


def _same_bits(a, b):
    return a.shape == b.shape and a.tobytes() == b.tobytes()


@dataclass(frozen=True, eq=False)
class VelocityField:
    grid: Grid
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "u", _frozen_array(self.u, self.grid, "u"))
        object.__setattr__(self, "v", _frozen_array(self.v, self.grid, "v"))

    def __eq__(self, other):
        if not isinstance(other, VelocityField):
            return NotImplemented
        return (self.grid == other.grid and _same_bits(self.u, other.u)
                and _same_bits(self.v, other.v))

    __hash__ = None

    def scaled(self, c):
        return VelocityField(self.grid, c * self.u, c * self.v)

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.shape), np.zeros(grid.shape))

    @classmethod
    def uniform(cls, grid, u0, v0=0.0):
        return cls(grid, np.full(grid.shape, float(u0)), np.full(grid.shape, float(v0)))


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: Grid
    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", _frozen_array(self.data, self.grid, "data"))

    def __eq__(self, other):
        if not isinstance(other, ScalarField):
            return NotImplemented
        return self.grid == other.grid and _same_bits(self.data, other.data)

    __hash__ = None

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros(grid.shape))


@dataclass(frozen=True)
class FlowParams:
    """Physical constants and characteristic scales.

    ``rho`` is carried for reporting; pressure is always stored as p/rho.
    """

    nu: float
    rho: float = 1.0
    g: float = 0.0
    u_char: float = 1.0
    l_char: float = 1.0

    def __post_init__(self):
        for name in ("nu", "rho", "u_char", "l_char"):
            value = float(getattr(self, name))
            if not (math.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be positive, got {value!r}")
            object.__setattr__(self, name, value)
        g = float(self.g)
        if not (math.isfinite(g) and g >= 0):
            raise DomainError(f"g must be >= 0, got {g!r}")
        object.__setattr__(self, "g", g)


@dataclass(frozen=True, eq=False)
class Snapshot:
    time: float
    velocity: VelocityField
    pressure: ScalarField = field(default=None)

    def __post_init__(self):
        t = float(self.time)
        if not math.isfinite(t):
            raise FieldValidationError(f"snapshot time must be finite, got {t!r}")
        object.__setattr__(self, "time", t)
        if self.pressure is None:
            object.__setattr__(self, "pressure", ScalarField.zeros(self.velocity.grid))
        if self.pressure.grid != self.velocity.grid:
            raise ShapeError("pressure and velocity live on different grids")

    @property
    def grid(self):
        return self.velocity.grid

    def __eq__(self, other):
        if not isinstance(other, Snapshot):
            return NotImplemented
        return (struct.pack("<d", self.time) == struct.pack("<d", other.time)
                and self.velocity == other.velocity and self.pressure == other.pressure)

    __hash__ = None


def taylor_green(grid, amplitude=1.0):
    """Taylor-Green vortex ``u = a sin(x) cos(y)``, ``v = -a cos(x) sin(y)``.

    On a non-square or non-2pi box the fundamental wavenumbers
    ``kx = 2pi/lx`` and ``ky = 2pi/ly`` replace 1, and ``v`` picks up the
    factor ``kx/ky`` so the field stays divergence free.
    """
    a = float(amplitude)
    if not math.isfinite(a):
        raise DomainError(f"amplitude must be finite, got {amplitude!r}")
    kx = 2.0 * math.pi / grid.lx
    ky = 2.0 * math.pi / grid.ly
    X, Y = grid.coordinates()
    u = a * np.sin(kx * X) * np.cos(ky * Y)
    v = -a * (kx / ky) * np.cos(kx * X) * np.sin(ky * Y)
    return VelocityField(grid, u, v)


def divergence(f):
    """Spectral ``du/dx + dv/dy`` at the nodes."""
    ux, _ = _fourier.gradient(f.u, f.grid)
    _, vy = _fourier.gradient(f.v, f.grid)
    return ScalarField(f.grid, ux + vy)


def snapshot_write(snapshot, path):
    """Write ``snapshot`` in the NSSNAP01 binary layout."""
    g = snapshot.grid
    header = _HEADER.pack(MAGIC, g.nx, g.ny, 0, 0, g.lx, g.ly, snapshot.time)
    payload = [np.ascontiguousarray(a, dtype="<f8").tobytes()
               for a in (snapshot.velocity.u, snapshot.velocity.v, snapshot.pressure.data)]
    with open(path, "wb") as fh:
        fh.write(header)
        for chunk in payload:
            fh.write(chunk)


def snapshot_read(path):
    """Read a snapshot written by :func:`snapshot_write`.

    Raises
    ------
    SnapshotFormatError
        Magic bytes missing or wrong.
    CorruptFileError
        Header dimensions disagree with the payload length.
    FieldValidationError
        Header or payload holds non-finite values.
    """
    raw = Path(path).read_bytes()
    if raw[:8] != MAGIC:
        raise SnapshotFormatError(f"{path}: bad magic {raw[:8]!r}")
    if len(raw) < _HEADER.size:
        raise CorruptFileError(f"{path}: truncated header")
    _, nx, ny, _r0, _r1, lx, ly, time = _HEADER.unpack_from(raw)
    expected = _HEADER.size + 3 * nx * ny * 8
    if len(raw) != expected:
        raise CorruptFileError(
            f"{path}: header says {nx}x{ny} ({expected} bytes) but file has {len(raw)}")
    if not all(math.isfinite(x) for x in (lx, ly, time)):
        raise FieldValidationError(f"{path}: non-finite header values")
    try:
        grid = Grid(nx, ny, lx, ly)
    except DomainError as exc:
        raise CorruptFileError(f"{path}: invalid grid in header: {exc}") from None
    data = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(3, ny, nx)
    data = data.astype(np.float64)
    if not np.all(np.isfinite(data)):
        raise FieldValidationError(f"{path}: payload contains non-finite values")
    return Snapshot(time, VelocityField(grid, data[0], data[1]), ScalarField(grid, data[2]))


def snapshot_from_csv(path, nx=None, ny=None, lx=2.0 * math.pi, ly=2.0 * math.pi, time=0.0):
    """Import a snapshot from CSV with columns ``x_index,y_index,u,v,p_over_rho``.

    Grid size is inferred from the largest indices unless given.  Every node
    must appear exactly once.
    """
    columns = ["x_index", "y_index", "u", "v", "p_over_rho"]
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != columns:
            raise SnapshotFormatError(f"{path}: expected header {','.join(columns)}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 5:
                raise CorruptFileError(f"{path}:{lineno}: expected 5 columns, got {len(row)}")
            try:
                rows.append((int(row[0]), int(row[1]),
                             float(row[2]), float(row[3]), float(row[4])))
            except ValueError as exc:
                raise CorruptFileError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise CorruptFileError(f"{path}: no data rows")
    idx = np.array([(r[0], r[1]) for r in rows])
    nx = int(idx[:, 0].max()) + 1 if nx is None else nx
    ny = int(idx[:, 1].max()) + 1 if ny is None else ny
    grid = Grid(nx, ny, lx, ly)
    if len(rows) != nx * ny or idx.min() < 0 or idx[:, 0].max() >= nx or idx[:, 1].max() >= ny:
        raise CorruptFileError(f"{path}: rows do not cover a {nx}x{ny} grid")
    values = np.full((3, ny, nx), np.nan)
    seen = np.zeros((ny, nx), dtype=bool)
    for i, j, u, v, p in rows:
        if seen[j, i]:
            raise CorruptFileError(f"{path}: duplicate node ({i}, {j})")
        seen[j, i] = True
        values[:, j, i] = (u, v, p)
    return Snapshot(time, VelocityField(grid, values[0], values[1]), ScalarField(grid, values[2]))
