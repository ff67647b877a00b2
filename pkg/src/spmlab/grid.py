"""Periodic grid on the unit torus, fields, trajectories and discrete norms."""
import json
import os
import struct
import tempfile
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PeriodicGrid:
    """Uniform cell-centred grid on the N-torus of period 1 (N in {1, 2})."""

    dim: int
    cells: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if self.cells < 1:
            raise ValueError("cells must be positive")

    @property
    def dx(self):
        return 1.0 / self.cells

    @property
    def shape(self):
        return (self.cells,) * self.dim

    @property
    def size(self):
        return self.cells ** self.dim

    @property
    def cell_measure(self):
        return self.dx ** self.dim

    def axis_centers(self):
        return (np.arange(self.cells) + 0.5) * self.dx

    def centers(self):
        """Cell centres with shape ``(*shape, dim)``."""
        c = self.axis_centers()
        mesh = np.meshgrid(*([c] * self.dim), indexing="ij")
        return np.stack(mesh, axis=-1)

    def neighbor(self, index, axis=0, step=1):
        return (index + step) % self.cells


class Field:
    """One real value per cell of a :class:`PeriodicGrid`."""

    def __init__(self, grid, values):
        values = np.array(values, dtype=float)
        if values.size != grid.size:
            raise ValueError(f"expected {grid.size} values, got {values.size}")
        values = values.reshape(grid.shape)
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        values.setflags(write=False)
        self.grid = grid
        self.values = values

    @classmethod
    def from_function(cls, grid, func):
        """Sample ``func(x)`` at cell centres; ``x`` has shape ``(*shape, dim)``."""
        return cls(grid, func(grid.centers()))

    @classmethod
    def constant(cls, grid, c):
        return cls(grid, np.full(grid.shape, float(c)))

    def __add__(self, other):
        if isinstance(other, Field):
            _same_grid(self.grid, other.grid)
            return Field(self.grid, self.values + other.values)
        return Field(self.grid, self.values + other)

    def __sub__(self, other):
        if isinstance(other, Field):
            _same_grid(self.grid, other.grid)
            return Field(self.grid, self.values - other.values)
        return Field(self.grid, self.values - other)

    def mass(self):
        return float(np.sum(self.values) * self.grid.cell_measure)

    def __repr__(self):
        return f"Field(dim={self.grid.dim}, cells={self.grid.cells})"


def _same_grid(g1, g2):
    if g1 != g2:
        raise ValueError(f"grid mismatch: {g1} vs {g2}")


class Trajectory:
    """Time-indexed sequence of fields on one grid.

    ``values`` has shape ``(len(times), *grid.shape)``. ``diagnostics`` holds
    per-step solver records (mass trace, Newton iterations, extrema).
    """

    def __init__(self, grid, times, values, diagnostics=None):
        times = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=float)
        if times.ndim != 1 or times.size < 1:
            raise ValueError("times must be a nonempty 1D array")
        if np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")
        if values.shape != (times.size,) + grid.shape:
            raise ValueError(f"values shape {values.shape} does not match "
                             f"{(times.size,) + grid.shape}")
        self.grid = grid
        self.times = times
        self.values = values
        self.diagnostics = diagnostics if diagnostics is not None else {}

    def __len__(self):
        return self.times.size

    def state(self, j):
        return Field(self.grid, self.values[j])

    @property
    def states(self):
        return [self.state(j) for j in range(len(self))]

    @property
    def final(self):
        return self.state(-1)

    @property
    def horizon(self):
        return float(self.times[-1])


def laplacian_of_A(field, A):
    """Discrete Delta A(u) in periodic flux form.

    Face fluxes are ``(A(u_{i+1}) - A(u_i)) / dx`` and the cell value is the
    flux difference over ``dx``, so the output telescopes to zero mass.
    ``A`` is any vectorized callable.
    """
    grid = field.grid
    Av = np.asarray(A(field.values), dtype=float)
    out = np.zeros_like(Av)
    for axis in range(grid.dim):
        flux = (np.roll(Av, -1, axis=axis) - Av) / grid.dx
        out += (flux - np.roll(flux, 1, axis=axis)) / grid.dx
    return Field(grid, out)


def lp_norm(field, p):
    """(sum |u_i|^p dx^N)^(1/p); ``p = np.inf`` gives the max norm."""
    v = field.values if isinstance(field, Field) else np.asarray(field)
    if p == np.inf:
        return float(np.max(np.abs(v)))
    if p < 1:
        raise ValueError("p must be >= 1")
    meas = field.grid.cell_measure if isinstance(field, Field) else 1.0 / v.size
    if p == 1:
        return float(np.sum(np.abs(v)) * meas)
    # scale by the max so |v|^p neither underflows nor overflows
    top = float(np.max(np.abs(v))) if v.size else 0.0
    if top == 0.0:
        return 0.0
    return float(top * (np.sum((np.abs(v) / top) ** p) * meas) ** (1.0 / p))


def l1_path_distance(a, b):
    """Left-endpoint sum over steps of ||a_j - b_j||_{L^1} * (t_{j+1} - t_j)."""
    if a.grid != b.grid:
        raise ValueError(f"spatial grids differ: {a.grid} vs {b.grid}")
    if a.times.shape != b.times.shape or not np.array_equal(a.times, b.times):
        raise ValueError("time grids differ")
    if len(a) < 2:
        return 0.0
    dt = np.diff(a.times)
    diff = np.abs(a.values[:-1] - b.values[:-1])
    per_step = diff.reshape(len(a) - 1, -1).sum(axis=1) * a.grid.cell_measure
    return float(np.sum(per_step * dt))


# --- serialization ---------------------------------------------------------

def atomic_write(path, data, mode="w"):
    """Write to a temp file in the target directory, then rename."""
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def fmt(x):
    """17 significant digits, the CSV number format."""
    return format(float(x), ".17g")


def field_to_csv(field):
    lines = ["dim,cells_per_dim", f"{field.grid.dim},{field.grid.cells}"]
    lines.extend(fmt(v) for v in field.values.ravel(order="C"))
    return "\n".join(lines) + "\n"


def field_from_csv(text):
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if lines[0].strip() != "dim,cells_per_dim":
        raise ValueError("missing field CSV header")
    dim, cells = (int(s) for s in lines[1].split(","))
    grid = PeriodicGrid(dim, cells)
    return Field(grid, np.array([float(s) for s in lines[2:]]))


_BIN_HEADER = struct.Struct("<ii")


def field_to_bytes(field):
    return (_BIN_HEADER.pack(field.grid.dim, field.grid.cells)
            + field.values.astype("<f8").tobytes(order="C"))


def field_from_bytes(data):
    dim, cells = _BIN_HEADER.unpack_from(data)
    grid = PeriodicGrid(dim, cells)
    vals = np.frombuffer(data, dtype="<f8", offset=_BIN_HEADER.size)
    return Field(grid, vals.copy())


def write_field(path, field):
    path = os.fspath(path)
    if path.endswith(".csv"):
        atomic_write(path, field_to_csv(field))
    else:
        atomic_write(path, field_to_bytes(field), mode="wb")


def read_field(path):
    path = os.fspath(path)
    if path.endswith(".csv"):
        with open(path) as fh:
            return field_from_csv(fh.read())
    with open(path, "rb") as fh:
        return field_from_bytes(fh.read())


def write_trajectory(directory, traj, manifest=None, fmt_ext="bin"):
    """Stream states to ``state_XXXXX.<ext>`` plus a JSON manifest."""
    os.makedirs(directory, exist_ok=True)
    names = []
    for j in range(len(traj)):
        name = f"state_{j:05d}.{fmt_ext}"
        write_field(os.path.join(directory, name), traj.state(j))
        names.append(name)
    record = dict(manifest or {})
    record["times"] = [float(t) for t in traj.times]
    record["states"] = names
    record["diagnostics"] = _jsonable(traj.diagnostics)
    atomic_write(os.path.join(directory, "manifest.json"),
                 json.dumps(record, indent=2, sort_keys=True))


def read_trajectory(directory):
    with open(os.path.join(directory, "manifest.json")) as fh:
        record = json.load(fh)
    fields = [read_field(os.path.join(directory, n)) for n in record["states"]]
    grid = fields[0].grid
    vals = np.stack([f.values for f in fields])
    return Trajectory(grid, record["times"], vals, record.get("diagnostics"))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    return obj
