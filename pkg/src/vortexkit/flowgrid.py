"""Time-resolved structured-grid velocity fields and the FGRD file format.

Velocity arrays are laid out ``(t, i, j, k)`` with ``k`` varying fastest,
the same order used on disk.

FGRD layout (little-endian; ``u32`` integers, ``f64`` reals)::

    b"FGRD" | version | I | J | K | Tplus1 | dt
    | x[I] | y[J] | z[K] | u[Tplus1*I*J*K] | v[...] | w[...]
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from os import PathLike
from pathlib import Path

import numpy as np

from .errors import FormatError, LengthError, ValidationError

MAGIC = b"FGRD"
VERSION = 1
_HEADER = struct.Struct("<4sIIIIId")
_F64 = np.dtype("<f8")


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=np.float64, copy=True)
    arr.setflags(write=False)
    return arr


def _first_nonfinite(a: np.ndarray):
    bad = np.argwhere(~np.isfinite(a))
    return tuple(int(v) for v in bad[0]) if len(bad) else None


@dataclass(frozen=True, eq=False)
class FlowGrid:
    """Velocity samples ``u, v, w`` of shape ``(T+1, I, J, K)`` on axes ``x, y, z``.

    Arrays are copied on construction and made read-only.
    """

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    dt: float
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        for name in ("x", "y", "z", "u", "v", "w"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        object.__setattr__(self, "dt", float(self.dt))
        self.validate()

    def validate(self) -> None:
        for name in ("x", "y", "z"):
            ax = getattr(self, name)
            if ax.ndim != 1 or ax.size < 1:
                raise ValidationError(f"{name} axis must be a non-empty 1-D array")
            if not np.all(np.isfinite(ax)):
                raise ValidationError(
                    f"non-finite value in {name} axis at index {_first_nonfinite(ax)}"
                )
            if np.any(np.diff(ax) <= 0):
                raise ValidationError(f"{name} axis not strictly increasing")
        if not (np.isfinite(self.dt) and self.dt > 0):
            raise ValidationError(f"dt must be finite and > 0, got {self.dt!r}")
        dims = (self.x.size, self.y.size, self.z.size)
        for name in ("u", "v", "w"):
            arr = getattr(self, name)
            if arr.ndim != 4 or arr.shape[1:] != dims or arr.shape[0] < 1:
                raise ValidationError(
                    f"{name} has shape {arr.shape}, expected (T+1, {dims[0]}, {dims[1]}, {dims[2]})"
                )
            bad = _first_nonfinite(arr)
            if bad is not None:
                raise ValidationError(f"non-finite value in {name} at index (t,i,j,k)={bad}")
        if not (self.u.shape == self.v.shape == self.w.shape):
            raise ValidationError("u, v, w shapes differ")

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.u.shape[1], self.u.shape[2], self.u.shape[3]

    @property
    def timesteps(self) -> int:
        """Number of stored time levels, ``T + 1``."""
        return self.u.shape[0]

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.timesteps) * self.dt

    def mesh(self):
        """Coordinate arrays of shape ``(I, J, K)``."""
        return np.meshgrid(self.x, self.y, self.z, indexing="ij")

    def replace(self, **changes) -> "FlowGrid":
        kw = dict(x=self.x, y=self.y, z=self.z, dt=self.dt, u=self.u, v=self.v, w=self.w)
        kw.update(changes)
        return FlowGrid(**kw)

    def bit_equal(self, other: "FlowGrid") -> bool:
        if np.float64(self.dt).tobytes() != np.float64(other.dt).tobytes():
            return False
        for name in ("x", "y", "z", "u", "v", "w"):
            a, b = getattr(self, name), getattr(other, name)
            if a.shape != b.shape or a.tobytes() != b.tobytes():
                return False
        return True


@dataclass(frozen=True)
class FlowParams:
    """Characteristic scales. ``Re`` is derived as ``U * L / nu``."""

    L: float
    U: float
    rho: float = 1.0
    nu: float = 1.0
    Re: float = field(init=False)

    def __post_init__(self):
        for name in ("L", "U", "rho", "nu"):
            val = getattr(self, name)
            if not (np.isfinite(val) and val > 0):
                raise ValidationError(f"{name} must be finite and > 0, got {val!r}")
        object.__setattr__(self, "Re", self.U * self.L / self.nu)


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Single-time scalar on the grid; entries outside ``valid_mask`` are 0."""

    values: np.ndarray
    valid_mask: np.ndarray
    name: str = ""

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        mask = np.asarray(self.valid_mask, dtype=bool)
        if vals.shape != mask.shape or vals.ndim != 3:
            raise ValidationError(f"values {vals.shape} and mask {mask.shape} must be equal 3-D shapes")
        vals = np.where(mask, vals, 0.0)
        if not np.all(np.isfinite(vals)):
            raise ValidationError("masked-in values must be finite")
        vals.setflags(write=False)
        mask = mask.copy()
        mask.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "valid_mask", mask)

    @property
    def shape(self):
        return self.values.shape


@dataclass(frozen=True, eq=False)
class LabelVolume:
    """Boolean vortex labels; ``valid`` marks where the source field was defined."""

    labels: np.ndarray
    valid: np.ndarray
    source: str = ""

    def __post_init__(self):
        valid = np.asarray(self.valid, dtype=bool).copy()
        labels = np.asarray(self.labels, dtype=bool) & valid
        if labels.shape != valid.shape or labels.ndim != 3:
            raise ValidationError("labels and valid must be equal 3-D shapes")
        labels.setflags(write=False)
        valid.setflags(write=False)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "valid", valid)

    @property
    def shape(self):
        return self.labels.shape

    @property
    def count(self) -> int:
        return int(self.labels.sum())


def save_fgrd(grid: FlowGrid, path: str | PathLike) -> None:
    grid.validate()
    I, J, K = grid.dims
    header = _HEADER.pack(MAGIC, VERSION, I, J, K, grid.timesteps, grid.dt)
    parts = [header]
    for arr in (grid.x, grid.y, grid.z, grid.u, grid.v, grid.w):
        parts.append(np.ascontiguousarray(arr, dtype=_F64).tobytes(order="C"))
    path = Path(path)
    try:
        with open(path, "wb") as fh:
            for p in parts:
                fh.write(p)
    except OSError as exc:
        raise OSError(f"cannot write FGRD file {path}: {exc}") from exc


def load_fgrd(path: str | PathLike) -> FlowGrid:
    data = Path(path).read_bytes()
    if len(data) < 4 or data[:4] != MAGIC:
        raise FormatError(f"{path}: bad magic {data[:4]!r}, expected {MAGIC!r}")
    if len(data) < _HEADER.size:
        raise LengthError(f"{path}: truncated header ({len(data)} bytes)")
    _, version, I, J, K, nt, dt = _HEADER.unpack_from(data, 0)
    if version != VERSION:
        raise FormatError(f"{path}: unsupported FGRD version {version}")
    if min(I, J, K, nt) < 1:
        raise ValidationError(f"{path}: zero-sized dimension in header {(I, J, K, nt)}")
    npts = nt * I * J * K
    nreal = I + J + K + 3 * npts
    expected = _HEADER.size + 8 * nreal
    if len(data) != expected:
        raise LengthError(f"{path}: payload is {len(data)} bytes, expected {expected}")
    flat = np.frombuffer(data, dtype=_F64, count=nreal, offset=_HEADER.size)
    off = 0

    def take(n):
        nonlocal off
        out = flat[off:off + n]
        off += n
        return out

    x, y, z = take(I), take(J), take(K)
    shape = (nt, I, J, K)
    u, v, w = (take(npts).reshape(shape) for _ in range(3))
    return FlowGrid(x=x, y=y, z=z, dt=dt, u=u, v=v, w=w)


def slice_plane(grid: FlowGrid, k: int) -> FlowGrid:
    """Single z-plane ``k`` as a ``K=1`` grid with ``w`` set to zero."""
    K = grid.dims[2]
    if not (0 <= k < K):
        raise IndexError(f"plane index {k} out of range [0, {K})")
    u = grid.u[:, :, :, k:k + 1]
    v = grid.v[:, :, :, k:k + 1]
    return FlowGrid(x=grid.x, y=grid.y, z=grid.z[k:k + 1], dt=grid.dt,
                    u=u, v=v, w=np.zeros_like(u))


def grid_from_csv(path: str | PathLike, dt: float = 1.0) -> FlowGrid:
    """Build a grid from CSV rows ``t,x,y,z,u,v,w`` (header required).

    Intended for tiny hand-made cases; every (t, x, y, z) combination
    must appear exactly once.
    """
    table = np.genfromtxt(path, delimiter=",", names=True, dtype=np.float64)
    missing = {"t", "x", "y", "z", "u", "v", "w"} - set(table.dtype.names or ())
    if missing:
        raise FormatError(f"{path}: missing CSV columns {sorted(missing)}")
    table = np.atleast_1d(table)
    t_vals = np.unique(table["t"])
    axes = [np.unique(table[c]) for c in ("x", "y", "z")]
    shape = (t_vals.size, *(a.size for a in axes))
    if table.size != np.prod(shape):
        raise ValidationError(f"{path}: {table.size} rows do not fill a {shape} grid")
    idx = [np.searchsorted(t_vals, table["t"])] + [
        np.searchsorted(a, table[c]) for a, c in zip(axes, ("x", "y", "z"))
    ]
    comps = {}
    for c in ("u", "v", "w"):
        arr = np.full(shape, np.nan)
        arr[tuple(idx)] = table[c]
        comps[c] = arr
    if np.isnan(comps["u"]).any():
        raise ValidationError(f"{path}: duplicate (t,x,y,z) rows")
    if t_vals.size > 1:
        steps = np.diff(t_vals)
        if not np.allclose(steps, steps[0], rtol=1e-12, atol=0):
            raise ValidationError(f"{path}: time spacing is not uniform")
        dt = float(steps[0])
    return FlowGrid(x=axes[0], y=axes[1], z=axes[2], dt=dt, **comps)
