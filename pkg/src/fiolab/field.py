"""
Sampled fields on a uniform periodic grid and the Fourier transforms used
throughout the package.

Conventions
-----------
The grid covers ``[-L/2, L/2)^n`` with ``M`` samples per axis. The dual
lattice is ``(2*pi/L) * {-M/2, ..., M/2-1}^n``. The forward transform
approximates ``f_hat(xi) = int f(x) exp(-i x.xi) dx`` with quadrature weight
``(L/M)^n``; the inverse approximates ``f(x) = int f_hat(xi) exp(i x.xi) dxi``
with ``dxi = dxi / (2 pi)^n`` and weight ``(2 pi / L)^n``. Under these weights
``||f||_2^2 = (2 pi)^{-n} ||f_hat||_2^2`` exactly.
"""

from __future__ import annotations

import enum
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Sequence, Tuple, Union

import numpy as np
import scipy.fft as sfft

__all__ = [
    "Grid",
    "Rep",
    "SampledField",
    "forward_ft",
    "inverse_ft",
    "pointwise_mul",
    "translate",
    "modulate",
    "conj",
    "check_periodization",
    "write_fiof",
    "read_fiof",
    "write_fiof_records",
    "read_fiof_records",
    "FieldError",
]

TWO_PI = 2.0 * np.pi
_MAGIC = b"FIOF"
_VERSION = 1


class FieldError(ValueError):
    """Raised for invalid grids, mismatched fields or non-finite data."""


class Rep(enum.IntEnum):
    SPACE = 0
    FREQUENCY = 1


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid ``[-L/2, L/2)^n`` with ``M`` samples per axis."""

    n: int
    M: int
    L: float

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise FieldError(f"dimension n must be an integer >= 1, got {self.n}")
        if int(self.M) != self.M or self.M < 2 or (int(self.M) & (int(self.M) - 1)):
            raise FieldError(f"M must be a power of two >= 2, got {self.M}")
        if not (np.isfinite(self.L) and self.L > 0):
            raise FieldError(f"L must be positive and finite, got {self.L}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "M", int(self.M))
        object.__setattr__(self, "L", float(self.L))

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.M,) * self.n

    @property
    def size(self) -> int:
        return self.M ** self.n

    @property
    def spacing(self) -> float:
        return self.L / self.M

    @property
    def dual_spacing(self) -> float:
        return TWO_PI / self.L

    @property
    def nyquist(self) -> float:
        return np.pi * self.M / self.L

    def axis(self) -> np.ndarray:
        """Sample positions along one axis."""
        return -0.5 * self.L + self.spacing * np.arange(self.M)

    def dual_axis(self) -> np.ndarray:
        """Dual lattice along one axis, ascending from ``-M/2``."""
        return self.dual_spacing * np.arange(-self.M // 2, self.M // 2)

    def coords(self) -> List[np.ndarray]:
        """Broadcastable coordinate arrays (``indexing='ij'``)."""
        return _open_mesh(self.axis(), self.n)

    def dual_coords(self) -> List[np.ndarray]:
        return _open_mesh(self.dual_axis(), self.n)

    def points(self) -> np.ndarray:
        """All grid points as an ``(M^n, n)`` array in row-major order."""
        return _full_points(self.axis(), self.n)

    def dual_points(self) -> np.ndarray:
        return _full_points(self.dual_axis(), self.n)

    def dual_norm(self) -> np.ndarray:
        """``|xi|`` on the dual lattice, shape ``grid.shape``."""
        return np.sqrt(sum(c * c for c in self.dual_coords()))

    def refined(self, factor: int = 2) -> "Grid":
        """Same box, ``factor`` times more samples per axis."""
        return Grid(self.n, self.M * factor, self.L)

    def to_dict(self) -> dict:
        return {"n": self.n, "M": self.M, "L": self.L}


def _open_mesh(ax: np.ndarray, n: int) -> List[np.ndarray]:
    out = []
    for d in range(n):
        shp = [1] * n
        shp[d] = ax.size
        out.append(ax.reshape(shp))
    return out


def _full_points(ax: np.ndarray, n: int) -> np.ndarray:
    mesh = np.meshgrid(*([ax] * n), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


@dataclass(frozen=True)
class SampledField:
    """Complex samples of a function on ``grid`` in space or frequency."""

    grid: Grid
    rep: Rep
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.complex128)
        if vals.size != self.grid.size:
            raise FieldError(
                f"expected {self.grid.size} values for grid {self.grid}, got {vals.size}"
            )
        vals = vals.reshape(self.grid.shape)
        if not np.all(np.isfinite(vals)):
            raise FieldError("field contains non-finite values")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "rep", Rep(self.rep))

    @classmethod
    def from_function(cls, grid: Grid, func, rep: Rep = Rep.SPACE) -> "SampledField":
        """Sample ``func(*coords)`` on the grid (or dual lattice for FREQUENCY)."""
        coords = grid.coords() if rep == Rep.SPACE else grid.dual_coords()
        vals = np.broadcast_to(func(*coords), grid.shape)
        return cls(grid, rep, vals)

    @classmethod
    def zeros(cls, grid: Grid, rep: Rep = Rep.SPACE) -> "SampledField":
        return cls(grid, rep, np.zeros(grid.shape, dtype=np.complex128))

    def with_values(self, values: np.ndarray) -> "SampledField":
        return SampledField(self.grid, self.rep, values)

    def flat(self) -> np.ndarray:
        return self.values.ravel()

    def __add__(self, other: "SampledField") -> "SampledField":
        _check_compatible(self, other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other: "SampledField") -> "SampledField":
        _check_compatible(self, other)
        return self.with_values(self.values - other.values)

    def scale(self, c: complex) -> "SampledField":
        return self.with_values(c * self.values)


def _check_compatible(f: SampledField, g: SampledField):
    if f.grid != g.grid:
        raise FieldError(f"grid mismatch: {f.grid} vs {g.grid}")
    if f.rep != g.rep:
        raise FieldError(f"representation mismatch: {f.rep.name} vs {g.rep.name}")


def _sign(grid: Grid) -> np.ndarray:
    # exp(-i x0 . xi) with x0 = -L/2 per axis reduces to (-1)^k on the index k.
    k = np.arange(-grid.M // 2, grid.M // 2)
    s1 = np.where(k % 2 == 0, 1.0, -1.0)
    out = np.ones(grid.shape)
    for c in _open_mesh(s1, grid.n):
        out = out * c
    return out


def forward_ft_array(grid: Grid, values: np.ndarray) -> np.ndarray:
    """Array-level forward transform; ``values`` has shape ``(..., *grid.shape)``."""
    axes = tuple(range(-grid.n, 0))
    spec = sfft.fftshift(sfft.fftn(values, axes=axes), axes=axes)
    return spec * (_sign(grid) * grid.spacing ** grid.n)


def inverse_ft_array(grid: Grid, values: np.ndarray) -> np.ndarray:
    axes = tuple(range(-grid.n, 0))
    tmp = sfft.ifftshift(values * _sign(grid), axes=axes)
    return sfft.ifftn(tmp, axes=axes) * (grid.M / grid.L) ** grid.n


def forward_ft(f: SampledField) -> SampledField:
    """Space to frequency with weight ``(L/M)^n`` and kernel ``exp(-i x.xi)``."""
    if f.rep != Rep.SPACE:
        raise FieldError("forward_ft expects a field in SPACE representation")
    return SampledField(f.grid, Rep.FREQUENCY, forward_ft_array(f.grid, f.values))


def inverse_ft(g: SampledField) -> SampledField:
    """Frequency to space with measure ``(2 pi)^{-n} (2 pi / L)^n``."""
    if g.rep != Rep.FREQUENCY:
        raise FieldError("inverse_ft expects a field in FREQUENCY representation")
    return SampledField(g.grid, Rep.SPACE, inverse_ft_array(g.grid, g.values))


def pointwise_mul(f: SampledField, g: SampledField) -> SampledField:
    _check_compatible(f, g)
    return f.with_values(f.values * g.values)


def conj(f: SampledField) -> SampledField:
    return f.with_values(np.conj(f.values))


def _as_vector(h, n: int) -> np.ndarray:
    h = np.atleast_1d(np.asarray(h, dtype=float))
    if h.size == 1 and n > 1:
        h = np.full(n, float(h[0]))
    if h.shape != (n,):
        raise FieldError(f"shift must have {n} components, got shape {h.shape}")
    return h


def translate(f: SampledField, h) -> SampledField:
    """``(tau_h f)(x) = f(x - h)``.

    Lattice shifts are exact rolls; other shifts use the frequency-side
    modulation ``exp(-i h.xi)``. FREQUENCY inputs are modulated directly.
    """
    grid = f.grid
    h = _as_vector(h, grid.n)
    if f.rep == Rep.FREQUENCY:
        phase = np.exp(-1j * sum(hc * c for hc, c in zip(h, grid.dual_coords())))
        return f.with_values(f.values * phase)
    steps = h / grid.spacing
    if np.allclose(steps, np.round(steps), rtol=0.0, atol=1e-12):
        return f.with_values(np.roll(f.values, tuple(int(s) for s in np.round(steps)),
                                     axis=tuple(range(grid.n))))
    return inverse_ft(translate(forward_ft(f), h))


def modulate(f: SampledField, eta) -> SampledField:
    """``f(x) exp(i x.eta)`` for SPACE fields; a shift by ``eta`` for FREQUENCY."""
    grid = f.grid
    eta = _as_vector(eta, grid.n)
    if f.rep == Rep.SPACE:
        phase = np.exp(1j * sum(e * c for e, c in zip(eta, grid.coords())))
        return f.with_values(f.values * phase)
    return forward_ft(modulate(inverse_ft(f), eta))


def check_periodization(f: SampledField, rel_tol: float = 1e-10) -> dict:
    """Flag SPACE fields that are not negligible within ``L/8`` of the boundary."""
    if f.rep != Rep.SPACE:
        raise FieldError("periodization check expects a SPACE field")
    grid = f.grid
    mag = np.abs(f.values)
    peak = float(mag.max()) if mag.size else 0.0
    near = np.zeros(grid.shape, dtype=bool)
    for c in grid.coords():
        near = near | (np.abs(c) >= 0.5 * grid.L - grid.L / 8.0)
    edge = float(mag[near].max()) if near.any() else 0.0
    ratio = edge / peak if peak > 0 else 0.0
    return {"ok": bool(ratio < rel_tol), "edge_over_peak": ratio, "tolerance": rel_tol}


# --- FIOF binary container --------------------------------------------------

_HEADER = struct.Struct("<4sIIIdB")


def _encode(field: SampledField) -> bytes:
    g = field.grid
    head = _HEADER.pack(_MAGIC, _VERSION, g.n, g.M, g.L, int(field.rep))
    body = np.ascontiguousarray(field.values.ravel()).astype("<c16").tobytes()
    return head + body


def write_fiof(path: Union[str, Path], field: SampledField) -> None:
    """Write one field: magic, u32 version, u32 n, u32 M, f64 L, u8 rep, data."""
    Path(path).write_bytes(_encode(field))


def write_fiof_records(path: Union[str, Path], fields: Iterable[SampledField]) -> None:
    """Concatenate several FIOF records in one file."""
    Path(path).write_bytes(b"".join(_encode(f) for f in fields))


def _decode(buf: bytes, offset: int) -> Tuple[SampledField, int]:
    if len(buf) - offset < _HEADER.size:
        raise FieldError("truncated FIOF header")
    magic, version, n, M, L, rep = _HEADER.unpack_from(buf, offset)
    if magic != _MAGIC:
        raise FieldError(f"bad magic {magic!r}")
    if version != _VERSION:
        raise FieldError(f"unsupported FIOF version {version}")
    grid = Grid(n, M, L)
    offset += _HEADER.size
    nbytes = grid.size * 16
    if len(buf) - offset < nbytes:
        raise FieldError("truncated FIOF payload")
    vals = np.frombuffer(buf, dtype="<c16", count=grid.size, offset=offset)
    return SampledField(grid, Rep(rep), vals.astype(np.complex128)), offset + nbytes


def read_fiof(path: Union[str, Path]) -> SampledField:
    buf = Path(path).read_bytes()
    field, end = _decode(buf, 0)
    if end != len(buf):
        raise FieldError("trailing bytes after FIOF record; use read_fiof_records")
    return field


def read_fiof_records(path: Union[str, Path]) -> List[SampledField]:
    buf = Path(path).read_bytes()
    out, offset = [], 0
    while offset < len(buf):
        field, offset = _decode(buf, offset)
        out.append(field)
    return out
