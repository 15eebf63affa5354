"""Periodic structured grid, field containers and discrete operators.

All fields live on a uniform rectangular grid with periodic wrap-around.
Arrays are stored row-major with x running fastest, i.e. ``values[j, i]``
is the node at ``(x_i, y_j)`` and ``values.shape == (ny, nx)``.

The first-derivative operators are centered second-order differences and
the Laplacian is *defined* as ``divergence(gradient(f))``, which makes two
structural identities hold exactly (up to round-off):

- summation by parts:  <grad f, v> = -<f, div v>
- composition:         div(grad(f)) == laplacian(f), componentwise

These identities are what transfer the continuous energy-dissipation
structure to the discrete level, so they are kept exact on purpose even
though the composed Laplacian uses a stride-2 stencil.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Grid2D",
    "ScalarField",
    "VectorField2",
    "gradient",
    "divergence",
    "laplacian",
    "integrate",
    "inner_product",
    "l2_norm",
    "max_abs",
]


class GridError(ValueError):
    """Invalid grid construction or mismatched grids in an operation."""


@dataclass(frozen=True)
class Grid2D:
    """Uniform periodic grid on a centered rectangle.

    Nodes are ``x_i = -lx/2 + i*hx`` for ``i = 0..nx-1`` (the right edge is
    the periodic image of the left one) and similarly in y.
    """

    nx: int
    ny: int
    lx: float = 2.0
    ly: float = 2.0

    def __post_init__(self):
        if self.nx < 8 or self.ny < 8:
            raise GridError(f"grid must be at least 8x8, got {self.nx}x{self.ny}")
        if not (self.lx > 0.0 and self.ly > 0.0):
            raise GridError("domain extents must be positive")

    @property
    def hx(self) -> float:
        return self.lx / self.nx

    @property
    def hy(self) -> float:
        return self.ly / self.ny

    @property
    def measure(self) -> float:
        """Area |Omega| of the periodic cell."""
        return self.lx * self.ly

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        """1-D node coordinates (x, y)."""
        x = -0.5 * self.lx + self.hx * np.arange(self.nx)
        y = -0.5 * self.ly + self.hy * np.arange(self.ny)
        return x, y

    def meshgrid(self) -> tuple[np.ndarray, np.ndarray]:
        """Node coordinates as (ny, nx) arrays (X, Y)."""
        x, y = self.axes()
        return np.meshgrid(x, y)

    def wavenumbers_rfft(self) -> tuple[np.ndarray, np.ndarray]:
        """True wavenumbers (kx, ky) on the rfft2 layout, shape (ny, nx//2+1)."""
        kx = 2.0 * np.pi * np.fft.rfftfreq(self.nx, self.hx)
        ky = 2.0 * np.pi * np.fft.fftfreq(self.ny, self.hy)
        return np.meshgrid(kx, ky)

    def diff_symbols_rfft(self) -> tuple[np.ndarray, np.ndarray]:
        """Fourier symbols (sx, sy) of the centered first differences.

        The centered difference D_x acts on a mode exp(i k.x) as
        multiplication by i*sx with sx = sin(kx hx)/hx; the composed
        Laplacian has symbol -(sx^2 + sy^2).
        """
        kx, ky = self.wavenumbers_rfft()
        return np.sin(kx * self.hx) / self.hx, np.sin(ky * self.hy) / self.hy


def _check_values(grid: Grid2D, values: np.ndarray, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.shape != grid.shape:
        raise GridError(
            f"{name} has shape {arr.shape}, expected {grid.shape} (ny, nx)"
        )
    if not np.all(np.isfinite(arr)):
        raise GridError(f"{name} contains non-finite values")
    return np.ascontiguousarray(arr)


@dataclass
class ScalarField:
    """A real scalar field attached to a grid."""

    grid: Grid2D
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.values = _check_values(self.grid, self.values, "scalar field")

    @classmethod
    def zeros(cls, grid: Grid2D) -> "ScalarField":
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def full(cls, grid: Grid2D, value: float) -> "ScalarField":
        return cls(grid, np.full(grid.shape, float(value)))

    @classmethod
    def from_function(cls, grid: Grid2D, fn) -> "ScalarField":
        X, Y = grid.meshgrid()
        return cls(grid, np.asarray(fn(X, Y), dtype=np.float64))

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.values.copy())


@dataclass
class VectorField2:
    """A real 2-component vector field attached to a grid."""

    grid: Grid2D
    x: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.x = _check_values(self.grid, self.x, "vector field x-component")
        self.y = _check_values(self.grid, self.y, "vector field y-component")

    @classmethod
    def zeros(cls, grid: Grid2D) -> "VectorField2":
        return cls(grid, np.zeros(grid.shape), np.zeros(grid.shape))

    @classmethod
    def constant(cls, grid: Grid2D, cx: float, cy: float) -> "VectorField2":
        return cls(grid, np.full(grid.shape, float(cx)), np.full(grid.shape, float(cy)))

    def copy(self) -> "VectorField2":
        return VectorField2(self.grid, self.x.copy(), self.y.copy())

    def magnitude(self) -> np.ndarray:
        return np.hypot(self.x, self.y)


# Raw-array stencils.  Periodic wrap via np.roll; np.roll(a, -1, axis) puts
# the i+1 neighbor at slot i.

def ddx(a: np.ndarray, hx: float) -> np.ndarray:
    return (np.roll(a, -1, axis=1) - np.roll(a, 1, axis=1)) / (2.0 * hx)


def ddy(a: np.ndarray, hy: float) -> np.ndarray:
    return (np.roll(a, -1, axis=0) - np.roll(a, 1, axis=0)) / (2.0 * hy)


def grad_arrays(a: np.ndarray, grid: Grid2D) -> tuple[np.ndarray, np.ndarray]:
    return ddx(a, grid.hx), ddy(a, grid.hy)


def div_arrays(vx: np.ndarray, vy: np.ndarray, grid: Grid2D) -> np.ndarray:
    return ddx(vx, grid.hx) + ddy(vy, grid.hy)


def lap_array(a: np.ndarray, grid: Grid2D) -> np.ndarray:
    gx, gy = grad_arrays(a, grid)
    return div_arrays(gx, gy, grid)


def gradient(f: ScalarField) -> VectorField2:
    """Centered second-order periodic gradient."""
    gx, gy = grad_arrays(f.values, f.grid)
    return VectorField2(f.grid, gx, gy)


def divergence(v: VectorField2) -> ScalarField:
    """Centered second-order periodic divergence (adjoint of -gradient)."""
    return ScalarField(v.grid, div_arrays(v.x, v.y, v.grid))


def laplacian(f: ScalarField) -> ScalarField:
    """Discrete Laplacian, literally divergence(gradient(f))."""
    return divergence(gradient(f))


def integrate(f: ScalarField) -> float:
    """Quadrature of f over the cell (trapezoid = midpoint on a periodic grid)."""
    return float(f.grid.hx * f.grid.hy * np.sum(f.values))


def _require_same_grid(a, b):
    if a.grid != b.grid:
        raise GridError("fields live on different grids")


def inner_product(a, b) -> float:
    """L2 pairing of two scalar fields or two vector fields."""
    _require_same_grid(a, b)
    if isinstance(a, ScalarField) and isinstance(b, ScalarField):
        dens = a.values * b.values
    elif isinstance(a, VectorField2) and isinstance(b, VectorField2):
        dens = a.x * b.x + a.y * b.y
    else:
        raise GridError("inner_product needs two fields of the same kind")
    return float(a.grid.hx * a.grid.hy * np.sum(dens))


def l2_norm(a) -> float:
    return float(np.sqrt(max(inner_product(a, a), 0.0)))


def max_abs(a) -> float:
    if isinstance(a, ScalarField):
        return float(np.max(np.abs(a.values)))
    return float(np.max(a.magnitude()))
