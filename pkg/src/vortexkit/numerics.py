"""Central-difference operators on structured grids.

Every derivative uses ``(f[+1] - f[-1]) / (x[+1] - x[-1])`` with the true
coordinate spacing, so non-uniform axes are supported. Boundary points are
never differenced one-sidedly; they are reported invalid instead. An axis of
length 1 (a z-slice) contributes zero derivatives and imposes no stencil
constraint.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import StencilError, ValidationError
from .flowgrid import FlowGrid, FlowParams, ScalarField


def _axes(grid):
    return (grid.x, grid.y, grid.z)


def _ddx(f: np.ndarray, coord: np.ndarray, axis: int) -> np.ndarray:
    """Central first derivative along ``axis``; zero where undefined."""
    out = np.zeros_like(f)
    n = f.shape[axis]
    if n < 3:
        return out
    hi = [slice(None)] * f.ndim
    lo = [slice(None)] * f.ndim
    mid = [slice(None)] * f.ndim
    hi[axis], lo[axis], mid[axis] = slice(2, None), slice(None, -2), slice(1, -1)
    bshape = [1] * f.ndim
    bshape[axis] = n - 2
    denom = (coord[2:] - coord[:-2]).reshape(bshape)
    out[tuple(mid)] = (f[tuple(hi)] - f[tuple(lo)]) / denom
    return out


def _d2dx2(f: np.ndarray, coord: np.ndarray, axis: int) -> np.ndarray:
    """Three-point second derivative on a possibly non-uniform axis."""
    out = np.zeros_like(f)
    n = f.shape[axis]
    if n < 3:
        return out
    sl = lambda s: tuple(s if d == axis else slice(None) for d in range(f.ndim))
    bshape = [1] * f.ndim
    bshape[axis] = n - 2
    hp = (coord[2:] - coord[1:-1]).reshape(bshape)
    hm = (coord[1:-1] - coord[:-2]).reshape(bshape)
    fp, f0, fm = f[sl(slice(2, None))], f[sl(slice(1, -1))], f[sl(slice(None, -2))]
    out[sl(slice(1, -1))] = 2.0 * ((fp - f0) / hp - (f0 - fm) / hm) / (hp + hm)
    return out


def interior_mask(shape, depth: int = 1) -> np.ndarray:
    """Points at least ``depth`` cells from every boundary of each axis longer than 1."""
    mask = np.ones(shape, dtype=bool)
    for axis, n in enumerate(shape):
        if n == 1:
            continue
        idx = np.arange(n)
        ok = (idx >= depth) & (idx <= n - 1 - depth)
        bshape = [1] * len(shape)
        bshape[axis] = n
        mask &= ok.reshape(bshape)
    return mask


def _check_point(grid, t, p, depth=1):
    if not (0 <= t < grid.timesteps):
        raise StencilError(f"time index {t} out of range [0, {grid.timesteps})")
    for axis, (idx, n) in enumerate(zip(p, grid.dims)):
        if n == 1:
            if idx != 0:
                raise StencilError(f"index {idx} out of range on length-1 axis {axis}")
            continue
        if not (depth <= idx <= n - 1 - depth):
            raise StencilError(
                f"point {tuple(p)} is within {depth} cell(s) of the boundary on axis {axis}"
            )


def _point_diff(f, coord, p, axis):
    n = f.shape[axis]
    if n == 1:
        return 0.0
    hi, lo = list(p), list(p)
    hi[axis] += 1
    lo[axis] -= 1
    return float((f[tuple(hi)] - f[tuple(lo)]) / (coord[hi[axis]] - coord[lo[axis]]))


def velocity_gradient(grid: FlowGrid, t: int, p) -> np.ndarray:
    """3x3 tensor ``G[a, d] = d(v_a)/d(x_d)`` at interior point ``p = (i, j, k)``."""
    p = tuple(int(c) for c in p)
    _check_point(grid, t, p)
    axes = _axes(grid)
    comps = (grid.u[t], grid.v[t], grid.w[t])
    G = np.empty((3, 3))
    for a, f in enumerate(comps):
        for d in range(3):
            G[a, d] = _point_diff(f, axes[d], p, d)
    return G


def gradient_field(grid: FlowGrid, t: int):
    """Velocity gradient at every point, shape ``(I, J, K, 3, 3)``, plus validity mask."""
    if not (0 <= t < grid.timesteps):
        raise StencilError(f"time index {t} out of range [0, {grid.timesteps})")
    axes = _axes(grid)
    G = np.zeros((*grid.dims, 3, 3))
    for a, f in enumerate((grid.u[t], grid.v[t], grid.w[t])):
        for d in range(3):
            G[..., a, d] = _ddx(f, axes[d], d)
    mask = interior_mask(grid.dims)
    G[~mask] = 0.0
    return G, mask


def _curl(G):
    return np.stack(
        [G[..., 2, 1] - G[..., 1, 2], G[..., 0, 2] - G[..., 2, 0], G[..., 1, 0] - G[..., 0, 1]],
        axis=-1,
    )


def vorticity_3d(grid: FlowGrid, t: int, p) -> np.ndarray:
    """Curl ``(dw/dy - dv/dz, du/dz - dw/dx, dv/dx - du/dy)`` at ``p``."""
    return _curl(velocity_gradient(grid, t, p))


def vorticity_field(grid: FlowGrid, t: int):
    """Vorticity vectors ``(I, J, K, 3)`` and validity mask."""
    G, mask = gradient_field(grid, t)
    return _curl(G), mask


def _require_slice(grid):
    if grid.dims[2] != 1:
        raise ValidationError(f"expected a single z-plane (K=1), got K={grid.dims[2]}")


def vorticity_2d(slice_grid: FlowGrid, t: int, ij) -> float:
    """``dv/dx - du/dy`` on a z-slice."""
    _require_slice(slice_grid)
    i, j = ij
    p = (int(i), int(j), 0)
    _check_point(slice_grid, t, p)
    return (_point_diff(slice_grid.v[t], slice_grid.x, p, 0)
            - _point_diff(slice_grid.u[t], slice_grid.y, p, 1))


def vorticity_2d_field(slice_grid: FlowGrid, t: int) -> ScalarField:
    _require_slice(slice_grid)
    omega = _ddx(slice_grid.v[t], slice_grid.x, 0) - _ddx(slice_grid.u[t], slice_grid.y, 1)
    return ScalarField(omega, interior_mask(slice_grid.dims), name="omega_z")


def vorticity_series(slice_grid: FlowGrid, ij) -> np.ndarray:
    """Vorticity at a fixed slice point for every stored time level."""
    return np.array([vorticity_2d(slice_grid, t, ij) for t in range(slice_grid.timesteps)])


def dvorticity_dt(series, dt: float) -> np.ndarray:
    """Central time derivative ``(w[t+1] - w[t-1]) / (2 dt)`` for ``t = 1..T-1``."""
    series = np.asarray(series, dtype=np.float64)
    if series.ndim != 1 or series.size < 3:
        raise ValidationError("series needs at least 3 samples")
    if not dt > 0:
        raise ValidationError("dt must be > 0")
    return (series[2:] - series[:-2]) / (2.0 * dt)


def nondimensionalize(grid: FlowGrid, params: FlowParams) -> FlowGrid:
    """Scale lengths by 1/L, velocities by 1/U and the time step by U/L."""
    L, U = params.L, params.U
    return FlowGrid(
        x=grid.x / L, y=grid.y / L, z=grid.z / L,
        dt=grid.dt * U / L,
        u=grid.u / U, v=grid.v / U, w=grid.w / U,
    )


def divergence_field(grid: FlowGrid, t: int):
    G, mask = gradient_field(grid, t)
    return np.trace(G, axis1=-2, axis2=-1), mask


@dataclass(frozen=True)
class TransportTerms:
    """Terms of the nondimensional 2-D vorticity transport balance.

    ``residual = domega_dt - (diffusion / Re - convection)``; fields may be
    scalars (one point) or arrays (whole slice).
    """

    diffusion: float | np.ndarray
    convection: float | np.ndarray
    domega_dt: float | np.ndarray
    residual: float | np.ndarray
    Re: float


def _inv_re(Re):
    if not Re > 0:
        raise ValidationError(f"Re must be > 0, got {Re!r}")
    return 0.0 if math.isinf(Re) else 1.0 / Re


def _omega_plane(slice_grid, t):
    return vorticity_2d_field(slice_grid, t).values[:, :, 0]


def transport_terms_field(slice_grid: FlowGrid, Re: float, t: int):
    """Transport terms over a whole z-slice at time index ``t``.

    Returns ``(TransportTerms of (I, J) arrays, mask)``; the mask keeps points
    two cells from the x/y boundaries.
    """
    _require_slice(slice_grid)
    inv_re = _inv_re(Re)
    if not (1 <= t <= slice_grid.timesteps - 2):
        raise StencilError(f"time index {t} needs neighbours in [0, {slice_grid.timesteps})")
    x, y = slice_grid.x, slice_grid.y
    om = _omega_plane(slice_grid, t)
    diffusion = _d2dx2(om, x, 0) + _d2dx2(om, y, 1)
    u, v = slice_grid.u[t, :, :, 0], slice_grid.v[t, :, :, 0]
    convection = u * _ddx(om, x, 0) + v * _ddx(om, y, 1)
    dodt = (_omega_plane(slice_grid, t + 1) - _omega_plane(slice_grid, t - 1)) / (2.0 * slice_grid.dt)
    residual = dodt - (diffusion * inv_re - convection)
    mask = interior_mask(om.shape, depth=2)
    terms = [np.where(mask, a, 0.0) for a in (diffusion, convection, dodt, residual)]
    return TransportTerms(*terms, Re=Re), mask


def transport_residual(slice_grid: FlowGrid, Re: float, t: int, ij) -> TransportTerms:
    """Transport terms at one slice point ``(i, j)``."""
    _require_slice(slice_grid)
    i, j = int(ij[0]), int(ij[1])
    _check_point(slice_grid, t, (i, j, 0), depth=2)
    if not (1 <= t <= slice_grid.timesteps - 2):
        raise StencilError(f"time index {t} needs neighbours in [0, {slice_grid.timesteps})")
    inv_re = _inv_re(Re)
    x, y = slice_grid.x, slice_grid.y
    w = lambda tt, a, b: vorticity_2d(slice_grid, tt, (a, b))
    w0 = w(t, i, j)

    def second(fp, fm, cp, c0, cm):
        hp, hm = cp - c0, c0 - cm
        return 2.0 * ((fp - w0) / hp - (w0 - fm) / hm) / (hp + hm)

    wxp, wxm, wyp, wym = w(t, i + 1, j), w(t, i - 1, j), w(t, i, j + 1), w(t, i, j - 1)
    diffusion = second(wxp, wxm, x[i + 1], x[i], x[i - 1]) + second(wyp, wym, y[j + 1], y[j], y[j - 1])
    convection = (slice_grid.u[t, i, j, 0] * (wxp - wxm) / (x[i + 1] - x[i - 1])
                  + slice_grid.v[t, i, j, 0] * (wyp - wym) / (y[j + 1] - y[j - 1]))
    dodt = (w(t + 1, i, j) - w(t - 1, i, j)) / (2.0 * slice_grid.dt)
    residual = dodt - (diffusion * inv_re - convection)
    return TransportTerms(float(diffusion), float(convection), float(dodt), float(residual), Re=Re)
