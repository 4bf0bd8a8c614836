"""Analytic flow generators used as stand-in datasets and exact oracles."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np

from .errors import ValidationError
from .flowgrid import FlowGrid, LabelVolume

KINDS = ("taylor_green_2d", "taylor_green_3d", "lamb_oseen_street", "solid_body", "uniform", "shear")

# radius of peak azimuthal velocity for a Lamb-Oseen profile, in core radii
CORE_RADIUS_FACTOR = 1.12


@dataclass(frozen=True)
class Vortex:
    center: tuple[float, float]
    circulation: float
    core_radius: float
    advection: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if not self.core_radius > 0:
            raise ValidationError(f"core_radius must be > 0, got {self.core_radius}")

    def center_at(self, t: float) -> tuple[float, float]:
        return (self.center[0] + self.advection[0] * t, self.center[1] + self.advection[1] * t)


@dataclass(frozen=True)
class GenSpec:
    """Parameters for one synthetic field.

    ``extent`` gives ``(lo, hi)`` per axis; ``None`` picks a per-kind default.
    ``omega0`` is the solid-body angular rate, ``shear_rate`` the ``du/dy`` of
    the shear kind, ``velocity`` the constant vector of the uniform kind.
    """

    kind: str
    dims: tuple[int, int, int] = (17, 17, 3)
    extent: tuple[tuple[float, float], ...] | None = None
    timesteps: int = 1
    dt: float = 0.1
    nu: float = 0.1
    amplitude: float = 1.0
    omega0: float = 1.0
    shear_rate: float = 1.0
    velocity: tuple[float, float, float] = (1.0, 0.0, 0.0)
    vortices: tuple[Vortex, ...] = ()
    jitter: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown generator kind {self.kind!r}; expected one of {KINDS}")
        dims = tuple(int(n) for n in self.dims)
        if len(dims) != 3 or min(dims) < 2:
            raise ValidationError(f"dims must be three counts >= 2, got {self.dims}")
        object.__setattr__(self, "dims", dims)
        if self.timesteps < 1:
            raise ValidationError("timesteps must be >= 1")
        if not self.dt > 0:
            raise ValidationError("dt must be > 0")
        if self.kind.startswith("taylor_green") and not self.nu > 0:
            raise ValidationError("nu must be > 0")
        vort = tuple(v if isinstance(v, Vortex) else Vortex(**_vortex_kwargs(v)) for v in self.vortices)
        object.__setattr__(self, "vortices", vort)
        if self.extent is not None:
            ext = tuple((float(lo), float(hi)) for lo, hi in self.extent)
            if len(ext) != 3 or any(hi <= lo for lo, hi in ext):
                raise ValidationError(f"extent must be three increasing (lo, hi) pairs, got {self.extent}")
            object.__setattr__(self, "extent", ext)

    @classmethod
    def from_dict(cls, data: dict) -> "GenSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValidationError(f"unknown GenSpec keys: {sorted(unknown)}")
        kw = dict(data)
        for key in ("dims", "velocity"):
            if key in kw:
                kw[key] = tuple(kw[key])
        if "extent" in kw and kw["extent"] is not None:
            kw["extent"] = tuple(tuple(p) for p in kw["extent"])
        if "vortices" in kw:
            kw["vortices"] = tuple(Vortex(**_vortex_kwargs(v)) for v in kw["vortices"])
        return cls(**kw)

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self)}
        out["vortices"] = [
            dict(center=list(v.center), circulation=v.circulation,
                 core_radius=v.core_radius, advection=list(v.advection))
            for v in self.vortices
        ]
        out["dims"] = list(self.dims)
        out["velocity"] = list(self.velocity)
        if self.extent is not None:
            out["extent"] = [list(p) for p in self.extent]
        return out


def _vortex_kwargs(v) -> dict:
    if isinstance(v, Vortex):
        return dict(center=v.center, circulation=v.circulation,
                    core_radius=v.core_radius, advection=v.advection)
    kw = dict(v)
    kw["center"] = tuple(kw["center"])
    if "advection" in kw:
        kw["advection"] = tuple(kw["advection"])
    return kw


def _default_extent(kind):
    if kind.startswith("taylor_green"):
        return ((0.0, 2 * math.pi),) * 3
    if kind == "lamb_oseen_street":
        return ((0.0, 8.0), (-2.0, 2.0), (0.0, 1.0))
    return ((-1.0, 1.0),) * 3


def axes_for(spec: GenSpec):
    ext = spec.extent or _default_extent(spec.kind)
    return tuple(np.linspace(lo, hi, n) for (lo, hi), n in zip(ext, spec.dims))


def _check_kind(spec, kind):
    if spec.kind != kind:
        raise ValidationError(f"expected kind {kind!r}, got {spec.kind!r}")


def _assemble(spec, comp):
    """Evaluate ``comp(X, Y, Z, t) -> (u, v, w)`` at every time level."""
    x, y, z = axes_for(spec)
    X, Y, Z = np.meshgrid(x, y, z, indexing="ij")
    shape = (spec.timesteps, *spec.dims)
    u, v, w = np.zeros(shape), np.zeros(shape), np.zeros(shape)
    for n in range(spec.timesteps):
        u[n], v[n], w[n] = comp(X, Y, Z, n * spec.dt)
    return FlowGrid(x=x, y=y, z=z, dt=spec.dt, u=u, v=v, w=w)


def gen_taylor_green_2d(spec: GenSpec) -> FlowGrid:
    """Decaying 2-D Taylor-Green vortex, extruded uniformly in z.

    u = -A cos x sin y e^{-2 nu t},  v = A sin x cos y e^{-2 nu t},  w = 0.
    """
    _check_kind(spec, "taylor_green_2d")
    ext = spec.extent or _default_extent(spec.kind)
    if any(lo < 0 or hi > 2 * math.pi + 1e-12 for lo, hi in ext[:2]):
        raise ValidationError("taylor_green_2d domain must lie within [0, 2*pi]^2")
    A, nu = spec.amplitude, spec.nu

    def comp(X, Y, Z, t):
        decay = A * math.exp(-2.0 * nu * t)
        return -np.cos(X) * np.sin(Y) * decay, np.sin(X) * np.cos(Y) * decay, np.zeros_like(X)

    return _assemble(spec, comp)


def taylor_green_2d_vorticity(x, y, t, nu, amplitude=1.0):
    """Analytic z-vorticity of :func:`gen_taylor_green_2d`."""
    return 2.0 * amplitude * np.cos(x) * np.cos(y) * np.exp(-2.0 * nu * t)


def gen_taylor_green_3d(spec: GenSpec) -> FlowGrid:
    """Classic 3-D Taylor-Green initial field with its Stokes-limit decay.

    u = A sin x cos y cos z e^{-3 nu t},  v = -A cos x sin y cos z e^{-3 nu t},  w = 0.
    Exact only while the nonlinear term is negligible.
    """
    _check_kind(spec, "taylor_green_3d")
    A, nu = spec.amplitude, spec.nu

    def comp(X, Y, Z, t):
        decay = A * math.exp(-3.0 * nu * t)
        return (np.sin(X) * np.cos(Y) * np.cos(Z) * decay,
                -np.cos(X) * np.sin(Y) * np.cos(Z) * decay,
                np.zeros_like(X))

    return _assemble(spec, comp)


def gen_solid_body(spec: GenSpec) -> FlowGrid:
    """Rigid rotation about the z axis: u = -omega0 y, v = omega0 x."""
    _check_kind(spec, "solid_body")
    om = spec.omega0

    def comp(X, Y, Z, t):
        return -om * Y, om * X, np.zeros_like(X)

    return _assemble(spec, comp)


def gen_uniform(spec: GenSpec) -> FlowGrid:
    _check_kind(spec, "uniform")
    cu, cv, cw = spec.velocity

    def comp(X, Y, Z, t):
        return np.full_like(X, cu), np.full_like(X, cv), np.full_like(X, cw)

    return _assemble(spec, comp)


def gen_shear(spec: GenSpec) -> FlowGrid:
    """Simple shear u = shear_rate * y."""
    _check_kind(spec, "shear")
    s = spec.shear_rate

    def comp(X, Y, Z, t):
        return s * Y, np.zeros_like(X), np.zeros_like(X)

    return _assemble(spec, comp)


def default_street(n_pairs=3, spacing=2.4, offset=0.6, x0=1.0, circulation=1.0, core_radius=0.4):
    """Staggered counter-rotating rows resembling a von Karman wake."""
    out = []
    for p in range(n_pairs):
        xc = x0 + p * spacing
        out.append(Vortex((xc, offset), circulation, core_radius))
        out.append(Vortex((xc + spacing / 2, -offset), -circulation, core_radius))
    return tuple(out)


def _street_vortices(spec):
    vortices = spec.vortices or default_street()
    if spec.jitter > 0:
        rng = np.random.default_rng(spec.seed)
        shifts = rng.uniform(-spec.jitter, spec.jitter, size=(len(vortices), 2))
        vortices = tuple(
            Vortex((v.center[0] + dx, v.center[1] + dy), v.circulation, v.core_radius, v.advection)
            for v, (dx, dy) in zip(vortices, shifts)
        )
    centers = [v.center for v in vortices]
    if len(set(centers)) != len(centers):
        raise ValidationError("lamb_oseen_street has vortices with identical centers")
    return vortices


def lamb_oseen_velocity(X, Y, vortex: Vortex, t=0.0):
    """Azimuthal Lamb-Oseen velocity Gamma/(2 pi r) (1 - exp(-r^2/rc^2)) as (u, v)."""
    cx, cy = vortex.center_at(t)
    dx, dy = X - cx, Y - cy
    r2 = dx * dx + dy * dy
    rc2 = vortex.core_radius ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        factor = np.where(r2 > 0, -np.expm1(-r2 / rc2) / r2, 1.0 / rc2)
    factor = factor * vortex.circulation / (2 * math.pi)
    return -factor * dy, factor * dx


def gen_lamb_oseen_street(spec: GenSpec) -> tuple[FlowGrid, LabelVolume]:
    """Superposed Lamb-Oseen vortices extruded in z, plus the t=0 core truth."""
    _check_kind(spec, "lamb_oseen_street")
    vortices = _street_vortices(spec)

    def comp(X, Y, Z, t):
        u = np.zeros_like(X)
        v = np.zeros_like(X)
        for vx in vortices:
            du, dv = lamb_oseen_velocity(X, Y, vx, t)
            u += du
            v += dv
        return u, v, np.zeros_like(X)

    grid = _assemble(spec, comp)
    return grid, lamb_oseen_cores(spec, 0.0)


def lamb_oseen_cores(spec: GenSpec, t: float = 0.0) -> LabelVolume:
    """Points within ``1.12 * r_c`` of any vortex center at time ``t``."""
    vortices = _street_vortices(spec)
    x, y, z = axes_for(spec)
    X, Y, _ = np.meshgrid(x, y, z, indexing="ij")
    core = np.zeros(X.shape, dtype=bool)
    for vx in vortices:
        cx, cy = vx.center_at(t)
        core |= (X - cx) ** 2 + (Y - cy) ** 2 <= (CORE_RADIUS_FACTOR * vx.core_radius) ** 2
    return LabelVolume(core, np.ones_like(core), source="lamb_oseen_core:1.12rc")


_GENERATORS = {
    "taylor_green_2d": gen_taylor_green_2d,
    "taylor_green_3d": gen_taylor_green_3d,
    "solid_body": gen_solid_body,
    "uniform": gen_uniform,
    "shear": gen_shear,
}


def generate(spec: GenSpec) -> FlowGrid:
    if spec.kind == "lamb_oseen_street":
        return gen_lamb_oseen_street(spec)[0]
    return _GENERATORS[spec.kind](spec)
