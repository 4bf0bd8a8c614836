"""Vortex criteria built on the velocity-gradient tensor.

The tensor is flattened row-major into a 9-vector ``s``; its symmetric part
``A`` (deformation) and antisymmetric part ``B`` (rotation) give the squared
Frobenius norms ``a`` and ``b``, from which ``Q = (b - a) / 2`` and
``Omega = b / (a + b)`` follow.

The published quadratic-form matrices ``M1_PUBLISHED`` / ``M2_PUBLISHED`` carry only
half of each off-diagonal tensor component's contribution. They are kept
verbatim for comparison; ``M1_CORRECTED`` / ``M2_CORRECTED`` double every
entry tied to an off-diagonal component and reproduce the direct traces.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .flowgrid import FlowGrid, LabelVolume, ScalarField
from .numerics import gradient_field, vorticity_field

DEFAULT_OMEGA_THRESHOLD = 0.52
DEFAULT_Q_THRESHOLD = 0.0

# s = [ux, uy, uz, vx, vy, vz, wx, wy, wz]
M1_PUBLISHED = np.array([
    [1, 0, 0, 0, 0, 0, 0, 0, 0],
    [0, 1/4, 0, 1/2, 0, 0, 0, 0, 0],
    [0, 0, 1/4, 0, 0, 0, 1/2, 0, 0],
    [0, 0, 0, 1/4, 0, 0, 0, 0, 0],
    [0, 0, 0, 0, 1, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 1/4, 0, 1/2, 0],
    [0, 0, 0, 0, 0, 0, 1/4, 0, 0],
    [0, 0, 0, 0, 0, 0, 0, 1/4, 0],
    [0, 0, 0, 0, 0, 0, 0, 0, 1],
], dtype=np.float64)

M2_PUBLISHED = np.array([
    [0, 0, 0, 0, 0, 0, 0, 0, 0],
    [0, 1/4, 0, -1/2, 0, 0, 0, 0, 0],
    [0, 0, 1/4, 0, 0, 0, -1/2, 0, 0],
    [0, 0, 0, 1/4, 0, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 1/4, 0, -1/2, 0],
    [0, 0, 0, 0, 0, 0, 1/4, 0, 0],
    [0, 0, 0, 0, 0, 0, 0, 1/4, 0],
    [0, 0, 0, 0, 0, 0, 0, 0, 0],
], dtype=np.float64)

M1_CORRECTED = np.array([
    [1, 0, 0, 0, 0, 0, 0, 0, 0],
    [0, 1/2, 0, 1, 0, 0, 0, 0, 0],
    [0, 0, 1/2, 0, 0, 0, 1, 0, 0],
    [0, 0, 0, 1/2, 0, 0, 0, 0, 0],
    [0, 0, 0, 0, 1, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 1/2, 0, 1, 0],
    [0, 0, 0, 0, 0, 0, 1/2, 0, 0],
    [0, 0, 0, 0, 0, 0, 0, 1/2, 0],
    [0, 0, 0, 0, 0, 0, 0, 0, 1],
], dtype=np.float64)

M2_CORRECTED = np.array([
    [0, 0, 0, 0, 0, 0, 0, 0, 0],
    [0, 1/2, 0, -1, 0, 0, 0, 0, 0],
    [0, 0, 1/2, 0, 0, 0, -1, 0, 0],
    [0, 0, 0, 1/2, 0, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 1/2, 0, -1, 0],
    [0, 0, 0, 0, 0, 0, 1/2, 0, 0],
    [0, 0, 0, 0, 0, 0, 0, 1/2, 0],
    [0, 0, 0, 0, 0, 0, 0, 0, 0],
], dtype=np.float64)

for _m in (M1_PUBLISHED, M2_PUBLISHED, M1_CORRECTED, M2_CORRECTED):
    _m.setflags(write=False)

QUADFORMS = {
    "published": (M1_PUBLISHED, M2_PUBLISHED),
    "paper": (M1_PUBLISHED, M2_PUBLISHED),  # alias kept for the documented interface
    "corrected": (M1_CORRECTED, M2_CORRECTED),
}


@dataclass(frozen=True, eq=False)
class TensorPair:
    A: np.ndarray
    B: np.ndarray
    a: float
    b: float


def s_from_gradient(g) -> np.ndarray:
    """Row-major flattening of the 3x3 gradient tensor(s); works on stacks too."""
    g = np.asarray(g, dtype=np.float64)
    if g.shape[-2:] != (3, 3):
        raise ValidationError(f"gradient must end in (3, 3), got {g.shape}")
    return g.reshape(*g.shape[:-2], 9)


def decompose(g) -> TensorPair:
    g = np.asarray(g, dtype=np.float64)
    gt = g.T
    A = 0.5 * (g + gt)
    B = 0.5 * (g - gt)
    return TensorPair(A, B, float(np.sum(A * A)), float(np.sum(B * B)))


def ab_field(G: np.ndarray):
    """Direct-trace ``a`` and ``b`` over a stack of tensors ``(..., 3, 3)``."""
    Gt = np.swapaxes(G, -1, -2)
    A = 0.5 * (G + Gt)
    B = 0.5 * (G - Gt)
    return np.sum(A * A, axis=(-2, -1)), np.sum(B * B, axis=(-2, -1))


def quadform_ab(s, which: str = "corrected"):
    """``(a, b) = (s M1 s^T, s M2 s^T)`` for a 9-vector or a stack of them."""
    try:
        M1, M2 = QUADFORMS[which]
    except KeyError:
        raise ValidationError(f"which must be one of {sorted(QUADFORMS)}, got {which!r}") from None
    s = np.asarray(s, dtype=np.float64)
    a = np.einsum("...i,ij,...j->...", s, M1, s)
    b = np.einsum("...i,ij,...j->...", s, M2, s)
    if s.ndim == 1:
        return float(a), float(b)
    return a, b


def q_value(pair: TensorPair) -> float:
    return (pair.b - pair.a) / 2.0


def omega_value(pair: TensorPair, eps: float = 1e-20) -> float:
    if not eps > 0:
        raise ValidationError("eps must be > 0")
    return pair.b / (pair.a + pair.b + eps)


def omega_eps(a: np.ndarray, b: np.ndarray, mask: np.ndarray) -> float:
    """Guard for ``b / (a + b)``: 1e-12 times the median of ``a + b`` over valid points."""
    vals = (a + b)[mask]
    med = float(np.median(vals)) if vals.size else 0.0
    return 1e-12 * med if med > 0 else 1e-20


def criteria_fields(grid: FlowGrid, t: int = 0) -> dict[str, ScalarField]:
    """``a``, ``b``, ``q`` and ``omega`` scalar fields at time index ``t``."""
    G, mask = gradient_field(grid, t)
    a, b = ab_field(G)
    eps = omega_eps(a, b, mask)
    return {
        "a": ScalarField(a, mask, "a"),
        "b": ScalarField(b, mask, "b"),
        "q": ScalarField((b - a) / 2.0, mask, "q"),
        "omega": ScalarField(b / (a + b + eps), mask, "omega"),
    }


def ivd_field(vorticity: ScalarField) -> ScalarField:
    """``|omega - mean(omega)|`` with the mean taken over valid points."""
    mask = vorticity.valid_mask
    vals = vorticity.values
    mean = vals[mask].mean() if mask.any() else 0.0
    return ScalarField(np.abs(vals - mean), mask, "ivd")


def ivd_vector_field(omega: np.ndarray, mask: np.ndarray) -> ScalarField:
    """IVD for full vorticity vectors ``(I, J, K, 3)``: norm of the deviation."""
    mean = omega[mask].mean(axis=0) if mask.any() else np.zeros(3)
    dev = np.linalg.norm(omega - mean, axis=-1)
    return ScalarField(dev, mask, "ivd")


def grid_ivd(grid: FlowGrid, t: int = 0) -> ScalarField:
    omega, mask = vorticity_field(grid, t)
    return ivd_vector_field(omega, mask)


def threshold_label(field: ScalarField, thr: float, mode: str = "greater") -> LabelVolume:
    if mode == "greater":
        hit = field.values > thr
    elif mode == "less":
        hit = field.values < thr
    else:
        raise ValidationError(f"mode must be 'greater' or 'less', got {mode!r}")
    src = f"{field.name or 'field'}{'>' if mode == 'greater' else '<'}{thr!r}"
    return LabelVolume(hit & field.valid_mask, field.valid_mask, source=src)
