"""Visualization handoff: legacy ASCII VTK structured grids and point CSVs."""
from __future__ import annotations

import csv

import numpy as np

from .errors import ValidationError
from .flowgrid import FlowGrid, LabelVolume, ScalarField


def _as_field(data) -> ScalarField:
    if isinstance(data, ScalarField):
        return data
    if isinstance(data, LabelVolume):
        return ScalarField(data.labels.astype(np.float64), data.valid, name="vortex")
    raise ValidationError(f"cannot export {type(data).__name__}")


def _check(grid: FlowGrid, field: ScalarField):
    if field.shape != grid.dims:
        raise ValidationError(f"field shape {field.shape} does not match grid {grid.dims}")


def write_vtk(grid: FlowGrid, data, path, name: str | None = None) -> None:
    """Legacy VTK ``STRUCTURED_GRID`` with one ``POINT_DATA`` scalar; x varies fastest."""
    field = _as_field(data)
    _check(grid, field)
    name = (name or field.name or "value").replace(" ", "_")
    I, J, K = grid.dims
    n = I * J * K
    # VTK point order: i fastest, then j, then k
    X, Y, Z = np.meshgrid(grid.x, grid.y, grid.z, indexing="ij")
    order = lambda a: a.transpose(2, 1, 0).ravel()
    pts = np.column_stack([order(X), order(Y), order(Z)])
    vals = order(field.values)
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(f"vortexkit {name}\n")
        fh.write("ASCII\n")
        fh.write("DATASET STRUCTURED_GRID\n")
        fh.write(f"DIMENSIONS {I} {J} {K}\n")
        fh.write(f"POINTS {n} double\n")
        for p in pts:
            fh.write(f"{float(p[0])!r} {float(p[1])!r} {float(p[2])!r}\n")
        fh.write(f"POINT_DATA {n}\n")
        fh.write(f"SCALARS {name} double 1\n")
        fh.write("LOOKUP_TABLE default\n")
        for v in vals:
            fh.write(f"{float(v)!r}\n")


def write_field_csv(grid: FlowGrid, data, path) -> int:
    """Rows ``x,y,z,value`` for valid points only; returns the row count."""
    field = _as_field(data)
    _check(grid, field)
    idx = np.argwhere(field.valid_mask)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "z", "value"])
        for i, j, k in idx:
            w.writerow([repr(float(grid.x[i])), repr(float(grid.y[j])), repr(float(grid.z[k])),
                        repr(float(field.values[i, j, k]))])
    return len(idx)


def save_field_npz(field: ScalarField, path) -> None:
    np.savez(path, values=field.values, valid_mask=field.valid_mask, name=np.array(field.name))


def save_labels_npz(labels: LabelVolume, path) -> None:
    np.savez(path, labels=labels.labels, valid=labels.valid, source=np.array(labels.source))


def load_npz(path):
    """Load a saved :class:`ScalarField` or :class:`LabelVolume`."""
    with np.load(path, allow_pickle=False) as z:
        if "labels" in z:
            return LabelVolume(z["labels"], z["valid"], source=str(z["source"]))
        if "values" in z:
            return ScalarField(z["values"], z["valid_mask"], name=str(z["name"]))
    raise ValidationError(f"{path}: neither a field nor a label archive")
