"""Network inputs: 15-point velocity stencils and mid-row vorticity series.

Sample sets are stored as arrays rather than per-sample objects. Segmentation
origins are ``(t, i, j, k)``; classification origins are ``(member, i, k)``
where ``member`` indexes the grid in the family passed to :func:`extract_cls`.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from os import PathLike

import numpy as np

from .errors import FormatError, ValidationError
from .flowgrid import FlowGrid, LabelVolume, slice_plane
from .numerics import vorticity_2d_field

# (component, di, dj, dk) in feature order
SEG_STENCIL = (
    ("u", 0, -1, 0), ("u", 0, 0, 0), ("u", 0, 1, 0), ("u", 0, 0, -1), ("u", 0, 0, 1),
    ("v", -1, 0, 0), ("v", 0, 0, 0), ("v", 1, 0, 0), ("v", 0, 0, -1), ("v", 0, 0, 1),
    ("w", -1, 0, 0), ("w", 0, 0, 0), ("w", 1, 0, 0), ("w", 0, -1, 0), ("w", 0, 1, 0),
)
SEG_FEATURE_NAMES = tuple(
    f"{c}[i{di:+d},j{dj:+d},k{dk:+d}]".replace("+0", "").replace("-0", "")
    for c, di, dj, dk in SEG_STENCIL
)


@dataclass(frozen=True)
class NormRecord:
    """Per-feature affine map ``(x - shift) / scale``."""

    shift: np.ndarray
    scale: np.ndarray

    def apply(self, X):
        return (np.asarray(X, dtype=np.float64) - self.shift) / self.scale

    def invert(self, Xn):
        return np.asarray(Xn, dtype=np.float64) * self.scale + self.shift

    def to_dict(self):
        return {"shift": self.shift.tolist(), "scale": self.scale.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["shift"], dtype=np.float64), np.asarray(d["scale"], dtype=np.float64))

    @classmethod
    def identity(cls, width):
        return cls(np.zeros(width), np.ones(width))


@dataclass(frozen=True, eq=False)
class SampleSet:
    X: np.ndarray
    y: np.ndarray
    origins: np.ndarray
    kind: str  # "seg" or "cls"
    norm: NormRecord | None = None
    split: str = ""
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        if X.ndim != 2:
            raise ValidationError(f"features must be 2-D, got shape {X.shape}")
        y = np.asarray(self.y, dtype=np.int64)
        origins = np.asarray(self.origins, dtype=np.int64).reshape(len(X), -1)
        if len(y) != len(X):
            raise ValidationError("feature and label counts differ")
        if self.kind not in ("seg", "cls"):
            raise ValidationError(f"kind must be 'seg' or 'cls', got {self.kind!r}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "origins", origins)

    def __len__(self):
        return len(self.X)

    @property
    def width(self) -> int:
        return self.X.shape[1]

    def subset(self, idx, split: str = "") -> "SampleSet":
        idx = np.asarray(idx, dtype=np.int64)
        return replace(self, X=self.X[idx], y=self.y[idx], origins=self.origins[idx],
                       split=split or self.split)


def extract_seg(grid: FlowGrid, t: int, labels: LabelVolume) -> SampleSet:
    """One 15-feature stencil per interior point where ``labels.valid`` holds."""
    if labels.shape != grid.dims:
        raise ValidationError(f"labels shape {labels.shape} does not match grid {grid.dims}")
    if not (0 <= t < grid.timesteps):
        raise ValidationError(f"time index {t} out of range")
    I, J, K = grid.dims
    if min(I, J, K) < 3:
        raise ValidationError(f"segmentation stencil needs >= 3 points per axis, got {grid.dims}")
    inner = np.zeros(grid.dims, dtype=bool)
    inner[1:-1, 1:-1, 1:-1] = True
    pts = np.argwhere(inner & labels.valid)
    i, j, k = pts[:, 0], pts[:, 1], pts[:, 2]
    comps = {"u": grid.u[t], "v": grid.v[t], "w": grid.w[t]}
    X = np.stack([comps[c][i + di, j + dj, k + dk] for c, di, dj, dk in SEG_STENCIL], axis=1)
    y = labels.labels[i, j, k].astype(np.int64)
    origins = np.column_stack([np.full(len(pts), t), pts])
    return SampleSet(X, y, origins, kind="seg", meta={"source": labels.source})


def mid_row(J: int) -> int:
    """0-based centre row; the lower middle when ``J`` is even."""
    return (J - 1) // 2


def extract_cls(family) -> SampleSet:
    """Mid-row vorticity time series for every interior ``i`` of every z-slice.

    ``family`` is a sequence of ``(grid, class_index)`` pairs sharing shape.
    """
    family = list(family)
    if not family:
        raise ValidationError("empty grid family")
    ref = family[0][0]
    for g, _ in family:
        if g.dims != ref.dims or g.timesteps != ref.timesteps:
            raise ValidationError(
                f"heterogeneous family: {g.dims}/{g.timesteps} vs {ref.dims}/{ref.timesteps}"
            )
    I, J, K = ref.dims
    if I < 3 or J < 3:
        raise ValidationError("classification needs >= 3 points in x and y")
    jm = mid_row(J)
    ii = np.arange(1, I - 1)
    X, y, origins = [], [], []
    for member, (g, cls) in enumerate(family):
        for k in range(K):
            s = slice_plane(g, k)
            series = np.stack(
                [vorticity_2d_field(s, t).values[1:-1, jm, 0] for t in range(g.timesteps)], axis=1
            )
            X.append(series)
            y.append(np.full(len(ii), int(cls)))
            origins.append(np.column_stack([np.full(len(ii), member), ii, np.full(len(ii), k)]))
    return SampleSet(np.concatenate(X), np.concatenate(y), np.concatenate(origins), kind="cls",
                     meta={"mid_row": jm})


def _n_train(n, ratio):
    return int(np.floor(ratio * n + 0.5))


def split_random(samples: SampleSet, ratio: float = 0.8, seed: int = 0):
    if not 0 < ratio < 1:
        raise ValidationError("ratio must be in (0, 1)")
    perm = np.random.default_rng(seed).permutation(len(samples))
    n = _n_train(len(samples), ratio)
    train = samples.subset(np.sort(perm[:n]), split="train")
    test = samples.subset(np.sort(perm[n:]), split="test")
    return replace(train, seed=seed), replace(test, seed=seed)


def _slice_ids(samples):
    # slice index is the last origin column for both seg (k) and cls (k)
    return samples.origins[:, -1]


def group_folds(samples: SampleSet, groups: int = 5, ratio: float = 0.8, seed: int = 0):
    """Contiguous slice groups, each split into train/test slices.

    Returns ``groups`` pairs ``(train, test)``; fold ``g`` uses only slices
    belonging to group ``g``.
    """
    slices = np.unique(_slice_ids(samples))
    if groups < 1 or groups > slices.size:
        raise ValidationError(f"cannot form {groups} groups from {slices.size} slices")
    rng = np.random.default_rng(seed)
    folds = []
    for g, members in enumerate(np.array_split(slices, groups)):
        if members.size < 2:
            raise ValidationError(f"group {g} has {members.size} slice(s); need >= 2 to split")
        order = rng.permutation(members)
        n = min(max(_n_train(members.size, ratio), 1), members.size - 1)
        ids = _slice_ids(samples)
        tr = np.flatnonzero(np.isin(ids, order[:n]))
        te = np.flatnonzero(np.isin(ids, order[n:]))
        folds.append((
            replace(samples.subset(tr, split=f"group{g}/train"), seed=seed),
            replace(samples.subset(te, split=f"group{g}/test"), seed=seed),
        ))
    return folds


def fit_norm(X) -> NormRecord:
    X = np.asarray(X, dtype=np.float64)
    shift = X.mean(axis=0)
    scale = X.std(axis=0)
    scale = np.where(scale > 0, scale, 1.0)
    return NormRecord(shift, scale)


def normalize(train: SampleSet, test: SampleSet | None = None):
    """Standardize with training statistics; returns ``(train', test', record)``."""
    rec = fit_norm(train.X)
    tr = replace(train, X=rec.apply(train.X), norm=rec)
    te = None if test is None else replace(test, X=rec.apply(test.X), norm=rec)
    return tr, te, rec


def _origin_str(o):
    return ":".join(str(int(v)) for v in o)


def write_samples_csv(samples: SampleSet, path: str | PathLike) -> None:
    """Header ``f0..f{N-1},label,origin``; origin joins indices with ':'."""
    header = [f"f{n}" for n in range(samples.width)] + ["label", "origin"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for x, lab, o in zip(samples.X, samples.y, samples.origins):
            w.writerow([repr(float(v)) for v in x] + [int(lab), _origin_str(o)])


def read_samples_csv(path: str | PathLike, kind: str | None = None) -> SampleSet:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise FormatError(f"{path}: empty sample file")
    header = rows[0]
    if len(header) < 3 or header[-2:] != ["label", "origin"]:
        raise FormatError(f"{path}: header must end with label,origin")
    width = len(header) - 2
    if header[:width] != [f"f{n}" for n in range(width)]:
        raise FormatError(f"{path}: feature columns must be f0..f{width - 1}")
    body = rows[1:]
    for n, r in enumerate(body, start=2):
        if len(r) != width + 2:
            raise FormatError(f"{path}: line {n} has {len(r)} columns, expected {width + 2}")
    X = np.array([[float(v) for v in r[:width]] for r in body], dtype=np.float64).reshape(-1, width)
    y = np.array([int(r[width]) for r in body], dtype=np.int64)
    origins = [[int(v) for v in r[width + 1].split(":")] for r in body]
    ncol = len(origins[0]) if origins else (4 if width == 15 else 3)
    if kind is None:
        kind = "seg" if ncol == 4 else "cls"
    return SampleSet(X, y, np.array(origins, dtype=np.int64).reshape(-1, ncol), kind=kind)


def save_norm(rec: NormRecord, path) -> None:
    with open(path, "w") as fh:
        json.dump(rec.to_dict(), fh, indent=2)


def load_norm(path) -> NormRecord:
    with open(path) as fh:
        return NormRecord.from_dict(json.load(fh))
