"""End-to-end segmentation and classification runs shared by the CLI and tests."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .criteria import DEFAULT_OMEGA_THRESHOLD, criteria_fields, grid_ivd, threshold_label
from .dataset import NormRecord, SampleSet, extract_cls, extract_seg, group_folds, normalize, split_random
from .errors import ValidationError
from .flowgrid import FlowGrid, LabelVolume, ScalarField
from .nn import MLPModel, TrainConfig, TrainReport, init_uniform, train
from .synth import GenSpec, gen_taylor_green_2d

CRITERIA = ("q", "omega", "ivd")
DEFAULT_THRESHOLDS = {"q": 0.0, "omega": DEFAULT_OMEGA_THRESHOLD}

# Desk-scale stand-in for the wake-classification data: Taylor-Green families
# on a grid whose x nodes avoid the cos(x) = 0 lines, where the vorticity
# series vanishes for every viscosity and carries no class information.
CLS_NUS = (0.05, 0.1, 0.2, 0.4)
CLS_DIMS = (32, 17, 10)
CLS_TIMESTEPS = 21
CLS_DT = 0.1


def criterion_field(grid: FlowGrid, criterion: str, t: int = 0) -> ScalarField:
    if criterion == "ivd":
        return grid_ivd(grid, t)
    if criterion in ("q", "omega"):
        return criteria_fields(grid, t)[criterion]
    raise ValidationError(f"unknown criterion {criterion!r}; expected one of {CRITERIA}")


def default_threshold(criterion: str, field: ScalarField) -> float:
    if criterion in DEFAULT_THRESHOLDS:
        return DEFAULT_THRESHOLDS[criterion]
    # IVD has no universal level; half the field maximum keeps the strong cores
    vals = field.values[field.valid_mask]
    return 0.5 * float(vals.max()) if vals.size else 0.0


def label_grid(grid, criterion="omega", threshold=None, t=0, mode="greater"):
    """Returns ``(field, labels, threshold_used)``."""
    fld = criterion_field(grid, criterion, t)
    thr = default_threshold(criterion, fld) if threshold is None else float(threshold)
    return fld, threshold_label(fld, thr, mode), thr


@dataclass
class RunResult:
    model: MLPModel
    report: TrainReport
    norm: NormRecord
    train: SampleSet
    test: SampleSet
    meta: dict = field(default_factory=dict)


def _train_split(tr, te, config, use_norm, seed):
    if use_norm:
        trn, ten, rec = normalize(tr, te)
    else:
        rec = NormRecord.identity(tr.width)
        trn, ten = replace(tr, norm=rec), replace(te, norm=rec)
    model = init_uniform(config.widths, seed)
    report = train(model, trn, ten, config)
    return RunResult(model, report, rec, tr, te)


def run_segmentation(samples: SampleSet, config: TrainConfig, ratio=0.8, seed=0, use_norm=True) -> RunResult:
    """Random ``ratio`` split, optional standardization, then training."""
    if samples.width != config.widths[0]:
        raise ValidationError(f"samples have {samples.width} features, model expects {config.widths[0]}")
    tr, te = split_random(samples, ratio, seed)
    res = _train_split(tr, te, config, use_norm, config.seed)
    res.meta = {"ratio": ratio, "split_seed": seed, "n_train": len(tr), "n_test": len(te)}
    return res


def taylor_green_family(nus=CLS_NUS, dims=CLS_DIMS, timesteps=CLS_TIMESTEPS, dt=CLS_DT):
    """``[(grid, class)]`` with classes assigned in ascending viscosity order."""
    ordered = sorted(float(n) for n in nus)
    return [
        (gen_taylor_green_2d(GenSpec("taylor_green_2d", dims=tuple(dims), nu=nu,
                                     timesteps=timesteps, dt=dt)), c)
        for c, nu in enumerate(ordered)
    ]


def run_classification(samples: SampleSet, config: TrainConfig, groups=5, ratio=0.8, seed=0,
                       use_norm=True):
    """One training run per slice group; returns ``(results, summary)``."""
    if samples.width != config.widths[0]:
        raise ValidationError(f"samples have {samples.width} features, model expects {config.widths[0]}")
    results = []
    for g, (tr, te) in enumerate(group_folds(samples, groups, ratio, seed)):
        cfg = replace(config, seed=config.seed + g)
        res = _train_split(tr, te, cfg, use_norm, cfg.seed)
        res.meta = {"group": g, "n_train": len(tr), "n_test": len(te)}
        results.append(res)
    return results, summarize_folds([r.report for r in results])


def summarize_folds(reports) -> dict:
    out = {"folds": len(reports)}
    for key in ("accuracy", "precision", "recall"):
        vals = np.array([r.final[key] for r in reports])
        out[key] = {"mean": float(vals.mean()), "std": float(vals.std()), "values": vals.tolist()}
    secs = np.array([r.wall_clock_seconds for r in reports])
    out["wall_clock_seconds"] = {"mean": float(secs.mean()), "max": float(secs.max()),
                                 "values": secs.tolist()}
    return out
