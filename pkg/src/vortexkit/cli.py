"""Batch command-line front end.

Each subcommand takes an optional JSON config (``--config``) whose keys may be
overridden by flags of the same name (underscores become dashes). Unknown
keys are rejected. The fully resolved config is written to the output
directory as ``config.json`` so any run can be replayed.

Exit codes: 0 success, 2 usage error, 3 validation error, 4 divergence.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from contextlib import nullcontext
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from .dataset import (
    extract_cls, extract_seg, load_norm, read_samples_csv, save_norm, write_samples_csv,
)
from .errors import DivergedError, FormatError, ValidationError, VortexKitError
from .experiments import (
    CLS_DIMS, CLS_DT, CLS_NUS, CLS_TIMESTEPS, CRITERIA, label_grid, run_classification,
    run_segmentation, taylor_green_family,
)
from .export import load_npz, save_field_npz, save_labels_npz, write_field_csv, write_vtk
from .flowgrid import FlowGrid, LabelVolume, ScalarField, load_fgrd, save_fgrd
from .metrics import Confusion, write_confusion_csv
from .nn import TrainConfig, evaluate, load_checkpoint, save_checkpoint
from .synth import KINDS, GenSpec, gen_lamb_oseen_street, generate

log = logging.getLogger("vortexkit")

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_DIVERGED = 0, 2, 3, 4
THREADS_ENV = "VORTEXKIT_THREADS"


class UsageError(VortexKitError):
    pass


@dataclass(frozen=True)
class Opt:
    type: str  # int | float | str | bool | json
    default: Any = None
    required: bool = False
    choices: tuple | None = None
    help: str = ""


_TRAIN_OPTS = {
    "learning_rate": Opt("float", 0.005),
    "epochs": Opt("int", 500),
    "batch_train": Opt("int", 128),
    "batch_test": Opt("int", 1024),
    "optimizer": Opt("str", "adam", choices=("adam", "sgd")),
    "normalize": Opt("bool", True),
    "ratio": Opt("float", 0.8),
    "seed": Opt("int", 0),
    "out": Opt("str", "out"),
}

SCHEMAS: dict[str, dict[str, Opt]] = {
    "gen": {
        "kind": Opt("str", required=True, choices=KINDS),
        "n": Opt("int", None, help="points per x/y axis (shorthand for dims)"),
        "nz": Opt("int", 3, help="points along z when --n is used"),
        "dims": Opt("json", None, help="[I, J, K]"),
        "extent": Opt("json", None, help="[[x0,x1],[y0,y1],[z0,z1]]"),
        "timesteps": Opt("int", 1, help="stored time levels T+1"),
        "dt": Opt("float", 0.1),
        "nu": Opt("float", 0.1),
        "amplitude": Opt("float", 1.0),
        "omega0": Opt("float", 1.0),
        "shear_rate": Opt("float", 1.0),
        "velocity": Opt("json", [1.0, 0.0, 0.0]),
        "vortices": Opt("json", []),
        "jitter": Opt("float", 0.0),
        "seed": Opt("int", 0),
        "out": Opt("str", "out"),
    },
    "label": {
        "grid": Opt("str", required=True),
        "criterion": Opt("str", "omega", choices=CRITERIA),
        "threshold": Opt("float", None),
        "mode": Opt("str", "greater", choices=("greater", "less")),
        "t": Opt("int", 0),
        "seed": Opt("int", 0),
        "out": Opt("str", "out"),
    },
    "extract": {
        "task": Opt("str", "seg", choices=("seg", "cls")),
        "grid": Opt("str", None),
        "labels": Opt("str", None),
        "grids": Opt("json", None, help="list of FGRD paths; class = list position"),
        "t": Opt("int", 0),
        "seed": Opt("int", 0),
        "out": Opt("str", "out"),
    },
    "train-seg": {
        "samples": Opt("str", None, help="sample CSV; alternative to grid+labels"),
        "grid": Opt("str", None),
        "labels": Opt("str", None),
        "criterion": Opt("str", "omega", choices=CRITERIA),
        "threshold": Opt("float", None),
        "t": Opt("int", 0),
        "hidden": Opt("json", [64, 64]),
        **_TRAIN_OPTS,
    },
    "train-cls": {
        "grids": Opt("json", None, help="list of FGRD paths in class order"),
        "nus": Opt("json", list(CLS_NUS), help="Taylor-Green viscosities when no grids given"),
        "dims": Opt("json", list(CLS_DIMS)),
        "timesteps": Opt("int", CLS_TIMESTEPS),
        "dt": Opt("float", CLS_DT),
        "groups": Opt("int", 5),
        "hidden": Opt("json", [64, 64]),
        **_TRAIN_OPTS,
    },
    "eval": {
        "model": Opt("str", required=True),
        "data": Opt("str", required=True),
        "norm": Opt("str", None),
        "batch_test": Opt("int", 1024),
        "seed": Opt("int", 0),
        "out": Opt("str", "out"),
    },
    "export": {
        "grid": Opt("str", required=True),
        "field": Opt("str", required=True, help="field.npz or labels.npz"),
        "format": Opt("str", "vtk", choices=("csv", "vtk")),
        "seed": Opt("int", 0),
        "out": Opt("str", "out"),
    },
}


def _convert(key, opt: Opt, value):
    if value is None:
        return None
    try:
        if opt.type == "int":
            if isinstance(value, bool) or (isinstance(value, float) and not value.is_integer()):
                raise ValueError(value)
            return int(value)
        if opt.type == "float":
            return float(value)
        if opt.type == "bool":
            if isinstance(value, str):
                low = value.lower()
                if low not in ("true", "false", "1", "0", "yes", "no"):
                    raise ValueError(value)
                return low in ("true", "1", "yes")
            return bool(value)
        if opt.type == "json":
            return json.loads(value) if isinstance(value, str) else value
        return str(value)
    except (TypeError, ValueError, json.JSONDecodeError):
        raise UsageError(f"invalid value for {key!r}: {value!r} (expected {opt.type})") from None


def resolve_config(command: str, file_cfg: dict | None, overrides: dict) -> dict:
    """Merge defaults < config file < flags, rejecting unknown keys."""
    schema = SCHEMAS[command]
    file_cfg = dict(file_cfg or {})
    unknown = sorted(set(file_cfg) - set(schema))
    if unknown:
        raise UsageError(f"unknown config keys for {command}: {unknown}")
    cfg = {}
    for key, opt in schema.items():
        if overrides.get(key) is not None:
            val = overrides[key]
        elif key in file_cfg:
            val = file_cfg[key]
        else:
            val = opt.default
        val = _convert(key, opt, val)
        if opt.required and val is None:
            raise UsageError(f"missing required key {key!r} for {command}")
        if opt.choices and val is not None and val not in opt.choices:
            raise UsageError(f"{key} must be one of {list(opt.choices)}, got {val!r}")
        cfg[key] = val
    if "epochs" in cfg and cfg["epochs"] < 1:
        raise UsageError("epochs must be >= 1")
    if "ratio" in cfg and not 0 < cfg["ratio"] < 1:
        raise UsageError("ratio must be in (0, 1)")
    return cfg


def _outdir(cfg) -> Path:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def cmd_gen(cfg) -> dict:
    if cfg["dims"] is not None:
        dims = tuple(cfg["dims"])
    elif cfg["n"] is not None:
        dims = (cfg["n"], cfg["n"], cfg["nz"])
    else:
        raise UsageError("gen needs either 'n' or 'dims'")
    spec = GenSpec(
        kind=cfg["kind"], dims=dims, extent=cfg["extent"], timesteps=cfg["timesteps"],
        dt=cfg["dt"], nu=cfg["nu"], amplitude=cfg["amplitude"], omega0=cfg["omega0"],
        shear_rate=cfg["shear_rate"], velocity=tuple(cfg["velocity"]), vortices=tuple(cfg["vortices"]),
        jitter=cfg["jitter"], seed=cfg["seed"],
    )
    out = _outdir(cfg)
    if spec.kind == "lamb_oseen_street":
        grid, cores = gen_lamb_oseen_street(spec)
        save_labels_npz(cores, out / "cores.npz")
    else:
        grid = generate(spec)
    save_fgrd(grid, out / "grid.fgrd")
    meta = {
        "spec": spec.to_dict(),
        "dims": list(grid.dims),
        "timesteps": grid.timesteps,
        "Re": (1.0 / spec.nu) if spec.kind.startswith("taylor_green") else None,
        "sha256": _digest(out / "grid.fgrd"),
    }
    _write_json(out / "meta.json", meta)
    return meta


def cmd_label(cfg) -> dict:
    grid = load_fgrd(cfg["grid"])
    field, labels, thr = label_grid(grid, cfg["criterion"], cfg["threshold"], cfg["t"], cfg["mode"])
    out = _outdir(cfg)
    save_field_npz(field, out / "field.npz")
    save_labels_npz(labels, out / "labels.npz")
    write_field_csv(grid, field, out / "field.csv")
    info = {"criterion": cfg["criterion"], "threshold": thr, "labeled": labels.count,
            "valid": int(labels.valid.sum()), "source": labels.source}
    _write_json(out / "labels.json", info)
    return info


def _load_labels(path) -> LabelVolume:
    obj = load_npz(path)
    if not isinstance(obj, LabelVolume):
        raise ValidationError(f"{path} holds a scalar field, not labels")
    return obj


def cmd_extract(cfg) -> dict:
    out = _outdir(cfg)
    if cfg["task"] == "seg":
        if not cfg["grid"] or not cfg["labels"]:
            raise UsageError("extract --task seg needs 'grid' and 'labels'")
        samples = extract_seg(load_fgrd(cfg["grid"]), cfg["t"], _load_labels(cfg["labels"]))
    else:
        if not cfg["grids"]:
            raise UsageError("extract --task cls needs 'grids'")
        samples = extract_cls([(load_fgrd(p), c) for c, p in enumerate(cfg["grids"])])
    write_samples_csv(samples, out / "samples.csv")
    return {"samples": len(samples), "width": samples.width, "positives": int(samples.y.sum())}


def _train_config(cfg, width, n_out, loss) -> TrainConfig:
    return TrainConfig(
        widths=(width, *[int(h) for h in cfg["hidden"]], n_out),
        learning_rate=cfg["learning_rate"], epochs=cfg["epochs"], batch_train=cfg["batch_train"],
        batch_test=cfg["batch_test"], seed=cfg["seed"], loss=loss, optimizer=cfg["optimizer"],
    )


def _save_run(res, out: Path):
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(res.model, out / "model.mlp1")
    save_norm(res.norm, out / "norm.json")
    write_samples_csv(res.train, out / "train.csv")
    write_samples_csv(res.test, out / "test.csv")
    res.report.save(out / "report.json")
    write_confusion_csv(Confusion(np.array(res.report.confusion)), out / "confusion.csv")


def cmd_train_seg(cfg) -> dict:
    if cfg["samples"]:
        samples = read_samples_csv(cfg["samples"], kind="seg")
    elif cfg["grid"]:
        grid = load_fgrd(cfg["grid"])
        if cfg["labels"]:
            labels = _load_labels(cfg["labels"])
        else:
            labels = label_grid(grid, cfg["criterion"], cfg["threshold"], cfg["t"])[1]
        samples = extract_seg(grid, cfg["t"], labels)
    else:
        raise UsageError("train-seg needs 'samples' or 'grid'")
    tc = _train_config(cfg, samples.width, 2, "bce")
    res = run_segmentation(samples, tc, cfg["ratio"], cfg["seed"], cfg["normalize"])
    out = _outdir(cfg)
    _save_run(res, out)
    return {"final": res.report.final, "wall_clock_seconds": res.report.wall_clock_seconds, **res.meta}


def cmd_train_cls(cfg) -> dict:
    if cfg["grids"]:
        family = [(load_fgrd(p), c) for c, p in enumerate(cfg["grids"])]
        classes = {str(c): p for c, p in enumerate(cfg["grids"])}
    else:
        nus = sorted(float(n) for n in cfg["nus"])
        family = taylor_green_family(nus, tuple(cfg["dims"]), cfg["timesteps"], cfg["dt"])
        classes = {str(c): {"nu": nu, "Re": 1.0 / nu} for c, nu in enumerate(nus)}
    samples = extract_cls(family)
    tc = _train_config(cfg, samples.width, len(family), "ce")
    results, summary = run_classification(samples, tc, cfg["groups"], cfg["ratio"], cfg["seed"],
                                          cfg["normalize"])
    out = _outdir(cfg)
    for res in results:
        _save_run(res, out / f"fold{res.meta['group']}")
    summary["classes"] = classes
    _write_json(out / "summary.json", summary)
    return summary


def cmd_eval(cfg) -> dict:
    model = load_checkpoint(cfg["model"])
    data = read_samples_csv(cfg["data"])
    if data.width != model.widths[0]:
        raise ValidationError(f"data has {data.width} features, model expects {model.widths[0]}")
    norm_path = cfg["norm"] or (Path(cfg["model"]).parent / "norm.json")
    X = load_norm(norm_path).apply(data.X) if Path(norm_path).exists() else data.X
    scores, conf = evaluate(model, X, data.y, cfg["batch_test"])
    out = _outdir(cfg)
    result = {"final": scores, "confusion": conf, "n": len(data)}
    _write_json(out / "metrics.json", result)
    write_confusion_csv(Confusion(np.array(conf)), out / "confusion.csv")
    return result


def cmd_export(cfg) -> dict:
    grid = load_fgrd(cfg["grid"])
    data = load_npz(cfg["field"])
    out = _outdir(cfg)
    stem = Path(cfg["field"]).stem
    if cfg["format"] == "vtk":
        path = out / f"{stem}.vtk"
        write_vtk(grid, data, path)
        return {"path": str(path), "points": int(np.prod(grid.dims))}
    path = out / f"{stem}.csv"
    rows = write_field_csv(grid, data, path)
    return {"path": str(path), "rows": rows}


COMMANDS: dict[str, Callable[[dict], dict]] = {
    "gen": cmd_gen,
    "label": cmd_label,
    "extract": cmd_extract,
    "train-seg": cmd_train_seg,
    "train-cls": cmd_train_cls,
    "eval": cmd_eval,
    "export": cmd_export,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vortexkit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, schema in SCHEMAS.items():
        p = sub.add_parser(name, help=COMMANDS[name].__doc__)
        p.add_argument("--config", help="JSON file with config keys")
        for key, opt in schema.items():
            p.add_argument("--" + key.replace("_", "-"), dest=key, default=None,
                           help=opt.help or None, metavar=opt.type.upper())
    return parser


def _thread_limit():
    raw = os.environ.get(THREADS_ENV)
    if not raw:
        return nullcontext()
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"{THREADS_ENV} must be an integer, got {raw!r}") from None
    if n < 1:
        raise UsageError(f"{THREADS_ENV} must be >= 1")
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=n)


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(message)s")
        file_cfg = {}
        if args.config:
            try:
                file_cfg = json.loads(Path(args.config).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise UsageError(f"cannot read config {args.config}: {exc}") from None
            if not isinstance(file_cfg, dict):
                raise UsageError("config file must hold a JSON object")
        overrides = {k: getattr(args, k) for k in SCHEMAS[args.command]}
        cfg = resolve_config(args.command, file_cfg, overrides)
        with _thread_limit():
            out = _outdir(cfg)
            _write_json(out / "config.json", {"command": args.command, **cfg})
            result = COMMANDS[args.command](cfg)
        print(json.dumps(result, indent=2, sort_keys=True, default=str))
        return EXIT_OK
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DivergedError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (ValidationError, FormatError, IndexError, OSError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
