import json
import subprocess
import sys

import numpy as np
import pytest

from vortexkit.cli import EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, UsageError, resolve_config, run
from vortexkit.export import load_npz
from vortexkit.nn import init_uniform, save_checkpoint


def _json(path):
    return json.loads(path.read_text())


def _gen(tmp_path, name, *args):
    out = tmp_path / name
    assert run(["gen", "--out", str(out), *args]) == EXIT_OK
    return out


def test_gen_digest_deterministic(tmp_path, capsys):
    a = _gen(tmp_path, "a", "--kind", "taylor_green_2d", "--n", "9", "--timesteps", "3")
    b = _gen(tmp_path, "b", "--kind", "taylor_green_2d", "--n", "9", "--timesteps", "3")
    assert (a / "grid.fgrd").read_bytes() == (b / "grid.fgrd").read_bytes()
    meta = _json(a / "meta.json")
    assert meta["sha256"] == _json(b / "meta.json")["sha256"]
    assert meta["dims"] == [9, 9, 3] and meta["Re"] == 10.0
    assert _json(a / "config.json")["command"] == "gen"


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"kind": "uniform", "n": 4, "nz": 4, "velocity": [2, 0, 0]}))
    out = _gen(tmp_path, "u", "--config", str(cfg), "--nz", "5")
    assert _json(out / "meta.json")["dims"] == [4, 4, 5]
    assert _json(out / "config.json")["velocity"] == [2, 0, 0]


@pytest.mark.parametrize("argv", [
    ["gen", "--n", "5"],                                  # missing kind
    ["gen", "--kind", "nope", "--n", "5"],
    ["train-cls", "--epochs", "0"],
    ["train-cls", "--ratio", "1.5"],
    ["label", "--grid", "x.fgrd", "--criterion", "lambda2"],
    ["frobnicate"],
])
def test_usage_errors(tmp_path, argv, capsys):
    assert run(argv + ["--out", str(tmp_path / "o")] if argv[0] != "frobnicate" else argv) == EXIT_USAGE
    assert "usage error" in capsys.readouterr().err


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"kind": "uniform", "n": 4, "colour": "red"}))
    assert run(["gen", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_USAGE
    with pytest.raises(UsageError):
        resolve_config("gen", {"kind": "uniform", "bogus": 1}, {})


def test_label_uniform_q_empty(tmp_path):
    g = _gen(tmp_path, "g", "--kind", "uniform", "--n", "6", "--nz", "6")
    out = tmp_path / "lab"
    assert run(["label", "--grid", str(g / "grid.fgrd"), "--criterion", "q", "--out", str(out)]) == 0
    info = _json(out / "labels.json")
    assert info["labeled"] == 0 and info["valid"] == 64
    assert load_npz(out / "labels.npz").count == 0


def test_label_street_omega_covers_cores(tmp_path):
    g = _gen(tmp_path, "g", "--kind", "lamb_oseen_street", "--dims", "[49, 25, 3]")
    out = tmp_path / "lab"
    assert run(["label", "--grid", str(g / "grid.fgrd"), "--out", str(out)]) == 0
    labels = load_npz(out / "labels.npz")
    cores = load_npz(g / "cores.npz")
    inside = cores.labels & labels.valid
    assert (labels.labels & inside).sum() / inside.sum() >= 0.9


def test_segmentation_pipeline_and_eval(tmp_path):
    g = _gen(tmp_path, "g", "--kind", "lamb_oseen_street", "--dims", "[33, 17, 5]")
    lab = tmp_path / "lab"
    assert run(["label", "--grid", str(g / "grid.fgrd"), "--out", str(lab)]) == 0
    ex = tmp_path / "ex"
    assert run(["extract", "--grid", str(g / "grid.fgrd"), "--labels", str(lab / "labels.npz"),
                "--out", str(ex)]) == 0
    rows = (ex / "samples.csv").read_text().splitlines()
    assert len(rows) == 1 + 31 * 15 * 3
    tr = tmp_path / "tr"
    assert run(["train-seg", "--samples", str(ex / "samples.csv"), "--epochs", "3",
                "--out", str(tr)]) == 0
    for name in ("model.mlp1", "norm.json", "train.csv", "test.csv", "report.json", "confusion.csv"):
        assert (tr / name).exists()
    report = _json(tr / "report.json")
    assert len(report["history"]) == 3
    ev = tmp_path / "ev"
    assert run(["eval", "--model", str(tr / "model.mlp1"), "--data", str(tr / "test.csv"),
                "--out", str(ev)]) == 0
    metrics = _json(ev / "metrics.json")
    assert metrics["final"] == report["final"]
    assert metrics["confusion"] == report["confusion"]


def test_eval_width_mismatch(tmp_path):
    model = tmp_path / "m.mlp1"
    save_checkpoint(init_uniform((4, 3, 2), 0), model)
    data = tmp_path / "d.csv"
    data.write_text("f0,f1,label,origin\n1.0,2.0,0,0:1:2\n")
    assert run(["eval", "--model", str(model), "--data", str(data), "--out", str(tmp_path / "o")]) \
        == EXIT_VALIDATION


def test_missing_input_file(tmp_path):
    assert run(["label", "--grid", str(tmp_path / "none.fgrd"), "--out", str(tmp_path / "o")]) \
        == EXIT_VALIDATION


def test_export_formats(tmp_path):
    g = _gen(tmp_path, "g", "--kind", "solid_body", "--n", "4", "--nz", "4")
    lab = tmp_path / "lab"
    assert run(["label", "--grid", str(g / "grid.fgrd"), "--out", str(lab)]) == 0
    ex = tmp_path / "ex"
    assert run(["export", "--grid", str(g / "grid.fgrd"), "--field", str(lab / "field.npz"),
                "--out", str(ex)]) == 0
    assert "POINTS 64 double" in (ex / "field.vtk").read_text()
    assert run(["export", "--grid", str(g / "grid.fgrd"), "--field", str(lab / "labels.npz"),
                "--format", "csv", "--out", str(ex)]) == 0
    assert len((ex / "labels.csv").read_text().splitlines()) == 1 + 8


def test_train_cls_outputs(tmp_path):
    out = tmp_path / "cls"
    assert run(["train-cls", "--epochs", "2", "--dims", "[12, 5, 10]", "--timesteps", "6",
                "--out", str(out)]) == 0
    summary = _json(out / "summary.json")
    assert summary["folds"] == 5 and len(summary["classes"]) == 4
    for g in range(5):
        rep = _json(out / f"fold{g}" / "report.json")
        assert np.array(rep["confusion"]).shape == (4, 4)
        cells = sum(len(r.split(",")) for r in (out / f"fold{g}" / "confusion.csv").read_text().splitlines())
        assert cells == 16 + 4


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "vortexkit", "gen", "--kind", "uniform", "--n", "3",
                           "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["dims"] == [3, 3, 3]
