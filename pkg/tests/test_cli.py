import json
import subprocess
import sys

import numpy as np
import pytest

from fwelnet.cli import main
from fwelnet.serialize import ModelDocument


def _write(path, arr):
    arr = np.atleast_2d(np.asarray(arr, dtype=float))
    if arr.shape[0] == 1 and arr.size > 1:
        arr = arr.T
    np.savetxt(path, arr, delimiter=",", fmt="%.17g")
    return str(path)


@pytest.fixture
def files(tmp_path):
    rng = np.random.default_rng(0)
    n, p = 60, 8
    x = rng.standard_normal((n, p))
    beta = np.r_[2.0, -1.5, 1.0, np.zeros(p - 3)]
    y = x @ beta + rng.standard_normal(n)
    yb = (x @ beta + rng.standard_normal(n) > 0).astype(float)
    z = np.column_stack([np.abs(beta) + 0.1 * rng.standard_normal(p), np.ones(p)])
    groups = np.repeat(np.arange(20), 3)
    return {
        "dir": tmp_path,
        "x": _write(tmp_path / "x.csv", x),
        "y": _write(tmp_path / "y.csv", y),
        "yb": _write(tmp_path / "yb.csv", yb),
        "z": _write(tmp_path / "z.csv", z),
        "zc": _write(tmp_path / "zc.csv", np.ones((p, 1))),
        "g": _write(tmp_path / "g.csv", groups),
        "y2": _write(tmp_path / "y2.csv", x @ np.r_[1.0, 0, 0, 2.0, np.zeros(p - 4)] + rng.standard_normal(n)),
    }


def _fit(files, *extra, out=None):
    out = out or str(files["dir"] / "m.json")
    code = main(["fit", "--x", files["x"], "--y", files["y"], "--nlambda", "20", "--out", out, *extra])
    return code, out


def test_fit_writes_model(files):
    code, out = _fit(files, "--z", files["z"], "--niter", "2")
    assert code == 0
    doc = ModelDocument.read(out)
    assert doc.coefficients.shape == (8, 20)
    assert doc.theta.shape == (2,)
    assert doc.config["n_iter"] == 2


def test_fit_to_stdout(files, capsys):
    assert main(["fit", "--x", files["x"], "--y", files["y"], "--nlambda", "5"]) == 0
    doc = ModelDocument.loads(capsys.readouterr().out)
    assert doc.lambdas.size == 5


def test_niter_zero_and_constant_z_match_plain_fit(files):
    _, plain = _fit(files, out=str(files["dir"] / "plain.json"))
    _, zero = _fit(files, "--z", files["z"], "--niter", "0", out=str(files["dir"] / "zero.json"))
    _, const = _fit(files, "--z", files["zc"], "--niter", "3", out=str(files["dir"] / "const.json"))
    ref = ModelDocument.read(plain)
    for path in (zero, const):
        doc = ModelDocument.read(path)
        np.testing.assert_array_equal(doc.coefficients, ref.coefficients)
        np.testing.assert_array_equal(doc.intercepts, ref.intercepts)
        np.testing.assert_array_equal(doc.lambdas, ref.lambdas)


def test_malformed_csv_is_data_error(files, capsys):
    bad = files["dir"] / "bad.csv"
    bad.write_text("1,2\n3,x\n")
    assert main(["fit", "--x", str(bad), "--y", files["y"]]) == 2
    assert "line 2, column 2" in capsys.readouterr().err


def test_dimension_mismatches_are_data_errors(files, capsys):
    short = _write(files["dir"] / "short.csv", np.arange(5.0))
    assert main(["fit", "--x", files["x"], "--y", short]) == 2
    assert "60 rows" in capsys.readouterr().err
    zbad = _write(files["dir"] / "zbad.csv", np.ones((3, 2)))
    assert main(["fit", "--x", files["x"], "--y", files["y"], "--z", zbad]) == 2
    assert "3 rows" in capsys.readouterr().err
    assert main(["fit", "--x", files["x"], "--y", files["y"], "--family", "binomial"]) == 2
    assert main(["fit", "--x", str(files["dir"] / "missing.csv"), "--y", files["y"]]) == 2


def test_usage_errors(files, capsys):
    assert main([]) == 1
    assert main(["fit", "--x", files["x"]]) == 1
    assert main(["fit", "--x", files["x"], "--y", files["y"], "--alpha", "2"]) == 1
    assert main(["simulate", "--setting", "9", "--out", "o"]) == 1
    err = capsys.readouterr().err
    assert "2a" in err and "fig1" in err
    assert main(["cv", "--x", files["x"], "--y", files["y"], "--metric", "auc", "--out", "o"]) == 1
    assert main(["cv", "--x", files["x"], "--y", files["y"], "--nfolds", "100", "--out", "o"]) == 1


def test_cv_outputs_and_fold_groups(files):
    out = str(files["dir"] / "cv")
    args = ["cv", "--x", files["x"], "--y", files["yb"], "--family", "binomial", "--metric", "auc",
            "--z", files["z"], "--nfolds", "4", "--fold-groups", files["g"], "--nlambda", "15",
            "--seed", "3", "--out", out]
    assert main(args) == 0
    rep = json.loads(open(out + ".json").read())
    s = rep["summary"]
    assert s["fold_integrity"]["groups_within_single_fold"] is True
    assert s["fold_integrity"]["n_groups"] == 20
    assert sum(s["fold_sizes"]) == 60
    assert s["metric"] == "auc" and s["lambda_1se"] >= s["lambda_min"]
    lines = open(out + ".csv").read().splitlines()
    assert lines[0] == "lambda,mean,se" and len(lines) == 16
    doc = ModelDocument.read(out + ".model.json")
    assert doc.cv["index_min"] == s["index_min"]


def test_predict_round_trip(files, capsys):
    out = str(files["dir"] / "cv")
    assert main(["cv", "--x", files["x"], "--y", files["y"], "--nfolds", "5", "--nlambda", "15",
                 "--out", out]) == 0
    doc = ModelDocument.read(out + ".model.json")
    x = np.loadtxt(files["x"], delimiter=",")
    capsys.readouterr()
    assert main(["predict", "--model", out + ".model.json", "--x", files["x"]]) == 0
    text = capsys.readouterr().out.splitlines()
    assert text[0] == "eta"
    got = np.array([float(v) for v in text[1:]])
    np.testing.assert_array_equal(got, doc.predict(x))
    _, plain = _fit(files)
    assert main(["predict", "--model", plain, "--x", files["x"]]) == 1
    assert main(["predict", "--model", plain, "--x", files["x"], "--lambda-index", "3"]) == 0
    assert main(["predict", "--model", plain, "--x", files["x"], "--lambda-index", "99"]) == 1


def test_weights_command(files, capsys, tmp_path):
    theta = tmp_path / "theta.json"
    theta.write_text("[0, 0]")
    assert main(["weights", "--z", files["z"], "--theta", str(theta)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "feature,score,weight"
    assert len(lines) == 9
    assert all(line.split(",")[2] == "1.0" for line in lines[1:])
    theta.write_text('{"theta": [1.0]}')
    assert main(["weights", "--z", files["z"], "--theta", str(theta)]) == 2


def test_multitask_command(files):
    out = str(files["dir"] / "mt.json")
    assert main(["multitask", "--x", files["x"], "--y1", files["y"], "--y2", files["y2"], "--outer", "2",
                 "--nfolds", "4", "--nlambda", "15", "--out", out]) == 0
    tree = json.loads(open(out).read())
    assert len(tree["snapshots"]) == 3
    assert len(tree["beta1"]) == len(tree["beta2"]) == 8


def _run_twice(tmp_path, make_args):
    outs = []
    for tag in ("a", "b"):
        d = tmp_path / tag
        d.mkdir()
        assert main(make_args(d)) == 0
        outs.append({f.name: f.read_bytes() for f in sorted(d.iterdir())})
    assert outs[0] == outs[1]
    assert outs[0]
    return outs[0]


@pytest.mark.parametrize("command", ["fit", "cv", "predict", "weights", "multitask"])
def test_commands_are_deterministic(files, tmp_path, command):
    model = str(files["dir"] / "model.json")
    main(["fit", "--x", files["x"], "--y", files["y"], "--z", files["z"], "--nlambda", "10", "--out", model])
    theta = files["dir"] / "theta.json"
    theta.write_text("[0.5, -0.25]")
    make = {
        "fit": lambda d: ["fit", "--x", files["x"], "--y", files["y"], "--z", files["z"], "--niter", "2",
                          "--seed", "5", "--out", str(d / "m.json")],
        "cv": lambda d: ["cv", "--x", files["x"], "--y", files["y"], "--z", files["z"], "--nfolds", "5",
                         "--nlambda", "15", "--seed", "5", "--out", str(d / "cv")],
        "predict": lambda d: ["predict", "--model", model, "--x", files["x"], "--lambda-index", "4",
                              "--out", str(d / "p.csv")],
        "weights": lambda d: ["weights", "--z", files["z"], "--theta", str(theta), "--out", str(d / "w.csv")],
        "multitask": lambda d: ["multitask", "--x", files["x"], "--y1", files["y"], "--y2", files["y2"],
                                "--outer", "1", "--nfolds", "4", "--nlambda", "10", "--seed", "2",
                                "--out", str(d / "mt.json")],
    }[command]
    _run_twice(tmp_path, make)


@pytest.mark.parametrize("setting", ["1", "fig1", "mt"])
def test_simulate_is_deterministic(tmp_path, setting):
    outs = _run_twice(tmp_path, lambda d: ["simulate", "--setting", setting, "--runs", "1", "--seed", "7",
                                           "--n-test", "200", "--nfolds", "3", "--nlambda", "15",
                                           "--out", str(d / "sim")])
    assert "sim.csv" in outs and "sim.json" in outs
    header = outs["sim.csv"].decode().splitlines()[0]
    assert header == "run,method,test_mse,tpr,fpr"
    if setting == "fig1":
        tree = json.loads(outs["sim.json"])
        assert "fig1" in tree and tree["fig1"]["n_runs"] == 1
        assert len(outs["sim_weights.csv"].decode().splitlines()) == 101


def test_module_entry_point(files, tmp_path):
    out = tmp_path / "m.json"
    proc = subprocess.run([sys.executable, "-m", "fwelnet", "fit", "--x", files["x"], "--y", files["y"],
                           "--nlambda", "5", "--out", str(out)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert ModelDocument.read(out).lambdas.size == 5
    proc = subprocess.run([sys.executable, "-m", "fwelnet", "simulate", "--setting", "x", "--out", "o"],
                          capture_output=True, text=True)
    assert proc.returncode == 1
