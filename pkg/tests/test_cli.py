import csv
import json
import math
import subprocess
import sys

import pytest

from fractal_sl.cli import main


def rows(path):
    lines = [l for l in path.read_text().splitlines() if l and not l.startswith("#")]
    return list(csv.DictReader(lines))


def kv(text):
    return dict(line.split(": ", 1) for line in text.strip().splitlines())


# ---------------------------------------------------------- spectral-order

def test_spectral_order_cantor(capsys):
    assert main(["spectral-order", "--builtin", "cantor"]) == 0
    out = kv(capsys.readouterr().out)
    assert float(out["D"]) == pytest.approx(0.773705, abs=1e-6)
    assert float(out["nu"]) == pytest.approx(math.log(6), abs=1e-15)
    assert out["l"] == "1 - 1"
    assert out["parity_condition"] == "true"


def test_spectral_order_identity(capsys):
    main(["spectral-order", "--builtin", "linear_1"])
    out = kv(capsys.readouterr().out)
    assert float(out["D"]) == pytest.approx(1.0, abs=1e-10)
    assert float(out["nu"]) == pytest.approx(math.log(4), abs=1e-15)
    main(["spectral-order", "--builtin", "linear_3"])
    assert kv(capsys.readouterr().out)["arithmetic"] == "false"


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "w.json"
    cfg.write_text(json.dumps({"a": ["1/3", "1/3", "1/3"], "d": ["1/2", 0, "1/2"], "beta": [0, "2/5", "1/2"]}))
    assert main(["spectral-order", "--config", str(cfg)]) == 0
    assert kv(capsys.readouterr().out)["exact_mode"] == "true"
    cfg.write_text(json.dumps({"builtin": "tilde_P", "params": ["1/5"]}))
    assert main(["spectral-order", "--config", str(cfg)]) == 0
    assert float(kv(capsys.readouterr().out)["D"]) == pytest.approx(math.log(9) / math.log(25 / 3), abs=1e-12)


@pytest.mark.parametrize(
    "text, needle",
    [
        ('{"a": [0.5, 0.5],\n "d": [0.5 0.5]}', ":2:"),
        ('{"a": [0.5, 0.5], "d": [0.5, 0.5]}', "beta"),
        ('{"a": [0.5, 0.6], "d": [0, 0], "beta": [0, 0]}', "sum of a_k"),
        ('{"a": 3, "d": [0, 0], "beta": [0, 0]}', "'a'"),
        ('{"builtin": "tilde_P", "params": [0.5]}', "builtin"),
        ('[1, 2]', "object"),
    ],
)
def test_config_errors(tmp_path, capsys, text, needle):
    cfg = tmp_path / "bad.json"
    cfg.write_text(text)
    assert main(["eigs", "--config", str(cfg)]) == 2
    assert needle in capsys.readouterr().err


def test_missing_weight_and_bad_usage(capsys):
    assert main(["eigs"]) == 2
    assert main(["eigs", "--builtin", "cantor", "--count", "0"]) == 2
    assert main(["nonsense"]) == 2
    assert main(["eigs", "--builtin", "unknown_w"]) == 2


# -------------------------------------------------------------------- eigs

def test_cantor_preset_csv(tmp_path):
    out = tmp_path / "t1.csv"
    assert main(["eigs", "--table1", "--out", str(out)]) == 0
    text = out.read_text()
    assert text.startswith("# fractal-sl v1\n")
    r = rows(out)
    assert len(r) == 20
    assert float(r[0]["lambda"]) == pytest.approx(14.4, rel=0.02)
    assert float(r[13]["n_over_lambda_pow"]) == pytest.approx(0.702, abs=0.002)
    assert all(abs(float(x["depth_shift_rel"])) < 0.01 for x in r)


def test_hat_negative_side(tmp_path):
    out = tmp_path / "m.csv"
    assert main(["eigs", "--builtin", "hat_P", "--side", "-", "--count", "3", "--out", str(out)]) == 0
    vals = [float(x["lambda"]) for x in rows(out)]
    assert len(vals) == 3 and all(-1e4 < v < 0 for v in vals)


def test_partial_exit_code(tmp_path, capsys):
    out = tmp_path / "p.csv"
    assert main(["eigs", "--builtin", "cantor", "--side", "minus", "--depth", "6", "--out", str(out)]) == 4
    assert "warning" in capsys.readouterr().out
    assert rows(out) == []


def test_deterministic_output(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    args = ["eigs", "--builtin", "tilde_P:0.2", "--count", "5", "--depth", "7"]
    main(args + ["--out", str(a)])
    main(args + ["--out", str(b)])
    assert a.read_bytes() == b.read_bytes()


# ----------------------------------------------------------------- inertia

def test_inertia_values(capsys):
    assert main(["inertia", "--builtin", "cantor", "--lambda", "0"]) == 0
    assert kv(capsys.readouterr().out)["index"] == "0"
    main(["inertia", "--builtin", "hat_P", "--lambda", "1e4"])
    assert kv(capsys.readouterr().out)["index"] == "19"
    main(["inertia", "--builtin", "hat_P", "--lambda", "-1e4"])
    assert kv(capsys.readouterr().out)["index"] == "3"
    assert main(["inertia", "--builtin", "hat_P", "--lambda", "inf"]) == 2


# --------------------------------------------------------------- s-profile

def test_cantor_profile_certificate(tmp_path, capsys):
    out = tmp_path / "s.csv"
    assert main(["s-profile", "--builtin", "cantor", "--out", str(out)]) == 0
    report = capsys.readouterr().out
    assert "s_+(lambda_14+0) >= 0.60 > 0.56 >= s_+(lambda_17+0)" in report
    assert "no eigenvalues below" in report
    r = rows(out)
    assert len(r) == 200
    assert r[0]["s_minus_est"] == ""
    for x in r:
        assert float(x["s_plus_lo"]) <= float(x["s_plus_hi"])


def test_hat_profile_prints_points(tmp_path, capsys):
    assert main(["s-profile", "--builtin", "hat_P", "--out", str(tmp_path / "h.csv")]) == 0
    report = capsys.readouterr().out
    plus = next(l for l in report.splitlines() if l.startswith("s_+(log_6 10000)"))
    minus = next(l for l in report.splitlines() if l.startswith("s_-(log_6 10000)"))
    assert float(plus.split("[")[1].split(",")[0]) >= 0.48
    assert float(minus.split(", ")[1].split("]")[0]) <= 0.15


def test_profile_refuses_non_arithmetic(capsys):
    assert main(["s-profile", "--builtin", "linear_3"]) == 3
    assert "arithmetic" in capsys.readouterr().err


@pytest.mark.parametrize("weight", ["cantor", "tilde_P:0.2"])
def test_spectrum_round_trip(tmp_path, weight):
    base = ["--builtin", weight, "--count", "12", "--depth", "7"]
    ep, em = tmp_path / "p.csv", tmp_path / "m.csv"
    main(["eigs", *base, "--side", "plus", "--out", str(ep)])
    main(["eigs", *base, "--side", "minus", "--out", str(em)])
    direct, again = tmp_path / "d.csv", tmp_path / "r.csv"
    assert main(["s-profile", *base, "--out", str(direct)]) == 0
    assert main(["s-profile", *base, "--spectrum", str(ep), "--spectrum", str(em), "--out", str(again)]) == 0
    assert direct.read_bytes() == again.read_bytes()


# ----------------------------------------------------------------- renewal

@pytest.mark.parametrize(
    "cfg, limit, cols",
    [
        ({"u": [1], "x": [1]}, 1.0, 3),
        ({"u": [0.5, 0.5], "x": [1]}, 2 / 3, 3),
        ({"u": [0.5], "v": [0.5], "x1": [1], "x2": [0]}, 0.5, 4),
        ({"u": [0, 0.25], "v": [0.5, 0.25], "x1": [1], "x2": [1]}, 2 / 3, 4),
    ],
)
def test_renewal_examples(tmp_path, cfg, limit, cols):
    path, out = tmp_path / "r.json", tmp_path / "r.csv"
    path.write_text(json.dumps(cfg))
    assert main(["renewal", "--config", str(path), "--n-max", "200", "--out", str(out)]) == 0
    r = rows(out)
    assert len(r) == 201 and len(r[0]) == cols
    assert float(r[-1]["limit"]) == pytest.approx(limit, abs=1e-15)
    assert float(r[-1]["z1"]) == pytest.approx(limit, abs=1e-9)
    assert "# limit=" in out.read_text().splitlines()[-1]


@pytest.mark.parametrize(
    "cfg, clause",
    [({"u": [0, 1], "x": [1]}, "gcd"), ({"u": [0], "v": [1], "x1": [1], "x2": [0]}, "parity")],
)
def test_renewal_refusals(tmp_path, capsys, cfg, clause):
    path = tmp_path / "r.json"
    path.write_text(json.dumps(cfg))
    assert main(["renewal", "--config", str(path)]) == 3
    assert clause in capsys.readouterr().err


def test_renewal_x_file(tmp_path):
    (tmp_path / "x.csv").write_text("x\n1\n0.25\n")
    path, out = tmp_path / "r.json", tmp_path / "r.csv"
    path.write_text(json.dumps({"u": [0.5, 0.5], "x_file": "x.csv"}))
    assert main(["renewal", "--config", str(path), "--n-max", "300", "--out", str(out)]) == 0
    assert float(rows(out)[0]["limit"]) == pytest.approx(1.25 / 1.5)


def test_module_entry_point():
    res = subprocess.run(
        [sys.executable, "-m", "fractal_sl", "spectral-order", "--builtin", "cantor"],
        capture_output=True, text=True, check=False,
    )
    assert res.returncode == 0
    assert res.stdout.startswith("weight: cantor")
