import csv
import json
import os
import subprocess
import sys

import pytest

from czlab.cli import GRAMMAR, UsageError, build_manifold, main, parse_manifold_spec


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _summary(out):
    with open(os.path.join(out, "summary.json")) as fh:
        return json.load(fh)


def test_parse_manifold_spec():
    assert parse_manifold_spec("euclidean:m=3") == ("euclidean", {"m": 3})
    kind, p = parse_manifold_spec("sawtooth:m=2,kmax=3")
    assert kind == "sawtooth" and p["kmax"] == 3 and p["gamma"] == 1.0
    for bad in ("torus:m=2", "euclidean:m=two", "hyperbolic:b=1", "euclidean:m"):
        with pytest.raises(UsageError):
            parse_manifold_spec(bad)
    with pytest.raises(UsageError):
        build_manifold("hyperbolic:m=2,a=-1")


def test_counterexample_cli(tmp_path):
    out = str(tmp_path / "cz")
    code = main(["counterexample", "--manifold", "sawtooth:m=2,kmax=4,gamma=1", "--out", out])
    assert code == 0
    rows = _read_csv(os.path.join(out, "cz_report.csv"))
    assert len(rows) == 4
    ratios = [float(r["ratio"]) for r in rows]
    assert ratios == sorted(ratios) and len(set(ratios)) == 4
    s = _summary(out)
    assert s["status"] == "pass"
    assert s["checks"]["ratio_growth_ge_100"] is False
    with open(os.path.join(out, "counterexample.json")) as fh:
        doc = json.load(fh)
    assert doc["version"] and doc["parameters"]["manifold"].startswith("sawtooth")
    assert set(doc["golden_hashes"]) == {"cz_report.csv"}


def test_curvature_cli_hyperbolic(tmp_path):
    out = str(tmp_path / "curv")
    assert main(["curvature", "--manifold", "hyperbolic:m=2,a=1", "--out", out]) == 0
    rows = _read_csv(os.path.join(out, "curvature.csv"))
    assert rows
    for r in rows:
        assert abs(float(r["sec_radial"]) + 1) <= 1e-10


def test_doubling_cli_exit_codes(tmp_path):
    out = str(tmp_path / "d")
    assert main(["doubling", "--manifold", "euclidean:m=2", "--D", "16", "--out", out]) == 0
    assert all(r["ok"] == "true" for r in _read_csv(os.path.join(out, "doubling.csv")))
    out2 = str(tmp_path / "d2")
    code = main(["doubling", "--manifold", "hyperbolic:m=2,a=1", "--D", "10", "--delta", "1.5",
                 "--out", out2])
    assert code == 2
    assert _summary(out2)["status"] == "contract-violation"


def test_usage_error_prints_grammar(tmp_path, capsys):
    out = str(tmp_path / "bad")
    assert main(["curvature", "--manifold", "klein:m=2", "--out", out]) == 1
    err = capsys.readouterr().err
    assert GRAMMAR.splitlines()[0] in err
    assert _summary(out)["status"] == "usage-error"
    assert main([]) == 1
    assert main(["nonsense"]) == 1


def test_csv_format(tmp_path):
    out = str(tmp_path / "n")
    assert main(["negric", "--K", "1", "--inj", "3.141592653589793", "--m", "3",
                 "--volN", "10", "--out", out]) == 0
    with open(os.path.join(out, "negric.csv")) as fh:
        lines = fh.read().splitlines()
    assert lines[0] == "r,alpha1,alpha2"
    mant = lines[1].split(",")[1].split("e")[0]
    assert len(mant.replace(".", "").lstrip("-")) >= 13


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("manifold = hyperbolic:m=2,a=1\nD = 10\ndelta = 1.5\n")
    out = str(tmp_path / "c")
    assert main(["doubling", "--config", str(cfg), "--out", out]) == 2
    out2 = str(tmp_path / "c2")
    assert main(["doubling", "--config", str(cfg), "--manifold", "euclidean:m=2",
                 "--D", "16", "--out", out2]) == 0
    s = _summary(out2)
    assert s["params"]["D"] == 16.0 and s["params"]["delta"] == 1.5
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour = blue\n")
    assert main(["doubling", "--config", str(bad), "--out", out]) == 1


@pytest.mark.parametrize("argv", [
    ["green", "--manifold", "sawtooth:m=2"],
    ["bochner", "--manifold", "hyperbolic:m=2,a=1", "--n-members", "8"],
    ["interpolation", "--manifold", "euclidean:m=2", "--n-members", "8"],
    ["cutoffs", "--manifold", "euclidean:m=2"],
])
def test_byte_identical_reruns(tmp_path, argv):
    outs = [str(tmp_path / f"r{i}") for i in range(2)]
    codes = [main(argv + ["--out", o, "--seed", "7"]) for o in outs]
    assert codes[0] == codes[1] == 0
    names = sorted(os.listdir(outs[0]))
    assert names == sorted(os.listdir(outs[1]))
    for n in names:
        with open(os.path.join(outs[0], n), "rb") as a, open(os.path.join(outs[1], n), "rb") as b:
            assert a.read() == b.read(), n


def test_seed_changes_bochner_family(tmp_path):
    a, b = str(tmp_path / "a"), str(tmp_path / "b")
    main(["bochner", "--manifold", "euclidean:m=2", "--n-members", "3", "--seed", "1", "--out", a])
    main(["bochner", "--manifold", "euclidean:m=2", "--n-members", "3", "--seed", "2", "--out", b])
    with open(os.path.join(a, "bochner.csv"), "rb") as fa, open(os.path.join(b, "bochner.csv"), "rb") as fb:
        assert fa.read() != fb.read()


def test_module_entry_point(tmp_path):
    out = str(tmp_path / "m")
    proc = subprocess.run([sys.executable, "-m", "czlab", "negric", "--out", out],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert os.path.exists(os.path.join(out, "negric.json"))
