import csv
import io
import json

import pytest

from patree.cli import fmt, main
from patree.config import parse_config
from patree.errors import CapError, ConfigError

PA_CFG = {"law": {"kind": "uniform"}, "model": {"form": "classic_pa"},
          "run": {"n_steps": 100000, "replicas": 1, "master_seed": 3, "bins": 4, "k_max": 8}}
B2_CFG = {"law": {"kind": "beta_poly", "alpha": 2}, "model": {"form": "bianconi_barabasi"},
          "run": {"n_steps": 5000, "replicas": 2, "master_seed": 5, "bins": 8, "k_max": 8},
          "condensation": {"eps": [1.0, 0.05], "n": [100, 1000], "replicas": 2},
          "urn": {"m": 2, "k_prime": 1},
          "sweep": {"param": "alpha", "values": [0.5, 1, 2]}}


def write(tmp_path, name, doc):
    p = tmp_path / name
    p.write_text(doc if isinstance(doc, str) else json.dumps(doc, indent=1))
    return str(p)


def run(argv):
    out = io.StringIO()
    code = main(argv, out=out)
    return code, out.getvalue()


def test_config_parses_and_rejects_unknown_keys():
    cfg = parse_config(json.dumps(B2_CFG))
    assert cfg.law.alpha == 2.0 and cfg.urn == {"m": 2, "k_prime": 1}
    assert cfg.run["stride"] is None and cfg.sweep["values"] == [0.5, 1.0, 2.0]
    text = '{"law": {"kind": "uniform"},\n "run": {"n_steps": 10, "speed": 2}}'
    with pytest.raises(ConfigError) as err:
        parse_config(text)
    assert (err.value.line, err.value.column) == (2, 25)
    with pytest.raises(ConfigError):
        parse_config('{"law": {"kind": "uniform"}, "run": {"n_steps": 0}}')
    with pytest.raises(ConfigError):
        parse_config('{"law": {"kind": "uniform"}, "law": {"kind": "uniform"}}')
    with pytest.raises(ConfigError):
        parse_config('{"law": {"kind": "uniform"')


def test_sweep_grid_cap():
    doc = dict(B2_CFG, sweep={"param": "alpha", "start": 0.2, "stop": 4, "num": 20000})
    with pytest.raises(CapError):
        parse_config(json.dumps(doc))


def test_theory_command(tmp_path):
    code, out = run(["theory", "--config", write(tmp_path, "pa.json", PA_CFG)])
    doc = json.loads(out)
    assert code == 0 and doc["regime"] == "non_condensation" and doc["lambda_star"] == pytest.approx(2.0)
    code, out = run(["theory", "--config", write(tmp_path, "b2.json", B2_CFG)])
    doc = json.loads(out)
    assert doc["regime"] == "condensation" and doc["condensate_mass"] == pytest.approx(0.5)
    b1 = dict(B2_CFG, law={"kind": "beta_poly", "alpha": 1})
    code, out = run(["theory", "--config", write(tmp_path, "b1.json", b1)])
    assert code == 2 and json.loads(out)["lambda_star"] is None


def test_config_errors_exit_one(tmp_path, capsys):
    bad = write(tmp_path, "bad.json", '{"law": {"kind": "uniform"},\n "model": {"form": "pa"}}')
    code, _ = run(["theory", "--config", bad])
    assert code == 1 and "line 2" in capsys.readouterr().err
    assert run(["theory", "--config", str(tmp_path / "missing.json")])[0] == 1
    assert run(["theory"])[0] == 1
    with pytest.raises(SystemExit) as ex:
        main(["nonsense"])
    assert ex.value.code == 1


def test_simulate_is_reproducible(tmp_path):
    cfg = write(tmp_path, "b2.json", B2_CFG)
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(["simulate", "--config", cfg, "--out", str(a)])[0] == 0
    assert run(["simulate", "--config", cfg, "--out", str(b), "--threads", "2"])[0] == 0
    names = ["degrees.csv", "edges.csv", "zpath.csv", "condensate.csv", "manifest.json"]
    for name in names:
        assert (a / name).read_bytes() == (b / name).read_bytes()
        assert b"\r" not in (a / name).read_bytes()
    man = json.loads((a / "manifest.json").read_text())
    assert man["master_seed"] == 5 and len(man["replica_seeds"]) == 2
    rows = list(csv.DictReader(open(a / "condensate.csv")))
    assert [r["empirical"] for r in rows[:2]] == ["1", "1"]
    head = (a / "degrees.csv").read_text().splitlines()[0]
    assert head == "k,bin_lo,bin_hi,count,n,replicas"
    c = tmp_path / "c"
    run(["simulate", "--config", cfg, "--out", str(c), "--seed", "6"])
    assert (c / "edges.csv").read_bytes() != (a / "edges.csv").read_bytes()


def test_simulate_single_replica_matches_merge(tmp_path):
    one = dict(PA_CFG, run=dict(PA_CFG["run"], n_steps=2000, replicas=1))
    two = dict(PA_CFG, run=dict(PA_CFG["run"], n_steps=2000, replicas=2))
    run(["simulate", "--config", write(tmp_path, "one.json", one), "--out", str(tmp_path / "one")])
    run(["simulate", "--config", write(tmp_path, "two.json", two), "--out", str(tmp_path / "two")])
    r1 = list(csv.DictReader(open(tmp_path / "one" / "degrees.csv")))
    r2 = list(csv.DictReader(open(tmp_path / "two" / "degrees.csv")))
    # the first replica's counts never exceed the merged counts
    assert all(int(x["count"]) <= int(y["count"]) for x, y in zip(r1, r2))


def test_simulate_pa_zpath(tmp_path):
    run(["simulate", "--config", write(tmp_path, "pa.json", PA_CFG), "--out", str(tmp_path / "o")])
    last = (tmp_path / "o" / "zpath.csv").read_text().splitlines()[-1].split(",")
    assert last[0] == "100000" and abs(float(last[1]) - 2.0) < 0.01


def test_urn_command(tmp_path):
    code, out = run(["urn", "--config", write(tmp_path, "b2.json", B2_CFG)])
    doc = json.loads(out)
    assert code == 0
    for key in ("lambda", "eigvec_residual_max", "B_m", "E_m", "R_K", "E_K", "F_K", "type_count"):
        assert key in doc
    assert doc["eigvec_residual_max"] < 1e-10


def test_sweep_command(tmp_path):
    code, out = run(["sweep", "--config", write(tmp_path, "b2.json", B2_CFG)])
    rows = list(csv.DictReader(io.StringIO(out)))
    assert code == 0
    assert rows[0]["regime"] == "non_condensation"
    assert rows[1]["regime"] == "boundary" and rows[1]["lambda_or_gstar"] == ""
    assert rows[2]["regime"] == "condensation" and float(rows[2]["condensate_mass"]) == pytest.approx(0.5)


def test_validate_command(tmp_path, capsys):
    code, _ = run(["validate", "--config", write(tmp_path, "e.json", {"checks": []})])
    assert code == 1 and "no checks" in capsys.readouterr().err
    good = write(tmp_path, "g.json", {"checks": ["regime", "urn_d"]})
    code, out = run(["validate", "--config", good])
    assert code == 0 and out.count("PASS") == 2
    bad = write(tmp_path, "b.json", {"checks": ["urn_d"], "tolerances": {"urn_d": {"closed": -1}}})
    code, out = run(["validate", "--config", bad])
    assert code == 3 and "failed: urn_d" in out
    junk = write(tmp_path, "j.json", {"checks": ["urn_d"], "tolerances": {"urn_d": {"closed": "x"}}})
    assert run(["validate", "--config", junk])[0] == 1


def test_number_format():
    assert fmt(0.1) == "0.1" and fmt(1e-7) == "0.0000001" and fmt(3) == "3"
    assert fmt(float("inf")) == "inf" and fmt(None) == ""
