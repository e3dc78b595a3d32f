import json

import numpy as np
import pytest

from entscale.cli import RunConfig, main, read_config_file


@pytest.fixture(scope="module")
def series_csv(tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    path = d / "lorenz.csv"
    assert main(["generate", "lorenz", "--n", "3000", "-o", str(path)]) == 0
    return path


def test_generate_ar2_and_all_components(tmp_path):
    out = tmp_path / "ar2.csv"
    assert main(["generate", "ar2", "--n", "500", "--seed", "3", "-o", str(out)]) == 0
    rows = [l for l in out.read_text().splitlines() if not l.startswith("#")]
    assert len([r for r in rows if r[0] in "-0123456789"]) == 500
    out = tmp_path / "xyz.csv"
    assert main(["generate", "lorenz", "--n", "100", "--component", "all", "-o", str(out)]) == 0
    data = [l for l in out.read_text().splitlines() if not l.startswith("#")]
    assert len(data[-1].split(",")) == 3


def test_analyze_outputs_and_config_rerun(series_csv, tmp_path):
    prefix = tmp_path / "a"
    argv = ["analyze", str(series_csv), "--m-max", "3", "--tau", "10", "--n-eps", "12", "-o", str(prefix)]
    assert main(argv) == 0
    for q in ("C2", "H2", "h2", "deltaH", "D2", "E2"):
        assert (tmp_path / f"a_{q}.csv").exists()
    first = (tmp_path / "a_E2.csv").read_text()
    assert main(["analyze", "--config", str(tmp_path / "a_E2.csv")]) == 0
    assert (tmp_path / "a_E2.csv").read_text() == first


def test_flags_override_config(tmp_path, series_csv):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"input": str(series_csv), "m_max": 2, "n_eps": 10, "tau": 10}))
    prefix = tmp_path / "b"
    assert main(["analyze", "--config", str(cfg), "--n-eps", "11", "-o", str(prefix)]) == 0
    echoed = read_config_file(tmp_path / "b_C2.csv")
    assert echoed["n_eps"] == 11 and echoed["m_max"] == 2


def test_decompose_outputs(series_csv, tmp_path):
    prefix = tmp_path / "d"
    argv = ["decompose", str(series_csv), "--m-max", "3", "--tau", "10", "--n-eps", "24",
            "--eps-min", "0.1", "--eps-max", "30", "--window", "0.5:5", "-o", str(prefix)]
    assert main(argv) == 0
    doc = json.loads((tmp_path / "d.json").read_text())
    assert set(doc) == {"config", "per_eps", "quality", "windows"}
    assert len(doc["windows"]) == 1 and len(doc["per_eps"]) == 24
    assert (tmp_path / "d_fits.csv").exists()
    assert main(argv + ["--bits"]) == 0
    bits = json.loads((tmp_path / "d.json").read_text())
    a = doc["per_eps"][12]["E_total"]
    b = bits["per_eps"][12]["E_total"]
    if a is not None:
        assert b == pytest.approx(a / np.log(2))


def test_ksg_subcommand(series_csv, tmp_path):
    out = tmp_path / "pi.csv"
    assert main(["ksg", str(series_csv), "--orders", "1", "--tau", "10", "--eta", "0", "0.5",
                 "-o", str(out)]) == 0
    assert "m,eta,pi_nats,pi_half_nats" in out.read_text()


def test_exit_codes(tmp_path, capsys):
    assert main(["frobnicate"]) == 1
    assert main(["analyze", "-o", str(tmp_path / "x")]) == 1
    assert main(["analyze", str(tmp_path / "missing.csv"), "-o", str(tmp_path / "x")]) == 2
    bad = tmp_path / "bad.csv"
    bad.write_text("1.0\nabc\n")
    assert main(["analyze", str(bad), "-o", str(tmp_path / "x")]) == 2
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"nonsense": 1}))
    assert main(["analyze", "--config", str(cfg)]) == 1
    assert main(["decompose", str(bad), "--window", "oops"]) == 1


def test_runconfig_json_roundtrip():
    cfg = RunConfig(windows=[(0.1, 1.0)], eta=[0.0, 0.5])
    back = RunConfig.from_json(cfg.to_json())
    assert back == cfg
