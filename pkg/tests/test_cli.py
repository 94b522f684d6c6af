import json
from importlib import resources
from pathlib import Path

import jsonschema
import pytest

from planck2d import io
from planck2d.cli import main

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


@pytest.fixture(scope="module")
def schema():
    return json.loads(resources.files("planck2d").joinpath("schemas/report.schema.json").read_text())


@pytest.fixture
def ref_ds(tmp_path):
    path = tmp_path / "ref.csv"
    assert main(["simulate", f"{CONFIGS}/reference.yaml", "-o", str(path)]) == 0
    return path


@pytest.fixture
def noiseless_config(tmp_path):
    path = tmp_path / "noiseless.yaml"
    cfg = io.load_yaml(f"{CONFIGS}/reference.yaml")
    cfg["noise"] = {"mode": "noiseless"}
    path.write_text(json.dumps(cfg))
    return path


def test_simulate_writes_six_curves(ref_ds, capsys):
    ds = io.read_dataset(ref_ds)
    assert len(ds.curves) == 6 and ds.n_points == 120


def test_simulate_is_byte_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        assert main(["simulate", f"{CONFIGS}/reference.yaml", "-o", str(p), "--seed", "42"]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_simulate_infeasible_exit_2(tmp_path, capsys):
    cfg = tmp_path / "hot.yaml"
    cfg.write_text("truth: {kappa: 1.15, n_H: 6.83, loss_dB: 2.79}\nplan: {T_mc: [100mK, 700mK]}\n")
    assert main(["simulate", str(cfg), "-o", str(tmp_path / "x.csv")]) == 2
    assert "infeasible" in capsys.readouterr().err


def test_simulate_bad_config_exit_2(tmp_path):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("- just a list\n")
    assert main(["simulate", str(cfg), "-o", str(tmp_path / "x.csv")]) == 2


def test_fit2d_noiseless_report(tmp_path, noiseless_config, schema):
    ds = tmp_path / "ds.csv"
    main(["simulate", str(noiseless_config), "-o", str(ds)])
    out = tmp_path / "r.json"
    plot = tmp_path / "plot"
    assert main(["fit2d", str(ds), "-o", str(out), "--plot-data", str(plot)]) == 0
    rep = json.loads(out.read_text())
    jsonschema.validate(rep, schema)
    assert rep["result"]["fit"]["loss_dB"] == pytest.approx(2.79, abs=1e-6)
    assert rep["inputs"][0]["sha256"] == io.file_digest(ds)
    assert len(list(plot.glob("*.csv"))) == 6


def test_fit2d_report_stable_across_runs(ref_ds, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    main(["fit2d", str(ref_ds), "-o", str(a)])
    main(["fit2d", str(ref_ds), "-o", str(b)])
    ra, rb = json.loads(a.read_text()), json.loads(b.read_text())
    assert ra["body_sha256"] == rb["body_sha256"]
    assert io.report_body(ra) == io.report_body(rb)


def test_fit2d_single_curve_exit_2(ref_ds, tmp_path, capsys):
    ds = io.read_dataset(ref_ds).subset([0])
    one = tmp_path / "one.csv"
    io.write_dataset(ds, one)
    assert main(["fit2d", str(one), "-o", str(tmp_path / "r.json")]) == 2
    assert "fit1d" in capsys.readouterr().err


def test_fit2d_corrupted_row_exit_2(ref_ds, capsys):
    lines = ref_ds.read_text().splitlines()
    lines[20] = "x,y,z,w"
    ref_ds.write_text("\n".join(lines) + "\n")
    assert main(["fit2d", str(ref_ds)]) == 2
    assert ":21:" in capsys.readouterr().err


def test_fit2d_nonconvergence_exit_3(ref_ds, tmp_path):
    out = tmp_path / "r.json"
    assert main(["fit2d", str(ref_ds), "-o", str(out), "--max-iterations", "1"]) == 3
    assert json.loads(out.read_text())["result"]["fit"]["converged"] is False


def test_missing_dataset_exit_2(tmp_path):
    assert main(["fit2d", str(tmp_path / "nope.csv")]) == 2


def test_output_dir_env(ref_ds, tmp_path, monkeypatch):
    monkeypatch.setenv("PLANCK2D_OUTPUT_DIR", str(tmp_path / "reports"))
    assert main(["fit2d", str(ref_ds)]) == 0
    assert (tmp_path / "reports" / "fit2d_report.json").exists()


def test_fit1d_datasheet(ref_ds, tmp_path, capsys, schema):
    out = tmp_path / "r.json"
    assert main(["fit1d", str(ref_ds), "--eta-db", "2.18", "-o", str(out)]) == 0
    text = capsys.readouterr().out
    assert "notice" in text and "100 mK" in text
    rep = json.loads(out.read_text())
    jsonschema.validate(rep, schema)
    assert rep["result"]["fit"]["pinned"]["loss_dB"] == pytest.approx(2.18)
    assert rep["result"]["convention"] == rep["result"]["fit"]["convention"]


def test_fit1d_lossless_and_mk_flags(ref_ds, tmp_path):
    out = tmp_path / "r.json"
    assert main(["fit1d", str(ref_ds), "--eta-db", "0", "--t-mc", "150mK", "--curve", "150mK",
                 "-o", str(out)]) == 0
    fit = json.loads(out.read_text())["result"]["fit"]
    assert fit["pinned"]["eta"] == 1.0 and fit["pinned"]["T_mc"] == pytest.approx(0.15)


def test_fit1d_negative_loss_exit_2(ref_ds):
    assert main(["fit1d", str(ref_ds), "--eta-db", "-1"]) == 2


def test_spacing_constant(tmp_path, noiseless_config, schema):
    ds = tmp_path / "ds.csv"
    main(["simulate", str(noiseless_config), "-o", str(ds)])
    out, plot = tmp_path / "r.json", tmp_path / "sp.csv"
    assert main(["spacing", str(ds), "-o", str(out), "--plot-data", str(plot)]) == 0
    rep = json.loads(out.read_text())
    jsonschema.validate(rep, schema)
    assert rep["result"]["drift"]["verdict"] == "constant"
    assert len(plot.read_text().splitlines()) == 6


def test_spacing_drift_fixture(tmp_path):
    # fixture seed picked from the drifting replicates of the drift config
    ds = tmp_path / "d.csv"
    cfg = io.load_yaml(f"{CONFIGS}/eta_drift.yaml")
    found = None
    for seed in range(50):
        main(["simulate", f"{CONFIGS}/eta_drift.yaml", "-o", str(ds), "--seed", str(seed)])
        out = tmp_path / "r.json"
        main(["spacing", str(ds), "-o", str(out)])
        if json.loads(out.read_text())["result"]["drift"]["verdict"] == "drifting":
            found = seed
            break
    assert cfg["eta_drift"]["factor"] == 0.98
    assert found is not None


def test_spacing_two_curves(ref_ds, tmp_path):
    two = tmp_path / "two.csv"
    io.write_dataset(io.read_dataset(ref_ds).subset([0, 1]), two)
    out = tmp_path / "r.json"
    assert main(["spacing", str(two), "-o", str(out)]) == 0
    res = json.loads(out.read_text())["result"]
    assert len(res["spacing"]["entries"]) == 1
    assert res["drift"]["verdict"] == "insufficient data"


@pytest.fixture(scope="module")
def flux_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("flux")
    assert main(["simulate-flux", f"{CONFIGS}/flux_synthetic.yaml", "--outdir", str(d)]) == 0
    return d


def test_flux_against_vna(flux_dir, tmp_path, schema):
    out, plot = tmp_path / "r.json", tmp_path / "f.csv"
    assert main(["flux", str(flux_dir / "manifest.yaml"), "-o", str(out), "--plot-data", str(plot)]) == 0
    rep = json.loads(out.read_text())
    jsonschema.validate(rep, schema)
    cmp = rep["result"]["comparison"]
    assert cmp["rms_diff"] < cmp["rms_sigma"]
    assert len(rep["inputs"]) == 1 + 9 + 1


def test_flux_missing_reference(flux_dir, tmp_path):
    ds, vna = io.read_manifest(flux_dir / "manifest.yaml")
    ds.pop(0.0)
    io.write_manifest(tmp_path / "m.yaml", ds, vna)
    assert main(["flux", str(tmp_path / "m.yaml")]) == 2


@pytest.mark.parametrize("kt,ka", [(1.15, 1.34)])
def test_impact_example(tmp_path, capsys, schema, kt, ka):
    out = tmp_path / "r.json"
    assert main(["impact", "--s-db", "3.00", "--mu", "1.00", "--kappa-true", str(kt),
                 "--kappa-assumed", str(ka), "-o", str(out)]) == 0
    rep = json.loads(out.read_text())
    jsonschema.validate(rep, schema)
    st = rep["result"]["reconstructed_state"]
    assert st["S_dB"] == pytest.approx(2.4266895554386956, rel=1e-12)
    assert st["mu"] == pytest.approx(0.9710975560565289, rel=1e-12)


def test_impact_equal_kappas(capsys):
    assert main(["impact", "--s-db", "3", "--mu", "0.9", "--kappa-true", "1.2", "--kappa-assumed", "1.2"]) == 0
    assert "S' = 3.0000 dB" in capsys.readouterr().out


def test_impact_unphysical_exit_2():
    assert main(["impact", "--s-db", "3", "--mu", "1.2", "--kappa-true", "1", "--kappa-assumed", "1"]) == 2


def test_usage_error_exit_2():
    assert main(["fit2d"]) == 2
