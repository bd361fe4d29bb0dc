import json
import subprocess
import sys

import numpy as np
import pytest

from aggrisk.cli import main
from aggrisk.datagen import GenSpec, generate_portfolio, generate_yet
from aggrisk.io import file_sha256, read_portfolio, read_ylt, write_portfolio, write_yet
from aggrisk.model import Layer, Portfolio, Program, Xelt

SMALL = ["--trials", "400", "--events-per-trial", "20:60", "--catalogue", "800",
         "--events-per-xelt", "150"]


@pytest.fixture(scope="module")
def generated(tmp_path_factory):
    out = tmp_path_factory.mktemp("gen")
    assert main(["gen", "--seed", "5", *SMALL, "--out", str(out)]) == 0
    return out


def test_gen_writes_inputs(generated, capsys):
    names = sorted(p.name for p in generated.iterdir())
    assert names == ["portfolio.json", "xelt_p0_l0_x0.csv", "xelt_p0_l0_x1.csv", "xelt_p0_l0_x2.csv",
                     "xelt_p0_l0_x3.csv", "yet.bin"]
    doc = json.loads((generated / "portfolio.json").read_text())
    assert doc["generator"]["algorithm"] == "numpy-philox4x64-10"
    assert doc["generator"]["seed"] == 5


def test_gen_is_deterministic(generated, tmp_path, capsys):
    assert main(["gen", "--seed", "5", *SMALL, "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "seed=5" in out and "trials=400" in out
    for p in generated.iterdir():
        assert file_sha256(p) == file_sha256(tmp_path / p.name)


def test_gen_rejects_zero_trials(tmp_path, capsys):
    with pytest.raises(SystemExit) as info:
        main(["gen", "--trials", "0", "--out", str(tmp_path)])
    assert info.value.code == 2
    assert "--trials" in capsys.readouterr().err


def test_gen_rejects_impossible_spec(tmp_path, capsys):
    assert main(["gen", "--catalogue", "10", "--events-per-xelt", "20", "--out", str(tmp_path)]) == 2
    assert "catalogue" in capsys.readouterr().err


def test_gen_io_failure(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["gen", *SMALL, "--out", str(blocker / "sub")]) == 3


def _run(generated, out, *extra):
    return main(["run", "--yet", str(generated / "yet.bin"), "--portfolio",
                 str(generated / "portfolio.json"), "--out", str(out), *extra])


def test_run_workers_checksum(generated, tmp_path, capsys):
    assert _run(generated, tmp_path / "w1.csv", "--mode", "SU", "--workers", "1") == 0
    assert _run(generated, tmp_path / "w8.csv", "--mode", "SU", "--workers", "8",
                "--chunk-size", "7", "--backend", "hashed") == 0
    assert file_sha256(tmp_path / "w1.csv") == file_sha256(tmp_path / "w8.csv")
    out = capsys.readouterr().out
    assert "mode=SU" in out and "wall_seconds=" in out and "total_loss=" in out


def test_run_with_manifest(generated, tmp_path):
    manifest = {"yet": str(generated / "yet.bin"), "portfolio": str(generated / "portfolio.json"),
                "output": str(tmp_path / "m.csv"), "mode": "PU", "workers": 2}
    (tmp_path / "m.json").write_text(json.dumps(manifest))
    assert main(["run", "--manifest", str(tmp_path / "m.json")]) == 0
    assert _run(generated, tmp_path / "f.csv") == 0
    assert file_sha256(tmp_path / "m.csv") == file_sha256(tmp_path / "f.csv")


def test_run_error_codes(generated, tmp_path):
    assert main(["run", "--yet", str(generated / "yet.bin")]) == 2
    assert _run(generated, tmp_path / "x.csv", "--memory-budget", "10") == 2
    assert main(["run", "--yet", str(tmp_path / "nope.bin"), "--portfolio",
                 str(generated / "portfolio.json"), "--out", str(tmp_path / "x.csv")]) == 3
    (tmp_path / "bad.json").write_text(json.dumps({"yet": "a", "portfolio": "b", "output": "c",
                                                   "colour": "red"}))
    assert main(["run", "--manifest", str(tmp_path / "bad.json")]) == 2
    assert _run(generated, tmp_path / "x.csv", "--mode", "SU", "--tolerance", "1e-15",
                "--max-iterations", "1") == 4


def test_run_reports_trial_context(generated, tmp_path, capsys):
    _run(generated, tmp_path / "x.csv", "--mode", "SU", "--tolerance", "1e-15", "--max-iterations", "1")
    assert "trial" in capsys.readouterr().err


def test_pu_su_identical_without_spread(tmp_path):
    spec = GenSpec.desk(num_trials=300, catalogue_size=500, events_per_xelt=100, events_per_trial=(10, 30))
    pf = generate_portfolio(spec)
    flat = Portfolio(tuple(Program(tuple(Layer(tuple(
        Xelt(x.event_id, x.mean_loss, 0 * x.sigma_i, 0 * x.sigma_c, x.max_loss, x.z_e, x.terms)
        for x in layer.xelts), layer.terms) for layer in prog.layers)) for prog in pf.programs))
    write_yet(generate_yet(spec), tmp_path / "yet.bin")
    write_portfolio(flat, tmp_path, spec.catalogue_size)
    assert _run(tmp_path, tmp_path / "pu.csv", "--mode", "PU") == 0
    assert _run(tmp_path, tmp_path / "su.csv", "--mode", "SU") == 0
    assert (tmp_path / "pu.csv").read_bytes() == (tmp_path / "su.csv").read_bytes()


def test_metrics(generated, tmp_path, capsys):
    _run(generated, tmp_path / "y.csv", "--mode", "SU")
    capsys.readouterr()
    assert main(["metrics", str(tmp_path / "y.csv"), "--return-periods", "2,100,400",
                 "--tvar", "0.99", "--curve", str(tmp_path / "c.csv"),
                 "--json", str(tmp_path / "m.json")]) == 0
    out = capsys.readouterr().out
    assert "PML return_period=400" in out and "TVaR p=0.99" in out
    report = json.loads((tmp_path / "m.json").read_text())
    losses = read_ylt(tmp_path / "y.csv").trial_totals()
    assert report["pml"]["400"] == losses.max()
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "loss,exceedance_probability" and len(lines) == 401
    assert main(["metrics", str(tmp_path / "y.csv"), "--return-periods", "401"]) == 2


def test_bench_outputs(tmp_path, capsys):
    common = ["--trials", "200", "--catalogue", "1000", "--events-per-xelt", "100",
              "--repeats", "1", "--out-dir", str(tmp_path)]
    assert main(["bench", "scaling", "--workers", "1,2,4,8", *common]) == 0
    rows = (tmp_path / "bench_scaling.csv").read_text().splitlines()
    assert rows[0] == "scenario,config_hash,phase,seconds"
    assert len(rows) == 1 + 4
    for scenario in ("lookup", "split", "phases"):
        assert main(["bench", scenario, *common, "--probes", "1000"]) == 0
        assert (tmp_path / f"bench_{scenario}.csv").exists()
        for line in (tmp_path / f"bench_{scenario}.jsonl").read_text().splitlines():
            json.loads(line)


def test_bench_unknown_scenario(capsys):
    with pytest.raises(SystemExit) as info:
        main(["bench", "nope"])
    assert info.value.code == 2
    err = capsys.readouterr().err
    assert "lookup" in err and "scaling" in err and "split" in err


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "aggrisk", "run", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "--workers" in res.stdout


def test_round_trip_reproduces_files(generated, tmp_path):
    pf, doc = read_portfolio(generated / "portfolio.json")
    write_portfolio(pf, tmp_path, doc["catalogue_size"], doc.get("generator"))
    for p in generated.glob("*.csv"):
        assert p.read_bytes() == (tmp_path / p.name).read_bytes()
    assert (generated / "portfolio.json").read_bytes() == (tmp_path / "portfolio.json").read_bytes()
