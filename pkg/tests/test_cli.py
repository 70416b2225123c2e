import json
from pathlib import Path

import numpy as np
import pytest

import sflab
from sflab.cli import main

CONFIGS = Path(sflab.__file__).parent / "configs"
SMALL = ["--grid-modes", "8", "--grid-nz", "32", "--grid-nt", "16"]


def test_check_symbol_ok(capsys):
    assert main(["check-symbol", "--config", str(CONFIGS / "symbol-dirac.toml")]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["rank_minus"] == 1 and report["is_dirac"]


def test_check_symbol_not_elliptic(capsys):
    assert main(["check-symbol", "--config", str(CONFIGS / "symbol-degenerate.toml")]) == 2
    assert "NotElliptic" in capsys.readouterr().err


def test_boundary_roundtrip(capsys):
    assert main(["boundary-roundtrip", "--config", str(CONFIGS / "symbol-dirac.toml")]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["lagrangian"] and report["L_roundtrip_gap"] < 1e-8


def test_boundary_roundtrip_random_seed(capsys):
    assert main(["boundary-roundtrip", "--seed", "7"]) == 0


def test_chern_on_stored_qwz_family(tmp_path, capsys):
    fam = tmp_path / "qwz.npz"
    assert main(["chern", "--qwz", "-1", "--nx", "24", "--save", str(fam)]) == 0
    capsys.readouterr()
    assert main(["chern", "--family", str(fam), "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert out.startswith("chern -1 residual")
    assert (tmp_path / "flux.csv").exists()


def test_chern_bad_family(tmp_path, capsys):
    bad = tmp_path / "bad.npz"
    np.savez(bad, other=np.zeros(3))
    assert main(["chern", "--family", str(bad)]) == 2
    assert main(["chern", "--family", str(tmp_path / "missing.npz")]) == 2


def test_verify_writes_report(tmp_path, capsys):
    code = main(["verify", "--config", str(CONFIGS / "ab-flux.toml"), *SMALL, "--out", str(tmp_path)])
    assert code == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["sf"]["value"] == report["psi"]["value"] == -1
    assert report["match"] and report["config"]["grid"]["nz"] == 32
    assert set(report["versions"]) >= {"sflab", "numpy", "scipy"}
    for name in ("crossings.csv", "traces.csv", "flux_inner.csv", "flux_outer.csv"):
        assert (tmp_path / name).exists()


def test_verify_reproducible(capsys):
    args = ["verify", "--config", str(CONFIGS / "rotating-bc.toml"), *SMALL]
    main(args)
    first = json.loads(capsys.readouterr().out)
    main(args)
    second = json.loads(capsys.readouterr().out)
    assert (first["sf"]["value"], first["psi"]["value"], first["match"]) == (second["sf"]["value"], second["psi"]["value"], second["match"])


def test_tight_tolerance_is_a_verification_failure(capsys):
    # the low-mode weight of the crossing eigenvector is not exactly one at this size
    assert main(["sf", "--config", str(CONFIGS / "rotating-bc.toml"), *SMALL, "--tolerance", "1e-12"]) == 1


def test_input_errors(tmp_path, capsys):
    assert main(["verify", "--config", str(tmp_path / "none.toml")]) == 2
    assert main(["sf", "--grid-nz", "3"]) == 2
    bad = tmp_path / "bad.toml"
    bad.write_text('[scenario]\nkind = "custom-T-loop"\nflavors = 1\n[[scenario.outer]]\np = 0\nq = 0\nc = [[0.0]]\n')
    # T = 0 on the outer circle
    assert main(["verify", "--config", str(bad), *SMALL]) == 2


def test_suite_quick_subset(tmp_path, capsys, monkeypatch):
    from sflab import cli

    jobs = cli.suite_jobs(True, 0, None)
    monkeypatch.setattr(cli, "suite_jobs", lambda quick, seed, cfg: [j for j in jobs if j[0] in ("criterion_appendix", "criterion_chern")])
    assert main(["suite", "--quick", "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "[PASS] criterion 4" in out and "[PASS] criterion 7" in out
    summary = json.loads((tmp_path / "suite.json").read_text())
    assert [c["number"] for c in summary["criteria"]] == [4, 7]
    assert (tmp_path / "suite.csv").read_text().startswith("criterion,title,passed,seconds")


def test_version(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--version"])
    assert info.value.code == 0
