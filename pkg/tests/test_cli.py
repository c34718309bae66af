import json

import pytest

from floquet_lab.cli import (
    EXIT_FAIL,
    EXIT_OK,
    EXIT_USAGE,
    ExperimentConfig,
    UsageError,
    main,
    worker_count,
)


def manifest_of(outdir):
    with open(outdir / "manifest.json") as fh:
        return json.load(fh)


def test_spectrum_run(tmp_path):
    code = main(["spectrum", "--delta", "0.1", "--j-max", "8",
                 "--outdir", str(tmp_path)])
    assert code == EXIT_OK
    man = manifest_of(tmp_path)
    assert man["experiment"] == "spectrum"
    assert {s["name"] for s in man["steps"]} == {"h1_gap", "local_scan", "spacing"}
    assert all(s["passed"] for s in man["steps"])
    assert set(man["outputs"]) == {"h1_report.json", "eigenvalues.csv", "spacing.json"}
    # every listed output exists and carries a sha256 hash
    for name, digest in man["outputs"].items():
        assert (tmp_path / name).exists()
        assert len(digest) == 64


def test_spectrum_delta_zero_vacuous(tmp_path):
    assert main(["spectrum", "--delta", "0", "--outdir", str(tmp_path)]) == EXIT_OK
    man = manifest_of(tmp_path)
    assert all(s["passed"] for s in man["steps"])


def test_large_delta_warned_in_manifest(tmp_path):
    code = main(["spectrum", "--delta", "0.3", "--j-max", "6",
                 "--outdir", str(tmp_path)])
    assert code in (EXIT_OK, EXIT_FAIL)
    man = manifest_of(tmp_path)
    assert any("1/4" in w for w in man["warnings"])


def test_newton_compare_dense(tmp_path):
    code = main(["newton", "--delta", "0.05", "--j", "8", "--compare-dense",
                 "--outdir", str(tmp_path)])
    assert code == EXIT_OK
    rows = json.loads((tmp_path / "newton_vs_dense.json").read_text())
    assert rows[0]["diff"] <= 1e-10


def test_newton_delta_zero(tmp_path):
    assert main(["newton", "--delta", "0", "--j", "10",
                 "--outdir", str(tmp_path)]) == EXIT_OK


def test_newton_sweep_writes_fit(tmp_path):
    code = main(["newton", "--delta", "0.05", "--j", "10..13",
                 "--outdir", str(tmp_path)])
    assert code == EXIT_OK
    fit = json.loads((tmp_path / "asymptotics_fit.json").read_text())
    assert abs(abs(fit["scaled_leading"]) - 1.0) < 0.05


def test_evolve_short(tmp_path):
    code = main(["evolve", "--delta", "0.1", "--J", "8", "--periods", "100",
                 "--s", "1,2", "--outdir", str(tmp_path)])
    assert code == EXIT_OK
    man = manifest_of(tmp_path)
    assert "norms.csv" in man["outputs"] and "boundedness.json" in man["outputs"]


def test_usage_errors():
    assert main(["spectrum", "--delta", "-1"]) == EXIT_USAGE
    assert main(["spectrum", "--delta", "0.1", "--j-max", "3"]) == EXIT_USAGE
    assert main(["newton", "--delta", "0.05", "--j", "abc"]) == EXIT_USAGE
    with pytest.raises(SystemExit) as ei:
        main(["not-a-command"])
    assert ei.value.code == EXIT_USAGE


def test_config_file_with_flag_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"delta": 0.05, "j_values": "8", "outdir": str(tmp_path / "a")}))
    code = main(["newton", "--config", str(cfg), "--j", "9",
                 "--outdir", str(tmp_path / "b")])
    assert code == EXIT_OK
    man = manifest_of(tmp_path / "b")
    assert man["config"]["j_values"] == "9"  # flag wins over file
    assert man["config"]["delta"] == 0.05


def test_config_rejects_unknown_fields(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"wavelength": 3}))
    assert main(["spectrum", "--config", str(cfg)]) == EXIT_USAGE


def test_deterministic_outputs(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["newton", "--delta", "0.05", "--j", "8,10",
                     "--outdir", str(out)]) == EXIT_OK
    assert (a / "certificates.json").read_bytes() == (b / "certificates.json").read_bytes()


def test_worker_count(monkeypatch):
    monkeypatch.delenv("FLOQUET_LAB_THREADS", raising=False)
    assert worker_count() == 1
    monkeypatch.setenv("FLOQUET_LAB_THREADS", "4")
    assert worker_count() == 4
    monkeypatch.setenv("FLOQUET_LAB_THREADS", "junk")
    assert worker_count() == 1


def test_config_validation():
    with pytest.raises(UsageError):
        ExperimentConfig(delta=-0.1).validate()
    with pytest.raises(UsageError):
        ExperimentConfig(L_rule="other").validate()
    with pytest.raises(UsageError):
        ExperimentConfig(steps_per_period=8).validate()
    ExperimentConfig().validate()
