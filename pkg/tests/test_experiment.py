import json
from pathlib import Path

import jsonschema
import numpy as np
import pytest

from spacinglab.cli import main
from spacinglab.experiment import (
    ExperimentConfig,
    canonical_json,
    config_hash,
    load_config,
    run_identity,
    run_verify,
    stream_id,
)
from spacinglab.gaps import build_universal_cdf

SCHEMA = json.loads(
    (Path(__file__).resolve().parents[1] / "src/spacinglab/summary_schema.json").read_text()
)


@pytest.fixture
def tiny_cdf(traj):
    return build_universal_cdf(2, s_max=6.0, m_nodes=10, traj=traj)


def tiny_config(tmp_path, **kw):
    base = dict(
        beta=2, sizes=(32, 64), draws=4, node_count=10, s_max=6.0, seed=0,
        out_dir=str(tmp_path), workers=1,
    )
    base.update(kw)
    return ExperimentConfig(**base)


class TestConfig:
    def test_canonical_json_sorted_and_compact(self):
        cfg = ExperimentConfig(sizes=(64, 32))
        text = canonical_json(cfg)
        assert text.index('"beta"') < text.index('"sizes"')
        assert ": " not in text
        # canonicalization does not reorder data, only keys
        assert json.loads(text)["sizes"] == [64, 32]

    def test_hash_deterministic_and_sensitive(self):
        a = ExperimentConfig(seed=1)
        b = ExperimentConfig(seed=1)
        c = ExperimentConfig(seed=2)
        assert config_hash(a) == config_hash(b)
        assert config_hash(a) != config_hash(c)

    def test_validation(self):
        with pytest.raises(ValueError):
            ExperimentConfig(sizes=(4,))
        with pytest.raises(ValueError):
            ExperimentConfig(draws=0)
        with pytest.raises(ValueError):
            ExperimentConfig(node_count=1)
        with pytest.raises(ValueError):
            ExperimentConfig(workers=0)

    def test_load_config_rejects_unknown_keys(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text('{"beta": 2, "bogus": 1}')
        with pytest.raises(ValueError, match="bogus"):
            load_config(path)

    def test_stream_ids_unique(self):
        ids = {stream_id(n, d) for n in (32, 64, 1600) for d in range(500)}
        assert len(ids) == 3 * 500


class TestVerifyRun:
    def test_summary_schema_and_contents(self, tmp_path, tiny_cdf):
        cfg = tiny_config(tmp_path)
        summary = run_verify(cfg, cdf=tiny_cdf)
        jsonschema.validate(summary, SCHEMA)
        assert summary["beta"] == 2
        assert set(summary["per_size"]) == {"32", "64"}
        rows = (tmp_path / "results_beta2.csv").read_text().splitlines()
        assert rows[0].startswith("beta,n,draw")
        assert len(rows) == 1 + 2 * 4
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["config_digest"] == config_hash(cfg)
        assert manifest["partial"] is False

    def test_deterministic_outputs(self, tmp_path, tiny_cdf):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        run_verify(tiny_config(out_a), cdf=tiny_cdf)
        run_verify(tiny_config(out_b), cdf=tiny_cdf)
        assert (out_a / "results_beta2.csv").read_bytes() == (
            out_b / "results_beta2.csv"
        ).read_bytes()
        assert (out_a / "summary.json").read_bytes() == (out_b / "summary.json").read_bytes()

    def test_resume_completes_missing_rows(self, tmp_path, tiny_cdf):
        cfg = tiny_config(tmp_path)
        run_verify(cfg, cdf=tiny_cdf)
        path = tmp_path / "results_beta2.csv"
        full = path.read_text()
        lines = full.splitlines()
        path.write_text("\n".join(lines[:-2]) + "\n")  # drop the last two rows
        run_verify(cfg, cdf=tiny_cdf)
        assert path.read_text() == full
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert any("resumed" in w for w in manifest["warnings"])

    def test_corrupt_row_detected(self, tmp_path, tiny_cdf):
        cfg = tiny_config(tmp_path)
        run_verify(cfg, cdf=tiny_cdf)
        path = tmp_path / "results_beta2.csv"
        lines = path.read_text().splitlines()
        lines[1] = lines[1].replace(lines[1].split(",")[6], "0.123456")
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(RuntimeError, match="corrupt"):
            run_verify(cfg, cdf=tiny_cdf)
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["partial"] is True

    def test_parallel_matches_serial(self, tmp_path, tiny_cdf):
        out_a, out_b = tmp_path / "serial", tmp_path / "pool"
        run_verify(tiny_config(out_a, workers=1), cdf=tiny_cdf)
        run_verify(tiny_config(out_b, workers=2), cdf=tiny_cdf)
        assert (out_a / "results_beta2.csv").read_bytes() == (
            out_b / "results_beta2.csv"
        ).read_bytes()

    def test_single_draw_has_undefined_ci(self, tmp_path, tiny_cdf):
        cfg = tiny_config(tmp_path, draws=1)
        summary = run_verify(cfg, cdf=tiny_cdf)
        jsonschema.validate(summary, SCHEMA)
        assert summary["per_size"]["32"]["ci95"] is None

    def test_node_count_mismatch(self, tmp_path, tiny_cdf):
        cfg = tiny_config(tmp_path, node_count=20)
        with pytest.raises(ValueError, match="node count"):
            run_verify(cfg, cdf=tiny_cdf)


class TestIdentityRun:
    def test_clean_run_has_no_violations(self, tmp_path):
        report = run_identity(tiny_config(tmp_path, sizes=(64,), draws=20))
        assert report["ok"]
        assert report["checked_jump_points"] > 0

    def test_corrupt_mode_reports_violation(self, tmp_path):
        report = run_identity(tiny_config(tmp_path, sizes=(64,), draws=3), corrupt=True)
        assert not report["ok"]
        assert report["violations"][0]["detail"] == "injected corruption"


class TestCli:
    def test_universal_writes_files(self, tmp_path, capsys):
        rc = main(
            ["universal", "--beta", "2", "--s-max", "8", "--nodes", "100",
             "--out", str(tmp_path)]
        )
        assert rc == 0
        cdf_file = tmp_path / "F_beta2.csv"
        nodes_file = tmp_path / "nodes_beta2.csv"
        assert cdf_file.exists() and nodes_file.exists()
        data = np.array(
            [[float(x) for x in line.split(",")]
             for line in cdf_file.read_text().splitlines()[1:]]
        )
        assert np.all(np.diff(data[:, 1]) >= 0)
        assert data[-1, 1] > 0.9999
        first = cdf_file.read_bytes()
        assert main(
            ["universal", "--beta", "2", "--s-max", "8", "--nodes", "100",
             "--out", str(tmp_path)]
        ) == 0
        assert cdf_file.read_bytes() == first  # idempotent rerun

    def test_universal_median_node(self, tmp_path):
        main(["universal", "--beta", "2", "--s-max", "6", "--nodes", "2",
              "--out", str(tmp_path)])
        lines = (tmp_path / "nodes_beta2.csv").read_text().splitlines()
        assert len(lines) == 2  # header + single median node

    def test_gap_tiny_s(self, capsys):
        assert main(["gap", "--beta", "2", "--s", "1e-9"]) == 0
        out = capsys.readouterr().out.strip()
        assert float(out) == pytest.approx(1.0, abs=1e-8)

    def test_gap_cross_route(self, capsys):
        assert main(["gap", "--beta", "2", "--s", "2", "--method", "painleve"]) == 0
        painleve = float(capsys.readouterr().out.strip())
        assert main(["gap", "--beta", "2", "--s", "2", "--method", "fredholm"]) == 0
        fredholm = float(capsys.readouterr().out.strip())
        assert painleve == pytest.approx(fredholm, abs=1e-6)

    def test_gap_series_route(self, capsys):
        assert main(["gap", "--beta", "4", "--s", "0.3", "--method", "series"]) == 0
        series = float(capsys.readouterr().out.strip())
        assert main(["gap", "--beta", "4", "--s", "0.3", "--method", "painleve"]) == 0
        painleve = float(capsys.readouterr().out.strip())
        assert series == pytest.approx(painleve, abs=1e-3)

    def test_gap_usage_errors(self, capsys):
        assert main(["gap", "--beta", "1", "--s", "2", "--method", "fredholm"]) == 2
        assert main(["gap", "--beta", "2", "--s", "2", "--method", "series"]) == 2

    def test_identity_exit_codes(self, tmp_path, capsys):
        ok = main(
            ["identity", "--sizes", "64", "--draws", "5", "--seed", "0",
             "--out", str(tmp_path)]
        )
        assert ok == 0
        bad = main(
            ["identity", "--sizes", "64", "--draws", "2", "--seed", "0",
             "--out", str(tmp_path), "--corrupt"]
        )
        assert bad == 1

    def test_sample_dump(self, tmp_path, capsys):
        rc = main(
            ["sample", "--beta", "2", "--n", "16", "--draws", "2",
             "--out", str(tmp_path)]
        )
        assert rc == 0
        path = Path(capsys.readouterr().out.strip())
        lines = path.read_text().splitlines()
        assert lines[0] == "draw_id,index,eigenvalue"
        assert len(lines) == 1 + 2 * 16

    def test_env_override(self, tmp_path, monkeypatch, capsys):
        monkeypatch.setenv("SPACINGLAB_OUT", str(tmp_path / "envout"))
        rc = main(["sample", "--beta", "2", "--n", "8", "--draws", "1"])
        assert rc == 0
        assert (tmp_path / "envout" / "spectra_beta2_n8.csv").exists()

    def test_verify_smoke(self, tmp_path, capsys):
        rc = main(
            ["verify", "--beta", "2", "--sizes", "32", "--draws", "2",
             "--seed", "3", "--out", str(tmp_path), "--config", "/dev/null"]
        )
        assert rc == 1  # /dev/null is not valid JSON -> numeric failure path
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"node_count": 10, "s_max": 6.0}))
        rc = main(
            ["verify", "--beta", "2", "--sizes", "32", "--draws", "2",
             "--seed", "3", "--out", str(tmp_path), "--config", str(cfg)]
        )
        assert rc == 0
        summary = json.loads(capsys.readouterr().out)
        jsonschema.validate(summary, SCHEMA)
