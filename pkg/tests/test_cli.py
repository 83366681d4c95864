import json

import pytest

from infoplane import cli
from infoplane.experiments import (
    ArchitectureConfig,
    DatasetConfig,
    ExperimentConfig,
    OptimizerConfig,
    ScheduleConfig,
    config_to_dict,
    save_config,
)


@pytest.fixture
def tiny_config_file(tmp_path):
    cfg = ExperimentConfig(
        dataset=DatasetConfig("synthetic", 100, 100, 0),
        architecture=ArchitectureConfig((3,), (3,)),
        optimizer=OptimizerConfig(1e-3, 50),
        schedule=ScheduleConfig(3, (1, 3)),
        run_seed=5,
    )
    p = tmp_path / "config.json"
    save_config(cfg, p)
    return p


def run_cli(*argv):
    return cli.main(list(argv))


class TestFetch:
    def test_synthetic_generation_and_cache_hit(self, tmp_path, capsys):
        cache = tmp_path / "cache"
        assert run_cli("fetch", "synthetic", "--cache-dir", str(cache)) == 0
        first = capsys.readouterr().out
        assert "ready" in first
        assert run_cli("fetch", "synthetic", "--cache-dir", str(cache)) == 0

    def test_unknown_dataset_usage_error(self, tmp_path, capsys):
        assert run_cli("fetch", "imagenet", "--cache-dir", str(tmp_path)) == 2
        assert "unknown dataset" in capsys.readouterr().err


class TestRun:
    def test_valid_config_writes_result(self, tiny_config_file, tmp_path, cache_dir,
                                        monkeypatch, capsys):
        monkeypatch.setenv("INFOPLANE_CACHE_DIR", str(cache_dir))
        out = tmp_path / "result.json"
        assert run_cli("run", str(tiny_config_file), "-o", str(out)) == 0
        assert out.exists()
        doc = json.loads(out.read_text())
        assert doc["schema_version"] == 1
        assert "epoch" in capsys.readouterr().out

    def test_seed_flag_gives_byte_identical_results(self, tiny_config_file, tmp_path,
                                                    cache_dir, monkeypatch):
        monkeypatch.setenv("INFOPLANE_CACHE_DIR", str(cache_dir))
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        assert run_cli("run", str(tiny_config_file), "-o", str(a), "--seed", "7") == 0
        assert run_cli("run", str(tiny_config_file), "-o", str(b), "--seed", "7") == 0
        assert a.read_bytes() == b.read_bytes()

    def test_negative_bin_size_names_key(self, tiny_config_file, tmp_path, capsys):
        doc = json.loads(tiny_config_file.read_text())
        doc["estimator"]["bin_size"] = -1.0
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(doc))
        assert run_cli("run", str(bad), "-o", str(tmp_path / "x.json")) == 2
        assert "estimator.bin_size" in capsys.readouterr().err

    def test_unknown_key_reports_path(self, tiny_config_file, tmp_path, capsys):
        doc = json.loads(tiny_config_file.read_text())
        doc["schedule"]["warmup"] = 5
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps(doc))
        assert run_cli("run", str(bad), "-o", str(tmp_path / "x.json")) == 2
        assert "schedule.warmup" in capsys.readouterr().err


class TestSweep:
    def test_unknown_family_lists_valid_names(self, tmp_path, capsys):
        assert run_cli("sweep", "bogus", "-o", str(tmp_path)) == 2
        err = capsys.readouterr().err
        assert "width" in err and "pooling" in err

    @pytest.mark.slow
    def test_pooling_sweep_produces_two_variants(self, tmp_path, cache_dir, monkeypatch):
        monkeypatch.setenv("INFOPLANE_CACHE_DIR", str(cache_dir))
        out = tmp_path / "sweep"
        code = run_cli("sweep", "pooling", "-o", str(out), "--profile", "desk",
                       "--dataset", "synthetic", "--epochs", "3")
        assert code == 0
        results = sorted(out.glob("pooling__*.json"))
        assert len(results) == 2
        assert (out / "pooling.csv").exists()
        assert len(list(out.glob("*.svg"))) == 8  # 2 variants x 2 splits x 2 figures


class TestVerify:
    @pytest.fixture
    def result_file(self, tiny_config_file, tmp_path, cache_dir, monkeypatch):
        monkeypatch.setenv("INFOPLANE_CACHE_DIR", str(cache_dir))
        out = tmp_path / "result.json"
        assert run_cli("run", str(tiny_config_file), "-o", str(out)) == 0
        return out

    def test_fresh_result_passes(self, result_file, capsys):
        assert run_cli("verify", str(result_file)) == 0
        out = capsys.readouterr().out
        assert "PASS" in out and "FAIL" not in out

    def test_corrupted_mi_value_fails(self, result_file, capsys):
        doc = json.loads(result_file.read_text())
        doc["mi_records"][0]["i_xt_bits"] = 99.0  # > log2 N
        result_file.write_text(json.dumps(doc))
        assert run_cli("verify", str(result_file)) == 1
        assert "FAIL" in capsys.readouterr().out

    def test_dpi_violations_are_warnings_not_failures(self, result_file, capsys):
        doc = json.loads(result_file.read_text())
        # make layer MI increase along the chain but stay within bounds
        recs = doc["mi_records"]
        by_key = {}
        for r in recs:
            by_key.setdefault((r["epoch"], r["split"]), []).append(r)
        for group in by_key.values():
            group.sort(key=lambda r: r["layer"])
            group[0]["i_xt_bits"], group[0]["i_ty_bits"] = 0.5, 0.1
            group[1]["i_xt_bits"], group[1]["i_ty_bits"] = 0.9, 0.2
        result_file.write_text(json.dumps(doc))
        assert run_cli("verify", str(result_file)) == 0
        out = capsys.readouterr().out
        assert "warning: DPI" in out

    def test_missing_file_usage_error(self, tmp_path):
        assert run_cli("verify", str(tmp_path / "nope.json")) == 2
