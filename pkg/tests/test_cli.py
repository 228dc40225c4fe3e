import filecmp
import json
import os
from pathlib import Path

import pytest

from dnsjack.cli import main
from dnsjack.config import PipelineConfig, load_config
from dnsjack.errors import ParameterError

from synth import resource_profiles, write_capture_manifest, write_list, write_log

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for key in list(os.environ):
        if key.startswith("DNSJACK_") and key != "DNSJACK_PURE_PYTHON":
            monkeypatch.delenv(key)


def make_dataset(root: Path, hours=6):
    benign, miners = write_log(root / "log.csv", hours, n_benign=60, n_miners=16, seed=7)
    write_list(root / "benign.txt", benign[:40])
    write_list(root / "malicious.txt", miners[:4])
    write_list(root / "cryptojacked.txt", miners[4:])
    (root / "config.yaml").write_text(
        f"log: {root / 'log.csv'}\nbenign: {root / 'benign.txt'}\nmalicious: {root / 'malicious.txt'}\n"
        f"cryptojacked: {root / 'cryptojacked.txt'}\nwindow_k_range: [2, 4]\ntrain_frac: 0.7\n")
    return benign, miners


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("run")
    benign, miners = make_dataset(root)
    out = root / "out"
    base = ["--config", str(root / "config.yaml"), "--out", str(out)]
    assert main(["features"] + base) == 0
    assert main(["detect"] + base) == 0
    assert main(["similarity"] + base + ["--class-a", "cryptojacked", "--class-b", "benign"]) == 0
    return root, out, benign, miners


def test_features_outputs(run_dir):
    _, out, benign, miners = run_dir
    assert sorted(os.listdir(out / "features" / "2H")) == ["window_0000.csv", "window_0001.csv", "window_0002.csv"]
    lines = (out / "features" / "ALL.csv").read_text().splitlines()
    assert len(lines) == 1 + len(benign) + len(miners)
    assert len(lines[0].split(",")) == 2 + 48 + 1
    assert "| f48 |" in (out / "features" / "catalog.md").read_text()


def test_three_dn_log_gives_3x48(tmp_path):
    log = tmp_path / "log.csv"
    log.write_text("timestamp,domain,query_type,resolved_ips,name_servers\n"
                   "0,a.com,A,1.1.1.1,ns.x\n10,b.com,A,1.1.1.2,ns.x\n20,c.org,AAAA,2001:db8::1,\n")
    assert main(["features", "--log", str(log), "--out", str(tmp_path / "o")]) == 0
    rows = (tmp_path / "o" / "features" / "ALL.csv").read_text().splitlines()
    assert len(rows) == 4 and all(len(r.split(",")) == 51 for r in rows)


def test_detect_outputs(run_dir):
    _, out, _, miners = run_dir
    scores = (out / "detect" / "scores.csv").read_text().splitlines()
    assert scores[0] == "dn,times_malicious,times_seen,probability"
    metrics = json.loads((out / "detect" / "metrics.json").read_text())
    assert metrics["preset"] == "paper"
    hp = metrics["hyperparameters"]
    assert (hp["criterion"], hp["max_depth"], hp["min_samples_leaf"], hp["min_samples_split"], hp["splitter"]) == \
        ("gini", 10, 13, 12, "best")
    assert 0 <= metrics["balanced_accuracy"] <= 1
    flagged = json.loads((out / "detect" / "unsupervised.json").read_text())["flagged"]
    assert set(flagged) <= set(miners)


def test_similarity_outputs(run_dir):
    _, out, _, _ = run_dir
    rep = json.loads((out / "similarity" / "report.json").read_text())
    assert rep["class_a"] == "cryptojacked"
    assert rep["features"] or rep["skipped"]
    for doc in rep["features"]:
        assert doc["kld_nats"] is None or doc["kld_nats"] >= 0


def test_validate_outputs(run_dir, capsys):
    _, out, _, _ = run_dir
    assert main(["validate-outputs", "--out", str(out)]) == 0
    assert "0 problem(s)" in capsys.readouterr().out


def test_validate_outputs_detects_corruption(run_dir, tmp_path):
    import shutil
    _, out, _, _ = run_dir
    copy = tmp_path / "copy"
    shutil.copytree(out, copy)
    (copy / "detect" / "metrics.json").write_text('{"balanced_accuracy": "high"}')
    assert main(["validate-outputs", "--out", str(copy)]) == 4


def test_byte_identical_reruns(tmp_path):
    make_dataset(tmp_path)
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        base = ["--config", str(tmp_path / "config.yaml"), "--out", str(out), "--seed", "3"]
        assert main(["features"] + base) == 0
        assert main(["detect"] + base) == 0
        outs.append(out)
    files = sorted(str(p.relative_to(outs[0])) for p in outs[0].rglob("*") if p.is_file())
    assert files == sorted(str(p.relative_to(outs[1])) for p in outs[1].rglob("*") if p.is_file())
    _, mismatch, errors = filecmp.cmpfiles(outs[0], outs[1], files, shallow=False)
    assert mismatch == [] and errors == []


def test_workers_do_not_change_results(tmp_path):
    make_dataset(tmp_path)
    outs = []
    for workers in ("1", "3"):
        out = tmp_path / f"w{workers}"
        base = ["--config", str(tmp_path / "config.yaml"), "--out", str(out), "--workers", workers]
        assert main(["features"] + base) == 0
        assert main(["detect"] + base) == 0
        outs.append((out / "detect" / "scores.csv").read_bytes())
    assert outs[0] == outs[1]


def test_audit_run(tmp_path):
    profiles = resource_profiles(1, n_inliers=40, n_outliers=3)
    write_capture_manifest(tmp_path / "captures.jsonl", profiles)
    (tmp_path / "whois.jsonl").write_text(
        '{"dn": "a.gov.in", "ns": ["ns1.nic.in"], "country": "IN"}\n'
        '{"dn": "b.gov.in", "ns": ["ns1.nic.in"]}\n'
        '{"dn": "c.gov.in", "a_records": ["10.0.0.1"], "country": "IN"}\n')
    out = tmp_path / "out"
    code = main(["audit", "--out", str(out), "--corpus", str(FIXTURES / "corpus"),
                 "--urls", str(FIXTURES / "corpus" / "urls.txt"),
                 "--signatures", str(FIXTURES / "corpus" / "signatures.txt"),
                 "--captures", str(tmp_path / "captures.jsonl"), "--whois", str(tmp_path / "whois.jsonl")])
    assert code == 0
    summary = json.loads((out / "audit" / "summary.json").read_text())
    assert summary["n_hits"] == 7 and summary["n_pages"] == 3
    report = json.loads((out / "audit" / "report.json").read_text())
    pages = ["http://gov-a.example/", "http://gov-b.example/", "http://gov-c.example/"]
    assert all(report[u]["flagged"] for u in pages)
    assert sum(len(report[u]["hits"]) for u in pages) == 7
    assert sum(report[p.url]["cluster"] is not None for p in profiles) == len(profiles)
    comps = json.loads((out / "audit" / "whois_components.json").read_text())
    assert comps["n_components"] == 2 and comps["components"][0] == ["a.gov.in", "b.gov.in"]
    tally = json.loads((out / "audit" / "country_tally.json").read_text())
    assert tally == {"countries": {"IN": 2}, "absent": 1}
    clustering = json.loads((out / "audit" / "resource_clustering.json").read_text())
    assert sorted(clustering["cluster_sizes"]) == [3, 40]
    assert main(["validate-outputs", "--out", str(out)]) == 0


def test_config_layering(tmp_path, monkeypatch):
    cfg_file = tmp_path / "c.yaml"
    cfg_file.write_text("seed: 1\ngranularity_hours: 4\nwindow_k_range: [3, 5]\npreset: tpot_b\n")
    env = {"DNSJACK_SEED": "2", "DNSJACK_GRANULARITY_HOURS": "6", "DNSJACK_PURE_PYTHON": "1"}
    cfg = load_config(str(cfg_file), {"seed": 3}, env)
    assert (cfg.seed, cfg.granularity_hours, cfg.window_k_range, cfg.preset) == (3, 6, (3, 5), "tpot_b")
    assert load_config(None, {}, {}) == PipelineConfig()
    assert cfg.hyperparameters().criterion == "entropy"
    with pytest.raises(ParameterError):
        load_config(None, {"bogus": 1}, {})
    bad = tmp_path / "bad.yaml"
    bad.write_text("train_frac: 0.8\nmystery: 1\n")
    assert main(["features", "--config", str(bad), "--log", str(cfg_file)]) == 2


def test_env_override_reaches_cli(tmp_path, monkeypatch):
    log = tmp_path / "log.csv"
    write_log(log, 6, 5, 1)
    monkeypatch.setenv("DNSJACK_GRANULARITY_HOURS", "3")
    assert main(["features", "--log", str(log), "--out", str(tmp_path / "o")]) == 0
    assert len(os.listdir(tmp_path / "o" / "features" / "3H")) == 2


def test_exit_codes(tmp_path, capsys):
    assert main(["features", "--log", str(tmp_path / "missing.csv"), "--out", str(tmp_path / "o")]) == 2
    empty = tmp_path / "empty.csv"
    empty.write_text("timestamp,domain,query_type,resolved_ips,name_servers\n")
    assert main(["features", "--log", str(empty), "--out", str(tmp_path / "o")]) == 3
    assert main(["detect", "--out", str(tmp_path / "nothing")]) == 2
    assert main(["audit", "--out", str(tmp_path / "o")]) == 2
    with pytest.raises(SystemExit) as info:
        main(["detect", "--preset", "unknown"])
    assert info.value.code == 2


def test_detect_without_malicious_labels_is_degenerate(tmp_path):
    benign, _ = write_log(tmp_path / "log.csv", 4, 30, 0)
    write_list(tmp_path / "benign.txt", benign)
    out = str(tmp_path / "o")
    assert main(["features", "--log", str(tmp_path / "log.csv"), "--benign", str(tmp_path / "benign.txt"),
                 "--out", out]) == 0
    assert main(["detect", "--out", out]) == 3
