import json

from blockbox.cli import main


def test_calibrate_prints_difficulty(capsys):
    assert main(["calibrate", "--nodes", "9", "--hashrate", "31852", "--target-ms", "750"]) == 0
    assert capsys.readouterr().out.strip() == "215001"


def test_run_export_metrics_replay_cycle(tmp_path, capsys):
    out = tmp_path / "run1"
    rc = main([
        "run",
        "--name", "cli-smoke",
        "--topology", "ring", "--nodes", "3",
        "--difficulty", "400",
        "--target-ms", "100",
        "--stop-height", "8",
        "--seed", "3",
        "--latency-base-ms", "2",
        "--hashrate", "1000",
        "--out", str(out),
    ])
    assert rc == 0
    stdout = capsys.readouterr().out
    assert "mainchain rate" in stdout
    assert (out / "config.json").exists()
    assert (out / "logs" / "n0.jsonl").exists()

    rc = main(["metrics", str(out), "--check"])
    assert rc == 0
    assert "byte-for-byte" in capsys.readouterr().out

    rc = main(["replay", str(out)])
    assert rc == 0
    report = capsys.readouterr().out
    assert report.count("OK") == 3 and "MISMATCH" not in report


def test_run_with_config_file(tmp_path, capsys):
    cfg = {
        "name": "from-file",
        "n": 4,
        "topology": {"kind": "star", "n": 4},
        "genesis": {"chain_id": 2, "difficulty": 300},
        "target_interval_ms": 80,
        "stop": {"height": 6},
        "seed": 11,
        "hashrate": 1000,
    }
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    rc = main(["run", "--config", str(path)])
    assert rc == 0
    assert "mainchain rate" in capsys.readouterr().out


def test_run_auto_difficulty(tmp_path, capsys):
    rc = main([
        "run", "--topology", "ring", "--nodes", "3", "--difficulty", "auto",
        "--target-ms", "50", "--hashrate", "2000", "--stop-height", "5", "--seed", "9",
    ])
    assert rc == 0


def test_metrics_check_detects_tampering(tmp_path, capsys):
    out = tmp_path / "run2"
    main([
        "run", "--topology", "ring", "--nodes", "3", "--difficulty", "300",
        "--target-ms", "100", "--stop-height", "5", "--seed", "4", "--out", str(out),
    ])
    capsys.readouterr()
    (out / "metrics.json").write_text("{}\n")
    assert main(["metrics", str(out), "--check"]) == 1
