import json

import pytest

from toolchat.benchmark import save_dataset, write_scripted_fixture, replay_rules
from toolchat.cli import main
from toolchat.registry import default_catalog

from helpers import make_benchmark


@pytest.fixture(scope="module")
def bench_files(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("bench")
    catalog = default_catalog()
    records = make_benchmark(catalog, n=8)
    dataset = tmp / "dataset.jsonl"
    fixture = tmp / "replay.jsonl"
    save_dataset(records, dataset)
    write_scripted_fixture(replay_rules(records), fixture)
    return tmp, dataset, fixture


def test_bench_replay_all_ones_exit_0(bench_files, capsys):
    tmp, dataset, fixture = bench_files
    out = tmp / "report.json"
    code = main(
        [
            "bench",
            "--dataset",
            str(dataset),
            "--backend",
            f"scripted:{fixture}",
            "--out",
            str(out),
        ]
    )
    assert code == 0
    report = json.loads(out.read_text())
    assert report["metrics"]["sr"] == 1.0
    assert report["metrics"]["iou"] == 1.0
    dump = out.parent / "report.json.dump.jsonl"
    assert dump.exists()
    assert len(dump.read_text().splitlines()) == 9  # header + 8 records


def test_bench_missing_dataset_exit_2(tmp_path, capsys):
    code = main(
        [
            "bench",
            "--dataset",
            str(tmp_path / "missing.jsonl"),
            "--backend",
            "scripted:whatever",
            "--out",
            str(tmp_path / "r.json"),
        ]
    )
    assert code == 2
    assert "error" in capsys.readouterr().err


def test_bench_missing_fixture_exit_3(bench_files, tmp_path, capsys):
    _, dataset, _ = bench_files
    code = main(
        [
            "bench",
            "--dataset",
            str(dataset),
            "--backend",
            f"scripted:{tmp_path / 'missing_fixture.jsonl'}",
            "--out",
            str(tmp_path / "r.json"),
        ]
    )
    assert code == 3


def test_bench_json_error_format(tmp_path, capsys):
    code = main(
        [
            "--format",
            "json",
            "bench",
            "--dataset",
            str(tmp_path / "missing.jsonl"),
            "--backend",
            "scripted:x",
            "--out",
            str(tmp_path / "r.json"),
        ]
    )
    assert code == 2
    err = capsys.readouterr().err.strip()
    assert json.loads(err)["error"]


def test_build_docs_offline_prints_prompt(tmp_path, capsys):
    paper = tmp_path / "paper.txt"
    paper.write_text("This method reconstructs people from photos.")
    code = main(["build-docs", "--paper-text", str(paper), "--tool", "Some Tool"])
    assert code == 0
    out = capsys.readouterr().out
    assert "Method name is a tool to do something" in out
    assert "This method reconstructs people from photos." in out


def test_build_docs_missing_paper_exit_2(tmp_path, capsys):
    code = main(["build-docs", "--paper-text", str(tmp_path / "nope.txt"), "--tool", "T"])
    assert code == 2


def test_remote_backend_unconfigured_exit_3(bench_files, tmp_path, monkeypatch):
    monkeypatch.delenv("TOOLCHAT_LLM_ENDPOINT", raising=False)
    _, dataset, _ = bench_files
    code = main(
        ["bench", "--dataset", str(dataset), "--backend", "remote", "--out", str(tmp_path / "r.json")]
    )
    assert code == 3
