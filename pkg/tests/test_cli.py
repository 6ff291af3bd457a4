import json

import pytest

from opencoding.cli import main
from opencoding.resources import corpus_meta_path, full_corpus_path, sample_corpus_path

def run_cli(*argv):
    return main([str(a) for a in argv])

@pytest.fixture()
def dataset_file(tmp_path):
    out = tmp_path / "dataset.json"
    code = run_cli(
        "ingest", full_corpus_path(), "--base-year", "2017",
        "--out", out, "--meta", corpus_meta_path(),
    )
    assert code == 0
    return out

def test_ingest_sample(tmp_path, capsys):
    out = tmp_path / "sample.json"
    code = run_cli("ingest", sample_corpus_path(), "--base-year", "2017", "--out", out)
    assert code == 0
    assert "36 messages" in capsys.readouterr().out
    doc = json.loads(out.read_text())
    assert doc["schema"] == "dataset/v1"
    assert len(doc["messages"]) == 36

def test_ingest_failure_exit_code(tmp_path, capsys):
    code = run_cli("ingest", tmp_path / "missing.tsv", "--base-year", "2017", "--out", tmp_path / "x")
    assert code == 1
    assert "error:" in capsys.readouterr().err

def test_segment_command(dataset_file, tmp_path, capsys):
    out = tmp_path / "chunks.json"
    code = run_cli("segment", dataset_file, "--min-gap-min", "180", "--out", out)
    assert code == 0
    doc = json.loads(out.read_text())
    covered = [mid for c in doc["chunks"] for mid in c["core_ids"]]
    assert len(covered) == 127

def test_run_mock_twice_byte_identical(dataset_file, tmp_path):
    for name in ("a", "b"):
        code = run_cli(
            "run", "--approach", "all", "--dataset", dataset_file,
            "--backend", "mock", "--seed", "7", "--out-dir", tmp_path / name,
        )
        assert code == 0
    for artifact in sorted((tmp_path / "a").glob("codebook_*.json")):
        twin = tmp_path / "b" / artifact.name
        assert artifact.read_bytes() == twin.read_bytes()

def test_run_single_approach_with_chunks_file(dataset_file, tmp_path):
    chunks = tmp_path / "chunks.json"
    assert run_cli("segment", dataset_file, "--out", chunks) == 0
    code = run_cli(
        "run", "--approach", "chunk", "--dataset", dataset_file,
        "--chunks", chunks, "--backend", "mock", "--seed", "3",
        "--out-dir", tmp_path / "run",
    )
    assert code == 0
    assert (tmp_path / "run" / "codebook_chunk.json").exists()
    assert not (tmp_path / "run" / "codebook_item.json").exists()

def test_aggregate_and_export(dataset_file, tmp_path, capsys):
    assert run_cli(
        "run", "--approach", "item", "--dataset", dataset_file,
        "--backend", "mock", "--seed", "1", "--out-dir", tmp_path / "run",
    ) == 0
    out = tmp_path / "codebook.json"
    code = run_cli(
        "aggregate", tmp_path / "run" / "responses_item.json",
        "--dataset", dataset_file, "--out", out,
    )
    assert code == 0
    # aggregate reproduces the codebook the run wrote
    assert json.loads(out.read_text())["codes"] == json.loads(
        (tmp_path / "run" / "codebook_item.json").read_text()
    )["codes"]
    table = tmp_path / "table.md"
    assert run_cli("export", out, "--format", "table", "--out", table) == 0
    assert table.read_text().startswith("| Label | Examples |")

def test_fixtures_load_and_report(tmp_path, capsys):
    store = tmp_path / "store"
    assert run_cli("fixtures", "load", "--store", store) == 0
    capsys.readouterr()
    assert run_cli("report", "--store", store) == 0
    out = capsys.readouterr().out
    assert "DRAFT" not in out
    lines = out.splitlines()
    codes_row = next(l for l in lines if l.startswith("# of codes"))
    ground_row = next(l for l in lines if l.startswith("# of groundedness issues"))
    broad_row = next(l for l in lines if l.startswith("# of overly broad"))
    assert codes_row.split()[-4:] == ["23", "48", "240", "271"]
    assert ground_row.split()[-4:] == ["2", "1", "2", "0"]
    assert broad_row.split()[-4:] == ["2", "3", "5", "7"]

def test_report_json_format(tmp_path, capsys):
    store = tmp_path / "store"
    run_cli("fixtures", "load", "--store", store)
    capsys.readouterr()
    assert run_cli("report", "--store", store, "--format", "json") == 0
    body = json.loads(capsys.readouterr().out)
    assert body["approaches"]["verb"]["overly_broad_pct"] == "2.58%"

def test_report_draft_exit_zero(tmp_path, capsys):
    store = tmp_path / "store"
    run_cli("fixtures", "load", "--store", store, "--pending")
    capsys.readouterr()
    assert run_cli("report", "--store", store) == 0
    assert "DRAFT" in capsys.readouterr().out

def test_unknown_flag_usage_error(capsys):
    with pytest.raises(SystemExit) as err:
        run_cli("report", "--no-such-flag")
    assert err.value.code == 2

def test_record_then_replay_cli(dataset_file, tmp_path):
    fixtures_dir = tmp_path / "recorded"
    assert run_cli(
        "run", "--approach", "chunk", "--dataset", dataset_file,
        "--backend", "mock", "--seed", "4", "--record", fixtures_dir,
        "--out-dir", tmp_path / "original",
    ) == 0
    assert run_cli(
        "run", "--approach", "chunk", "--dataset", dataset_file,
        "--backend", "replay", "--seed", "4", "--fixtures", fixtures_dir,
        "--replay-origin", "mock", "--out-dir", tmp_path / "replayed",
    ) == 0
    original = (tmp_path / "original" / "codebook_chunk.json").read_text()
    replayed = (tmp_path / "replayed" / "codebook_chunk.json").read_text()
    assert json.loads(original)["codes"] == json.loads(replayed)["codes"]
