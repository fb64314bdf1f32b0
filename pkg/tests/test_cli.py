import io
import json
import sys

import pytest

from localmt.cli import main


@pytest.fixture
def data_dir(tmp_path):
    return str(tmp_path / "data")


def test_translate_stdin_echoes(data_dir, monkeypatch, capsys):
    text = "Hello CLI. Two sentences here.\n\nAnd a paragraph."
    monkeypatch.setattr(sys, "stdin", io.StringIO(text))
    code = main(["translate", "-m", "copy", "--stdin", "--data-dir", data_dir])
    captured = capsys.readouterr()
    assert code == 0
    assert captured.out == text


def test_models_list_empty_store(data_dir, capsys):
    code = main(["models", "list", "--data-dir", data_dir])
    captured = capsys.readouterr()
    assert code == 0
    assert captured.out == ""


def test_models_import_and_list(data_dir, demo_archive, capsys):
    code = main(["models", "import", str(demo_archive[0]), "--data-dir", data_dir])
    assert code == 0
    code = main(["models", "list", "--data-dir", data_dir])
    captured = capsys.readouterr()
    assert code == 0
    assert "demo-en-xx" in captured.out


def test_models_delete(data_dir, demo_archive, capsys):
    main(["models", "import", str(demo_archive[0]), "--data-dir", data_dir])
    assert main(["models", "delete", "demo-en-xx", "--data-dir", data_dir]) == 0
    assert main(["models", "delete", "demo-en-xx", "--data-dir", data_dir]) == 1


def test_unknown_model_exit_code(data_dir, monkeypatch, capsys):
    monkeypatch.setattr(sys, "stdin", io.StringIO("hello"))
    code = main(["translate", "-m", "ghost", "--stdin", "--data-dir", data_dir])
    assert code == 1


def test_missing_input_file_exit_code(data_dir, capsys):
    code = main(["translate", "-m", "copy", "-i", "/no/such/file.txt", "--data-dir", data_dir])
    assert code == 2


def test_bench_cli_json_schema(data_dir, tmp_path, capsys):
    corpus = tmp_path / "c.txt"
    corpus.write_text("One two three.\nFour five six.\n", encoding="utf-8")
    code = main(["bench", "-m", "copy", "-i", str(corpus), "--pre-split", "--threads", "1", "--data-dir", data_dir])
    captured = capsys.readouterr()
    assert code == 0
    report = json.loads(captured.out.strip().splitlines()[0])
    assert set(report) == {
        "wps", "wall_seconds", "cpu_seconds", "loaded_in_seconds",
        "words", "sentences", "threads",
    }
    assert report["words"] == 6
    assert report["sentences"] == 2
    assert report["threads"] == 1


def test_catalog_requires_url(data_dir, monkeypatch, capsys):
    monkeypatch.delenv("APP_CATALOG_URL", raising=False)
    code = main(["models", "catalog", "--data-dir", data_dir])
    assert code == 1


def test_catalog_network_error_exit_code(data_dir, capsys):
    code = main([
        "models", "catalog", "--data-dir", data_dir,
        "--catalog-url", "http://127.0.0.1:9/models.json",
    ])
    assert code == 2


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0
