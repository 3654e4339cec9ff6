import io
import json

import pytest

from app.cli import EXIT_FAIL, EXIT_PASS, EXIT_USAGE, build_parser, main


def _write(path, payload):
    path.write_text(json.dumps(payload), encoding="utf-8")
    return str(path)


def _report(capsys):
    return json.loads(capsys.readouterr().out)


# ==================== comass ====================

def test_comass_exact_form(tmp_path, capsys):
    form = _write(tmp_path / "form.json", {"n": 4, "p": 2, "terms": [{"idx": [1, 2], "c": 1.0}, {"idx": [3, 4], "c": 2.0}]})
    assert main(["comass", "--form", form, "--method", "exact"]) == EXIT_PASS
    envelope = _report(capsys)
    assert envelope["command"] == "comass"
    assert envelope["report"]["lower"] == pytest.approx(2.0)
    assert envelope["report"]["method"] == "exact"
    assert len(envelope["input_hash"]) == 64


def test_comass_with_metric(tmp_path, capsys):
    form = _write(tmp_path / "form.json", {"n": 2, "p": 1, "terms": [{"idx": [1], "c": 1.0}]})
    metric = _write(tmp_path / "metric.json", {"n": 2, "entries": [[4.0, 0.0], [0.0, 1.0]]})
    assert main(["comass", "--form", form, "--metric", metric]) == EXIT_PASS
    assert _report(capsys)["report"]["lower"] == pytest.approx(0.5)


def test_comass_reads_stdin(monkeypatch, capsys):
    monkeypatch.setattr("sys.stdin", io.StringIO(json.dumps({"n": 3, "p": 3, "terms": [{"idx": [1, 2, 3], "c": -2.0}]})))
    assert main(["comass", "--form", "-"]) == EXIT_PASS
    assert _report(capsys)["report"]["lower"] == pytest.approx(2.0)


def test_comass_hash_depends_on_form(tmp_path, capsys):
    one = _write(tmp_path / "a.json", {"n": 3, "p": 1, "terms": [{"idx": [1], "c": 1.0}]})
    two = _write(tmp_path / "b.json", {"n": 3, "p": 1, "terms": [{"idx": [2], "c": 1.0}]})
    main(["comass", "--form", one])
    first = _report(capsys)["input_hash"]
    main(["comass", "--form", two])
    assert _report(capsys)["input_hash"] != first


@pytest.mark.parametrize("content", ["{not json", json.dumps({"n": 3, "p": 2, "terms": [{"idx": [2, 1], "c": 1.0}]})])
def test_comass_bad_input(tmp_path, capsys, content):
    path = tmp_path / "form.json"
    path.write_text(content, encoding="utf-8")
    assert main(["comass", "--form", str(path)]) == EXIT_USAGE
    assert capsys.readouterr().out == ""


def test_comass_exact_unsupported(tmp_path):
    terms = [{"idx": [1, 2, 3], "c": 1.0}, {"idx": [4, 5, 6], "c": 1.0}]
    form = _write(tmp_path / "form.json", {"n": 6, "p": 3, "terms": terms})
    assert main(["comass", "--form", form, "--method", "exact"]) == EXIT_USAGE


def test_comass_missing_file(tmp_path):
    assert main(["comass", "--form", str(tmp_path / "absent.json")]) == EXIT_USAGE


# ==================== lemmas ====================

def test_lemmas_single_suite(capsys):
    assert main(["lemmas", "--suite", "L3.1", "--trials", "5", "--seed", "2"]) == EXIT_PASS
    envelope = _report(capsys)
    assert envelope["command"] == "lemmas"
    assert envelope["config"] == {"suite": "L3.1", "trials": 5, "seed": 2}
    suites = envelope["report"]["suites"]
    assert [s["suite"] for s in suites] == ["L3.1"]
    assert suites[0]["pass"] is True


def test_lemmas_unknown_suite():
    assert main(["lemmas", "--suite", "L0"]) == EXIT_USAGE


def test_lemmas_config_file(tmp_path, capsys):
    config = tmp_path / "run.conf"
    config.write_text("suite=L3.17\ntrials=4\nseed=9\n", encoding="utf-8")
    assert main(["lemmas", "--config", str(config), "--seed", "1"]) == EXIT_PASS
    assert _report(capsys)["config"] == {"suite": "L3.17", "trials": 4, "seed": 1}


def test_config_file_unknown_key(tmp_path):
    config = tmp_path / "run.conf"
    config.write_text("suite=L3.1\ncolour=blue\n", encoding="utf-8")
    assert main(["lemmas", "--config", str(config)]) == EXIT_USAGE


def test_config_file_bad_value(tmp_path):
    config = tmp_path / "run.conf"
    config.write_text("resolution=16\n", encoding="utf-8")
    assert main(["forge", "--config", str(config)]) == EXIT_USAGE


# ==================== forge / minimize ====================

def test_forge_straight(tmp_path, capsys):
    dump = tmp_path / "fields.bin"
    code = main([
        "forge", "--model", "straight2d", "--resolution", "64", "--curve-samples", "1024",
        "--dump-fields", str(dump),
    ])
    assert code == EXIT_PASS
    envelope = _report(capsys)
    assert envelope["command"] == "forge"
    assert envelope["report"]["pass"] is True
    assert envelope["config"]["model"] == "straight2d"
    assert dump.is_file()

    assert main(["minimize", "--fields", str(dump), "--competitors", "4"]) == EXIT_PASS
    trial = _report(capsys)
    assert trial["command"] == "minimize"
    assert trial["report"]["competitors"] == 4


def test_minimize_missing_fields(tmp_path):
    assert main(["minimize", "--fields", str(tmp_path / "none.bin")]) == EXIT_USAGE


def test_minimize_corrupted_metric_fails(capsys):
    code = main([
        "minimize", "--model", "straight2d", "--resolution", "64", "--curve-samples", "1024",
        "--competitors", "2", "--corrupt", "metric",
    ])
    assert code == EXIT_FAIL
    assert _report(capsys)["report"]["pass"] is False


def test_threads_do_not_change_output(capsys):
    args = ["lemmas", "--suite", "L3.2", "--trials", "6"]
    main(args + ["--threads", "1"])
    first = capsys.readouterr().out
    main(args + ["--threads", "3"])
    assert capsys.readouterr().out == first


def test_parser_rejects_unknown_choice():
    with pytest.raises(SystemExit) as info:
        build_parser().parse_args(["forge", "--corrupt", "metric"])
    assert info.value.code == EXIT_USAGE
