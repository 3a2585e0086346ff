import csv
import io
import json
import subprocess
import sys
from importlib import resources

import pytest

from phaseqm import tasks
from phaseqm.cli import main
from phaseqm.errors import NumericError

CONFIGS = resources.files("phaseqm") / "configs"


def bundled(name):
    return json.loads((CONFIGS / name).read_text())


def write_config(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data))
    return str(path)


@pytest.fixture(autouse=True)
def in_tmp(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv("PHASEQM_THREADS", raising=False)
    monkeypatch.delenv("TOOL_THREADS", raising=False)


# --- run ------------------------------------------------------------------------


def test_quantize_harmonic_lists_integer_levels(tmp_path, capsys):
    cfg = write_config(tmp_path, bundled("harmonic_quantize.json"))
    assert main(["run", cfg, "--output", "levels.json"]) == 0
    report = json.loads((tmp_path / "levels.json").read_text())
    levels = report["tasks"][0]["data"]["levels"]
    assert [lv["n"] for lv in levels] == list(range(1, 11))
    assert all(abs(lv["energy"] - lv["n"]) <= 1e-8 * lv["n"] for lv in levels)
    assert report["passed"] and report["config"]["task"] == "quantize"
    assert "PASS" in capsys.readouterr().out


def test_uncertainty_seed_42(tmp_path):
    cfg = write_config(tmp_path, bundled("uncertainty_random42.json"))
    assert main(["run", cfg]) == 0
    data = json.loads((tmp_path / "uncertainty_seed42.json").read_text())["tasks"][0]["data"]
    assert abs(data["B"] + 1.0) <= 1e-6
    assert data["discriminant"] <= 1e-9
    assert data["product"] >= data["bound"] * (1 - 1e-9)
    assert data["provenance"]["seed"] == 42


def test_small_grid_count_exits_2(tmp_path, capsys):
    data = bundled("uncertainty_random42.json")
    data["grid"]["axis_a"]["count"] = 5
    assert main(["run", write_config(tmp_path, data)]) == 2
    err = capsys.readouterr().err
    assert "grid.axis_a.count" in err and ">= 9" in err


def test_malformed_json_reports_position(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "schema_version": 1,\n  "task": quantize\n}\n')
    assert main(["run", str(path)]) == 2
    err = capsys.readouterr().err
    assert "line 3" in err and "column" in err


@pytest.mark.parametrize(
    "mutate, needle",
    [
        (lambda d: d.update(schema_version=2), "schema_version"),
        (lambda d: d.update(task="integrate"), "task"),
        (lambda d: d.update(hbar=0.0), "hbar"),
        (lambda d: d.pop("hamiltonian"), "hamiltonian"),
        (lambda d: d["output"].update(format="xml"), "format"),
    ],
)
def test_invalid_configs_exit_2(tmp_path, capsys, mutate, needle):
    data = bundled("harmonic_quantize.json")
    mutate(data)
    assert main(["run", write_config(tmp_path, data)]) == 2
    assert needle in capsys.readouterr().err


def test_missing_config_file_exits_2(tmp_path):
    assert main(["run", str(tmp_path / "nope.json")]) == 2


def test_numeric_error_exits_3(tmp_path, monkeypatch, capsys):
    def boom(cfg):
        raise NumericError("root search did not converge")

    monkeypatch.setitem(tasks.RUNNERS, "quantize", boom)
    assert main(["run", write_config(tmp_path, bundled("harmonic_quantize.json"))]) == 3
    assert "numeric error" in capsys.readouterr().err


def test_failed_check_exits_1(tmp_path):
    data = bundled("uncertainty_random42.json")
    data["tolerances"] = {"b_identity": 1e-15}
    assert main(["run", write_config(tmp_path, data)]) == 1
    report = json.loads((tmp_path / "uncertainty_seed42.json").read_text())
    assert not report["passed"] and report["summary"]["failed"] >= 1


def test_csv_output(tmp_path):
    cfg = write_config(tmp_path, bundled("harmonic_quantize.json"))
    assert main(["run", cfg, "--format", "csv", "--output", "levels.csv"]) == 0
    rows = list(csv.reader(io.StringIO((tmp_path / "levels.csv").read_text())))
    assert rows[0] == ["task", "kind", "name", "value", "bound", "relation", "pass"]
    kinds = {r[1] for r in rows[1:]}
    assert kinds == {"check", "level"}
    assert sum(r[1] == "level" for r in rows) == 10


def test_fluctuation_config(tmp_path):
    assert main(["run", write_config(tmp_path, bundled("fluctuation_pair.json")), "--output", "f.json"]) == 0
    data = json.loads((tmp_path / "f.json").read_text())["tasks"][0]["data"]
    assert data["k_real"] == 1.0 and data["integral_multiple"]
    assert data["minimum_search"]["ensembles"] == 3003
    assert data["minimum_search"]["min_k_no_classical_weight"] == "1"


def test_all_tasks_config(tmp_path):
    assert main(["run", write_config(tmp_path, bundled("all.json")), "--output", "all.json"]) == 0
    report = json.loads((tmp_path / "all.json").read_text())
    names = [t["task"] for t in report["tasks"]]
    assert names == ["quantize", "uncertainty", "commutators", "fundamental-residual", "fluctuation"]


def test_reports_are_byte_identical(tmp_path):
    cfg = write_config(tmp_path, bundled("uncertainty_random42.json"))
    main(["run", cfg, "--output", "a.json"])
    main(["run", cfg, "--output", "b.json"])
    a, b = (tmp_path / "a.json").read_bytes(), (tmp_path / "b.json").read_bytes()
    assert a == b and a.endswith(b"\n")
    assert b"wall_time_s" not in a


def test_timing_flag_embeds_wall_time(tmp_path):
    cfg = write_config(tmp_path, bundled("harmonic_quantize.json"))
    main(["run", cfg, "--timing", "--output", "t.json"])
    assert json.loads((tmp_path / "t.json").read_text())["wall_time_s"] >= 0


def test_report_embeds_config(tmp_path):
    data = bundled("fluctuation_pair.json")
    main(["run", write_config(tmp_path, data), "--output", "r.json"])
    assert json.loads((tmp_path / "r.json").read_text())["config"] == data


# --- worker cap --------------------------------------------------------------------


@pytest.mark.parametrize("var", ["PHASEQM_THREADS", "TOOL_THREADS"])
def test_thread_cap_from_environment(monkeypatch, var):
    monkeypatch.setenv(var, "3")
    assert tasks.worker_count() == 3


def test_toolkit_variable_takes_precedence(monkeypatch):
    monkeypatch.setenv("PHASEQM_THREADS", "2")
    monkeypatch.setenv("TOOL_THREADS", "5")
    assert tasks.worker_count() == 2


@pytest.mark.parametrize("raw", ["0", "-1", "four"])
def test_invalid_thread_cap_exits_2(tmp_path, monkeypatch, raw):
    monkeypatch.setenv("TOOL_THREADS", raw)
    assert main(["run", write_config(tmp_path, bundled("fluctuation_pair.json"))]) == 2


def test_single_worker_matches_pool(tmp_path, monkeypatch):
    cfg = write_config(tmp_path, bundled("all.json"))
    monkeypatch.setenv("PHASEQM_THREADS", "1")
    main(["run", cfg, "--output", "one.json"])
    monkeypatch.setenv("PHASEQM_THREADS", "4")
    main(["run", cfg, "--output", "four.json"])
    assert (tmp_path / "one.json").read_bytes() == (tmp_path / "four.json").read_bytes()


def test_map_ordered_keeps_input_order(monkeypatch):
    monkeypatch.setenv("PHASEQM_THREADS", "8")
    assert tasks.map_ordered(lambda x: x * x, range(50)) == [x * x for x in range(50)]


# --- selfcheck -----------------------------------------------------------------------


def test_selfcheck_list(capsys):
    assert main(["selfcheck", "--list"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 10


def test_perturbed_selfcheck_fails(capsys):
    assert main(["selfcheck", "--perturb-B", "0.1"]) == 1
    out = capsys.readouterr().out
    assert "FAIL" in out and "|B + 1|" in out


def test_console_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "phaseqm.cli", "run", write_config(tmp_path, bundled("harmonic_quantize.json"))],
        capture_output=True,
        text=True,
        cwd=tmp_path,
    )
    assert proc.returncode == 0
    assert "n=10" in proc.stdout


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert "phaseqm" in capsys.readouterr().out
