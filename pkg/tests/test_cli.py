import json

import pytest

from levsim import __version__
from levsim import cli
from levsim.cli import dispatch
from levsim.context import settings
from levsim.manifest import RunManifest, read_csv

BALANCED = {
    "frequency_unit_convention": "angular",
    "omega_x": 130.0,
    "omega_y": 160.0,
    "gamma_gx": 0.06,
    "gamma_gy": 0.06,
    "gamma_ay": 0.12,
}

THERMAL = {
    "omega_x": 1.0,
    "omega_y": 1.3,
    "gamma_gx": 0.5,
    "gamma_gy": 0.5,
    "D_tx": 1.0,
    "D_ty": 1.0,
}


@pytest.fixture
def config_file(tmp_path):
    def write(document):
        path = tmp_path / "config.json"
        path.write_text(json.dumps(document))
        return str(path)

    return write


def error_line(capsys):
    lines = capsys.readouterr().err.strip().splitlines()
    return json.loads(lines[-1])


def test_eigen_writes_table_and_manifest(tmp_path, config_file):
    out = tmp_path / "eigen.csv"
    status = dispatch(
        ["eigen", "--config", config_file(BALANCED), "--points", "20", "--out", str(out)]
    )
    assert status == 0
    columns = read_csv(out)
    assert len(columns["beta"]) == 20
    # default range reaches four times the balanced rate
    assert columns["beta"][-1] == pytest.approx(0.24)

    manifest = RunManifest.load(tmp_path / "eigen.csv.manifest.json")
    assert manifest.subcommand == "eigen"
    assert manifest.version == __version__
    assert manifest.outputs == [str(out)]
    assert manifest.config["omega_x"] == 130.0
    assert manifest.config["frequency_unit_convention"] == "angular"


def test_rerun_reproduces_a_seeded_run(tmp_path, config_file):
    first = tmp_path / "first.csv"
    argv = ["langevin", "--config", config_file(THERMAL), "--n-traj", "3"]
    argv += ["--t-end", "0.2", "--seed", "5", "--out", str(first)]
    assert dispatch(argv) == 0
    manifest = RunManifest.load(tmp_path / "first.csv.manifest.json")
    assert manifest.seeds["master_seed"] == 5

    again = tmp_path / "again.csv"
    status = dispatch(
        ["rerun", str(tmp_path / "first.csv.manifest.json"), "--out", str(again)]
    )
    assert status == 0
    assert again.read_bytes() == first.read_bytes()


def test_rerun_does_not_need_the_config_file(tmp_path, config_file):
    out = tmp_path / "eigen.csv"
    path = config_file(BALANCED)
    dispatch(["eigen", "--config", path, "--points", "5", "--out", str(out)])
    (tmp_path / "config.json").unlink()
    copy = tmp_path / "copy.csv"
    assert dispatch(["rerun", str(out) + ".manifest.json", "--out", str(copy)]) == 0
    assert copy.read_bytes() == out.read_bytes()


def test_phonon_run(tmp_path, config_file):
    out = tmp_path / "phonon.csv"
    argv = ["phonon", "--config", config_file(THERMAL), "--t-end", "0.01"]
    assert dispatch(argv + ["--dt", "1e-3", "--out", str(out)]) == 0
    columns = read_csv(out)
    assert len(columns["t"]) == 11


def test_repro_writes_into_a_directory(tmp_path):
    out = tmp_path / "fig2"
    assert dispatch(["repro", "fig2", "--out", str(out)]) == 0
    assert len(read_csv(out / "fig2.csv")["beta"]) == 1000
    assert "plot 'fig2.csv'" in (out / "fig2.gp").read_text()
    manifest = RunManifest.load(out / "manifest.json")
    assert manifest.config is None
    assert manifest.outputs[-1] == str(out / "fig2.gp")


def test_minima_of_both_modes(tmp_path, config_file):
    document = dict(BALANCED, gamma_ay=0.0, D_tx=1.0, D_ty=1.0)
    out = tmp_path / "minima.csv"
    argv = ["minima", "--config", config_file(document), "--points", "2000"]
    assert dispatch(argv + ["--out", str(out)]) == 0
    header = out.read_text().splitlines()[0]
    assert header == "mode,omega_min,sensitivity"


def test_missing_config_is_a_usage_error(capsys):
    assert dispatch(["eigen"]) == 2
    assert error_line(capsys)["error"] == "ConfigError"


def test_unreadable_config_is_a_usage_error(tmp_path, capsys):
    assert dispatch(["eigen", "--config", str(tmp_path / "nope.json")]) == 2
    assert error_line(capsys)["error"] == "ConfigError"


def test_invalid_config_value(tmp_path, config_file, capsys):
    document = dict(BALANCED, gamma_gx=-1.0)
    assert dispatch(["eigen", "--config", config_file(document)]) == 2
    assert error_line(capsys)["error"] == "OutOfRange"


def test_unknown_subcommand(capsys):
    assert dispatch(["fly"]) == 2
    line = error_line(capsys)
    assert line["error"] == "UnknownSubcommand"
    assert "eigen" in line["message"]


@pytest.mark.parametrize(["figure"], [("fig1",), ("fig10",)])
def test_unknown_figure(figure, capsys):
    assert dispatch(["repro", figure]) == 2
    assert error_line(capsys)["error"] == "UnknownFigure"


def test_runtime_failure_exits_with_one(tmp_path, config_file, capsys):
    argv = ["langevin", "--config", config_file(THERMAL), "--n-traj", "1"]
    assert dispatch(argv + ["--out", str(tmp_path / "x.csv")]) == 1
    line = error_line(capsys)
    assert line["error"] == "InsufficientData"
    assert not (tmp_path / "x.csv.manifest.json").exists()


def test_degenerate_trap_exits_with_one(tmp_path, config_file, capsys):
    document = dict(BALANCED, omega_y=130.0)
    argv = ["eigen", "--config", config_file(document), "--beta-max", "0.1"]
    assert dispatch(argv + ["--out", str(tmp_path / "e.csv")]) == 1
    assert error_line(capsys)["error"] == "DegenerateTrap"


def test_rerun_of_a_missing_manifest(tmp_path, capsys):
    assert dispatch(["rerun", str(tmp_path / "none.json")]) == 1
    assert error_line(capsys)["error"] == "IoError"


CLAMPING = {
    "frequency_unit_convention": "angular",
    "omega_x": 100.0,
    "omega_y": 130.0,
    "gamma_cx": 1e-3,
    "a_x0": 0.0,
}


def record(tmp_path, argv, document):
    path = tmp_path / "recorded.manifest.json"
    RunManifest(
        subcommand=argv[0], argv=argv, version=__version__, config=document
    ).write(path)
    return str(path)


def test_rerun_keeps_the_recorded_strict_mode(tmp_path, config_file, capsys):
    argv = ["phonon", "--config", config_file(CLAMPING), "--t-end", "0.1"]
    argv += ["--dt", "0.01", "--out", str(tmp_path / "phonon.csv")]
    assert dispatch(argv) == 0
    strict = record(tmp_path, argv + ["--strict"], CLAMPING)
    assert dispatch(["rerun", strict]) == 1
    assert error_line(capsys)["error"] == "NegativePopulation"


def test_rerun_keeps_the_recorded_thread_count(tmp_path, config_file, monkeypatch):
    out = tmp_path / "eigen.csv"
    argv = ["eigen", "--config", config_file(BALANCED), "--points", "5"]
    assert dispatch(argv + ["--threads", "3", "--out", str(out)]) == 0
    seen = []

    def eigen(args, config):
        seen.append(settings.threads)
        out.write_text("beta\n")
        return [out], {}

    monkeypatch.setitem(cli.HANDLERS, "eigen", eigen)
    assert dispatch(["rerun", str(out) + ".manifest.json"]) == 0
    assert dispatch(["rerun", str(out) + ".manifest.json", "--threads", "2"]) == 0
    assert seen == [3, 2]


def test_repro_into_an_unwritable_place(tmp_path, capsys):
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    assert dispatch(["repro", "fig2", "--out", str(blocker / "fig2")]) == 1
    assert error_line(capsys)["error"] == "IoError"
