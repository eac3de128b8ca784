import pandas as pd
import pytest

from layerpot.cli import build_parser, main


@pytest.fixture
def config_file(tmp_path):
    path = tmp_path / "config.ini"
    path.write_text(f"[paths]\nlog_dir = {tmp_path / 'logs'}\noutput_dir = {tmp_path / 'data'}\n")
    return str(path)


def test_parser_defaults():
    args = build_parser().parse_args(["run", "--surface", "torus", "--n", "64"])
    assert args.mode == "both"
    assert args.delta_ratio is None
    assert args.backend is None


def test_unknown_surface_is_rejected():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["run", "--surface", "klein-bottle", "--n", "64"])


def test_nodes_command(config_file, capsys):
    assert main(["nodes", "--surface", "sphere", "--n", "16", "--config", config_file]) == 0
    out = capsys.readouterr().out
    assert "sphere" in out and "Area" in out


def test_run_appends_csv(config_file, tmp_path, capsys):
    out = tmp_path / "results.csv"
    argv = ["run", "--surface", "sphere", "--n", "16", "--mode", "near", "--out", str(out),
            "--bins", "--config", config_file]
    assert main(argv) == 0
    frame = pd.read_csv(out)
    assert len(frame) == 1
    assert frame.loc[0, "delta_ratio"] == 2.0
    assert "|b|/h" in capsys.readouterr().out


def test_bare_output_name_goes_to_output_dir(config_file, tmp_path):
    argv = ["run", "--surface", "sphere", "--n", "16", "--mode", "on", "--out", "on.csv",
            "--no-table", "--config", config_file]
    assert main(argv) == 0
    frame = pd.read_csv(tmp_path / "data" / "on.csv")
    assert frame.loc[0, "delta_ratio"] == 3.0


def test_library_errors_exit_nonzero(config_file, capsys):
    assert main(["nodes", "--surface", "sphere", "--n", "16", "--theta", "50", "--config", config_file]) == 1
    assert "Error:" in capsys.readouterr().err


def test_rates_command(config_file, tmp_path, capsys):
    out = tmp_path / "results.csv"
    for n in ("16", "20"):
        main(["run", "--surface", "sphere", "--n", n, "--mode", "near", "--out", str(out),
              "--no-table", "--config", config_file])
    assert main(["rates", "--csv", str(out), "--config", config_file]) == 0
    assert "16->20" in capsys.readouterr().out


@pytest.mark.parametrize(
    "section, key, value",
    [("treecode", "separation", "1.5"), ("corrections", "lattice_cutoff", "0"), ("treecode", "degree", "twelve")],
)
def test_bad_config_value_exits_nonzero(tmp_path, capsys, section, key, value):
    path = tmp_path / "config.ini"
    path.write_text(f"[paths]\nlog_dir = {tmp_path / 'logs'}\noutput_dir = {tmp_path / 'data'}\n"
                    f"[{section}]\n{key} = {value}\n")
    argv = ["run", "--surface", "sphere", "--n", "16", "--mode", "near", "--no-table", "--config", str(path)]
    assert main(argv) == 1
    assert "Error:" in capsys.readouterr().err
