import pytest

from app import __version__
from app.cli import main

CONFIG = """\
[experiment]
application = nmf
record_wall_time = false
[data]
m = 6
n = 2
l = 6
[solver]
max_iters = 5
"""


def test_version(capsys):
    assert main(["version"]) == 0
    assert capsys.readouterr().out.strip() == __version__


def test_usage_errors_exit_with_two():
    assert main([]) == 2
    assert main(["frobnicate"]) == 2
    assert main(["oracle", "everything"]) == 2


def test_missing_config_exits_with_two(tmp_path, capsys):
    assert main(["--quiet", "run", str(tmp_path / "absent.ini")]) == 2
    assert "absent.ini" in capsys.readouterr().err


def test_invalid_config_exits_with_two(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("[experiment]\napplication = dl\ntrials = many\n")
    assert main(["run", str(path), "--quiet"]) == 2


def test_run_writes_artifacts(tmp_path, capsys):
    path = tmp_path / "exp.ini"
    path.write_text(CONFIG)
    out = tmp_path / "results"
    assert main(["--quiet", "run", str(path), "--out", str(out), "--seed", "4"]) == 0
    assert "1 rows written" in capsys.readouterr().out
    assert (out / "results.csv").read_text().splitlines()[1].startswith("nmf,,,4,NMSE_Z,")
    assert (out / "config.echo").is_file()


def test_uamp_subcommand_forces_the_linear_model(tmp_path):
    path = tmp_path / "exp.ini"
    path.write_text("[experiment]\napplication = dl\n[data]\nm = 20\nn = 30\nper_column_sparsity = 2\n")
    out = tmp_path / "results"
    assert main(["--quiet", "uamp", str(path), "--out", str(out)]) == 0
    assert (out / "results.csv").read_text().splitlines()[1].startswith("uamp,")


@pytest.mark.parametrize("suite", ["metrics"])
def test_oracle_suite_passes(suite, capsys):
    assert main(["--quiet", "oracle", suite]) == 0
    output = capsys.readouterr().out
    assert "PASS metrics/" in output
    assert "FAIL" not in output
