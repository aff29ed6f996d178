import math

from app.services import experiment_service
from app.services.experiment_config import parse_experiment_config
from app.services.experiment_service import run_experiment, run_trial, worker_count
from app.storage.results_store import read_results

RPCA_SWEEP = """\
[experiment]
application = rpca
trials = 1
record_wall_time = false

[data]
m = 8
n = 1
l = 8
sparsity = 0.1

[sweep]
snr_db = 40, 50, 60

[solver]
max_iters = 30
"""


def test_snr_sweep_writes_one_row_per_point(out_dir):
    rows = run_experiment(parse_experiment_config(RPCA_SWEEP), output_dir=str(out_dir))
    assert [row.axis1 for row in rows] == [40.0, 50.0, 60.0]
    assert all(row.metric == "NMSE_Z" and row.axis2 is None for row in rows)
    assert read_results(out_dir / "results.csv") == rows
    assert (out_dir / "config.echo").is_file()
    assert (out_dir / "NMSE_Z.svg").is_file()


def test_reruns_are_byte_identical(tmp_path):
    config = parse_experiment_config(RPCA_SWEEP)
    first, second = tmp_path / "a", tmp_path / "b"
    run_experiment(config, output_dir=str(first))
    run_experiment(config, output_dir=str(second))
    for name in ("results.csv", "NMSE_Z.svg"):
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_two_axis_sweep_writes_a_heat_grid(out_dir):
    text = """\
[experiment]
application = nmf
trials = 2
[data]
m = 6
[sweep]
n = 2, 3
l = 5, 7
[solver]
max_iters = 10
"""
    rows = run_experiment(parse_experiment_config(text), output_dir=str(out_dir))
    assert len(rows) == 8
    assert [row.seed for row in rows[:2]] == [0, 1]
    lines = (out_dir / "NMSE_Z_grid.csv").read_text().splitlines()
    assert lines[0] == "n\\l,5,7"
    assert [line.split(",")[0] for line in lines[1:]] == ["2", "3"]
    assert all(len(line.split(",")) == 3 for line in lines)


def test_failed_trial_is_recorded_not_raised(out_dir):
    text = "[experiment]\napplication = dl\n[data]\nn = 3\nper_column_sparsity = 5\n"
    rows = run_experiment(parse_experiment_config(text), output_dir=str(out_dir))
    assert len(rows) == 1
    assert rows[0].metric == "NMSE_H"
    assert rows[0].value_db == 0.0
    assert not rows[0].converged


def test_non_finite_metric_counts_as_failure(monkeypatch):
    monkeypatch.setattr(experiment_service, "nmse_z", lambda *args: math.nan)
    config = parse_experiment_config(
        "[experiment]\napplication = nmf\n[data]\nm = 5\nn = 2\nl = 5\n[solver]\nmax_iters = 5\n"
    )
    (row,) = run_trial(config, (None, None), seed=0)
    assert row.value_db == 0.0 and not row.converged


def test_sparse_mf_reports_two_metrics():
    config = parse_experiment_config(
        "[experiment]\napplication = sparse_mf\n[data]\nm = 6\nn = 2\nl = 8\nsparsity = 0.8\n[solver]\nmax_iters = 5\n"
    )
    rows = run_trial(config, (None, None), seed=3)
    assert [row.metric for row in rows] == ["NMSE_H", "NMSE_Z"]
    assert rows[0].iters == rows[1].iters


def test_linear_model_experiment_with_seed_override(out_dir):
    text = """\
[experiment]
application = uamp
trials = 2
[data]
m = 20
n = 40
per_column_sparsity = 3
snr_db = 40
"""
    rows = run_experiment(parse_experiment_config(text), output_dir=str(out_dir), seed=100)
    assert [row.seed for row in rows] == [100, 101]
    assert all(row.metric == "NMSE_X" for row in rows)
    assert (out_dir / "NMSE_X.svg").is_file()


def test_worker_count(monkeypatch):
    from app.core.config import get_settings

    assert worker_count() == 2
    monkeypatch.setenv("UAMPMF_THREADS", "0")
    get_settings.cache_clear()
    assert worker_count() >= 1

