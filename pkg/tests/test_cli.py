import numpy as np
import pytest

from paqplan.cli import main
from paqplan.reports import canonical_body, parse_report

SPACE_DOC = """
params:
  - {name: lr, kind: continuous, bounds: [1.0e-5, 1.0e+3], scale: log10}
  - {name: reg, kind: continuous, bounds: [1.0e-6, 1.0e+4], scale: log10}
"""

STABLE_SPACE_DOC = """
params:
  - {name: lr, kind: continuous, bounds: [1.0e-5, 1.0e-3], scale: log10}
  - {name: reg, kind: continuous, bounds: [1.0e-6, 1.0e-2], scale: log10}
"""


@pytest.fixture()
def space_file(tmp_path):
    path = tmp_path / "space.yaml"
    path.write_text(SPACE_DOC)
    return str(path)


@pytest.fixture()
def stable_space_file(tmp_path):
    path = tmp_path / "stable.yaml"
    path.write_text(STABLE_SPACE_DOC)
    return str(path)


def run_plan(tmp_path, space_file, name, *extra):
    out = tmp_path / name
    code = main(["plan", "--synth", "400,6,0.1", "--space", space_file,
                 "--out", str(out), *extra])
    assert code == 0
    return out.read_text()


def test_grid_plan_trains_full_grid(tmp_path, stable_space_file):
    text = run_plan(tmp_path, stable_space_file, "grid.tsv",
                    "--planner", "baseline", "--budget-models", "16",
                    "--max-iters", "10")
    report = parse_report(text)
    assert len(report["rows"]) == 16
    assert all(r["status"] == "finished" for r in report["rows"])
    assert report["summary"]["total_scans"] == "160"


def test_plan_determinism_byte_identical_bodies(tmp_path, space_file):
    args = ("--strategy", "random", "--budget-models", "12", "--max-iters", "20",
            "--partial-iters", "10", "--seed", "7")
    a = run_plan(tmp_path, space_file, "a.tsv", *args)
    b = run_plan(tmp_path, space_file, "b.tsv", *args)
    assert a != b or canonical_body(a) == canonical_body(b)
    assert canonical_body(a) == canonical_body(b)


def test_bandit_reduces_scans_via_cli(tmp_path, space_file):
    on = run_plan(tmp_path, space_file, "on.tsv",
                  "--budget-models", "20", "--max-iters", "50",
                  "--bandit", "on", "--seed", "3")
    off = run_plan(tmp_path, space_file, "off.tsv",
                   "--budget-models", "20", "--max-iters", "50",
                   "--bandit", "off", "--seed", "3")
    scans_on = int(parse_report(on)["summary"]["total_scans"])
    scans_off = int(parse_report(off)["summary"]["total_scans"])
    assert scans_off == 20 * 50
    assert scans_on < scans_off


def test_sched_delay_reported(tmp_path, stable_space_file):
    text = run_plan(tmp_path, stable_space_file, "delay.tsv",
                    "--budget-models", "4", "--max-iters", "10",
                    "--batch", "4", "--sched-delay", "200")
    timing = parse_report(text)["timing"]
    # 10 batch tasks x 0.2 s
    assert float(timing["sim_overhead_seconds"]) == pytest.approx(2.0)


def test_models_per_hour_matches_definition(tmp_path, stable_space_file):
    text = run_plan(tmp_path, stable_space_file, "mph.tsv",
                    "--budget-models", "4", "--max-iters", "10")
    report = parse_report(text)
    finished = int(report["summary"]["models_finished"])
    wall = float(report["timing"]["wall_seconds"]) + \
        float(report["timing"]["sim_overhead_seconds"])
    mph = float(report["timing"]["models_per_hour"])
    assert mph == pytest.approx(3600.0 * finished / wall, rel=1e-3)


def test_plan_from_csv_file(tmp_path, stable_space_file):
    rng = np.random.default_rng(5)
    lines = []
    for _ in range(60):
        row = rng.normal(size=3)
        label = int(row.sum() > 0)
        lines.append(",".join(repr(float(v)) for v in row) + f",{label}")
    csv = tmp_path / "data.csv"
    csv.write_text("\n".join(lines) + "\n")
    out = tmp_path / "csv.tsv"
    code = main(["plan", "--data", str(csv), "--space", stable_space_file,
                 "--budget-models", "4", "--max-iters", "10", "--out", str(out)])
    assert code == 0
    assert len(parse_report(out.read_text())["rows"]) == 4


def test_plan_via_paq_clause(tmp_path, stable_space_file):
    rng = np.random.default_rng(6)
    rows = ["f0,f1,tag"]
    for _ in range(50):
        a, b = (float(v) for v in rng.normal(size=2))
        rows.append(f"{a!r},{b!r},{int(a + b > 0)}")
    catalog = tmp_path / "catalog"
    catalog.mkdir()
    (catalog / "LabeledPhotos.csv").write_text("\n".join(rows) + "\n")
    out = tmp_path / "paq.tsv"
    code = main(["plan", "--paq", "PREDICT(tag) GIVEN LabeledPhotos",
                 "--catalog", str(catalog), "--space", stable_space_file,
                 "--budget-models", "3", "--max-iters", "10", "--out", str(out)])
    assert code == 0
    assert parse_report(out.read_text())["knobs"]["source"] == "paq:LabeledPhotos"


def test_missing_data_source_is_an_error(tmp_path, space_file, capsys):
    code = main(["plan", "--space", space_file])
    assert code == 1
    assert "data source" in capsys.readouterr().err


def test_unreadable_file_is_an_error(tmp_path, space_file, capsys):
    code = main(["plan", "--data", str(tmp_path / "absent.csv"),
                 "--space", space_file])
    assert code == 1


def test_bench_batching_report(tmp_path):
    out = tmp_path / "bench.tsv"
    code = main(["bench-batching", "--synth", "2000,50,0.1",
                 "--batches", "1,2,5", "--iters", "5", "--out", str(out)])
    assert code == 0
    report = parse_report(out.read_text())
    assert len(report["rows"]) == 6  # 3 batch sizes x 2 kernels
    for row in report["rows"]:
        if row["batch_size"] == "1":
            assert float(row["speedup_vs_batch_1"]) == pytest.approx(1.0)
    kernels = {r["kernel"] for r in report["rows"]}
    assert kernels == {"naive", "matrix"}


def test_compare_search_sweep(tmp_path, stable_space_file):
    out = tmp_path / "cmp.tsv"
    code = main(["compare-search", "--space", stable_space_file,
                 "--synth", "300,5,0.1", "--strategies", "grid,random,nelder-mead",
                 "--budgets", "4,9", "--seeds", "2", "--max-iters", "10",
                 "--out", str(out)])
    assert code == 0
    report = parse_report(out.read_text())
    ok_rows = [r for r in report["rows"] if r["status"] == "ok"]
    assert len(ok_rows) == 3 * 2 * 2
    assert "median_random_9" in report["summary"]


def test_compare_search_reports_unsupported_cells_without_aborting(tmp_path):
    space = tmp_path / "cat.yaml"
    space.write_text("""
family:
  name: family
  choices: [logistic, linear_svm]
params:
  - {name: lr, kind: continuous, bounds: [1.0e-5, 1.0e-3], scale: log10}
""")
    out = tmp_path / "cmp.tsv"
    code = main(["compare-search", "--space", str(space),
                 "--synth", "300,5,0.1", "--strategies", "random,powell",
                 "--budgets", "4", "--seeds", "1", "--max-iters", "10",
                 "--out", str(out)])
    assert code == 0
    rows = parse_report(out.read_text())["rows"]
    by_strategy = {r["strategy"]: r for r in rows}
    assert by_strategy["random"]["status"] == "ok"
    assert by_strategy["powell"]["status"].startswith("error:")


def test_tpe_settings_overridable_from_space_file(tmp_path):
    space = tmp_path / "tuned.yaml"
    space.write_text(STABLE_SPACE_DOC + "\ntpe: {n_startup: 2, gamma: 0.4}\n")
    out = tmp_path / "tpe.tsv"
    code = main(["plan", "--synth", "400,6,0.1", "--space", str(space),
                 "--strategy", "tpe", "--budget-models", "6",
                 "--max-iters", "10", "--out", str(out)])
    assert code == 0
    assert len(parse_report(out.read_text())["rows"]) == 6


def test_report_knobs_echoed(tmp_path, stable_space_file):
    text = run_plan(tmp_path, stable_space_file, "knobs.tsv",
                    "--budget-models", "2", "--max-iters", "10",
                    "--epsilon", "0.75", "--batch", "5")
    knobs = parse_report(text)["knobs"]
    assert knobs["epsilon"] == "0.75"
    assert knobs["batch"] == "5"
    assert knobs["strategy"] == "random"
