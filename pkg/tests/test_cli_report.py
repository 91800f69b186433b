"""Tests for the manifest loader, the pipeline, the report writer and the CLI."""

import importlib.util
import json
import os

import numpy as np
import pytest
import yaml

import pipeline
from modules.errors import ExpressionSyntaxError, ManifestError
from modules.manifest_loader import TASKS, load_manifest, load_settings
from modules.report_writer import TIMESTAMP_FIELD, render_report, render_summary, save_report, to_plain

ROOT = os.path.join(os.path.dirname(__file__), "..")


@pytest.fixture(scope="module")
def cli():
    spec = importlib.util.spec_from_file_location("einstein_embed_cli", os.path.join(ROOT, "einstein-embed.py"))
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def write_manifest(directory, data, name="manifest.yaml"):
    path = directory / name
    if name.endswith(".json"):
        path.write_text(json.dumps(data), encoding="utf-8")
    else:
        path.write_text(yaml.safe_dump(data, allow_unicode=True), encoding="utf-8")
    return str(path)


FLAT = {
    "version": "1",
    "manifold": "flat_patch2",
    "lambda": 0.0,
    "order": 4,
    "tasks": ["ricci", "embed-local", "homotopy", "verify"],
}

SPHERE_CHARTS = {
    "name": "sphere",
    "dim": 2,
    "charts": [{"id": "eq", "center": [1.5707963267948966, 0.0], "half_widths": [0.8, 0.8]}],
    "bounds": [[1.2, 1.9], [-0.4, 0.4]],
    "metric": [["1", "0"], [None, "sin(x1)^2"]],
}


class TestManifestLoader:
    def test_defaults_and_task_order(self, tmp_path):
        manifest = load_manifest(write_manifest(tmp_path, {"version": "1", "manifold": "circle"}))
        assert manifest.tasks == TASKS
        assert manifest.lam == 0.0 and manifest.epsilon == 1 and manifest.order == 4
        assert manifest.homotopy_id == "S1"
        assert manifest.cover.N is None

    def test_json_and_overrides(self, tmp_path):
        path = write_manifest(tmp_path, dict(FLAT, tasks=["verify", "ricci"]), "flat.json")
        manifest = load_manifest(path, order_override=6, lambda_override=-0.25)
        assert manifest.order == 6 and manifest.lam == -0.25
        assert manifest.tasks == ("ricci", "verify")
        assert load_manifest(path, tasks_override=["glue"]).tasks == ("glue",)

    def test_user_charts_and_seed_chart(self, tmp_path):
        manifest = load_manifest(
            write_manifest(tmp_path, {"version": "1", "manifold": SPHERE_CHARTS, "seed_chart": "eq"})
        )
        assert manifest.manifold.name == "sphere"
        assert manifest.seed_center == pytest.approx([1.5707963267948966, 0.0])

    def test_template_is_valid(self):
        manifest = load_manifest(os.path.join(ROOT, "templates", "manifest_template.yaml"))
        assert manifest.manifold.charts[manifest.seed_chart].chart_id == "equator"
        assert manifest.homotopy.entries[0]["id"] == "Sigma2"

    def test_missing_seed_chart(self, tmp_path):
        with pytest.raises(ManifestError):
            load_manifest(write_manifest(tmp_path, {"version": "1", "manifold": "circle", "seed_chart": "nope"}))

    @pytest.mark.parametrize(
        "data",
        [
            {"version": "1", "manifold": "circle", "order": 1},
            {"version": "2", "manifold": "circle"},
            {"version": "1", "manifold": "circle", "tasks": ["plot"]},
            {"version": "1", "manifold": "circle", "epsilon": 0},
            {"version": "1", "manifold": "circle", "cover": {"N": 1}},
            {"manifold": "circle"},
        ],
    )
    def test_schema_violations(self, tmp_path, data):
        with pytest.raises(ManifestError) as info:
            load_manifest(write_manifest(tmp_path, data))
        assert info.value.details["violations"]

    def test_unknown_catalog_manifold(self, tmp_path):
        with pytest.raises(ManifestError):
            load_manifest(write_manifest(tmp_path, {"version": "1", "manifold": "klein_bottle"}))

    def test_corrupted_expression_reports_position(self, tmp_path):
        charts = dict(SPHERE_CHARTS, metric=[["1", "0"], [None, "sin(x1^2"]])
        with pytest.raises(ExpressionSyntaxError) as info:
            load_manifest(write_manifest(tmp_path, {"version": "1", "manifold": charts}))
        assert info.value.offset >= 1

    def test_bad_group_descriptor(self, tmp_path):
        data = {"version": "1", "manifold": "circle", "homotopy": {"entries": [{"id": "P", "groups": ["Z +"]}]}}
        with pytest.raises(ManifestError):
            load_manifest(write_manifest(tmp_path, data))

    def test_unreadable_manifest(self, tmp_path):
        with pytest.raises(ManifestError):
            load_manifest(str(tmp_path / "missing.yaml"))
        bad = tmp_path / "bad.toml"
        bad.write_text("version = 1", encoding="utf-8")
        with pytest.raises(ManifestError):
            load_manifest(str(bad))

    def test_settings_priority(self, monkeypatch):
        monkeypatch.setenv("EINSTEIN_EMBED_OUTPUT_DIR", "from_env")
        monkeypatch.setenv("EINSTEIN_EMBED_LOG_LEVEL", "warning")
        assert load_settings().output_dir == "from_env"
        assert load_settings().log_level == "WARNING"
        assert load_settings(output_override="from_cli").output_dir == "from_cli"
        assert load_settings(verbose=True).log_level == "DEBUG"


class TestPipeline:
    def test_flat_seed_all_pass(self, tmp_path):
        report = pipeline.main(load_manifest(write_manifest(tmp_path, FLAT)))
        assert report["errors"] == []
        assert report["processed"] == ["ricci", "embed-local", "homotopy", "verify"]
        assert report["passed"]
        names = {v["name"] for v in report["verdicts"]}
        assert {"ricci.oracle_relative_error", "embed_local.residual", "verify.residual"} <= names
        assert all("tolerance" in v for v in report["verdicts"])

    def test_sphere_ricci_matches_oracle(self, tmp_path):
        data = {"version": "1", "manifold": SPHERE_CHARTS, "lambda": 1.0, "order": 5, "tasks": ["ricci", "embed-local"]}
        report = pipeline.main(load_manifest(write_manifest(tmp_path, data)))
        section = report["tasks"]["ricci"]
        np.testing.assert_allclose(section["ricci"], np.eye(2), atol=1e-10)
        assert section["scalar_curvature"] == pytest.approx(2.0)
        assert report["passed"]

    def test_dimension_two_lambda_recorded(self, tmp_path):
        data = {"version": "1", "manifold": "flat_patch1", "lambda": 0.5, "tasks": ["embed-local"]}
        report = pipeline.main(load_manifest(write_manifest(tmp_path, data)))
        assert not report["passed"]
        assert report["errors"][0]["type"] == "DimensionTwoWithNonzeroLambda"
        assert report["errors"][0]["task"] == "embed-local"

    def test_homotopy_section(self, tmp_path):
        data = {
            "version": "1",
            "manifold": "sphere_patch",
            "fiber": "circle",
            "tasks": ["homotopy"],
            "homotopy": {"products": ["S2 x S1"], "entries": [{"id": "Sigma2", "groups": ["pi1(Sigma2)", "0"]}]},
        }
        report = pipeline.main(load_manifest(write_manifest(tmp_path, data)))
        section = report["tasks"]["homotopy"]
        assert section["manifold"] == "S2" and section["fiber"] == "circle"
        assert [row["product"]["text"] for row in section["levels"]] == ["Z", "Z", "Z", "Z_2"]
        assert report["passed"]

    def test_circle_glue_report(self, tmp_path):
        data = {"version": "1", "manifold": "circle", "tasks": ["glue", "verify"]}
        report = pipeline.main(load_manifest(write_manifest(tmp_path, data)), csv_dir=str(tmp_path / "csv"))
        section = report["tasks"]["glue"]
        assert section["M"] == 7 and section["N"] == 8
        assert section["solution"]["residual"] <= 1e-8
        assert len(section["csv"]) == 3
        assert report["passed"]

    def test_deterministic_apart_from_timestamp(self, tmp_path):
        manifest = load_manifest(write_manifest(tmp_path, FLAT))
        first, second = pipeline.main(manifest), pipeline.main(manifest)
        first[TIMESTAMP_FIELD] = second[TIMESTAMP_FIELD] = ""
        assert render_report(first) == render_report(second)


class TestReportWriter:
    def test_to_plain(self):
        data = to_plain({"a": np.float64(1.5), "b": np.arange(3), 2: (np.int64(4), np.bool_(True)), "c": float("inf")})
        assert data == {"a": 1.5, "b": [0, 1, 2], "2": [4, True], "c": "inf"}

    def test_save_without_timestamp(self, tmp_path):
        report = {
            "report_version": "1.0",
            "verdicts": [{"name": "x", "value": 2e-3, "tolerance": 1e-3, "passed": False}],
            "errors": [],
            "passed": False,
        }
        paths = save_report(report, str(tmp_path), use_timestamp=False)
        assert paths.output_dir == str(tmp_path)
        assert json.loads(open(paths.report, encoding="utf-8").read())["passed"] is False
        assert "[FAIL] x" in render_summary(report)

    def test_save_with_timestamp(self, tmp_path):
        paths = save_report({"verdicts": [], "errors": [], "passed": True}, str(tmp_path))
        assert os.path.dirname(paths.report) != str(tmp_path)
        assert os.path.exists(paths.summary)


class TestCli:
    def test_flat_run_exit_zero(self, cli, tmp_path):
        path = write_manifest(tmp_path, FLAT)
        out = tmp_path / "out"
        assert cli.main(["run", "--manifest", path, "--out", str(out), "--no-timestamp"]) == 0
        report = json.loads((out / "report.json").read_text(encoding="utf-8"))
        assert report["passed"]

    def test_single_verb(self, cli, tmp_path):
        path = write_manifest(tmp_path, FLAT)
        out = tmp_path / "out"
        assert cli.main(["ricci", "--manifest", path, "--out", str(out), "--no-timestamp", "--order", "3"]) == 0
        report = json.loads((out / "report.json").read_text(encoding="utf-8"))
        assert list(report["tasks"]) == ["ricci"]
        assert report["manifest"]["order"] == 3

    def test_corrupted_expression_exit_two(self, cli, tmp_path, capsys):
        charts = dict(SPHERE_CHARTS, metric=[["1", "0"], [None, "sin(x1)^^2"]])
        path = write_manifest(tmp_path, {"version": "1", "manifold": charts})
        assert cli.main(["run", "--manifest", path, "--out", str(tmp_path)]) == 2
        assert "文字目" in capsys.readouterr().err

    def test_schema_error_exit_two(self, cli, tmp_path):
        path = write_manifest(tmp_path, {"version": "1", "manifold": "circle", "order": 1})
        assert cli.main(["run", "--manifest", path, "--out", str(tmp_path)]) == 2

    def test_single_coordinate_system_exit_two(self, cli, tmp_path, capsys):
        path = write_manifest(tmp_path, {"version": "1", "manifold": "circle", "cover": {"N": 1}})
        assert cli.main(["glue", "--manifest", path, "--out", str(tmp_path)]) == 2
        assert "cover/N" in capsys.readouterr().err

    def test_failure_exit_one(self, cli, tmp_path):
        path = write_manifest(tmp_path, {"version": "1", "manifold": "flat_patch1"})
        out = tmp_path / "out"
        assert cli.main(["embed-local", "--manifest", path, "--lambda", "0.5", "--out", str(out), "--no-timestamp"]) == 1
