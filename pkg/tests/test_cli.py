import json
import subprocess
import sys

import pytest

from neuromark.cli import EXIT_DATA, EXIT_FILE, EXIT_OK, EXIT_USAGE, main
from neuromark.evaluate import report_from_json
from neuromark.ingest import load_bundle


@pytest.fixture(scope="module")
def small_bundle(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "bundle.nmk"
    code = main(["synth", "--subjects", "1", "--seed", "3",
                 "--separability", "1.0", "--out", str(path)])
    assert code == EXIT_OK
    return path


class TestSynth:
    def test_writes_expected_shape(self, small_bundle):
        ds = load_bundle(small_bundle)
        assert len(ds) == 80
        assert ds.info["separability"] == "1.0"

    def test_same_flags_same_bytes(self, tmp_path, small_bundle):
        other = tmp_path / "again.nmk"
        assert main(["synth", "--subjects", "1", "--seed", "3",
                     "--separability", "1.0", "--out", str(other)]) == EXIT_OK
        assert other.read_bytes() == small_bundle.read_bytes()

    def test_summary_printed(self, tmp_path, capsys):
        main(["synth", "--subjects", "1", "--seed", "1", "--out",
              str(tmp_path / "b.nmk")])
        out = capsys.readouterr().out
        assert "recordings: 80" in out
        assert "per ad type" in out


class TestIngest:
    def test_missing_manifest_exits_2(self, tmp_path, capsys):
        code = main(["ingest", "--manifest", str(tmp_path / "nope.json"),
                     "--out", str(tmp_path / "o.nmk")])
        assert code == EXIT_FILE
        assert "nope.json" in capsys.readouterr().err

    def test_malformed_row_exits_2_with_row(self, tmp_path, capsys):
        rec = tmp_path / "r.csv"
        rec.write_text("Time,Electrode,Attention,Meditation\n0.0,1.0,50,50\n0.1,bad,50,50\n")
        labels = tmp_path / "l.csv"
        labels.write_text("\n".join(["B"] * 80))
        entries = [{"recording": "r.csv", "subject_id": "S01", "gender": "female",
                    "product": "Sneakers", "brand": "B1", "ad_type": 1}]
        manifest = tmp_path / "m.json"
        manifest.write_text(json.dumps({"labels": {"S01": "l.csv"}, "entries": entries}))
        code = main(["ingest", "--manifest", str(manifest), "--out",
                     str(tmp_path / "o.nmk")])
        assert code == EXIT_FILE
        assert "row 3" in capsys.readouterr().err

    def test_valid_manifest_round_trips(self, tmp_path):
        rows = "\n".join(f"{i/512.0},{0.5*i},50,50" for i in range(8))
        entries = []
        for i, (product, brand, ad) in enumerate(
                [("Sneakers", "B1", 1), ("Sneakers", "B1", 2)]):
            name = f"r{i}.csv"
            (tmp_path / name).write_text(
                "Time,Electrode,Attention,Meditation\n" + rows + "\n")
            entries.append({"recording": name, "subject_id": "S01",
                            "gender": "female", "product": product,
                            "brand": brand, "ad_type": ad})
        # labels: 80 per subject even though only 2 recordings are listed
        (tmp_path / "l.csv").write_text("\n".join(["B"] * 80))
        manifest = tmp_path / "m.json"
        manifest.write_text(json.dumps({"labels": {"S01": "l.csv"},
                                        "entries": entries}))
        out = tmp_path / "o.nmk"
        assert main(["ingest", "--manifest", str(manifest), "--out", str(out)]) == EXIT_OK
        assert len(load_bundle(out)) == 2


class TestRun:
    def test_unknown_protocol_exits_64(self, small_bundle, tmp_path, capsys):
        code = main(["run", "--bundle", str(small_bundle), "--protocol", "magic",
                     "--models", "nb", "--report", str(tmp_path / "r.json")])
        assert code == EXIT_USAGE

    def test_unknown_model_exits_64(self, small_bundle, tmp_path):
        code = main(["run", "--bundle", str(small_bundle), "--protocol", "sd",
                     "--models", "nb,hal9000", "--report", str(tmp_path / "r.json")])
        assert code == EXIT_USAGE

    def test_unfit_bundle_exits_65(self, small_bundle, tmp_path):
        # one subject has 80 recordings; ad pools of 20 cannot give 60 test rows
        code = main(["run", "--bundle", str(small_bundle), "--protocol", "ad",
                     "--models", "nb", "--report", str(tmp_path / "r.json")])
        assert code == EXIT_DATA

    def test_missing_bundle_exits_65(self, tmp_path):
        code = main(["run", "--bundle", str(tmp_path / "none.nmk"), "--protocol",
                     "sd", "--models", "nb", "--report", str(tmp_path / "r.json")])
        assert code == EXIT_DATA

    def test_run_and_report_round_trip(self, small_bundle, tmp_path, capsys):
        report_path = tmp_path / "report.json"
        code = main(["run", "--bundle", str(small_bundle), "--protocol", "sd",
                     "--models", "nb", "--trials", "1", "--seed", "9",
                     "--report", str(report_path)])
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert "Acc." in out
        report = report_from_json(report_path.read_text())
        assert report.protocol == "subject_dependent"
        assert report.models == ("nb",)

        assert main(["report", "--in", str(report_path), "--format", "csv"]) == EXIT_OK
        csv_out = capsys.readouterr().out
        assert csv_out.startswith("# subject_dependent")

        assert main(["report", "--in", str(report_path), "--format", "yaml"]) == EXIT_USAGE

    def test_identical_invocations_identical_reports(self, small_bundle, tmp_path):
        args = ["run", "--bundle", str(small_bundle), "--protocol", "sd",
                "--models", "nb", "--trials", "1", "--seed", "4"]
        r1, r2 = tmp_path / "r1.json", tmp_path / "r2.json"
        assert main(args + ["--report", str(r1)]) == EXIT_OK
        assert main(args + ["--report", str(r2)]) == EXIT_OK
        assert r1.read_bytes() == r2.read_bytes()

    def test_grid_override_flags(self, small_bundle, tmp_path):
        code = main(["run", "--bundle", str(small_bundle), "--protocol", "sd",
                     "--models", "knn", "--trials", "1", "--seed", "2",
                     "--knn-k", "1,3", "--report", str(tmp_path / "r.json")])
        assert code == EXIT_OK


class TestEnvOverrides:
    def test_env_default_used(self, small_bundle, tmp_path, monkeypatch):
        monkeypatch.setenv("NMK_TRIALS", "1")
        report_path = tmp_path / "r.json"
        code = main(["run", "--bundle", str(small_bundle), "--protocol", "sd",
                     "--models", "nb", "--seed", "1", "--report", str(report_path)])
        assert code == EXIT_OK
        assert report_from_json(report_path.read_text()).trials == 1


def test_console_entry_point_runs():
    proc = subprocess.run([sys.executable, "-m", "neuromark.cli", "--help"],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "synth" in proc.stdout and "ingest" in proc.stdout
