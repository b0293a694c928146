import json
import random
import subprocess
import sys
from pathlib import Path

import pytest

from mlpc.cli import main
from test_composer import make_pool_manifest

FIXTURE = Path(__file__).parent / "data" / "fixture_small"


def run(args, capsys):
    code = main(args)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def stderr_payload(err: str) -> dict:
    return json.loads(err.strip().splitlines()[-1])


class TestEvaluate:
    def evaluate_args(self, out_path, preds="predictions_alpha.jsonl"):
        return ["evaluate",
                "--predictions", str(FIXTURE / preds),
                "--annotations", str(FIXTURE / "annotations.jsonl"),
                "--gt-single", str(FIXTURE / "gt_single.jsonl"),
                "--mode", "jaccard", "--out", str(out_path)]

    def test_matches_golden_fixture_metrics(self, tmp_path, capsys):
        out = tmp_path / "r.json"
        code, _, _ = run(self.evaluate_args(out), capsys)
        assert code == 0
        produced = json.loads(out.read_text())
        expected = json.loads((FIXTURE / "expected_report_alpha.json").read_text())
        provenance = produced.pop("provenance")
        assert produced == expected
        assert provenance["command"] == "evaluate"
        assert all(digest.startswith("sha256:") for digest in provenance["inputs"].values())

    def test_reruns_identical_bytes_including_provenance(self, tmp_path, capsys):
        out1, out2 = tmp_path / "r1.json", tmp_path / "r2.json"
        assert run(self.evaluate_args(out1), capsys)[0] == 0
        assert run(self.evaluate_args(out2), capsys)[0] == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_missing_file_exit_3_names_path(self, tmp_path, capsys):
        args = self.evaluate_args(tmp_path / "r.json", preds="nope.jsonl")
        code, _, err = run(args, capsys)
        assert code == 3
        assert "nope.jsonl" in stderr_payload(err)["message"]

    def test_insufficient_depth_exit_4_names_image(self, tmp_path, capsys):
        preds = tmp_path / "p.jsonl"
        preds.write_text(
            '{"meta":{"model_id":"m","dataset_id":"d","num_classes":10,"depth":2}}\n'
            '{"id":"img_deep","classes":[1,2],"scores":[0.9,0.8]}\n')
        annotations = tmp_path / "a.jsonl"
        annotations.write_text(
            '{"meta":{"dataset_id":"d","num_classes":10}}\n'
            '{"id":"img_deep","labels":[1,2,3,4]}\n')
        code, _, err = run(["evaluate", "--predictions", str(preds),
                            "--annotations", str(annotations),
                            "--out", str(tmp_path / "r.json")], capsys)
        assert code == 4
        message = stderr_payload(err)["message"]
        assert "img_deep" in message and "4" in message

    def test_multiple_predictions_write_directory(self, tmp_path, capsys):
        out = tmp_path / "reports"
        args = ["evaluate",
                "--predictions", str(FIXTURE / "predictions_alpha.jsonl"),
                "--predictions", str(FIXTURE / "predictions_beta.jsonl"),
                "--annotations", str(FIXTURE / "annotations.jsonl"),
                "--mode", "jaccard", "--out", str(out)]
        code, _, _ = run(args, capsys)
        assert code == 0
        assert sorted(p.name for p in out.glob("*.json")) == ["alpha.json", "beta.json"]


class TestCompose:
    def test_invalid_config_exit_2(self, tmp_path, capsys):
        rng = random.Random(0)
        manifest = make_pool_manifest(tmp_path, rng, 4, num_classes=5)
        code, _, err = run(["compose", "--patches", str(manifest),
                            "--out", str(tmp_path / "out"),
                            "--configs", "9:256", "--seed", "1"], capsys)
        assert code == 2
        assert "does not fit" in stderr_payload(err)["message"]

    def test_two_seeds_two_manifest_sets(self, tmp_path, capsys):
        rng = random.Random(0)
        manifest = make_pool_manifest(tmp_path, rng, 12, num_classes=5)
        out = tmp_path / "out"
        code, _, _ = run(["compose", "--patches", str(manifest), "--out", str(out),
                          "--configs", "2:256", "--seed", "1", "--seed", "2",
                          "--num-classes", "5", "--manifest-only"], capsys)
        assert code == 0
        m1 = (out / "patchml-seed1" / "manifest.jsonl").read_text()
        m2 = (out / "patchml-seed2" / "manifest.jsonl").read_text()
        assert m1 != m2
        assert (out / "patchml-seed1" / "annotations.jsonl").exists()

    def test_rerun_byte_identical(self, tmp_path, capsys):
        rng = random.Random(0)
        manifest = make_pool_manifest(tmp_path, rng, 10, num_classes=5)
        outs = []
        for name in ("one", "two"):
            out = tmp_path / name
            code, _, _ = run(["compose", "--patches", str(manifest),
                              "--out", str(out), "--configs", "2:256,3:170",
                              "--seed", "7", "--num-classes", "5",
                              "--manifest-only"], capsys)
            assert code == 0
            outs.append(out / "patchml-seed7")
        for name in ("manifest.jsonl", "annotations.jsonl", "provenance.json"):
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()


class TestConvert:
    def test_round_trip_byte_identical_after_canonicalization(self, tmp_path, capsys):
        canonical = tmp_path / "canonical.jsonl"
        code, _, _ = run(["convert", "--in", str(FIXTURE / "predictions_alpha.jsonl"),
                          "--out", str(canonical), "--to", "jsonl"], capsys)
        assert code == 0
        binary = tmp_path / "p.mlpc"
        assert run(["convert", "--in", str(canonical), "--out", str(binary)],
                   capsys)[0] == 0
        back = tmp_path / "back.jsonl"
        assert run(["convert", "--in", str(binary), "--out", str(back)],
                   capsys)[0] == 0
        assert back.read_bytes() == canonical.read_bytes()
        assert Path(str(binary) + ".provenance.json").exists()


def _make_report_dir(tmp_path, capsys, mode="jaccard"):
    out = tmp_path / "reports_a"
    args = ["evaluate",
            "--predictions", str(FIXTURE / "predictions_alpha.jsonl"),
            "--predictions", str(FIXTURE / "predictions_beta.jsonl"),
            "--annotations", str(FIXTURE / "annotations.jsonl"),
            "--gt-single", str(FIXTURE / "gt_single.jsonl"),
            "--mode", mode, "--out", str(out)]
    assert main(args) == 0
    capsys.readouterr()
    return out


class TestAnalysisCommands:
    def test_compare_writes_gap_json(self, tmp_path, capsys):
        reports = _make_report_dir(tmp_path, capsys)
        out = tmp_path / "gaps.json"
        code, _, _ = run(["compare", "--a", str(reports), "--b", str(reports),
                          "--metric", "top1", "--out", str(out),
                          "--svg", str(tmp_path / "gaps.svg")], capsys)
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["summary"]["count"] == 2
        assert all(r["difference"] == [0, 1] for r in doc["records"])
        assert (tmp_path / "gaps.svg.provenance.json").exists()

    def test_rank_csv_shape(self, tmp_path, capsys):
        reports = _make_report_dir(tmp_path, capsys)
        out = tmp_path / "rank.csv"
        code, _, _ = run(["rank", "--reports", str(reports), "--primary", "asma",
                          "--baseline", "top1", "--out", str(out)], capsys)
        assert code == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0].startswith("model_id,")
        assert len(lines) == 3
        assert Path(str(out) + ".provenance.json").exists()

    def test_rank_json_with_embedded_provenance(self, tmp_path, capsys):
        reports = _make_report_dir(tmp_path, capsys)
        out = tmp_path / "rank.json"
        code, _, _ = run(["rank", "--reports", str(reports), "--primary", "asma",
                          "--baseline", "top1", "--out", str(out)], capsys)
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["primary_metric"] == "asma"
        assert len(doc["rows"]) == 2
        assert sum(r["delta_rank"] for r in doc["rows"]) == 0
        assert doc["provenance"]["command"] == "rank"

    def test_subgroups_csv(self, tmp_path, capsys):
        reports = _make_report_dir(tmp_path, capsys)
        out = tmp_path / "subgroups.csv"
        code, _, _ = run(["subgroups", "--reports", str(reports),
                          "--min-label-count", "1", "--max-label-count", "5",
                          "--out", str(out)], capsys)
        assert code == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "model_id,dataset_id,label_count,accuracy,mode"
        assert len(lines) > 1


class TestMultiseedFlag:
    def test_rank_multiseed_aggregates_per_model(self, tmp_path, capsys):
        source = _make_report_dir(tmp_path, capsys)
        seeds_dir = tmp_path / "seed_reports"
        seeds_dir.mkdir()
        for path in source.glob("*.json"):
            doc = json.loads(path.read_text())
            doc.pop("provenance", None)
            for seed in (1, 2):
                variant = dict(doc, dataset_id=f"{doc['dataset_id']}-s{seed}")
                (seeds_dir / f"{doc['model_id']}_s{seed}.json").write_text(
                    json.dumps(variant))
        out = tmp_path / "rank.csv"
        code, _, err = run(["rank", "--reports", str(seeds_dir), "--primary", "asma",
                            "--baseline", "top1", "--out", str(out)], capsys)
        assert code == 3  # duplicate models without aggregation is a data error
        code, _, _ = run(["rank", "--reports", str(seeds_dir), "--primary", "asma",
                          "--baseline", "top1", "--multiseed",
                          "--out", str(out)], capsys)
        assert code == 0
        assert len(out.read_text().strip().splitlines()) == 3


class TestUsageErrors:
    def test_unknown_flag_exit_2(self):
        with pytest.raises(SystemExit) as err:
            main(["evaluate", "--wat", "x"])
        assert err.value.code == 2

    def test_console_entry_point(self):
        result = subprocess.run([sys.executable, "-m", "mlpc.cli", "--version"],
                                capture_output=True, text=True)
        assert result.returncode == 0
        assert "mlpc" in result.stdout
