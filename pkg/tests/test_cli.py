import csv
import json

import pytest

from knotrate.cli import main

SMALL_ARCH = '{"input_dim": 8, "hidden_width": 8, "dilations": [1, 2]}'
FAST_TRAIN = '{"epochs": 3}'
SMALL_SYNTH = '{"n_videos": 6, "chunks_min": 31, "chunks_max": 34, "dim": 8, "noise_sigma": 0.2}'


@pytest.fixture()
def corpus(tmp_path):
    out = tmp_path / "data"
    rc = main(["synth", "--config", SMALL_SYNTH, "--seed", "5", "--out", str(out)])
    assert rc == 0
    return out


class TestSynth:
    def test_writes_manifest(self, corpus):
        manifest = json.loads((corpus / "manifest.json").read_text())
        assert len(manifest["videos"]) == 6

    def test_bad_config_is_validation_error(self, tmp_path):
        rc = main(
            ["synth", "--config", '{"n_videos": 0, "chunks_min": 5}', "--seed", "1", "--out", str(tmp_path / "x")]
        )
        assert rc == 1


class TestTrainPredictEval:
    def test_full_flow(self, corpus, tmp_path):
        ckpt = tmp_path / "ckpt"
        rc = main(
            [
                "train", "--manifest", str(corpus / "manifest.json"),
                "--arch", SMALL_ARCH, "--train", FAST_TRAIN,
                "--seeds", "0,1", "--out", str(ckpt),
            ]
        )
        assert rc == 0
        assert (ckpt / "index.json").exists()

        pred_dir = tmp_path / "preds"
        pred_dir.mkdir()
        manifest = json.loads((corpus / "manifest.json").read_text())
        for video in manifest["videos"]:
            rc = main(
                [
                    "predict", "--ckpt", str(ckpt),
                    "--features", str(corpus / video["features"]),
                    "--out", str(pred_dir / f"{video['id']}.csv"),
                ]
            )
            assert rc == 0

        first = pred_dir / f"{manifest['videos'][0]['id']}.csv"
        with open(first) as f:
            rows = list(csv.reader(f))
        assert rows[0][:3] == ["center_frame", "action", "level"]
        assert len(rows[0]) == 3 + 12

        out = tmp_path / "eval.json"
        rc = main(
            [
                "eval", "--manifest", str(corpus / "manifest.json"),
                "--pred-dir", str(pred_dir), "--out", str(out),
            ]
        )
        assert rc == 0
        report = json.loads(out.read_text())
        assert len(report["per_video"]) == 6
        assert "aggregate" in report

    def test_missing_manifest_is_io_error(self, tmp_path):
        rc = main(
            [
                "train", "--manifest", str(tmp_path / "nope.json"),
                "--arch", SMALL_ARCH, "--train", FAST_TRAIN,
                "--seeds", "0", "--out", str(tmp_path / "c"),
            ]
        )
        assert rc == 2


class TestCvAndReport:
    def test_cv_then_report(self, corpus, tmp_path, capsys):
        out = tmp_path / "cv.json"
        args = [
            "cv", "--manifest", str(corpus / "manifest.json"),
            "--arch", SMALL_ARCH, "--train", FAST_TRAIN,
            "--seeds", "0", "--split-seed", "42", "--k", "3",
            "--out", str(out),
        ]
        assert main(args) == 0
        report = json.loads(out.read_text())
        assert report["leakage_audit_passed"]

        assert main(["report", "--cv", str(out)]) == 0
        rendered = capsys.readouterr().out
        assert "Action recognition" in rendered

    def test_cv_determinism_byte_identical(self, corpus, tmp_path):
        outs = []
        for name in ("a.json", "b.json"):
            out = tmp_path / name
            args = [
                "cv", "--manifest", str(corpus / "manifest.json"),
                "--arch", SMALL_ARCH, "--train", FAST_TRAIN,
                "--seeds", "0,1", "--split-seed", "42", "--k", "3",
                "--out", str(out),
            ]
            assert main(args) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_duplicate_seeds_rejected(self, corpus, tmp_path):
        rc = main(
            [
                "cv", "--manifest", str(corpus / "manifest.json"),
                "--arch", SMALL_ARCH, "--train", FAST_TRAIN,
                "--seeds", "1,1", "--split-seed", "42", "--k", "3",
                "--out", str(tmp_path / "cv.json"),
            ]
        )
        assert rc == 1


class TestGradcheck:
    def test_default_small_arch_passes(self, capsys):
        assert main(["gradcheck", "--seed", "0"]) == 0
        assert "discrepancy" in capsys.readouterr().out

    def test_explicit_arch(self):
        assert main(["gradcheck", "--arch", SMALL_ARCH, "--seed", "3"]) == 0
