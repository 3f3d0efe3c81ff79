import json

import numpy as np
import pytest
from click.testing import CliRunner

import office
from roomkit.cli import main
from roomkit.geometry import Mask
from roomkit.scenevqa import QARecord


@pytest.fixture
def runner():
    return CliRunner()


def write(path, text):
    path.write_text(text)
    return str(path)


class TestParseValidate:
    def test_valid_document(self, runner, toy_doc, tmp_path):
        path = write(tmp_path / "g.json", toy_doc)
        result = runner.invoke(main, ["parse-validate", path])
        assert result.exit_code == 0
        assert json.loads(result.output)["ok"] is True

    def test_invalid_document_exit_2(self, runner, tmp_path):
        path = write(tmp_path / "g.json", '{"floor": {"on_top": [{"x": {}}]}}')
        result = runner.invoke(main, ["parse-validate", path])
        assert result.exit_code == 2


class TestEvalGraph:
    def test_batch_report(self, runner, tmp_path, toy_doc):
        rows = [
            {"id": "a", "gt_graph": json.loads(toy_doc), "prediction": toy_doc},
            {"id": "b", "gt_graph": json.loads(toy_doc), "prediction": "nope"},
        ]
        path = write(tmp_path / "in.jsonl", "\n".join(json.dumps(r) for r in rows))
        result = runner.invoke(main, ["eval-graph", path])
        assert result.exit_code == 0
        report = json.loads(result.output)
        assert report["json_pct"] == 50.0
        assert report["n"] == 2

    def test_empty_batch_exit_2(self, runner, tmp_path):
        path = write(tmp_path / "in.jsonl", "")
        assert runner.invoke(main, ["eval-graph", path]).exit_code == 2


class TestEvalDistance:
    def test_bands_and_number_pct(self, runner, tmp_path):
        rows = [
            {"id": "a", "gt_meters": 2.0, "prediction": "2.0m"},
            {"id": "b", "gt_meters": 2.0, "prediction": "1.0m"},
            {"id": "c", "gt_meters": 2.0, "prediction": "4.5m"},
        ]
        path = write(tmp_path / "in.jsonl", "\n".join(json.dumps(r) for r in rows))
        result = runner.invoke(main, ["eval-distance", path])
        assert result.exit_code == 0
        report = json.loads(result.output)
        assert report["number_pct"] == 100.0
        assert report["bands"]["[50,200]"] == pytest.approx(2 / 3)
        assert report["bands"]["[80,120]"] == pytest.approx(1 / 3)
        assert report["error_stats"]["n"] == 3

    def test_custom_band_inclusive_edge(self, runner, tmp_path):
        rows = [
            {"id": "a", "gt_meters": 2.0, "prediction": "2.2m"},  # exactly 110%
            {"id": "b", "gt_meters": 2.0, "prediction": "2.3m"},  # just outside
        ]
        path = write(tmp_path / "in.jsonl", "\n".join(json.dumps(r) for r in rows))
        result = runner.invoke(main, ["eval-distance", path, "--band", "90:110"])
        report = json.loads(result.output)
        assert report["bands"] == {"[90,110]": 0.5}


class TestPerceive:
    def test_mock_end_to_end(self, runner, tmp_path):
        script_path = write(tmp_path / "script.json", office.office_script().to_json())
        image_path = write(
            tmp_path / "image.json",
            json.dumps({"width": 100, "height": 100, "ref": office.IMAGE}),
        )
        out = tmp_path / "result.json"
        result = runner.invoke(
            main,
            ["perceive", "--image", image_path, "--mock", script_path, "-o", str(out)],
        )
        assert result.exit_code == 0, result.output
        doc = json.loads(out.read_text())
        assert len(doc["objects"]) == 7
        assert doc["counts_per_round"] == {"0": 4, "1": 3}

    def test_requires_backend_or_mock(self, runner, tmp_path):
        image_path = write(tmp_path / "image.json", json.dumps({"width": 10, "height": 10}))
        result = runner.invoke(main, ["perceive", "--image", image_path])
        assert result.exit_code != 0

    def test_png_image_input(self, runner, tmp_path):
        from PIL import Image

        image_path = tmp_path / "scene.png"
        Image.new("RGB", (100, 100), (120, 110, 100)).save(image_path)
        script_path = write(tmp_path / "script.json", office.office_script().to_json())
        result = runner.invoke(
            main, ["perceive", "--image", str(image_path), "--mock", script_path]
        )
        assert result.exit_code == 0, result.output


class TestDistances:
    def test_plane_fixture(self, runner, tmp_path):
        values = np.full((100, 100), 2000, dtype=np.uint16)  # 2.0 m at scale 0.001
        header = b"P5\n100 100\n65535\n"
        depth_path = tmp_path / "depth.pgm"
        depth_path.write_bytes(header + values.astype(">u2").tobytes())
        masks = {
            "left": Mask.from_pixels(100, 100, [(25, 50)]).to_rle(),
            "right": Mask.from_pixels(100, 100, [(75, 50)]).to_rle(),
        }
        masks_path = write(tmp_path / "masks.json", json.dumps(masks))
        result = runner.invoke(
            main,
            [
                "distances",
                "--depth", str(depth_path),
                "--masks", masks_path,
                "--intrinsics", "50,50,50,50",
                "--min-points", "1",
            ],
        )
        assert result.exit_code == 0, result.output
        doc = json.loads(result.output)
        i, j = doc["labels"].index("left"), doc["labels"].index("right")
        assert doc["matrix"][i][j] == pytest.approx(2.0, abs=1e-6)


class TestGeneration:
    def test_gen_graphvqa_single(self, runner, tmp_path, toy_doc):
        path = write(tmp_path / "g.json", toy_doc)
        result = runner.invoke(main, ["gen-graphvqa", path, "--image", "sha256:img"])
        assert result.exit_code == 0
        record = QARecord.from_json_line(result.output.strip())
        assert record.task == "graph"

    def test_gen_distvqa_from_matrix(self, runner, tmp_path):
        matrix = {
            "labels": ["a", "b", "c", "d", "e", "f"],
            "matrix": [[abs(i - j) * 1.0 for j in range(6)] for i in range(6)],
        }
        path = write(tmp_path / "m.json", json.dumps(matrix))
        result = runner.invoke(
            main, ["gen-distvqa", "--distances", path, "--seed", "7", "--counts", "2,1,1"]
        )
        assert result.exit_code == 0
        lines = [line for line in result.output.splitlines() if line]
        assert len(lines) == 4

    def test_stats(self, runner, tmp_path, toy_doc):
        graph_path = write(tmp_path / "g.json", toy_doc)
        records = runner.invoke(
            main, ["gen-graphvqa", graph_path, "--image", "sha256:img"]
        ).output
        path = write(tmp_path / "records.jsonl", records)
        result = runner.invoke(main, ["stats", path])
        assert result.exit_code == 0
        stats = json.loads(result.output)
        assert stats["totals"]["graph"] == 1
