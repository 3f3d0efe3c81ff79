"""Unified command-line interface.

Exit codes: 0 on success, 2 when inputs fail validation, 1 on runtime
errors (unreachable backends, I/O problems). Defaults may come from a TOML
config file; explicit flags win over the file.
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click

from . import geometry, metrics, perception, scenegraph, scenevqa
from .backends import (
    BackendClient,
    MockScript,
    RetryPolicy,
    SchemaViolationError,
    TransportError,
    UnparseableError,
    serve_mock,
)
from .service import SceneStore, ServiceError, create_app

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

_VALIDATION_ERRORS = (
    scenegraph.SceneGraphError,
    SchemaViolationError,
    UnparseableError,
    ServiceError,
    metrics.EmptyBatchError,
    geometry.GeometryError,
    scenevqa.TooFewObjectsError,
    scenevqa.MissingPromptScoreError,
    ValueError,
    KeyError,
)


def _with_exit_codes(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except _VALIDATION_ERRORS as exc:
            click.echo(f"validation error: {exc}", err=True)
            raise SystemExit(2)
        except (TransportError, perception.PerceptionAborted, OSError) as exc:
            click.echo(f"runtime error: {exc}", err=True)
            raise SystemExit(1)

    return wrapper


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _emit(doc, output: str | None):
    text = json.dumps(doc, indent=2, ensure_ascii=False)
    if output:
        Path(output).write_text(text + "\n")
    else:
        click.echo(text)


def _read_jsonl(path: str) -> list[dict]:
    lines = Path(path).read_text().splitlines()
    return [json.loads(line) for line in lines if line.strip()]


@click.group()
def main():
    """Indoor scene understanding toolkit."""


@main.command("parse-validate")
@click.argument("input_path", type=click.Path(exists=True))
@_with_exit_codes
def parse_validate(input_path):
    """Validate a scene-graph JSON document."""
    report = scenegraph.validate(Path(input_path).read_text())
    _emit(
        {
            "ok": report.ok,
            "errors": [issue.message for issue in report.errors],
            "warnings": [issue.message for issue in report.warnings],
        },
        None,
    )
    if not report.ok:
        raise SystemExit(2)


@main.command("eval-graph")
@click.argument("input_path", type=click.Path(exists=True))
@click.option("-o", "--output", type=click.Path(), default=None)
@_with_exit_codes
def eval_graph_cmd(input_path, output):
    """Score JSONL records {id, gt_graph, prediction} from four perspectives."""
    rows = _read_jsonl(input_path)
    samples = [
        (scenegraph.parse_graph(row["gt_graph"]), row.get("prediction", ""))
        for row in rows
    ]
    report = metrics.eval_graph_batch(samples)
    _emit(report.as_dict(), output)


@main.command("eval-distance")
@click.argument("input_path", type=click.Path(exists=True))
@click.option("--band", "bands", multiple=True, help="low:high in percent, e.g. 80:120")
@click.option("-o", "--output", type=click.Path(), default=None)
@_with_exit_codes
def eval_distance_cmd(input_path, bands, output):
    """Score JSONL records {id, gt_meters, prediction} against accuracy bands."""
    rows = _read_jsonl(input_path)
    if bands:
        parsed_bands = tuple(
            metrics.DistanceBand(*(float(part) for part in band.split(":"))) for band in bands
        )
    else:
        parsed_bands = metrics.DEFAULT_BANDS
    pairs = [(row["gt_meters"], row.get("prediction", "")) for row in rows]
    report = metrics.eval_distance_batch(pairs, parsed_bands)
    doc = report.as_dict()
    parsed_pairs = [
        (float(gt), metrics.parse_distance_answer(pred))
        for gt, pred in pairs
    ]
    parsed_pairs = [(gt, pred) for gt, pred in parsed_pairs if pred is not None]
    if parsed_pairs:
        doc["error_stats"] = metrics.error_stats(parsed_pairs).as_dict()
    _emit(doc, output)


def _load_image(path: str, client: BackendClient | None) -> tuple[str, tuple[int, int]]:
    p = Path(path)
    if p.suffix == ".json":
        meta = json.loads(p.read_text())
        return meta.get("ref", f"image:{p.stem}"), (meta["width"], meta["height"])
    from PIL import Image

    data = p.read_bytes()
    with Image.open(p) as img:
        size = img.size
    if client is not None:
        ref = client.upload_blob(data)
    else:
        from .backends.protocol import blob_ref

        ref = blob_ref(data)
    return ref, size


@main.command("perceive")
@click.option("--image", "image_path", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--backends", "backend_url", default=None, help="Backend base URL.")
@click.option("--mock", "mock_script", type=click.Path(exists=True), default=None)
@click.option("-o", "--output", type=click.Path(), default=None)
@_with_exit_codes
def perceive_cmd(image_path, config_path, backend_url, mock_script, output):
    """Run the iterative object perception loop over one image."""
    config = _load_config(config_path)
    cfg = perception.PerceptionConfig(**config.get("perception", {}))
    backend_cfg = config.get("backends", {})
    policy = RetryPolicy(
        attempts=backend_cfg.get("attempts", 3),
        backoff_base=backend_cfg.get("backoff_base", 0.25),
        deadline=backend_cfg.get("deadline", 30.0),
    )
    mock_handle = None
    if mock_script:
        mock_handle = serve_mock(MockScript.from_json(Path(mock_script).read_text()))
        backend_url = mock_handle.url
    elif not backend_url:
        backend_url = backend_cfg.get("url")
    if not backend_url:
        raise click.UsageError("either --backends URL or --mock SCRIPT is required")
    try:
        with BackendClient(backend_url, policy, token=backend_cfg.get("token")) as client:
            image_ref, size = _load_image(image_path, client if not mock_script else None)
            result = perception.perceive(client, image_ref, size, cfg)
        _emit(result.as_dict(), output)
    finally:
        if mock_handle is not None:
            mock_handle.close()


@main.command("distances")
@click.option("--depth", "depth_path", required=True, type=click.Path(exists=True))
@click.option("--sidecar", type=click.Path(exists=True), default=None)
@click.option("--scale", type=float, default=0.001, help="PGM value-to-meters scale.")
@click.option("--masks", "masks_path", required=True, type=click.Path(exists=True))
@click.option("--fov", type=float, default=60.0, help="Horizontal FOV in degrees.")
@click.option("--intrinsics", "intrinsics_spec", default=None, help="fx,fy,cx,cy")
@click.option("--min-points", type=int, default=10)
@click.option("-o", "--output", type=click.Path(), default=None)
@_with_exit_codes
def distances_cmd(depth_path, sidecar, scale, masks_path, fov, intrinsics_spec, min_points, output):
    """Object centroid distances from a depth map and per-object RLE masks."""
    if depth_path.endswith(".pgm"):
        depth = geometry.DepthMap.from_pgm(depth_path, scale=scale)
    else:
        depth = geometry.DepthMap.from_raw(depth_path, sidecar)
    if intrinsics_spec:
        fx, fy, cx, cy = (float(part) for part in intrinsics_spec.split(","))
        intr = geometry.Intrinsics(fx, fy, cx, cy, depth.width, depth.height)
    else:
        intr = geometry.Intrinsics.from_fov(depth.width, depth.height, fov)
    cloud = geometry.backproject(depth, intr)
    masks = json.loads(Path(masks_path).read_text())
    centroids = [
        (label, geometry.object_centroid(cloud, geometry.Mask.from_rle(rle), min_points))
        for label, rle in masks.items()
    ]
    matrix = geometry.distance_matrix(centroids)
    _emit(matrix.as_dict(), output)


@main.command("gen-distvqa")
@click.option("--distances", "distances_path", required=True, type=click.Path(exists=True))
@click.option("--seed", type=int, default=0)
@click.option("--counts", default="5,2,1", help="single,dual,triple record counts")
@click.option("--templates", "templates_path", type=click.Path(exists=True), default=None)
@click.option("-o", "--output", type=click.Path(), default=None)
@_with_exit_codes
def gen_distvqa_cmd(distances_path, seed, counts, templates_path, output):
    """Generate distance QA records from a distance-matrix JSON."""
    matrix = geometry.DistanceMatrix.from_dict(json.loads(Path(distances_path).read_text()))
    bank = scenevqa.TemplateBank.from_toml(templates_path) if templates_path else None
    n_single, n_dual, n_triple = (int(part) for part in counts.split(","))
    records = scenevqa.gen_distance_qa(
        matrix.labels, matrix, bank, seed=seed, counts=(n_single, n_dual, n_triple)
    )
    lines = "".join(record.to_json_line() + "\n" for record in records)
    if output:
        Path(output).write_text(lines)
    else:
        click.echo(lines, nl=False)


@main.command("gen-graphvqa")
@click.argument("input_path", type=click.Path(exists=True))
@click.option("--image", "image_ref", default="", help="Image reference for the record.")
@click.option("-o", "--output", type=click.Path(), default=None)
@_with_exit_codes
def gen_graphvqa_cmd(input_path, image_ref, output):
    """Generate graph QA records from a graph JSON file or JSONL of {image, graph}."""
    text = Path(input_path).read_text()
    records = []
    if input_path.endswith(".jsonl"):
        for row in _read_jsonl(input_path):
            graph = scenegraph.parse_graph(row["graph"])
            records.append(scenevqa.gen_graph_qa(graph, row.get("image", image_ref)))
    else:
        graph = scenegraph.parse_graph(text)
        records.append(scenevqa.gen_graph_qa(graph, image_ref))
    lines = "".join(record.to_json_line() + "\n" for record in records)
    if output:
        Path(output).write_text(lines)
    else:
        click.echo(lines, nl=False)


@main.command("stats")
@click.argument("input_path", type=click.Path(exists=True))
@click.option("-o", "--output", type=click.Path(), default=None)
@_with_exit_codes
def stats_cmd(input_path, output):
    """Dataset statistics over a QA-record JSONL file."""
    records = [
        scenevqa.QARecord.from_json_line(line)
        for line in Path(input_path).read_text().splitlines()
        if line.strip()
    ]
    _emit(scenevqa.dataset_stats(records), output)


@main.command("serve")
@click.option("--store", "store_dir", required=True, type=click.Path())
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8000)
@click.option("--token", default=None)
@_with_exit_codes
def serve_cmd(store_dir, host, port, token):
    """Run the annotation review service."""
    import uvicorn

    app = create_app(SceneStore(store_dir), token=token)
    uvicorn.run(app, host=host, port=port, log_level="warning")


if __name__ == "__main__":
    main()
