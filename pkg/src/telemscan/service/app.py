"""HTTP service exposing the detection engine.

Paths in requests are resolved on the host running the service; the CLI is
a thin client over these endpoints. Engine errors surface as HTTP 400 with
a stable error code, config/usage errors as 422.
"""

from __future__ import annotations

import csv
import os

from fastapi import FastAPI
from fastapi.responses import JSONResponse

from .. import __version__
from ..config import resolve_config, load_config_file
from ..errors import ConfigError, TelemscanError
from ..evaluation import (
    breakdown_by_tag,
    breakdown_by_type,
    compare_methods,
    evaluate_channels,
    precision_recall_fbeta,
    render_table,
    rows_to_csv,
)
from ..model import load_labels
from ..pipeline import confirmed_ranges, load_results, run_detection
from . import schemas

FEEDBACK_HEADER = ["channel_id", "sequence_start", "sequence_end", "score", "label"]


def _row_model(method: str, row) -> schemas.MetricsRowModel:
    return schemas.MetricsRowModel(
        method=method, slice_name=row.slice_name, precision=row.precision,
        recall=row.recall, f_beta=row.f_beta, beta=row.beta,
        tp=row.tp, fp=row.fp, fn=row.fn,
    )


def create_app() -> FastAPI:
    app = FastAPI(title="telemscan", version=__version__)

    @app.exception_handler(ConfigError)
    async def config_error(_, exc: ConfigError):
        return JSONResponse(status_code=422,
                            content={"detail": {"code": exc.code, "message": exc.message}})

    @app.exception_handler(TelemscanError)
    async def engine_error(_, exc: TelemscanError):
        return JSONResponse(status_code=400,
                            content={"detail": {"code": exc.code, "message": exc.message}})

    @app.get("/health", response_model=schemas.HealthResponse)
    def health():
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.post("/detect", response_model=schemas.DetectResponse)
    def detect(request: schemas.DetectRequest):
        file_values = load_config_file(request.config_path) if request.config_path else {}
        config = resolve_config(file_values, request.overrides)
        report = run_detection(request.data_dir, config, request.out_path,
                               predictions_dir=request.predictions_dir)
        return schemas.DetectResponse(
            channels=report["channels"],
            aborted=[schemas.ChannelAbort(**a) for a in report["aborted"]],
            config_hash=report["config_hash"],
            out_path=report["out_path"],
            method=config.method,
        )

    @app.post("/evaluate", response_model=schemas.EvaluateResponse)
    def evaluate(request: schemas.EvaluateRequest):
        header, channels = load_results(request.results_path)
        labels = load_labels(request.labels_path)
        predicted = confirmed_ranges(channels)
        missing = sorted(set(labels.channel_ids()) - set(predicted))
        if missing:
            raise TelemscanError(
                f"labels reference channels absent from results: {missing}"
            )
        method = header.get("method", "unknown")
        report = evaluate_channels(predicted, labels)
        rows = [(method, precision_recall_fbeta(report, beta=request.beta))]
        rows += [(method, r) for r in breakdown_by_type(predicted, labels, request.beta)]
        rows += [(method, r) for r in breakdown_by_tag(predicted, labels, request.beta)]
        return schemas.EvaluateResponse(
            rows=[_row_model(m, r) for m, r in rows],
            table=render_table(rows),
        )

    @app.post("/compare", response_model=schemas.CompareResponse)
    def compare(request: schemas.CompareRequest):
        if len(request.results_paths) < 2:
            raise ConfigError("compare needs at least two results files")
        labels = load_labels(request.labels_path)
        by_method: dict[str, dict] = {}
        for path in request.results_paths:
            header, channels = load_results(path)
            name = header.get("method", "unknown")
            if name in by_method:
                name = f"{name}#{sum(k.startswith(name) for k in by_method)}"
            by_method[name] = confirmed_ranges(channels)
        rows = compare_methods(by_method, labels, beta=request.beta)
        return schemas.CompareResponse(
            rows=[_row_model(m, r) for m, r in rows],
            table=render_table(rows),
            csv=rows_to_csv(rows),
        )

    @app.post("/label", response_model=schemas.LabelResponse)
    def label(request: schemas.LabelRequest):
        if request.verdict not in ("tp", "fp"):
            raise ConfigError(f"verdict must be 'tp' or 'fp', got {request.verdict!r}")
        _, channels = load_results(request.results_path)
        match = None
        for record in channels:
            if record["channel_id"] != request.channel_id:
                continue
            for seq in record.get("sequences", []):
                if seq["start"] == request.start and seq["end"] == request.end:
                    match = seq
        if match is None:
            raise TelemscanError(
                f"no sequence ({request.channel_id}, {request.start}..{request.end}) "
                "in results"
            )
        warning = None
        if os.path.isfile(request.feedback_path):
            with open(request.feedback_path, newline="", encoding="utf-8") as fh:
                for row in csv.reader(fh):
                    if row[:3] == [request.channel_id, str(request.start), str(request.end)]:
                        warning = (
                            "sequence already labeled; last write wins on read"
                        )
        write_header = not os.path.isfile(request.feedback_path)
        with open(request.feedback_path, "a", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            if write_header:
                writer.writerow(FEEDBACK_HEADER)
            writer.writerow([request.channel_id, request.start, request.end,
                             f"{match['score']:.9g}", request.verdict])
        return schemas.LabelResponse(appended=True, score=match["score"], warning=warning)

    @app.get("/inspect", response_model=schemas.InspectResponse)
    def inspect(results_path: str, channel_id: str):
        _, channels = load_results(results_path)
        for record in channels:
            if record["channel_id"] == channel_id:
                return schemas.InspectResponse(
                    channel_id=channel_id,
                    method=record.get("method", "unknown"),
                    config_hash=record.get("config_hash", ""),
                    sequences=[schemas.SequenceModel(**s) for s in record["sequences"]],
                    diagnostics=[schemas.DiagnosticModel(**d) for d in record["diagnostics"]],
                )
        raise TelemscanError(f"channel {channel_id} not in results")

    return app


app = create_app()
