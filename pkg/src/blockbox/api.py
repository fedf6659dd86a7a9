"""HTTP control API consumed by the CLI and the browser panel.

JSON request/response bodies throughout; live runs additionally stream
status snapshots as server-sent events on /api/runs/{id}/stream.
"""

from __future__ import annotations

import asyncio
import json
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException, Request
from fastapi.responses import FileResponse, PlainTextResponse, StreamingResponse
from fastapi.staticfiles import StaticFiles

from .chain import InvalidParameterError
from .config import ExperimentConfig, calibrate_difficulty
from .events import dump_log
from .orchestrator import Orchestrator, RunNotFound, STATUS_RUNNING
from .topology import TopologySpec, validate

PANEL_DIST = Path(__file__).resolve().parents[2] / "frontend" / "dist"

STREAM_POLL_S = 0.2
STREAM_KEEPALIVE_S = 2.0


def create_app(orchestrator: Optional[Orchestrator] = None, panel_dir: Optional[Path] = None) -> FastAPI:
    orch = orchestrator or Orchestrator()
    app = FastAPI(title="blockbox", version="0.1.0")
    app.state.orchestrator = orch

    @app.post("/api/runs")
    async def create_run(request: Request) -> dict:
        body = await request.json()
        try:
            config = ExperimentConfig.from_dict(body)
            run_id = orch.start_run(config)
        except (InvalidParameterError, KeyError, ValueError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return {"run_id": run_id}

    @app.get("/api/runs")
    def list_runs() -> list:
        return orch.list_runs()

    def _status_or_404(run_id: str) -> dict:
        try:
            return orch.get_status(run_id)
        except RunNotFound:
            raise HTTPException(status_code=404, detail=f"unknown run {run_id}")

    @app.get("/api/runs/{run_id}")
    def run_status(run_id: str) -> dict:
        snap = _status_or_404(run_id)
        record = orch.get_record(run_id)
        snap["status"] = record.status
        snap["error"] = record.error
        return snap

    @app.post("/api/runs/{run_id}/stop")
    def stop_run(run_id: str) -> dict:
        try:
            orch.stop_run(run_id)
        except RunNotFound:
            raise HTTPException(status_code=404, detail=f"unknown run {run_id}")
        return {"stopping": run_id}

    @app.get("/api/runs/{run_id}/metrics")
    def run_metrics(run_id: str) -> dict:
        try:
            record = orch.get_record(run_id)
        except RunNotFound:
            raise HTTPException(status_code=404, detail=f"unknown run {run_id}")
        if record.metrics is None:
            raise HTTPException(status_code=409, detail=f"run is {record.status}; no metrics")
        return record.metrics.to_dict()

    @app.get("/api/runs/{run_id}/config")
    def run_config(run_id: str) -> dict:
        try:
            return orch.get_record(run_id).config.to_dict()
        except RunNotFound:
            raise HTTPException(status_code=404, detail=f"unknown run {run_id}")

    @app.get("/api/runs/{run_id}/logs/{node_id}", response_class=PlainTextResponse)
    def run_log(run_id: str, node_id: str) -> str:
        try:
            record = orch.get_record(run_id)
        except RunNotFound:
            raise HTTPException(status_code=404, detail=f"unknown run {run_id}")
        if not record.logs or node_id not in record.logs:
            raise HTTPException(status_code=404, detail=f"no log for {node_id}")
        return dump_log(record.logs[node_id])

    @app.post("/api/runs/{run_id}/export")
    async def export_run(run_id: str, request: Request) -> dict:
        body = await request.json()
        directory = body.get("directory")
        if not directory:
            raise HTTPException(status_code=400, detail="directory required")
        try:
            out = orch.export_run(run_id, directory)
        except RunNotFound:
            raise HTTPException(status_code=404, detail=f"unknown run {run_id}")
        except InvalidParameterError as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        return {"exported": str(out)}

    @app.get("/api/runs/{run_id}/stream")
    async def stream(run_id: str) -> StreamingResponse:
        _status_or_404(run_id)

        async def gen():
            last_sent = None
            idle = 0.0
            while True:
                try:
                    snap = orch.get_status(run_id)
                except RunNotFound:
                    return
                record = orch.get_record(run_id)
                snap["status"] = record.status
                if snap != last_sent:
                    last_sent = snap
                    idle = 0.0
                    yield f"data: {json.dumps(snap)}\n\n"
                elif idle >= STREAM_KEEPALIVE_S:
                    idle = 0.0
                    yield ": keepalive\n\n"
                if record.status != STATUS_RUNNING:
                    return
                await asyncio.sleep(STREAM_POLL_S)
                idle += STREAM_POLL_S

        return StreamingResponse(gen(), media_type="text/event-stream")

    @app.post("/api/topology/validate")
    async def topology_validate(request: Request) -> dict:
        body = await request.json()
        try:
            spec = TopologySpec.from_dict(body)
        except (InvalidParameterError, KeyError, ValueError) as exc:
            return {"violations": [str(exc)], "spec": None}
        return {"violations": validate(spec), "spec": spec.to_dict()}

    @app.get("/api/calibrate")
    def calibrate(nodes: int, hashrate: float, target_ms: float) -> dict:
        try:
            return {"difficulty": calibrate_difficulty(nodes, hashrate, target_ms)}
        except InvalidParameterError as exc:
            raise HTTPException(status_code=400, detail=str(exc))

    dist = panel_dir if panel_dir is not None else PANEL_DIST
    if dist.is_dir():
        app.mount("/assets", StaticFiles(directory=dist), name="panel-assets")

        @app.get("/")
        def index() -> FileResponse:
            return FileResponse(dist / "index.html")

    return app
