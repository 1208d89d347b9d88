"""HTTP control surface over a running engine.

The app wraps one :class:`~warehouse_twin.orchestrator.Engine` plus its
:class:`~warehouse_twin.orchestrator.PacedRunner`.  Reads come from the
engine's atomically-published view; writes go through the command queue and
take effect at a tick boundary.  What-if analyses run on worker threads and
are polled by id.
"""

from __future__ import annotations

import itertools
import json
import queue
import threading

from fastapi import FastAPI, HTTPException
from fastapi.responses import StreamingResponse

from ..goals import enumerate_alternatives
from ..metrics import Preference
from ..orchestrator import Engine, InvalidPreference, PacedRunner
from ..twin import pareto_front, select
from .schemas import (Ack, AlternativeOut, ControlIn, EnactIn, MetricsOut,
                      PreferenceIn, StateOut, WhatIfAccepted, WhatIfIn, WhatIfOut)


def create_app(engine: Engine, runner: PacedRunner | None = None) -> FastAPI:
    app = FastAPI(title="warehouse-twin", version="0.1.0")
    app.state.engine = engine
    app.state.runner = runner
    analyses_pending: dict[str, dict] = {}
    analysis_ids = itertools.count(1)

    def _alternatives():
        return enumerate_alternatives(engine.goal_model)

    @app.get("/state", response_model=StateOut)
    def get_state():
        return engine.published_view()

    @app.get("/metrics", response_model=MetricsOut)
    def get_metrics(window: int | None = None):
        return engine.metrics_tail(window)

    @app.get("/alternatives", response_model=list[AlternativeOut])
    def get_alternatives():
        return [{"id": a.alternative_id, "index": a.index,
                 "selections": a.selections, "params": a.resolved_params.to_dict()}
                for a in _alternatives()]

    @app.post("/whatif", response_model=WhatIfAccepted)
    def post_whatif(body: WhatIfIn):
        alts = _alternatives()
        if body.candidates is not None:
            by_id = {a.alternative_id: a for a in alts}
            missing = [c for c in body.candidates if c not in by_id]
            if missing:
                raise HTTPException(status_code=404,
                                    detail=f"unknown alternatives: {missing}")
            alts = [by_id[c] for c in body.candidates]
        analysis_id = f"api-{next(analysis_ids)}"
        analyses_pending[analysis_id] = {"status": "running"}

        def work():
            try:
                if runner is not None and runner._thread is not None and runner._thread.is_alive():
                    done, box = engine.request_snapshot()
                    if not done.wait(timeout=30):
                        raise TimeoutError("tick loop did not produce a snapshot")
                    base = box["snapshot"]
                else:
                    base = engine.latest_snapshot
                engine.run_analysis(base, alternatives=alts, horizon=body.horizon,
                                    replications=body.replications,
                                    seed_base=body.seed_base,
                                    analysis_id=analysis_id)
                analyses_pending[analysis_id] = {"status": "done"}
            except Exception as exc:  # surfaced through polling
                analyses_pending[analysis_id] = {"status": "failed", "error": str(exc)}

        threading.Thread(target=work, daemon=True).start()
        return WhatIfAccepted(analysis_id=analysis_id, status="running")

    @app.get("/whatif/{analysis_id}", response_model=WhatIfOut)
    def get_whatif(analysis_id: str):
        pending = analyses_pending.get(analysis_id)
        record = engine.analyses.get(analysis_id)
        if pending is None and record is None:
            raise HTTPException(status_code=404, detail=f"unknown analysis {analysis_id!r}")
        if record is None:
            return WhatIfOut(analysis_id=analysis_id, status=pending["status"],
                             error=pending.get("error"))
        front_ids = set(record["front_ids"])
        alts = list(record["alternatives"].values())
        points = [p for p in
                  engine.twin.points(record["results"]) if p.alternative_id in front_ids]
        selected = select(points, engine.preference,
                          id_order=[a.alternative_id for a in alts])
        rows = [{"alternative_id": r.alternative_id,
                 "safety_score": r.safety_score,
                 "productivity_score": r.productivity_score,
                 "safety_ci": r.safety_ci, "productivity_ci": r.productivity_ci,
                 "safety_raw": list(r.safety_raw),
                 "productivity_raw": list(r.productivity_raw),
                 "on_pareto_front": r.alternative_id in front_ids}
                for r in record["results"]]
        return WhatIfOut(analysis_id=analysis_id, status="done", t=record["t"],
                         results=rows, front_ids=list(record["front_ids"]),
                         selected_id=selected.alternative_id)

    @app.post("/preference", response_model=Ack)
    def post_preference(body: PreferenceIn):
        try:
            engine.request_preference(Preference(w_s=body.w_s, w_p=body.w_p))
        except InvalidPreference as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return Ack(detail="preference queued")

    @app.post("/enact", response_model=Ack)
    def post_enact(body: EnactIn):
        try:
            engine.request_enact(body.alternative_id, body.analysis_id)
        except KeyError as exc:
            raise HTTPException(status_code=404, detail=str(exc.args[0]))
        return Ack(detail="enactment queued")

    @app.post("/control", response_model=Ack)
    def post_control(body: ControlIn):
        if body.action == "pause":
            engine.request_pause()
        elif body.action == "resume":
            engine.request_resume()
        elif body.action == "time_scale":
            if body.value is None:
                raise HTTPException(status_code=422, detail="time_scale needs a value")
            try:
                engine.request_time_scale(body.value)
            except ValueError as exc:
                raise HTTPException(status_code=422, detail=str(exc))
        else:
            raise HTTPException(status_code=422, detail=f"unknown action {body.action!r}")
        return Ack(detail=body.action)

    @app.get("/events")
    def event_stream():
        if runner is None:
            raise HTTPException(status_code=409, detail="no tick loop running")
        sub = runner.subscribe()

        def generate():
            try:
                while True:
                    try:
                        msg = sub.get(timeout=15.0)
                    except queue.Empty:
                        yield ": keep-alive\n\n"
                        continue
                    yield f"data: {json.dumps(msg, separators=(',', ':'))}\n\n"
            finally:
                runner.unsubscribe(sub)

        return StreamingResponse(generate(), media_type="text/event-stream")

    return app
