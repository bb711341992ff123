"""HTTP API binding the pipeline together.

All routes live under /api/v1 and speak JSON; errors use a uniform
{code, message, details} envelope. Selection changes are serialized through
a single coordinator lock and always reconcile deployed probes against the
union of every actor's needs, so one actor dropping a goal never removes a
probe another actor still requires.
"""

from __future__ import annotations

import json
import os
import queue
import tempfile
import threading
import time
from typing import Optional

from fastapi import FastAPI, Query, Request, Response
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, StreamingResponse

from . import aggregator, deployer, model as chmm, resolver
from .collector import Collector
from .errors import (CloudHealthError, ConflictError, ParseError, UnknownMetric,
                     UnknownNode, UnknownSelection, UnresolvedStub,
                     ValidationError, VersionMismatch)
from .model import GoalSelection, MonitoringModel
from .resolver import ProbeAssignment, ProbeSpec
from .simenv import SimEnv

_STATUS = {
    "validation_error": 422,
    "unresolved_stub": 422,
    "parse_error": 400,
    "unknown_node": 404,
    "unknown_metric": 404,
    "unknown_selection": 404,
    "conflict": 409,
    "version_mismatch": 409,
}


class EventBus:
    """Fan-out of server-sent events to any number of subscribers."""

    def __init__(self):
        self._subscribers: list[queue.Queue] = []
        self._lock = threading.Lock()
        self.history: list[tuple[str, dict]] = []

    def publish(self, event: str, data: dict) -> None:
        with self._lock:
            self.history.append((event, data))
            for q in self._subscribers:
                q.put((event, data))

    def subscribe(self) -> queue.Queue:
        """Register a subscriber; prior events are replayed so late joiners catch up."""
        q: queue.Queue = queue.Queue()
        with self._lock:
            for item in self.history:
                q.put(item)
            self._subscribers.append(q)
        return q

    def unsubscribe(self, q: queue.Queue) -> None:
        with self._lock:
            if q in self._subscribers:
                self._subscribers.remove(q)


class ActorRecord:
    def __init__(self, actor_id: str):
        self.actor_id = actor_id
        self.display_name = actor_id
        self.role = "operator"
        self.selection: Optional[GoalSelection] = None
        self.revision = 0
        self.layout: object = None  # opaque, persisted verbatim

    def to_dict(self) -> dict:
        sel = None
        if self.selection is not None:
            sel = {
                "actor_id": self.selection.actor_id,
                "node_ids": sorted(self.selection.node_ids),
                "service_ids": sorted(self.selection.service_ids),
                "created_at": self.selection.created_at,
                "model_version": self.selection.model_version,
            }
        return {"actor_id": self.actor_id, "display_name": self.display_name,
                "role": self.role, "selection": sel, "revision": self.revision,
                "layout": self.layout}


class ServerState:
    """Everything the API serves: model, catalog, environment, actors."""

    def __init__(self, model: MonitoringModel, catalog: list[ProbeSpec],
                 env: SimEnv, collector: Collector,
                 state_path: Optional[str] = None):
        self.model = model
        self.catalog = catalog
        self.env = env
        self.collector = collector
        self.state_path = state_path
        self.actors: dict[str, ActorRecord] = {}
        self.active: dict[tuple, ProbeAssignment] = {}
        self.lock = threading.RLock()
        self.events = EventBus()
        env.fault_hooks.append(
            lambda f: self.events.publish("fault-detected", f.to_dict()))

    # -- derived views -------------------------------------------------------

    def active_node_ids(self) -> frozenset[str]:
        ids: set[str] = set()
        for actor in self.actors.values():
            if actor.selection:
                ids |= actor.selection.node_ids
        return frozenset(ids)

    def desired_assignments(self) -> set[ProbeAssignment]:
        """Resolve probes for the union of all actors' (metric, service) needs."""
        want: dict[str, set[str]] = {}
        for actor in self.actors.values():
            if not actor.selection or not actor.selection.node_ids:
                continue
            metrics = chmm.subtree_metrics(self.model, actor.selection.node_ids)
            for sid in actor.selection.service_ids:
                want.setdefault(sid, set()).update(metrics)
        desired: set[ProbeAssignment] = set()
        for sid in sorted(want):
            desc = self.env.services[sid].descriptor
            desired |= resolver.resolve_for_service(frozenset(want[sid]), desc,
                                                    self.catalog, self.model)
        return desired

    def reconcile(self, plan_id: str) -> tuple[resolver.DeploymentPlan, deployer.DeploymentReport]:
        desired = self.desired_assignments()
        plan = resolver.plan_diff(self.active.values(), desired)
        report = deployer.apply_plan(plan, self.env, plan_id=plan_id)
        self.active = {a.key(): a for a in desired}
        return plan, report

    def beat_intervals(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for a in self.active.values():
            if a.probe_kind == "heartbeat":
                out[a.service_id] = a.interval_ms
        return out

    # -- persistence ---------------------------------------------------------

    def persist(self) -> None:
        if not self.state_path:
            return
        doc = {
            "model": chmm.model_to_document(self.model),
            "actors": {aid: a.to_dict() for aid, a in self.actors.items()},
        }
        fd, tmp = tempfile.mkstemp(dir=os.path.dirname(self.state_path) or ".",
                                   suffix=".tmp")
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
        os.replace(tmp, self.state_path)

    def restore(self) -> None:
        if not self.state_path or not os.path.exists(self.state_path):
            return
        with open(self.state_path, encoding="utf-8") as fh:
            doc = json.load(fh)
        self.model = chmm.model_from_document(doc["model"])
        self.collector.set_model(self.model)
        for aid, rec in doc.get("actors", {}).items():
            actor = ActorRecord(aid)
            actor.display_name = rec.get("display_name", aid)
            actor.role = rec.get("role", "operator")
            actor.revision = rec.get("revision", 0)
            actor.layout = rec.get("layout")
            sel = rec.get("selection")
            if sel:
                actor.selection = GoalSelection(
                    actor_id=aid,
                    node_ids=frozenset(sel["node_ids"]),
                    service_ids=frozenset(sel["service_ids"]),
                    created_at=sel.get("created_at", 0),
                    model_version=sel.get("model_version"),
                )
            self.actors[aid] = actor


def _parse_window(window: Optional[str], now_ms: int) -> tuple[int, int]:
    """Accept 'from,to' in ms, or a horizon in seconds ending at sim-now."""
    if not window:
        return (max(0, now_ms - 60_000), now_ms)
    if "," in window:
        lo, hi = window.split(",", 1)
        return (int(lo), int(hi))
    horizon_ms = int(float(window) * 1000)
    return (max(0, now_ms - horizon_ms), now_ms)


def create_app(state: ServerState) -> FastAPI:
    app = FastAPI(title="cloudhealth", version="0.1.0")
    app.state.ch = state
    app.add_middleware(CORSMiddleware, allow_origins=["*"], allow_methods=["*"],
                       allow_headers=["*"])

    @app.exception_handler(CloudHealthError)
    def _handle(request: Request, exc: CloudHealthError):
        return JSONResponse(status_code=_STATUS.get(exc.code, 400),
                            content=exc.to_dict())

    def _snapshot_for(actor: ActorRecord, window: tuple[int, int]):
        return aggregator.snapshot(state.model, actor.selection, window,
                                   state.collector,
                                   beat_intervals_ms=state.beat_intervals())

    @app.get("/api/v1/model")
    def get_model():
        return chmm.model_to_document(state.model)

    @app.post("/api/v1/model/extend")
    def extend_model(patch: dict):
        with state.lock:
            new_model = chmm.extend_model(state.model, patch,
                                          active_node_ids=state.active_node_ids())
            state.model = new_model
            state.collector.set_model(new_model)
            state.persist()
        return chmm.model_to_document(new_model)

    @app.get("/api/v1/catalog")
    def get_catalog():
        return resolver.catalog_to_document(state.catalog)

    @app.get("/api/v1/services")
    def get_services():
        return [
            {"service_id": sid, "layer": rt.descriptor.layer.value,
             "state": rt.descriptor.state.value,
             "instance_ids": rt.descriptor.instance_ids}
            for sid, rt in sorted(state.env.services.items())
        ]

    @app.get("/api/v1/actors")
    def list_actors():
        return [a.to_dict() for a in state.actors.values()]

    @app.get("/api/v1/actors/{actor_id}")
    def get_actor(actor_id: str):
        actor = state.actors.get(actor_id)
        if actor is None:
            raise UnknownSelection(f"unknown actor {actor_id!r}")
        return actor.to_dict()

    @app.put("/api/v1/actors/{actor_id}/layout")
    def put_layout(actor_id: str, layout: dict):
        with state.lock:
            actor = state.actors.setdefault(actor_id, ActorRecord(actor_id))
            actor.layout = layout
            state.persist()
        return actor.to_dict()

    @app.put("/api/v1/actors/{actor_id}/selection")
    def put_selection(actor_id: str, body: dict):
        with state.lock:
            actor = state.actors.setdefault(actor_id, ActorRecord(actor_id))
            expected = body.get("revision")
            if expected is not None and expected != actor.revision:
                raise ConflictError(
                    f"selection revision {expected} is stale (current {actor.revision})")
            node_ids = frozenset(body.get("node_ids", []))
            # Validate node ids and stub-freeness before committing anything.
            if node_ids:
                chmm.subtree_metrics(state.model, node_ids)
            selection = GoalSelection(
                actor_id=actor_id,
                node_ids=node_ids,
                service_ids=frozenset(body.get("service_ids", [])),
                created_at=state.env.clock_ms,
                model_version=state.model.version,
            )
            for sid in selection.service_ids:
                if sid not in state.env.services:
                    raise UnknownSelection(f"unknown service {sid!r}")
            previous = actor.selection
            actor.selection = selection
            try:
                plan, report = state.reconcile(plan_id=f"{actor_id}:{actor.revision + 1}")
            except CloudHealthError:
                actor.selection = previous
                raise
            actor.revision += 1
            state.persist()
        state.events.publish("plan-applied", {"actor_id": actor_id,
                                              "plan": plan.to_dict(),
                                              "report": report.to_dict()})
        state.events.publish("snapshot-updated", {"actor_id": actor_id})
        return {"selection": actor.to_dict()["selection"],
                "revision": actor.revision,
                "plan": plan.to_dict(),
                "report": report.to_dict()}

    @app.get("/api/v1/actors/{actor_id}/health")
    def get_health(actor_id: str, window: Optional[str] = None):
        actor = state.actors.get(actor_id)
        if actor is None or actor.selection is None:
            raise UnknownSelection(f"actor {actor_id!r} has no active selection")
        win = _parse_window(window, state.env.clock_ms)
        return _snapshot_for(actor, win).to_dict()

    @app.get("/api/v1/health/node/{node_id}")
    def get_node_health(node_id: str, actor: str, window: Optional[str] = None):
        rec = state.actors.get(actor)
        if rec is None or rec.selection is None:
            raise UnknownSelection(f"actor {actor!r} has no active selection")
        win = _parse_window(window, state.env.clock_ms)
        snap = _snapshot_for(rec, win)
        if node_id not in snap.scores:
            raise UnknownNode(f"node {node_id!r} is not in the actor's snapshot")
        node = snap.scores[node_id].to_dict()
        node["children"] = [snap.scores[cid].to_dict()
                            for cid, _, _ in snap.scores[node_id].contributing_children
                            if cid in snap.scores]
        return node

    @app.get("/api/v1/kpis")
    def get_kpis(metric: str, service: str,
                 from_ts: Optional[int] = Query(default=None, alias="from"),
                 to_ts: Optional[int] = Query(default=None, alias="to")):
        if from_ts is None or to_ts is None or to_ts <= from_ts:
            to_ts = max(state.env.clock_ms, 1)
            from_ts = max(0, to_ts - 60_000)
        return state.collector.query(metric, service, from_ts, to_ts).to_dict()

    @app.post("/ingest")
    @app.post("/api/v1/ingest")
    async def ingest(request: Request):
        body = (await request.body()).decode("utf-8")
        errors = state.collector.ingest_lines(body)
        if errors:
            return JSONResponse(status_code=400, content={"errors": errors})
        return Response(status_code=204)

    @app.post("/api/v1/sim/advance")
    def sim_advance(dt_ms: int):
        with state.lock:
            state.env.advance(dt_ms)
        state.events.publish("snapshot-updated", {"clock_ms": state.env.clock_ms})
        return {"clock_ms": state.env.clock_ms}

    @app.get("/api/v1/events")
    def events(limit: Optional[int] = None):
        def stream():
            q = state.events.subscribe()
            sent = 0
            try:
                while limit is None or sent < limit:
                    try:
                        event, data = q.get(timeout=15.0)
                    except queue.Empty:
                        yield ": keep-alive\n\n"
                        continue
                    yield f"event: {event}\ndata: {json.dumps(data)}\n\n"
                    sent += 1
            finally:
                state.events.unsubscribe(q)

        return StreamingResponse(stream(), media_type="text/event-stream")

    return app
