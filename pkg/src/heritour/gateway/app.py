"""REST and socket endpoints over the visitor service.

All write-path work happens synchronously on the event loop, which is what
serializes actions per user; the socket fan-out decouples through per-user
queues fed by the bus publish hook.
"""

from __future__ import annotations

import asyncio
import json
import uuid
from typing import Callable

from fastapi import Depends, FastAPI, HTTPException, Query, Request, WebSocket
from fastapi.middleware.cors import CORSMiddleware
from starlette.websockets import WebSocketDisconnect

from ..bus import GLOBAL_USER, EventEnvelope
from ..errors import (
    AlreadyFinalizedError,
    AlreadyPublishedError,
    EmptyBodyError,
    MalformedEnvelopeError,
    NoBaseContentError,
    NotApprovedError,
    OutOfOrderError,
    SchemaViolationError,
    UnknownActionTypeError,
    UnknownDraftError,
    UnknownMarkerError,
    UnknownPoiError,
    UnknownWaypointError,
    UnreachableError,
)
from .config import TokenInfo
from .service import VisitorService

_BAD_REQUEST = (ValueError, SchemaViolationError, EmptyBodyError, MalformedEnvelopeError)
_NOT_FOUND = (UnknownPoiError, UnknownDraftError, UnknownWaypointError, UnknownMarkerError)
_CONFLICT = (
    OutOfOrderError,
    NotApprovedError,
    AlreadyFinalizedError,
    AlreadyPublishedError,
    UnreachableError,
    NoBaseContentError,
)


def _run(call: Callable[[], object]):
    try:
        return call()
    except UnknownActionTypeError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    except _NOT_FOUND as exc:
        raise HTTPException(status_code=404, detail=str(exc))
    except _CONFLICT as exc:
        raise HTTPException(status_code=409, detail=str(exc))
    except _BAD_REQUEST as exc:
        raise HTTPException(status_code=400, detail=str(exc))


class _FanOut:
    """Per-user socket queues; global envelopes go to every live socket."""

    def __init__(self):
        self.queues: dict[str, set[asyncio.Queue]] = {}

    def register(self, user_id: str, queue: asyncio.Queue):
        self.queues.setdefault(user_id, set()).add(queue)

    def unregister(self, user_id: str, queue: asyncio.Queue):
        self.queues.get(user_id, set()).discard(queue)

    def push(self, envelope: EventEnvelope):
        if envelope.user_id == GLOBAL_USER:
            targets = [q for qs in self.queues.values() for q in qs]
        else:
            targets = list(self.queues.get(envelope.user_id, ()))
        for queue in targets:
            queue.put_nowait(envelope)


def create_app(service: VisitorService) -> FastAPI:
    app = FastAPI(title="heritour gateway", version="0.1.0")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    fan_out = _FanOut()
    service.on_publish = fan_out.push
    app.state.service = service

    def bearer(request: Request) -> TokenInfo:
        header = request.headers.get("authorization", "")
        token = header.removeprefix("Bearer ").strip() if header.startswith("Bearer ") else None
        info = service.authenticate(token)
        if info is None:
            raise HTTPException(status_code=401, detail="missing or unknown bearer token")
        return info

    def require_reviewer(info: TokenInfo = Depends(bearer)) -> TokenInfo:
        if info.role != "reviewer":
            raise HTTPException(status_code=403, detail="reviewer role required")
        return info

    def check_user_access(info: TokenInfo, user_id: str):
        if info.user_id != user_id and info.role != "reviewer":
            raise HTTPException(status_code=403, detail="cannot read another visitor's data")

    @app.get("/healthz")
    def healthz():
        return {"ok": True, "template": service.template.id}

    @app.post("/api/v1/actions")
    async def submit_action(request: Request, info: TokenInfo = Depends(bearer)):
        try:
            body = await request.json()
        except json.JSONDecodeError:
            raise HTTPException(status_code=400, detail="body must be JSON")
        return _run(lambda: service.submit_action(info.user_id, body))

    @app.get("/api/v1/users/{user_id}/status")
    def get_status(user_id: str, info: TokenInfo = Depends(bearer)):
        check_user_access(info, user_id)
        return _run(lambda: service.status_view(user_id))

    @app.get("/api/v1/users/{user_id}/journey")
    def get_journey(user_id: str, info: TokenInfo = Depends(bearer)):
        check_user_access(info, user_id)
        return _run(lambda: service.journey_view(user_id))

    @app.get("/api/v1/users/{user_id}/recommendation")
    def get_recommendation(user_id: str, info: TokenInfo = Depends(bearer)):
        check_user_access(info, user_id)
        return {"recommendation": _run(lambda: service.recommendation_view(user_id))}

    @app.get("/api/v1/leaderboard")
    def get_leaderboard(limit: int = Query(default=10, ge=1), info: TokenInfo = Depends(bearer)):
        return {"leaderboard": _run(lambda: service.leaderboard_view(limit))}

    @app.post("/api/v1/content/drafts")
    async def post_draft(request: Request, info: TokenInfo = Depends(bearer)):
        body = await request.json()
        return _run(lambda: service.submit_draft(info.user_id, body))

    @app.post("/api/v1/content/drafts/{draft_id}/review")
    async def post_review(draft_id: str, request: Request, info: TokenInfo = Depends(require_reviewer)):
        body = await request.json()
        return _run(lambda: service.review_draft(draft_id, info.user_id, body))

    @app.post("/api/v1/content/drafts/{draft_id}/publish")
    def post_publish(draft_id: str, info: TokenInfo = Depends(require_reviewer)):
        return _run(lambda: service.publish_draft(draft_id))

    @app.get("/api/v1/pois/{poi_id}/content")
    def get_content(poi_id: str, info: TokenInfo = Depends(bearer)):
        return _run(lambda: service.content_view(poi_id))

    @app.get("/api/v1/pois/{poi_id}/overlays")
    def get_overlays(poi_id: str, info: TokenInfo = Depends(bearer)):
        return {"overlays": _run(lambda: service.overlays_view(poi_id))}

    @app.get("/api/v1/nav/route")
    def get_route(
        to_poi: str,
        from_waypoint: str = Query(alias="from"),
        info: TokenInfo = Depends(bearer),
    ):
        return _run(lambda: service.nav_view(from_waypoint, to_poi))

    @app.websocket("/ws/v1/stream")
    async def ws_stream(ws: WebSocket):
        token = ws.query_params.get("token")
        if token is None:
            header = ws.headers.get("authorization", "")
            token = header.removeprefix("Bearer ").strip() if header.startswith("Bearer ") else None
        info = service.authenticate(token)
        if info is None:
            await ws.close(code=4401)
            return
        await ws.accept()

        # handshake: {"last_seq": null} for a fresh session, or the highest
        # user_seq already seen, prompting a gap replay from the event log
        try:
            first = json.loads(await ws.receive_text())
            last_seq = first["last_seq"]
            if last_seq is not None and (not isinstance(last_seq, int) or last_seq < 0):
                raise ValueError("last_seq must be a non-negative integer or null")
        except WebSocketDisconnect:
            return
        except (json.JSONDecodeError, ValueError, KeyError, TypeError):
            await ws.close(code=1002)
            return

        queue: asyncio.Queue = asyncio.Queue()
        fan_out.register(info.user_id, queue)
        reader: asyncio.Future | None = None
        getter: asyncio.Future | None = None
        try:
            sent_seq = 0
            if last_seq is None:
                snapshot = service.snapshot_view(info.user_id)
                sent_seq = snapshot["last_seq"]
                frame = EventEnvelope(
                    event_id=str(uuid.uuid4()),
                    user_id=info.user_id,
                    topic="session.snapshot",
                    type="Snapshot",
                    payload=snapshot,
                    user_seq=sent_seq,
                )
                await ws.send_text(json.dumps(frame.to_dict()))
            else:
                for envelope in service.envelopes_after(info.user_id, last_seq):
                    await ws.send_text(json.dumps(envelope.to_dict()))
                    sent_seq = envelope.user_seq

            reader = asyncio.ensure_future(ws.receive_text())
            getter = asyncio.ensure_future(queue.get())
            while True:
                done, _ = await asyncio.wait({reader, getter}, return_when=asyncio.FIRST_COMPLETED)
                if reader in done:
                    try:
                        message = reader.result()
                    except WebSocketDisconnect:
                        break
                    try:
                        json.loads(message)
                    except json.JSONDecodeError:
                        await ws.close(code=1002)
                        break
                    # post-handshake client frames carry nothing the server needs
                    reader = asyncio.ensure_future(ws.receive_text())
                if getter in done:
                    envelope = getter.result()
                    getter = asyncio.ensure_future(queue.get())
                    if envelope.user_id == info.user_id and envelope.user_seq <= sent_seq:
                        continue  # already covered by snapshot or replay
                    await ws.send_text(json.dumps(envelope.to_dict()))
                    if envelope.user_id == info.user_id:
                        sent_seq = envelope.user_seq
        except WebSocketDisconnect:
            pass
        finally:
            fan_out.unregister(info.user_id, queue)
            for task in (reader, getter):
                if task is not None and not task.done():
                    task.cancel()

    return app
