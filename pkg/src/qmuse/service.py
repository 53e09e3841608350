"""Session-oriented HTTP + WebSocket API for human-in-the-loop training.

Each session owns one TrainingSession behind a lock, so ratings are applied
strictly one at a time while distinct sessions proceed in parallel. Every
applied rating is checkpointed to disk before the response is sent; after a
restart the service reloads the checkpoints and re-presents the in-flight
step, so at most that one unrated step is ever repeated.

Rating requests carry a client-chosen idempotency token. Replaying a token
returns the original response without touching the Q-table, and the token
map is checkpointed together with the session, so a retry after a crash is
still applied exactly once.
"""

from __future__ import annotations

import asyncio
import json
import os
import tempfile
import threading
import uuid
from contextlib import asynccontextmanager
from dataclasses import asdict, dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException, WebSocket, WebSocketDisconnect
from fastapi.responses import JSONResponse, Response
from pydantic import BaseModel, Field

from .agent import (
    AWAITING_RATING,
    COMPLETED,
    HyperParams,
    QTable,
    TrainingSession,
    qtable_stats,
)
from .midi import export_midi, to_wire
from .persist import (
    ModelFile,
    ModelParseError,
    ModelVersionError,
    PersistError,
    list_models,
    load_model,
    model_from_doc,
    model_path,
    model_to_doc,
    safe_model_name,
    save_model,
)
from .rater import EvaluationFeedback, EvaluationStore
from .track import GenConfig


@dataclass
class SessionEntry:
    """One live session plus its lock, idempotency map, and event backlog."""

    session_id: str
    session: TrainingSession
    lock: threading.Lock = field(default_factory=threading.Lock)
    ratings: dict[str, dict] = field(default_factory=dict)
    events: list[dict] = field(default_factory=list)
    subscribers: list[asyncio.Queue] = field(default_factory=list)
    events_lock: threading.Lock = field(default_factory=threading.Lock)


@dataclass
class AppState:
    state_dir: Path
    sessions_dir: Path
    models_dir: Path
    evaluations: EvaluationStore
    sessions: dict[str, SessionEntry] = field(default_factory=dict)
    registry_lock: threading.Lock = field(default_factory=threading.Lock)
    loop: asyncio.AbstractEventLoop | None = None


class CreateSessionBody(BaseModel):
    config: dict = Field(default_factory=dict)
    hyperparams: dict = Field(default_factory=dict)


class RatingBody(BaseModel):
    rating: int
    token: str = Field(min_length=1, max_length=200)


class SaveModelBody(BaseModel):
    session_id: str


class FromModelBody(BaseModel):
    hyperparams: dict = Field(default_factory=dict)


class EvaluationBody(BaseModel):
    musicality: int
    novelty: int
    coherence: int
    comment: str = ""
    expertise: str = "None"


def _build_config(doc: dict) -> GenConfig:
    try:
        config = GenConfig(**doc)
        config.validate()
    except (TypeError, ValueError) as exc:
        raise HTTPException(status_code=422, detail=f"config: {exc}") from exc
    return config


def _build_hyperparams(doc: dict) -> HyperParams:
    try:
        hp = HyperParams(**doc)
        hp.validate()
    except (TypeError, ValueError) as exc:
        raise HTTPException(status_code=422, detail=f"hyperparams: {exc}") from exc
    return hp


def _write_json_atomic(path: Path, doc: dict) -> None:
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            json.dump(doc, handle, indent=2)
            handle.write("\n")
        os.replace(tmp_name, path)
    except BaseException:
        os.unlink(tmp_name)
        raise


def create_app(
    state_dir: str | Path | None = None, models_dir: str | Path | None = None
) -> FastAPI:
    """Build the application; all state lives under state_dir."""
    state_dir = Path(state_dir) if state_dir is not None else Path("qmuse-state")
    sessions_dir = state_dir / "sessions"
    models_dir = Path(models_dir) if models_dir is not None else state_dir / "models"
    sessions_dir.mkdir(parents=True, exist_ok=True)
    models_dir.mkdir(parents=True, exist_ok=True)
    state = AppState(
        state_dir=state_dir,
        sessions_dir=sessions_dir,
        models_dir=models_dir,
        evaluations=EvaluationStore(state_dir / "evaluations.jsonl"),
    )

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        state.loop = asyncio.get_running_loop()
        try:
            yield
        finally:
            state.loop = None

    app = FastAPI(title="qmuse", lifespan=lifespan)
    app.state.qmuse = state

    # -- internals --------------------------------------------------------

    def get_entry(session_id: str) -> SessionEntry:
        with state.registry_lock:
            entry = state.sessions.get(session_id)
        if entry is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")
        return entry

    def publish(entry: SessionEntry, kind: str, payload: dict) -> None:
        with entry.events_lock:
            event = {"type": kind, "payload": payload, "seq": len(entry.events)}
            entry.events.append(event)
            subscribers = list(entry.subscribers)
        loop = state.loop
        if loop is not None:
            for queue in subscribers:
                loop.call_soon_threadsafe(queue.put_nowait, event)

    def session_file(session_id: str) -> Path:
        return state.sessions_dir / f"{session_id}.json"

    def checkpoint_session(entry: SessionEntry, snap: dict) -> None:
        """Persist a session snapshot plus its idempotency map."""
        model = ModelFile(
            config=GenConfig(**snap["config"]),
            hyperparams=HyperParams(**snap["hyperparams"]),
            qtable=QTable(snap["qtable"]),
            episodes_completed=snap["baseline_episodes"] + len(snap["episode_means"]),
            total_steps=snap["baseline_steps"] + len(snap["records"]),
        )
        runtime = {
            key: value
            for key, value in snap.items()
            if key not in ("config", "hyperparams", "qtable")
        }
        doc = {
            "session_id": entry.session_id,
            "model": model_to_doc(model),
            "runtime": runtime,
            "ratings": dict(entry.ratings),
        }
        _write_json_atomic(session_file(entry.session_id), doc)

    def track_payload(entry: SessionEntry) -> dict:
        session = entry.session
        track = session.current_track()
        if track is None:
            return {"track": None, "midi_url": None}
        return {
            "track": to_wire(track, session.config),
            "midi_url": f"/sessions/{entry.session_id}/track.mid",
        }

    def progress_payload(session: TrainingSession) -> dict:
        return {
            "episode_means": list(session.log.episode_means),
            "exploration_fraction": session.log.exploration_fraction(),
            "episodes_completed": len(session.log.episode_means),
            "total_steps": len(session.log.records),
            "episode": session.current_episode,
            "step": session.current_step,
            "phase": session.phase,
        }

    def register_and_start(session: TrainingSession) -> dict:
        session_id = uuid.uuid4().hex
        entry = SessionEntry(session_id, session)
        with state.registry_lock:
            state.sessions[session_id] = entry
        with entry.lock:
            checkpoint_session(entry, session.snapshot())
            session.start()
            body = {
                "session_id": session_id,
                "phase": session.phase,
                "episode": session.current_episode,
                "step": session.current_step,
                **track_payload(entry),
            }
            publish(
                entry,
                "track_ready",
                {
                    "session_id": session_id,
                    "episode": session.current_episode,
                    "step": session.current_step,
                    **track_payload(entry),
                },
            )
        return body

    def restore_sessions() -> None:
        for path in sorted(state.sessions_dir.glob("*.json")):
            try:
                doc = json.loads(path.read_text(encoding="utf-8"))
                session_id = doc["session_id"]
                model = model_from_doc(doc["model"], path)
                snap = {
                    **doc["runtime"],
                    "config": asdict(model.config),
                    "hyperparams": asdict(model.hyperparams),
                    "qtable": model.qtable.entries,
                }
                session = TrainingSession.from_snapshot(snap)
                entry = SessionEntry(session_id, session, ratings=dict(doc.get("ratings", {})))
            except (KeyError, TypeError, ValueError, PersistError) as exc:
                print(f"skipping unreadable session file {path}: {exc}")
                continue
            if session.phase != COMPLETED:
                session.resume()
                publish(
                    entry,
                    "track_ready",
                    {
                        "session_id": session_id,
                        "episode": session.current_episode,
                        "step": session.current_step,
                        **track_payload(entry),
                    },
                )
            with state.registry_lock:
                state.sessions[session_id] = entry

    # -- endpoints ----------------------------------------------------------

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSessionBody | None = None) -> dict:
        body = body if body is not None else CreateSessionBody()
        config = _build_config(body.config)
        hp = _build_hyperparams(body.hyperparams)
        return register_and_start(TrainingSession(config, hp))

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str) -> dict:
        entry = get_entry(session_id)
        with entry.lock:
            session = entry.session
            return {
                "session_id": session_id,
                "phase": session.phase,
                "config": asdict(session.config),
                "hyperparams": asdict(session.hp),
                "episode": session.current_episode,
                "step": session.current_step,
                "cursor": session.runner.cursor if session.runner is not None else None,
                "qtable_stats": qtable_stats(session.q),
                "progress": progress_payload(session),
                **track_payload(entry),
            }

    @app.post("/sessions/{session_id}/rating")
    def submit_rating(session_id: str, body: RatingBody):
        entry = get_entry(session_id)
        with entry.lock:
            replay = entry.ratings.get(body.token)
            if replay is not None:
                return JSONResponse(replay)
            if not 1 <= body.rating <= 10:
                raise HTTPException(
                    status_code=422, detail="rating must be an integer in [1, 10]"
                )
            session = entry.session
            if session.phase != AWAITING_RATING:
                raise HTTPException(
                    status_code=409,
                    detail=f"session is not awaiting a rating (phase: {session.phase})",
                )
            captured: dict = {}
            outcome = session.rate(body.rating, checkpoint=captured.update)
            record = outcome.record
            response = {
                "session_id": session_id,
                "phase": session.phase,
                "applied": {
                    "episode": record.episode,
                    "step": record.step,
                    "action": record.action,
                    "explored": record.explored,
                    "reward": record.reward,
                },
                "episode_done": None
                if outcome.episode_done is None
                else {
                    "episode": outcome.episode_done[0],
                    "mean_reward": outcome.episode_done[1],
                },
                "training_done": None
                if outcome.training_done is None
                else {
                    "episodes_completed": outcome.training_done[0],
                    "total_steps": outcome.training_done[1],
                },
                "episode": session.current_episode,
                "step": session.current_step,
                "progress": progress_payload(session),
                **track_payload(entry),
            }
            entry.ratings[body.token] = response
            checkpoint_session(entry, captured)
            if outcome.episode_done is not None:
                publish(
                    entry,
                    "episode_done",
                    {
                        "session_id": session_id,
                        "episode": outcome.episode_done[0],
                        "mean_reward": outcome.episode_done[1],
                    },
                )
            if outcome.pending is not None:
                publish(
                    entry,
                    "track_ready",
                    {
                        "session_id": session_id,
                        "episode": session.current_episode,
                        "step": session.current_step,
                        **track_payload(entry),
                    },
                )
            if outcome.training_done is not None:
                publish(
                    entry,
                    "training_done",
                    {
                        "session_id": session_id,
                        "episodes_completed": outcome.training_done[0],
                        "total_steps": outcome.training_done[1],
                    },
                )
            return response

    @app.get("/sessions/{session_id}/progress")
    def get_progress(session_id: str) -> dict:
        entry = get_entry(session_id)
        with entry.lock:
            return {"session_id": session_id, **progress_payload(entry.session)}

    @app.get("/sessions/{session_id}/track.mid")
    def get_track_midi(session_id: str) -> Response:
        entry = get_entry(session_id)
        with entry.lock:
            session = entry.session
            track = session.current_track()
            if track is None:
                raise HTTPException(status_code=409, detail="session has no track yet")
            data = export_midi(track, session.config)
        return Response(content=data, media_type="audio/midi")

    @app.post("/models/{name}/save")
    def save_model_endpoint(name: str, body: SaveModelBody) -> dict:
        try:
            safe = safe_model_name(name)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        entry = get_entry(body.session_id)
        with entry.lock:
            session = entry.session
            model = ModelFile(
                config=session.config,
                hyperparams=session.hp,
                qtable=session.q.copy(),
                episodes_completed=session.baseline_episodes + len(session.log.episode_means),
                total_steps=session.baseline_steps + len(session.log.records),
            )
        try:
            save_model(model_path(state.models_dir, safe), model)
        except PersistError as exc:
            raise HTTPException(status_code=500, detail=str(exc)) from exc
        return {
            "name": safe,
            "episodes_completed": model.episodes_completed,
            "total_steps": model.total_steps,
        }

    @app.post("/sessions/from-model/{name}", status_code=201)
    def create_session_from_model(name: str, body: FromModelBody | None = None) -> dict:
        body = body if body is not None else FromModelBody()
        try:
            safe = safe_model_name(name)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        path = model_path(state.models_dir, safe)
        if not path.exists():
            raise HTTPException(status_code=404, detail=f"model {safe} not found")
        try:
            model = load_model(path)
        except (ModelVersionError, ModelParseError) as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        except PersistError as exc:
            raise HTTPException(status_code=500, detail=str(exc)) from exc
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        hp_doc = asdict(model.hyperparams)
        hp_doc.update(body.hyperparams)
        hp = _build_hyperparams(hp_doc)
        session = TrainingSession(
            model.config,
            hp,
            q=model.qtable,
            baseline_episodes=model.episodes_completed,
            baseline_steps=model.total_steps,
        )
        return register_and_start(session)

    @app.get("/models")
    def get_models() -> dict:
        try:
            return {"models": list_models(state.models_dir)}
        except PersistError as exc:
            raise HTTPException(status_code=500, detail=str(exc)) from exc

    @app.post("/sessions/{session_id}/evaluation", status_code=201)
    def submit_evaluation(session_id: str, body: EvaluationBody) -> dict:
        get_entry(session_id)
        feedback = EvaluationFeedback(
            session_id=session_id,
            musicality=body.musicality,
            novelty=body.novelty,
            coherence=body.coherence,
            comment=body.comment,
            expertise=body.expertise,
        )
        try:
            record_id = state.evaluations.append(feedback)
        except ValueError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return {"id": record_id, "session_id": session_id}

    @app.websocket("/sessions/{session_id}/events")
    async def session_events(websocket: WebSocket, session_id: str) -> None:
        with state.registry_lock:
            entry = state.sessions.get(session_id)
        if entry is None:
            await websocket.close(code=1008)
            return
        await websocket.accept()
        queue: asyncio.Queue = asyncio.Queue()
        with entry.events_lock:
            backlog = list(entry.events)
            entry.subscribers.append(queue)

        async def pump() -> None:
            last_seq = -1
            for event in backlog:
                await websocket.send_json(event)
                last_seq = event["seq"]
            while True:
                event = await queue.get()
                if event["seq"] <= last_seq:
                    continue
                await websocket.send_json(event)
                last_seq = event["seq"]

        sender = asyncio.create_task(pump())
        try:
            while True:
                await websocket.receive_text()
        except WebSocketDisconnect:
            pass
        finally:
            sender.cancel()
            with entry.events_lock:
                if queue in entry.subscribers:
                    entry.subscribers.remove(queue)

    restore_sessions()
    return app


def run(
    host: str = "127.0.0.1",
    port: int = 8000,
    state_dir: str | Path | None = None,
    models_dir: str | Path | None = None,
) -> None:
    """Serve the app with uvicorn (blocking)."""
    import uvicorn

    uvicorn.run(create_app(state_dir=state_dir, models_dir=models_dir), host=host, port=port)
