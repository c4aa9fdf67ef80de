"""REST service for pairwise rating collection.

Endpoints::

    POST /sessions                      {items, raters_per_item} -> session id
    GET  /sessions/{sid}/next?rater=R   next assignment view (or done)
    POST /sessions/{sid}/ratings        {item_id, rater, choices{4 aspects}}
    GET  /sessions/{sid}/aggregate      win/tie/lose percentages

Assignment payloads inline step texts and image URLs and never expose method
labels or shuffle bits; the rater-facing instruction and aspect definitions
travel with each assignment so the UI stays in sync with the service.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any

from fastapi import FastAPI, HTTPException, Query
from fastapi.middleware.cors import CORSMiddleware
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .store import (
    ASPECT_PROMPTS,
    ASPECTS,
    CHOICES,
    INSTRUCTION,
    OPTION_LABELS,
    ComparisonItem,
    RaterError,
    RatingStore,
)


class StepIn(BaseModel):
    text: str
    image_url: str | None = None


class SideIn(BaseModel):
    method: str
    steps: list[StepIn]


class ItemIn(BaseModel):
    id: str
    goal_title: str
    ours: SideIn
    other: SideIn


class SessionIn(BaseModel):
    items: list[ItemIn]
    raters_per_item: int = 3
    shuffle_seed: int | None = None


class RatingIn(BaseModel):
    item_id: str
    rater: str
    choices: dict[str, str] = Field(default_factory=dict)


def _aspect_payload() -> list[dict[str, Any]]:
    return [
        {
            "key": aspect,
            "prompt": ASPECT_PROMPTS[aspect],
            "options": [
                {"value": choice, "label": OPTION_LABELS[choice]} for choice in CHOICES
            ],
        }
        for aspect in ASPECTS
    ]


def _assignment_payload(item: ComparisonItem) -> dict[str, Any]:
    def steps(side) -> list[dict[str, Any]]:
        return [{"text": s.text, "image_url": s.image_url} for s in side.steps]

    return {
        "done": False,
        "item_id": item.id,
        "goal_title": item.goal_title,
        "instruction": INSTRUCTION,
        "sequences": [
            {"label": "Sequence 1", "steps": steps(item.sequence_one)},
            {"label": "Sequence 2", "steps": steps(item.sequence_two)},
        ],
        "aspects": _aspect_payload(),
    }


def create_app(
    store: RatingStore,
    plans_dir: str | Path | None = None,
    ui_dir: str | Path | None = None,
) -> FastAPI:
    app = FastAPI(title="planweave rater service")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.get("/healthz")
    def healthz() -> dict[str, str]:
        return {"status": "ok"}

    @app.post("/sessions")
    def create_session(body: SessionIn) -> dict[str, Any]:
        try:
            session = store.create_session(
                [item.model_dump() for item in body.items],
                raters_per_item=body.raters_per_item,
                shuffle_seed=body.shuffle_seed,
            )
        except RaterError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return {
            "session_id": session.id,
            "items": len(session.items),
            "quota": session.quota,
        }

    @app.get("/sessions/{session_id}/next")
    def next_assignment(session_id: str, rater: str = Query(...)) -> dict[str, Any]:
        try:
            item = store.next_assignment(session_id, rater)
        except RaterError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        if item is None:
            return {"done": True}
        return _assignment_payload(item)

    @app.post("/sessions/{session_id}/ratings")
    def submit_rating(session_id: str, body: RatingIn) -> dict[str, str]:
        try:
            status = store.submit_rating(
                session_id, body.item_id, body.rater, body.choices
            )
        except RaterError as exc:
            message = str(exc)
            if "unknown" in message:
                raise HTTPException(status_code=404, detail=message) from exc
            if "no open assignment" in message:
                raise HTTPException(status_code=409, detail=message) from exc
            raise HTTPException(status_code=422, detail=message) from exc
        return {"status": status}

    @app.get("/sessions/{session_id}/aggregate")
    def aggregate(session_id: str, majority: bool = False) -> dict[str, Any]:
        try:
            return store.aggregate(session_id, majority_vote=majority)
        except RaterError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc

    if plans_dir is not None:
        app.mount("/plans", StaticFiles(directory=str(plans_dir)), name="plans")
    if ui_dir is not None:
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    return app


def serve(
    data_dir: str | Path,
    host: str = "127.0.0.1",
    port: int = 8008,
    plans_dir: str | Path | None = None,
    ui_dir: str | Path | None = None,
) -> None:
    import uvicorn

    store = RatingStore(data_dir)
    app = create_app(store, plans_dir=plans_dir, ui_dir=ui_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")
