"""Persistent state for pairwise win-tie-lose rating sessions.

Storage is an append-only JSONL event log plus a periodic snapshot in the
data directory; the store rebuilds from disk on construction, so a service
restart loses no acknowledged rating. Assignment issuance and rating writes
are serialized through one lock to keep per-item quotas safe under
concurrent raters.
"""

from __future__ import annotations

import json
import random
import threading
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Iterable

ASPECTS = (
    "textual_informativeness",
    "visual_informativeness",
    "temporal_coherence",
    "plan_accuracy",
)

CHOICES = ("seq1_better", "tie", "seq2_better")

#: Instruction and aspect definitions shown to raters.
INSTRUCTION = (
    "Given the Task (e.g, Task: How to muddle), please compare two sequences "
    "of steps Sequence 1 and Sequence 2, and determine which sequence is "
    "better in terms of four aspects:"
)

ASPECT_PROMPTS = {
    "textual_informativeness": (
        "Textual-Informativeness: whether the textual sequence (the sequence "
        "of texts) contains the amount of information needed to complete the task."
    ),
    "visual_informativeness": (
        "Visual-Informativeness: whether the visual sequence (the sequence of "
        "images) contains the amount of information needed to complete the task."
    ),
    "temporal_coherence": (
        "Temporal Coherence: whether the multimodal sequence (the paired "
        "sequence of texts and images) meets the temporal commonsense "
        "requirements, such as a step occurring before another step instead of after."
    ),
    "plan_accuracy": (
        "Plan Accuracy: whether the multimodal sequence (the paired sequence "
        "of texts and images) can successfully complete the task."
    ),
}

OPTION_LABELS = {
    "seq1_better": "1 - Sequence 1 is better",
    "tie": "2 - Tie",
    "seq2_better": "3 - Sequence 2 is better",
}

SNAPSHOT_EVERY = 50


class RaterError(ValueError):
    """Request-level error (unknown ids, bad payloads, closed assignments)."""


@dataclass(frozen=True)
class StepView:
    text: str
    image_url: str | None = None


@dataclass(frozen=True)
class PlanSideView:
    method: str
    steps: tuple[StepView, ...]


@dataclass(frozen=True)
class ComparisonItem:
    """One pairwise comparison. ``shuffle_bit`` False presents ours as
    Sequence 1; True swaps presentation. Method labels stay server-side."""

    id: str
    goal_title: str
    ours: PlanSideView
    other: PlanSideView
    shuffle_bit: bool

    @property
    def sequence_one(self) -> PlanSideView:
        return self.other if self.shuffle_bit else self.ours

    @property
    def sequence_two(self) -> PlanSideView:
        return self.ours if self.shuffle_bit else self.other

    @property
    def method_of_left(self) -> str:
        return self.sequence_one.method


@dataclass(frozen=True)
class Rating:
    item_id: str
    rater: str
    choices: dict[str, str]
    timestamp: float


@dataclass
class Session:
    id: str
    raters_per_item: int
    items: dict[str, ComparisonItem]
    order: list[str]
    ratings: dict[tuple[str, str], Rating] = field(default_factory=dict)

    @property
    def quota(self) -> int:
        return len(self.items) * self.raters_per_item

    def ratings_for_item(self, item_id: str) -> int:
        return sum(1 for key in self.ratings if key[0] == item_id)


def validate_choices(choices: dict[str, str]) -> None:
    for aspect in ASPECTS:
        if aspect not in choices:
            raise RaterError(f"missing aspect '{aspect}'")
    for aspect, choice in choices.items():
        if aspect not in ASPECTS:
            raise RaterError(f"unknown aspect '{aspect}'")
        if choice not in CHOICES:
            raise RaterError(f"invalid choice '{choice}' for aspect '{aspect}'")


def _item_to_obj(item: ComparisonItem) -> dict[str, Any]:
    return {
        "id": item.id,
        "goal_title": item.goal_title,
        "ours": asdict(item.ours),
        "other": asdict(item.other),
        "shuffle_bit": item.shuffle_bit,
    }


def _item_from_obj(obj: dict[str, Any]) -> ComparisonItem:
    def side(data: dict[str, Any]) -> PlanSideView:
        return PlanSideView(
            method=data["method"],
            steps=tuple(StepView(**step) for step in data["steps"]),
        )

    return ComparisonItem(
        id=obj["id"],
        goal_title=obj["goal_title"],
        ours=side(obj["ours"]),
        other=side(obj["other"]),
        shuffle_bit=bool(obj["shuffle_bit"]),
    )


class RatingStore:
    def __init__(self, data_dir: str | Path, durable: bool = True) -> None:
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self.durable = durable
        self._lock = threading.Lock()
        self._sessions: dict[str, Session] = {}
        self._reservations: dict[tuple[str, str], set[str]] = {}
        self._seq = 0
        self._session_counter = 0
        self._log_path = self.data_dir / "log.jsonl"
        self._snapshot_path = self.data_dir / "snapshot.json"
        self._load()

    # ---- persistence -----------------------------------------------------

    def _load(self) -> None:
        snapshot_seq = 0
        if self._snapshot_path.exists():
            snapshot = json.loads(self._snapshot_path.read_text(encoding="utf-8"))
            snapshot_seq = snapshot.get("seq", 0)
            self._session_counter = snapshot.get("session_counter", 0)
            for sid, data in snapshot.get("sessions", {}).items():
                session = Session(
                    id=sid,
                    raters_per_item=data["raters_per_item"],
                    items={o["id"]: _item_from_obj(o) for o in data["items"]},
                    order=[o["id"] for o in data["items"]],
                )
                for record in data.get("ratings", []):
                    rating = Rating(**record)
                    session.ratings[(rating.item_id, rating.rater)] = rating
                self._sessions[sid] = session
        self._seq = snapshot_seq
        if self._log_path.exists():
            with self._log_path.open(encoding="utf-8") as fh:
                for line in fh:
                    if not line.strip():
                        continue
                    event = json.loads(line)
                    if event["seq"] <= snapshot_seq:
                        continue
                    self._apply(event)
                    self._seq = event["seq"]

    def _apply(self, event: dict[str, Any]) -> None:
        if event["type"] == "session":
            items = [_item_from_obj(o) for o in event["items"]]
            self._sessions[event["session_id"]] = Session(
                id=event["session_id"],
                raters_per_item=event["raters_per_item"],
                items={item.id: item for item in items},
                order=[item.id for item in items],
            )
            self._session_counter = max(
                self._session_counter, int(event["session_id"].split("-")[-1])
            )
        elif event["type"] == "rating":
            session = self._sessions[event["session_id"]]
            rating = Rating(
                item_id=event["item_id"],
                rater=event["rater"],
                choices=event["choices"],
                timestamp=event["timestamp"],
            )
            session.ratings[(rating.item_id, rating.rater)] = rating

    def _append(self, event: dict[str, Any]) -> None:
        self._seq += 1
        event = {"seq": self._seq, **event}
        with self._log_path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(event, sort_keys=True, ensure_ascii=False) + "\n")
            fh.flush()
            if self.durable:
                import os

                os.fsync(fh.fileno())
        if self._seq % SNAPSHOT_EVERY == 0:
            self._write_snapshot()

    def _write_snapshot(self) -> None:
        snapshot = {
            "seq": self._seq,
            "session_counter": self._session_counter,
            "sessions": {
                sid: {
                    "raters_per_item": session.raters_per_item,
                    "items": [_item_to_obj(session.items[i]) for i in session.order],
                    "ratings": [asdict(r) for r in session.ratings.values()],
                }
                for sid, session in self._sessions.items()
            },
        }
        tmp = self._snapshot_path.with_suffix(".tmp")
        tmp.write_text(json.dumps(snapshot, sort_keys=True), encoding="utf-8")
        tmp.replace(self._snapshot_path)

    # ---- API -------------------------------------------------------------

    def create_session(
        self,
        items: Iterable[dict[str, Any]],
        raters_per_item: int = 3,
        shuffle_seed: int | None = None,
    ) -> Session:
        """Persist a session with fresh shuffle bits; duplicate ids error."""
        if raters_per_item < 1:
            raise RaterError("raters_per_item must be >= 1")
        rng = random.Random(shuffle_seed)
        built: list[ComparisonItem] = []
        seen: set[str] = set()
        for raw in items:
            item_id = str(raw["id"])
            if item_id in seen:
                raise RaterError(f"duplicate item id '{item_id}'")
            seen.add(item_id)

            def side(data: dict[str, Any]) -> PlanSideView:
                return PlanSideView(
                    method=str(data["method"]),
                    steps=tuple(
                        StepView(
                            text=str(step["text"]),
                            image_url=step.get("image_url"),
                        )
                        for step in data["steps"]
                    ),
                )

            built.append(
                ComparisonItem(
                    id=item_id,
                    goal_title=str(raw["goal_title"]),
                    ours=side(raw["ours"]),
                    other=side(raw["other"]),
                    shuffle_bit=rng.random() < 0.5,
                )
            )
        if not built:
            raise RaterError("session needs at least one item")
        with self._lock:
            self._session_counter += 1
            sid = f"session-{self._session_counter:04d}"
            session = Session(
                id=sid,
                raters_per_item=raters_per_item,
                items={item.id: item for item in built},
                order=[item.id for item in built],
            )
            self._sessions[sid] = session
            self._append(
                {
                    "type": "session",
                    "session_id": sid,
                    "raters_per_item": raters_per_item,
                    "items": [_item_to_obj(item) for item in built],
                }
            )
            return session

    def _session(self, session_id: str) -> Session:
        session = self._sessions.get(session_id)
        if session is None:
            raise RaterError(f"unknown session '{session_id}'")
        return session

    def get_session(self, session_id: str) -> Session:
        with self._lock:
            return self._session(session_id)

    def next_assignment(self, session_id: str, rater: str) -> ComparisonItem | None:
        """An item this rater has not rated, with quota left. Re-requesting
        before submitting returns the same reserved item; None once the rater
        is exhausted."""
        if not rater:
            raise RaterError("rater id must be non-empty")
        with self._lock:
            session = self._session(session_id)
            for item_id in session.order:
                holders = self._reservations.setdefault((session_id, item_id), set())
                if rater in holders:
                    return session.items[item_id]
            for item_id in session.order:
                if (item_id, rater) in session.ratings:
                    continue
                holders = self._reservations.setdefault((session_id, item_id), set())
                committed = session.ratings_for_item(item_id)
                if committed + len(holders) >= session.raters_per_item:
                    continue
                holders.add(rater)
                return session.items[item_id]
            return None

    def submit_rating(
        self, session_id: str, item_id: str, rater: str, choices: dict[str, str]
    ) -> str:
        """Persist one rating exactly once; resubmission is an idempotent
        'duplicate' that leaves the stored rating unchanged."""
        validate_choices(choices)
        with self._lock:
            session = self._session(session_id)
            if item_id not in session.items:
                raise RaterError(f"unknown item '{item_id}'")
            if (item_id, rater) in session.ratings:
                return "duplicate"
            holders = self._reservations.setdefault((session_id, item_id), set())
            if rater not in holders:
                raise RaterError(
                    f"no open assignment for rater '{rater}' on item '{item_id}'"
                )
            rating = Rating(
                item_id=item_id,
                rater=rater,
                choices={aspect: choices[aspect] for aspect in ASPECTS},
                timestamp=time.time(),
            )
            session.ratings[(item_id, rater)] = rating
            holders.discard(rater)
            self._append(
                {
                    "type": "rating",
                    "session_id": session_id,
                    "item_id": item_id,
                    "rater": rater,
                    "choices": rating.choices,
                    "timestamp": rating.timestamp,
                }
            )
            return "stored"

    def aggregate(self, session_id: str, majority_vote: bool = False) -> dict[str, Any]:
        with self._lock:
            session = self._session(session_id)
            items = dict(session.items)
            ratings = list(session.ratings.values())
        return aggregate_ratings(
            items, ratings, majority_vote=majority_vote
        )


def _deshuffled_outcome(item: ComparisonItem, choice: str) -> str:
    """Map a presented-sequence choice to win/tie/lose for our method."""
    if choice == "tie":
        return "tie"
    ours_is_seq1 = not item.shuffle_bit
    picked_seq1 = choice == "seq1_better"
    return "win" if picked_seq1 == ours_is_seq1 else "lose"


def aggregate_ratings(
    items: dict[str, ComparisonItem],
    ratings: list[Rating],
    majority_vote: bool = False,
) -> dict[str, Any]:
    """Win/tie/lose percentages per (our method, other method) pair and
    aspect, after de-shuffling presentation order.

    Pooled mode counts each rating once; majority mode reduces each item's
    ratings to one outcome per aspect (strict majority, else tie).
    """
    counts: dict[tuple[str, str], dict[str, dict[str, int]]] = {}

    def bucket(pair: tuple[str, str], aspect: str) -> dict[str, int]:
        return counts.setdefault(pair, {}).setdefault(
            aspect, {"win": 0, "tie": 0, "lose": 0}
        )

    if majority_vote:
        per_item: dict[tuple[str, str], list[str]] = {}
        for rating in ratings:
            item = items[rating.item_id]
            for aspect in ASPECTS:
                per_item.setdefault((rating.item_id, aspect), []).append(
                    _deshuffled_outcome(item, rating.choices[aspect])
                )
        for (item_id, aspect), outcomes in per_item.items():
            item = items[item_id]
            pair = (item.ours.method, item.other.method)
            tally = {"win": 0, "tie": 0, "lose": 0}
            for outcome in outcomes:
                tally[outcome] += 1
            winner = max(tally, key=lambda k: tally[k])
            if tally[winner] * 2 <= len(outcomes):
                winner = "tie"
            bucket(pair, aspect)[winner] += 1
    else:
        for rating in ratings:
            item = items[rating.item_id]
            pair = (item.ours.method, item.other.method)
            for aspect in ASPECTS:
                outcome = _deshuffled_outcome(item, rating.choices[aspect])
                bucket(pair, aspect)[outcome] += 1

    pairs = []
    for (ours, other) in sorted(counts):
        aspects = {}
        for aspect in ASPECTS:
            tally = counts[(ours, other)].get(aspect, {"win": 0, "tie": 0, "lose": 0})
            total = sum(tally.values())
            # raw percentages so win+tie+lose always sums to 100; display
            # rounding is the consumer's concern
            aspects[aspect] = {
                "win": tally["win"] / total * 100 if total else 0.0,
                "tie": tally["tie"] / total * 100 if total else 0.0,
                "lose": tally["lose"] / total * 100 if total else 0.0,
                "ratings": total,
            }
        pairs.append({"ours": ours, "baseline": other, "aspects": aspects})
    return {
        "pairs": pairs,
        "total_ratings": len(ratings),
        "mode": "majority" if majority_vote else "pooled",
    }
