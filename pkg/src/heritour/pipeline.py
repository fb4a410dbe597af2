"""Per-action orchestration: engine effects folded into journey progress.

One pure function, `advance`, drives an action through rule evaluation and
the journey graph, emitting the full ordered event trail. The gateway calls
it live; `replay_pipeline` folds it over an action log to rebuild state,
which is what makes the persisted action log the single source of truth.

Journey progress derives from actions and effects as follows:
  - a POI_VISITED action visits its payload poi;
  - a `complete challenge` effect completes every POI owning that challenge;
  - an `unlock poi` effect unlocks its POI directly (recorded as override).
Unsatisfiable progress (e.g. a rule completing a challenge on a still-locked
POI) is skipped and reported, never fatal: the engine effects stand.
"""

from __future__ import annotations

import uuid
from dataclasses import dataclass
from typing import Iterable

from .engine import (
    EffectBundle,
    GameAction,
    GameEvent,
    GameStatus,
    LevelSchedule,
    apply_action,
    zero_status,
)
from .errors import CorruptLogError, IllegalTransitionError, UnknownPoiError
from .journey import (
    GateSnapshot,
    JourneyState,
    JourneyTemplate,
    NodeStatus,
    ProgressEvent,
    ProgressKind,
    apply_progress,
    instantiate,
    refresh_unlocks,
)
from .rules import CompleteChallenge, Rule, UnlockPoi

_EVENT_NS = uuid.UUID("a3c1f7d2-041b-45d0-9e2b-52a4a5e7c2aa")

VISIT_ACTION_TYPES = frozenset({"POI_VISITED"})
POI_PAYLOAD_FIELD = "poi_id"


@dataclass(frozen=True)
class AdvanceResult:
    bundle: EffectBundle
    journey: JourneyState
    journey_events: tuple[GameEvent, ...]
    applied_progress: tuple[ProgressEvent, ...]
    skipped_progress: tuple[tuple[str, str], ...]  # (what, why)
    completed_pois: frozenset[str]

    @property
    def all_events(self) -> tuple[GameEvent, ...]:
        return self.bundle.events + self.journey_events


def challenge_owners(template: JourneyTemplate, challenge_id: str) -> list[str]:
    return sorted(
        poi.id for poi in template.nodes.values() if challenge_id in poi.challenge_refs
    )


def derive_progress(
    action: GameAction, bundle: EffectBundle, template: JourneyTemplate
) -> list[tuple[ProgressKind, str]]:
    """Ordered journey moves implied by the action and its fired effects."""
    moves: list[tuple[ProgressKind, str]] = []
    if action.type in VISIT_ACTION_TYPES:
        poi_id = action.payload.get(POI_PAYLOAD_FIELD)
        if isinstance(poi_id, str):
            moves.append((ProgressKind.POI_VISITED, poi_id))
    for effect in bundle.applied_effects:
        if isinstance(effect, CompleteChallenge):
            for poi_id in challenge_owners(template, effect.challenge_id):
                moves.append((ProgressKind.CHALLENGE_COMPLETED, poi_id))
        elif isinstance(effect, UnlockPoi):
            moves.append((ProgressKind.UNLOCK_OVERRIDE, effect.poi_id))
    return moves


def _journey_event(action_id: str, index: int, etype: str, payload: dict) -> GameEvent:
    topic = "journey.unlock" if etype == "PoiUnlocked" else "journey.progress"
    event_id = str(uuid.uuid5(_EVENT_NS, f"{action_id}:{index}:{etype}:{payload.get('poi_id')}"))
    return GameEvent(event_id=event_id, topic=topic, type=etype, payload=payload)


_TRANSITION_EVENT = {
    NodeStatus.UNLOCKED: "PoiUnlocked",
    NodeStatus.VISITED: "PoiVisited",
    NodeStatus.COMPLETED: "PoiCompleted",
}


def advance(
    action: GameAction,
    rules: Iterable[Rule],
    status: GameStatus,
    journey: JourneyState,
    template: JourneyTemplate,
    schedule: LevelSchedule,
) -> AdvanceResult:
    """Pure composition: rule effects first (conditions read the pre-action
    snapshot), then journey progress gated by the post-action status."""
    bundle = apply_action(action, rules, status, journey, schedule)
    gate = GateSnapshot(
        total_points=bundle.post_status.total_points, badges=bundle.post_status.badges
    )

    events: list[GameEvent] = []
    applied: list[ProgressEvent] = []
    skipped: list[tuple[str, str]] = []
    completed: set[str] = set()
    counter = 0

    def emit_changes(before: JourneyState, after: JourneyState, override_target: str | None):
        nonlocal counter
        changed = [
            n for n in sorted(after.node_status)
            if after.node_status[n] != before.node_status[n]
        ]
        for n in changed:
            new_status = after.node_status[n]
            etype = _TRANSITION_EVENT[new_status]
            payload: dict = {"poi_id": n, "status": new_status.value}
            if etype == "PoiUnlocked":
                payload["via"] = "override" if n == override_target else "prerequisite"
            events.append(_journey_event(action.action_id, counter, etype, payload))
            counter += 1
            if new_status is NodeStatus.COMPLETED:
                completed.add(n)

    for kind, poi_id in derive_progress(action, bundle, template):
        event = ProgressEvent(kind=kind, poi_id=poi_id, seq=journey.applied_seq + 1)
        try:
            new_journey, _ = apply_progress(template, journey, event, gate)
        except (IllegalTransitionError, UnknownPoiError) as exc:
            skipped.append((f"{kind.value}:{poi_id}", str(exc)))
            continue
        emit_changes(
            journey, new_journey,
            poi_id if kind is ProgressKind.UNLOCK_OVERRIDE else None,
        )
        applied.append(event)
        journey = new_journey

    # points/badges gained this action may satisfy gates on their own
    refreshed, _ = refresh_unlocks(template, journey, gate)
    emit_changes(journey, refreshed, None)
    journey = refreshed

    return AdvanceResult(
        bundle=bundle,
        journey=journey,
        journey_events=tuple(events),
        applied_progress=tuple(applied),
        skipped_progress=tuple(skipped),
        completed_pois=frozenset(completed),
    )


def replay_pipeline(
    actions: Iterable[GameAction],
    rules: Iterable[Rule],
    template: JourneyTemplate,
    schedule: LevelSchedule,
    user_id: str | None = None,
) -> tuple[GameStatus, JourneyState]:
    """Rebuild one user's status and journey from an ordered action log."""
    rules = list(rules)
    status: GameStatus | None = None
    journey: JourneyState | None = None
    for action in actions:
        if status is None:
            user_id = user_id or action.user_id
            status = zero_status(user_id, schedule)
            journey = instantiate(template, user_id)
        if action.seq != status.applied_seq + 1:
            raise CorruptLogError(
                f"user {action.user_id}: seq {action.seq} after {status.applied_seq}"
            )
        result = advance(action, rules, status, journey, template, schedule)
        status = result.bundle.post_status
        journey = result.journey
    if status is None:
        if user_id is None:
            raise ValueError("cannot replay an empty log without a user id")
        status = zero_status(user_id, schedule)
        journey = instantiate(template, user_id)
    return status, journey
