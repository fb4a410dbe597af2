"""Game action processing: rule evaluation, effect folding, levels, leaderboard.

Every rule condition reads the same pre-action snapshot and effects are
monotone (points only add, sets only grow), so the final status never
depends on rule ordering. `apply_action` is pure; the stateful `Engine`
wrapper adds schema validation, sequence discipline and an idempotency memo.
"""

from __future__ import annotations

import hashlib
import json
import uuid
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

from .errors import CorruptLogError, OutOfOrderError
from .journey import JourneyState, NodeStatus
from .rules import (
    AwardBadge,
    AwardPoints,
    CompleteChallenge,
    Effect,
    EvalContext,
    Rule,
    Schemas,
    UnlockPoi,
    evaluate_condition,
    validate_payload,
)

_EVENT_NS = uuid.UUID("f31c5d9e-8f53-4f6a-9e0b-6a3a3c9b2b11")

DEFAULT_LEVEL_THRESHOLDS = (0, 100, 250, 500, 1000)


@dataclass(frozen=True)
class LevelSchedule:
    """Total-points thresholds; level = count of thresholds reached."""

    thresholds: tuple[int, ...] = DEFAULT_LEVEL_THRESHOLDS

    def __post_init__(self):
        if not self.thresholds:
            raise ValueError("schedule needs at least one threshold")
        if self.thresholds[0] != 0:
            raise ValueError("first threshold must be 0")
        if any(b <= a for a, b in zip(self.thresholds, self.thresholds[1:])):
            raise ValueError("thresholds must ascend strictly")


def compute_level(total_points: int, schedule: LevelSchedule) -> int:
    if total_points < 0:
        raise ValueError("total points cannot be negative")
    level = 0
    for t in schedule.thresholds:
        if t <= total_points:
            level += 1
    return level


@dataclass(frozen=True)
class GameAction:
    action_id: str
    user_id: str
    type: str
    payload: Mapping[str, object]
    client_timestamp: str
    seq: int


@dataclass(frozen=True)
class GameStatus:
    user_id: str
    points_by_category: Mapping[str, int] = field(default_factory=dict)
    badges: frozenset[str] = frozenset()
    completed_challenges: frozenset[str] = frozenset()
    level: int = 1
    applied_seq: int = 0
    # seq at which the current total was first reached; leaderboard tie-break
    points_reached_seq: int = 0

    @property
    def total_points(self) -> int:
        return sum(self.points_by_category.values())


def zero_status(user_id: str, schedule: LevelSchedule | None = None) -> GameStatus:
    schedule = schedule or LevelSchedule()
    return GameStatus(user_id=user_id, level=compute_level(0, schedule))


def status_to_dict(status: GameStatus) -> dict:
    return {
        "user_id": status.user_id,
        "points_by_category": dict(sorted(status.points_by_category.items())),
        "total_points": status.total_points,
        "badges": sorted(status.badges),
        "completed_challenges": sorted(status.completed_challenges),
        "level": status.level,
        "applied_seq": status.applied_seq,
        "points_reached_seq": status.points_reached_seq,
    }


def status_from_dict(doc: dict) -> GameStatus:
    return GameStatus(
        user_id=doc["user_id"],
        points_by_category={k: int(v) for k, v in doc.get("points_by_category", {}).items()},
        badges=frozenset(doc.get("badges", ())),
        completed_challenges=frozenset(doc.get("completed_challenges", ())),
        level=int(doc.get("level", 1)),
        applied_seq=int(doc.get("applied_seq", 0)),
        points_reached_seq=int(doc.get("points_reached_seq", 0)),
    )


def status_digest(status: GameStatus) -> str:
    canonical = json.dumps(status_to_dict(status), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def action_to_dict(action: GameAction) -> dict:
    return {
        "action_id": action.action_id,
        "user_id": action.user_id,
        "type": action.type,
        "payload": dict(action.payload),
        "client_timestamp": action.client_timestamp,
        "seq": action.seq,
    }


def action_from_dict(doc: dict) -> GameAction:
    return GameAction(
        action_id=doc["action_id"],
        user_id=doc["user_id"],
        type=doc["type"],
        payload=dict(doc.get("payload", {})),
        client_timestamp=doc.get("client_timestamp", ""),
        seq=int(doc["seq"]),
    )


@dataclass(frozen=True)
class GameEvent:
    event_id: str
    topic: str
    type: str
    payload: dict


@dataclass(frozen=True)
class EffectBundle:
    action_id: str
    applied_effects: tuple[Effect, ...]
    fired_rules: tuple[str, ...]
    pre_status_digest: str
    post_status: GameStatus
    events: tuple[GameEvent, ...]

    @property
    def event_ids(self) -> tuple[str, ...]:
        return tuple(e.event_id for e in self.events)


def build_context(action: GameAction, status: GameStatus, journey: JourneyState | None) -> EvalContext:
    visited = frozenset(
        n for n, s in journey.node_status.items()
        if s in (NodeStatus.VISITED, NodeStatus.COMPLETED)
    ) if journey is not None else frozenset()
    return EvalContext(
        payload=dict(action.payload),
        points_by_category=dict(status.points_by_category),
        level=status.level,
        badges=status.badges,
        visited_pois=visited,
    )


def select_effects(
    action: GameAction,
    rules: Iterable[Rule],
    status: GameStatus,
    journey: JourneyState | None,
) -> tuple[tuple[Effect, ...], tuple[str, ...]]:
    """Effects of all matching rules whose condition holds pre-action,
    in lexicographic rule-name order."""
    ctx = build_context(action, status, journey)
    effects: list[Effect] = []
    fired: list[str] = []
    for rule in sorted((r for r in rules if r.trigger == action.type), key=lambda r: r.name):
        if evaluate_condition(rule.condition, ctx):
            fired.append(rule.name)
            effects.extend(rule.effects)
    return tuple(effects), tuple(fired)


def fold_effects(
    status: GameStatus, effects: Iterable[Effect], schedule: LevelSchedule, seq: int
) -> GameStatus:
    points = dict(status.points_by_category)
    badges = set(status.badges)
    challenges = set(status.completed_challenges)
    for effect in effects:
        if isinstance(effect, AwardPoints):
            points[effect.category] = points.get(effect.category, 0) + effect.amount
        elif isinstance(effect, AwardBadge):
            badges.add(effect.name)
        elif isinstance(effect, CompleteChallenge):
            challenges.add(effect.challenge_id)
        elif isinstance(effect, UnlockPoi):
            pass  # journey-side effect; folded by the journey module
        else:  # pragma: no cover - effect union is closed
            raise AssertionError(f"unhandled effect {effect!r}")
    total = sum(points.values())
    changed_total = total != status.total_points
    return GameStatus(
        user_id=status.user_id,
        points_by_category=points,
        badges=frozenset(badges),
        completed_challenges=frozenset(challenges),
        level=compute_level(total, schedule),
        applied_seq=seq,
        points_reached_seq=seq if changed_total else status.points_reached_seq,
    )


def _effect_event(action: GameAction, index: int, effect: Effect) -> GameEvent:
    if isinstance(effect, AwardPoints):
        etype, payload = "PointsAwarded", {"category": effect.category, "amount": effect.amount}
    elif isinstance(effect, AwardBadge):
        etype, payload = "BadgeAwarded", {"badge": effect.name}
    elif isinstance(effect, UnlockPoi):
        etype, payload = "PoiUnlockRequested", {"poi_id": effect.poi_id}
    elif isinstance(effect, CompleteChallenge):
        etype, payload = "ChallengeCompleted", {"challenge_id": effect.challenge_id}
    else:  # pragma: no cover
        raise AssertionError(f"unhandled effect {effect!r}")
    # deterministic id: redelivered actions regenerate identical events
    event_id = str(uuid.uuid5(_EVENT_NS, f"{action.action_id}:{index}:{etype}"))
    return GameEvent(event_id=event_id, topic="game.effect", type=etype, payload=payload)


def apply_action(
    action: GameAction,
    rules: Iterable[Rule],
    status: GameStatus,
    journey: JourneyState | None,
    schedule: LevelSchedule,
) -> EffectBundle:
    """Pure application: caller has already validated schema and sequence."""
    effects, fired = select_effects(action, rules, status, journey)
    post = fold_effects(status, effects, schedule, action.seq)
    events = [_effect_event(action, i, e) for i, e in enumerate(effects)]
    status_event_id = str(uuid.uuid5(_EVENT_NS, f"{action.action_id}:status"))
    events.append(
        GameEvent(
            event_id=status_event_id,
            topic="game.status",
            type="GameStatusUpdated",
            payload=status_to_dict(post),
        )
    )
    return EffectBundle(
        action_id=action.action_id,
        applied_effects=effects,
        fired_rules=fired,
        pre_status_digest=status_digest(status),
        post_status=post,
        events=tuple(events),
    )


def replay(
    event_log: Iterable[GameAction],
    rules: Iterable[Rule],
    schedule: LevelSchedule,
    journey_at: Callable[[GameAction], JourneyState | None] | None = None,
    user_id: str | None = None,
) -> GameStatus:
    """Rebuild one user's status from an ordered action log.

    `journey_at` supplies the journey snapshot a condition saw at each step;
    leave it None when no rule reads `poi.visited`.
    """
    rules = list(rules)
    status: GameStatus | None = None
    for action in event_log:
        if status is None:
            status = zero_status(action.user_id, schedule)
        if action.seq != status.applied_seq + 1:
            raise CorruptLogError(
                f"user {action.user_id}: seq {action.seq} after {status.applied_seq}"
            )
        journey = journey_at(action) if journey_at else None
        status = apply_action(action, rules, status, journey, schedule).post_status
    if status is None:
        if user_id is None:
            raise ValueError("cannot replay an empty log without a user id")
        status = zero_status(user_id, schedule)
    return status


def leaderboard(all_status: Iterable[GameStatus], k: int) -> list[tuple[str, int]]:
    """Top-k users by total points; ties resolved by who got there first."""
    if k < 1:
        raise ValueError("k must be >= 1")
    ranked = sorted(
        all_status,
        key=lambda s: (-s.total_points, s.points_reached_seq, s.user_id),
    )
    return [(s.user_id, s.total_points) for s in ranked[:k]]


class Engine:
    """Stateful front: validation, per-user seq discipline, duplicate memo."""

    MEMO_SIZE = 1024

    def __init__(self, rules: list[Rule], schemas: Schemas, schedule: LevelSchedule | None = None):
        self.rules = list(rules)
        self.schemas = schemas
        self.schedule = schedule or LevelSchedule()
        self._memo: dict[str, OrderedDict[str, EffectBundle]] = {}

    def seen_bundle(self, action: GameAction) -> EffectBundle | None:
        memo = self._memo.get(action.user_id)
        if memo is not None and action.action_id in memo:
            memo.move_to_end(action.action_id)
            return memo[action.action_id]
        return None

    def submit_action(
        self, action: GameAction, status: GameStatus, journey: JourneyState | None = None
    ) -> tuple[EffectBundle, bool]:
        """Returns (bundle, is_duplicate); duplicates change nothing."""
        previous = self.seen_bundle(action)
        if previous is not None:
            return previous, True
        validate_payload(self.schemas, action.type, dict(action.payload))
        if action.seq != status.applied_seq + 1:
            raise OutOfOrderError(
                f"action seq {action.seq} does not follow applied seq {status.applied_seq}"
            )
        bundle = apply_action(action, self.rules, status, journey, self.schedule)
        memo = self._memo.setdefault(action.user_id, OrderedDict())
        memo[action.action_id] = bundle
        if len(memo) > self.MEMO_SIZE:
            memo.popitem(last=False)
        return bundle, False
