"""Application core behind the HTTP layer.

Owns all mutable per-user state and the wiring between the engine, journey
graph, recommender, content pipeline, AR repository and the event bus. All
write-path methods are synchronous and non-blocking-fast; the HTTP layer
runs them on a single event loop, which serializes actions per user (and
globally) without explicit locks at desk scale.
"""

from __future__ import annotations

import json
import uuid
from collections import OrderedDict
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable

from .. import ar as ar_mod
from ..bus import GLOBAL_USER, EventBus, EventEnvelope
from ..content import ContentStore, draft_to_dict, record_to_dict, version_to_dict
from ..engine import (
    GameAction,
    GameStatus,
    action_to_dict,
    status_digest,
    status_to_dict,
    status_from_dict,
    zero_status,
)
from ..errors import ConfigError, OutOfOrderError, UnknownPoiError
from ..journey import (
    JourneyState,
    JourneyTemplate,
    instantiate,
    load_template,
    state_from_dict,
    state_to_dict,
)
from ..pipeline import advance
from ..recommend import (
    PROVIDERS,
    Recommendation,
    UserProfile,
    generate_story,
    profile_from_dict,
    profile_to_dict,
    recommend_next,
    update_profile,
)
from ..rules import Rule, Schemas, parse, typecheck
from .config import ServiceConfig, TokenInfo

_MEMO_SIZE = 1024


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


def effect_to_dict(effect) -> dict:
    from ..rules import AwardBadge, AwardPoints, CompleteChallenge, UnlockPoi

    if isinstance(effect, AwardPoints):
        return {"kind": "award_points", "amount": effect.amount, "category": effect.category}
    if isinstance(effect, AwardBadge):
        return {"kind": "award_badge", "name": effect.name}
    if isinstance(effect, UnlockPoi):
        return {"kind": "unlock_poi", "poi_id": effect.poi_id}
    if isinstance(effect, CompleteChallenge):
        return {"kind": "complete_challenge", "challenge_id": effect.challenge_id}
    raise AssertionError(f"unhandled effect {effect!r}")


def load_rules_dir(rules_dir: Path, schemas: Schemas) -> list[Rule]:
    rules: list[Rule] = []
    for path in sorted(rules_dir.glob("*.grule")):
        rules.extend(parse(path.read_text(encoding="utf-8")))
    issues = typecheck(rules, schemas)
    if issues:
        raise ConfigError("rule set rejected:\n" + "\n".join(str(i) for i in issues))
    return rules


def load_schemas(content_dir: Path) -> Schemas:
    path = content_dir / "action_schemas.json"
    if not path.exists():
        raise ConfigError(f"missing action schema registry {path}")
    return json.loads(path.read_text(encoding="utf-8"))


def load_templates(content_dir: Path) -> dict[str, JourneyTemplate]:
    templates: dict[str, JourneyTemplate] = {}
    for path in sorted((content_dir / "templates").glob("*.json")):
        template, report = load_template(json.loads(path.read_text(encoding="utf-8")))
        if not report.ok:
            raise ConfigError(f"template {path.name}: {report.summary()}")
        templates[template.id] = template
    if not templates:
        raise ConfigError(f"no journey templates under {content_dir / 'templates'}")
    return templates


class VisitorService:
    def __init__(self, config: ServiceConfig):
        self.config = config
        self.schedule = config.schedule()
        self.weights = config.weights()
        self.schemas = load_schemas(config.content_dir)
        self.rules = load_rules_dir(config.rules_dir, self.schemas)
        templates = load_templates(config.content_dir)
        template_id = config.template or sorted(templates)[0]
        if template_id not in templates:
            raise ConfigError(f"active template {template_id!r} not found")
        self.template = templates[template_id]

        site_path = config.content_dir / "site" / "walkgraph.json"
        self.site = (
            ar_mod.walkgraph_from_dict(json.loads(site_path.read_text(encoding="utf-8")))
            if site_path.exists()
            else ar_mod.SiteWalkGraph()
        )
        self.content = ContentStore(
            root=config.content_dir / "editorial",
            poi_exists=lambda poi_id: poi_id in self.template.nodes,
        )
        self.ar = ar_mod.ARRepository(site=self.site, known_pois=set(self.template.nodes))
        self._load_ar_documents(config.content_dir)

        self.bus = EventBus(
            log_path=config.data_dir / "events.jsonl",
            ack_path=config.data_dir / "bus_acks.jsonl",
            fsync=config.fsync,
        )
        self._actions_path = config.data_dir / "actions.jsonl"
        self._actions_file = open(self._actions_path, "a", encoding="utf-8")

        self.provider = PROVIDERS.get(config.provider)
        if self.provider is None:
            raise ConfigError(f"unknown narrative provider {config.provider!r}")

        self.statuses: dict[str, GameStatus] = {}
        self.journeys: dict[str, JourneyState] = {}
        self.profiles: dict[str, UserProfile] = {}
        self.recommendations: dict[str, Recommendation | None] = {}
        self._memo: dict[str, OrderedDict[str, dict]] = {}
        self.on_publish: Callable[[EventEnvelope], None] | None = None
        self._load_user_state()

    # --- setup -----------------------------------------------------------

    def _load_ar_documents(self, content_dir: Path):
        trackables_path = content_dir / "site" / "trackables.json"
        if trackables_path.exists():
            for doc in json.loads(trackables_path.read_text(encoding="utf-8")):
                self.ar.register_trackable(ar_mod.trackable_from_dict(doc))
        assets_path = content_dir / "site" / "assets.json"
        if assets_path.exists():
            for doc in json.loads(assets_path.read_text(encoding="utf-8")):
                self.ar.register_asset(ar_mod.asset_from_dict(doc))

    def _load_user_state(self):
        for name, store, loader in (
            ("status", self.statuses, status_from_dict),
            ("journeys", self.journeys, state_from_dict),
            ("profiles", self.profiles, profile_from_dict),
        ):
            directory = self.config.data_dir / name
            directory.mkdir(parents=True, exist_ok=True)
            for path in directory.glob("*.json"):
                doc = json.loads(path.read_text(encoding="utf-8"))
                store[doc["user_id"]] = loader(doc)

    def close(self):
        self._actions_file.close()
        self.bus.close()

    # --- auth ------------------------------------------------------------

    def authenticate(self, token: str | None) -> TokenInfo | None:
        if not token:
            return None
        return self.config.tokens.get(token)

    # --- per-user state --------------------------------------------------

    def status_of(self, user_id: str) -> GameStatus:
        if user_id not in self.statuses:
            self.statuses[user_id] = zero_status(user_id, self.schedule)
        return self.statuses[user_id]

    def journey_of(self, user_id: str) -> JourneyState:
        if user_id not in self.journeys:
            self.journeys[user_id] = instantiate(self.template, user_id)
        return self.journeys[user_id]

    def profile_of(self, user_id: str) -> UserProfile:
        if user_id not in self.profiles:
            self.profiles[user_id] = UserProfile(user_id=user_id)
        return self.profiles[user_id]

    def _persist(self, kind: str, user_id: str, doc: dict):
        path = self.config.data_dir / kind / f"{user_id}.json"
        path.write_text(json.dumps(doc, indent=2, sort_keys=True), encoding="utf-8")

    # --- write path --------------------------------------------------------

    def submit_action(self, user_id: str, body: dict) -> dict:
        """Full pipeline: validate, apply rules, progress journey, persist,
        publish, recommend. Duplicate action ids return the stored response."""
        action = self._parse_action(user_id, body)
        memo = self._memo.setdefault(user_id, OrderedDict())
        if action.action_id in memo:
            memo.move_to_end(action.action_id)
            return {**memo[action.action_id], "duplicate": True}

        from ..rules import validate_payload

        validate_payload(self.schemas, action.type, dict(action.payload))
        status = self.status_of(user_id)
        if action.seq != status.applied_seq + 1:
            raise OutOfOrderError(
                f"action seq {action.seq} does not follow applied seq {status.applied_seq}"
            )
        journey = self.journey_of(user_id)

        result = advance(action, self.rules, status, journey, self.template, self.schedule)
        post = result.bundle.post_status

        # persist state before acknowledging anything
        self._actions_file.write(json.dumps(action_to_dict(action), separators=(",", ":")) + "\n")
        self._actions_file.flush()
        self.statuses[user_id] = post
        self.journeys[user_id] = result.journey
        self._persist("status", user_id, status_to_dict(post))
        self._persist("journeys", user_id, state_to_dict(result.journey))

        profile = self.profile_of(user_id)
        action_poi = action.payload.get("poi_id")
        if isinstance(action_poi, str) and action_poi in self.template.nodes:
            profile = update_profile(
                profile,
                action,
                self.template.nodes[action_poi],
                challenge_succeeded=action_poi in result.completed_pois,
                alpha=self.config.ema_alpha,
            )
            self.profiles[user_id] = profile
            self._persist("profiles", user_id, profile_to_dict(profile))

        for event in result.all_events:
            self._publish_user_event(user_id, event.event_id, event.topic, event.type, event.payload)

        recommendation = self._recompute_recommendation(user_id, position_poi=action_poi)
        rec_event_id = str(uuid.uuid5(uuid.NAMESPACE_URL, f"heritour:rec:{action.action_id}"))
        self._publish_user_event(
            user_id,
            rec_event_id,
            "recommendation.ready",
            "RecommendationReady",
            {
                "for_action": action.action_id,
                "recommendation": recommendation.to_dict() if recommendation else None,
            },
        )

        response = {
            "action_id": action.action_id,
            "duplicate": False,
            "status": status_to_dict(post),
            "effects": [effect_to_dict(e) for e in result.bundle.applied_effects],
            "fired_rules": list(result.bundle.fired_rules),
            "pre_status_digest": result.bundle.pre_status_digest,
            "journey": {
                "applied": [f"{e.kind.value}:{e.poi_id}" for e in result.applied_progress],
                "skipped": [{"move": what, "reason": why} for what, why in result.skipped_progress],
                "complete": result.journey.is_complete(),
            },
            "events": [e.event_id for e in result.all_events] + [rec_event_id],
            "recommendation": recommendation.to_dict() if recommendation else None,
        }
        memo[action.action_id] = response
        if len(memo) > _MEMO_SIZE:
            memo.popitem(last=False)
        return response

    def _parse_action(self, user_id: str, body: dict) -> GameAction:
        if not isinstance(body, dict):
            raise ValueError("action body must be a JSON object")
        action_id = body.get("action_id")
        action_type = body.get("type")
        payload = body.get("payload", {})
        seq = body.get("seq")
        if not action_id or not isinstance(action_id, str):
            raise ValueError("action_id must be a non-empty string")
        if not action_type or not isinstance(action_type, str):
            raise ValueError("type must be a non-empty string")
        if not isinstance(payload, dict):
            raise ValueError("payload must be a JSON object")
        if not isinstance(seq, int) or isinstance(seq, bool) or seq < 1:
            raise ValueError("seq must be a positive integer")
        return GameAction(
            action_id=action_id,
            user_id=user_id,
            type=action_type,
            payload=payload,
            client_timestamp=str(body.get("client_timestamp", "")) or _now(),
            seq=seq,
        )

    def _publish_user_event(self, user_id: str, event_id: str, topic: str, etype: str, payload: dict):
        envelope = EventEnvelope(
            event_id=event_id,
            user_id=user_id,
            topic=topic,
            type=etype,
            payload=payload,
            user_seq=self.bus.allocate_seq(user_id),
            emitted_at=_now(),
        )
        outcome = self.bus.publish(envelope)
        if outcome == "accepted" and self.on_publish is not None:
            self.on_publish(envelope)

    def _recompute_recommendation(self, user_id: str, position_poi: object = None) -> Recommendation | None:
        position = None
        if isinstance(position_poi, str):
            position = self.site.poi_anchor.get(position_poi)
        recommendation = recommend_next(
            self.template,
            self.journey_of(user_id),
            self.profile_of(user_id),
            position,
            self.weights,
            self.site,
            half_distance_m=self.config.prox_half_distance_m,
        )
        self.recommendations[user_id] = recommendation
        return recommendation

    # --- read path ---------------------------------------------------------

    def status_view(self, user_id: str) -> dict:
        doc = status_to_dict(self.status_of(user_id))
        ordering = sorted(
            self.statuses.values(),
            key=lambda s: (-s.total_points, s.points_reached_seq, s.user_id),
        )
        rank = next((i + 1 for i, s in enumerate(ordering) if s.user_id == user_id), len(ordering) + 1)
        doc["rank"] = rank
        doc["digest"] = status_digest(self.status_of(user_id))
        return doc

    def journey_view(self, user_id: str) -> dict:
        from ..journey import frontier, poi_to_dict

        state = self.journey_of(user_id)
        nodes = []
        for poi_id in sorted(self.template.nodes):
            poi = self.template.nodes[poi_id]
            cond = self.template.conditions.get(poi_id)
            node = poi_to_dict(poi)
            node["status"] = state.node_status[poi_id].value
            node["condition"] = (
                {
                    "min_total_points": cond.min_total_points,
                    "required_badges": sorted(cond.required_badges),
                }
                if cond
                else None
            )
            nodes.append(node)
        return {
            "user_id": user_id,
            "template_id": self.template.id,
            "applied_seq": state.applied_seq,
            "nodes": nodes,
            "edges": sorted([a, b] for a, b in self.template.edges),
            "frontier": frontier(state),
            "overrides": sorted(state.overrides),
            "complete": state.is_complete(),
        }

    def recommendation_view(self, user_id: str) -> dict | None:
        recommendation = self.recommendations.get(user_id)
        if recommendation is None:
            recommendation = self._recompute_recommendation(user_id)
        return recommendation.to_dict() if recommendation else None

    def leaderboard_view(self, limit: int) -> list[dict]:
        from ..engine import leaderboard

        rows = leaderboard(self.statuses.values(), max(1, limit))
        return [
            {"user_id": uid, "total_points": total, "level": self.statuses[uid].level}
            for uid, total in rows
        ]

    # --- content ------------------------------------------------------------

    def submit_draft(self, user_id: str, body: dict) -> dict:
        poi_id = body.get("poi_id", "")
        source = body.get("source", "curated")
        text = body.get("body", "")
        if source == "generated" and not text:
            if poi_id not in self.template.nodes:
                raise UnknownPoiError(f"unknown poi {poi_id!r}")
            draft = generate_story(
                self.template.nodes[poi_id], self.profile_of(user_id), self.content, self.provider
            )
        else:
            draft = self.content.submit_draft(poi_id, text, source)
        return draft_to_dict(draft)

    def review_draft(self, draft_id: str, reviewer_id: str, body: dict) -> dict:
        record = self.content.review(
            draft_id, reviewer_id, body.get("verdict", ""), body.get("feedback", "")
        )
        return record_to_dict(record)

    def publish_draft(self, draft_id: str) -> dict:
        version = self.content.publish(draft_id)
        event_id = str(uuid.uuid5(uuid.NAMESPACE_URL, f"heritour:published:{draft_id}"))
        envelope = EventEnvelope(
            event_id=event_id,
            user_id=GLOBAL_USER,
            topic="content.published",
            type="ContentPublished",
            payload={"poi_id": version.poi_id, "version": version.version},
            user_seq=self.bus.allocate_seq(GLOBAL_USER),
            emitted_at=_now(),
        )
        if self.bus.publish(envelope) == "accepted" and self.on_publish is not None:
            self.on_publish(envelope)
        return version_to_dict(version)

    def content_view(self, poi_id: str) -> dict:
        if poi_id not in self.template.nodes:
            raise UnknownPoiError(f"unknown poi {poi_id!r}")
        version = self.content.fetch_published(poi_id)
        return {"poi_id": poi_id, "published": version_to_dict(version) if version else None}

    def overlays_view(self, poi_id: str) -> list[dict]:
        pairs = self.ar.get_overlays(poi_id, self.content)
        return [
            {"asset": ar_mod.asset_to_dict(asset), "content_body": body}
            for asset, body in pairs
        ]

    def nav_view(self, from_waypoint: str, to_poi: str) -> dict:
        waypoints, total = self.ar.nav_route(from_waypoint, to_poi)
        return {"waypoints": waypoints, "total_m": total}

    # --- socket support ------------------------------------------------------

    def snapshot_view(self, user_id: str) -> dict:
        return {
            "status": self.status_view(user_id),
            "journey": self.journey_view(user_id),
            "recommendation": self.recommendation_view(user_id),
            "last_seq": self.bus.last_seq(user_id),
        }

    def envelopes_after(self, user_id: str, after_seq: int) -> list[EventEnvelope]:
        return self.bus.read_user(user_id, after_seq)
