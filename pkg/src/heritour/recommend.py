"""Next-POI scoring, path replanning, profile learning and narrative drafts.

Scoring is a transparent weighted mean of four [0,1] components (interest
match, topic novelty, walking proximity, difficulty fit), so every
recommendation can be explained. Learned providers can replace the built-in
template narrative generator behind `NarrativeProvider`, but their output
still enters the validation pipeline as a Draft.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping, Protocol

from .ar import SiteWalkGraph, shortest_route
from .content import ContentDraft, ContentStore
from .engine import GameAction
from .errors import NoBaseContentError, UnreachableError
from .journey import JourneyState, JourneyTemplate, NodeStatus, PointOfInterest, frontier

EMA_ALPHA = 0.3
PROX_HALF_DISTANCE_M = 100.0

# position of a visitor: a waypoint id, a coordinate pair, or unknown
Position = str | tuple[float, float] | None


@dataclass(frozen=True)
class UserProfile:
    user_id: str
    tag_affinity: Mapping[str, float] = field(default_factory=dict)
    preferred_difficulty: int = 3
    visited_tags: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if not 1 <= self.preferred_difficulty <= 5:
            raise ValueError("preferred difficulty outside [1,5]")
        for tag, w in self.tag_affinity.items():
            if not 0.0 <= w <= 1.0:
                raise ValueError(f"affinity for {tag!r} outside [0,1]")

    def top_tag(self) -> str | None:
        if not self.tag_affinity:
            return None
        return max(sorted(self.tag_affinity), key=lambda t: self.tag_affinity[t])


@dataclass(frozen=True)
class ScoreWeights:
    w_pref: float = 1.0
    w_novelty: float = 1.0
    w_prox: float = 1.0
    w_diff: float = 1.0

    def __post_init__(self):
        weights = (self.w_pref, self.w_novelty, self.w_prox, self.w_diff)
        if any(w < 0 for w in weights):
            raise ValueError("weights must be non-negative")
        if sum(weights) <= 0:
            raise ValueError("at least one weight must be positive")


@dataclass(frozen=True)
class Recommendation:
    poi_id: str
    score: float
    components: dict[str, float]  # pref, novelty, prox, diff
    rationale: str

    def to_dict(self) -> dict:
        return {
            "poi_id": self.poi_id,
            "score": self.score,
            "components": dict(self.components),
            "rationale": self.rationale,
        }


def walk_distance_m(site: SiteWalkGraph, position: Position, poi: PointOfInterest) -> float | None:
    """Walking meters from the visitor to the POI's waypoint; None = unknown."""
    if position is None:
        return None
    anchor = site.poi_anchor.get(poi.id)
    if anchor is None:
        return None
    try:
        if isinstance(position, str):
            if position not in site.waypoints:
                return None
            _, total = shortest_route(site, position, anchor)
            return total
        snap = site.nearest_waypoint(position)
        if snap is None:
            return None
        _, total = shortest_route(site, snap, anchor)
        return site.straight_distance(position, snap) + total
    except UnreachableError:
        return None


def score_poi(
    poi: PointOfInterest,
    profile: UserProfile,
    position: Position,
    weights: ScoreWeights,
    site: SiteWalkGraph,
    half_distance_m: float = PROX_HALF_DISTANCE_M,
) -> Recommendation:
    if poi.tags:
        pref = sum(profile.tag_affinity.get(t, 0.0) for t in poi.tags) / len(poi.tags)
        seen = {t for t, n in profile.visited_tags.items() if n > 0}
        novelty = 1.0 - len(poi.tags & seen) / max(1, len(poi.tags))
    else:
        pref = 0.0
        novelty = 1.0
    distance = walk_distance_m(site, position, poi)
    d = 0.0 if distance is None else distance
    prox = 1.0 / (1.0 + d / half_distance_m)
    diff = 1.0 - abs(poi.difficulty - profile.preferred_difficulty) / 4.0
    total_w = weights.w_pref + weights.w_novelty + weights.w_prox + weights.w_diff
    score = (
        weights.w_pref * pref
        + weights.w_novelty * novelty
        + weights.w_prox * prox
        + weights.w_diff * diff
    ) / total_w
    components = {"pref": pref, "novelty": novelty, "prox": prox, "diff": diff}
    where = "distance unknown" if distance is None else f"{distance:.0f} m away"
    rationale = (
        f"{poi.name}: interest match {pref:.2f}, topic novelty {novelty:.2f}, "
        f"{where} (proximity {prox:.2f}), difficulty fit {diff:.2f} "
        f"-> score {score:.3f}"
    )
    return Recommendation(poi_id=poi.id, score=score, components=components, rationale=rationale)


def recommend_next(
    template: JourneyTemplate,
    state: JourneyState,
    profile: UserProfile,
    position: Position,
    weights: ScoreWeights,
    site: SiteWalkGraph,
    half_distance_m: float = PROX_HALF_DISTANCE_M,
) -> Recommendation | None:
    """Best-scoring frontier POI; lexicographic poi id breaks exact ties."""
    best: Recommendation | None = None
    for poi_id in frontier(state):
        rec = score_poi(template.nodes[poi_id], profile, position, weights, site, half_distance_m)
        if best is None or rec.score > best.score:
            best = rec
    return best


def replan_path(
    template: JourneyTemplate,
    state: JourneyState,
    profile: UserProfile,
    position: Position,
    weights: ScoreWeights,
    site: SiteWalkGraph,
    half_distance_m: float = PROX_HALF_DISTANCE_M,
) -> list[str]:
    """Greedy priority topological order over the not-yet-completed nodes.

    At each step the highest-scoring node whose remaining prerequisites are
    all already emitted (or completed) comes next; ties fall back to the id.
    """
    remaining = {n for n, s in state.node_status.items() if s is not NodeStatus.COMPLETED}
    scores = {
        n: score_poi(template.nodes[n], profile, position, weights, site, half_distance_m).score
        for n in remaining
    }
    pending_parents = {
        n: {p for p in template.parents(n) if p in remaining} for n in remaining
    }
    order: list[str] = []
    available = {n for n, parents in pending_parents.items() if not parents}
    while available:
        nxt = max(sorted(available), key=lambda n: scores[n])
        available.discard(nxt)
        remaining.discard(nxt)
        order.append(nxt)
        for child in template.children(nxt):
            if child in remaining:
                pending_parents[child].discard(nxt)
                if not pending_parents[child]:
                    available.add(child)
    return order


def update_profile(
    profile: UserProfile,
    action: GameAction,
    poi: PointOfInterest,
    challenge_succeeded: bool = False,
    alpha: float = EMA_ALPHA,
) -> UserProfile:
    """Exponential moving average toward the engagement signal on each of
    the POI's tags: 1.0 for a completed challenge, 0.5 for a plain visit."""
    signal = 1.0 if challenge_succeeded else 0.5
    affinity = dict(profile.tag_affinity)
    for tag in sorted(poi.tags):
        affinity[tag] = (1.0 - alpha) * affinity.get(tag, 0.0) + alpha * signal
    visited = Counter(profile.visited_tags)
    visited.update(poi.tags)
    return UserProfile(
        user_id=profile.user_id,
        tag_affinity=affinity,
        preferred_difficulty=profile.preferred_difficulty,
        visited_tags=dict(visited),
    )


class NarrativeProvider(Protocol):
    name: str

    def generate(self, poi: PointOfInterest, profile: UserProfile, base_body: str) -> str:
        ...


class TemplateNarrativeProvider:
    """Deterministic fill-in narrative; the stand-in for generative models."""

    name = "template"

    EXCERPT_CHARS = 240

    def generate(self, poi: PointOfInterest, profile: UserProfile, base_body: str) -> str:
        top = profile.top_tag()
        if top:
            hook = f"Since {top} keeps drawing your eye, look for its traces here."
        else:
            hook = "Every visit starts a new story; this stop opens yours."
        excerpt = base_body[: self.EXCERPT_CHARS].rstrip()
        if len(base_body) > self.EXCERPT_CHARS:
            excerpt += "..."
        return (
            f"Welcome to {poi.name}.\n"
            f"{hook}\n"
            f"{excerpt}\n"
            f"Take your time; the details reward a second look."
        )


PROVIDERS: dict[str, NarrativeProvider] = {
    "template": TemplateNarrativeProvider(),
}


def generate_story(
    poi: PointOfInterest,
    profile: UserProfile,
    store: ContentStore,
    provider: NarrativeProvider | None = None,
) -> ContentDraft:
    """Draft a personalized narrative from the POI's published base content.

    The result always enters the pipeline as a Draft; no provider output is
    ever served without expert validation.
    """
    provider = provider or PROVIDERS["template"]
    base = store.fetch_published(poi.id)
    if base is None:
        raise NoBaseContentError(f"poi {poi.id!r} has no published base content")
    body = provider.generate(poi, profile, base.body)
    return store.submit_draft(poi.id, body, source="generated")


def profile_to_dict(p: UserProfile) -> dict:
    return {
        "user_id": p.user_id,
        "tag_affinity": dict(sorted(p.tag_affinity.items())),
        "preferred_difficulty": p.preferred_difficulty,
        "visited_tags": dict(sorted(p.visited_tags.items())),
    }


def profile_from_dict(doc: dict) -> UserProfile:
    return UserProfile(
        user_id=doc["user_id"],
        tag_affinity={k: float(v) for k, v in doc.get("tag_affinity", {}).items()},
        preferred_difficulty=int(doc.get("preferred_difficulty", 3)),
        visited_tags={k: int(v) for k, v in doc.get("visited_tags", {}).items()},
    )
