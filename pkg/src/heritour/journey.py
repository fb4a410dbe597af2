"""Visitor journeys as directed acyclic graphs of points of interest.

A journey template fixes the POI graph and per-node unlock gates; a journey
state tracks one visitor's progression through it. All transitions are pure:
they take a state value and return a new one, leaving the input untouched.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Iterator

from .errors import (
    IllegalTransitionError,
    InvalidTemplateError,
    StaleEventError,
    UnknownPoiError,
)

SLUG_RE = re.compile(r"^[a-z0-9-]+$")


class NodeStatus(str, Enum):
    LOCKED = "locked"
    UNLOCKED = "unlocked"
    VISITED = "visited"
    COMPLETED = "completed"

    @property
    def rank(self) -> int:
        return _STATUS_RANK[self]


_STATUS_RANK = {
    NodeStatus.LOCKED: 0,
    NodeStatus.UNLOCKED: 1,
    NodeStatus.VISITED: 2,
    NodeStatus.COMPLETED: 3,
}


@dataclass(frozen=True)
class PointOfInterest:
    id: str
    name: str
    tags: frozenset[str] = frozenset()
    difficulty: int = 1
    geo: tuple[float, float] | None = None  # (lat, lon) degrees
    content_refs: tuple[str, ...] = ()
    challenge_refs: tuple[str, ...] = ()

    def __post_init__(self):
        if not SLUG_RE.match(self.id):
            raise ValueError(f"poi id {self.id!r} is not a lowercase slug")
        if not 1 <= self.difficulty <= 5:
            raise ValueError(f"poi {self.id}: difficulty {self.difficulty} outside [1,5]")
        if self.geo is not None:
            lat, lon = self.geo
            if not (-90.0 <= lat <= 90.0 and -180.0 <= lon <= 180.0):
                raise ValueError(f"poi {self.id}: geo ({lat}, {lon}) out of range")


@dataclass(frozen=True)
class UnlockCondition:
    """Gate on accumulated game status; absent fields mean no constraint."""

    min_total_points: int | None = None
    required_badges: frozenset[str] = frozenset()

    def __post_init__(self):
        if self.min_total_points is not None and self.min_total_points < 0:
            raise ValueError("min_total_points must be non-negative")

    def passes(self, gate: GateSnapshot) -> bool:
        if self.min_total_points is not None and gate.total_points < self.min_total_points:
            return False
        return self.required_badges <= gate.badges


@dataclass(frozen=True)
class GateSnapshot:
    """The slice of game status that unlock conditions read."""

    total_points: int = 0
    badges: frozenset[str] = frozenset()


ZERO_GATE = GateSnapshot()


@dataclass
class JourneyTemplate:
    id: str
    nodes: dict[str, PointOfInterest]
    edges: frozenset[tuple[str, str]]
    conditions: dict[str, UnlockCondition] = field(default_factory=dict)

    def parents(self, poi_id: str) -> list[str]:
        return sorted(a for a, b in self.edges if b == poi_id)

    def children(self, poi_id: str) -> list[str]:
        return sorted(b for a, b in self.edges if a == poi_id)

    def entry_nodes(self) -> list[str]:
        targets = {b for _, b in self.edges}
        return sorted(n for n in self.nodes if n not in targets)

    def condition(self, poi_id: str) -> UnlockCondition:
        return self.conditions.get(poi_id, _NO_CONDITION)


_NO_CONDITION = UnlockCondition()


@dataclass(frozen=True)
class Finding:
    kind: str
    detail: str
    nodes: tuple[str, ...] = ()


@dataclass
class ValidationReport:
    errors: list[Finding] = field(default_factory=list)
    warnings: list[Finding] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def error_kinds(self) -> set[str]:
        return {f.kind for f in self.errors}

    def summary(self) -> str:
        parts = [f"{f.kind}: {f.detail}" for f in self.errors + self.warnings]
        return "; ".join(parts) if parts else "ok"


def validate_template(template: JourneyTemplate) -> ValidationReport:
    """Check graph-level invariants; field-level ones fail at construction.

    Errors: duplicate-id, dangling-edge, cycle (with witness), no-entry.
    Warnings: unreachable-node.
    """
    report = ValidationReport()

    for key, poi in template.nodes.items():
        if key != poi.id:
            report.errors.append(
                Finding("duplicate-id", f"node keyed {key!r} carries id {poi.id!r}", (key, poi.id))
            )

    for a, b in sorted(template.edges):
        missing = [n for n in (a, b) if n not in template.nodes]
        if missing:
            report.errors.append(
                Finding("dangling-edge", f"edge ({a}, {b}) references unknown node(s) {missing}", (a, b))
            )

    real_edges = [(a, b) for a, b in template.edges if a in template.nodes and b in template.nodes]
    witness = _find_cycle(template.nodes.keys(), real_edges)
    if witness:
        report.errors.append(
            Finding("cycle", "prerequisite cycle " + " -> ".join(witness), tuple(witness))
        )

    entries = [n for n in template.nodes if all(b != n for _, b in real_edges)]
    if not entries:
        report.errors.append(Finding("no-entry", "every node has a prerequisite"))
    elif witness is None:
        reachable = _reachable_from(entries, real_edges)
        for n in sorted(template.nodes):
            if n not in reachable:
                report.warnings.append(Finding("unreachable-node", f"{n} unreachable from entry nodes", (n,)))

    return report


def _find_cycle(nodes: Iterable[str], edges: list[tuple[str, str]]) -> list[str] | None:
    """Iterative DFS; returns one witness sequence n0 -> ... -> n0 if cyclic."""
    out: dict[str, list[str]] = {n: [] for n in nodes}
    for a, b in sorted(edges):
        out[a].append(b)
    color: dict[str, int] = {}  # 0 in progress, 1 done
    for start in sorted(out):
        if start in color:
            continue
        stack: list[tuple[str, Iterator[str]]] = [(start, iter(out[start]))]
        color[start] = 0
        path = [start]
        while stack:
            node, it = stack[-1]
            advanced = False
            for nxt in it:
                if color.get(nxt) == 0:
                    return path[path.index(nxt):] + [nxt]
                if nxt not in color:
                    color[nxt] = 0
                    path.append(nxt)
                    stack.append((nxt, iter(out[nxt])))
                    advanced = True
                    break
            if not advanced:
                color[node] = 1
                path.pop()
                stack.pop()
    return None


def _reachable_from(entries: list[str], edges: list[tuple[str, str]]) -> set[str]:
    out: dict[str, list[str]] = {}
    for a, b in edges:
        out.setdefault(a, []).append(b)
    seen = set(entries)
    queue = list(entries)
    while queue:
        n = queue.pop()
        for nxt in out.get(n, ()):
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return seen


class ProgressKind(str, Enum):
    POI_VISITED = "poi_visited"
    CHALLENGE_COMPLETED = "challenge_completed"
    UNLOCK_OVERRIDE = "unlock_override"


@dataclass(frozen=True)
class ProgressEvent:
    kind: ProgressKind
    poi_id: str
    seq: int


@dataclass(frozen=True)
class JourneyState:
    user_id: str
    template_id: str
    node_status: dict[str, NodeStatus]
    overrides: frozenset[str] = frozenset()
    applied_seq: int = 0

    def status_of(self, poi_id: str) -> NodeStatus:
        return self.node_status[poi_id]

    def is_complete(self) -> bool:
        return all(s is NodeStatus.COMPLETED for s in self.node_status.values())


def instantiate(template: JourneyTemplate, user_id: str) -> JourneyState:
    """Fresh state: entry nodes unlock when their gate passes a zero status."""
    report = validate_template(template)
    if not report.ok:
        raise InvalidTemplateError(report)
    status = {n: NodeStatus.LOCKED for n in template.nodes}
    _recompute_unlocks(template, status, frozenset(), ZERO_GATE)
    return JourneyState(user_id=user_id, template_id=template.id, node_status=status)


def _recompute_unlocks(
    template: JourneyTemplate,
    node_status: dict[str, NodeStatus],
    overrides: frozenset[str],
    gate: GateSnapshot,
) -> list[str]:
    """Unlock every locked node whose parents are all completed and whose
    condition holds; cascades until a fixed point. Returns newly unlocked ids."""
    unlocked: list[str] = []
    changed = True
    while changed:
        changed = False
        for n in sorted(template.nodes):
            if node_status[n] is not NodeStatus.LOCKED:
                continue
            parents = template.parents(n)
            if all(node_status[p] is NodeStatus.COMPLETED for p in parents) and template.condition(n).passes(gate):
                node_status[n] = NodeStatus.UNLOCKED
                unlocked.append(n)
                changed = True
    return unlocked


def apply_progress(
    template: JourneyTemplate,
    state: JourneyState,
    event: ProgressEvent,
    gate: GateSnapshot,
) -> tuple[JourneyState, list[str]]:
    """Apply one progress event; returns (new state, newly unlocked poi ids).

    Transitions are forward-only and idempotent at-or-beyond the target
    status; an event that would require moving a node backwards (or acting
    on a locked node) raises IllegalTransitionError and leaves the caller's
    state untouched.
    """
    if event.poi_id not in template.nodes:
        raise UnknownPoiError(f"poi {event.poi_id!r} not in template {template.id!r}")
    if event.seq <= state.applied_seq:
        raise StaleEventError(f"event seq {event.seq} <= applied seq {state.applied_seq}")

    node_status = dict(state.node_status)
    overrides = state.overrides
    current = node_status[event.poi_id]
    poi = template.nodes[event.poi_id]

    if event.kind is ProgressKind.UNLOCK_OVERRIDE:
        overrides = overrides | {event.poi_id}
        if current is NodeStatus.LOCKED:
            node_status[event.poi_id] = NodeStatus.UNLOCKED
    elif event.kind is ProgressKind.POI_VISITED:
        if current is NodeStatus.LOCKED:
            raise IllegalTransitionError(f"cannot visit locked poi {event.poi_id!r}")
        if current.rank < NodeStatus.VISITED.rank:
            node_status[event.poi_id] = NodeStatus.VISITED
    elif event.kind is ProgressKind.CHALLENGE_COMPLETED:
        if current is NodeStatus.LOCKED:
            raise IllegalTransitionError(f"cannot complete locked poi {event.poi_id!r}")
        if current is NodeStatus.UNLOCKED and poi.content_refs:
            raise IllegalTransitionError(
                f"poi {event.poi_id!r} has content to visit before challenge completion"
            )
        node_status[event.poi_id] = NodeStatus.COMPLETED
    else:  # pragma: no cover - enum is closed
        raise ValueError(f"unknown progress kind {event.kind}")

    newly_unlocked = _recompute_unlocks(template, node_status, overrides, gate)
    new_state = replace(state, node_status=node_status, overrides=overrides, applied_seq=event.seq)
    return new_state, newly_unlocked


def refresh_unlocks(
    template: JourneyTemplate, state: JourneyState, gate: GateSnapshot
) -> tuple[JourneyState, list[str]]:
    """Re-run gate evaluation without a node transition (points changed)."""
    node_status = dict(state.node_status)
    newly = _recompute_unlocks(template, node_status, state.overrides, gate)
    if not newly:
        return state, []
    return replace(state, node_status=node_status), newly


def frontier(state: JourneyState) -> list[str]:
    """Actionable nodes: unlocked or visited but not yet completed."""
    return sorted(
        n for n, s in state.node_status.items() if s in (NodeStatus.UNLOCKED, NodeStatus.VISITED)
    )


def replay_progress(
    template: JourneyTemplate,
    user_id: str,
    entries: Iterable[tuple[ProgressEvent, GateSnapshot]],
) -> JourneyState:
    """Rebuild a journey state from its event log (event-sourcing oracle)."""
    state = instantiate(template, user_id)
    for event, gate in entries:
        state, _ = apply_progress(template, state, event, gate)
    return state


# --- JSON (de)serialization -------------------------------------------------

def poi_to_dict(poi: PointOfInterest) -> dict:
    doc = {
        "id": poi.id,
        "name": poi.name,
        "tags": sorted(poi.tags),
        "difficulty": poi.difficulty,
        "content_refs": list(poi.content_refs),
        "challenge_refs": list(poi.challenge_refs),
    }
    if poi.geo is not None:
        doc["geo"] = {"lat": poi.geo[0], "lon": poi.geo[1]}
    return doc


def poi_from_dict(doc: dict) -> PointOfInterest:
    geo = None
    if doc.get("geo") is not None:
        geo = (float(doc["geo"]["lat"]), float(doc["geo"]["lon"]))
    return PointOfInterest(
        id=doc["id"],
        name=doc.get("name", doc["id"]),
        tags=frozenset(doc.get("tags", ())),
        difficulty=int(doc.get("difficulty", 1)),
        geo=geo,
        content_refs=tuple(doc.get("content_refs", ())),
        challenge_refs=tuple(doc.get("challenge_refs", ())),
    )


def condition_from_dict(doc: dict) -> UnlockCondition:
    mtp = doc.get("min_total_points")
    return UnlockCondition(
        min_total_points=None if mtp is None else int(mtp),
        required_badges=frozenset(doc.get("required_badges", ())),
    )


def template_to_dict(template: JourneyTemplate) -> dict:
    conditions = {}
    for poi_id, cond in sorted(template.conditions.items()):
        entry: dict = {}
        if cond.min_total_points is not None:
            entry["min_total_points"] = cond.min_total_points
        if cond.required_badges:
            entry["required_badges"] = sorted(cond.required_badges)
        conditions[poi_id] = entry
    return {
        "id": template.id,
        "nodes": [poi_to_dict(template.nodes[k]) for k in sorted(template.nodes)],
        "edges": sorted([a, b] for a, b in template.edges),
        "conditions": conditions,
    }


def load_template(doc: dict) -> tuple[JourneyTemplate, ValidationReport]:
    """Build a template from its JSON document.

    Structural graph findings (including duplicate ids in the node array,
    which a map-shaped template cannot even represent) are returned in the
    report rather than raised; malformed field values still raise ValueError.
    """
    if not SLUG_RE.match(str(doc.get("id", ""))):
        raise ValueError(f"template id {doc.get('id')!r} is not a lowercase slug")
    report = ValidationReport()
    nodes: dict[str, PointOfInterest] = {}
    for node_doc in doc.get("nodes", ()):
        poi = poi_from_dict(node_doc)
        if poi.id in nodes:
            report.errors.append(Finding("duplicate-id", f"node id {poi.id!r} defined twice", (poi.id,)))
            continue
        nodes[poi.id] = poi
    edges = frozenset((str(a), str(b)) for a, b in doc.get("edges", ()))
    conditions = {
        str(poi_id): condition_from_dict(cond_doc)
        for poi_id, cond_doc in doc.get("conditions", {}).items()
    }
    template = JourneyTemplate(id=doc["id"], nodes=nodes, edges=edges, conditions=conditions)
    structural = validate_template(template)
    report.errors.extend(structural.errors)
    report.warnings.extend(structural.warnings)
    return template, report


def state_to_dict(state: JourneyState) -> dict:
    return {
        "user_id": state.user_id,
        "template_id": state.template_id,
        "node_status": {n: s.value for n, s in sorted(state.node_status.items())},
        "overrides": sorted(state.overrides),
        "applied_seq": state.applied_seq,
    }


def state_from_dict(doc: dict) -> JourneyState:
    return JourneyState(
        user_id=doc["user_id"],
        template_id=doc["template_id"],
        node_status={n: NodeStatus(s) for n, s in doc["node_status"].items()},
        overrides=frozenset(doc.get("overrides", ())),
        applied_seq=int(doc.get("applied_seq", 0)),
    )
