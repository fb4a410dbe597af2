"""Shared fixtures: random model generators and independent oracles.

The oracles here deliberately re-derive results by brute force (DFS/BFS,
exhaustive path enumeration, a chord-based great-circle formula) so they
share no code with the implementations they check.
"""

from __future__ import annotations

import math
from random import Random

import pytest

from heritour.journey import (
    JourneyState,
    JourneyTemplate,
    NodeStatus,
    PointOfInterest,
    UnlockCondition,
)

TAG_POOL = ["roman", "mosaic", "gardens", "ritual", "engineering", "daily-life"]
BADGE_POOL = ["b-one", "b-two", "b-three"]


def random_dag(rng: Random, max_nodes: int = 10, conditions: bool = True) -> JourneyTemplate:
    """Random DAG over a random topological order; edges only point forward."""
    n = rng.randint(1, max_nodes)
    names = [f"n{i}" for i in range(n)]
    rng.shuffle(names)
    edges = set()
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < 0.3:
                edges.add((names[i], names[j]))
    nodes = {}
    for name in names:
        nodes[name] = PointOfInterest(
            id=name,
            name=name.upper(),
            tags=frozenset(rng.sample(TAG_POOL, rng.randint(0, 3))),
            difficulty=rng.randint(1, 5),
            content_refs=("c-" + name,) if rng.random() < 0.7 else (),
            challenge_refs=("q-" + name,),
        )
    conds = {}
    if conditions:
        for name in names:
            if rng.random() < 0.25:
                conds[name] = UnlockCondition(
                    min_total_points=rng.choice([None, 0, 10, 40, 100]),
                    required_badges=frozenset(
                        rng.sample(BADGE_POOL, rng.randint(0, 1))
                    ),
                )
    return JourneyTemplate(id="t-rand", nodes=nodes, edges=frozenset(edges), conditions=conds)


# --- journey oracles ---------------------------------------------------------


def oracle_has_cycle(nodes: set[str], edges: set[tuple[str, str]]) -> bool:
    """Kahn's algorithm: a DAG empties completely."""
    indeg = {n: 0 for n in nodes}
    for a, b in edges:
        if a in nodes and b in nodes:
            indeg[b] += 1
    queue = [n for n, d in indeg.items() if d == 0]
    seen = 0
    while queue:
        node = queue.pop()
        seen += 1
        for a, b in edges:
            if a == node and b in indeg:
                indeg[b] -= 1
                if indeg[b] == 0:
                    queue.append(b)
    return seen != len(nodes)


def oracle_reachable(nodes: set[str], edges: set[tuple[str, str]]) -> set[str]:
    entries = {n for n in nodes if all(b != n for _, b in edges)}
    seen = set(entries)
    frontier = list(entries)
    while frontier:
        node = frontier.pop()
        for a, b in edges:
            if a == node and b not in seen:
                seen.add(b)
                frontier.append(b)
    return seen


def oracle_frontier(state: JourneyState) -> list[str]:
    return sorted(
        n
        for n, s in state.node_status.items()
        if s in (NodeStatus.UNLOCKED, NodeStatus.VISITED)
    )


def check_unlock_soundness(template: JourneyTemplate, state: JourneyState) -> list[str]:
    """Nodes at unlocked-or-beyond (not overridden) need all parents completed."""
    violations = []
    for node, status in state.node_status.items():
        if status is NodeStatus.LOCKED or node in state.overrides:
            continue
        for parent in template.parents(node):
            if state.node_status[parent] is not NodeStatus.COMPLETED:
                violations.append(f"{node} is {status.value} but parent {parent} incomplete")
    return violations


# --- geometry oracle ---------------------------------------------------------

EARTH_R = 6_371_000.0


def haversine_oracle_m(lat1: float, lon1: float, lat2: float, lon2: float) -> float:
    """Chord-length formulation: unit vectors, chord, central angle."""
    def unit(lat, lon):
        la, lo = math.radians(lat), math.radians(lon)
        return (
            math.cos(la) * math.cos(lo),
            math.cos(la) * math.sin(lo),
            math.sin(la),
        )

    ax, ay, az = unit(lat1, lon1)
    bx, by, bz = unit(lat2, lon2)
    chord = math.sqrt((ax - bx) ** 2 + (ay - by) ** 2 + (az - bz) ** 2)
    return EARTH_R * 2.0 * math.asin(min(1.0, chord / 2.0))


# --- path enumeration oracle --------------------------------------------------


def enumerate_shortest(
    waypoints: list[str], edges: list[tuple[str, str, float]], start: str, goal: str
) -> tuple[list[str], float] | None:
    """All simple paths, then min by (total, waypoint sequence)."""
    adjacency: dict[str, list[tuple[str, float]]] = {w: [] for w in waypoints}
    for a, b, length in edges:
        adjacency[a].append((b, length))
        adjacency[b].append((a, length))

    best: tuple[float, tuple[str, ...]] | None = None

    def walk(node: str, path: tuple[str, ...], total: float):
        nonlocal best
        if node == goal:
            key = (total, path)
            if best is None or key < best:
                best = key
            return
        for nxt, length in adjacency[node]:
            if nxt not in path:
                walk(nxt, path + (nxt,), total + length)

    walk(start, (start,), 0.0)
    if best is None:
        return None
    return list(best[1]), best[0]


# --- random rules and actions over a fixed fuzz schema ------------------------

FUZZ_SCHEMAS = {
    "ALPHA": {"x": "int", "flag": "bool", "label": "string"},
    "BETA": {"x": "int", "y": "int"},
    "GAMMA": {"label": "string"},
}


def random_typed_expr(rng: Random, want: str, depth: int):
    from heritour.rules import (
        BinOp, BoolLit, IntLit, Not, PayloadField, PlayerHasBadge,
        PlayerLevel, PlayerPoints, PoiVisitedRef, StrLit,
    )

    if depth <= 0 or rng.random() < 0.3:
        if want == "int":
            return rng.choice(
                [IntLit(rng.randint(0, 50)), PayloadField("x"),
                 PlayerPoints(rng.choice(["a", "b"])), PlayerLevel()]
            )
        if want == "bool":
            return rng.choice(
                [BoolLit(rng.random() < 0.5), PlayerHasBadge("B"), PoiVisitedRef("p")]
            )
        return rng.choice([StrLit("s1"), StrLit("s2"), PayloadField("label")])
    if want == "int":
        return BinOp(rng.choice(["+", "-", "*"]),
                     random_typed_expr(rng, "int", depth - 1),
                     random_typed_expr(rng, "int", depth - 1))
    if want == "bool":
        kind = rng.randrange(4)
        if kind == 0:
            return Not(random_typed_expr(rng, "bool", depth - 1))
        if kind == 1:
            return BinOp(rng.choice(["and", "or"]),
                         random_typed_expr(rng, "bool", depth - 1),
                         random_typed_expr(rng, "bool", depth - 1))
        if kind == 2:
            return BinOp(rng.choice(["<", "<=", ">", ">=", "==", "!="]),
                         random_typed_expr(rng, "int", depth - 1),
                         random_typed_expr(rng, "int", depth - 1))
        same = rng.choice(["bool", "string"])
        return BinOp(rng.choice(["==", "!="]),
                     random_typed_expr(rng, same, depth - 1),
                     random_typed_expr(rng, same, depth - 1))
    return rng.choice([StrLit("s1"), PayloadField("label")])


def _fields_for(trigger: str, want: str) -> list[str]:
    return [f for f, t in FUZZ_SCHEMAS[trigger].items() if t == want]


def random_ruleset(rng: Random, max_rules: int = 10):
    """Rules typed against FUZZ_SCHEMAS; payload atoms restricted per trigger."""
    from heritour.rules import (
        AwardBadge, AwardPoints, CompleteChallenge, Rule, UnlockPoi, typecheck,
    )

    rules = []
    for i in range(rng.randint(1, max_rules)):
        trigger = rng.choice(sorted(FUZZ_SCHEMAS))
        condition = (
            random_typed_expr(rng, "bool", rng.randint(1, 3))
            if rng.random() < 0.8 else None
        )
        effects = tuple(
            rng.choice(
                [
                    AwardPoints(rng.randint(1, 60), rng.choice(["a", "b", "general"])),
                    AwardBadge(rng.choice(["B", "C", "D"])),
                    UnlockPoi(rng.choice(["p", "q"])),
                    CompleteChallenge(rng.choice(["q-1", "q-2"])),
                ]
            )
            for _ in range(rng.randint(1, 3))
        )
        rules.append(Rule(name=f"r-{i:02d}", trigger=trigger, condition=condition, effects=effects))
    # payload fields in conditions may not exist for the trigger; drop ill-typed rules
    good = [r for r in rules if not typecheck([r], FUZZ_SCHEMAS)]
    return good or random_ruleset(rng, max_rules)


def random_engine_action(rng: Random, user_id: str, seq: int):
    from heritour.engine import GameAction

    trigger = rng.choice(sorted(FUZZ_SCHEMAS))
    payload = {}
    for field_name, type_name in FUZZ_SCHEMAS[trigger].items():
        if type_name == "int":
            payload[field_name] = rng.randint(-3, 60)
        elif type_name == "bool":
            payload[field_name] = rng.random() < 0.5
        else:
            payload[field_name] = rng.choice(["s1", "s2", "zz"])
    return GameAction(
        action_id=f"{user_id}-a{seq}",
        user_id=user_id,
        type=trigger,
        payload=payload,
        client_timestamp="2026-01-01T00:00:00+00:00",
        seq=seq,
    )


@pytest.fixture
def rng() -> Random:
    return Random(0xC0FFEE)


@pytest.fixture(scope="session")
def demo_site(tmp_path_factory):
    from heritour.demo import create_demo_site
    from heritour.gateway.config import load_config

    root = tmp_path_factory.mktemp("demo-site")
    config_path = create_demo_site(root, visitors=4)
    return load_config(config_path)
