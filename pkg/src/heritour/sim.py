"""Deterministic synthetic visitors driven against a running gateway.

Each visitor is one actor: it bootstraps over the socket, reacts only to
pushed envelopes (it is a reference socket consumer), and submits actions
until its journey completes or the budget runs out. Under a fixed seed the
generated action stream is byte-identical across runs, which is what makes
end-to-end runs comparable and replayable offline.
"""

from __future__ import annotations

import asyncio
import json
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from random import Random

import httpx
import websockets

from .engine import GameAction, LevelSchedule, action_from_dict
from .journey import JourneyTemplate
from .pipeline import replay_pipeline
from .rules import Rule

_SIM_NS = uuid.UUID("7c40e1de-6a0f-4c2e-9a3b-8c2f1d0e4b55")

POLICIES = ("greedy-recommendation", "random-frontier", "scripted")


@dataclass
class Scenario:
    seed: int = 1
    visitors: int = 1
    policy: str = "greedy-recommendation"
    actions_per_visitor: int = 20
    pacing_s: float = 0.0
    token_prefix: str = "tok-v"
    script: list[dict] = field(default_factory=list)

    def __post_init__(self):
        if self.policy == "greedy":  # accepted shorthand
            self.policy = "greedy-recommendation"
        if self.policy not in POLICIES:
            raise ValueError(f"policy must be one of {POLICIES}")

    @classmethod
    def from_dict(cls, doc: dict) -> "Scenario":
        return cls(
            seed=int(doc.get("seed", 1)),
            visitors=int(doc.get("visitors", 1)),
            policy=doc.get("policy", "greedy-recommendation"),
            actions_per_visitor=int(doc.get("actions_per_visitor", 20)),
            pacing_s=float(doc.get("pacing_s", 0.0)),
            token_prefix=doc.get("token_prefix", "tok-v"),
            script=list(doc.get("script", ())),
        )


class _VisitorModel:
    """Local mirror of one visitor's server state, fed only by pushes."""

    def __init__(self):
        self.status: dict = {}
        self.node_status: dict[str, str] = {}
        self.recommendation: dict | None = None
        self.complete = False

    def apply_snapshot(self, payload: dict):
        self.status = payload["status"]
        journey = payload["journey"]
        self.node_status = {n["id"]: n["status"] for n in journey["nodes"]}
        self.complete = journey["complete"]
        self.recommendation = payload.get("recommendation")

    def apply_envelope(self, env: dict):
        etype = env.get("type")
        payload = env.get("payload", {})
        if etype == "GameStatusUpdated":
            self.status = payload
        elif etype in ("PoiUnlocked", "PoiVisited", "PoiCompleted"):
            self.node_status[payload["poi_id"]] = payload["status"]
            self.complete = all(s == "completed" for s in self.node_status.values())
        elif etype == "RecommendationReady":
            self.recommendation = payload.get("recommendation")

    def frontier(self) -> list[str]:
        return sorted(n for n, s in self.node_status.items() if s in ("unlocked", "visited"))


@dataclass
class _VisitorOutcome:
    user_id: str = ""
    sent: int = 0
    errors: list[str] = field(default_factory=list)
    http_5xx: int = 0
    latencies_ms: list[float] = field(default_factory=list)
    final: dict = field(default_factory=dict)


def _action_for(model: _VisitorModel, scenario: Scenario, rng: Random, step: int) -> dict | None:
    if scenario.policy == "scripted":
        if step >= len(scenario.script):
            return None
        entry = scenario.script[step]
        return {"type": entry["type"], "payload": dict(entry.get("payload", {}))}

    if model.complete:
        return None
    frontier = model.frontier()
    if not frontier:
        return None
    if scenario.policy == "greedy-recommendation":
        rec = model.recommendation or {}
        poi = rec.get("poi_id")
        if poi not in frontier:
            poi = frontier[0]
    else:
        poi = rng.choice(frontier)
    if model.node_status[poi] == "unlocked":
        return {"type": "POI_VISITED", "payload": {"poi_id": poi}}
    return {"type": "QUIZ_COMPLETED", "payload": {"poi_id": poi, "correct": 3, "total": 3}}


async def _drive_visitor(
    client: httpx.AsyncClient, ws_base: str, token: str, scenario: Scenario, index: int
) -> _VisitorOutcome:
    outcome = _VisitorOutcome()
    rng = Random(scenario.seed * 100003 + index)
    model = _VisitorModel()

    async with websockets.connect(f"{ws_base}/ws/v1/stream?token={token}") as ws:
        await ws.send(json.dumps({"last_seq": None}))
        snapshot = json.loads(await asyncio.wait_for(ws.recv(), 10))
        model.apply_snapshot(snapshot["payload"])
        user_id = snapshot["user_id"]
        outcome.user_id = user_id
        seq = model.status.get("applied_seq", 0)

        for step in range(scenario.actions_per_visitor):
            sketch = _action_for(model, scenario, rng, step)
            if sketch is None:
                break
            seq += 1
            action = {
                "action_id": str(uuid.uuid5(_SIM_NS, f"{scenario.seed}:{index}:{step}")),
                "type": sketch["type"],
                "payload": sketch["payload"],
                "seq": seq,
                "client_timestamp": f"2026-01-01T00:{step // 60:02d}:{step % 60:02d}+00:00",
            }
            started = time.perf_counter()
            response = await client.post(
                "/api/v1/actions", json=action, headers={"Authorization": f"Bearer {token}"}
            )
            outcome.sent += 1
            if response.status_code >= 500:
                outcome.http_5xx += 1
                outcome.errors.append(f"{user_id} step {step}: HTTP {response.status_code}")
                seq -= 1
                continue
            if response.status_code != 200:
                outcome.errors.append(
                    f"{user_id} step {step}: HTTP {response.status_code} {response.text[:120]}"
                )
                seq -= 1
                continue

            # consume pushes up to this action's recommendation; the status
            # update always precedes it on the same per-user stream
            got_status = False
            try:
                while True:
                    env = json.loads(await asyncio.wait_for(ws.recv(), 10))
                    model.apply_envelope(env)
                    if (
                        env.get("type") == "GameStatusUpdated"
                        and env["payload"].get("applied_seq") == seq
                    ):
                        outcome.latencies_ms.append((time.perf_counter() - started) * 1000.0)
                        got_status = True
                    if (
                        env.get("type") == "RecommendationReady"
                        and env["payload"].get("for_action") == action["action_id"]
                    ):
                        break
            except asyncio.TimeoutError:
                outcome.errors.append(f"{user_id} step {step}: push timeout")
            if not got_status:
                outcome.errors.append(f"{user_id} step {step}: no status push")
            if scenario.pacing_s:
                await asyncio.sleep(scenario.pacing_s)

    response = await client.get(
        f"/api/v1/users/{user_id}/status", headers={"Authorization": f"Bearer {token}"}
    )
    response.raise_for_status()
    outcome.final = response.json()
    return outcome


def _percentile(values: list[float], q: float) -> float:
    if not values:
        return 0.0
    ordered = sorted(values)
    pos = min(len(ordered) - 1, round(q * (len(ordered) - 1)))
    return ordered[int(pos)]


async def run_async(scenario: Scenario, target: str) -> dict:
    ws_base = target.replace("http://", "ws://").replace("https://", "wss://")
    started = time.perf_counter()
    async with httpx.AsyncClient(base_url=target, timeout=30.0) as client:
        tasks = [
            _drive_visitor(client, ws_base, f"{scenario.token_prefix}{i:03d}", scenario, i)
            for i in range(1, scenario.visitors + 1)
        ]
        outcomes = await asyncio.gather(*tasks)
    duration = time.perf_counter() - started

    latencies = [ms for o in outcomes for ms in o.latencies_ms]
    report = {
        "scenario": {
            "seed": scenario.seed,
            "visitors": scenario.visitors,
            "policy": scenario.policy,
            "actions_per_visitor": scenario.actions_per_visitor,
        },
        "actions_sent": sum(o.sent for o in outcomes),
        "errors": [e for o in outcomes for e in o.errors],
        "http_5xx": sum(o.http_5xx for o in outcomes),
        "latency_ms": {
            "p50": _percentile(latencies, 0.50),
            "p95": _percentile(latencies, 0.95),
            "p99": _percentile(latencies, 0.99),
        },
        "duration_s": duration,
        "visitors": {
            o.user_id: {
                "digest": o.final.get("digest"),
                "total_points": o.final.get("total_points"),
                "level": o.final.get("level"),
                "applied_seq": o.final.get("applied_seq"),
            }
            for o in outcomes
        },
    }
    return report


def run(scenario: Scenario, target: str, out: Path | None = None) -> dict:
    """Run the scenario against `target`; optionally write the JSON report."""
    report = asyncio.run(run_async(scenario, target))
    if out is not None:
        Path(out).write_text(json.dumps(report, indent=2, sort_keys=True), encoding="utf-8")
    return report


def load_action_log(path: Path) -> dict[str, list[GameAction]]:
    """Group a persisted action log by user, preserving order."""
    per_user: dict[str, list[GameAction]] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            action = action_from_dict(json.loads(line))
            per_user.setdefault(action.user_id, []).append(action)
    return per_user


def verify_report_against_log(
    report: dict,
    actions_path: Path,
    rules: list[Rule],
    template: JourneyTemplate,
    schedule: LevelSchedule,
) -> list[str]:
    """Offline oracle: replaying the server's action log must reproduce every
    visitor's final status digest from the report."""
    from .engine import status_digest

    problems = []
    per_user = load_action_log(actions_path)
    for user_id, expected in report["visitors"].items():
        actions = per_user.get(user_id, [])
        status, _ = replay_pipeline(actions, rules, template, schedule, user_id=user_id)
        if status_digest(status) != expected["digest"]:
            problems.append(f"{user_id}: replay digest mismatch")
        if status.applied_seq != expected["applied_seq"]:
            problems.append(f"{user_id}: applied_seq {status.applied_seq} != {expected['applied_seq']}")
    return problems
