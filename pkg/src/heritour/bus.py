"""In-process publish/subscribe with a durable append-only envelope log.

Delivery contract: at-least-once per matching subscription, ascending
user_seq per user; consumers deduplicate by event_id. The interface is
broker-shaped on purpose so an external queue could replace this module
without touching producers or consumers. Per-user sequence numbers are
allocated here and validated gapless at publish; replaying the log on
startup restores them, along with the cursors of durable subscriptions.
"""

from __future__ import annotations

import json
import os
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .errors import MalformedEnvelopeError, UnknownEventError

GLOBAL_USER = "-"


@dataclass(frozen=True)
class EventEnvelope:
    event_id: str
    user_id: str  # "-" for global events
    topic: str  # dotted, e.g. game.status
    type: str
    payload: dict
    user_seq: int
    emitted_at: str = ""

    def to_dict(self) -> dict:
        return {
            "event_id": self.event_id,
            "user_id": self.user_id,
            "topic": self.topic,
            "type": self.type,
            "payload": self.payload,
            "user_seq": self.user_seq,
            "emitted_at": self.emitted_at,
        }


def envelope_from_dict(doc: dict) -> EventEnvelope:
    return EventEnvelope(
        event_id=doc["event_id"],
        user_id=doc["user_id"],
        topic=doc["topic"],
        type=doc["type"],
        payload=doc.get("payload", {}),
        user_seq=int(doc["user_seq"]),
        emitted_at=doc.get("emitted_at", ""),
    )


def topic_matches(pattern: str, topic: str) -> bool:
    """Exact match, prefix pattern ("game.*"), or the catch-all "*"."""
    if pattern == "*":
        return True
    if pattern.endswith(".*"):
        return topic.startswith(pattern[:-1])
    return topic == pattern


@dataclass
class Subscription:
    sub_id: str
    pattern: str
    durable: bool = False
    # highest contiguously acked seq per user, plus out-of-order acks above it
    cursor: dict[str, int] = field(default_factory=dict)
    acked_above: dict[str, set[int]] = field(default_factory=dict)
    delivered: set[str] = field(default_factory=set)

    def is_acked(self, envelope: EventEnvelope) -> bool:
        user = envelope.user_id
        if envelope.user_seq <= self.cursor.get(user, 0):
            return True
        return envelope.user_seq in self.acked_above.get(user, ())

    def mark_acked(self, envelope: EventEnvelope) -> None:
        user = envelope.user_id
        above = self.acked_above.setdefault(user, set())
        above.add(envelope.user_seq)
        cursor = self.cursor.get(user, 0)
        while cursor + 1 in above:
            cursor += 1
            above.discard(cursor)
        self.cursor[user] = cursor


class EventBus:
    """Thread-safe bus; `log_path=None` keeps the log in memory only."""

    def __init__(self, log_path: Path | None = None, ack_path: Path | None = None, fsync: bool = False):
        self.log_path = log_path
        self.ack_path = ack_path
        self.fsync = fsync
        self._lock = threading.RLock()
        self._log: list[EventEnvelope] = []
        self._by_id: dict[str, EventEnvelope] = {}
        self._last_seq: dict[str, int] = {}
        self._subs: dict[str, Subscription] = {}
        self._stored_acks: dict[str, set[str]] = {}  # durable sub -> acked event ids
        self._log_file = None
        self._ack_file = None
        if log_path is not None:
            log_path.parent.mkdir(parents=True, exist_ok=True)
            self._replay_log()
            self._log_file = open(log_path, "a", encoding="utf-8")
        if ack_path is not None:
            ack_path.parent.mkdir(parents=True, exist_ok=True)
            self._replay_acks()
            self._ack_file = open(ack_path, "a", encoding="utf-8")

    # --- producers -------------------------------------------------------

    def allocate_seq(self, user_id: str) -> int:
        with self._lock:
            return self._last_seq.get(user_id, 0) + 1

    def publish(self, envelope: EventEnvelope) -> str:
        """Append the envelope durably; returns "accepted" or "duplicate"."""
        self._check_shape(envelope)
        with self._lock:
            if envelope.event_id in self._by_id:
                return "duplicate"
            expected = self._last_seq.get(envelope.user_id, 0) + 1
            if envelope.user_seq != expected:
                raise MalformedEnvelopeError(
                    f"user {envelope.user_id}: seq {envelope.user_seq}, expected {expected}"
                )
            if not envelope.emitted_at:
                envelope = EventEnvelope(
                    **{**envelope.to_dict(), "emitted_at": datetime.now(timezone.utc).isoformat()}
                )
            self._append(envelope)
            return "accepted"

    def _check_shape(self, envelope: EventEnvelope) -> None:
        if not envelope.event_id or not envelope.topic or not envelope.type:
            raise MalformedEnvelopeError("event_id, topic and type are required")
        if not envelope.user_id:
            raise MalformedEnvelopeError("user_id required ('-' for global events)")
        if envelope.user_seq < 1:
            raise MalformedEnvelopeError("user_seq must be a positive integer")
        if not isinstance(envelope.payload, dict):
            raise MalformedEnvelopeError("payload must be a JSON object")

    def _append(self, envelope: EventEnvelope) -> None:
        self._log.append(envelope)
        self._by_id[envelope.event_id] = envelope
        self._last_seq[envelope.user_id] = envelope.user_seq
        if self._log_file is not None:
            self._log_file.write(json.dumps(envelope.to_dict(), separators=(",", ":")) + "\n")
            self._log_file.flush()
            if self.fsync:
                os.fsync(self._log_file.fileno())

    # --- consumers -------------------------------------------------------

    def subscribe(self, pattern: str, sub_id: str | None = None, durable: bool = False) -> Subscription:
        with self._lock:
            if sub_id is None:
                sub_id = f"sub-{len(self._subs) + 1}"
            if sub_id in self._subs:
                return self._subs[sub_id]
            sub = Subscription(sub_id=sub_id, pattern=pattern, durable=durable)
            if durable:
                for event_id in self._stored_acks.get(sub_id, ()):
                    envelope = self._by_id.get(event_id)
                    if envelope is not None:
                        sub.mark_acked(envelope)
            self._subs[sub_id] = sub
            return sub

    def deliver(self, sub: Subscription, max_batch: int = 100) -> list[EventEnvelope]:
        """Next batch: every matching, not-yet-acked envelope in log order
        (per-user seq ascending); unacked envelopes keep being redelivered."""
        with self._lock:
            batch: list[EventEnvelope] = []
            for envelope in self._log:
                if len(batch) >= max_batch:
                    break
                if not topic_matches(sub.pattern, envelope.topic):
                    continue
                if sub.is_acked(envelope):
                    continue
                sub.delivered.add(envelope.event_id)
                batch.append(envelope)
            return batch

    def ack(self, sub: Subscription, event_id: str) -> None:
        with self._lock:
            envelope = self._by_id.get(event_id)
            if envelope is None:
                raise UnknownEventError(f"unknown event {event_id!r}")
            if sub.is_acked(envelope):
                return  # double ack is a no-op
            if event_id not in sub.delivered:
                raise UnknownEventError(f"event {event_id!r} was never delivered to {sub.sub_id!r}")
            sub.mark_acked(envelope)
            sub.delivered.discard(event_id)
            if sub.durable and self._ack_file is not None:
                self._ack_file.write(
                    json.dumps({"sub": sub.sub_id, "event_id": event_id}, separators=(",", ":")) + "\n"
                )
                self._ack_file.flush()

    # --- reads -----------------------------------------------------------

    def read_user(self, user_id: str, after_seq: int = 0) -> list[EventEnvelope]:
        """All envelopes of one user with user_seq > after_seq, in order."""
        with self._lock:
            return [e for e in self._log if e.user_id == user_id and e.user_seq > after_seq]

    def last_seq(self, user_id: str) -> int:
        with self._lock:
            return self._last_seq.get(user_id, 0)

    def all_envelopes(self) -> list[EventEnvelope]:
        with self._lock:
            return list(self._log)

    # --- startup recovery -------------------------------------------------

    def _replay_log(self) -> None:
        if not self.log_path.exists():
            return
        with open(self.log_path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                envelope = envelope_from_dict(json.loads(line))
                self._log.append(envelope)
                self._by_id[envelope.event_id] = envelope
                self._last_seq[envelope.user_id] = envelope.user_seq

    def _replay_acks(self) -> None:
        if not self.ack_path.exists():
            return
        with open(self.ack_path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                doc = json.loads(line)
                self._stored_acks.setdefault(doc["sub"], set()).add(doc["event_id"])

    def close(self) -> None:
        with self._lock:
            if self._log_file is not None:
                self._log_file.close()
                self._log_file = None
            if self._ack_file is not None:
                self._ack_file.close()
                self._ack_file = None
