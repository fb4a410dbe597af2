"""Expert-validated, version-controlled educational content.

Drafts (generated or curated) move Draft -> InReview -> Approved/Rejected;
only approved drafts can be published, and only published versions are ever
served. Versions and review records are append-only.
"""

from __future__ import annotations

import json
import threading
import uuid
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Callable

from .errors import (
    AlreadyFinalizedError,
    AlreadyPublishedError,
    EmptyBodyError,
    NotApprovedError,
    UnknownDraftError,
    UnknownPoiError,
)


class ContentStatus(str, Enum):
    DRAFT = "draft"
    IN_REVIEW = "in_review"
    APPROVED = "approved"
    REJECTED = "rejected"


SOURCES = ("generated", "curated")


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass(frozen=True)
class ContentDraft:
    draft_id: str
    poi_id: str
    body: str
    source: str
    status: ContentStatus
    created_at: str


@dataclass(frozen=True)
class ValidationRecord:
    record_id: str
    draft_id: str
    reviewer_id: str
    verdict: str  # approve | reject
    feedback: str
    timestamp: str


@dataclass(frozen=True)
class ContentVersion:
    poi_id: str
    version: int
    body: str
    approved_from: str
    published_at: str


class ContentStore:
    """Document store: one JSON file per draft, review record and version.

    `root=None` keeps everything in memory (tests). `poi_exists` guards
    submissions against unknown POIs; omit it to accept any id.
    """

    def __init__(self, root: Path | None = None, poi_exists: Callable[[str], bool] | None = None):
        self.root = root
        self.poi_exists = poi_exists
        self.drafts: dict[str, ContentDraft] = {}
        self.records: list[ValidationRecord] = []
        self.versions: dict[str, list[ContentVersion]] = {}
        self.published_from: set[str] = set()  # draft ids already published
        self._lock = threading.Lock()
        if root is not None:
            for sub in ("drafts", "reviews", "versions"):
                (root / sub).mkdir(parents=True, exist_ok=True)
            self._load()

    # --- operations ----------------------------------------------------

    def submit_draft(self, poi_id: str, body: str, source: str = "curated") -> ContentDraft:
        if source not in SOURCES:
            raise ValueError(f"source must be one of {SOURCES}")
        if self.poi_exists is not None and not self.poi_exists(poi_id):
            raise UnknownPoiError(f"unknown poi {poi_id!r}")
        if not body.strip():
            raise EmptyBodyError("draft body must be non-empty")
        with self._lock:
            draft = ContentDraft(
                draft_id=uuid.uuid4().hex,
                poi_id=poi_id,
                body=body,
                source=source,
                status=ContentStatus.DRAFT,
                created_at=_now(),
            )
            self.drafts[draft.draft_id] = draft
            self._write_draft(draft)
            return draft

    def begin_review(self, draft_id: str) -> ContentDraft:
        with self._lock:
            draft = self._get(draft_id)
            if draft.status not in (ContentStatus.DRAFT, ContentStatus.IN_REVIEW):
                raise AlreadyFinalizedError(f"draft {draft_id} already {draft.status.value}")
            draft = replace(draft, status=ContentStatus.IN_REVIEW)
            self.drafts[draft_id] = draft
            self._write_draft(draft)
            return draft

    def review(self, draft_id: str, reviewer_id: str, verdict: str, feedback: str = "") -> ValidationRecord:
        if verdict not in ("approve", "reject"):
            raise ValueError("verdict must be 'approve' or 'reject'")
        with self._lock:
            draft = self._get(draft_id)
            if draft.status not in (ContentStatus.DRAFT, ContentStatus.IN_REVIEW):
                raise AlreadyFinalizedError(f"draft {draft_id} already {draft.status.value}")
            record = ValidationRecord(
                record_id=uuid.uuid4().hex,
                draft_id=draft_id,
                reviewer_id=reviewer_id,
                verdict=verdict,
                feedback=feedback,
                timestamp=_now(),
            )
            self.records.append(record)
            new_status = ContentStatus.APPROVED if verdict == "approve" else ContentStatus.REJECTED
            draft = replace(draft, status=new_status)
            self.drafts[draft_id] = draft
            self._write_draft(draft)
            self._write_record(record)
            return record

    def publish(self, draft_id: str) -> ContentVersion:
        with self._lock:
            draft = self._get(draft_id)
            if draft.status is not ContentStatus.APPROVED:
                raise NotApprovedError(f"draft {draft_id} is {draft.status.value}, not approved")
            if draft_id in self.published_from:
                raise AlreadyPublishedError(f"draft {draft_id} already published")
            existing = self.versions.setdefault(draft.poi_id, [])
            version = ContentVersion(
                poi_id=draft.poi_id,
                version=len(existing) + 1,
                body=draft.body,
                approved_from=draft_id,
                published_at=_now(),
            )
            existing.append(version)
            self.published_from.add(draft_id)
            self._write_version(version)
            return version

    def fetch_published(self, poi_id: str) -> ContentVersion | None:
        versions = self.versions.get(poi_id)
        return versions[-1] if versions else None

    def versions_of(self, poi_id: str) -> list[ContentVersion]:
        return list(self.versions.get(poi_id, ()))

    def records_for(self, draft_id: str) -> list[ValidationRecord]:
        return [r for r in self.records if r.draft_id == draft_id]

    def audit(self) -> list[str]:
        """Visibility-safety scan: every published version must trace back
        to an approved draft with at least one approve record."""
        problems = []
        for poi_id, versions in self.versions.items():
            expected = list(range(1, len(versions) + 1))
            if [v.version for v in versions] != expected:
                problems.append(f"{poi_id}: version numbers {[v.version for v in versions]} not gapless")
            for v in versions:
                draft = self.drafts.get(v.approved_from)
                if draft is None:
                    problems.append(f"{poi_id} v{v.version}: source draft missing")
                    continue
                if draft.status is not ContentStatus.APPROVED:
                    problems.append(f"{poi_id} v{v.version}: source draft not approved")
                if not any(r.verdict == "approve" for r in self.records_for(v.approved_from)):
                    problems.append(f"{poi_id} v{v.version}: no approve record")
        return problems

    # --- persistence ----------------------------------------------------

    def _get(self, draft_id: str) -> ContentDraft:
        draft = self.drafts.get(draft_id)
        if draft is None:
            raise UnknownDraftError(f"unknown draft {draft_id!r}")
        return draft

    def _write_draft(self, draft: ContentDraft):
        if self.root is None:
            return
        path = self.root / "drafts" / f"{draft.draft_id}.json"
        path.write_text(json.dumps(draft_to_dict(draft), indent=2), encoding="utf-8")

    def _write_record(self, record: ValidationRecord):
        if self.root is None:
            return
        path = self.root / "reviews" / f"{record.record_id}.json"
        path.write_text(json.dumps(record_to_dict(record), indent=2), encoding="utf-8")

    def _write_version(self, version: ContentVersion):
        if self.root is None:
            return
        path = self.root / "versions" / f"{version.poi_id}__v{version.version}.json"
        path.write_text(json.dumps(version_to_dict(version), indent=2), encoding="utf-8")

    def _load(self):
        for path in sorted((self.root / "drafts").glob("*.json")):
            draft = draft_from_dict(json.loads(path.read_text(encoding="utf-8")))
            self.drafts[draft.draft_id] = draft
        loaded_records = []
        for path in (self.root / "reviews").glob("*.json"):
            loaded_records.append(record_from_dict(json.loads(path.read_text(encoding="utf-8"))))
        self.records = sorted(loaded_records, key=lambda r: (r.timestamp, r.record_id))
        per_poi: dict[str, list[ContentVersion]] = {}
        for path in (self.root / "versions").glob("*.json"):
            version = version_from_dict(json.loads(path.read_text(encoding="utf-8")))
            per_poi.setdefault(version.poi_id, []).append(version)
        for poi_id, versions in per_poi.items():
            self.versions[poi_id] = sorted(versions, key=lambda v: v.version)
            self.published_from.update(v.approved_from for v in versions)


def draft_to_dict(d: ContentDraft) -> dict:
    return {
        "draft_id": d.draft_id, "poi_id": d.poi_id, "body": d.body,
        "source": d.source, "status": d.status.value, "created_at": d.created_at,
    }


def draft_from_dict(doc: dict) -> ContentDraft:
    return ContentDraft(
        draft_id=doc["draft_id"], poi_id=doc["poi_id"], body=doc["body"],
        source=doc.get("source", "curated"), status=ContentStatus(doc["status"]),
        created_at=doc.get("created_at", ""),
    )


def record_to_dict(r: ValidationRecord) -> dict:
    return {
        "record_id": r.record_id, "draft_id": r.draft_id, "reviewer_id": r.reviewer_id,
        "verdict": r.verdict, "feedback": r.feedback, "timestamp": r.timestamp,
    }


def record_from_dict(doc: dict) -> ValidationRecord:
    return ValidationRecord(
        record_id=doc["record_id"], draft_id=doc["draft_id"], reviewer_id=doc["reviewer_id"],
        verdict=doc["verdict"], feedback=doc.get("feedback", ""), timestamp=doc.get("timestamp", ""),
    )


def version_to_dict(v: ContentVersion) -> dict:
    return {
        "poi_id": v.poi_id, "version": v.version, "body": v.body,
        "approved_from": v.approved_from, "published_at": v.published_at,
    }


def version_from_dict(doc: dict) -> ContentVersion:
    return ContentVersion(
        poi_id=doc["poi_id"], version=int(doc["version"]), body=doc["body"],
        approved_from=doc["approved_from"], published_at=doc.get("published_at", ""),
    )
