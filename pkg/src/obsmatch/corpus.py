"""Event ingestion, user timelines, study cohorts and outcome variables.

The unit of analysis is a user whose first recorded activity was a textual
post. Treatment is defined by how much feedback that first post attracted
(comment count, or score); outcomes are read from the user's later activity
and from self-reported weight-loss badges attached to their events.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Optional

EVENT_KINDS = ("self_post", "link_post", "comment")
SECONDS_PER_DAY = 86_400.0
KG_PER_LB = 0.45359237


class IngestError(ValueError):
    """An input record that cannot be accepted, with its line number."""


class CohortError(ValueError):
    """A cohort construction step that cannot proceed."""


@dataclass(frozen=True)
class EventRecord:
    event_id: str
    author: str
    kind: str
    created_at: float
    parent_post_id: Optional[str] = None
    title: Optional[str] = None
    body: Optional[str] = None
    score: int = 0
    badge_text: Optional[str] = None

    def text(self) -> str:
        """Title and body joined, for featurization."""
        parts = [p for p in (self.title, self.body) if p]
        return "\n".join(parts)


@dataclass
class UserTimeline:
    user: str
    events: list  # EventRecord, ordered by (created_at, event_id)
    badge_snapshots: list  # (created_at, weight_loss_lb), ordered


@dataclass
class StudyUnit:
    user: str
    first_post: EventRecord
    comment_count: int = 0
    score: int = 0
    treatment: Optional[int] = None
    returned: bool = False
    weight_loss_lb: Optional[float] = None
    lifespan_days: int = 0
    activity_count: int = 1
    loss_rate_lb_per_day: Optional[float] = None
    badge_update_count: int = 0


@dataclass
class Cohort:
    label: str
    units: list = field(default_factory=list)

    def __len__(self):
        return len(self.units)

    def treated(self):
        return [u for u in self.units if u.treatment == 1]

    def controls(self):
        return [u for u in self.units if u.treatment == 0]


_REQUIRED_FIELDS = ("event_id", "author", "kind", "created_at")


def _validate_record(rec: dict, line_no: int) -> EventRecord:
    for name in _REQUIRED_FIELDS:
        if rec.get(name) is None:
            raise IngestError(f"line {line_no}: missing required field '{name}'")
    kind = rec["kind"]
    if kind not in EVENT_KINDS:
        raise IngestError(f"line {line_no}: unknown kind {kind!r}")
    try:
        created = float(rec["created_at"])
    except (TypeError, ValueError):
        raise IngestError(f"line {line_no}: created_at is not a number") from None
    if not math.isfinite(created):
        raise IngestError(f"line {line_no}: created_at is not finite")
    if kind == "comment" and not rec.get("parent_post_id"):
        raise IngestError(f"line {line_no}: comment without parent_post_id")
    if kind == "self_post" and not (rec.get("title") or rec.get("body")):
        raise IngestError(f"line {line_no}: self_post with empty title and body")
    return EventRecord(
        event_id=str(rec["event_id"]),
        author=str(rec["author"]),
        kind=kind,
        created_at=created,
        parent_post_id=rec.get("parent_post_id"),
        title=rec.get("title"),
        body=rec.get("body"),
        score=int(rec.get("score", 0)),
        badge_text=rec.get("badge_text"),
    )


class Corpus:
    """Immutable indexed view over ingested events."""

    def __init__(self, events: list):
        self.events = list(events)
        self.by_user: dict = {}
        self.comments_by_post: dict = {}
        self.counts = {k: 0 for k in EVENT_KINDS}
        for ev in self.events:
            self.by_user.setdefault(ev.author, []).append(ev)
            self.counts[ev.kind] += 1
            if ev.kind == "comment":
                self.comments_by_post.setdefault(ev.parent_post_id, []).append(ev)
        for evs in self.by_user.values():
            evs.sort(key=lambda e: (e.created_at, e.event_id))

    def __len__(self):
        return len(self.events)

    def users(self):
        return sorted(self.by_user)

    def user_events(self, user: str) -> list:
        return self.by_user.get(user, [])

    def feedback_comments(self, post: EventRecord, include_self: bool = False) -> list:
        comments = self.comments_by_post.get(post.event_id, [])
        if include_self:
            return list(comments)
        return [c for c in comments if c.author != post.author]


def ingest_events(lines: Iterable[str]) -> Corpus:
    """Parse newline-delimited JSON event records into a Corpus.

    Malformed records and duplicate event ids are rejected with the
    offending line number.
    """
    events = []
    seen = set()
    for line_no, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped:
            continue
        try:
            rec = json.loads(stripped)
        except json.JSONDecodeError as exc:
            raise IngestError(f"line {line_no}: invalid JSON ({exc.msg})") from None
        if not isinstance(rec, dict):
            raise IngestError(f"line {line_no}: record is not an object")
        ev = _validate_record(rec, line_no)
        if ev.event_id in seen:
            raise IngestError(f"line {line_no}: duplicate event_id {ev.event_id!r}")
        seen.add(ev.event_id)
        events.append(ev)
    return Corpus(events)


def load_events(path) -> Corpus:
    with open(path, "r", encoding="utf-8") as fh:
        return ingest_events(fh)


DEFAULT_BADGE_PATTERN = re.compile(
    r"(?P<lb>\d+(?:\.\d+)?)\s*lbs?\s*/\s*(?P<kg>\d+(?:\.\d+)?)\s*kg", re.IGNORECASE
)

# Community shorthand for starting/current/goal weight, e.g. "SW: 200 CW: 180 GW: 150".
_INLINE_WEIGHT_RE = re.compile(
    r"\bSW\s*:?\s*(\d+(?:\.\d+)?)\s*(?:lbs?)?\b"
    r"[^\d]{0,40}?\bCW\s*:?\s*(\d+(?:\.\d+)?)\s*(?:lbs?)?\b"
    r"[^\d]{0,40}?\bGW\s*:?\s*(\d+(?:\.\d+)?)\s*(?:lbs?)?\b",
    re.IGNORECASE,
)


def parse_badge(badge_text, pattern=DEFAULT_BADGE_PATTERN, tolerance=0.02):
    """Extract the pounds figure from a badge string, or None.

    The pounds figure is authoritative; the kilograms figure is a
    cross-check and a disagreement beyond `tolerance` (relative, after
    unit conversion) marks the badge inconsistent.
    """
    if not badge_text:
        return None
    m = pattern.search(badge_text)
    if not m:
        return None
    lb = float(m.group("lb"))
    kg = float(m.group("kg"))
    expected_kg = lb * KG_PER_LB
    if expected_kg == 0.0:
        return lb if kg == 0.0 else None
    if abs(kg - expected_kg) / expected_kg > tolerance:
        return None
    return lb


def parse_inline_weight(post_text):
    """Extract a (start, current, goal) weight triple from post text, or None."""
    if not post_text:
        return None
    m = _INLINE_WEIGHT_RE.search(post_text)
    if not m:
        return None
    return tuple(float(g) for g in m.groups())


def build_timeline(corpus: Corpus, user: str, badge_pattern=DEFAULT_BADGE_PATTERN) -> UserTimeline:
    events = corpus.user_events(user)
    snapshots = []
    for ev in events:
        lb = parse_badge(ev.badge_text, badge_pattern)
        if lb is not None and math.isfinite(lb):
            snapshots.append((ev.created_at, lb))
    return UserTimeline(user=user, events=events, badge_snapshots=snapshots)


def select_group1(corpus: Corpus, include_self_comments: bool = False) -> Cohort:
    """Users whose earliest recorded activity is a textual post."""
    units = []
    for user in corpus.users():
        events = corpus.user_events(user)
        first = events[0]
        if first.kind != "self_post":
            continue
        feedback = corpus.feedback_comments(first, include_self=include_self_comments)
        units.append(
            StudyUnit(
                user=user,
                first_post=first,
                comment_count=len(feedback),
                score=first.score,
            )
        )
    return Cohort(label="G1", units=units)


def select_group2(g1: Cohort, corpus: Corpus, badge_pattern=DEFAULT_BADGE_PATTERN) -> Cohort:
    """G1 members who came back afterwards and have usable badge information."""
    units = []
    for unit in g1.units:
        timeline = build_timeline(corpus, unit.user, badge_pattern)
        if len(timeline.events) < 2:
            continue
        if not timeline.badge_snapshots:
            continue
        units.append(unit)
    return Cohort(label="G2", units=units)


def assign_treatment(cohort: Cohort, variable: str = "comment_count", cutoff: int = 4) -> Cohort:
    """Label every unit: treated iff the chosen feedback variable >= cutoff."""
    if variable not in ("comment_count", "score"):
        raise CohortError(f"unknown treatment variable {variable!r}")
    for unit in cohort.units:
        value = unit.comment_count if variable == "comment_count" else unit.score
        unit.treatment = 1 if value >= cutoff else 0
    n_treated = sum(u.treatment for u in cohort.units)
    if n_treated == 0 or n_treated == len(cohort.units):
        raise CohortError(
            f"cutoff {cutoff} on {variable} leaves an empty "
            f"{'treatment' if n_treated == 0 else 'control'} group"
        )
    return cohort


def compute_outcomes(unit: StudyUnit, corpus: Corpus, *, weight_mode: str = "last",
                     badge_pattern=DEFAULT_BADGE_PATTERN) -> StudyUnit:
    """Fill a unit's outcome variables from its timeline.

    weight_mode picks which badge snapshot defines the reported loss:
    "last" (default) or "max".
    """
    if weight_mode not in ("last", "max"):
        raise CohortError(f"unknown weight_mode {weight_mode!r}")
    timeline = build_timeline(corpus, unit.user, badge_pattern)
    events = timeline.events
    unit.returned = len(events) > 1
    unit.activity_count = len(events)
    span = events[-1].created_at - events[0].created_at
    unit.lifespan_days = int(span // SECONDS_PER_DAY)
    values = [lb for _, lb in timeline.badge_snapshots]
    if values:
        unit.weight_loss_lb = values[-1] if weight_mode == "last" else max(values)
        unit.badge_update_count = sum(
            1 for prev, cur in zip(values, values[1:]) if cur != prev
        )
    else:
        unit.weight_loss_lb = None
        unit.badge_update_count = 0
    if unit.weight_loss_lb is not None and unit.lifespan_days > 0:
        unit.loss_rate_lb_per_day = unit.weight_loss_lb / unit.lifespan_days
    else:
        unit.loss_rate_lb_per_day = None
    return unit


def build_cohort(corpus: Corpus, *, group: str = "G2", variable: str = "comment_count",
                 cutoff: int = 4, include_self_comments: bool = False,
                 weight_mode: str = "last",
                 badge_pattern=DEFAULT_BADGE_PATTERN) -> Cohort:
    """Convenience path: group selection, outcomes, then treatment labels."""
    g1 = select_group1(corpus, include_self_comments=include_self_comments)
    if not g1.units:
        raise CohortError("no users whose first activity is a textual post")
    cohort = g1 if group == "G1" else select_group2(g1, corpus, badge_pattern)
    if group not in ("G1", "G2"):
        raise CohortError(f"unknown group {group!r}")
    for unit in cohort.units:
        compute_outcomes(unit, corpus, weight_mode=weight_mode, badge_pattern=badge_pattern)
    return assign_treatment(cohort, variable=variable, cutoff=cutoff)
