import json
import sys

import pytest

DAY = 86_400.0


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Echo the acceptance checklist after the test summary."""
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "ACCEPTANCE_LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


def _event(event_id, author, kind, created_at, **extra):
    rec = {"event_id": event_id, "author": author, "kind": kind,
           "created_at": created_at}
    rec.update(extra)
    return rec


def sample_events():
    """Small handcrafted community: covers G1/G2 membership, badges,
    self-comments, inconsistent badges and link-post exclusion."""
    ev = []
    # alice: textual first post, 4 outside comments, returns twice with badges
    ev.append(_event("p-alice", "alice", "self_post", 0.0,
                     title="Why is this so hard?",
                     body="What should I eat? How do you all stay motivated? SW: 200 CW: 180 GW: 150",
                     score=12))
    for i in range(4):
        ev.append(_event(f"c-alice-{i}", f"helper{i}", "comment", 100.0 + i,
                         parent_post_id="p-alice", body="you can do it, great start"))
    ev.append(_event("r-alice-1", "alice", "comment", 10 * DAY,
                     parent_post_id="p-carol", body="thanks all",
                     badge_text="20lbs / 9.1kg"))
    ev.append(_event("r-alice-2", "alice", "comment", 20 * DAY,
                     parent_post_id="p-carol", body="update",
                     badge_text="25lbs / 11.3kg"))
    # bob: 3 outside comments plus one self-comment; returns without a badge
    ev.append(_event("p-bob", "bob", "self_post", 50.0,
                     body="starting over again, feeling nervous", score=3))
    for i in range(3):
        ev.append(_event(f"c-bob-{i}", f"helper{i}", "comment", 200.0 + i,
                         parent_post_id="p-bob", body="welcome"))
    ev.append(_event("c-bob-self", "bob", "comment", 300.0,
                     parent_post_id="p-bob", body="adding context"))
    ev.append(_event("r-bob", "bob", "comment", 5 * DAY,
                     parent_post_id="p-carol", body="checking in"))
    # carol: commented before ever posting -> not G1
    ev.append(_event("c-carol", "carol", "comment", 10.0,
                     parent_post_id="p-alice", body="good luck"))
    ev.append(_event("p-carol", "carol", "self_post", 400.0, body="my turn now"))
    # dave: link post first -> not G1
    ev.append(_event("p-dave", "dave", "link_post", 20.0, title="useful article"))
    # erin: posts once, never returns
    ev.append(_event("p-erin", "erin", "self_post", 30.0,
                     body="first day, wish me luck", score=1))
    # frank: 3 comments, returns with a consistent badge
    ev.append(_event("p-frank", "frank", "self_post", 60.0,
                     body="who else started this month? what worked for you?",
                     score=7))
    for i in range(3):
        ev.append(_event(f"c-frank-{i}", f"helper{i}", "comment", 500.0 + i,
                         parent_post_id="p-frank", body="nice goal"))
    ev.append(_event("r-frank", "frank", "comment", 8 * DAY,
                     parent_post_id="p-carol", body="still here",
                     badge_text="10lbs / 4.5kg"))
    # grace: 5 comments, returns with a zero badge
    ev.append(_event("p-grace", "grace", "self_post", 70.0,
                     body="long post about meal prep and planning ahead",
                     score=2))
    for i in range(5):
        ev.append(_event(f"c-grace-{i}", f"helper{i}", "comment", 600.0 + i,
                         parent_post_id="p-grace", body="solid plan"))
    ev.append(_event("r-grace", "grace", "comment", 12 * DAY,
                     parent_post_id="p-carol", body="week two",
                     badge_text="0lbs / 0kg"))
    # heidi: returns, but her badge units disagree -> no usable badge
    ev.append(_event("p-heidi", "heidi", "self_post", 80.0,
                     body="not sure where to begin", score=5))
    for i in range(4):
        ev.append(_event(f"c-heidi-{i}", f"helper{i}", "comment", 700.0 + i,
                         parent_post_id="p-heidi", body="start small"))
    ev.append(_event("r-heidi", "heidi", "comment", 9 * DAY,
                     parent_post_id="p-carol", body="progress?",
                     badge_text="50lbs / 30kg"))
    return ev


@pytest.fixture
def events_jsonl(tmp_path):
    path = tmp_path / "events.jsonl"
    with open(path, "w", encoding="utf-8") as fh:
        for rec in sample_events():
            fh.write(json.dumps(rec) + "\n")
    return path


@pytest.fixture
def corpus(events_jsonl):
    from obsmatch.corpus import load_events

    return load_events(events_jsonl)


LEXICON_TEXT = """\
# fixture lexicon
negative_emotions: sad* unhappy miserable awful terrible cry*
anger: mad* furious rage* angry
sexual: romance romantic kiss*
reward: win* reward* prize* goal* achiev*
work: work* job* deadline* office*
"""


@pytest.fixture
def lexicon_file(tmp_path):
    path = tmp_path / "lexicon.txt"
    path.write_text(LEXICON_TEXT, encoding="utf-8")
    return path


@pytest.fixture
def lexicon(lexicon_file):
    from obsmatch.textfeat import Lexicon

    return Lexicon.from_file(lexicon_file)
