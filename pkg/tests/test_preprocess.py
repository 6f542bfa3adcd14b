from collections import Counter
from datetime import datetime, timedelta

import pytest
from hypothesis import given, settings, strategies as st

from epmine.log import Event, EventLog, Trace
from epmine.preprocess import (
    LABELS, DEFAULT_CODING, CodingScheme, ConfigError, EventClass, GradeBook, MissingGradeError, UnitRule,
    UnknownActionError, anonymize, apply_coding, dedup, event_class, filter_actions, filter_cases, pseudonym,
    split_by_grade, split_by_unit,
)

T0 = datetime(2013, 2, 18, 9, 0)


def make_log(rows):
    """rows: (case, action, minute offset, info)"""
    return EventLog.from_events(Event(c, a, T0 + timedelta(minutes=m), i) for c, a, m, i in rows)


LOG = make_log([
    ("ana", "page view", 0, "Unit 01: intro"),
    ("ana", "page view", 0, "Unit 01: intro"),
    ("ana", "calendar view", 1, ""),
    ("ana", "quiz view", 2, "Unit 02: quiz"),
    ("bea", "forum add post", 3, "Unit 01: forum"),
    ("Instructor", "page view", 4, "Unit 01: edit"),
])


def test_coding_scheme_has_five_labels_over_sixteen_actions():
    scheme = CodingScheme.default()
    assert len(scheme.actions) == 16
    assert set(scheme.mapping.values()) == set(LABELS)
    assert Counter(DEFAULT_CODING.values()) == {"FORUM PEER LEARNING": 5, "EXECUTING": 4, "PLANNING": 3,
                                        "LEARNING": 3, "REVIEW": 1}


def test_coding_scheme_tsv_round_trip_and_errors():
    scheme = CodingScheme.default()
    assert CodingScheme.from_tsv("# comment\n\n" + scheme.to_tsv()) == scheme
    with pytest.raises(ConfigError, match="line 1"):
        CodingScheme.from_tsv("page view\tREADING\n")
    with pytest.raises(ConfigError, match="line 2"):
        CodingScheme.from_tsv("page view\tLEARNING\nquiz view\n")
    with pytest.raises(ConfigError):
        CodingScheme({"page view": "OTHER"})


def test_dedup_removes_exact_repeats_only():
    out = dedup(LOG)
    assert out.num_events == LOG.num_events - 1
    same_time_other_info = make_log([("a", "x", 0, "u1"), ("a", "x", 0, "u2")])
    assert dedup(same_time_other_info) == same_time_other_info


def test_filters():
    assert [t.case_id for t in filter_cases(LOG, ["Instructor"])] == ["ana", "bea"]
    kept = filter_actions(LOG, ["quiz view", "forum add post"])
    assert [t.activities for t in kept] == [("quiz view",), ("forum add post",)]


def test_apply_coding_drop_and_error():
    coded, dropped = apply_coding(LOG)
    assert dropped == {"calendar view": 1}
    assert coded.traces[0].activities == ("LEARNING|page view", "LEARNING|page view", "PLANNING|quiz view")
    with pytest.raises(UnknownActionError, match="calendar view"):
        apply_coding(LOG, unknown_policy="error")
    with pytest.raises(ValueError):
        apply_coding(LOG, unknown_policy="ignore")


def test_apply_coding_drops_emptied_cases():
    log = make_log([("a", "calendar view", 0, ""), ("b", "page view", 0, "")])
    coded, _ = apply_coding(log)
    assert [t.case_id for t in coded] == ["b"]


def test_event_class():
    coded, _ = apply_coding(LOG)
    e = coded.traces[1].events[0]
    assert event_class(e) == EventClass("forum add post", "FORUM PEER LEARNING")
    assert event_class(e).name == e.activity
    with pytest.raises(ValueError):
        event_class(LOG.traces[0].events[0])


def test_anonymize_is_keyed_and_deterministic():
    anon = anonymize(LOG, b"k1")
    ids = [t.case_id for t in anon]
    assert ids == [pseudonym(c, b"k1") for c in ("ana", "bea", "Instructor")]
    assert all(len(i) == 16 for i in ids)
    assert ids != [t.case_id for t in anonymize(LOG, b"k2")]
    assert [t.activities for t in anon] == [t.activities for t in LOG]
    # info is left untouched
    assert anon.traces[0].events[0].info == "Unit 01: intro"


def test_gradebook_parsing():
    gb = GradeBook.from_csv("case_id,grade\nana,4.9\nbea, 5\n\n")
    assert gb.grades == {"ana": 4.9, "bea": 5.0}
    assert GradeBook.from_csv(gb.to_csv()) == gb
    with pytest.raises(ConfigError):
        GradeBook.from_csv("ana,11\n")
    with pytest.raises(ConfigError, match="line 3"):
        GradeBook.from_csv("case_id,grade\nana,4\nbea,five\n")
    assert gb.anonymized(b"k").grades == {pseudonym("ana", b"k"): 4.9, pseudonym("bea", b"k"): 5.0}


@pytest.mark.parametrize("grade,cohort", [(0.0, "Fail"), (4.9, "Fail"), (4.99, "Fail"), (5.0, "Pass"),
                                          (10.0, "Pass")])
def test_grade_boundary(grade, cohort):
    log = make_log([("s", "page view", 0, "")])
    passed, failed = split_by_grade(log, GradeBook({"s": grade}))
    assert len(passed if cohort == "Pass" else failed) == 1
    assert (passed if cohort == "Pass" else failed).attributes["cohort"] == cohort


def test_split_by_grade_needs_every_grade():
    with pytest.raises(MissingGradeError) as err:
        split_by_grade(LOG, GradeBook({"ana": 7.0}))
    assert err.value.case_ids == ["Instructor", "bea"]


def test_unit_rule_first_match_and_regex():
    rule = UnitRule.from_tsv("Unit 01\t1\nre:^Unit 0?2\\b\t2\nUnit\t3\n")
    assert rule.units == 3
    assert rule.unit_of("Unit 01: intro") == 1
    assert rule.unit_of("Unit 2 quiz") == 2
    assert rule.unit_of("see Unit 2") == 3
    assert rule.unit_of("course guide") is None
    assert UnitRule.from_tsv(rule.to_tsv(), units=3) == rule


@pytest.mark.parametrize("text,units", [("Unit 01\tone\n", None), ("Unit 01\t4\n", 3), ("re:(\t1\n", None),
                                        ("Unit 01\n", None)])
def test_unit_rule_errors(text, units):
    with pytest.raises(ConfigError):
        UnitRule.from_tsv(text, units)


def test_split_by_unit_partitions_events():
    rule = UnitRule((("Unit 01", 1), ("Unit 02", 2)), 3)
    units, rest = split_by_unit(LOG, rule)
    assert sorted(units) == [1, 2, 3]
    assert [t.case_id for t in units[1]] == ["ana", "bea", "Instructor"]
    assert units[2].traces[0].activities == ("quiz view",)
    assert len(units[3]) == 0
    assert rest.traces[0].activities == ("calendar view",)
    assert sum(u.num_events for u in units.values()) + rest.num_events == LOG.num_events


@st.composite
def unit_logs(draw):
    rows = draw(st.lists(st.tuples(st.sampled_from("abcd"), st.sampled_from(["page view", "quiz view"]),
                                   st.integers(0, 100), st.sampled_from(["Unit 01", "Unit 02", "Unit 03", ""])),
                         max_size=30))
    return make_log(rows)


@settings(max_examples=100, deadline=None)
@given(unit_logs())
def test_unit_split_is_a_partition(log):
    rule = UnitRule((("Unit 01", 1), ("Unit 02", 2), ("Unit 03", 3)), 3)
    units, rest = split_by_unit(log, rule)
    parts = list(units.values()) + [rest]
    by_case = Counter()
    for p in parts:
        for t in p:
            by_case[t.case_id] += len(t)
    assert by_case == Counter({t.case_id: len(t) for t in log})
    for k, u in units.items():
        assert all(rule.unit_of(e.info) == k for t in u for e in t)


@settings(max_examples=100, deadline=None)
@given(unit_logs())
def test_dedup_is_idempotent(log):
    once = dedup(log)
    assert dedup(once) == once
    assert once.num_events <= log.num_events
