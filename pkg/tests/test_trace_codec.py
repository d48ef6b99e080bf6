"""Tests for the raw, canonical and stimulus-list formats."""

import pytest
from hypothesis import given, settings as hypothesis_settings
from hypothesis import strategies as st

from app.exceptions import ParseError
from app.models import Event, EventKind, Stimulus, Trace
from app.processing.terms import Atom, ErlList, Pid
from app.processing.trace_codec import (
    infer_origins,
    looks_raw,
    parse_canonical,
    parse_raw,
    parse_stimuli,
    parse_trace,
    render_canonical,
    render_stimuli,
    write_text,
    load_trace,
)

NAME = st.text(min_size=1, max_size=8)
ATOMS = NAME.map(Atom)
PIDS = st.builds(Pid, st.integers(0, 3), st.integers(0, 500), st.integers(0, 3))
LEAVES = st.one_of(ATOMS, st.integers(-10**6, 10**6), NAME, PIDS)
TERMS = st.recursive(
    LEAVES,
    lambda children: st.one_of(
        st.lists(children, max_size=4).map(tuple),
        st.lists(children, max_size=4).map(ErlList),
    ),
    max_leaves=12,
)


@st.composite
def traces(draw):
    count = draw(st.integers(0, 12))
    start = draw(st.integers(0, 5))
    ts = [0, 0, 0]
    events = []
    for offset in range(count):
        ts[2] += draw(st.integers(0, 3))
        events.append(
            Event(
                seq=start + offset,
                pid=draw(PIDS),
                kind=draw(st.sampled_from(list(EventKind))),
                payload=draw(TERMS),
                ts=tuple(ts),
                origin=draw(st.one_of(st.none(), ATOMS, PIDS)),
            )
        )
    return Trace(events=events)


@pytest.mark.unit
class TestRawFormat:
    def test_case_study_excerpt(self, raw_excerpt):
        trace = parse_raw(raw_excerpt)
        assert len(trace.events) == 9
        first = trace.events[0]
        assert first.seq == 0
        assert first.pid == Pid(0, 35, 0)
        assert first.kind is EventKind.RECEIVE
        assert first.payload == (Atom("newClient"), Atom("bob"))
        assert first.ts == (1339, 842747, 273000)
        assert first.origin is None

    def test_excerpt_event_shapes(self, raw_excerpt):
        events = parse_raw(raw_excerpt).events
        assert [event.kind for event in events] == [
            EventKind.RECEIVE,
            EventKind.SPAWN,
            EventKind.LINK,
            EventKind.REGISTER,
            EventKind.SEND,
            EventKind.RECEIVE,
            EventKind.SEND,
            EventKind.RECEIVE,
            EventKind.SEND,
        ]
        assert events[1].payload == (Pid(0, 38, 0), (Atom("client"), Atom("newClient"), ErlList([Atom("bob")])))
        assert events[3].payload == Atom("bob")
        assert events[4].payload == ((Atom("confirm_reg"), Atom("bob")), Pid(0, 38, 0))

    def test_excerpt_origins_are_inferred(self, raw_excerpt):
        events = parse_raw(raw_excerpt).events
        assert events[5].origin == Pid(0, 35, 0)
        assert events[7].origin == Atom("code_server")

    def test_unknown_kind_becomes_a_call(self):
        trace = parse_raw("{trace_ts,<0.1.0>,gc_start,{heap,10},{0,0,1}}")
        event = trace.events[0]
        assert event.kind is EventKind.CALL
        assert event.payload == (Atom("gc_start"), (Atom("heap"), 10))

    def test_missing_timestamp(self):
        with pytest.raises(ParseError) as excinfo:
            parse_raw("{trace_ts,<0.1.0>,send,hello}")
        assert excinfo.value.line == 1

    def test_not_a_trace_tuple(self):
        with pytest.raises(ParseError):
            parse_raw("{trace,<0.1.0>,send,hello,{0,0,1}}")

    def test_infer_origins_pairs_oldest_send(self):
        library, client = Pid(0, 35, 0), Pid(0, 38, 0)
        events = [
            Event(seq=0, pid=library, kind=EventKind.SEND, payload=(Atom("ping"), client), ts=(0, 0, 0)),
            Event(seq=1, pid=library, kind=EventKind.SEND, payload=(Atom("ping"), client), ts=(0, 0, 1)),
            Event(seq=2, pid=client, kind=EventKind.RECEIVE, payload=Atom("ping"), ts=(0, 0, 2)),
            Event(seq=3, pid=client, kind=EventKind.RECEIVE, payload=Atom("ping"), ts=(0, 0, 3)),
            Event(seq=4, pid=client, kind=EventKind.RECEIVE, payload=Atom("ping"), ts=(0, 0, 4)),
        ]
        origins = [event.origin for event in infer_origins(events)]
        assert origins == [None, None, library, library, None]


@pytest.mark.unit
class TestCanonicalFormat:
    def test_render_excerpt(self, raw_excerpt):
        text = render_canonical(parse_raw(raw_excerpt))
        first = text.splitlines()[0]
        assert first == "0\t{1339,842747,273000}\t<0.35.0>\treceive\t{newClient,bob}"
        assert text.splitlines()[5].endswith("\t<0.35.0>")

    def test_comments_and_blank_lines(self):
        text = "# header\n\n3\t{0,0,1}\t<0.1.0>\tlink\t<0.2.0>\n"
        trace = parse_canonical(text)
        assert trace.events[0].seq == 3
        assert trace.events[0].payload == Pid(0, 2, 0)

    def test_wrong_field_count(self):
        with pytest.raises(ParseError) as excinfo:
            parse_canonical("0\t{0,0,0}\t<0.1.0>\tlink\n")
        assert excinfo.value.line == 1

    def test_bad_payload_column(self):
        with pytest.raises(ParseError) as excinfo:
            parse_canonical("0\t{0,0,0}\t<0.1.0>\tsend\t{a,$}\n")
        assert excinfo.value.column == 27

    def test_gap_in_sequence(self):
        text = "# trace\n0\t{0,0,0}\t<0.1.0>\tlink\tx\n2\t{0,0,1}\t<0.1.0>\tlink\tx\n"
        with pytest.raises(ParseError) as excinfo:
            parse_canonical(text)
        assert (excinfo.value.line, excinfo.value.column) == (3, 1)
        assert excinfo.value.expected == "sequence number 1"

    def test_decreasing_timestamp(self):
        text = "0\t{0,0,5}\t<0.1.0>\tlink\tx\n1\t{0,0,1}\t<0.1.0>\tlink\tx\n"
        with pytest.raises(ParseError) as excinfo:
            parse_canonical(text)
        assert (excinfo.value.line, excinfo.value.column) == (2, 3)

    def test_negative_sequence_number(self):
        with pytest.raises(ParseError) as excinfo:
            parse_canonical("0\t{0,0,0}\t<0.1.0>\tlink\tx\n-1\t{0,0,1}\t<0.1.0>\tlink\tx\n")
        assert (excinfo.value.line, excinfo.value.column) == (2, 1)

    @pytest.mark.parametrize(
        "payload",
        ["a\u2028b", "form\x0cfeed", "v\x0bt", "nel\x85x", "gs\x1dx", Atom("para\u2029graph"), Atom("line\n")],
    )
    def test_only_newline_ends_a_record(self, payload):
        trace = Trace(events=[Event(seq=0, pid=Pid(0, 1, 0), kind=EventKind.SEND, payload=(payload, 1), ts=(0, 0, 0))])
        text = render_canonical(trace)
        assert text.count("\n") == 1
        assert parse_canonical(text) == trace

    def test_crlf_line_endings(self):
        trace = parse_canonical("0\t{0,0,0}\t<0.1.0>\tlink\tx\r\n1\t{0,0,1}\t<0.1.0>\tlink\t\"y\"\r\n")
        assert [event.payload for event in trace.events] == [Atom("x"), "y"]

    def test_format_detection(self, raw_excerpt):
        assert looks_raw(raw_excerpt)
        assert not looks_raw("0\t{0,0,0}\t<0.1.0>\tlink\tx\n")
        assert parse_trace(raw_excerpt) == parse_canonical(render_canonical(parse_raw(raw_excerpt)))

    def test_empty_trace(self):
        assert parse_canonical("") == Trace()
        assert render_canonical(Trace()) == ""

    @hypothesis_settings(max_examples=1000, deadline=None)
    @given(traces())
    def test_render_then_parse_is_identity(self, trace):
        assert parse_canonical(render_canonical(trace)) == trace

    def test_load_trace_from_file(self, tmp_path, raw_excerpt):
        path = tmp_path / "nested" / "trace.txt"
        write_text(path, render_canonical(parse_raw(raw_excerpt)))
        assert len(load_trace(path).events) == 9


@pytest.mark.unit
class TestStimulusLists:
    def test_case_study_file(self, case_study_from_file, case_study):
        assert case_study_from_file == case_study
        assert case_study_from_file[0] == Stimulus(target=Atom("library"), payload=(Atom("newClient"), Atom("ian")))

    def test_render_one_term_per_line(self, case_study, test_data_dir):
        expected = (test_data_dir / "case_study_stimuli.txt").read_text(encoding="utf-8")
        assert render_stimuli(case_study) == expected

    def test_bracketed_list(self):
        stimuli = parse_stimuli("[{library,{addBook,fable}},\n{ian,{borrowBook,fable}}]")
        assert [s.render() for s in stimuli] == ["{library,{addBook,fable}}", "{ian,{borrowBook,fable}}"]

    def test_rejects_non_pairs(self):
        with pytest.raises(ParseError):
            parse_stimuli("{library,{addBook,fable},extra}")
        with pytest.raises(ParseError):
            parse_stimuli("[library,{addBook,fable}]\n")
