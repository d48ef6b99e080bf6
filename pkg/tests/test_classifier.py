"""Tests for event classification and stimulus extraction."""

import pytest

from app.models import Boundary, Event, EventClass, EventKind, Stimulus
from app.processing.event_classifier import class_histogram, classify, extract_stimuli, is_subsequence
from app.processing.terms import Atom, Pid
from app.processing.trace_codec import parse_raw
from app.services.replay import shift_boundary


def _event(kind, payload, pid=Pid(0, 38, 0), origin=None):
    return Event(seq=0, pid=pid, kind=kind, payload=payload, ts=(0, 0, 0), origin=origin)


@pytest.mark.unit
class TestClassify:
    def test_user_request_is_a_stimulus(self, boundary):
        event = _event(EventKind.RECEIVE, (Atom("newClient"), Atom("bob")), pid=Pid(0, 35, 0))
        assert classify(event, boundary) is EventClass.EXTERNAL_STIMULUS

    def test_spawn_is_a_system_action(self, boundary):
        event = _event(EventKind.SPAWN, (Pid(0, 38, 0), (Atom("client"), Atom("newClient"), ())), pid=Pid(0, 35, 0))
        assert classify(event, boundary) is EventClass.SYSTEM_ACTION

    def test_console_output_is_an_interaction(self, boundary):
        message = (Atom("io_request"), Pid(0, 38, 0), Pid(0, 23, 0), Atom("hi"))
        assert classify(_event(EventKind.SEND, (message, Pid(0, 23, 0))), boundary) is EventClass.ENVIRONMENT_INTERACTION
        assert classify(_event(EventKind.IO, Atom("hi")), boundary) is EventClass.ENVIRONMENT_INTERACTION

    def test_internal_receive(self, boundary):
        event = _event(EventKind.RECEIVE, (Atom("confirm_reg"), Atom("bob")), origin=Pid(0, 35, 0))
        assert classify(event, boundary) is EventClass.SYSTEM_ACTION

    def test_code_server_moves_with_the_boundary(self, boundary):
        reply = _event(EventKind.RECEIVE, (Atom("code_server"), (Atom("module"), Atom("client"))), origin=Atom("code_server"))
        request = _event(EventKind.SEND, ((Atom("code_call"), Pid(0, 38, 0)), Atom("code_server")))
        assert classify(reply, boundary) is EventClass.SYSTEM_ACTION
        assert classify(request, boundary) is EventClass.SYSTEM_ACTION

        shifted = shift_boundary(boundary, [Atom("code_server")])
        assert classify(reply, shifted) is EventClass.ENVIRONMENT_INTERACTION
        assert classify(request, shifted) is EventClass.ENVIRONMENT_INTERACTION

    def test_calls_into_mocked_modules(self):
        call = _event(EventKind.CALL, (Atom("db"), Atom("write"), 1))
        assert classify(call, Boundary(mocked=frozenset({Atom("db")}))) is EventClass.ENVIRONMENT_INTERACTION
        assert classify(call, Boundary()) is EventClass.SYSTEM_ACTION

    def test_every_event_gets_exactly_one_class(self, raw_excerpt, boundary):
        histogram = class_histogram(parse_raw(raw_excerpt), boundary)
        assert sum(histogram.values()) == 9
        assert histogram == {
            "ExternalStimulus": 1,
            "EnvironmentInteraction": 1,
            "SystemAction": 7,
        }


@pytest.mark.unit
class TestExtractStimuli:
    def test_excerpt_has_one_stimulus(self, raw_excerpt, boundary):
        stimuli = extract_stimuli(parse_raw(raw_excerpt), boundary)
        assert stimuli == [Stimulus(target=Pid(0, 35, 0), payload=(Atom("newClient"), Atom("bob")))]

    def test_live_case_study_round_trip(self, live_trace, case_study, boundary):
        assert extract_stimuli(live_trace(case_study), boundary) == case_study

    def test_empty_trace(self, live_trace, boundary):
        assert extract_stimuli(live_trace([]), boundary) == []


@pytest.mark.unit
class TestSubsequence:
    @pytest.mark.parametrize(
        "candidate, original, expected",
        [
            ([], [1, 2], True),
            ([1, 3], [1, 2, 3], True),
            ([3, 1], [1, 2, 3], False),
            ([1, 1], [1, 2], False),
            ([1, 2, 3], [1, 2, 3], True),
        ],
    )
    def test_deletions_only(self, candidate, original, expected):
        assert is_subsequence(candidate, original) is expected

    def test_case_study_minimum(self, case_study):
        minimum = [case_study[0], case_study[-1]]
        assert is_subsequence(minimum, case_study)
        assert not is_subsequence(list(reversed(minimum)), case_study)
