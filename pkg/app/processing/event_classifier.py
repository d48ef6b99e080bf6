"""Event classification relative to a system/environment boundary."""

from collections import Counter
from typing import Any, Dict, List, Sequence

import structlog

from app.models import Boundary, Event, EventClass, EventKind, Stimulus, Trace
from app.processing.terms import Atom, Pid

logger = structlog.get_logger()

IO_REQUEST = Atom("io_request")


def is_tagged_reply(payload: Any, origin: Any) -> bool:
    """True for replies shaped {Origin, Reply}, e.g. {code_server, {module, client}}."""
    return isinstance(payload, tuple) and len(payload) == 2 and payload[0] == origin


def send_parts(event: Event):
    """(message, destination) of a send event, or (payload, None) if malformed."""
    payload = event.payload
    if isinstance(payload, tuple) and len(payload) == 2:
        return payload[0], payload[1]
    return payload, None


def is_io_request(message: Any) -> bool:
    return isinstance(message, tuple) and len(message) > 0 and message[0] == IO_REQUEST


def call_module(event: Event) -> Any:
    payload = event.payload
    if isinstance(payload, tuple) and payload:
        return payload[0]
    return None


def classify(event: Event, boundary: Boundary) -> EventClass:
    """Place an event in exactly one of the three classes."""
    kind = event.kind
    if kind is EventKind.RECEIVE:
        origin = event.origin
        if origin is None:
            return EventClass.EXTERNAL_STIMULUS
        if boundary.is_mocked(origin):
            if is_tagged_reply(event.payload, origin):
                return EventClass.ENVIRONMENT_INTERACTION
            return EventClass.EXTERNAL_STIMULUS
        return EventClass.SYSTEM_ACTION
    if kind is EventKind.IO:
        return EventClass.ENVIRONMENT_INTERACTION
    if kind is EventKind.SEND:
        message, destination = send_parts(event)
        if boundary.is_mocked(destination) or is_io_request(message):
            return EventClass.ENVIRONMENT_INTERACTION
        return EventClass.SYSTEM_ACTION
    if kind in (EventKind.CALL, EventKind.RETURN) and boundary.is_mocked(call_module(event)):
        return EventClass.ENVIRONMENT_INTERACTION
    return EventClass.SYSTEM_ACTION


def note_registration(names: Dict[Pid, Any], event: Event) -> None:
    """Record pid -> registered name for register events."""
    if event.kind is EventKind.REGISTER and isinstance(event.payload, Atom):
        names[event.pid] = event.payload


def resolve_actor(names: Dict[Pid, Any], pid: Pid) -> Any:
    return names.get(pid, pid)


def extract_stimuli(trace: Trace, boundary: Boundary) -> List[Stimulus]:
    """Project the externally stimulated receives to (target, payload), order preserved."""
    names: Dict[Pid, Any] = {}
    stimuli = []
    for event in trace.events:
        note_registration(names, event)
        if classify(event, boundary) is EventClass.EXTERNAL_STIMULUS:
            stimuli.append(Stimulus(target=resolve_actor(names, event.pid), payload=event.payload))
    logger.debug("Stimuli extracted", events=len(trace.events), stimuli=len(stimuli))
    return stimuli


def is_subsequence(candidate: Sequence[Any], original: Sequence[Any]) -> bool:
    """True iff candidate is original with zero or more elements deleted."""
    remaining = iter(original)
    return all(any(item == other for other in remaining) for item in candidate)


def class_histogram(trace: Trace, boundary: Boundary) -> Dict[str, int]:
    counts = Counter(classify(event, boundary).value for event in trace.events)
    return {event_class.value: counts.get(event_class.value, 0) for event_class in EventClass}
