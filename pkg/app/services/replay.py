"""Capture and replay of a simulated system under chosen stimuli."""

from abc import ABC, abstractmethod
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import structlog
from pydantic import BaseModel, ConfigDict, Field

from app.exceptions import ReplayBudgetExceeded, UnsupportedMockOption
from app.models import Boundary, Emission, Event, EventClass, EventKind, MockOption, ReplayConfig, Stimulus, Trace
from app.processing.event_classifier import classify, send_parts
from app.processing.terms import Atom, parse_term

logger = structlog.get_logger()


def request_tag(message: Any) -> Any:
    """Key under which replies to a request are recorded: its leading atom."""
    if isinstance(message, tuple) and message and isinstance(message[0], Atom):
        return message[0]
    return message


class EnvironmentPort(ABC):
    """How a simulated process talks to whatever lies outside the system."""

    @abstractmethod
    def handles(self, partner: Any) -> bool:
        """True if partner belongs to the environment this port fronts."""

    @abstractmethod
    def request(self, requester: Any, partner: Any, message: Any) -> Optional[Any]:
        """Reply to a request, or None when no reply will ever come (the requester blocks)."""

    def output(self, requester: Any, partner: Any, message: Any) -> None:
        """Fire-and-forget interaction such as console output."""


class CapturedSystem(ABC):
    """A resettable replay target driven by a strict reset/inject/drain protocol."""

    nondeterministic: bool = False
    replay_safe: bool = False

    @abstractmethod
    def reset(self, seed: int) -> None:
        """Return to the initial state; seed drives any modeled nondeterminism."""

    @abstractmethod
    def inject(self, stimulus: Stimulus) -> None:
        """Deliver one external stimulus."""

    @abstractmethod
    def drain(self, environment: EnvironmentPort) -> List[Emission]:
        """Run until quiescent and return what happened."""

    @abstractmethod
    def live_environment(self, boundary: Boundary) -> EnvironmentPort:
        """The production environment the system normally talks to."""

    def check_invariants(self) -> None:
        """Raise if the system's own bookkeeping is inconsistent after a run."""


class MockEnvironment(BaseModel):
    """Environment responses recorded from a capture trace."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    mocked: frozenset = Field(default_factory=frozenset)
    mode: MockOption = MockOption.A
    recorded_responses: Dict[Tuple[Any, Any], List[Any]] = Field(default_factory=dict)

    def responses_for(self, partner: Any) -> List[Any]:
        """All recorded replies from partner, grouped by request tag."""
        responses: List[Any] = []
        for (owner, _), replies in self.recorded_responses.items():
            if owner == partner:
                responses.extend(replies)
        return responses

    def partners(self) -> List[Any]:
        seen: List[Any] = []
        for owner, _ in self.recorded_responses:
            if owner not in seen:
                seen.append(owner)
        return seen


def capture(trace: Trace, boundary: Boundary) -> MockEnvironment:
    """Record what each mocked partner answered, in trace order.

    Requests to a mocked partner open an entry keyed by (partner, request
    tag); tagged replies from that partner fill it. Stimuli are not recorded.
    """
    recorded: Dict[Tuple[Any, Any], List[Any]] = {}
    pending: Dict[Tuple[Any, Any], List[Any]] = {}
    for event in trace.events:
        event_class = classify(event, boundary)
        if event_class is not EventClass.ENVIRONMENT_INTERACTION:
            continue
        if event.kind is EventKind.SEND:
            message, destination = send_parts(event)
            if boundary.is_mocked(destination):
                key = (destination, request_tag(message))
                recorded.setdefault(key, [])
                pending.setdefault((event.pid, destination), []).append(key[1])
        elif event.kind is EventKind.RECEIVE:
            partner = event.origin
            queue = pending.get((event.pid, partner))
            tag = queue.pop(0) if queue else None
            recorded.setdefault((partner, tag), []).append(event.payload)
    mock = MockEnvironment(mocked=boundary.mocked, mode=boundary.mode, recorded_responses=recorded)
    logger.debug("Environment captured", keys=len(recorded), mode=boundary.mode.value)
    return mock


class MockedEnvironmentPort(EnvironmentPort):
    """Answers requests from a MockEnvironment; an exhausted list blocks the requester."""

    def __init__(self, mock: MockEnvironment):
        self.mock = mock
        self.cursors: Dict[Tuple[Any, Any], int] = {}
        self.outputs = 0

    def handles(self, partner: Any) -> bool:
        return partner in self.mock.mocked

    def request(self, requester: Any, partner: Any, message: Any) -> Optional[Any]:
        key = (partner, request_tag(message))
        replies = self.mock.recorded_responses.get(key, [])
        cursor = self.cursors.get(key, 0)
        if cursor >= len(replies):
            logger.debug("Mocked partner has no reply left", partner=str(partner), requester=str(requester))
            return None
        self.cursors[key] = cursor + 1
        return replies[cursor]

    def output(self, requester: Any, partner: Any, message: Any) -> None:
        self.outputs += 1


class _TraceBuilder:
    """Numbers emissions, fabricates timestamps and enforces the event budget."""

    def __init__(self, cfg: ReplayConfig):
        self.cfg = cfg
        self.events: List[Event] = []

    def timestamp(self, seq: int) -> Tuple[int, int, int]:
        total = seq * self.cfg.tick_us
        return (total // 10**12, (total // 10**6) % 10**6, total % 10**6)

    def extend(self, emissions: Iterable[Emission]) -> None:
        for emission in emissions:
            if len(self.events) >= self.cfg.max_events:
                raise ReplayBudgetExceeded(self.cfg.max_events, self.trace())
            seq = len(self.events)
            self.events.append(
                Event(
                    seq=seq,
                    pid=emission.pid,
                    kind=emission.kind,
                    payload=emission.payload,
                    ts=self.timestamp(seq),
                    origin=emission.origin,
                )
            )

    def trace(self) -> Trace:
        return Trace(events=list(self.events))


def _drive(system: CapturedSystem, environment: EnvironmentPort, stimuli: Sequence[Stimulus], cfg: ReplayConfig) -> Trace:
    system.reset(cfg.seed)
    builder = _TraceBuilder(cfg)
    builder.extend(system.drain(environment))
    for stimulus in stimuli:
        system.inject(stimulus)
        builder.extend(system.drain(environment))
    system.check_invariants()
    return builder.trace()


def replay(system: CapturedSystem, mock: MockEnvironment, stimuli: Sequence[Stimulus], cfg: ReplayConfig) -> Trace:
    """Re-run the system under stimuli, answering the environment per the mock's mode.

    Raises:
        UnsupportedMockOption: mode B for a system that is not replay-safe.
        ReplayBudgetExceeded: more than cfg.max_events events; carries the truncated trace.
    """
    if mock.mode is MockOption.B:
        if not system.replay_safe:
            raise UnsupportedMockOption(f"{type(system).__name__} cannot replay against its live environment")
        environment: EnvironmentPort = system.live_environment(cfg.boundary)
    else:
        environment = MockedEnvironmentPort(mock)
    return _drive(system, environment, stimuli, cfg)


def run_live(system: CapturedSystem, stimuli: Sequence[Stimulus], cfg: ReplayConfig) -> Trace:
    """Production run against the live environment; yields the trace capture starts from."""
    return _drive(system, system.live_environment(cfg.boundary), stimuli, cfg)


def shift_boundary(boundary: Boundary, add_mocked: Iterable[Any]) -> Boundary:
    """Move more processes into the environment; the mode is kept."""
    additions = frozenset(add_mocked)
    if not additions:
        return boundary
    return Boundary(mocked=boundary.mocked | additions, mode=boundary.mode)


def mocked_entities(names: Iterable[str]) -> List[Any]:
    """Parse `--mock` values (`db_process`, `<0.40.0>`) into terms."""
    entities = []
    for name in names:
        for part in name.split(","):
            part = part.strip()
            if part:
                entities.append(parse_term(part))
    return entities
