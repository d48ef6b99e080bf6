"""Pydantic models for traces, stimuli, violations and simplification results."""

from enum import Enum
from typing import Any, FrozenSet, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.processing.terms import Atom, Pid, render_term


class EventKind(str, Enum):
    """Kinds of trace events recorded by the VM tracer."""
    RECEIVE = "receive"
    SEND = "send"
    SPAWN = "spawn"
    REGISTER = "register"
    LINK = "link"
    IO = "io"
    CALL = "call"
    RETURN = "return"


class EventClass(str, Enum):
    """Classification of an event relative to a system/environment boundary."""
    EXTERNAL_STIMULUS = "ExternalStimulus"
    ENVIRONMENT_INTERACTION = "EnvironmentInteraction"
    SYSTEM_ACTION = "SystemAction"


class MockOption(str, Enum):
    """A: mock stimuli and interactions. B: mock stimuli only."""
    A = "A"
    B = "B"


class Event(BaseModel):
    """One timestamped, process-attributed trace record."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    seq: int = Field(..., ge=0)
    pid: Pid
    kind: EventKind
    payload: Any
    ts: Tuple[int, int, int]
    origin: Any = None


class Emission(BaseModel):
    """An event produced by a captured system before numbering and timestamping."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    pid: Pid
    kind: EventKind
    payload: Any
    origin: Any = None


class Trace(BaseModel):
    """Ordered list of events; seq is authoritative."""
    model_config = ConfigDict(frozen=True)

    events: List[Event] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_order(self) -> "Trace":
        previous_ts = None
        for index, event in enumerate(self.events):
            expected = self.events[0].seq + index
            if event.seq != expected:
                raise ValueError(f"event seq {event.seq} breaks contiguity (expected {expected})")
            if previous_ts is not None and event.ts < previous_ts:
                raise ValueError(f"timestamp of event {event.seq} decreases")
            previous_ts = event.ts
        return self

    def __len__(self) -> int:
        return len(self.events)

    def prefix(self, last_seq: int) -> "Trace":
        """Events up to and including last_seq."""
        return Trace(events=[event for event in self.events if event.seq <= last_seq])


class Stimulus(BaseModel):
    """An external input the replay harness can re-inject."""
    model_config = ConfigDict(frozen=True)

    target: Any
    payload: Any

    def render(self) -> str:
        return render_term((self.target, self.payload))

    def __str__(self) -> str:
        return self.render()


class Boundary(BaseModel):
    """System/environment boundary: which processes count as environment."""
    model_config = ConfigDict(frozen=True)

    mocked: FrozenSet[Any] = Field(default_factory=frozenset)
    mode: MockOption = MockOption.A

    @classmethod
    def user_only(cls, mode: MockOption = MockOption.A) -> "Boundary":
        """Default boundary: the user and the user's console are the environment."""
        return cls(mocked=frozenset({Atom("user"), Pid(0, 23, 0)}), mode=mode)

    def is_mocked(self, entity: Any) -> bool:
        return entity in self.mocked

    def describe(self) -> List[str]:
        return sorted(render_term(entity) for entity in self.mocked)


class Violation(BaseModel):
    """Identity of a detected contract breach plus its justifying trace prefix."""
    model_config = ConfigDict(frozen=True)

    automaton_id: str
    bad_state: str
    instance_key: Any = None
    at_seq: int = Field(..., ge=0)
    witness: Trace

    def headline(self) -> str:
        instance = "-" if self.instance_key is None else render_term(self.instance_key)
        return f"VIOLATION {self.automaton_id} {self.bad_state} instance={instance} at={self.at_seq}"


class MonitorOutcome(str, Enum):
    NO_VIOLATION = "NoViolation"
    VIOLATED = "Violated"


class MonitorReport(BaseModel):
    """Result of running contracts over a trace."""
    model_config = ConfigDict(frozen=True)

    outcome: MonitorOutcome
    violation: Optional[Violation] = None
    steps_consumed: int = Field(..., ge=0)

    @model_validator(mode="after")
    def _check_consistency(self) -> "MonitorReport":
        if self.outcome is MonitorOutcome.VIOLATED:
            if self.violation is None:
                raise ValueError("a violated report needs a violation")
            if self.steps_consumed != self.violation.at_seq - self._first_seq() + 1:
                raise ValueError("steps_consumed must end at the violating event")
        elif self.violation is not None:
            raise ValueError("a clean report cannot carry a violation")
        return self

    def _first_seq(self) -> int:
        events = self.violation.witness.events
        return events[0].seq if events else 0

    @property
    def violated(self) -> bool:
        return self.outcome is MonitorOutcome.VIOLATED


class ReplayConfig(BaseModel):
    """Parameters of one replay run."""
    model_config = ConfigDict(frozen=True)

    seed: int = 0
    boundary: Boundary = Field(default_factory=Boundary.user_only)
    max_events: int = Field(default=100_000, gt=0)
    tick_us: int = Field(default=1, gt=0)


class Verdict(str, Enum):
    REPRODUCES = "Reproduces"
    DOES_NOT_REPRODUCE = "DoesNotReproduce"


class OracleConfig(BaseModel):
    """Replay threshold and target identity for the simpler-than oracle."""
    model_config = ConfigDict(frozen=True)

    replays_per_candidate: int = Field(default=1, ge=1)
    seed_base: int = 0
    target: Violation


class PassStats(BaseModel):
    """Step accounting for one pass of a strategy."""
    name: str
    items_before: int
    items_after: int
    steps: int = 0
    successful_steps: int = 0


class SimplifyStats(BaseModel):
    """Step accounting for one simplification run."""
    strategy: str
    original_stimuli: int
    final_stimuli: int = 0
    steps: int = 0
    successful_steps: int = 0
    passes: List[PassStats] = Field(default_factory=list)
    accepted_sizes: List[int] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_counts(self) -> "SimplifyStats":
        if self.successful_steps > self.steps:
            raise ValueError("successful_steps cannot exceed steps")
        return self


class SimplifyResult(BaseModel):
    """A minimized stimulus list with its replayed trace and violation."""
    model_config = ConfigDict(frozen=True)

    stimuli: List[Stimulus]
    trace: Trace
    violation: Violation
    stats: SimplifyStats


class ScenarioName(str, Enum):
    SAME_BOOK_TWICE = "same_book_twice"
    MORE_THAN_FOUR = "more_than_four"
    DIFFERENT_CLIENT = "different_client"
    RETURN_WRONG = "return_wrong"


class Scenario(BaseModel):
    """A request for a generated violating stimulus list."""
    model_config = ConfigDict(frozen=True)

    name: ScenarioName
    target_stimuli: int = Field(..., ge=1)
    seed: int = 0


class Strategy(str, Enum):
    DDMIN = "ddmin"
    FOREACH = "foreach"


class RunConfig(BaseModel):
    """Everything one `simplify` invocation needs."""
    contract_path: str
    trace_path: Optional[str] = None
    scenario: Optional[Scenario] = None
    strategy: Strategy = Strategy.FOREACH
    replays: int = Field(default=1, ge=1)
    seed: int = 0
    extra_mocked: List[str] = Field(default_factory=list)
    out_path: Optional[str] = None
    witness_path: Optional[str] = None
    stats_path: Optional[str] = None

    @model_validator(mode="after")
    def _check_source(self) -> "RunConfig":
        if (self.trace_path is None) == (self.scenario is None):
            raise ValueError("exactly one of trace_path or scenario is required")
        return self


class BenchRow(BaseModel):
    """One line of the shrinking benchmark report."""
    scenario: ScenarioName
    original_stimuli: int
    strategy: Strategy
    final_stimuli: int
    steps: int
    successful_steps: int
    bad_state: str
