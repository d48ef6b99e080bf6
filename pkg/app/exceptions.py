"""Exception hierarchy for the trace simplification toolkit."""

from typing import Any, List, Optional


class TraceSimplifierError(Exception):
    """Base class for all toolkit errors."""


class ParseError(TraceSimplifierError):
    """Malformed term, trace or contract text."""

    def __init__(self, line: int, column: int, expected: str, found: Optional[str] = None):
        self.line = line
        self.column = column
        self.expected = expected
        self.found = found
        message = f"line {line}, column {column}: expected {expected}"
        if found is not None:
            message += f", found {found!r}"
        super().__init__(message)


class ContractValidationError(TraceSimplifierError):
    """A contract failed static validation."""

    def __init__(self, automaton_id: str, diagnostics: List[Any]):
        self.automaton_id = automaton_id
        self.diagnostics = diagnostics
        details = "; ".join(str(d) for d in diagnostics)
        super().__init__(f"contract {automaton_id} is invalid: {details}")


class AmbiguousMatch(TraceSimplifierError):
    """More than one transition fired for the same event."""

    def __init__(self, automaton_id: str, state: str, targets: List[str], seq: int):
        self.automaton_id = automaton_id
        self.state = state
        self.targets = targets
        self.seq = seq
        super().__init__(
            f"automaton {automaton_id} is ambiguous in state {state} at event {seq}: "
            f"transitions to {', '.join(targets)} all match"
        )


class ReplayError(TraceSimplifierError):
    """Base class for replay harness errors."""


class ReplayBudgetExceeded(ReplayError):
    """The replay emitted more events than the configured cap."""

    def __init__(self, max_events: int, trace: Any = None):
        self.max_events = max_events
        self.trace = trace
        super().__init__(f"replay exceeded the budget of {max_events} events")


class UnsupportedMockOption(ReplayError):
    """Option B requested for a system that cannot run against its live environment."""


class NotReproducible(TraceSimplifierError):
    """The unreduced stimuli do not reproduce the target violation."""

    def __init__(self, stimuli_count: int, target: Any = None):
        self.stimuli_count = stimuli_count
        self.target = target
        super().__init__(
            f"replaying the original {stimuli_count} stimuli does not reproduce the violation"
        )


class TargetTooSmall(TraceSimplifierError):
    """Requested scenario size is below the scenario's violating core."""

    def __init__(self, scenario: str, requested: int, minimum: int):
        self.scenario = scenario
        self.requested = requested
        self.minimum = minimum
        super().__init__(
            f"scenario {scenario} needs at least {minimum} stimuli, {requested} requested"
        )


class NoViolationFound(TraceSimplifierError):
    """The input trace satisfies every loaded contract."""

    def __init__(self, events: int):
        self.events = events
        super().__init__(f"no contract is violated by the {events}-event input trace")
