"""Offline monitoring of traces against contract automata."""

from typing import Any, Dict, List, Optional, Sequence

import structlog

from app.contracts.automata import ContractAutomaton, MonitorState, StepOutcome
from app.contracts.engine import StepContext, initial_state, spawn_replica, step, view_event
from app.models import Boundary, Event, MonitorOutcome, MonitorReport, Trace, Violation
from app.processing.event_classifier import note_registration
from app.processing.trace_codec import render_canonical

logger = structlog.get_logger()


class MonitorRun:
    """Incremental monitor: feed events in seq order until one violates.

    Replicas are stepped in launch order before the current event may launch
    a new one, so a spawn event is never offered to the replica it creates.
    """

    def __init__(self, contracts: Sequence[ContractAutomaton], boundary: Optional[Boundary] = None):
        self.contracts = list(contracts)
        self.names: Dict[Any, Any] = {}
        self.context = StepContext(names=self.names, boundary=boundary or Boundary.user_only())
        self.replicas: List[List[MonitorState]] = [
            [] if automaton.foreach is not None else [initial_state(automaton)] for automaton in self.contracts
        ]
        self._keys: List[set] = [set() for _ in self.contracts]
        self.violation: Optional[Violation] = None
        self.consumed = 0

    def feed(self, event: Event, trace: Trace) -> Optional[Violation]:
        """Offer one event to every replica; return the first violation it causes."""
        if self.violation is not None:
            return self.violation
        self.consumed += 1
        note_registration(self.names, event)
        view = view_event(event, self.context)
        for index, automaton in enumerate(self.contracts):
            live = self.replicas[index]
            for position, state in enumerate(live):
                result = step(automaton, state, event, view=view)
                if result.outcome is StepOutcome.UNCHANGED:
                    continue
                live[position] = result.state
                if result.outcome is StepOutcome.VIOLATED:
                    self.violation = Violation(
                        automaton_id=automaton.id,
                        bad_state=result.bad_state,
                        instance_key=state.instance_key,
                        at_seq=event.seq,
                        witness=trace.prefix(event.seq),
                    )
                    return self.violation
            if automaton.foreach is not None:
                replica = spawn_replica(automaton.foreach, automaton, event, view=view)
                if replica is not None and replica.instance_key not in self._keys[index]:
                    self._keys[index].add(replica.instance_key)
                    live.append(replica)
        return None

    def report(self) -> MonitorReport:
        if self.violation is not None:
            return MonitorReport(outcome=MonitorOutcome.VIOLATED, violation=self.violation, steps_consumed=self.consumed)
        return MonitorReport(outcome=MonitorOutcome.NO_VIOLATION, steps_consumed=self.consumed)

    def states_of(self, automaton_id: str) -> List[MonitorState]:
        for automaton, live in zip(self.contracts, self.replicas):
            if automaton.id == automaton_id:
                return list(live)
        raise KeyError(automaton_id)


def run(contracts: Sequence[ContractAutomaton], trace: Trace, boundary: Optional[Boundary] = None) -> MonitorReport:
    """Process events in seq order, halting at the first violation.

    Ties on one event break by contract declaration order, then replica
    launch order.

    Raises:
        AmbiguousMatch: a replica had more than one enabled transition.
    """
    monitor = MonitorRun(contracts, boundary)
    for event in trace.events:
        if monitor.feed(event, trace) is not None:
            break
    report = monitor.report()
    if report.violated:
        logger.debug("Violation detected", headline=report.violation.headline())
    return report


def same_violation(first: Violation, second: Violation) -> bool:
    """Same automaton and bad state; instance and position do not matter."""
    return first.automaton_id == second.automaton_id and first.bad_state == second.bad_state


def render_report(report: MonitorReport) -> str:
    """`VIOLATION ...` headline followed by the canonical witness, or `OK`."""
    if not report.violated:
        return "OK\n"
    return report.violation.headline() + "\n" + render_canonical(report.violation.witness)
