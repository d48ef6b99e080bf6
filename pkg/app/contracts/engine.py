"""Transition semantics, replica launch, stimulus attribution and static validation."""

from collections import Counter
from dataclasses import dataclass, field
from typing import Any, Dict, Iterator, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import structlog

from app.contracts.automata import (
    PATTERN_KINDS,
    And,
    Assign,
    Compare,
    Const,
    Contains,
    ContractAutomaton,
    Diagnostic,
    EventPattern,
    ForeachSpec,
    Increment,
    MonitorState,
    Not,
    Or,
    SetAdd,
    SetDel,
    Severity,
    Skip,
    StepOutcome,
    StepResult,
    StoreRef,
    Transition,
    VarType,
)
from app.exceptions import AmbiguousMatch, ContractValidationError
from app.models import Boundary, Event, EventClass, EventKind, Stimulus
from app.processing.event_classifier import classify, resolve_actor, send_parts
from app.processing.terms import ErlList, Var, iter_variables, match_pattern, patterns_unify

logger = structlog.get_logger()

_CLASS_KINDS = {
    "stimulus": EventClass.EXTERNAL_STIMULUS,
    "env_interaction": EventClass.ENVIRONMENT_INTERACTION,
    "system_action": EventClass.SYSTEM_ACTION,
}
_STIMULUS_KINDS = ("stimulus", "receive", "any")
_ORDERING = {
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


@dataclass(frozen=True)
class StepContext:
    """What pattern matching needs beyond the event: registered names and the boundary."""

    names: Mapping[Any, Any] = field(default_factory=dict)
    boundary: Boundary = field(default_factory=Boundary.user_only)


class EventView(NamedTuple):
    kind: str
    event_class: EventClass
    subject: Any
    payload: Any


def view_event(event: Event, context: StepContext) -> EventView:
    """Project an event onto the (kind, subject, payload) shape patterns match against.

    Spawns are viewed as module(function(args...)); sends by their message;
    everything else by the acting process's registered name and payload.
    """
    actor = resolve_actor(context.names, event.pid)
    subject, payload = actor, event.payload
    if event.kind is EventKind.SPAWN:
        spawned = event.payload
        if isinstance(spawned, tuple) and len(spawned) == 2:
            mfa = spawned[1]
            if isinstance(mfa, tuple) and not isinstance(mfa, ErlList) and len(mfa) == 3 and isinstance(mfa[2], ErlList):
                subject, payload = mfa[0], (mfa[1],) + tuple(mfa[2])
    elif event.kind is EventKind.SEND:
        payload, _ = send_parts(event)
    return EventView(event.kind.value, classify(event, context.boundary), subject, payload)


def _kind_matches(kind: str, view: EventView) -> bool:
    if kind == "any":
        return True
    event_class = _CLASS_KINDS.get(kind)
    if event_class is not None:
        return view.event_class is event_class
    return view.kind == kind


def match_view(pattern: EventPattern, view: EventView, bindings: Dict[str, Any]) -> Optional[Dict[str, Any]]:
    if not _kind_matches(pattern.kind, view):
        return None
    bound = match_pattern(pattern.subject, view.subject, bindings)
    if bound is None:
        return None
    return match_pattern(pattern.payload, view.payload, bound)


# ---------------------------------------------------------------------------
# Guards and actions
# ---------------------------------------------------------------------------

def operand_value(operand: Any, bindings: Mapping[str, Any], store: Mapping[str, Any]) -> Any:
    if isinstance(operand, StoreRef):
        return store[operand.name]
    if isinstance(operand, Var):
        return bindings[operand.name]
    if isinstance(operand, ErlList):
        return ErlList(operand_value(item, bindings, store) for item in operand)
    if isinstance(operand, tuple):
        return tuple(operand_value(item, bindings, store) for item in operand)
    return operand


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def evaluate(condition: Any, bindings: Mapping[str, Any], store: Mapping[str, Any]) -> bool:
    """Total evaluation; ordering comparisons on non-integers are false."""
    if isinstance(condition, Const):
        return condition.value
    if isinstance(condition, Not):
        return not evaluate(condition.inner, bindings, store)
    if isinstance(condition, And):
        return all(evaluate(item, bindings, store) for item in condition.items)
    if isinstance(condition, Or):
        return any(evaluate(item, bindings, store) for item in condition.items)
    if isinstance(condition, Contains):
        return operand_value(condition.item, bindings, store) in store[condition.set_name]
    if isinstance(condition, Compare):
        left = operand_value(condition.left, bindings, store)
        right = operand_value(condition.right, bindings, store)
        if condition.op == "=":
            return left == right
        if condition.op == "!=":
            return left != right
        if not (_is_int(left) and _is_int(right)):
            return False
        return _ORDERING[condition.op](left, right)
    raise TypeError(f"not a condition: {condition!r}")


def apply_actions(actions: Sequence[Any], bindings: Mapping[str, Any], store: Mapping[str, Any]) -> Dict[str, Any]:
    """Run statements left to right over a copy of the store."""
    updated = dict(store)
    for action in actions:
        if isinstance(action, Skip):
            continue
        if isinstance(action, SetAdd):
            updated[action.set_name] = updated[action.set_name] | {operand_value(action.item, bindings, updated)}
        elif isinstance(action, SetDel):
            updated[action.set_name] = updated[action.set_name] - {operand_value(action.item, bindings, updated)}
        elif isinstance(action, Increment):
            updated[action.name] = updated[action.name] + action.amount
        elif isinstance(action, Assign):
            updated[action.name] = operand_value(action.value, bindings, updated)
        else:
            raise TypeError(f"not an action: {action!r}")
    return updated


# ---------------------------------------------------------------------------
# Stepping
# ---------------------------------------------------------------------------

def initial_state(automaton: ContractAutomaton, instance_key: Any = None) -> MonitorState:
    return MonitorState(current=automaton.initial, store=automaton.initial_store(), instance_key=instance_key)


def _prebound(automaton: ContractAutomaton, state: MonitorState) -> Dict[str, Any]:
    if automaton.foreach is None or state.instance_key is None:
        return {}
    return {automaton.foreach.key_var: state.instance_key}


def step(
    automaton: ContractAutomaton,
    state: MonitorState,
    event: Event,
    context: Optional[StepContext] = None,
    view: Optional[EventView] = None,
) -> StepResult:
    """Offer one event to one replica.

    Raises:
        AmbiguousMatch: more than one transition from the current state fires.
    """
    if view is None:
        view = view_event(event, context or StepContext())
    prebound = _prebound(automaton, state)
    fired: List[Tuple[Transition, Dict[str, Any]]] = []
    for transition in automaton.transitions_from(state.current):
        bindings = match_view(transition.on, view, prebound)
        if bindings is not None and evaluate(transition.when, bindings, state.store):
            fired.append((transition, bindings))

    if not fired:
        return StepResult(outcome=StepOutcome.UNCHANGED, state=state)
    if len(fired) > 1:
        raise AmbiguousMatch(automaton.id, state.current, [t.target for t, _ in fired], event.seq)

    transition, bindings = fired[0]
    moved = MonitorState(
        current=transition.target,
        store=apply_actions(transition.do, bindings, state.store),
        instance_key=state.instance_key,
    )
    if automaton.is_bad(transition.target):
        return StepResult(outcome=StepOutcome.VIOLATED, state=moved, bad_state=transition.target, transition=str(transition))
    return StepResult(outcome=StepOutcome.MOVED, state=moved, transition=str(transition))


def spawn_replica(
    spec: ForeachSpec,
    automaton: ContractAutomaton,
    event: Event,
    context: Optional[StepContext] = None,
    view: Optional[EventView] = None,
) -> Optional[MonitorState]:
    """A fresh replica keyed by the spawn pattern's key binding, or None."""
    if view is None:
        view = view_event(event, context or StepContext())
    bindings = match_view(spec.spawn_pattern, view, {})
    if bindings is None or spec.key_var not in bindings:
        return None
    return initial_state(automaton, bindings[spec.key_var])


def attribute_stimulus(spec: ForeachSpec, stimulus: Stimulus) -> Optional[Any]:
    """Instance key of the first attribution rule matching the stimulus, else None."""
    for rule in spec.attribution:
        if rule.pattern.kind not in _STIMULUS_KINDS:
            continue
        bindings = match_pattern(rule.pattern.subject, stimulus.target, {})
        if bindings is not None:
            bindings = match_pattern(rule.pattern.payload, stimulus.payload, bindings)
        if bindings is not None and rule.key_var in bindings:
            return bindings[rule.key_var]
    return None


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def _condition_nodes(condition: Any) -> Iterator[Any]:
    yield condition
    if isinstance(condition, Not):
        yield from _condition_nodes(condition.inner)
    elif isinstance(condition, (And, Or)):
        for item in condition.items:
            yield from _condition_nodes(item)


def _operand_refs(operand: Any) -> Iterator[Any]:
    if isinstance(operand, (StoreRef, Var)):
        yield operand
    elif isinstance(operand, tuple):
        for item in operand:
            yield from _operand_refs(item)


def _pattern_variables(pattern: EventPattern) -> List[str]:
    return list(iter_variables(pattern.subject)) + list(iter_variables(pattern.payload))


def _kinds_overlap(left: str, right: str) -> bool:
    if left == "any" or right == "any" or left == right:
        return True
    left_class, right_class = left in _CLASS_KINDS, right in _CLASS_KINDS
    return left_class != right_class


def _patterns_overlap(left: EventPattern, right: EventPattern) -> bool:
    return (
        _kinds_overlap(left.kind, right.kind)
        and patterns_unify(left.subject, right.subject)
        and patterns_unify(left.payload, right.payload)
    )


class _Validator:
    def __init__(self, automaton: ContractAutomaton):
        self.automaton = automaton
        self.diagnostics: List[Diagnostic] = []
        self.declared = {decl.name: decl for decl in automaton.variables}

    def report(self, severity: Severity, code: str, message: str, line: int = 0) -> None:
        self.diagnostics.append(
            Diagnostic(severity=severity, automaton_id=self.automaton.id, code=code, message=message, line=line)
        )

    def error(self, code: str, message: str, line: int = 0) -> None:
        self.report(Severity.ERROR, code, message, line)

    def run(self) -> List[Diagnostic]:
        automaton = self.automaton
        states = set(automaton.states)
        if automaton.initial not in states:
            self.error("undeclared-initial", f"initial state {automaton.initial} is not declared", automaton.line)
        for bad in automaton.bad:
            if bad not in states:
                self.error("undeclared-bad", f"bad state {bad} is not declared", automaton.line)
        for name, count in Counter(decl.name for decl in automaton.variables).items():
            if count > 1:
                self.error("duplicate-variable", f"variable {name} is declared {count} times")
        for decl in automaton.variables:
            if decl.type is VarType.INT and decl.initial is not None and not _is_int(decl.initial):
                self.error("type", f"integer {decl.name} has a non-integer initial value", decl.line)

        key_var = automaton.foreach.key_var if automaton.foreach else None
        if automaton.foreach is not None:
            self._check_foreach(automaton.foreach)

        for transition in automaton.transitions:
            self._check_transition(transition, states, key_var)
        self._check_ambiguity()
        self._check_reachability()
        return self.diagnostics

    def _check_pattern(self, pattern: EventPattern, line: int) -> List[str]:
        if pattern.kind not in PATTERN_KINDS:
            self.error("unknown-kind", f"unknown event kind {pattern.kind}", line)
        names = _pattern_variables(pattern)
        for name, count in Counter(names).items():
            if count > 1:
                self.error("duplicate-binding", f"variable {name} is bound {count} times in {pattern}", line)
        return names

    def _check_foreach(self, spec: ForeachSpec) -> None:
        bound = self._check_pattern(spec.spawn_pattern, spec.line)
        if spec.key_var not in bound:
            self.error("foreach-key", f"key {spec.key_var} is not bound by {spec.spawn_pattern}", spec.line)
        for rule in spec.attribution:
            names = self._check_pattern(rule.pattern, rule.line)
            if rule.pattern.kind not in _STIMULUS_KINDS:
                self.error("attribution-kind", f"attribution {rule.pattern} cannot match a stimulus", rule.line)
            if rule.key_var not in names:
                self.error("attribution-key", f"attribution {rule.pattern} does not bind {rule.key_var}", rule.line)

    def _check_transition(self, transition: Transition, states: set, key_var: Optional[str]) -> None:
        line = transition.line
        for end in (transition.source, transition.target):
            if end not in states:
                self.error("undeclared-state", f"state {end} is not declared", line)
        bound = set(self._check_pattern(transition.on, line))
        if key_var is not None:
            bound.add(key_var)
        for node in _condition_nodes(transition.when):
            if isinstance(node, Contains):
                self._expect_var(node.set_name, VarType.SET, line)
                self._check_operand(node.item, bound, line)
            elif isinstance(node, Compare):
                for side in (node.left, node.right):
                    self._check_operand(side, bound, line)
                    if isinstance(side, StoreRef) and node.op in _ORDERING:
                        self._expect_var(side.name, VarType.INT, line)
        for action in transition.do:
            if isinstance(action, (SetAdd, SetDel)):
                self._expect_var(action.set_name, VarType.SET, line)
                self._check_operand(action.item, bound, line)
            elif isinstance(action, Increment):
                self._expect_var(action.name, VarType.INT, line)
            elif isinstance(action, Assign):
                self._expect_var(action.name, VarType.INT, line)
                self._check_operand(action.value, bound, line)

    def _expect_var(self, name: str, expected: VarType, line: int) -> None:
        decl = self.declared.get(name)
        if decl is None:
            self.error("undeclared-variable", f"variable {name} is not declared", line)
        elif decl.type is not expected:
            self.error("type", f"{name} is a {decl.type.value} variable, {expected.value} required", line)

    def _check_operand(self, operand: Any, bound: set, line: int) -> None:
        for ref in _operand_refs(operand):
            if isinstance(ref, StoreRef) and ref.name not in self.declared:
                self.error("undeclared-variable", f"variable {ref.name} is not declared", line)
            elif isinstance(ref, Var) and ref.name not in bound:
                self.error("unbound-variable", f"{ref.name} is not bound by the transition's pattern", line)

    def _check_ambiguity(self) -> None:
        transitions = self.automaton.transitions
        for index, first in enumerate(transitions):
            for second in transitions[index + 1:]:
                if first.source != second.source:
                    continue
                if first.when == Const(True) and second.when == Const(True) and _patterns_overlap(first.on, second.on):
                    self.error(
                        "ambiguous",
                        f"transitions {first.source} -> {first.target} and {second.source} -> {second.target} "
                        "can fire on the same event",
                        second.line,
                    )

    def _check_reachability(self) -> None:
        automaton = self.automaton
        if automaton.initial not in automaton.states:
            return
        reached = {automaton.initial}
        frontier = [automaton.initial]
        while frontier:
            for transition in automaton.transitions_from(frontier.pop()):
                if transition.target not in reached:
                    reached.add(transition.target)
                    frontier.append(transition.target)
        for state in automaton.states:
            if state not in reached:
                self.report(Severity.WARNING, "unreachable", f"state {state} is unreachable")
        for bad in automaton.bad:
            if automaton.transitions_from(bad):
                self.report(Severity.WARNING, "bad-outgoing", f"bad state {bad} has outgoing transitions")


def validate(automaton: ContractAutomaton) -> List[Diagnostic]:
    """Static checks; an empty list means the automaton is well formed."""
    return _Validator(automaton).run()


def ensure_valid(automata: Sequence[ContractAutomaton]) -> None:
    """Raise ContractValidationError on the first automaton with error diagnostics."""
    for automaton in automata:
        diagnostics = validate(automaton)
        for diagnostic in diagnostics:
            if diagnostic.severity is Severity.WARNING:
                logger.warning("Contract warning", automaton=automaton.id, message=diagnostic.message)
        errors = [d for d in diagnostics if d.severity is Severity.ERROR]
        if errors:
            logger.error("Contract failed validation", automaton=automaton.id, errors=len(errors))
            raise ContractValidationError(automaton.id, errors)
