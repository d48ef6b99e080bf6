"""Contract automata: patterns, guards, actions, transitions and replica state."""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, PrivateAttr

from app.processing.terms import render_term

PATTERN_KINDS = (
    "stimulus",
    "env_interaction",
    "system_action",
    "spawn",
    "send",
    "receive",
    "register",
    "link",
    "io",
    "call",
    "return",
    "any",
)


@dataclass(frozen=True)
class EventPattern:
    """kind(subject, payload); subject and payload are term patterns."""

    kind: str
    subject: Any
    payload: Any

    def __str__(self) -> str:
        return f"{self.kind}({render_term(self.subject)}, {render_term(self.payload)})"


# ---------------------------------------------------------------------------
# Guards
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StoreRef:
    """Reference to a monitor-local variable inside a guard or action."""

    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Const:
    value: bool

    def __str__(self) -> str:
        return "true" if self.value else "false"


@dataclass(frozen=True)
class Compare:
    op: str
    left: Any
    right: Any

    def __str__(self) -> str:
        return f"{_operand_text(self.left)} {self.op} {_operand_text(self.right)}"


@dataclass(frozen=True)
class Contains:
    set_name: str
    item: Any

    def __str__(self) -> str:
        return f"contains({self.set_name}, {_operand_text(self.item)})"


@dataclass(frozen=True)
class Not:
    inner: Any

    def __str__(self) -> str:
        return f"not {self.inner}"


@dataclass(frozen=True)
class And:
    items: Tuple[Any, ...]

    def __str__(self) -> str:
        return "(" + " and ".join(str(item) for item in self.items) + ")"


@dataclass(frozen=True)
class Or:
    items: Tuple[Any, ...]

    def __str__(self) -> str:
        return "(" + " or ".join(str(item) for item in self.items) + ")"


TRUE = Const(True)
FALSE = Const(False)


# ---------------------------------------------------------------------------
# Actions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Skip:
    def __str__(self) -> str:
        return "skip"


@dataclass(frozen=True)
class SetAdd:
    set_name: str
    item: Any

    def __str__(self) -> str:
        return f"add({self.set_name}, {_operand_text(self.item)})"


@dataclass(frozen=True)
class SetDel:
    set_name: str
    item: Any

    def __str__(self) -> str:
        return f"del({self.set_name}, {_operand_text(self.item)})"


@dataclass(frozen=True)
class Increment:
    name: str
    amount: int = 1

    def __str__(self) -> str:
        return f"inc({self.name})" if self.amount > 0 else f"dec({self.name})"


@dataclass(frozen=True)
class Assign:
    name: str
    value: Any

    def __str__(self) -> str:
        return f"{self.name} := {_operand_text(self.value)}"


def _operand_text(operand: Any) -> str:
    if isinstance(operand, StoreRef):
        return operand.name
    return render_term(operand)


# ---------------------------------------------------------------------------
# Automaton
# ---------------------------------------------------------------------------

class VarType(str, Enum):
    INT = "int"
    SET = "set"


@dataclass(frozen=True)
class VarDecl:
    name: str
    type: VarType
    initial: Any = None
    line: int = 0

    def initial_value(self) -> Any:
        if self.type is VarType.SET:
            return frozenset()
        return 0 if self.initial is None else self.initial


@dataclass(frozen=True)
class Transition:
    source: str
    target: str
    on: EventPattern
    when: Any = TRUE
    do: Tuple[Any, ...] = (Skip(),)
    line: int = 0

    def __str__(self) -> str:
        actions = "; ".join(str(action) for action in self.do)
        return f"{self.source} -> {self.target} on {self.on} when {self.when} do {actions}"


@dataclass(frozen=True)
class Attribution:
    """Maps stimuli matching `pattern` to the replica keyed by the binding of `key_var`."""

    pattern: EventPattern
    key_var: str
    line: int = 0


@dataclass(frozen=True)
class ForeachSpec:
    spawn_pattern: EventPattern
    key_var: str
    attribution: Tuple[Attribution, ...] = field(default_factory=tuple)
    line: int = 0


class ContractAutomaton(BaseModel):
    """A DATE automaton, optionally replicated per spawned instance."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    id: str
    states: Tuple[str, ...]
    initial: str
    bad: Tuple[str, ...] = ()
    variables: Tuple[VarDecl, ...] = ()
    transitions: Tuple[Transition, ...] = ()
    foreach: Optional[ForeachSpec] = None
    line: int = 0

    _by_state: Dict[str, Tuple[Transition, ...]] = PrivateAttr(default_factory=dict)

    def model_post_init(self, __context: Any) -> None:
        index: Dict[str, List[Transition]] = {}
        for transition in self.transitions:
            index.setdefault(transition.source, []).append(transition)
        self._by_state = {state: tuple(items) for state, items in index.items()}

    def transitions_from(self, state: str) -> Tuple[Transition, ...]:
        return self._by_state.get(state, ())

    def is_bad(self, state: str) -> bool:
        return state in self.bad

    def initial_store(self) -> Dict[str, Any]:
        return {decl.name: decl.initial_value() for decl in self.variables}

    def variable(self, name: str) -> Optional[VarDecl]:
        for decl in self.variables:
            if decl.name == name:
                return decl
        return None


class MonitorState(BaseModel):
    """Runtime configuration of one automaton replica."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    current: str
    store: Dict[str, Any] = Field(default_factory=dict)
    instance_key: Any = None


class StepOutcome(str, Enum):
    UNCHANGED = "unchanged"
    MOVED = "moved"
    VIOLATED = "violated"


class StepResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    outcome: StepOutcome
    state: MonitorState
    bad_state: Optional[str] = None
    transition: Optional[str] = None


class Severity(str, Enum):
    ERROR = "error"
    WARNING = "warning"


class Diagnostic(BaseModel):
    """One validator finding."""
    model_config = ConfigDict(frozen=True)

    severity: Severity
    automaton_id: str
    code: str
    message: str
    line: int = 0

    def __str__(self) -> str:
        where = f" (line {self.line})" if self.line else ""
        return f"{self.severity.value}: {self.automaton_id}: {self.message}{where}"
