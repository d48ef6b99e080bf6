# Contract automata package
from app.contracts.automata import ContractAutomaton, ForeachSpec, MonitorState, StepOutcome, StepResult
from app.contracts.engine import StepContext, attribute_stimulus, spawn_replica, step, validate

__all__ = [
    "ContractAutomaton",
    "ForeachSpec",
    "MonitorState",
    "StepContext",
    "StepOutcome",
    "StepResult",
    "attribute_stimulus",
    "spawn_replica",
    "step",
    "validate",
]
