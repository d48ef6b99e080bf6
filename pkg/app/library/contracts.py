"""The library's contracts, shipped as a DSL file next to the package config."""

from functools import lru_cache
from typing import Dict, List, Tuple

from app.config import PACKAGE_CONFIG_DIR
from app.contracts.automata import ContractAutomaton
from app.models import ScenarioName
from app.processing.contract_parser import load_contracts

LIBRARY_CONTRACT_PATH = PACKAGE_CONFIG_DIR / "library.contract"

# (automaton id, bad state) each scenario is built to reach
SCENARIO_TARGETS: Dict[ScenarioName, Tuple[str, str]] = {
    ScenarioName.SAME_BOOK_TWICE: ("same_book_twice", "same_book_twice"),
    ScenarioName.MORE_THAN_FOUR: ("library_user", "more_than_four"),
    ScenarioName.DIFFERENT_CLIENT: ("different_client", "named_wrong"),
    ScenarioName.RETURN_WRONG: ("library_user", "return_wrong"),
}


@lru_cache(maxsize=1)
def _load() -> Tuple[ContractAutomaton, ...]:
    return tuple(load_contracts(LIBRARY_CONTRACT_PATH))


def contracts() -> List[ContractAutomaton]:
    """same_book_twice, library_user (more than four, return wrong) and different_client, validated."""
    return list(_load())


def contract_by_id(automaton_id: str) -> ContractAutomaton:
    for automaton in _load():
        if automaton.id == automaton_id:
            return automaton
    raise KeyError(automaton_id)
