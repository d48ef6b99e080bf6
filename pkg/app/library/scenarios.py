"""Generator of violating library stimulus lists of a requested size."""

import random
from typing import Callable, Dict, Iterator, List

import structlog

from app.exceptions import TargetTooSmall, TraceSimplifierError
from app.library.contracts import SCENARIO_TARGETS, contracts
from app.library.system import ADD_BOOK, BORROW_BOOK, LIBRARY, NEW_CLIENT, RETURN_BOOK, LibrarySystem
from app.models import ReplayConfig, Scenario, ScenarioName, Stimulus
from app.processing.terms import Atom
from app.services import monitor
from app.services.replay import run_live

logger = structlog.get_logger()

CORE_CLIENT = Atom("ian")
IMPOSTOR = Atom("kim")
CORE_TITLES = tuple(Atom(title) for title in ("fable", "story", "wish", "tale", "poem"))
DECOY_CLIENTS = ("bob", "amy", "dan", "eve", "joe", "liz", "max", "ned", "ola", "pam", "roy", "sam", "tom", "uma", "val")
DECOY_TITLES = ("hobby", "atlas", "novel", "opera", "quest", "relic", "sonnet", "verse", "yarn", "epic", "fern", "glyph")


def new_client(name: Atom) -> Stimulus:
    return Stimulus(target=LIBRARY, payload=(NEW_CLIENT, name))


def add_book(title: Atom) -> Stimulus:
    return Stimulus(target=LIBRARY, payload=(ADD_BOOK, title))


def borrow(client: Atom, title: Atom) -> Stimulus:
    return Stimulus(target=client, payload=(BORROW_BOOK, title))


def give_back(client: Atom, title: Atom) -> Stimulus:
    return Stimulus(target=client, payload=(RETURN_BOOK, title))


def case_study_stimuli() -> List[Stimulus]:
    """The eleven stimuli behind the reference return-wrong violation."""
    ian, bob = Atom("ian"), Atom("bob")
    fable, story, wish, hobby = (Atom(title) for title in ("fable", "story", "wish", "hobby"))
    return [
        new_client(ian),
        add_book(fable),
        add_book(story),
        add_book(wish),
        new_client(bob),
        add_book(hobby),
        borrow(ian, story),
        borrow(ian, wish),
        borrow(bob, fable),
        give_back(ian, story),
        give_back(ian, fable),
    ]


def _return_wrong() -> List[Stimulus]:
    return [new_client(CORE_CLIENT), give_back(CORE_CLIENT, CORE_TITLES[0])]


def _different_client() -> List[Stimulus]:
    return [new_client(CORE_CLIENT), Stimulus(target=CORE_CLIENT, payload=(BORROW_BOOK, CORE_TITLES[0], IMPOSTOR))]


def _same_book_twice() -> List[Stimulus]:
    title = CORE_TITLES[0]
    return [new_client(CORE_CLIENT), add_book(title), add_book(title), borrow(CORE_CLIENT, title), borrow(CORE_CLIENT, title)]


def _more_than_four() -> List[Stimulus]:
    return (
        [new_client(CORE_CLIENT)]
        + [add_book(title) for title in CORE_TITLES]
        + [borrow(CORE_CLIENT, title) for title in CORE_TITLES]
    )


CORES: Dict[ScenarioName, Callable[[], List[Stimulus]]] = {
    ScenarioName.RETURN_WRONG: _return_wrong,
    ScenarioName.DIFFERENT_CLIENT: _different_client,
    ScenarioName.SAME_BOOK_TWICE: _same_book_twice,
    ScenarioName.MORE_THAN_FOUR: _more_than_four,
}


def core_size(name: ScenarioName) -> int:
    return len(CORES[name]())


def _names(pool: tuple, prefix: str) -> Iterator[Atom]:
    for name in pool:
        yield Atom(name)
    counter = 0
    while True:
        counter += 1
        yield Atom(f"{prefix}{counter}")


class _DecoyClient:
    def __init__(self, name: Atom):
        self.name = name
        self.holding: List[Atom] = []
        self.shelved: List[Atom] = []

    @property
    def titles(self) -> int:
        return len(self.holding) + len(self.shelved)


def decoy_activity(rng: random.Random, budget: int) -> List[Stimulus]:
    """Harmless traffic: registrations, and decoy clients borrowing and returning their own titles.

    Each decoy title is shelved once, for the one decoy client that uses it. A
    client touches at most two titles, borrows only what it does not hold and
    returns only what it holds, so nothing here can reach a bad state. Most of
    the traffic is addressed to clients rather than to the library.
    """
    clients = _names(DECOY_CLIENTS, "client")
    titles = _names(DECOY_TITLES, "book")
    registered: List[_DecoyClient] = []
    script: List[Stimulus] = []
    while len(script) < budget:
        room = budget - len(script)
        takers = [client for client in registered if client.titles < 2]
        holders = [client for client in registered if client.holding]
        borrowers = [client for client in registered if client.shelved]
        options = ["register"]
        if takers and room >= 2:
            options.append("take")
        if holders:
            options += ["return"] * 3
        if borrowers:
            options += ["borrow"] * 3
        choice = rng.choice(options)
        if choice == "register":
            client = _DecoyClient(next(clients))
            registered.append(client)
            script.append(new_client(client.name))
        elif choice == "take":
            client = rng.choice(takers)
            title = next(titles)
            client.holding.append(title)
            script += [add_book(title), borrow(client.name, title)]
        elif choice == "return":
            client = rng.choice(holders)
            title = client.holding.pop(rng.randrange(len(client.holding)))
            client.shelved.append(title)
            script.append(give_back(client.name, title))
        else:
            client = rng.choice(borrowers)
            title = client.shelved.pop(rng.randrange(len(client.shelved)))
            client.holding.append(title)
            script.append(borrow(client.name, title))
    return script


def merge(core: List[Stimulus], padding: List[Stimulus], rng: random.Random) -> List[Stimulus]:
    """Place core at random positions, keeping both lists' internal order."""
    total = len(core) + len(padding)
    slots = set(rng.sample(range(total), len(core)))
    core_items, padding_items = iter(core), iter(padding)
    return [next(core_items) if index in slots else next(padding_items) for index in range(total)]


def generate(scenario: Scenario) -> List[Stimulus]:
    """Exactly scenario.target_stimuli stimuli whose live run reaches the scenario's bad state.

    Raises:
        TargetTooSmall: the request is shorter than the scenario's violating core.
    """
    core = CORES[scenario.name]()
    if scenario.target_stimuli < len(core):
        raise TargetTooSmall(scenario.name.value, scenario.target_stimuli, len(core))

    if scenario.name is ScenarioName.RETURN_WRONG and scenario.target_stimuli == 11 and scenario.seed == 0:
        stimuli = case_study_stimuli()
    else:
        rng = random.Random(f"{scenario.name.value}:{scenario.target_stimuli}:{scenario.seed}")
        padding = decoy_activity(rng, scenario.target_stimuli - len(core))
        stimuli = merge(core, padding, rng)

    _self_check(scenario, stimuli)
    logger.info("Scenario generated", scenario=scenario.name.value, stimuli=len(stimuli), seed=scenario.seed)
    return stimuli


def _self_check(scenario: Scenario, stimuli: List[Stimulus]) -> None:
    trace = run_live(LibrarySystem(), stimuli, ReplayConfig(seed=scenario.seed))
    report = monitor.run(contracts(), trace)
    expected = SCENARIO_TARGETS[scenario.name]
    found = (report.violation.automaton_id, report.violation.bad_state) if report.violated else None
    if len(stimuli) != scenario.target_stimuli or found != expected:
        logger.error("Generated scenario does not reach its bad state", scenario=scenario.name.value, found=found)
        raise TraceSimplifierError(f"generated {scenario.name.value} list does not reach {expected[1]}")
