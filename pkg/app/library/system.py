"""Simulated library service: a registry process plus one handler process per client."""

import random
from typing import Any, Dict, List, Optional, Tuple

import structlog
from pydantic import BaseModel, ConfigDict, Field

from app.exceptions import ReplayError
from app.models import Boundary, Emission, EventKind, Stimulus
from app.processing.terms import Atom, ErlList, Pid
from app.services.replay import CapturedSystem, EnvironmentPort

logger = structlog.get_logger()

LIBRARY = Atom("library")
USER = Atom("user")
CODE_SERVER = Atom("code_server")
CLIENT_MODULE = Atom("client")
LIBRARY_PID = Pid(0, 35, 0)
CONSOLE_PID = Pid(0, 23, 0)
FIRST_CLIENT_NUMBER = 38

NEW_CLIENT = Atom("newClient")
ADD_BOOK = Atom("addBook")
BORROW_BOOK = Atom("borrowBook")
RETURN_BOOK = Atom("returnBook")
REGISTERED_BANNER = "~n*** ~p successfully registered ~n"


class ClientRecord(BaseModel):
    """A registered client's handler process."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    pid: Pid
    loans: Dict[Any, int] = Field(default_factory=dict)
    blocked: bool = False

    def clone(self) -> "ClientRecord":
        return ClientRecord(pid=self.pid, loans=dict(self.loans), blocked=self.blocked)


class LibraryState(BaseModel):
    """Available copies per title, registered clients, and the copy ledger."""
    catalog: Dict[Any, int] = Field(default_factory=dict)
    clients: Dict[Any, ClientRecord] = Field(default_factory=dict)
    added: Dict[Any, int] = Field(default_factory=dict)
    injected: Dict[Any, int] = Field(default_factory=dict)
    next_client: int = FIRST_CLIENT_NUMBER

    def clone(self) -> "LibraryState":
        return LibraryState(
            catalog=dict(self.catalog),
            clients={name: record.clone() for name, record in self.clients.items()},
            added=dict(self.added),
            injected=dict(self.injected),
            next_client=self.next_client,
        )

    def on_loan(self, title: Any) -> int:
        return sum(record.loans.get(title, 0) for record in self.clients.values())

    def holdings(self, client: Any) -> Dict[Any, int]:
        record = self.clients.get(client)
        return {} if record is None else {title: count for title, count in record.loans.items() if count > 0}

    def conservation_errors(self) -> List[str]:
        """Titles whose available + on-loan copies differ from added + injected."""
        errors = []
        titles = set(self.catalog) | set(self.added) | set(self.injected)
        for record in self.clients.values():
            titles |= set(record.loans)
        for title in titles:
            available = self.catalog.get(title, 0)
            loaned = self.on_loan(title)
            if available < 0 or loaned < 0:
                errors.append(f"{title}: negative copy count")
            elif available + loaned != self.added.get(title, 0) + self.injected.get(title, 0):
                errors.append(f"{title}: {available} available + {loaned} on loan != "
                              f"{self.added.get(title, 0)} added + {self.injected.get(title, 0)} injected")
        return errors


class LiveLibraryEnvironment(EnvironmentPort):
    """The production environment: the user's console and, when shifted out, the code server."""

    def __init__(self, boundary: Boundary):
        self.boundary = boundary
        self.live_calls = 0

    def handles(self, partner: Any) -> bool:
        return self.boundary.is_mocked(partner)

    def request(self, requester: Any, partner: Any, message: Any) -> Optional[Any]:
        self.live_calls += 1
        if partner == CODE_SERVER:
            return _code_server_reply(message)
        return None

    def output(self, requester: Any, partner: Any, message: Any) -> None:
        self.live_calls += 1


def _code_server_reply(message: Any) -> Any:
    module = CLIENT_MODULE
    if isinstance(message, tuple) and len(message) == 3 and isinstance(message[2], tuple) and len(message[2]) == 2:
        module = message[2][1]
    return (CODE_SERVER, (Atom("module"), module))


def library_boot() -> Tuple[LibraryState, List[Emission]]:
    """Initial state and the registry's start-up events."""
    return LibraryState(), [Emission(pid=LIBRARY_PID, kind=EventKind.REGISTER, payload=LIBRARY)]


def _bump(counts: Dict[Any, int], key: Any, delta: int) -> None:
    counts[key] = counts.get(key, 0) + delta


def _resolve_client(state: LibraryState, target: Any) -> Optional[Tuple[Any, ClientRecord]]:
    if isinstance(target, Pid):
        for name, record in state.clients.items():
            if record.pid == target:
                return name, record
        return None
    record = state.clients.get(target)
    return (target, record) if record is not None else None


class _Step:
    """Applies one stimulus to a state in place, collecting emissions."""

    def __init__(self, state: LibraryState, environment: EnvironmentPort):
        self.state = state
        self.environment = environment
        self.emissions: List[Emission] = []

    def emit(self, pid: Pid, kind: EventKind, payload: Any, origin: Any = None) -> None:
        self.emissions.append(Emission(pid=pid, kind=kind, payload=payload, origin=origin))

    def exchange(self, client_pid: Pid, request: Any, reply: Any) -> None:
        """Client asks the registry and gets an answer, all inside the system."""
        self.emit(client_pid, EventKind.SEND, (request, LIBRARY))
        self.emit(LIBRARY_PID, EventKind.RECEIVE, request, client_pid)
        self.emit(LIBRARY_PID, EventKind.SEND, (reply, client_pid))
        self.emit(client_pid, EventKind.RECEIVE, reply, LIBRARY_PID)

    def apply(self, stimulus: Stimulus) -> None:
        payload = stimulus.payload
        if not isinstance(payload, tuple) or isinstance(payload, ErlList) or not payload:
            return
        if stimulus.target in (LIBRARY, LIBRARY_PID):
            self._registry(payload)
            return
        resolved = _resolve_client(self.state, stimulus.target)
        if resolved is None or resolved[1].blocked:
            return
        self._client(resolved[0], resolved[1], payload)

    def _registry(self, payload: tuple) -> None:
        if len(payload) != 2:
            return
        tag, argument = payload
        if tag == NEW_CLIENT and isinstance(argument, Atom):
            self.emit(LIBRARY_PID, EventKind.RECEIVE, payload, USER)
            if argument not in self.state.clients:
                self._register(argument)
        elif tag == ADD_BOOK:
            self.emit(LIBRARY_PID, EventKind.RECEIVE, payload, USER)
            _bump(self.state.catalog, argument, 1)
            _bump(self.state.added, argument, 1)

    def _register(self, name: Atom) -> None:
        state = self.state
        pid = Pid(0, state.next_client, 0)
        state.next_client += 1
        record = ClientRecord(pid=pid)
        state.clients[name] = record
        self.emit(LIBRARY_PID, EventKind.SPAWN, (pid, (CLIENT_MODULE, NEW_CLIENT, ErlList([name]))))
        self.emit(LIBRARY_PID, EventKind.LINK, pid)
        self.emit(pid, EventKind.REGISTER, name)
        confirmation = (Atom("confirm_reg"), name)
        self.emit(LIBRARY_PID, EventKind.SEND, (confirmation, pid))
        self.emit(pid, EventKind.RECEIVE, confirmation, LIBRARY_PID)

        load = (Atom("code_call"), pid, (Atom("ensure_loaded"), CLIENT_MODULE))
        self.emit(pid, EventKind.SEND, (load, CODE_SERVER))
        if self.environment.handles(CODE_SERVER):
            reply = self.environment.request(pid, CODE_SERVER, load)
        else:
            reply = _code_server_reply(load)
        if reply is None:
            record.blocked = True
            logger.debug("Client handler blocked on code server", client=str(name))
            return
        self.emit(pid, EventKind.RECEIVE, reply, CODE_SERVER)

        banner = (Atom("io_request"), pid, CONSOLE_PID,
                  (Atom("put_chars"), Atom("unicode"), Atom("io_lib"), Atom("format"),
                   ErlList([REGISTERED_BANNER, ErlList([name])])))
        self.emit(pid, EventKind.SEND, (banner, CONSOLE_PID))
        if self.environment.handles(CONSOLE_PID):
            self.environment.output(pid, CONSOLE_PID, banner)

    def _client(self, name: Any, record: ClientRecord, payload: tuple) -> None:
        state = self.state
        tag = payload[0]
        if tag not in (BORROW_BOOK, RETURN_BOOK):
            return
        if len(payload) == 3:
            # request signed with a client name; received but never served
            self.emit(record.pid, EventKind.RECEIVE, payload, USER)
            return
        if len(payload) != 2:
            return
        title = payload[1]
        if tag == BORROW_BOOK:
            if state.catalog.get(title, 0) <= 0:
                return
            self.emit(record.pid, EventKind.RECEIVE, payload, USER)
            self.exchange(record.pid, (Atom("lend"), title, name), (Atom("lent"), title))
            _bump(state.catalog, title, -1)
            _bump(record.loans, title, 1)
        else:
            self.emit(record.pid, EventKind.RECEIVE, payload, USER)
            self.exchange(record.pid, (Atom("restock"), title, name), (Atom("restocked"), title))
            _bump(state.catalog, title, 1)
            if record.loans.get(title, 0) > 0:
                _bump(record.loans, title, -1)
            else:
                _bump(state.injected, title, 1)


def library_step(
    state: LibraryState, stimulus: Stimulus, environment: Optional[EnvironmentPort] = None
) -> Tuple[LibraryState, List[Emission]]:
    """Apply one stimulus to a copy of state. Invalid stimuli change nothing and emit nothing."""
    port = environment or LiveLibraryEnvironment(Boundary.user_only())
    step = _Step(state.clone(), port)
    step.apply(stimulus)
    return step.state, step.emissions


def interleave(emissions: List[Emission], rng: random.Random) -> List[Emission]:
    """Shuffle emissions across processes, keeping each process's own order."""
    lanes: Dict[Pid, List[Emission]] = {}
    for emission in emissions:
        lanes.setdefault(emission.pid, []).append(emission)
    order = sorted(lanes, key=lambda pid: pid.parts)
    cursors = {pid: 0 for pid in order}
    mixed: List[Emission] = []
    while len(mixed) < len(emissions):
        ready = [pid for pid in order if cursors[pid] < len(lanes[pid])]
        pid = rng.choice(ready)
        mixed.append(lanes[pid][cursors[pid]])
        cursors[pid] += 1
    return mixed


class LibrarySystem(CapturedSystem):
    """The library as a replay target. Resettable, seedable and free of side effects."""

    replay_safe = True

    def __init__(self, nondeterministic: bool = False):
        self.nondeterministic = nondeterministic
        self.state = LibraryState()
        self.rng = random.Random(0)
        self._pending: List[Stimulus] = []
        self._booted = False

    def reset(self, seed: int) -> None:
        self.state = LibraryState()
        self.rng = random.Random(seed)
        self._pending = []
        self._booted = False

    def inject(self, stimulus: Stimulus) -> None:
        self._pending.append(stimulus)

    def drain(self, environment: EnvironmentPort) -> List[Emission]:
        emissions: List[Emission] = []
        if not self._booted:
            self.state, boot = library_boot()
            emissions.extend(boot)
            self._booted = True
        for stimulus in self._pending:
            step = _Step(self.state, environment)
            step.apply(stimulus)
            produced = step.emissions
            if self.nondeterministic and produced:
                produced = interleave(produced, self.rng)
            emissions.extend(produced)
        self._pending = []
        return emissions

    def live_environment(self, boundary: Boundary) -> LiveLibraryEnvironment:
        return LiveLibraryEnvironment(boundary)

    def check_invariants(self) -> None:
        errors = self.state.conservation_errors()
        if errors:
            logger.error("Library copy conservation broken", errors=errors)
            raise ReplayError("; ".join(errors))
