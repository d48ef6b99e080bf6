"""Test configuration and fixtures."""

from pathlib import Path

import pytest

from app.library.contracts import contracts
from app.library.scenarios import case_study_stimuli
from app.library.system import CLIENT_MODULE, LIBRARY_PID, NEW_CLIENT, USER, LibrarySystem
from app.models import Boundary, Event, EventKind, OracleConfig, ReplayConfig, Trace
from app.processing.terms import Atom, ErlList, Pid
from app.processing.trace_codec import load_stimuli
from app.services import monitor
from app.services.replay import capture, run_live
from app.services.simplifier import ReplayOracle

TEST_DATA = Path(__file__).resolve().parent.parent / "test_data"


@pytest.fixture
def test_data_dir():
    """Directory of fixture files."""
    return TEST_DATA


@pytest.fixture
def raw_excerpt():
    """The nine-record VM trace excerpt from the case study."""
    return (TEST_DATA / "case_study_raw.trace").read_text(encoding="utf-8")


@pytest.fixture
def library_contracts():
    """same_book_twice, library_user and different_client."""
    return contracts()


@pytest.fixture
def case_study():
    """The eleven case-study stimuli."""
    return case_study_stimuli()


@pytest.fixture
def case_study_from_file():
    return load_stimuli(TEST_DATA / "case_study_stimuli.txt")


@pytest.fixture
def boundary():
    """User and console as the environment."""
    return Boundary.user_only()


@pytest.fixture
def library_system():
    return LibrarySystem()


@pytest.fixture
def replay_config(boundary):
    return ReplayConfig(seed=0, boundary=boundary)


@pytest.fixture
def live_trace(library_system, replay_config):
    """Production run of a stimulus list against the live environment."""

    def _run(stimuli, system=None, config=None):
        return run_live(system or library_system, stimuli, config or replay_config)

    return _run


@pytest.fixture
def make_trace():
    """Number and timestamp (pid, kind, payload[, origin]) rows into a Trace."""

    def _build(rows):
        events = []
        for seq, row in enumerate(rows):
            pid, kind, payload = row[:3]
            origin = row[3] if len(row) > 3 else None
            events.append(Event(seq=seq, pid=pid, kind=kind, payload=payload, ts=(0, 0, seq), origin=origin))
        return Trace(events=events)

    return _build


@pytest.fixture
def client_rows():
    """Rows for the registry spawning and registering one client handler."""

    def _rows(name, number=38):
        pid = Pid(0, number, 0)
        return [
            (LIBRARY_PID, EventKind.RECEIVE, (NEW_CLIENT, Atom(name)), USER),
            (LIBRARY_PID, EventKind.SPAWN, (pid, (CLIENT_MODULE, NEW_CLIENT, ErlList([Atom(name)])))),
            (pid, EventKind.REGISTER, Atom(name)),
        ]

    return _rows


@pytest.fixture
def oracle_factory(library_contracts, replay_config):
    """Build a ReplayOracle whose target is the first violation of a live run."""

    def _build(stimuli, replays=1, system=None, config=None):
        system = system or LibrarySystem()
        config = config or replay_config
        trace = run_live(system, stimuli, config)
        report = monitor.run(library_contracts, trace, config.boundary)
        assert report.violated, "fixture stimuli must violate a contract"
        return ReplayOracle(
            system,
            capture(trace, config.boundary),
            library_contracts,
            OracleConfig(replays_per_candidate=replays, seed_base=config.seed, target=report.violation),
            config,
        )

    return _build
