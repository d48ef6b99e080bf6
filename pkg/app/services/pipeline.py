"""Simplification pipeline: find the target violation, capture, shrink."""

from typing import List, Optional, Sequence

import structlog

from app.config import settings
from app.contracts.automata import ContractAutomaton
from app.exceptions import NoViolationFound
from app.library.system import LibrarySystem
from app.models import Boundary, OracleConfig, ReplayConfig, RunConfig, SimplifyResult, Stimulus, Strategy, Trace, Violation
from app.processing.contract_parser import load_contracts
from app.processing.event_classifier import extract_stimuli
from app.services import monitor
from app.services.replay import CapturedSystem, capture, mocked_entities, run_live, shift_boundary
from app.services.simplifier import ReplayOracle, ddmin, foreach_ddmin

logger = structlog.get_logger()


def default_boundary(extra_mocked: Sequence[str] = ()) -> Boundary:
    """The configured environment processes plus any `--mock` additions."""
    base = Boundary(mocked=frozenset(mocked_entities(settings.default_mocked)))
    return shift_boundary(base, mocked_entities(extra_mocked))


class TraceSimplifier:
    """Runs the whole flow for one violation trace against one captured system."""

    def __init__(
        self,
        contracts: Sequence[ContractAutomaton],
        system: Optional[CapturedSystem] = None,
        boundary: Optional[Boundary] = None,
        replays: int = 1,
        seed: int = 0,
    ):
        if system is None:
            system = LibrarySystem()
        self.contracts = list(contracts)
        self.system = system
        self.boundary = boundary or default_boundary()
        self.replays = replays
        self.seed = seed
        self.replay_config = ReplayConfig(
            seed=seed,
            boundary=self.boundary,
            max_events=settings.max_events,
            tick_us=settings.timestamp_tick_us,
        )

    @classmethod
    def from_run_config(cls, config: RunConfig, system: Optional[CapturedSystem] = None) -> "TraceSimplifier":
        return cls(
            load_contracts(config.contract_path),
            system=system,
            boundary=default_boundary(config.extra_mocked),
            replays=config.replays,
            seed=config.seed,
        )

    def production_run(self, stimuli: Sequence[Stimulus]) -> Trace:
        """Run the system live; the result plays the role of a recorded violation trace."""
        return run_live(self.system, stimuli, self.replay_config)

    def find_target(self, trace: Trace) -> Violation:
        report = monitor.run(self.contracts, trace, self.boundary)
        if not report.violated:
            raise NoViolationFound(len(trace.events))
        logger.info("Target violation found", headline=report.violation.headline())
        return report.violation

    def stimuli_of(self, trace: Trace) -> List[Stimulus]:
        return extract_stimuli(trace, self.boundary)

    def contract(self, automaton_id: str) -> ContractAutomaton:
        for automaton in self.contracts:
            if automaton.id == automaton_id:
                return automaton
        raise KeyError(automaton_id)

    def simplify_trace(self, trace: Trace, strategy: Strategy = Strategy.FOREACH) -> SimplifyResult:
        """Shrink the stimuli behind the first violation in trace.

        Args:
            trace: A recorded (or production-run) trace that violates a contract
            strategy: ddmin, or the two-pass foreach search

        Returns:
            SimplifyResult whose violation is the same bad state as the trace's

        Raises:
            NoViolationFound: the trace violates nothing.
            NotReproducible: the extracted stimuli do not reproduce under replay.
        """
        try:
            target = self.find_target(trace)
            stimuli = self.stimuli_of(trace)
            mock = capture(trace, self.boundary)
            oracle = ReplayOracle(
                self.system,
                mock,
                self.contracts,
                OracleConfig(replays_per_candidate=self.replays, seed_base=self.seed, target=target),
                self.replay_config,
            )
            contract = self.contract(target.automaton_id)
            if strategy is Strategy.FOREACH and contract.foreach is None:
                logger.warning("Contract has no foreach clause, using ddmin", contract=contract.id)
                strategy = Strategy.DDMIN

            logger.info("Starting simplification", strategy=strategy.value, stimuli=len(stimuli), replays=self.replays)
            if strategy is Strategy.FOREACH:
                return foreach_ddmin(stimuli, contract, oracle)
            return ddmin(stimuli, oracle)

        except Exception as exc:
            logger.error("Simplification failed", error=str(exc), strategy=strategy.value)
            raise

    def simplify_stimuli(self, stimuli: Sequence[Stimulus], strategy: Strategy = Strategy.FOREACH) -> SimplifyResult:
        """Production run of stimuli, then simplification of the resulting trace."""
        return self.simplify_trace(self.production_run(stimuli), strategy)
