"""Delta debugging over external stimuli, guided by a replay oracle."""

from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import structlog
import yaml

from app.config import settings
from app.contracts.automata import ContractAutomaton
from app.contracts.engine import attribute_stimulus
from app.exceptions import NotReproducible, ReplayBudgetExceeded
from app.models import (
    OracleConfig,
    PassStats,
    ReplayConfig,
    SimplifyResult,
    SimplifyStats,
    Stimulus,
    Strategy,
    Trace,
    Verdict,
    Violation,
)
from app.processing.event_classifier import is_subsequence
from app.processing.terms import render_term
from app.services import monitor
from app.services.replay import CapturedSystem, MockEnvironment, replay

logger = structlog.get_logger()

Candidate = Tuple[Stimulus, ...]


def simpler_than(first: Tuple[Sequence[Stimulus], Violation], second: Tuple[Sequence[Stimulus], Violation]) -> bool:
    """Same bad state, reached with a strict subsequence of the stimuli."""
    first_stimuli, first_violation = first
    second_stimuli, second_violation = second
    return (
        monitor.same_violation(first_violation, second_violation)
        and len(first_stimuli) < len(second_stimuli)
        and is_subsequence(first_stimuli, second_stimuli)
    )


class ReplayOracle:
    """Replays candidates and checks whether the target bad state is reached again.

    A candidate reproduces if any of k seeded replays does. Every replay costs
    one step; verdicts are remembered so a repeated candidate costs nothing
    unless the cache is bypassed.
    """

    def __init__(
        self,
        system: CapturedSystem,
        mock: MockEnvironment,
        contracts: Sequence[ContractAutomaton],
        config: OracleConfig,
        replay_config: Optional[ReplayConfig] = None,
    ):
        self.system = system
        self.mock = mock
        self.contracts = list(contracts)
        self.config = config
        self.replay_config = replay_config or ReplayConfig(
            max_events=settings.max_events, tick_us=settings.timestamp_tick_us
        )
        self.steps = 0
        self.successful_steps = 0
        self._verdicts: Dict[Candidate, Optional[Tuple[Trace, Violation]]] = {}

    @property
    def target(self) -> Violation:
        return self.config.target

    def probe(self, candidate: Sequence[Stimulus], use_cache: bool = True) -> Verdict:
        key = tuple(candidate)
        if use_cache and key in self._verdicts:
            return Verdict.REPRODUCES if self._verdicts[key] is not None else Verdict.DOES_NOT_REPRODUCE

        outcome: Optional[Tuple[Trace, Violation]] = None
        for offset in range(self.config.replays_per_candidate):
            seed = self.config.seed_base + offset
            self.steps += 1
            run_config = self.replay_config.model_copy(update={"seed": seed})
            try:
                trace = replay(self.system, self.mock, key, run_config)
            except ReplayBudgetExceeded as exc:
                logger.warning("Replay exceeded its event budget", max_events=exc.max_events, stimuli=len(key), seed=seed)
                continue
            report = monitor.run(self.contracts, trace, self.replay_config.boundary)
            if report.violated and monitor.same_violation(report.violation, self.target):
                self.successful_steps += 1
                outcome = (trace, report.violation)
                break

        self._verdicts[key] = outcome
        verdict = Verdict.REPRODUCES if outcome is not None else Verdict.DOES_NOT_REPRODUCE
        logger.debug("Oracle verdict", stimuli=len(key), verdict=verdict.value, steps=self.steps)
        return verdict

    def __call__(self, candidate: Sequence[Stimulus]) -> bool:
        return self.probe(candidate) is Verdict.REPRODUCES

    def witness(self, candidate: Sequence[Stimulus]) -> Tuple[Trace, Violation]:
        """Replayed trace and violation of a candidate already known to reproduce."""
        found = self._verdicts.get(tuple(candidate))
        if found is None:
            raise KeyError("candidate has not reproduced the target")
        return found


class _Search:
    """Shared bookkeeping of one simplification run."""

    def __init__(self, oracle: ReplayOracle, strategy: Strategy, original: Sequence[Stimulus]):
        self.oracle = oracle
        self.stats = SimplifyStats(strategy=strategy.value, original_stimuli=len(original))

    def accept(self, size: int) -> None:
        self.stats.accepted_sizes.append(size)

    def begin_pass(self, name: str, items: int) -> Tuple[PassStats, int, int]:
        return PassStats(name=name, items_before=items, items_after=items), self.oracle.steps, self.oracle.successful_steps

    def end_pass(self, record: Tuple[PassStats, int, int], items: int) -> None:
        stats, steps, successes = record
        stats.items_after = items
        stats.steps = self.oracle.steps - steps
        stats.successful_steps = self.oracle.successful_steps - successes
        self.stats.passes.append(stats)

    def finish(self, stimuli: List[Stimulus]) -> SimplifyResult:
        self.stats.final_stimuli = len(stimuli)
        self.stats.steps = self.oracle.steps
        self.stats.successful_steps = self.oracle.successful_steps
        trace, violation = self.oracle.witness(stimuli)
        logger.info(
            "Simplification finished",
            strategy=self.stats.strategy,
            original=self.stats.original_stimuli,
            final=len(stimuli),
            steps=self.stats.steps,
        )
        return SimplifyResult(stimuli=list(stimuli), trace=trace, violation=violation, stats=self.stats)


def split(items: Sequence[Any], parts: int) -> List[List[Any]]:
    """Contiguous chunks of near-equal size, in order."""
    length = len(items)
    bounds = [index * length // parts for index in range(parts + 1)]
    return [list(items[bounds[index]:bounds[index + 1]]) for index in range(parts) if bounds[index] < bounds[index + 1]]


def ddmin_search(
    items: List[Any],
    test: Callable[[List[Any]], bool],
    on_accept: Optional[Callable[[List[Any]], None]] = None,
) -> List[Any]:
    """Classic ddmin: chunks first, then complements, then finer granularity.

    Assumes test(items) already holds.
    """
    granularity = 2
    while len(items) >= 2:
        chunks = split(items, min(granularity, len(items)))
        reduced: Optional[List[Any]] = None
        for chunk in chunks:
            if test(chunk):
                reduced, granularity = chunk, 2
                break
        if reduced is None and len(chunks) > 2:
            for index in range(len(chunks)):
                complement = [item for position, chunk in enumerate(chunks) if position != index for item in chunk]
                if test(complement):
                    reduced, granularity = complement, max(granularity - 1, 2)
                    break
        if reduced is None:
            if granularity >= len(items):
                break
            granularity = min(len(items), granularity * 2)
            continue
        items = reduced
        if on_accept is not None:
            on_accept(items)
    return items


def _one_minimal(search: _Search, stimuli: List[Stimulus]) -> List[Stimulus]:
    """ddmin, then prove 1-minimality by replaying every single-stimulus removal.

    A removal that still reproduces (possible under nondeterminism) restarts
    the search from the smaller list.
    """
    oracle = search.oracle
    while True:
        stimuli = ddmin_search(stimuli, oracle, lambda kept: search.accept(len(kept)))
        smaller = None
        for index in range(len(stimuli)):
            candidate = stimuli[:index] + stimuli[index + 1:]
            if oracle.probe(candidate, use_cache=False) is Verdict.REPRODUCES:
                smaller = candidate
                break
        if smaller is None:
            return stimuli
        logger.warning("Single removal still reproduces; searching again", size=len(smaller))
        search.accept(len(smaller))
        stimuli = smaller


def _require_reproduction(oracle: ReplayOracle, stimuli: Sequence[Stimulus]) -> None:
    if not oracle(list(stimuli)):
        logger.warning("Original stimuli do not reproduce the target", stimuli=len(stimuli))
        raise NotReproducible(len(stimuli), oracle.target)


def ddmin(stimuli: Sequence[Stimulus], oracle: ReplayOracle) -> SimplifyResult:
    """Plain ddmin over the whole stimulus list.

    Raises:
        NotReproducible: the unreduced list does not reproduce the target.
    """
    search = _Search(oracle, Strategy.DDMIN, stimuli)
    record = search.begin_pass("stimuli", len(stimuli))
    _require_reproduction(oracle, stimuli)
    result = _one_minimal(search, list(stimuli))
    search.end_pass(record, len(result))
    return search.finish(result)


def instance_groups(stimuli: Sequence[Stimulus], contract: ContractAutomaton) -> Tuple[List[int], Dict[Any, List[int]]]:
    """Split stimulus positions into the ambient group and one group per instance key."""
    ambient: List[int] = []
    groups: Dict[Any, List[int]] = {}
    for index, stimulus in enumerate(stimuli):
        key = attribute_stimulus(contract.foreach, stimulus)
        if key is None:
            ambient.append(index)
        else:
            groups.setdefault(key, []).append(index)
    return ambient, groups


def foreach_ddmin(stimuli: Sequence[Stimulus], contract: ContractAutomaton, oracle: ReplayOracle) -> SimplifyResult:
    """Two passes: ddmin over instance groups (ambient stimuli always kept), then over single stimuli.

    The second pass opens with one replay of the kept groups alone; when that
    reproduces, every ambient stimulus goes in a single step.

    Raises:
        NotReproducible: the unreduced list does not reproduce the target.
        ValueError: the contract has no foreach clause.
    """
    if contract.foreach is None:
        raise ValueError(f"contract {contract.id} has no foreach clause")
    stimuli = list(stimuli)
    search = _Search(oracle, Strategy.FOREACH, stimuli)
    ambient, groups = instance_groups(stimuli, contract)
    keys = list(groups)

    def flatten(selected: List[Any]) -> List[Stimulus]:
        positions = sorted(ambient + [index for key in selected for index in groups[key]])
        return [stimuli[index] for index in positions]

    first = search.begin_pass("groups", len(keys))
    _require_reproduction(oracle, stimuli)
    kept_keys = ddmin_search(keys, lambda selected: oracle(flatten(selected)), lambda kept: search.accept(len(flatten(kept))))
    search.end_pass(first, len(kept_keys))
    logger.info(
        "Instance groups reduced",
        contract=contract.id,
        groups_before=len(keys),
        groups_after=[render_term(key) for key in kept_keys],
    )

    remaining = flatten(kept_keys)
    second = search.begin_pass("stimuli", len(remaining))
    attributed = [stimuli[index] for index in sorted(index for key in kept_keys for index in groups[key])]
    if ambient and attributed and oracle(attributed):
        # pass 1 never drops ambient stimuli; try all of them at once before splitting
        logger.debug("Ambient stimuli dropped", contract=contract.id, dropped=len(remaining) - len(attributed))
        search.accept(len(attributed))
        remaining = attributed
    result = _one_minimal(search, remaining)
    search.end_pass(second, len(result))
    return search.finish(result)


def stats_document(result: SimplifyResult, **context: Any) -> Dict[str, Any]:
    """The fields a bench row is regenerated from."""
    stats = result.stats
    document: Dict[str, Any] = {
        "strategy": stats.strategy,
        "scenario": context.get("scenario"),
        "original_stimuli": stats.original_stimuli,
        "final_stimuli": stats.final_stimuli,
        "steps": stats.steps,
        "successful_steps": stats.successful_steps,
        "replays_per_candidate": context.get("replays_per_candidate"),
        "seed": context.get("seed"),
        "violation": {
            "automaton": result.violation.automaton_id,
            "bad_state": result.violation.bad_state,
            "instance": None if result.violation.instance_key is None else render_term(result.violation.instance_key),
        },
        "accepted_sizes": list(stats.accepted_sizes),
        "passes": [item.model_dump() for item in stats.passes],
    }
    return document


def dump_stats(document: Dict[str, Any]) -> str:
    header = f"# tracesimp-stats v{settings.stats_format_version}\n"
    return header + yaml.safe_dump(document, sort_keys=False, default_flow_style=False)


def load_stats(text: str) -> Dict[str, Any]:
    first_line = text.splitlines()[0] if text else ""
    if not first_line.startswith("# tracesimp-stats v"):
        raise ValueError("missing tracesimp-stats header")
    return yaml.safe_load(text)
