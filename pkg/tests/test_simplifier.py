"""Tests for the replay oracle, ddmin and the two-pass per-instance search."""

import pytest
from hypothesis import given
from hypothesis import strategies as st

from app.exceptions import NotReproducible
from app.library.contracts import contract_by_id
from app.library.scenarios import add_book, borrow, give_back, new_client
from app.models import ReplayConfig, Trace, Verdict, Violation
from app.processing.contract_parser import parse_contracts
from app.processing.terms import Atom
from app.services.simplifier import (
    ddmin,
    ddmin_search,
    dump_stats,
    foreach_ddmin,
    instance_groups,
    load_stats,
    simpler_than,
    split,
    stats_document,
)

IAN, BOB = Atom("ian"), Atom("bob")


@pytest.fixture
def library_user():
    return contract_by_id("library_user")


@pytest.mark.unit
class TestDdminSearch:
    def test_split(self):
        assert split(list(range(10)), 3) == [[0, 1, 2], [3, 4, 5], [6, 7, 8, 9]]
        assert split([1, 2], 4) == [[1], [2]]

    def test_finds_the_failure_inducing_pair(self):
        accepted = []
        result = ddmin_search(list(range(16)), lambda items: 3 in items and 11 in items, lambda kept: accepted.append(len(kept)))
        assert result == [3, 11]
        assert accepted == sorted(accepted, reverse=True)
        assert accepted[-1] == 2

    def test_single_item(self):
        assert ddmin_search([7], lambda items: True) == [7]

    def test_keeps_order(self):
        assert ddmin_search(list("abcdefgh"), lambda items: "b" in items and "g" in items) == ["b", "g"]


@pytest.mark.unit
class TestReplayOracle:
    def test_verdicts_are_cached(self, oracle_factory, case_study):
        oracle = oracle_factory(case_study)
        assert oracle(case_study)
        assert (oracle.steps, oracle.successful_steps) == (1, 1)
        assert oracle(case_study)
        assert oracle.steps == 1
        assert oracle.probe(case_study, use_cache=False) is Verdict.REPRODUCES
        assert oracle.steps == 2

    def test_failing_candidates_cost_every_replay(self, oracle_factory, case_study):
        oracle = oracle_factory(case_study, replays=3)
        assert not oracle([])
        assert (oracle.steps, oracle.successful_steps) == (3, 0)
        assert oracle(case_study)
        assert oracle.steps == 4

    def test_witness(self, oracle_factory, case_study):
        oracle = oracle_factory(case_study)
        oracle(case_study)
        trace, violation = oracle.witness(case_study)
        assert violation.bad_state == "return_wrong"
        assert violation.witness.events[-1].seq == violation.at_seq
        assert len(trace.events) > len(violation.witness.events)
        with pytest.raises(KeyError):
            oracle.witness(case_study[:3])

    def test_budget_overrun_counts_as_no_reproduction(self, oracle_factory, case_study, boundary):
        oracle = oracle_factory(case_study)
        oracle.replay_config = ReplayConfig(boundary=boundary, max_events=5)
        assert not oracle(case_study)
        assert oracle.steps == 1

    def test_simpler_than(self, oracle_factory, case_study):
        oracle = oracle_factory(case_study)
        target = oracle.target
        shorter = [case_study[0], case_study[-1]]
        assert simpler_than((shorter, target), (case_study, target))
        assert not simpler_than((case_study, target), (shorter, target))
        assert not simpler_than((list(reversed(shorter)), target), (case_study, target))


POOL = [new_client(IAN), add_book(Atom("fable")), borrow(IAN, Atom("fable")), give_back(IAN, Atom("fable"))]
RETURN_WRONG = Violation(automaton_id="library_user", bad_state="return_wrong", at_seq=0, witness=Trace())
SAME_BOOK = Violation(automaton_id="same_book_twice", bad_state="same_book_twice", at_seq=0, witness=Trace())


@st.composite
def nested_lists(draw):
    """Three stimulus lists, each a subsequence of the next."""
    top = draw(st.lists(st.sampled_from(POOL), max_size=6))
    middle = [item for item in top if draw(st.booleans())]
    bottom = [item for item in middle if draw(st.booleans())]
    return bottom, middle, top


@pytest.mark.unit
class TestSimplerThan:
    @given(lists=nested_lists(), violations=st.lists(st.sampled_from([RETURN_WRONG, SAME_BOOK]), min_size=3, max_size=3))
    def test_transitive_and_irreflexive(self, lists, violations):
        first, second, third = zip(lists, violations)
        for candidate in (first, second, third):
            assert not simpler_than(candidate, candidate)
        if simpler_than(first, second) and simpler_than(second, third):
            assert simpler_than(first, third)

    def test_chain(self):
        top = POOL + POOL[:1]
        middle, bottom = top[:4], top[:2]
        assert simpler_than((bottom, RETURN_WRONG), (middle, RETURN_WRONG))
        assert simpler_than((middle, RETURN_WRONG), (top, RETURN_WRONG))
        assert simpler_than((bottom, RETURN_WRONG), (top, RETURN_WRONG))
        assert not simpler_than((bottom, SAME_BOOK), (top, RETURN_WRONG))


@pytest.mark.unit
class TestDdmin:
    def test_case_study(self, oracle_factory, case_study):
        oracle = oracle_factory(case_study)
        result = ddmin(case_study, oracle)
        assert len(result.stimuli) == 2
        assert result.stimuli[0] == new_client(IAN)
        assert result.stimuli[1].target == IAN
        assert result.violation.bad_state == "return_wrong"
        stats = result.stats
        assert (stats.strategy, stats.original_stimuli, stats.final_stimuli) == ("ddmin", 11, 2)
        assert [item.name for item in stats.passes] == ["stimuli"]
        assert stats.steps == oracle.steps
        assert stats.accepted_sizes == sorted(set(stats.accepted_sizes), reverse=True)

    def test_result_is_one_minimal(self, oracle_factory, case_study):
        oracle = oracle_factory(case_study)
        stimuli = ddmin(case_study, oracle).stimuli
        for index in range(len(stimuli)):
            candidate = stimuli[:index] + stimuli[index + 1:]
            assert oracle.probe(candidate, use_cache=False) is Verdict.DOES_NOT_REPRODUCE

    def test_not_reproducible(self, oracle_factory, case_study):
        oracle = oracle_factory(case_study)
        with pytest.raises(NotReproducible) as excinfo:
            ddmin([new_client(IAN)], oracle)
        assert excinfo.value.stimuli_count == 1


@pytest.mark.unit
class TestForeachDdmin:
    def test_instance_groups(self, case_study, library_user):
        ambient, groups = instance_groups(case_study, library_user)
        assert ambient == [1, 2, 3, 5]
        assert groups == {IAN: [0, 6, 7, 9, 10], BOB: [4, 8]}

    def test_case_study(self, oracle_factory, case_study, library_user):
        result = foreach_ddmin(case_study, library_user, oracle_factory(case_study))
        assert len(result.stimuli) == 2
        assert result.stimuli[0] == new_client(IAN)
        groups_pass, stimuli_pass = result.stats.passes
        assert (groups_pass.name, groups_pass.items_before, groups_pass.items_after) == ("groups", 2, 1)
        assert (stimuli_pass.name, stimuli_pass.items_before, stimuli_pass.items_after) == ("stimuli", 9, 2)
        assert result.stats.accepted_sizes[:2] == [9, 5]
        assert result.stats.steps == groups_pass.steps + stimuli_pass.steps

    def test_fewer_steps_than_plain_ddmin(self, oracle_factory, case_study, library_user):
        grouped = foreach_ddmin(case_study, library_user, oracle_factory(case_study))
        plain = ddmin(case_study, oracle_factory(case_study))
        assert len(grouped.stimuli) == len(plain.stimuli) == 2
        assert grouped.stats.steps < plain.stats.steps

    def test_needed_ambient_stimuli_are_kept(self, oracle_factory):
        fable = Atom("fable")
        stimuli = [
            new_client(IAN),
            add_book(fable),
            add_book(fable),
            new_client(BOB),
            borrow(IAN, fable),
            borrow(IAN, fable),
        ]
        result = foreach_ddmin(stimuli, contract_by_id("same_book_twice"), oracle_factory(stimuli))
        assert result.stimuli == [stimuli[index] for index in (0, 1, 2, 4, 5)]
        assert result.violation.bad_state == "same_book_twice"
        assert result.stats.accepted_sizes == [5]

    def test_needs_foreach(self, oracle_factory, case_study):
        plain = parse_contracts("automaton plain { states s0 bad b initial s0 trans s0 -> b on receive(_, x) }")[0]
        with pytest.raises(ValueError):
            foreach_ddmin(case_study, plain, oracle_factory(case_study))


@pytest.mark.unit
class TestStatsDocument:
    def test_round_trip(self, oracle_factory, case_study):
        result = ddmin(case_study, oracle_factory(case_study))
        document = stats_document(result, scenario="return_wrong", replays_per_candidate=1, seed=0)
        text = dump_stats(document)
        assert text.startswith("# tracesimp-stats v")
        loaded = load_stats(text)
        assert loaded == document
        assert loaded["violation"] == {"automaton": "library_user", "bad_state": "return_wrong", "instance": "ian"}
        assert loaded["passes"][0]["name"] == "stimuli"

    def test_missing_header(self):
        with pytest.raises(ValueError):
            load_stats("strategy: ddmin\n")
