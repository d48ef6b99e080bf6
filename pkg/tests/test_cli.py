"""Tests for the command-line front end."""

import pytest
import structlog

from app.cli import (
    EXIT_INPUT_ERROR,
    EXIT_NO_VIOLATION,
    EXIT_NOT_REPRODUCIBLE,
    EXIT_OK,
    EXIT_VIOLATION,
    main,
)
from app.exceptions import NotReproducible, ReplayError
from app.library.scenarios import add_book, new_client
from app.processing.terms import Atom
from app.processing.trace_codec import load_stimuli, parse_canonical, render_canonical, render_stimuli
from app.services import bench
from app.services.pipeline import TraceSimplifier
from app.services.simplifier import load_stats


@pytest.fixture(autouse=True)
def reset_logging():
    yield
    structlog.reset_defaults()


@pytest.fixture
def case_study_trace(tmp_path, live_trace, case_study):
    path = tmp_path / "case_study.trace"
    path.write_text(render_canonical(live_trace(case_study)), encoding="utf-8")
    return path


@pytest.fixture
def clean_trace(tmp_path, live_trace):
    path = tmp_path / "clean.trace"
    path.write_text(render_canonical(live_trace([new_client(Atom("ian")), add_book(Atom("fable"))])), encoding="utf-8")
    return path


@pytest.mark.unit
class TestGen:
    def test_case_study(self, capsys, test_data_dir):
        assert main(["gen", "--scenario", "return_wrong", "--stimuli", "11", "--seed", "0"]) == EXIT_OK
        expected = (test_data_dir / "case_study_stimuli.txt").read_text(encoding="utf-8")
        assert capsys.readouterr().out == expected

    def test_to_file(self, tmp_path):
        out = tmp_path / "out" / "stimuli.txt"
        assert main(["gen", "--scenario", "same_book_twice", "--stimuli", "23", "--out", str(out)]) == EXIT_OK
        assert len(load_stimuli(out)) == 23

    def test_below_core(self, capsys):
        assert main(["gen", "--scenario", "more_than_four", "--stimuli", "1"]) == EXIT_INPUT_ERROR
        assert "needs at least 11 stimuli" in capsys.readouterr().err

    def test_unknown_scenario(self):
        with pytest.raises(SystemExit):
            main(["gen", "--scenario", "lost_book", "--stimuli", "3"])


@pytest.mark.unit
class TestMonitor:
    def test_violation(self, capsys, case_study_trace):
        assert main(["monitor", "--trace", str(case_study_trace)]) == EXIT_VIOLATION
        assert capsys.readouterr().out.startswith("VIOLATION library_user return_wrong instance=ian")

    def test_clean(self, capsys, clean_trace):
        assert main(["monitor", "--trace", str(clean_trace)]) == EXIT_OK
        assert capsys.readouterr().out == "OK\n"

    def test_raw_excerpt(self, test_data_dir):
        assert main(["monitor", "--trace", str(test_data_dir / "case_study_raw.trace")]) == EXIT_OK

    def test_empty_trace(self, tmp_path):
        empty = tmp_path / "empty.trace"
        empty.write_text("", encoding="utf-8")
        assert main(["monitor", "--trace", str(empty)]) == EXIT_OK

    def test_broken_contract(self, capsys, test_data_dir, case_study_trace):
        contract = test_data_dir / "truncated.contract"
        assert main(["monitor", "--contract", str(contract), "--trace", str(case_study_trace)]) == EXIT_INPUT_ERROR
        assert "error: line 5" in capsys.readouterr().err

    def test_missing_trace(self, tmp_path):
        assert main(["monitor", "--trace", str(tmp_path / "absent.trace")]) == EXIT_INPUT_ERROR

    def test_ambiguous_contract_is_an_input_error(self, capsys, tmp_path):
        contract = tmp_path / "ambiguous.contract"
        contract.write_text(
            "automaton amb { int n states s0 s1 s2 initial s0 "
            "trans s0 -> s1 on receive(_, ping) when n < 5 "
            "trans s0 -> s2 on receive(_, ping) when n < 9 }\n",
            encoding="utf-8",
        )
        trace = tmp_path / "ping.trace"
        trace.write_text("0\t{0,0,0}\t<0.35.0>\treceive\tping\n", encoding="utf-8")
        assert main(["monitor", "--contract", str(contract), "--trace", str(trace)]) == EXIT_INPUT_ERROR
        assert "ambiguous in state s0" in capsys.readouterr().err


@pytest.mark.unit
class TestSimplify:
    def test_scenario(self, tmp_path):
        out, witness, stats = tmp_path / "min.txt", tmp_path / "witness.trace", tmp_path / "stats.yaml"
        argv = [
            "simplify", "--scenario", "return_wrong", "--stimuli", "11", "--strategy", "foreach",
            "--out", str(out), "--witness", str(witness), "--stats", str(stats),
        ]
        assert main(argv) == EXIT_OK
        assert load_stimuli(out)[0] == new_client(Atom("ian"))
        assert len(load_stimuli(out)) == 2
        assert parse_canonical(witness.read_text(encoding="utf-8")).events
        document = load_stats(stats.read_text(encoding="utf-8"))
        assert (document["scenario"], document["strategy"], document["final_stimuli"]) == ("return_wrong", "foreach", 2)

    def test_recorded_trace(self, capsys, case_study_trace):
        assert main(["simplify", "--trace", str(case_study_trace), "--strategy", "ddmin"]) == EXIT_OK
        assert len(capsys.readouterr().out.splitlines()) == 2

    def test_clean_trace(self, capsys, clean_trace):
        assert main(["simplify", "--trace", str(clean_trace)]) == EXIT_NO_VIOLATION
        assert "no contract is violated" in capsys.readouterr().err

    def test_scenario_needs_size(self, capsys):
        assert main(["simplify", "--scenario", "return_wrong"]) == EXIT_INPUT_ERROR
        assert "--stimuli" in capsys.readouterr().err

    def test_source_is_exclusive(self, case_study_trace):
        with pytest.raises(SystemExit):
            main(["simplify", "--trace", str(case_study_trace), "--scenario", "return_wrong"])

    def test_not_reproducible_writes_original(self, mocker, tmp_path, case_study_trace, case_study):
        mocker.patch.object(TraceSimplifier, "simplify_trace", side_effect=NotReproducible(11))
        out, witness = tmp_path / "original.txt", tmp_path / "witness.trace"
        argv = ["simplify", "--trace", str(case_study_trace), "--out", str(out), "--witness", str(witness)]
        assert main(argv) == EXIT_NOT_REPRODUCIBLE
        assert load_stimuli(out) == case_study
        assert witness.read_text(encoding="utf-8") == case_study_trace.read_text(encoding="utf-8")

    def test_replay_failure_is_an_input_error(self, mocker, capsys, case_study_trace):
        mocker.patch.object(TraceSimplifier, "simplify_trace", side_effect=ReplayError("library state broke"))
        assert main(["simplify", "--trace", str(case_study_trace)]) == EXIT_INPUT_ERROR
        assert "error: library state broke" in capsys.readouterr().err


@pytest.mark.unit
class TestBench:
    def test_single_scenario(self, mocker, capsys):
        run_grid = mocker.spy(bench, "run_grid")
        assert main(["bench", "--only", "return_wrong", "--seed", "0"]) == EXIT_OK
        lines = capsys.readouterr().out.splitlines()
        assert lines[0].split()[0] == "scenario"
        assert len(lines) == 5
        assert [line.split()[3] for line in lines[1:]] == ["2", "2", "2", "2"]
        assert run_grid.call_count == 1


@pytest.mark.unit
class TestConvert:
    def test_raw_to_canonical(self, capsys, test_data_dir):
        assert main(["convert", "--trace", str(test_data_dir / "case_study_raw.trace")]) == EXIT_OK
        trace = parse_canonical(capsys.readouterr().out)
        assert len(trace.events) == 9

    def test_stimuli_only(self, capsys, case_study_trace, case_study):
        assert main(["convert", "--trace", str(case_study_trace), "--stimuli-only"]) == EXIT_OK
        assert capsys.readouterr().out == render_stimuli(case_study)

    def test_bad_trace(self, tmp_path):
        bad = tmp_path / "bad.trace"
        bad.write_text("0\t{0,0,0}\t<0.35.0>\tfly\tx\n", encoding="utf-8")
        assert main(["convert", "--trace", str(bad)]) == EXIT_INPUT_ERROR
