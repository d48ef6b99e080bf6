"""Parser for the contract DSL.

    automaton library_user {
      foreach spawn(client, newClient(C)) key C
        attribute stimulus(C, borrowBook(_)) -> C
      set borrowed
      states s0 s1
      bad return_wrong
      initial s0
      trans s0 -> s1 on receive(C, borrowBook(B)) when true do add(borrowed, B)
    }

Lowercase identifiers inside guards and actions name monitor variables;
uppercase ones are bindings from the transition's event pattern. Atom
literals in guards are quoted ('fable') or written inside braces.
"""

from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import structlog

from app.contracts.automata import (
    And,
    Assign,
    Attribution,
    Compare,
    Contains,
    ContractAutomaton,
    EventPattern,
    FALSE,
    ForeachSpec,
    Increment,
    Not,
    Or,
    SetAdd,
    SetDel,
    Skip,
    StoreRef,
    TRUE,
    Transition,
    VarDecl,
    VarType,
)
from app.contracts.engine import ensure_valid
from app.exceptions import ParseError
from app.processing.terms import TermParser, TokenStream, Var, tokenize

logger = structlog.get_logger()

CLAUSE_KEYWORDS = ("foreach", "attribute", "int", "set", "states", "bad", "initial", "trans")
_COMPARISONS = {"EQ": "=", "NE": "!=", "LT": "<", "LE": "<=", "GT": ">", "GE": ">="}


class ContractParser:
    """Recursive-descent parser over the shared term lexer."""

    def __init__(self, text: str):
        self.stream = TokenStream(tokenize(text))
        self.terms = TermParser(self.stream, allow_patterns=True)

    def parse(self) -> List[ContractAutomaton]:
        automata: List[ContractAutomaton] = []
        seen = set()
        while not self.stream.at("EOF"):
            self.stream.expect("IDENT", "'automaton'", "automaton")
            if self.stream.at("IDENT") and self.stream.peek().text in seen:
                self.stream.fail("a unique automaton id")
            automaton = self._automaton()
            seen.add(automaton.id)
            automata.append(automaton)
        return automata

    # -- automaton blocks ---------------------------------------------------

    def _automaton(self) -> ContractAutomaton:
        stream = self.stream
        name_token = stream.expect("IDENT", "an automaton id")
        stream.expect("{", "'{'")
        states: List[str] = []
        bad: List[str] = []
        variables: List[VarDecl] = []
        transitions: List[Transition] = []
        attribution: List[Attribution] = []
        foreach: Optional[Dict[str, Any]] = None
        initial: Optional[str] = None

        while not stream.accept("}"):
            token = stream.peek()
            if token.kind != "IDENT" or token.text not in CLAUSE_KEYWORDS:
                stream.fail("a clause (" + ", ".join(CLAUSE_KEYWORDS) + ") or '}'")
            stream.next()
            keyword = token.text
            if keyword == "foreach":
                if foreach is not None:
                    self._fail_at(token, "a single foreach clause")
                pattern = self._event_pattern()
                stream.expect("IDENT", "'key'", "key")
                foreach = {"pattern": pattern, "key": stream.expect("VAR", "a key variable").text, "line": token.line}
            elif keyword == "attribute":
                pattern = self._event_pattern()
                stream.expect("ARROW", "'->'")
                attribution.append(Attribution(pattern, stream.expect("VAR", "a key variable").text, token.line))
            elif keyword in ("int", "set"):
                variables.append(self._declaration(keyword, token.line))
            elif keyword in ("states", "bad"):
                names = self._state_names()
                for name in names:
                    if name not in states:
                        states.append(name)
                    if keyword == "bad" and name not in bad:
                        bad.append(name)
            elif keyword == "initial":
                if initial is not None:
                    self._fail_at(token, "a single initial clause")
                initial = stream.expect("IDENT", "a state name").text
            else:
                transitions.append(self._transition(token.line))

        if initial is None:
            self._fail_at(name_token, f"an initial clause in automaton {name_token.text}")
        if attribution and foreach is None:
            self._fail_at(name_token, "a foreach clause for the attribution rules")
        spec = None
        if foreach is not None:
            spec = ForeachSpec(foreach["pattern"], foreach["key"], tuple(attribution), foreach["line"])
        return ContractAutomaton(
            id=name_token.text,
            states=tuple(states),
            initial=initial,
            bad=tuple(bad),
            variables=tuple(variables),
            transitions=tuple(transitions),
            foreach=spec,
            line=name_token.line,
        )

    def _fail_at(self, token, expected: str) -> None:
        raise ParseError(token.line, token.column, expected, token.text)

    def _state_names(self) -> List[str]:
        names = []
        while self.stream.at("IDENT") and self.stream.peek().text not in CLAUSE_KEYWORDS:
            names.append(self.stream.next().text)
        if not names:
            self.stream.fail("a state name")
        return names

    def _declaration(self, keyword: str, line: int) -> VarDecl:
        name = self.stream.expect("IDENT", "a variable name").text
        if keyword == "set":
            return VarDecl(name, VarType.SET, None, line)
        initial = None
        if self.stream.accept("EQ"):
            initial = int(self.stream.expect("INT", "an integer").text)
        return VarDecl(name, VarType.INT, initial, line)

    def _transition(self, line: int) -> Transition:
        stream = self.stream
        source = stream.expect("IDENT", "a source state").text
        stream.expect("ARROW", "'->'")
        target = stream.expect("IDENT", "a target state").text
        stream.expect("IDENT", "'on'", "on")
        pattern = self._event_pattern()
        condition = TRUE
        if stream.accept("IDENT", "when"):
            condition = self._condition()
        actions = (Skip(),)
        if stream.accept("IDENT", "do"):
            actions = self._actions()
        return Transition(source, target, pattern, condition, actions, line)

    # -- event patterns -----------------------------------------------------

    def _event_pattern(self) -> EventPattern:
        stream = self.stream
        kind = stream.expect("IDENT", "an event kind").text
        stream.expect("(", "'('")
        subject = self.terms.parse_term()
        stream.expect(",", "','")
        payload = self.terms.parse_term()
        stream.expect(")", "')'")
        return EventPattern(kind, subject, payload)

    # -- guards -------------------------------------------------------------

    def _condition(self) -> Any:
        items = [self._conjunction()]
        while self.stream.accept("IDENT", "or"):
            items.append(self._conjunction())
        return items[0] if len(items) == 1 else Or(tuple(items))

    def _conjunction(self) -> Any:
        items = [self._negation()]
        while self.stream.accept("IDENT", "and"):
            items.append(self._negation())
        return items[0] if len(items) == 1 else And(tuple(items))

    def _negation(self) -> Any:
        if self.stream.accept("IDENT", "not"):
            return Not(self._negation())
        return self._primary()

    def _primary(self) -> Any:
        stream = self.stream
        if stream.accept("("):
            inner = self._condition()
            stream.expect(")", "')'")
            return inner
        if stream.accept("IDENT", "true"):
            return TRUE
        if stream.accept("IDENT", "false"):
            return FALSE
        if stream.at("IDENT", "contains") and stream.peek(1).kind == "(":
            stream.next()
            stream.next()
            set_name = stream.expect("IDENT", "a set variable").text
            stream.expect(",", "','")
            item = self._operand()
            stream.expect(")", "')'")
            return Contains(set_name, item)
        left = self._operand()
        op_token = stream.peek()
        if op_token.kind not in _COMPARISONS:
            stream.fail("a comparison operator")
        stream.next()
        return Compare(_COMPARISONS[op_token.kind], left, self._operand())

    def _operand(self) -> Any:
        stream = self.stream
        token = stream.peek()
        if token.kind == "IDENT" and stream.peek(1).kind != "(":
            stream.next()
            return StoreRef(token.text)
        if token.kind == "VAR":
            if token.text == "_":
                stream.fail("a bound variable, monitor variable or literal")
            stream.next()
            return Var(token.text)
        return self.terms.parse_term()

    # -- actions ------------------------------------------------------------

    def _actions(self) -> tuple:
        actions = [self._action()]
        while self.stream.accept(";"):
            actions.append(self._action())
        return tuple(actions)

    def _action(self) -> Any:
        stream = self.stream
        token = stream.expect("IDENT", "an action")
        if token.text == "skip":
            return Skip()
        if token.text in ("add", "del") and stream.accept("("):
            set_name = stream.expect("IDENT", "a set variable").text
            stream.expect(",", "','")
            item = self._operand()
            stream.expect(")", "')'")
            return SetAdd(set_name, item) if token.text == "add" else SetDel(set_name, item)
        if token.text in ("inc", "dec") and stream.accept("("):
            name = stream.expect("IDENT", "an integer variable").text
            stream.expect(")", "')'")
            return Increment(name, 1 if token.text == "inc" else -1)
        if stream.accept("ASSIGN"):
            return Assign(token.text, self._operand())
        self._fail_at(token, "skip, add(...), del(...), inc(...), dec(...) or an assignment")


def parse_contracts(text: str) -> List[ContractAutomaton]:
    """Parse every automaton block in text.

    Raises:
        ParseError: with the line and column of the offending token.
    """
    return ContractParser(text).parse()


def load_contracts(path: Union[str, Path], validate: bool = True) -> List[ContractAutomaton]:
    """Read, parse and (by default) validate a contract file."""
    try:
        automata = parse_contracts(Path(path).read_text(encoding="utf-8"))
        if validate:
            ensure_valid(automata)
    except Exception as exc:
        logger.error("Failed to load contracts", path=str(path), error=str(exc))
        raise
    logger.info("Contracts loaded", path=str(path), automata=[a.id for a in automata])
    return automata
