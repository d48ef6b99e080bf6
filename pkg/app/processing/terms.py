"""Erlang-style terms: values, patterns, lexer, parser and renderer.

The same lexer serves the raw VM trace format, the canonical trace format,
stimulus list files and the contract DSL. Terms are plain Python values:

    atom     -> Atom (a str subclass that never equals a plain str)
    integer  -> int
    string   -> str
    pid      -> Pid
    tuple    -> tuple
    list     -> ErlList (a tuple subclass that never equals a plain tuple)

Patterns add Var (binding variable) and WILDCARD.
"""

import re
from dataclasses import dataclass
from typing import Any, Dict, Iterator, List, NamedTuple, Optional

from app.exceptions import ParseError

Term = Any


class Atom(str):
    """An Erlang atom."""

    __slots__ = ()

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Atom) and str.__eq__(self, other)

    def __ne__(self, other: object) -> bool:
        return not self.__eq__(other)

    def __hash__(self) -> int:
        return hash(("atom", str.__str__(self)))

    def __repr__(self) -> str:
        return f"Atom({str.__repr__(self)})"


class ErlList(tuple):
    """An Erlang list; immutable and hashable."""

    __slots__ = ()

    def __eq__(self, other: object) -> bool:
        return isinstance(other, ErlList) and tuple.__eq__(self, other)

    def __ne__(self, other: object) -> bool:
        return not self.__eq__(other)

    def __hash__(self) -> int:
        return hash(("list", tuple.__hash__(self)))

    def __repr__(self) -> str:
        return f"ErlList({list(self)!r})"


class Pid:
    """Process identifier rendered as <A.B.C>."""

    __slots__ = ("node", "number", "serial")

    def __init__(self, node: int, number: int, serial: int):
        if min(node, number, serial) < 0:
            raise ValueError("pid components must be non-negative")
        self.node = node
        self.number = number
        self.serial = serial

    @property
    def parts(self):
        return (self.node, self.number, self.serial)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Pid) and self.parts == other.parts

    def __ne__(self, other: object) -> bool:
        return not self.__eq__(other)

    def __lt__(self, other: "Pid") -> bool:
        return self.parts < other.parts

    def __hash__(self) -> int:
        return hash(("pid",) + self.parts)

    def __repr__(self) -> str:
        return f"Pid({self.node}, {self.number}, {self.serial})"

    def __str__(self) -> str:
        return f"<{self.node}.{self.number}.{self.serial}>"

    def __reduce__(self):
        return (Pid, self.parts)


@dataclass(frozen=True)
class Var:
    """Binding variable inside a pattern."""

    name: str

    def __str__(self) -> str:
        return self.name


class _Wildcard:
    __slots__ = ()

    def __repr__(self) -> str:
        return "WILDCARD"

    def __str__(self) -> str:
        return "_"

    def __reduce__(self):
        return (_wildcard, ())


def _wildcard() -> "_Wildcard":
    return WILDCARD


WILDCARD = _Wildcard()


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

class Token(NamedTuple):
    kind: str
    text: str
    line: int
    column: int


_TOKEN_SPEC = [
    ("NEWLINE", r"\n"),
    ("SKIP", r"[ \t\r]+"),
    ("COMMENT", r"#[^\n]*"),
    ("PID", r"<\d+\.\d+\.\d+>"),
    ("ELLIPSIS", r"\.\.\."),
    ("ARROW", r"->"),
    ("ASSIGN", r":="),
    ("NE", r"!="),
    ("LE", r"<="),
    ("GE", r">="),
    ("LT", r"<"),
    ("GT", r">"),
    ("EQ", r"="),
    ("INT", r"-?\d+"),
    ("STRING", r'"(?:[^"\\\n]|\\.)*"'),
    ("QATOM", r"'(?:[^'\\\n]|\\.)*'"),
    ("VAR", r"[A-Z_][A-Za-z0-9_]*"),
    ("IDENT", r"[a-z][A-Za-z0-9_@]*"),
    ("PUNCT", r"[{}\[\](),;.]"),
    ("MISMATCH", r"."),
]
_TOKEN_RE = re.compile("|".join(f"(?P<{name}>{pattern})" for name, pattern in _TOKEN_SPEC))

_ESCAPES = {"n": "\n", "t": "\t", "r": "\r", "\\": "\\", "'": "'", '"': '"'}
_BARE_ATOM_RE = re.compile(r"[a-z][A-Za-z0-9_@]*")


def tokenize(text: str, first_line: int = 1) -> List[Token]:
    """Split text into tokens, tracking 1-based line and column numbers."""
    tokens: List[Token] = []
    line = first_line
    line_start = 0
    for match in _TOKEN_RE.finditer(text):
        kind = match.lastgroup
        value = match.group()
        column = match.start() - line_start + 1
        if kind == "NEWLINE":
            line += 1
            line_start = match.end()
            continue
        if kind in ("SKIP", "COMMENT"):
            continue
        if kind == "MISMATCH":
            raise ParseError(line, column, "a term", value)
        if kind == "PUNCT":
            kind = value
        tokens.append(Token(kind, value, line, column))
    tokens.append(Token("EOF", "", line, len(text) - line_start + 1))
    return tokens


def _unescape(body: str) -> str:
    out = []
    chars = iter(body)
    for ch in chars:
        if ch == "\\":
            nxt = next(chars, "\\")
            out.append(_ESCAPES.get(nxt, nxt))
        else:
            out.append(ch)
    return "".join(out)


def _escape(value: str, quote: str) -> str:
    return (
        value.replace("\\", "\\\\")
        .replace(quote, "\\" + quote)
        .replace("\n", "\\n")
        .replace("\t", "\\t")
        .replace("\r", "\\r")
    )


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

class TokenStream:
    """Cursor over a token list with error reporting helpers."""

    def __init__(self, tokens: List[Token]):
        self.tokens = tokens
        self.position = 0

    def peek(self, offset: int = 0) -> Token:
        index = min(self.position + offset, len(self.tokens) - 1)
        return self.tokens[index]

    def next(self) -> Token:
        token = self.peek()
        if token.kind != "EOF":
            self.position += 1
        return token

    def at(self, kind: str, text: Optional[str] = None) -> bool:
        token = self.peek()
        return token.kind == kind and (text is None or token.text == text)

    def accept(self, kind: str, text: Optional[str] = None) -> Optional[Token]:
        if self.at(kind, text):
            return self.next()
        return None

    def expect(self, kind: str, expected: str, text: Optional[str] = None) -> Token:
        if not self.at(kind, text):
            self.fail(expected)
        return self.next()

    def fail(self, expected: str) -> None:
        token = self.peek()
        found = token.text if token.kind != "EOF" else "end of input"
        raise ParseError(token.line, token.column, expected, found)


class TermParser:
    """Recursive-descent parser for terms and (optionally) patterns."""

    def __init__(self, stream: TokenStream, allow_patterns: bool = False):
        self.stream = stream
        self.allow_patterns = allow_patterns

    def parse_term(self) -> Term:
        stream = self.stream
        token = stream.peek()
        kind = token.kind
        if kind == "INT":
            stream.next()
            return int(token.text)
        if kind == "STRING":
            stream.next()
            return _unescape(token.text[1:-1])
        if kind == "PID":
            stream.next()
            node, number, serial = token.text[1:-1].split(".")
            return Pid(int(node), int(number), int(serial))
        if kind in ("IDENT", "QATOM"):
            stream.next()
            name = Atom(token.text if kind == "IDENT" else _unescape(token.text[1:-1]))
            if self.allow_patterns and stream.at("("):
                stream.next()
                args = self._parse_sequence(")")
                return (name,) + tuple(args)
            return name
        if kind == "{":
            stream.next()
            return tuple(self._parse_sequence("}"))
        if kind == "[":
            stream.next()
            return ErlList(self._parse_sequence("]"))
        if kind == "VAR" and self.allow_patterns:
            stream.next()
            return WILDCARD if token.text == "_" else Var(token.text)
        stream.fail("a pattern" if self.allow_patterns else "a term")

    def _parse_sequence(self, closer: str) -> List[Term]:
        items: List[Term] = []
        if self.stream.accept(closer):
            return items
        while True:
            items.append(self.parse_term())
            if self.stream.accept(closer):
                return items
            self.stream.expect(",", f"',' or '{closer}'")


def parse_term(text: str, allow_patterns: bool = False) -> Term:
    """Parse exactly one term from text."""
    stream = TokenStream(tokenize(text))
    term = TermParser(stream, allow_patterns).parse_term()
    stream.expect("EOF", "end of input")
    return term


def parse_pattern(text: str) -> Term:
    return parse_term(text, allow_patterns=True)


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

def render_term(term: Term) -> str:
    """Render a term (or pattern) in canonical text form."""
    if isinstance(term, Atom):
        text = str.__str__(term)
        if _BARE_ATOM_RE.fullmatch(text):
            return text
        return "'" + _escape(text, "'") + "'"
    if isinstance(term, bool):
        raise TypeError("booleans are not terms; use the atoms true/false")
    if isinstance(term, int):
        return str(term)
    if isinstance(term, str):
        return '"' + _escape(term, '"') + '"'
    if isinstance(term, Pid):
        return str(term)
    if isinstance(term, ErlList):
        return "[" + ",".join(render_term(item) for item in term) + "]"
    if isinstance(term, tuple):
        return "{" + ",".join(render_term(item) for item in term) + "}"
    if isinstance(term, Var) or term is WILDCARD:
        return str(term)
    raise TypeError(f"not a term: {term!r}")


# ---------------------------------------------------------------------------
# Pattern matching
# ---------------------------------------------------------------------------

_UNBOUND = object()


def match_pattern(pattern: Term, term: Term, bindings: Dict[str, Term]) -> Optional[Dict[str, Term]]:
    """Match term against pattern, extending bindings; None on mismatch.

    The input bindings dict is never mutated.
    """
    if pattern is WILDCARD:
        return bindings
    if isinstance(pattern, Var):
        bound = bindings.get(pattern.name, _UNBOUND)
        if bound is _UNBOUND:
            extended = dict(bindings)
            extended[pattern.name] = term
            return extended
        return bindings if bound == term else None
    if isinstance(pattern, tuple):
        if (
            not isinstance(term, tuple)
            or isinstance(pattern, ErlList) != isinstance(term, ErlList)
            or len(pattern) != len(term)
        ):
            return None
        for sub_pattern, sub_term in zip(pattern, term):
            bindings = match_pattern(sub_pattern, sub_term, bindings)
            if bindings is None:
                return None
        return bindings
    return bindings if pattern == term else None


def iter_variables(pattern: Term) -> Iterator[str]:
    """Yield binding variable names in left-to-right order (with repeats)."""
    if isinstance(pattern, Var):
        yield pattern.name
    elif isinstance(pattern, tuple):
        for item in pattern:
            yield from iter_variables(item)


def patterns_unify(left: Term, right: Term) -> bool:
    """Conservative structural unification: variables unify with anything."""
    if left is WILDCARD or right is WILDCARD or isinstance(left, Var) or isinstance(right, Var):
        return True
    if isinstance(left, tuple) or isinstance(right, tuple):
        if not (isinstance(left, tuple) and isinstance(right, tuple)):
            return False
        if isinstance(left, ErlList) != isinstance(right, ErlList) or len(left) != len(right):
            return False
        return all(patterns_unify(a, b) for a, b in zip(left, right))
    return left == right
