"""Readers and writers for raw VM traces, canonical traces and stimulus lists."""

from pathlib import Path
from typing import Any, Dict, Iterator, List, Tuple, Union

import structlog

from app.exceptions import ParseError
from app.models import Event, EventKind, Stimulus, Trace
from app.processing.terms import Atom, ErlList, Pid, TermParser, Token, TokenStream, parse_term, render_term, tokenize

logger = structlog.get_logger()

_KNOWN_KINDS = {kind.value: kind for kind in EventKind}
_TRACE_TS = Atom("trace_ts")


def _iter_records(text: str) -> Iterator[Tuple[Any, Token]]:
    """Yield top-level terms separated by commas and/or newlines.

    Accepts an optional enclosing [ ... ] and a trailing `...` marking a
    truncated excerpt.
    """
    stream = TokenStream(tokenize(text))
    bracketed = stream.accept("[") is not None
    parser = TermParser(stream)
    while True:
        if stream.at("EOF"):
            if bracketed:
                logger.debug("Bracketed record list ends without ']'")
            return
        if stream.accept("ELLIPSIS"):
            stream.accept(",")
            if bracketed:
                stream.accept("]")
            stream.expect("EOF", "end of input after '...'")
            return
        if bracketed and stream.accept("]"):
            stream.expect("EOF", "end of input after ']'")
            return
        start = stream.peek()
        yield parser.parse_term(), start
        stream.accept(",")


def _ts_from_term(term: Any, token: Token) -> Tuple[int, int, int]:
    if (
        isinstance(term, tuple)
        and len(term) == 3
        and all(isinstance(part, int) and not isinstance(part, bool) for part in term)
    ):
        return term
    raise ParseError(token.line, token.column, "a {Mega,Secs,Micro} timestamp", render_term(term))


def _event_from_raw(record: Any, seq: int, token: Token) -> Event:
    if not isinstance(record, tuple) or len(record) < 4 or record[0] != _TRACE_TS:
        raise ParseError(token.line, token.column, "a {trace_ts, Pid, Kind, ..., Ts} tuple")
    _, pid, kind_atom, *rest = record
    if not isinstance(pid, Pid):
        raise ParseError(token.line, token.column, "a pid as the second element", render_term(pid))
    if not isinstance(kind_atom, Atom):
        raise ParseError(token.line, token.column, "an event kind atom", render_term(kind_atom))
    ts = _ts_from_term(rest[-1], token)
    payload_items = rest[:-1]
    kind = _KNOWN_KINDS.get(str(kind_atom))
    if kind is None:
        kind = EventKind.CALL
        payload: Any = (kind_atom,) + tuple(payload_items)
    elif len(payload_items) == 1:
        payload = payload_items[0]
    else:
        payload = tuple(payload_items)
    return Event(seq=seq, pid=pid, kind=kind, payload=payload, ts=ts)


def infer_origins(events: List[Event]) -> List[Event]:
    """Attach senders to received messages.

    A receive is paired with the oldest unmatched send of the same message to
    the receiving process (by pid or registered name). Failing that, a reply
    tagged with the name of a process the receiver previously sent to, as in
    {code_server, Reply}, is attributed to that process.
    """
    names: Dict[Pid, Any] = {}
    pending: List[Tuple[Pid, Any, Any]] = []
    requested: Dict[Pid, List[Any]] = {}
    resolved: List[Event] = []
    for event in events:
        if event.kind is EventKind.REGISTER and isinstance(event.payload, Atom):
            names[event.pid] = event.payload
        elif event.kind is EventKind.SEND and isinstance(event.payload, tuple) and len(event.payload) == 2:
            message, destination = event.payload
            pending.append((event.pid, destination, message))
            requested.setdefault(event.pid, []).append(destination)
        elif event.kind is EventKind.RECEIVE and event.origin is None:
            origin = None
            own_names = (event.pid, names.get(event.pid))
            for index, (sender, destination, message) in enumerate(pending):
                if message == event.payload and destination in own_names:
                    origin = sender
                    del pending[index]
                    break
            if origin is None:
                payload = event.payload
                if (
                    isinstance(payload, tuple)
                    and len(payload) == 2
                    and payload[0] in requested.get(event.pid, ())
                ):
                    origin = payload[0]
            if origin is not None:
                event = event.model_copy(update={"origin": origin})
        resolved.append(event)
    return resolved


def parse_raw(text: str) -> Trace:
    """Parse the tuple-style trace a VM tracer prints."""
    events = [_event_from_raw(record, seq, token) for seq, (record, token) in enumerate(_iter_records(text))]
    trace = Trace(events=infer_origins(events))
    logger.debug("Raw trace parsed", events=len(trace.events))
    return trace


def render_canonical(trace: Trace) -> str:
    """One event per line: seq, ts, pid, kind, payload and optional origin, tab-separated."""
    lines = []
    for event in trace.events:
        fields = [
            str(event.seq),
            render_term(event.ts),
            str(event.pid),
            event.kind.value,
            render_term(event.payload),
        ]
        if event.origin is not None:
            fields.append(render_term(event.origin))
        lines.append("\t".join(fields))
    return "".join(line + "\n" for line in lines)


def _parse_field(text: str, line: int, column: int, expected: str) -> Any:
    try:
        return parse_term(text)
    except ParseError as exc:
        if exc.line == 1:
            raise ParseError(line, column + exc.column - 1, expected, exc.found) from exc
        raise ParseError(line, column, expected, text) from exc


def parse_canonical(text: str) -> Trace:
    """Parse the canonical tab-separated format; `#` lines are comments.

    Records end at "\\n" only. Other line separators are ordinary characters
    inside string and quoted-atom payloads.
    """
    events: List[Event] = []
    for line_number, raw_line in enumerate(text.split("\n"), start=1):
        line = raw_line[:-1] if raw_line.endswith("\r") else raw_line
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) not in (5, 6):
            raise ParseError(line_number, 1, "5 or 6 tab-separated fields", f"{len(fields)} fields")
        columns = []
        offset = 1
        for field in fields:
            columns.append(offset)
            offset += len(field) + 1
        seq = _parse_field(fields[0], line_number, columns[0], "a sequence number")
        if not isinstance(seq, int) or seq < 0:
            raise ParseError(line_number, columns[0], "a sequence number", fields[0])
        if events and seq != events[-1].seq + 1:
            raise ParseError(line_number, columns[0], f"sequence number {events[-1].seq + 1}", fields[0])
        ts = _ts_from_term(
            _parse_field(fields[1], line_number, columns[1], "a timestamp"),
            Token("TS", fields[1], line_number, columns[1]),
        )
        if events and ts < events[-1].ts:
            raise ParseError(line_number, columns[1], "a timestamp no earlier than the previous event", fields[1])
        pid = _parse_field(fields[2], line_number, columns[2], "a pid")
        if not isinstance(pid, Pid):
            raise ParseError(line_number, columns[2], "a pid", fields[2])
        kind = _KNOWN_KINDS.get(fields[3])
        if kind is None:
            raise ParseError(line_number, columns[3], "an event kind", fields[3])
        payload = _parse_field(fields[4], line_number, columns[4], "a payload term")
        origin = _parse_field(fields[5], line_number, columns[5], "an origin term") if len(fields) == 6 else None
        events.append(Event(seq=seq, pid=pid, kind=kind, payload=payload, ts=ts, origin=origin))
    return Trace(events=events)


def looks_raw(text: str) -> bool:
    for line in text.splitlines():
        stripped = line.strip()
        if stripped and not stripped.startswith("#"):
            return stripped[0] in "{["
    return False


def parse_trace(text: str) -> Trace:
    """Parse either format, telling them apart by the first significant character."""
    return parse_raw(text) if looks_raw(text) else parse_canonical(text)


def load_trace(path: Union[str, Path]) -> Trace:
    text = Path(path).read_text(encoding="utf-8")
    trace = parse_trace(text)
    logger.info("Trace loaded", path=str(path), events=len(trace.events))
    return trace


def render_stimuli(stimuli: List[Stimulus]) -> str:
    """One {target,payload} term per line."""
    return "".join(stimulus.render() + "\n" for stimulus in stimuli)


def parse_stimuli(text: str) -> List[Stimulus]:
    """Parse a stimulus list: one term per line, or a bracketed comma-separated list."""
    stimuli = []
    for record, token in _iter_records(text):
        if not isinstance(record, tuple) or isinstance(record, ErlList) or len(record) != 2:
            raise ParseError(token.line, token.column, "a {Target,Payload} stimulus", render_term(record))
        stimuli.append(Stimulus(target=record[0], payload=record[1]))
    return stimuli


def load_stimuli(path: Union[str, Path]) -> List[Stimulus]:
    return parse_stimuli(Path(path).read_text(encoding="utf-8"))


def write_text(path: Union[str, Path], text: str) -> None:
    target = Path(path)
    if target.parent and not target.parent.exists():
        target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(text, encoding="utf-8")
