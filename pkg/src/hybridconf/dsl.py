"""Line-oriented text format for hybrid I/O automata.

::

    automaton thermostat
    var output y
    var internal x
    action input ON
    action output OFF
    location mode_ON
      flow x' = -x + 20
      invariant x <= 20
      output y = x
    transition mode_ON -> mode_OFF on OFF guard x >= 18
    init mode_ON x = 5

``inputs``/``outputs``/``internal`` are shorthands for ``var input`` etc.
Transitions may end with ``reset x = EXPR, z = EXPR``.  ``#`` starts a comment.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .automata import (HIOA, Location, ModelError, State, TransitionRule, XI,
                       _may_overlap)
from .expr import (TRUE, ExprSyntaxError, evaluate, format_number, free_vars, parse_expr,
                   parse_predicate, to_str)


class DSLError(ValueError):
    def __init__(self, message: str, line: int, col: int = 1):
        super().__init__(f"line {line}, column {col}: {message}")
        self.line = line
        self.col = col


_NAME = r"[A-Za-z_][A-Za-z_0-9]*"
_KINDS = {"input": 0, "output": 1, "internal": 2}
_SHORT = {"inputs": "input", "outputs": "output", "internal": "internal"}
_TRANSITION = re.compile(
    rf"transition\s+(?P<src>{_NAME})\s*->\s*(?P<dst>{_NAME})\s+on\s+(?P<act>{_NAME})"
    rf"(?:\s+guard\s+(?P<guard>.*?))?(?:\s+reset\s+(?P<reset>.*))?\s*$")
_FLOW = re.compile(rf"flow\s+(?P<var>{_NAME})'\s*=\s*(?P<expr>.*)$")
_OUTPUT = re.compile(rf"output\s+(?P<var>{_NAME})\s*=\s*(?P<expr>.*)$")
_ASSIGN = re.compile(rf"\s*(?P<var>{_NAME})\s*=\s*(?P<expr>[^,]*)")


@dataclass
class _LocDraft:
    name: str
    line: int
    flow: list = field(default_factory=list)
    invariant: object = TRUE
    outputs: list = field(default_factory=list)


class _Reader:
    def __init__(self, text: str):
        self.name = None
        self.vars: list[list[str]] = [[], [], []]
        self.acts: list[list[str]] = [[], [], []]
        self.locs: dict[str, _LocDraft] = {}
        self.current: _LocDraft | None = None
        self.rules: list[tuple[int, TransitionRule]] = []
        self.inits: list[tuple[int, str, dict]] = []
        self.lines = text.splitlines()

    # helpers
    def expr(self, text: str, line: int, offset: int, allowed):
        try:
            node = parse_expr(text)
        except ExprSyntaxError as exc:
            raise DSLError(str(exc).rsplit(" at column", 1)[0], line, offset + exc.pos + 1) from None
        self.check_names(free_vars(node), allowed, line, offset)
        return node

    def predicate(self, text: str, line: int, offset: int, allowed):
        try:
            pred = parse_predicate(text)
        except ExprSyntaxError as exc:
            raise DSLError(str(exc).rsplit(" at column", 1)[0], line, offset + exc.pos + 1) from None
        self.check_names(pred.free_vars(), allowed, line, offset)
        return pred

    @staticmethod
    def check_names(used, allowed, line, col):
        bad = sorted(set(used) - set(allowed))
        if bad:
            raise DSLError(f"undeclared variable {bad[0]!r}", line, col + 1)

    @property
    def scope(self):
        return self.vars[0] + self.vars[2]

    def declared(self, names, kind: str, line: int):
        pool = self.vars if kind == "variable" else self.acts
        taken = {n for group in pool for n in group}
        for n in names:
            if not re.fullmatch(_NAME, n):
                raise DSLError(f"invalid {kind} name {n!r}", line)
            if n in taken:
                raise DSLError(f"{kind} {n!r} declared twice", line)
            taken.add(n)

    # statements
    def read(self) -> HIOA:
        for no, raw in enumerate(self.lines, start=1):
            body = raw.split("#", 1)[0].rstrip()
            stripped = body.lstrip()
            if not stripped:
                continue
            indent = len(body) - len(stripped)
            keyword = stripped.split()[0]
            handler = getattr(self, "do_" + keyword, None)
            if handler is None:
                raise DSLError(f"unknown keyword {keyword!r}", no, indent + 1)
            handler(stripped, no, indent)
        return self.build()

    def do_automaton(self, s, no, col):
        parts = s.split()
        if len(parts) != 2 or not re.fullmatch(_NAME, parts[1]):
            raise DSLError("expected 'automaton NAME'", no, col + 1)
        if self.name is not None:
            raise DSLError("automaton declared twice", no, col + 1)
        self.name = parts[1]

    def _declare(self, pool, kind_word, names, no, col, what):
        if kind_word not in _KINDS:
            raise DSLError(f"expected input, output or internal, found {kind_word!r}", no, col + 1)
        if not names:
            raise DSLError(f"no {what} names given", no, col + 1)
        self.declared(names, what, no)
        pool[_KINDS[kind_word]].extend(names)

    def do_var(self, s, no, col):
        parts = s.replace(",", " ").split()
        self._declare(self.vars, parts[1] if len(parts) > 1 else "", parts[2:], no, col, "variable")

    def do_inputs(self, s, no, col):
        parts = s.replace(",", " ").split()
        self._declare(self.vars, _SHORT[parts[0]], parts[1:], no, col, "variable")

    do_outputs = do_inputs
    do_internal = do_inputs

    def do_action(self, s, no, col):
        parts = s.replace(",", " ").split()
        self._declare(self.acts, parts[1] if len(parts) > 1 else "", parts[2:], no, col, "action")
        if XI in parts[2:]:
            raise DSLError(f"{XI!r} is reserved for the agility marker", no, col + 1)

    def do_location(self, s, no, col):
        parts = s.split()
        if len(parts) != 2 or not re.fullmatch(_NAME, parts[1]):
            raise DSLError("expected 'location NAME'", no, col + 1)
        name = parts[1]
        if name in self.locs:
            raise DSLError(f"duplicate location {name!r} (first declared on line "
                           f"{self.locs[name].line})", no, col + 1)
        self.current = self.locs[name] = _LocDraft(name, no)

    def _in_location(self, no, col, what):
        if self.current is None:
            raise DSLError(f"{what} outside a location block", no, col + 1)
        return self.current

    def do_flow(self, s, no, col):
        loc = self._in_location(no, col, "flow")
        m = _FLOW.match(s)
        if m is None:
            raise DSLError("expected \"flow VAR' = EXPR\"", no, col + 1)
        if m["var"] not in self.vars[2]:
            raise DSLError(f"{m['var']!r} is not an internal variable", no, col + m.start("var") + 1)
        loc.flow.append((m["var"], self.expr(m["expr"], no, col + m.start("expr"), self.scope)))

    def do_invariant(self, s, no, col):
        loc = self._in_location(no, col, "invariant")
        text = s[len("invariant"):]
        loc.invariant = self.predicate(text, no, col + len("invariant"), self.scope)

    def do_output(self, s, no, col):
        loc = self._in_location(no, col, "output")
        m = _OUTPUT.match(s)
        if m is None:
            raise DSLError("expected 'output VAR = EXPR'", no, col + 1)
        if m["var"] not in self.vars[1]:
            raise DSLError(f"{m['var']!r} is not an output variable", no, col + m.start("var") + 1)
        loc.outputs.append((m["var"], self.expr(m["expr"], no, col + m.start("expr"), self.scope)))

    def _assignments(self, text, no, offset, targets, evaluate_now=False):
        out = []
        pos = 0
        for chunk in text.split(","):
            m = _ASSIGN.fullmatch(chunk)
            if m is None:
                raise DSLError("expected 'VAR = EXPR'", no, offset + pos + 1)
            if m["var"] not in targets:
                raise DSLError(f"{m['var']!r} is not an internal variable", no,
                               offset + pos + m.start("var") + 1)
            node = self.expr(m["expr"], no, offset + pos + m.start("expr"),
                             () if evaluate_now else self.scope)
            out.append((m["var"], evaluate(node, {}) if evaluate_now else node))
            pos += len(chunk) + 1
        return out

    def do_transition(self, s, no, col):
        self.current = None
        m = _TRANSITION.match(s)
        if m is None:
            raise DSLError("expected 'transition SRC -> DST on ACTION [guard PRED] [reset ...]'",
                           no, col + 1)
        act = m["act"]
        if act not in {a for group in self.acts for a in group}:
            raise DSLError(f"undeclared action {act!r}", no, col + m.start("act") + 1)
        for key in ("src", "dst"):
            if m[key] not in self.locs:
                raise DSLError(f"undeclared location {m[key]!r}", no, col + m.start(key) + 1)
        guard = TRUE
        if m["guard"] is not None:
            guard = self.predicate(m["guard"], no, col + m.start("guard"), self.scope)
        reset = ()
        if m["reset"] is not None:
            reset = tuple(self._assignments(m["reset"], no, col + m.start("reset"), self.vars[2]))
        rule = TransitionRule(m["src"], m["dst"], act, guard, reset)
        for other_no, other in self.rules:
            if (other.source, other.action) == (rule.source, rule.action) \
                    and _may_overlap(other.guard, rule.guard):
                raise DSLError(f"guard overlaps the {act!r} transition on line {other_no}",
                               no, col + 1)
        self.rules.append((no, rule))

    def do_init(self, s, no, col):
        self.current = None
        parts = s.split(None, 2)
        if len(parts) < 2:
            raise DSLError("expected 'init LOCATION [VAR = VALUE, ...]'", no, col + 1)
        if parts[1] not in self.locs:
            raise DSLError(f"undeclared location {parts[1]!r}", no, col + s.index(parts[1]) + 1)
        values = {}
        if len(parts) == 3:
            offset = col + s.index(parts[2], len("init") + len(parts[1]) + 1)
            values = dict(self._assignments(parts[2], no, offset, self.vars[2], True))
        self.inits.append((no, parts[1], values))

    def build(self) -> HIOA:
        if self.name is None:
            raise DSLError("missing 'automaton NAME' declaration", 1)
        if not self.inits:
            raise DSLError("missing 'init' declaration", len(self.lines) or 1)
        locations = []
        for loc in self.locs.values():
            for var in self.vars[2]:
                if var not in dict(loc.flow):
                    raise DSLError(f"location {loc.name!r} has no flow for {var!r}", loc.line)
            for var in self.vars[1]:
                if var not in dict(loc.outputs):
                    raise DSLError(f"location {loc.name!r} has no output for {var!r}", loc.line)
            locations.append(Location(loc.name, tuple(loc.flow), loc.invariant,
                                      tuple(loc.outputs)))
        start = []
        for no, loc, values in self.inits:
            missing = [v for v in self.vars[2] if v not in values]
            if missing:
                raise DSLError(f"init does not assign {missing[0]!r}", no)
            start.append(State.of(loc, {v: values[v] for v in self.vars[2]}))
        try:
            return HIOA(self.name, *self.vars, *self.acts, tuple(locations),
                        tuple(r for _, r in self.rules), tuple(start))
        except ModelError as exc:
            raise DSLError(str(exc), self.inits[0][0]) from None


def parse_automaton(text: str) -> HIOA:
    return _Reader(text).read()


def format_automaton(A: HIOA) -> str:
    """Inverse of :func:`parse_automaton` (up to comments and layout)."""
    lines = [f"automaton {A.name}"]
    for kind, names in zip(_KINDS, (A.inputs, A.outputs, A.internal)):
        if names:
            lines.append(f"var {kind} {' '.join(names)}")
    for kind, names in zip(_KINDS, (A.input_actions, A.output_actions, A.internal_actions)):
        if names:
            lines.append(f"action {kind} {' '.join(names)}")
    for loc in A.locations:
        lines.append("")
        lines.append(f"location {loc.name}")
        lines.extend(f"  flow {v}' = {to_str(e)}" for v, e in loc.flow)
        if loc.invariant.atoms:
            lines.append(f"  invariant {loc.invariant}")
        lines.extend(f"  output {v} = {to_str(e)}" for v, e in loc.output_map)
    if A.transitions:
        lines.append("")
    for r in A.transitions:
        line = f"transition {r.source} -> {r.target} on {r.action}"
        if r.guard.atoms:
            line += f" guard {r.guard}"
        if r.reset:
            line += " reset " + ", ".join(f"{v} = {to_str(e)}" for v, e in r.reset)
        lines.append(line)
    lines.append("")
    for s in A.start:
        assigns = ", ".join(f"{v} = {format_number(x)}" for v, x in s.values)
        lines.append(f"init {s.location} {assigns}".rstrip())
    return "\n".join(lines) + "\n"
