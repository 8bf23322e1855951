"""Deterministic hybrid I/O automata with ODE flows and guarded transitions."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping

import numpy as np

from .core import Valuation
from .expr import (TRUE, Comparison, Expr, Predicate, compile_predicate, compile_tuple,
                   free_vars, parse_expr, parse_predicate)

XI = "xi"  # agility marker, reserved in E_O
AGILITY_TOL = 1e-9
MICRO_STEP = 1e-6


class ModelError(ValueError):
    """The automaton, or a step taken in it, violates the model's invariants."""


class NondeterminismError(ModelError):
    pass


class NotEnabledError(ModelError):
    pass


@dataclass(frozen=True)
class Location:
    name: str
    flow: tuple[tuple[str, Expr], ...] = ()
    invariant: Predicate = TRUE
    output_map: tuple[tuple[str, Expr], ...] = ()


@dataclass(frozen=True)
class TransitionRule:
    source: str
    target: str
    action: str
    guard: Predicate = TRUE
    reset: tuple[tuple[str, Expr], ...] = ()


@dataclass(frozen=True)
class State:
    location: str
    values: tuple[tuple[str, float], ...]

    @classmethod
    def of(cls, location: str, val: Mapping[str, float]) -> "State":
        return cls(location, tuple((k, float(v)) for k, v in val.items()))

    @property
    def valuation(self) -> Valuation:
        return dict(self.values)

    def __getitem__(self, var: str) -> float:
        return self.valuation[var]


@dataclass(frozen=True, eq=True)
class HIOA:
    """Variables ``W_I, W_O, X``; actions ``E_I, E_O, H``; locations with flows.

    ``flow`` right-hand sides and invariants range over ``X`` and ``W_I``;
    output maps give each ``W_O`` variable as an expression over the same.
    """

    name: str
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    internal: tuple[str, ...]
    input_actions: tuple[str, ...]
    output_actions: tuple[str, ...]
    internal_actions: tuple[str, ...]
    locations: tuple[Location, ...]
    transitions: tuple[TransitionRule, ...]
    start: tuple[State, ...]

    def __post_init__(self):
        for f in ("inputs", "outputs", "internal", "input_actions", "output_actions",
                  "internal_actions", "locations", "transitions", "start"):
            object.__setattr__(self, f, tuple(getattr(self, f)))
        self.validate()

    # derived sets
    @property
    def external(self) -> tuple[str, ...]:
        return self.inputs + self.outputs

    @property
    def variables(self) -> tuple[str, ...]:
        return self.inputs + self.outputs + self.internal

    @property
    def external_actions(self) -> tuple[str, ...]:
        return self.input_actions + self.output_actions

    @property
    def actions(self) -> tuple[str, ...]:
        return self.external_actions + self.internal_actions

    @property
    def locally_controlled(self) -> tuple[str, ...]:
        return self.internal_actions + self.output_actions

    def location(self, name: str) -> Location:
        try:
            return self._locations[name]
        except KeyError:
            raise ModelError(f"undeclared location {name!r}") from None

    @cached_property
    def _locations(self) -> dict[str, Location]:
        return {loc.name: loc for loc in self.locations}

    def rules_from(self, location: str) -> tuple[TransitionRule, ...]:
        return self._rules.get(location, ())

    @cached_property
    def _rules(self) -> dict[str, tuple[TransitionRule, ...]]:
        out: dict[str, list] = {}
        for r in self.transitions:
            out.setdefault(r.source, []).append(r)
        return {k: tuple(v) for k, v in out.items()}

    def validate(self) -> None:
        var_sets = [self.inputs, self.outputs, self.internal]
        all_vars = [v for s in var_sets for v in s]
        if len(set(all_vars)) != len(all_vars):
            raise ModelError("variable partitions W_I, W_O, X must be disjoint")
        all_acts = [a for s in (self.input_actions, self.output_actions,
                                self.internal_actions) for a in s]
        if len(set(all_acts)) != len(all_acts):
            raise ModelError("action partitions E_I, E_O, H must be disjoint")
        if XI in self.input_actions or XI in self.internal_actions:
            raise ModelError(f"{XI!r} is reserved for the agility marker in E_O")
        names = [loc.name for loc in self.locations]
        if len(set(names)) != len(names):
            raise ModelError("duplicate location names")
        scope = set(self.internal) | set(self.inputs)
        for loc in self.locations:
            flowed = [v for v, _ in loc.flow]
            if sorted(flowed) != sorted(self.internal):
                raise ModelError(f"location {loc.name}: flow must define exactly {self.internal}")
            outs = [v for v, _ in loc.output_map]
            if sorted(outs) != sorted(self.outputs):
                raise ModelError(f"location {loc.name}: output map must define {self.outputs}")
            used = set().union(*(free_vars(e) for _, e in loc.flow + loc.output_map),
                               loc.invariant.free_vars())
            if used - scope:
                raise ModelError(f"location {loc.name}: undeclared {sorted(used - scope)}")
        for r in self.transitions:
            if r.action == XI:
                raise ModelError(f"{XI!r} may not label a transition")
            if r.action not in all_acts:
                raise ModelError(f"undeclared action {r.action!r}")
            for endpoint in (r.source, r.target):
                if endpoint not in names:
                    raise ModelError(f"undeclared location {endpoint!r}")
            used = r.guard.free_vars().union(*(free_vars(e) for _, e in r.reset))
            if used - scope:
                raise ModelError(f"transition {r.source}->{r.target}: undeclared {sorted(used - scope)}")
            if {v for v, _ in r.reset} - set(self.internal):
                raise ModelError("resets may only assign internal variables")
        self._check_overlaps()
        if not self.start:
            raise ModelError("the start set must be nonempty")
        for s in self.start:
            if sorted(v for v, _ in s.values) != sorted(self.internal):
                raise ModelError(f"start state must assign exactly {self.internal}")
            if not self.invariant_holds(s, self._zero_inputs()):
                raise ModelError(f"start state {s} violates its location invariant")

    def _zero_inputs(self) -> dict[str, float]:
        return {w: 0.0 for w in self.inputs}

    def _check_overlaps(self) -> None:
        # Overlap of two guards for one (location, action) is decided on
        # single-variable interval guards; anything else is rejected outright.
        groups: dict[tuple[str, str], list[TransitionRule]] = {}
        for r in self.transitions:
            groups.setdefault((r.source, r.action), []).append(r)
        for (src, act), rules in groups.items():
            for i in range(len(rules)):
                for k in range(i + 1, len(rules)):
                    if _may_overlap(rules[i].guard, rules[k].guard):
                        raise NondeterminismError(
                            f"overlapping guards for action {act!r} in location {src!r}")

    # compiled evaluators
    @cached_property
    def _scope(self) -> tuple[str, ...]:
        return self.internal + self.inputs

    @cached_property
    def compiled(self) -> dict:
        args = self._scope
        out = {}
        for loc in self.locations:
            out[loc.name] = {
                "flow": compile_tuple([dict(loc.flow)[v] for v in self.internal], args),
                "output": compile_tuple([dict(loc.output_map)[v] for v in self.outputs], args),
                "invariant": compile_predicate(loc.invariant, args),
            }
        for r in self.transitions:
            out[r] = {
                "guard": compile_predicate(r.guard, args),
                "reset": compile_tuple([e for _, e in r.reset], args) if r.reset else None,
            }
        return out

    def args(self, x: Mapping[str, float], w: Mapping[str, float]) -> list[float]:
        return [x[v] for v in self.internal] + [w[v] for v in self.inputs]

    def invariant_holds(self, s: State, w: Mapping[str, float] | None = None,
                        slack: float = 0.0) -> bool:
        w = self._zero_inputs() if w is None else w
        return self.compiled[s.location]["invariant"](*self.args(s.valuation, w), slack=slack)

    def guard_holds(self, rule: TransitionRule, s: State, w=None, slack: float = 0.0) -> bool:
        w = self._zero_inputs() if w is None else w
        return self.compiled[rule]["guard"](*self.args(s.valuation, w), slack=slack)

    def derivative(self, location: str, x: np.ndarray, w: Mapping[str, float]) -> np.ndarray:
        return np.array(self.compiled[location]["flow"](*x, *(w[v] for v in self.inputs)))

    def output_values(self, location: str, x, w: Mapping[str, float]) -> tuple:
        return self.compiled[location]["output"](*x, *(w[v] for v in self.inputs))


def _single_bound(c: Comparison):
    """``(var, lo, hi)`` interval for ``var op number`` or ``number op var``."""
    from .expr import Num, Var
    lhs, rhs, op = c.lhs, c.rhs, c.op
    if isinstance(lhs, Num) and isinstance(rhs, Var):
        lhs, rhs = rhs, lhs
        op = {"<=": ">=", ">=": "<=", "<": ">", ">": "<"}[op]
    if not (isinstance(lhs, Var) and isinstance(rhs, Num)):
        return None
    if op in ("<=", "<"):
        return lhs.name, -np.inf, rhs.value, op == "<"
    return lhs.name, rhs.value, np.inf, op == ">"


def _may_overlap(g1: Predicate, g2: Predicate) -> bool:
    lower: dict[str, tuple[float, bool]] = {}
    upper: dict[str, tuple[float, bool]] = {}
    for c in g1.atoms + g2.atoms:
        b = _single_bound(c)
        if b is None:
            return True
        var, lo, hi, strict = b
        if lo > -np.inf:
            lower[var] = max(lower.get(var, (-np.inf, False)), (lo, strict))
        if hi < np.inf:
            upper[var] = min(upper.get(var, (np.inf, True)), (hi, not strict))
    for var in lower.keys() & upper.keys():
        (lo, lo_strict), (hi, hi_closed) = lower[var], upper[var]
        if lo > hi or (lo == hi and (lo_strict or not hi_closed)):
            return False
    return True


def enabled_actions(A: HIOA, s: State, w: Mapping[str, float] | None = None,
                    slack: float = 0.0) -> set[str]:
    """Actions with a rule from ``s`` whose guard holds, plus every input action."""
    out = {r.action for r in A.rules_from(s.location) if A.guard_holds(r, s, w, slack)}
    return out | set(A.input_actions)


def matching_rule(A: HIOA, s: State, action: str, w=None,
                  slack: float = 0.0) -> TransitionRule | None:
    rules = [r for r in A.rules_from(s.location)
             if r.action == action and A.guard_holds(r, s, w, slack)]
    if len(rules) > 1:
        raise NondeterminismError(f"{len(rules)} rules for {action!r} enabled in {s}")
    return rules[0] if rules else None


def discrete_step(A: HIOA, s: State, action: str, w: Mapping[str, float] | None = None,
                  slack: float = 0.0) -> State:
    """Take ``action`` from ``s``.  Input actions without an enabled rule stutter."""
    if action not in A.actions:
        raise NotEnabledError(f"{action!r} is not an action of {A.name}")
    rule = matching_rule(A, s, action, w, slack)
    if rule is None:
        if action in A.input_actions:
            return s
        raise NotEnabledError(f"{action!r} is not enabled in {s}")
    x = s.valuation
    if rule.reset:
        w_ = A._zero_inputs() if w is None else w
        new = A.compiled[rule]["reset"](*A.args(x, w_))
        x = {**x, **dict(zip((v for v, _ in rule.reset), new))}
    target = State.of(rule.target, {v: x[v] for v in A.internal})
    if not A.invariant_holds(target, w, slack):
        raise ModelError(f"{action!r} leads to {target}, which violates its invariant")
    return target


def is_agile(A: HIOA, s: State, w: Mapping[str, float] | None = None) -> bool:
    """Whether a flow of positive duration leaves ``s`` inside the invariant.

    Interior points are agile.  On the boundary of an invariant atom the
    one-sided derivative of its margin along the flow, estimated with one RK4
    micro step, must not point outward beyond ``AGILITY_TOL``.
    """
    w = A._zero_inputs() if w is None else w
    if not A.invariant_holds(s, w):
        return False
    loc = A.location(s.location)
    x0 = np.array([s[v] for v in A.internal], dtype=float)
    x1 = _rk4(A, s.location, x0, w, MICRO_STEP)
    args = list(A.internal) + list(A.inputs)
    for c in loc.invariant.atoms:
        m = compile_tuple([c.margin_expr()], args)
        m0 = m(*x0, *(w[v] for v in A.inputs))[0]
        if m0 > AGILITY_TOL:
            continue
        slope = (m(*x1, *(w[v] for v in A.inputs))[0] - m0) / MICRO_STEP
        if slope < -AGILITY_TOL or (c.strict and m0 <= 0 and slope <= 0):
            return False
    return True


def _rk4(A: HIOA, location: str, x: np.ndarray, w, h: float) -> np.ndarray:
    k1 = A.derivative(location, x, w)
    k2 = A.derivative(location, x + 0.5 * h * k1, w)
    k3 = A.derivative(location, x + 0.5 * h * k2, w)
    k4 = A.derivative(location, x + h * k3, w)
    return x + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


@dataclass
class E1Report:
    satisfied: bool
    stutters: list[tuple[str, str]] = field(default_factory=list)

    def __str__(self):
        if not self.stutters:
            return "E1 satisfied by explicit transitions"
        pairs = ", ".join(f"{a} in {loc}" for loc, a in self.stutters)
        return f"E1 satisfied via stuttering for: {pairs}"


def check_E1(A: HIOA) -> E1Report:
    """Input action enabling: lists (location, action) pairs that rely on stuttering.

    Stutter semantics make every model input-enabled, so ``satisfied`` is
    always True; the report says where the implicit self-loops are used.
    """
    stutters = []
    for loc in A.locations:
        for a in A.input_actions:
            unconditional = any(r.action == a and not r.guard.atoms
                                for r in A.rules_from(loc.name))
            if not unconditional:
                stutters.append((loc.name, a))
    return E1Report(True, stutters)


def build_thermostat() -> HIOA:
    """The two-mode thermostat: heats toward 20 when on, decays to 0 when off."""
    e = parse_expr
    return HIOA(
        name="thermostat",
        inputs=(), outputs=("y",), internal=("x",),
        input_actions=("ON",), output_actions=("OFF",), internal_actions=(),
        locations=(
            Location("mode_ON", (("x", e("-x + 20")),), parse_predicate("x <= 20"),
                     (("y", e("x")),)),
            Location("mode_OFF", (("x", e("-x")),), parse_predicate("x >= 0"),
                     (("y", e("x")),)),
        ),
        transitions=(
            TransitionRule("mode_ON", "mode_OFF", "OFF", parse_predicate("x >= 18")),
            TransitionRule("mode_OFF", "mode_ON", "ON", parse_predicate("x <= 2")),
        ),
        start=(State.of("mode_ON", {"x": 5.0}),),
    )
