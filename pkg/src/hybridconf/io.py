"""CSV and report formats.

Trace files are bit-exact: floats are written with ``repr`` and read back with
``float``.  Reports are line-oriented ``key: value`` with 9 significant digits.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .closeness import ClosenessVerdict, Matching
from .core import ATrace, IllFormedTraceError, is_action_var
from .simulate import Stimulus


class FormatError(ValueError):
    """A file does not follow its format; carries the 1-based line number."""

    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.line = line


def fmt_exact(x: float) -> str:
    if math.isinf(x):
        return "inf"
    return repr(float(x))


def fmt9(x) -> str:
    if x is None:
        return "none"
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".9g")


def _parse_float(text: str, path, line: int) -> float:
    try:
        x = float(text)
    except ValueError:
        raise FormatError(path, line, f"not a number: {text!r}") from None
    if math.isnan(x) or x == -math.inf:
        raise FormatError(path, line, f"value {text!r} is not allowed")
    return x


# --- trace files ----------------------------------------------------------


def write_trace(path, y: ATrace) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "j", *y.variables])
        act = [is_action_var(v) for v in y.variables]
        for t, j, row in zip(y.t, y.j, y.values):
            cells = [("inf" if x == math.inf else "0") if a else fmt_exact(x)
                     for a, x in zip(act, row)]
            w.writerow([fmt_exact(t), str(int(j)), *cells])


def read_trace(path) -> ATrace:
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise FormatError(path, 0, exc.strerror or str(exc)) from None
    with fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:2] != ["t", "j"]:
        raise FormatError(path, 1, "header must start with 't,j'")
    variables = [v.strip() for v in rows[0][2:]]
    if len(set(variables)) != len(variables):
        raise FormatError(path, 1, "duplicate column names")
    t, j, vals = [], [], []
    for no, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(variables) + 2:
            raise FormatError(path, no, f"expected {len(variables) + 2} fields, got {len(row)}")
        t.append(_parse_float(row[0], path, no))
        try:
            j.append(int(row[1]))
        except ValueError:
            raise FormatError(path, no, f"segment index {row[1]!r} is not an integer") from None
        vals.append([_parse_float(x, path, no) for x in row[2:]])
    keys = list(zip(j, t))
    for k in range(1, len(keys)):
        if keys[k] <= keys[k - 1]:
            raise FormatError(path, k + 2, "rows must be strictly sorted by (j, t)")
    try:
        return ATrace.from_flat(variables, t, j, np.array(vals).reshape(len(t), len(variables)))
    except (IllFormedTraceError, ValueError) as exc:
        raise FormatError(path, 0, str(exc)) from None


# --- stimulus files -------------------------------------------------------


def read_stimulus(path, horizon: float) -> Stimulus:
    """Rows ``t,kind,name,value`` with kind ``action`` (value ignored) or ``signal``."""
    actions: list[tuple[float, str]] = []
    signals: dict[str, tuple[list, list]] = {}
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise FormatError(path, 0, exc.strerror or str(exc)) from None
    with fh:
        rows = list(csv.reader(fh))
    if not rows or [c.strip() for c in rows[0]] != ["t", "kind", "name", "value"]:
        raise FormatError(path, 1, "header must be 't,kind,name,value'")
    for no, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != 4:
            raise FormatError(path, no, "expected 4 fields")
        t = _parse_float(row[0], path, no)
        kind, name = row[1].strip(), row[2].strip()
        if kind == "action":
            actions.append((t, name))
        elif kind == "signal":
            ts, xs = signals.setdefault(name, ([], []))
            ts.append(t)
            xs.append(_parse_float(row[3], path, no))
        else:
            raise FormatError(path, no, f"unknown kind {kind!r}")
    try:
        return Stimulus(horizon, tuple(sorted(actions, key=lambda a: a[0])),
                        {n: (tuple(ts), tuple(xs)) for n, (ts, xs) in signals.items()})
    except ValueError as exc:
        raise FormatError(path, 0, str(exc)) from None


def write_stimulus(path, stim: Stimulus) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "kind", "name", "value"])
        for t, a in stim.actions:
            w.writerow([fmt_exact(t), "action", a, ""])
        for name, (ts, xs) in stim.signals.items():
            for t, x in zip(ts, xs):
                w.writerow([fmt_exact(t), "signal", name, fmt_exact(x)])


# --- reports --------------------------------------------------------------


def write_report(path, items: Iterable[tuple[str, object]]) -> str:
    text = "".join(f"{k}: {v if isinstance(v, str) else fmt9(v)}\n" for k, v in items)
    if path is not None:
        Path(path).write_text(text)
    return text


def verdict_items(v: ClosenessVerdict) -> list[tuple[str, object]]:
    p = v.params
    items: list[tuple[str, object]] = [
        ("verdict", "close" if v.close else "not close"), ("mode", v.mode),
        ("tau", p.tau), ("eps", p.eps), ("T", p.T), ("J", p.J),
        ("sampling_step", v.sampling_step)]
    for name, m in (("counterexample", v.counterexample), ("worst", v.worst)):
        if m is None:
            continue
        items += [(f"{name}.direction", m.direction), (f"{name}.t", m.t), (f"{name}.j", m.j),
                  (f"{name}.distance", m.distance), (f"{name}.best_t", m.best_t),
                  (f"{name}.best_j", m.best_j)]
    return items


def write_witness(path, witness: Sequence[Matching]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["direction", "t", "j", "match_t", "match_j", "distance"])
        for direction, m in enumerate(witness, start=1):
            for row in zip(m.src_t, m.src_j, m.tgt_t, m.tgt_j, m.distance):
                w.writerow([direction, fmt9(row[0]), int(row[1]), fmt9(row[2]), int(row[3]),
                            fmt9(row[4])])


def write_plot(path, y: ATrace, locations: Sequence[str] | None = None) -> None:
    """Plot-ready samples: ``t,j[,location],<continuous variables>``."""
    cont = [y.variables.index(v) for v in y.continuous_variables]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "j", *(["location"] if locations else []),
                    *y.continuous_variables])
        for t, j, row in zip(y.t, y.j, y.values):
            loc = [locations[int(j)]] if locations else []
            w.writerow([fmt9(t), int(j), *loc, *(fmt9(row[c]) for c in cont)])
