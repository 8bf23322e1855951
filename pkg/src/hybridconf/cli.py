"""Command-line front end.

Exit status: 0 check passed, 1 check failed, 2 bad input (file, parse or
argument error), 3 internal error.
"""

from __future__ import annotations

import argparse
import math
import sys
import traceback
from dataclasses import dataclass
from pathlib import Path

from .automata import HIOA, ModelError
from .closeness import ClosenessParams, close
from .conformance import (PairSuite, SuiteError, conforms, hioco, simulate_suite,
                          trace_prefixes)
from .core import DomainError, SolutionPair, trace_to_atrace
from .dsl import DSLError, parse_automaton
from .io import (FormatError, fmt9, read_stimulus, read_trace, verdict_items, write_plot,
                 write_report, write_trace, write_witness)
from .simulate import SCHEDULED, URGENT, SimConfig, SimulationError, Stimulus, run, trace
from .simulate import execution_atrace, solution_pair
from .transitivity import GeneratorConfig, semitrans_check

EXIT_PASS, EXIT_FAIL, EXIT_INPUT, EXIT_INTERNAL = 0, 1, 2, 3


class InputError(Exception):
    """Bad user input; maps to exit status 2."""


@dataclass(frozen=True)
class RunConfig:
    command: str
    paths: tuple[str, ...]
    params: ClosenessParams | None
    sim: SimConfig
    mode: str
    out: Path | None
    seed: int


def _positive(text: str) -> float:
    x = float(text)
    if not x > 0:
        raise argparse.ArgumentTypeError(f"{text} is not positive")
    return x


def _probes(text: str) -> tuple[float, ...]:
    try:
        out = tuple(float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad probe list {text!r}") from None
    if any(x < 0 for x in out):
        raise argparse.ArgumentTypeError("probe durations must be non-negative")
    return out


def build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--tau", type=_positive, help="time tolerance (s)")
    shared.add_argument("--eps", type=_positive, help="value tolerance")
    shared.add_argument("--T", type=_positive, default=math.inf,
                        help="test duration; simulation horizon for model inputs")
    shared.add_argument("--J", type=int, default=2 ** 31, help="maximum jump index")
    shared.add_argument("--step", type=_positive, default=1e-3, help="RK4 step (s)")
    shared.add_argument("--policy", choices=(URGENT, SCHEDULED), default=URGENT)
    shared.add_argument("--seed", type=int, default=0)
    shared.add_argument("--mode", choices=("plain", "extended"), default="extended")
    shared.add_argument("--out", type=Path, help="directory for reports and CSV files")

    ap = argparse.ArgumentParser(prog="hybridconf", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[shared], help="simulate an automaton")
    p.add_argument("model")
    p.add_argument("--stimulus", help="stimulus CSV (t,kind,name,value)")

    p = sub.add_parser("close", parents=[shared], help="(tau, eps)-closeness of two traces")
    p.add_argument("first")
    p.add_argument("second")

    p = sub.add_parser("conform", parents=[shared], help="conformance of pair suites")
    p.add_argument("spec", help="model (.hioa) or directory of NAME.u.csv/NAME.y.csv pairs")
    p.add_argument("impl", help="model (.hioa) or directory of pairs")
    p.add_argument("--stimulus", action="append", default=[],
                   help="stimulus CSV for model suites (repeatable)")
    p.add_argument("--input-timing", choices=("exact", "tau"), default="exact")
    p.add_argument("--parallel", action="store_true")

    p = sub.add_parser("hioco", parents=[shared], help="exact hioco on a trace suite")
    p.add_argument("spec")
    p.add_argument("impl")
    p.add_argument("--stimulus", help="stimulus CSV driving the suite run of the spec")
    p.add_argument("--probes", type=_probes, default=(0.5, 1.0, 2.0))
    p.add_argument("--include-xi", action="store_true")

    p = sub.add_parser("semitrans", parents=[shared], help="randomized semi-transitivity check")
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--parallel", action="store_true")
    return ap


def _config(args) -> RunConfig:
    params = None
    if args.tau is not None and args.eps is not None:
        params = ClosenessParams(args.tau, args.eps, args.T, args.J)
    sim = SimConfig(step=args.step, policy=args.policy)
    paths = tuple(getattr(args, k) for k in ("model", "first", "second", "spec", "impl")
                  if getattr(args, k, None) is not None)
    return RunConfig(args.command, paths, params, sim, args.mode, args.out, args.seed)


def _need_params(cfg: RunConfig) -> ClosenessParams:
    if cfg.params is None:
        raise InputError(f"{cfg.command} needs --tau and --eps")
    return cfg.params


def _emit(cfg: RunConfig, name: str, items) -> None:
    text = write_report(None, items)
    sys.stdout.write(text)
    if cfg.out is not None:
        cfg.out.mkdir(parents=True, exist_ok=True)
        (cfg.out / name).write_text(text)


def load_model(path: str) -> HIOA:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from None
    try:
        return parse_automaton(text)
    except DSLError as exc:
        raise InputError(f"{path}: {exc}") from None


def _horizon(args) -> float:
    if math.isinf(args.T):
        raise InputError("simulating a model needs a finite --T")
    return args.T


def _stimulus(path: str | None, horizon: float) -> Stimulus:
    return Stimulus(horizon) if path is None else read_stimulus(path, horizon)


def cmd_simulate(cfg: RunConfig, args) -> int:
    A = load_model(args.model)
    stim = _stimulus(args.stimulus, _horizon(args))
    e = run(A, stim, cfg.sim)
    switches = [float(tr.end) for tr in e.trajectories[:-1]]
    items = [("automaton", A.name), ("horizon", stim.horizon), ("step", cfg.sim.step),
             ("jumps", len(e.actions))]
    items += [(f"jump.{k}", f"{fmt9(t)} {a}") for k, (t, a) in enumerate(zip(switches, e.actions))]
    if cfg.out is not None:
        cfg.out.mkdir(parents=True, exist_ok=True)
        pair = solution_pair(A, e)
        write_trace(cfg.out / "trace.csv", trace_to_atrace(trace(A, e), A.external_actions))
        write_trace(cfg.out / "u.csv", pair.u)
        write_trace(cfg.out / "y.csv", pair.y)
        write_plot(cfg.out / "plot.csv", execution_atrace(A, e), e.locations)
    _emit(cfg, "report.txt", items)
    return EXIT_PASS


def cmd_close(cfg: RunConfig, args) -> int:
    p = _need_params(cfg)
    y1, y2 = read_trace(args.first), read_trace(args.second)
    try:
        verdict = close(y1, y2, p, cfg.mode)
    except DomainError as exc:
        raise InputError(str(exc)) from None
    _emit(cfg, "report.txt", verdict_items(verdict))
    if cfg.out is not None and verdict.witness is not None:
        write_witness(cfg.out / "witness.csv", verdict.witness)
    return EXIT_PASS if verdict.close else EXIT_FAIL


def _suite(path: str, stimuli: list[str], args, cfg: RunConfig) -> PairSuite:
    src = Path(path)
    if src.is_dir():
        pairs = []
        for u_path in sorted(src.glob("*.u.csv")):
            y_path = u_path.with_name(u_path.name[:-len(".u.csv")] + ".y.csv")
            if not y_path.exists():
                raise InputError(f"{u_path} has no matching {y_path.name}")
            try:
                pairs.append(SolutionPair(read_trace(u_path), read_trace(y_path)))
            except DomainError as exc:
                raise InputError(f"{u_path}: {exc}") from None
        if not pairs:
            raise InputError(f"{path}: no NAME.u.csv/NAME.y.csv pairs")
        try:
            return PairSuite(tuple(pairs), "recorded")
        except ValueError as exc:
            raise InputError(f"{path}: {exc}") from None
    A = load_model(path)
    horizon = _horizon(args)
    stims = [_stimulus(s, horizon) for s in stimuli] or [Stimulus(horizon)]
    return simulate_suite(A, stims, cfg.sim)


def cmd_conform(cfg: RunConfig, args) -> int:
    p = _need_params(cfg)
    spec = _suite(args.spec, args.stimulus, args, cfg)
    impl = _suite(args.impl, args.stimulus, args, cfg)
    try:
        report = conforms(spec, impl, p, cfg.mode, args.input_timing, args.parallel)
    except DomainError as exc:
        raise InputError(str(exc)) from None
    items = [("verdict", "conforms" if report.conforms else "does not conform"),
             ("mode", cfg.mode), ("input_timing", args.input_timing), ("tau", p.tau),
             ("eps", p.eps), ("T", p.T), ("J", p.J), ("spec_pairs", len(spec)),
             ("impl_pairs", len(impl))]
    for r in report.results:
        line = r.status
        if r.impl_index is not None:
            line += f" impl={r.impl_index}"
        if r.best_epsilon is not None:
            line += f" best_eps={fmt9(r.best_epsilon)}"
        if r.verdict is not None and r.verdict.counterexample is not None:
            c = r.verdict.counterexample
            line += f" at t={fmt9(c.t)} j={c.j} distance={fmt9(c.distance)}"
        items.append((f"pair.{r.spec_index}", line))
    _emit(cfg, "report.txt", items)
    return EXIT_PASS if report.conforms else EXIT_FAIL


def cmd_hioco(cfg: RunConfig, args) -> int:
    S, I = load_model(args.spec), load_model(args.impl)
    stim = _stimulus(args.stimulus, _horizon(args))
    suite = trace_prefixes(S, stim, cfg.sim)
    try:
        verdict = hioco(I, S, suite, args.probes, cfg.sim, args.include_xi)
    except SuiteError as exc:
        raise InputError(str(exc)) from None
    except ValueError as exc:
        raise InputError(str(exc)) from None
    items = [("verdict", "conforms" if verdict else "does not conform"),
             ("suite_traces", len(suite)), ("probes", ",".join(fmt9(d) for d in args.probes))]
    cx = verdict.counterexample
    if cx is not None:
        items += [("counterexample.trace", cx.trace_index), ("counterexample.kind", cx.kind)]
        if cx.kind == "out":
            items.append(("counterexample.extra_outputs", ",".join(sorted(cx.extra_outputs))))
        else:
            items.append(("counterexample.probe", cx.probe))
        if cfg.out is not None:
            cfg.out.mkdir(parents=True, exist_ok=True)
            write_trace(cfg.out / "counterexample.csv",
                        trace_to_atrace(suite[cx.trace_index], S.external_actions))
    _emit(cfg, "report.txt", items)
    return EXIT_PASS if verdict else EXIT_FAIL


def cmd_semitrans(cfg: RunConfig, args) -> int:
    if args.trials < 1:
        raise InputError("--trials must be positive")
    report = semitrans_check(args.trials, cfg.seed, GeneratorConfig(), args.parallel)
    items = [("trials", report.trials), ("seed", report.seed), ("redrawn", report.redrawn),
             ("violations", len(report.violations))]
    for v in report.violations:
        items.append((f"violation.{v.trial}", " ".join(fmt9(x) for x in v.params)))
        if cfg.out is not None:
            cfg.out.mkdir(parents=True, exist_ok=True)
            for name, y in (("y1", v.y1), ("y2", v.y2), ("y3", v.y3)):
                write_trace(cfg.out / f"violation{v.trial}_{name}.csv", y)
    _emit(cfg, "report.txt", items)
    return EXIT_PASS if report.passed else EXIT_FAIL


COMMANDS = {"simulate": cmd_simulate, "close": cmd_close, "conform": cmd_conform,
            "hioco": cmd_hioco, "semitrans": cmd_semitrans}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _config(args)
        return COMMANDS[args.command](cfg, args)
    except (InputError, FormatError, ModelError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SimulationError as exc:
        print(f"simulation failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
