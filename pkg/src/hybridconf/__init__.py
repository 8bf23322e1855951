"""Simulation and conformance checking for hybrid I/O automata."""

from .automata import (HIOA, XI, Location, ModelError, NondeterminismError, NotEnabledError,
                       State, TransitionRule, build_thermostat, check_E1, discrete_step,
                       enabled_actions, is_agile)
from .closeness import (ClosenessParams, ClosenessVerdict, close, close_ext, close_naive,
                        close_plain, ext_norm, min_epsilon)
from .conformance import (ConformanceReport, PairSuite, SuiteError, after, conforms, hioco,
                          infilter, out_set, traj_set)
from .core import (INF, ATrace, ConcatenationError, DomainError, Execution, HybridSequence,
                   HybridTimeDomain, IllFormedTraceError, SolutionPair, StateMismatchError,
                   Trajectory, concat, is_prefix, restrict, restrict_traj, shift, suffix,
                   trace_to_atrace)
from .dsl import DSLError, format_automaton, parse_automaton
from .expr import parse_expr
from .simulate import SimConfig, SimulationError, Stimulus, integrate_flow, run, solution_pair
from .transitivity import semitrans_check

__version__ = "0.1.0"
