"""Toolkit for interconnected continuous-time systems: compose
bisimulation-function certificates under a small-gain condition and
falsify them numerically by sampling and simulation."""

from .backend import backend_name, run_batch
from .certify import (
    Certificate,
    CompositionWeights,
    alpha_feasible_region_grid,
    compose,
    select_alphas,
    small_gain_ratio,
    validate_alphas,
)
from .errors import (
    BisimError,
    DimensionError,
    EvalError,
    ModelError,
    NonDifferentiableError,
    ParseError,
    SmallGainError,
)
from .expr import Expr, evaluate, gradient, parse, pretty
from .model import (
    Interconnection,
    Subsystem,
    System,
    as_system,
    eval_field,
    eval_subsystem_field,
    interconnect,
    repartition,
)
from .sim import InputSignal, Trajectory, integrate, sup_input_gap
from .verify import (
    BoundReport,
    CheckReport,
    Envelope,
    SampleBox,
    Violation,
    check_bound,
    check_cond1,
    check_cond2,
    envelope,
)

__version__ = "0.1.0"
