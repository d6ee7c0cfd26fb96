"""Single home for every tunable default; all are overridable by CLI flags
or function arguments, never by environment variables (the backend switch
in backend.py is the one exception and affects speed only)."""

DEFAULT_STEP = 1e-2  # integration step h
DEFAULT_HORIZON = 10.0  # integration horizon T
DEFAULT_SAMPLES = 10_000  # falsifier sample count N
DEFAULT_SEED = 42
DEFAULT_BOX_LO = -10.0  # per-dimension sampling box
DEFAULT_BOX_HI = 10.0
TOL_COND = 1e-7  # absolute tolerance for the two certificate conditions
EPS_FEAS = 1e-9  # margin for the strict composition-weight inequalities
RESAMPLE_FACTOR = 10  # resample budget = factor * N


def tol_bound(h: float) -> float:
    """Tolerance for trajectory-bound checks: absorbs RK4 truncation and
    the grid approximation of the input-gap sup."""
    return 1e-4 + 10.0 * h ** 4
