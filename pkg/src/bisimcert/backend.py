"""Backend selection for the hot kernels.

Set BISIMCERT_BACKEND=numpy or BISIMCERT_BACKEND=numba to force a path;
the default is numba when importable, else the pure-numpy fallback.  Both
backends implement identical semantics (see program.py for the status
codes); benchmarks/bench_backends.py compares them.
"""

from __future__ import annotations

import os

import numpy as np

from .errors import BisimError
from .program import Program, run_batch_numpy

ENV_VAR = "BISIMCERT_BACKEND"


def _numba_available() -> bool:
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def backend_name() -> str:
    """The backend currently selected by the environment."""
    choice = os.environ.get(ENV_VAR, "").strip().lower()
    if choice in ("numba", "numpy"):
        if choice == "numba" and not _numba_available():
            raise BisimError("BISIMCERT_BACKEND=numba but numba is not importable")
        return choice
    if choice:
        raise BisimError(f"unknown {ENV_VAR} value {choice!r} (use 'numba' or 'numpy')")
    return "numba" if _numba_available() else "numpy"


def run_batch(prog: Program, X, seed_slot: int = -1, backend: str | None = None):
    """Evaluate a compiled program at every row of X with the selected
    backend.  Returns (values, derivs | None, status)."""
    name = backend or backend_name()
    X = np.ascontiguousarray(X, dtype=np.float64)
    if name == "numba":
        from . import _kernels

        v, d, st = _kernels.run_batch(
            prog.code, prog.arg, prog.consts, prog.stack_size, X, seed_slot
        )
        return v, (d if seed_slot >= 0 else None), st
    return run_batch_numpy(prog, X, seed_slot)
