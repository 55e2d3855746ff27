"""Backend selection for the compiled kernels.

Set SKINLAB_DISABLE_NUMBA=1 to force the pure-numpy code paths (useful for
debugging and for checking that both paths agree)."""

import os
import warnings

DISABLED = os.environ.get("SKINLAB_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:
    if DISABLED:
        raise ImportError
    import numba as _nb

    # an old system TBB only disables that layer; the other layers are fine
    warnings.filterwarnings("ignore", message="The TBB threading layer")

    HAVE_NUMBA = True
    njit = _nb.njit
    prange = _nb.prange
except ImportError:  # pragma: no cover - depends on environment
    _nb = None
    HAVE_NUMBA = False
    prange = range

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


def backend_name() -> str:
    return "numba" if HAVE_NUMBA else "numpy"


def set_threads(n) -> None:
    """Cap the worker count of the parallel kernels (no-op for numpy)."""
    if n is None or _nb is None:
        return
    _nb.set_num_threads(max(1, min(int(n), _nb.config.NUMBA_NUM_THREADS)))
