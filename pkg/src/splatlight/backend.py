"""Kernel backend selection.

Hot loops (splat rasterization forward/backward, shadow rays) exist twice:
a numba @njit version and a vectorized pure-numpy version with identical
arithmetic. The env var SPLATLIGHT_NUMBA picks the path:

    SPLATLIGHT_NUMBA=0|off|numpy   force the numpy fallback
    SPLATLIGHT_NUMBA=1|on|numba    require numba (ImportError if missing)
    unset / auto                   use numba when importable

`benchmarks/bench_kernels.py` times both paths side by side.
"""
import os

# the TBB shipped here is too old for numba and triggers a warning; omp is fine
os.environ.setdefault("NUMBA_THREADING_LAYER", "omp")

_flag = os.environ.get("SPLATLIGHT_NUMBA", "auto").strip().lower()

if _flag in ("0", "off", "false", "numpy"):
    USE_NUMBA = False
elif _flag in ("1", "on", "true", "numba"):
    import numba  # noqa: F401  -- fail loudly if forced but missing

    USE_NUMBA = True
else:
    try:
        import numba  # noqa: F401

        USE_NUMBA = True
    except ImportError:
        USE_NUMBA = False


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
