"""Optional numba acceleration.

Set ``THERMOHD_NUMBA=0`` to run every kernel as plain Python/numpy. The
kernels are written so that both paths execute the same arithmetic.
"""

import os

ENABLED = False

if os.environ.get("THERMOHD_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off"):
    try:
        import numba

        ENABLED = True
    except ImportError:  # pragma: no cover
        ENABLED = False


def njit(func=None, *, cache=True):
    """``numba.njit`` when acceleration is on, identity otherwise."""
    if func is None:
        return lambda f: njit(f, cache=cache)
    if ENABLED:
        return numba.njit(cache=cache)(func)
    return func


def backend() -> str:
    return "numba" if ENABLED else "python"
