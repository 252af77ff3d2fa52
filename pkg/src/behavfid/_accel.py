"""Numba availability and selection logic for the hot kernels.

Set ``BEHAVFID_NO_NUMBA=1`` to force the pure-numpy fallback path even when
numba is installed (useful for debugging and for the kernel benchmark).
When numba is missing the fallback is selected automatically with a warning.
"""

import os
import warnings

_FLAG = os.environ.get("BEHAVFID_NO_NUMBA", "").strip().lower()
NUMBA_DISABLED = _FLAG in {"1", "true", "yes", "on"}

if NUMBA_DISABLED:
    NUMBA_AVAILABLE = False
else:
    try:
        import numba  # noqa: F401

        NUMBA_AVAILABLE = True
    except ImportError:  # pragma: no cover - depends on environment
        NUMBA_AVAILABLE = False
        warnings.warn(
            "numba is not importable; falling back to the slower numpy kernels. "
            "Set BEHAVFID_NO_NUMBA=1 to silence this warning.",
            stacklevel=2,
        )

USING_NUMBA = NUMBA_AVAILABLE

if NUMBA_AVAILABLE:
    from numba import njit
else:

    def njit(*args, **kwargs):
        """No-op stand-in so @njit-decorated loops stay plain Python."""
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrapper(func):
            return func

        return wrapper


def set_num_threads(n: int) -> None:
    """Cap numba's worker threads; a no-op on the fallback path."""
    if NUMBA_AVAILABLE and n >= 1:
        import numba

        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
