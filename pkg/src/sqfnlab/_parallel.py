"""Thread-count plumbing shared by the numba-accelerated scans."""

import os

_APPLIED = False


def apply_thread_cap() -> None:
    """Honor SQFNLAB_THREADS (if set) before the first parallel kernel runs."""
    global _APPLIED
    if _APPLIED:
        return
    _APPLIED = True
    cap = os.environ.get("SQFNLAB_THREADS")
    if not cap:
        return
    import numba

    numba.set_num_threads(max(1, int(cap)))
