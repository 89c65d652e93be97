"""Selects the challenge-solving kernel at import time.

The compiled kernel is preferred when the extension built; setting
OPTOUTSWARM_PURE_PYTHON=1 forces the pure-Python one (useful for
benchmarking the two against each other, or on hosts without a
working toolchain).
"""

import os

if os.environ.get("OPTOUTSWARM_PURE_PYTHON") == "1":
    from optoutswarm._pow_python import BACKEND, solve_kernel
else:
    try:
        from optoutswarm._powcore import BACKEND, solve_kernel
    except ImportError:
        from optoutswarm._pow_python import BACKEND, solve_kernel

__all__ = ["BACKEND", "solve_kernel"]
