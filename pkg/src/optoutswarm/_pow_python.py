"""Pure-Python brute-force kernel for hashcash challenges.

Same contract as the compiled kernel in ``_powcore``: scan test values
upward from zero and report the first one whose SHA-256 matches the target.
The prefix digest state is computed once and copied per candidate, which
roughly halves the work compared to rehashing the whole message each time.
"""

import hashlib

BACKEND = "python"


def solve_kernel(prefix: bytes, target: bytes, max_rand: int) -> int:
    """Smallest test in [0, max_rand] with SHA256(prefix + LE8(test)) == target, else -1."""
    if len(target) != 32:
        raise ValueError("target must be a 32-byte digest")
    base = hashlib.sha256(prefix)
    for test in range(max_rand + 1):
        h = base.copy()
        h.update(test.to_bytes(8, "little"))
        if h.digest() == target:
            return test
    return -1
