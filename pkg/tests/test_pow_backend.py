"""Kernel-level checks for the brute-force search, both backends."""

import hashlib

import pytest

from optoutswarm import _pow_python
from optoutswarm import pow_backend

try:
    from optoutswarm import _powcore

    KERNELS = [_pow_python.solve_kernel, _powcore.solve_kernel]
    KERNEL_IDS = ["python", "c"]
except ImportError:
    KERNELS = [_pow_python.solve_kernel]
    KERNEL_IDS = ["python"]


def _target(prefix: bytes, test: int) -> bytes:
    return hashlib.sha256(prefix + test.to_bytes(8, "little")).digest()


@pytest.mark.parametrize("kernel", KERNELS, ids=KERNEL_IDS)
def test_finds_planted_solution(kernel):
    prefix = b"some-issuer-key" + (99).to_bytes(8, "little")
    assert kernel(prefix, _target(prefix, 1234), 10_000) == 1234


@pytest.mark.parametrize("kernel", KERNELS, ids=KERNEL_IDS)
def test_zero_is_found_first(kernel):
    prefix = b"p"
    assert kernel(prefix, _target(prefix, 0), 10) == 0


@pytest.mark.parametrize("kernel", KERNELS, ids=KERNEL_IDS)
def test_exhausted_interval_returns_minus_one(kernel):
    prefix = b"p"
    assert kernel(prefix, _target(prefix, 500), 100) == -1


@pytest.mark.parametrize("kernel", KERNELS, ids=KERNEL_IDS)
def test_solution_at_upper_bound(kernel):
    prefix = b"edge"
    assert kernel(prefix, _target(prefix, 100), 100) == 100


@pytest.mark.parametrize("kernel", KERNELS, ids=KERNEL_IDS)
def test_different_prefix_never_matches(kernel):
    target = _target(b"prefix-one", 7)
    assert kernel(b"prefix-two", target, 1_000) == -1


@pytest.mark.parametrize("kernel", KERNELS, ids=KERNEL_IDS)
def test_rejects_short_target(kernel):
    with pytest.raises(ValueError):
        kernel(b"p", b"short", 10)


@pytest.mark.skipif(len(KERNELS) < 2, reason="compiled kernel not built")
def test_backends_agree():
    prefix = b"parity-check" + (3).to_bytes(8, "little")
    for planted in (0, 1, 17, 255, 4096):
        target = _target(prefix, planted)
        assert KERNELS[0](prefix, target, 5000) == KERNELS[1](prefix, target, 5000)
    missing = hashlib.sha256(b"not reachable").digest()
    assert KERNELS[0](prefix, missing, 300) == KERNELS[1](prefix, missing, 300) == -1


def test_selected_backend_exports_kernel():
    assert pow_backend.BACKEND in ("python", "c")
    prefix = b"selected"
    assert pow_backend.solve_kernel(prefix, _target(prefix, 42), 100) == 42
