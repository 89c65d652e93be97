# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled brute-force kernel for hashcash challenges (OpenSSL SHA-256).

The prefix is hashed into a context once; each candidate copies that midstate
and appends its own 8 little-endian bytes. The low-level SHA256_* API is used
deliberately: the one-shot SHA256() wrapper re-fetches the digest
implementation on every call under OpenSSL 3, which costs more than the hash.
"""

from libc.stdint cimport uint8_t, uint64_t

from libc.string cimport memcmp

cdef extern from "openssl/sha.h":
    ctypedef struct SHA256_CTX:
        pass
    int SHA256_Init(SHA256_CTX *c) nogil
    int SHA256_Update(SHA256_CTX *c, const void *data, size_t length) nogil
    int SHA256_Final(unsigned char *md, SHA256_CTX *c) nogil


BACKEND = "c"


def solve_kernel(bytes prefix, bytes target, unsigned long long max_rand):
    """Smallest test in [0, max_rand] with SHA256(prefix + LE8(test)) == target, else -1."""
    if len(target) != 32:
        raise ValueError("target must be a 32-byte digest")
    cdef const uint8_t *prefix_ptr = <const uint8_t *> prefix
    cdef size_t prefix_len = len(prefix)
    cdef const uint8_t *target_ptr = <const uint8_t *> target
    cdef SHA256_CTX base
    cdef SHA256_CTX ctx
    cdef uint8_t digest[32]
    cdef uint8_t suffix[8]
    cdef uint64_t limit = max_rand
    cdef uint64_t test = 0
    cdef int i
    cdef long long found = -1
    with nogil:
        SHA256_Init(&base)
        SHA256_Update(&base, prefix_ptr, prefix_len)
        while True:
            for i in range(8):
                suffix[i] = <uint8_t> ((test >> (8 * i)) & 0xFF)
            ctx = base
            SHA256_Update(&ctx, suffix, 8)
            SHA256_Final(digest, &ctx)
            if memcmp(digest, target_ptr, 32) == 0:
                found = <long long> test
                break
            if test == limit:
                break
            test += 1
    return found
