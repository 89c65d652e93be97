"""Client identities, hashcash-style challenges, and sealed inbox messages.

Clients are identified by raw 32-byte X25519 public keys. A client proves it
spent CPU time for a peer by solving that peer's challenge: the issuer picks
two random numbers, publishes one of them plus a hash binding its own public
key to both, and the solver brute-forces the hidden one. Binding the issuer's
key into the hash means a relayed challenge yields a solution for the
original issuer, never for the relay.

Sealed messages are addressed by a 20-byte hash of the recipient key and can
only be opened by the matching private key (X25519 + ChaCha20-Poly1305).
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from random import Random

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.asymmetric.x25519 import (
    X25519PrivateKey,
    X25519PublicKey,
)
from cryptography.hazmat.primitives.ciphers.aead import ChaCha20Poly1305

KEY_HASH_LEN = 20  # addressing hash prefix, matches DHT key width
PUBLIC_KEY_LEN = 32

# Domain separation tags so the ephemeral scalar and the AEAD key can never
# collide with each other or with challenge hashing.
_EPHEMERAL_TAG = b"optoutswarm seal ephemeral v1"
_BOX_KEY_TAG = b"optoutswarm seal key v1"
_ZERO_NONCE = bytes(12)


class NoSolution(Exception):
    """No value in [0, max_rand] reproduces the challenge hash."""


class NotAddressee(Exception):
    """Sealed message is addressed to a different key."""


class DecryptionFailure(Exception):
    """Sealed message is addressed to us but fails to authenticate."""


def hash_bytes(data: bytes) -> bytes:
    """SHA-256 digest of the exact input bytes."""
    return hashlib.sha256(data).digest()


def key_hash(public_key: bytes) -> bytes:
    """20-byte addressing hash of a public key."""
    return hash_bytes(public_key)[:KEY_HASH_LEN]


@dataclass(frozen=True)
class ClientIdentity:
    """An X25519 keypair; the public key doubles as the client's name."""

    public_key: bytes
    private_key: bytes  # raw scalar, never written into any DHT record

    def __repr__(self) -> str:  # keep private key out of logs
        return f"ClientIdentity(public_key={self.public_key.hex()[:12]}…)"


def generate_identity(rng: Random) -> ClientIdentity:
    private = rng.randbytes(PUBLIC_KEY_LEN)
    public = X25519PrivateKey.from_private_bytes(private).public_key()
    return ClientIdentity(public_key=public.public_bytes_raw(), private_key=private)


@dataclass(frozen=True)
class Challenge:
    issuer_public_key: bytes
    rand1: int
    target_hash: bytes
    issued_at: int = 0  # sim-minute; 0 outside a simulation


@dataclass(frozen=True)
class ChallengeSolution:
    solver_public_key: bytes
    rand2: int


def _challenge_preimage(issuer_public_key: bytes, rand1: int, rand2: int) -> bytes:
    return (
        issuer_public_key
        + rand1.to_bytes(8, "little")
        + rand2.to_bytes(8, "little")
    )


def challenge_target(issuer_public_key: bytes, rand1: int, rand2: int) -> bytes:
    """The 32-byte hash a solver must reproduce."""
    return hash_bytes(_challenge_preimage(issuer_public_key, rand1, rand2))


def generate_challenge(
    issuer: ClientIdentity,
    max_rand: int,
    rng: Random,
    issued_at: int = 0,
) -> tuple[Challenge, int]:
    """Draw rand1 and rand2 uniformly from [0, max_rand].

    Returns the challenge to send plus the expected answer, which the issuer
    keeps to itself until a response arrives.
    """
    if max_rand < 0:
        raise ValueError("max_rand must be non-negative")
    rand1 = rng.randint(0, max_rand)
    rand2 = rng.randint(0, max_rand)
    challenge = Challenge(
        issuer_public_key=issuer.public_key,
        rand1=rand1,
        target_hash=challenge_target(issuer.public_key, rand1, rand2),
        issued_at=issued_at,
    )
    return challenge, rand2


def solve_challenge(challenge: Challenge, max_rand: int) -> tuple[int, int]:
    """Brute-force the hidden rand2, counting hash evaluations as work.

    Tests candidates upward from zero; work for a solution found at value
    ``test`` is ``test + 1``. Raises NoSolution when the whole interval is
    exhausted, which is what a relayed challenge looks like after the relay
    swaps in its own key.
    """
    from optoutswarm.pow_backend import solve_kernel

    prefix = challenge.issuer_public_key + challenge.rand1.to_bytes(8, "little")
    found = solve_kernel(prefix, challenge.target_hash, max_rand)
    if found < 0:
        raise NoSolution(f"no solution in [0, {max_rand}]")
    return found, found + 1


def verify_solution(challenge: Challenge, rand2: int) -> bool:
    """Check a claimed rand2 against the challenge without re-solving."""
    return challenge_target(challenge.issuer_public_key, challenge.rand1, rand2) == (
        challenge.target_hash
    )


@dataclass(frozen=True)
class SealedMessage:
    recipient_key_hash: bytes  # 20 bytes
    ciphertext: bytes  # ephemeral public key (32) ‖ AEAD ciphertext

    def to_bytes(self) -> bytes:
        return self.recipient_key_hash + self.ciphertext

    @classmethod
    def from_bytes(cls, data: bytes) -> "SealedMessage":
        if len(data) < KEY_HASH_LEN + PUBLIC_KEY_LEN:
            raise ValueError("sealed message too short")
        return cls(
            recipient_key_hash=data[:KEY_HASH_LEN],
            ciphertext=data[KEY_HASH_LEN:],
        )


def _box_key(shared_secret: bytes) -> bytes:
    return hash_bytes(_BOX_KEY_TAG + shared_secret)


def seal(recipient_public_key: bytes, plaintext: bytes) -> SealedMessage:
    """Encrypt so only the holder of the matching private key can read.

    The ephemeral key is derived from (recipient, plaintext), so sealing is
    deterministic and replay in a seeded simulation is byte-stable. Each
    distinct message gets a distinct AEAD key, which makes the fixed nonce
    safe.
    """
    if len(recipient_public_key) != PUBLIC_KEY_LEN:
        raise ValueError("recipient public key must be 32 bytes")
    scalar = hash_bytes(_EPHEMERAL_TAG + recipient_public_key + plaintext)
    ephemeral = X25519PrivateKey.from_private_bytes(scalar)
    shared = ephemeral.exchange(X25519PublicKey.from_public_bytes(recipient_public_key))
    box = ChaCha20Poly1305(_box_key(shared))
    ct = box.encrypt(_ZERO_NONCE, plaintext, recipient_public_key)
    return SealedMessage(
        recipient_key_hash=key_hash(recipient_public_key),
        ciphertext=ephemeral.public_key().public_bytes_raw() + ct,
    )


def open_sealed(identity: ClientIdentity, msg: SealedMessage) -> bytes:
    """Open a sealed message addressed to this identity."""
    if msg.recipient_key_hash != key_hash(identity.public_key):
        raise NotAddressee("message addressed to a different key")
    ephemeral_pk = msg.ciphertext[:PUBLIC_KEY_LEN]
    ct = msg.ciphertext[PUBLIC_KEY_LEN:]
    private = X25519PrivateKey.from_private_bytes(identity.private_key)
    try:
        shared = private.exchange(X25519PublicKey.from_public_bytes(ephemeral_pk))
        box = ChaCha20Poly1305(_box_key(shared))
        return box.decrypt(_ZERO_NONCE, ct, identity.public_key)
    except (InvalidTag, ValueError) as exc:
        raise DecryptionFailure("sealed message failed to authenticate") from exc
