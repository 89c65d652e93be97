"""In-process multimap DHT with hashed keys and TTL expiry.

The network stores three kinds of entries, all through the same two verbs:
campaign start times under the hash of the target URL, participant public
keys under the hash of "start|url", and sealed messages under the hash of
the recipient's public key. Only 20-byte hashed keys ever hit the store;
preimages stay with the clients.

Values expire after a TTL so abandoned campaigns clean themselves up, and
duplicate byte-identical values collapse to one (re-registering for a
campaign is idempotent). An optional visibility latency models propagation
delay: a value written at minute t becomes readable at t + latency.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

KEY_LEN = 20

# A campaign can sit in the DHT for at most max_wait before it starts; one
# extra day of slack covers the campaign itself plus stragglers.
DEFAULT_TTL_MINUTES = 7 * 24 * 60 + 1440


class EmptyKey(Exception):
    """Logical keys must be non-empty."""


@dataclass(frozen=True)
class DhtKey:
    key: bytes

    def __post_init__(self) -> None:
        if len(self.key) != KEY_LEN:
            raise ValueError(f"DHT keys are {KEY_LEN} bytes")


def derive_key(logical_key: bytes) -> DhtKey:
    """First 20 bytes of SHA-256 over the logical key bytes."""
    if not logical_key:
        raise EmptyKey("logical key must be non-empty")
    return DhtKey(hashlib.sha256(logical_key).digest()[:KEY_LEN])


def campaign_table_key(canonical_url: str) -> DhtKey:
    """Key under which start times for a target URL are announced."""
    return derive_key(canonical_url.encode("utf-8"))


def comrades_table_key(start_minute: int, canonical_url: str) -> DhtKey:
    """Key under which participants of one (start, URL) campaign register."""
    return derive_key(f"{start_minute}|{canonical_url}".encode("utf-8"))


def inbox_key(public_key: bytes) -> DhtKey:
    """Key of a client's message inbox."""
    return derive_key(public_key)


@dataclass
class DhtRecord:
    value: bytes
    stored_at: int
    ttl_minutes: int


@dataclass
class SimulatedDht:
    """Single authoritative store; real-DHT churn and routing are out of scope."""

    ttl_minutes: int = DEFAULT_TTL_MINUTES
    visibility_latency: int = 0
    _table: dict[bytes, list[DhtRecord]] = field(default_factory=dict)

    def put(self, key: DhtKey, value: bytes, now: int) -> None:
        if not value:
            raise ValueError("value must be non-empty")
        records = self._table.setdefault(key.key, [])
        for record in records:
            if record.value == value and not self._expired(record, now):
                record.stored_at = now  # refresh instead of duplicating
                return
        records.append(DhtRecord(value=value, stored_at=now, ttl_minutes=self.ttl_minutes))

    def get(self, key: DhtKey, now: int) -> list[bytes]:
        records = self._table.get(key.key, [])
        return [
            r.value
            for r in records
            if not self._expired(r, now) and now >= r.stored_at + self.visibility_latency
        ]

    def remove(self, key: DhtKey, value: bytes) -> None:
        records = self._table.get(key.key)
        if not records:
            return
        records[:] = [r for r in records if r.value != value]
        if not records:
            del self._table[key.key]

    def _expired(self, record: DhtRecord, now: int) -> bool:
        return now > record.stored_at + record.ttl_minutes
