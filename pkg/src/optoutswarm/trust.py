"""Paranoid trust: believe only what you can verify or measure yourself.

Trust in a peer grows from exactly two sources. Solving my challenge proves
the peer spent CPU time (floor of 1). A campaign I measured as successful
bumps every comrade who was registered for it. Nothing a peer merely claims
moves the needle, and a streak of failed campaigns wipes the whole database
on the theory that it was poisoned.

The verification handshake runs over sealed inbox messages with one-byte
type tags, and answering challenges is rate-limited per sliding hour so a
flood of puzzles cannot eat a client's CPU.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from random import Random
from typing import TYPE_CHECKING, Callable

from optoutswarm import crypto
from optoutswarm.crypto import Challenge, ChallengeSolution, ClientIdentity
from optoutswarm.dht import SimulatedDht, comrades_table_key, inbox_key

if TYPE_CHECKING:
    from optoutswarm.coordinator import CampaignStart

log = logging.getLogger(__name__)

TAG_CHALLENGE = 0x01
TAG_RESPONSE = 0x02

CHALLENGE_PAYLOAD_LEN = 1 + 32 + 8 + 32
RESPONSE_PAYLOAD_LEN = 1 + 32 + 8


class NotAComrade(Exception):
    """Peer shares no campaign with us; no trust business to do."""


class MalformedPayload(Exception):
    """Inbox payload does not decode to a known message type."""


class Verdict(Enum):
    SUCCESS = "success"
    FAILURE = "failure"


@dataclass(frozen=True)
class TrustConfig:
    alpha: float = 2.0  # during/baseline latency ratio that counts as success
    success_trust: int = 1
    challenge_trust: int = 1
    failures_before_reset: int = 3
    ramp_step: int = 1
    ramp_cap: int = 10
    rechallenge_timeout: int = 120  # minutes before a silent peer is re-asked
    max_rand: int = 10_000
    probe_count: int = 5


@dataclass(frozen=True)
class CampaignOutcome:
    """What one client measured about one campaign it watched."""

    campaign: "CampaignStart"
    baseline_latency: float  # median of pre-start probes, ms
    during_latency: float  # median of in-campaign probes, ms
    comrades: tuple[bytes, ...]  # registered keys, excluding the observer


@dataclass
class PendingChallenge:
    expected_rand2: int
    issued_at: int


@dataclass
class TrustDb:
    records: dict[bytes, int] = field(default_factory=dict)
    verified: set[bytes] = field(default_factory=set)
    pending: dict[bytes, PendingChallenge] = field(default_factory=dict)
    consecutive_failures: int = 0
    current_min_accumulated_trust: int = 0
    reset_count: int = 0

    def trust(self, public_key: bytes) -> int:
        return self.records.get(public_key, 0)

    def reset(self) -> None:
        self.records.clear()
        self.verified.clear()
        self.pending.clear()
        self.consecutive_failures = 0
        self.reset_count += 1


@dataclass
class AnswerBudget:
    """At most `cap` challenge answers per sliding 60-minute window."""

    cap: int
    window: int = 60
    answered_at: deque[int] = field(default_factory=deque)

    def try_consume(self, now: int) -> bool:
        while self.answered_at and self.answered_at[0] <= now - self.window:
            self.answered_at.popleft()
        if len(self.answered_at) >= self.cap:
            return False
        self.answered_at.append(now)
        return True


def judge_outcome(outcome: CampaignOutcome, alpha: float) -> Verdict:
    """Success iff the site got at least alpha times slower than baseline."""
    if alpha <= 1:
        raise ValueError("alpha must exceed 1")
    if outcome.during_latency >= alpha * outcome.baseline_latency:
        return Verdict.SUCCESS
    return Verdict.FAILURE


def apply_outcome(
    db: TrustDb,
    verdict: Verdict,
    outcome: CampaignOutcome,
    cfg: TrustConfig,
) -> TrustDb:
    """Fold one measured campaign into the database.

    Success rewards every registered comrade and ratchets the participation
    threshold one step (campaigns should keep earning their size). A run of
    failures_before_reset failures with no success in between clears all
    records; the ratcheted threshold survives the reset.
    """
    if verdict is Verdict.SUCCESS:
        for comrade in outcome.comrades:
            db.records[comrade] = db.trust(comrade) + cfg.success_trust
        db.consecutive_failures = 0
        if db.current_min_accumulated_trust < cfg.ramp_cap:
            db.current_min_accumulated_trust = min(
                cfg.ramp_cap, db.current_min_accumulated_trust + cfg.ramp_step
            )
    else:
        db.consecutive_failures += 1
        if db.consecutive_failures >= cfg.failures_before_reset:
            db.reset()
    return db


def accumulated_trust(db: TrustDb, comrades: list[bytes] | tuple[bytes, ...]) -> int:
    """Sum of trust over the given keys; unknown peers count zero."""
    return sum(db.trust(pk) for pk in comrades)


def encode_challenge_payload(challenge: Challenge) -> bytes:
    return (
        bytes([TAG_CHALLENGE])
        + challenge.issuer_public_key
        + challenge.rand1.to_bytes(8, "little")
        + challenge.target_hash
    )


def encode_response_payload(solution: ChallengeSolution) -> bytes:
    return (
        bytes([TAG_RESPONSE])
        + solution.solver_public_key
        + solution.rand2.to_bytes(8, "little")
    )


def decode_payload(data: bytes, issued_at: int = 0) -> Challenge | ChallengeSolution:
    """Parse a tagged inbox payload back into its message type."""
    if not data:
        raise MalformedPayload("empty payload")
    tag = data[0]
    if tag == TAG_CHALLENGE:
        if len(data) != CHALLENGE_PAYLOAD_LEN:
            raise MalformedPayload(f"challenge payload of {len(data)} bytes")
        return Challenge(
            issuer_public_key=data[1:33],
            rand1=int.from_bytes(data[33:41], "little"),
            target_hash=data[41:73],
            issued_at=issued_at,
        )
    if tag == TAG_RESPONSE:
        if len(data) != RESPONSE_PAYLOAD_LEN:
            raise MalformedPayload(f"response payload of {len(data)} bytes")
        return ChallengeSolution(
            solver_public_key=data[1:33],
            rand2=int.from_bytes(data[33:41], "little"),
        )
    raise MalformedPayload(f"unknown payload tag {tag:#04x}")


def initiate_verification(
    me: ClientIdentity,
    peer_public_key: bytes,
    shared_campaign: "CampaignStart",
    dht: SimulatedDht,
    db: TrustDb,
    cfg: TrustConfig,
    rng: Random,
    now: int,
) -> bool:
    """Send a challenge to a comrade we have not verified yet.

    At most one challenge per peer is outstanding; a peer that never answers
    may be re-challenged after the timeout. Returns True when a challenge
    was actually sent.
    """
    key = comrades_table_key(shared_campaign.start, shared_campaign.url.render())
    if peer_public_key not in dht.get(key, now):
        raise NotAComrade("peer is not registered for that campaign")
    pending = db.pending.get(peer_public_key)
    if pending is not None and now < pending.issued_at + cfg.rechallenge_timeout:
        return False
    challenge, expected_rand2 = crypto.generate_challenge(
        me, cfg.max_rand, rng, issued_at=now
    )
    db.pending[peer_public_key] = PendingChallenge(
        expected_rand2=expected_rand2, issued_at=now
    )
    sealed = crypto.seal(peer_public_key, encode_challenge_payload(challenge))
    dht.put(inbox_key(peer_public_key), sealed.to_bytes(), now)
    return True


@dataclass(frozen=True)
class ChallengeHandling:
    attempted: bool  # budget was spent on a solve attempt
    answered: bool  # a response was sealed back to the issuer
    hash_evaluations: int
    dropped: str | None = None  # "not_comrade" | "budget" | "no_solution"


def handle_challenge(
    me: ClientIdentity,
    challenge: Challenge,
    dht: SimulatedDht,
    budget: AnswerBudget,
    issuer_is_comrade: Callable[[bytes], bool],
    max_rand: int,
    now: int,
) -> ChallengeHandling:
    """Solve a comrade's challenge and mail the answer back.

    Challenges from strangers are dropped before they cost anything; the
    answer budget is spent per solve attempt, so even unsolvable garbage
    from a registered comrade burns at most the configured rate.
    """
    if not issuer_is_comrade(challenge.issuer_public_key):
        log.debug("dropping challenge from non-comrade")
        return ChallengeHandling(False, False, 0, dropped="not_comrade")
    if not budget.try_consume(now):
        log.debug("dropping challenge: answer budget exhausted")
        return ChallengeHandling(False, False, 0, dropped="budget")
    try:
        rand2, work = crypto.solve_challenge(challenge, max_rand)
    except crypto.NoSolution:
        # the full scan was still paid for; typical of relayed challenges
        # whose hash binds a different issuer key
        log.debug("dropping challenge with no solution in range")
        return ChallengeHandling(True, False, max_rand + 1, dropped="no_solution")
    response = ChallengeSolution(solver_public_key=me.public_key, rand2=rand2)
    sealed = crypto.seal(
        challenge.issuer_public_key, encode_response_payload(response)
    )
    dht.put(inbox_key(challenge.issuer_public_key), sealed.to_bytes(), now)
    return ChallengeHandling(True, True, work)


def handle_response(
    db: TrustDb,
    solution: ChallengeSolution,
    cfg: TrustConfig,
) -> bool:
    """Match a response against the stored expectation for that peer."""
    pending = db.pending.pop(solution.solver_public_key, None)
    if pending is None:
        log.debug("dropping response with no pending challenge")
        return False
    if solution.rand2 != pending.expected_rand2:
        return False
    db.verified.add(solution.solver_public_key)
    db.records[solution.solver_public_key] = max(
        db.trust(solution.solver_public_key), cfg.challenge_trust
    )
    return True
