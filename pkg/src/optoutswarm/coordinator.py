"""Campaign coordination: pick start times, register, decide to launch.

A campaign is one target URL plus one absolute start minute. Clients that
saw the same spam find each other by reading start times under the URL's
hash, registering their public key under hash("start|url"), and re-checking
the roster when the start arrives. Two gates guard the launch: strictly
more than min_comrades registered keys, and enough accumulated trust among
them. Both checks use only self-measured state, so a fabricated roster can
inflate the count but never the trust sum.

Start times outside [now + min_wait, now + max_wait] are never joined, which
is the whole defense against far-future parking of campaigns; the weekly
usage windows keep starts inside minutes this machine is likely online.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from random import Random

from optoutswarm import crypto, trust
from optoutswarm.crypto import ClientIdentity, SealedMessage
from optoutswarm.dht import SimulatedDht, campaign_table_key, comrades_table_key, inbox_key
from optoutswarm.evaluator import CanonicalUrl
from optoutswarm.trust import TrustDb

log = logging.getLogger(__name__)

MINUTES_PER_WEEK = 7 * 24 * 60


class NoFeasibleStart(Exception):
    """Usage windows and the wait interval share no minute."""


class JoinPolicy(Enum):
    JOIN_ALL = "join_all"
    HIGHEST_TRUST = "highest_trust"


class CampaignState(Enum):
    PENDING = "pending"
    LAUNCHED = "launched"
    SKIPPED = "skipped"


@dataclass(frozen=True)
class CoordinatorConfig:
    min_wait: int = 60  # minutes; a start sooner than this is suspicious
    max_wait: int = MINUTES_PER_WEEK  # and later than this is parked forever
    min_comrades: int = 5  # launch needs strictly more than this
    min_accumulated_trust: int = 0  # floor; the trust model ramps above it
    usage_windows: tuple[tuple[int, int], ...] = ((0, MINUTES_PER_WEEK),)
    join_policy: JoinPolicy = JoinPolicy.JOIN_ALL
    poll_interval: int = 10  # minutes between inbox checks
    max_challenges_answered: int = 10  # per sliding 60-minute window
    launch_grace: int = 5  # minutes after start during which launching is allowed

    def __post_init__(self) -> None:
        if not 0 < self.min_wait < self.max_wait:
            raise ValueError("need 0 < min_wait < max_wait")
        if self.min_comrades < 1:
            raise ValueError("min_comrades must be at least 1")
        windows = sorted(self.usage_windows)
        for (a1, b1), (a2, _) in zip(windows, windows[1:]):
            if a2 < b1:
                raise ValueError("usage windows must not overlap")
        for a, b in windows:
            if not (0 <= a < b <= MINUTES_PER_WEEK):
                raise ValueError("usage windows must lie within one week")


@dataclass(frozen=True)
class CampaignStart:
    url: CanonicalUrl
    start: int  # absolute sim-minute

    def __post_init__(self) -> None:
        if self.start <= 0:
            raise ValueError("start must be positive")


@dataclass
class CampaignRecord:
    joined_at: int
    state: CampaignState = CampaignState.PENDING


@dataclass
class LocalCampaignDb:
    entries: dict[CampaignStart, CampaignRecord] = field(default_factory=dict)

    def pending(self) -> list[CampaignStart]:
        return [c for c, r in self.entries.items() if r.state is CampaignState.PENDING]


@dataclass(frozen=True)
class LaunchDecision:
    campaign: CampaignStart
    launched: bool
    comrade_count: int
    trust_sum: int
    trust_threshold: int
    decided_at: int


@dataclass(frozen=True)
class HandleResult:
    joined: tuple[CampaignStart, ...]
    proposed: CampaignStart | None
    rejected_unsuitable: int  # table entries that failed the suitability check


def is_suitable(start: int, now: int, cfg: CoordinatorConfig) -> bool:
    """A start we could personally commit to: near enough, far enough, online."""
    if not (now + cfg.min_wait <= start <= now + cfg.max_wait):
        return False
    week_minute = start % MINUTES_PER_WEEK
    return any(a <= week_minute < b for a, b in cfg.usage_windows)


def _feasible_segments(now: int, cfg: CoordinatorConfig) -> list[tuple[int, int]]:
    """Intersect [now+min_wait, now+max_wait] with the weekly usage windows.

    Returned as half-open absolute-minute segments [a, b).
    """
    lo = now + cfg.min_wait
    hi = now + cfg.max_wait + 1
    segments = []
    for week in range(lo // MINUTES_PER_WEEK, (hi - 1) // MINUTES_PER_WEEK + 1):
        base = week * MINUTES_PER_WEEK
        for a, b in sorted(cfg.usage_windows):
            seg_lo = max(lo, base + a)
            seg_hi = min(hi, base + b)
            if seg_lo < seg_hi:
                segments.append((seg_lo, seg_hi))
    return segments


def propose_start(now: int, cfg: CoordinatorConfig, rng: Random) -> int:
    """Uniform draw over every feasible minute."""
    segments = _feasible_segments(now, cfg)
    total = sum(b - a for a, b in segments)
    if total == 0:
        raise NoFeasibleStart("no minute satisfies both wait bounds and usage windows")
    index = rng.randrange(total)
    for a, b in segments:
        if index < b - a:
            return a + index
        index -= b - a
    raise AssertionError("index out of segment range")


def _read_campaign_table(
    dht: SimulatedDht, url: CanonicalUrl, now: int
) -> list[int]:
    starts = []
    for value in dht.get(campaign_table_key(url.render()), now):
        try:
            starts.append(int(value.decode("ascii")))
        except (UnicodeDecodeError, ValueError):
            log.debug("ignoring malformed campaign table entry %r", value)
    return starts


def read_comrades(
    dht: SimulatedDht, campaign: CampaignStart, now: int
) -> list[bytes]:
    """Distinct registered public keys for one campaign, stable order."""
    values = dht.get(comrades_table_key(campaign.start, campaign.url.render()), now)
    return sorted(set(values))


def handle_url(
    url: CanonicalUrl,
    now: int,
    cfg: CoordinatorConfig,
    dht: SimulatedDht,
    identity: ClientIdentity,
    db: LocalCampaignDb,
    trust_db: TrustDb,
    rng: Random,
) -> HandleResult:
    """React to one freshly reported target URL.

    Reads the announced start times, keeps the suitable ones, proposes a
    fresh start when none fit (at most one of my proposals outstanding per
    URL), then registers for every joined start. Registration is idempotent:
    the roster is a set and the local database keeps one record per
    campaign.
    """
    announced = _read_campaign_table(dht, url, now)
    suitable = sorted({s for s in announced if is_suitable(s, now, cfg)})
    rejected = len(set(announced)) - len(suitable)
    proposed: CampaignStart | None = None

    if not suitable:
        outstanding = any(
            c.url == url and c.start >= now and r.state is CampaignState.PENDING
            for c, r in db.entries.items()
        )
        if outstanding:
            return HandleResult(joined=(), proposed=None, rejected_unsuitable=rejected)
        start = propose_start(now, cfg, rng)
        dht.put(campaign_table_key(url.render()), str(start).encode("ascii"), now)
        proposed = CampaignStart(url=url, start=start)
        suitable = [start]

    if cfg.join_policy is JoinPolicy.HIGHEST_TRUST and len(suitable) > 1:
        def roster_trust(start: int) -> int:
            comrades = read_comrades(dht, CampaignStart(url=url, start=start), now)
            return trust.accumulated_trust(trust_db, comrades)

        # earliest start wins ties so every replica picks the same one
        suitable = [max(suitable, key=lambda s: (roster_trust(s), -s))]

    joined = []
    for start in suitable:
        campaign = CampaignStart(url=url, start=start)
        dht.put(
            comrades_table_key(start, url.render()), identity.public_key, now
        )
        if campaign not in db.entries:
            db.entries[campaign] = CampaignRecord(joined_at=now)
        joined.append(campaign)
    return HandleResult(
        joined=tuple(joined), proposed=proposed, rejected_unsuitable=rejected
    )


def tick(
    now: int,
    dht: SimulatedDht,
    trust_db: TrustDb,
    cfg: CoordinatorConfig,
    db: LocalCampaignDb,
) -> list[LaunchDecision]:
    """Decide every pending campaign whose start has arrived.

    Launch requires strictly more than min_comrades registered keys AND an
    accumulated trust sum at or above the effective threshold. A client that
    only notices a start after the grace window skips it rather than join a
    campaign mid-flight.
    """
    decisions = []
    threshold = max(cfg.min_accumulated_trust, trust_db.current_min_accumulated_trust)
    for campaign in sorted(db.pending(), key=lambda c: (c.start, c.url.render())):
        if now < campaign.start:
            continue
        record = db.entries[campaign]
        if now >= campaign.start + cfg.launch_grace:
            record.state = CampaignState.SKIPPED
            decisions.append(
                LaunchDecision(
                    campaign=campaign,
                    launched=False,
                    comrade_count=0,
                    trust_sum=0,
                    trust_threshold=threshold,
                    decided_at=now,
                )
            )
            continue
        comrades = read_comrades(dht, campaign, now)
        trust_sum = trust.accumulated_trust(trust_db, comrades)
        launched = len(comrades) > cfg.min_comrades and trust_sum >= threshold
        record.state = CampaignState.LAUNCHED if launched else CampaignState.SKIPPED
        decisions.append(
            LaunchDecision(
                campaign=campaign,
                launched=launched,
                comrade_count=len(comrades),
                trust_sum=trust_sum,
                trust_threshold=threshold,
                decided_at=now,
            )
        )
    return decisions


def poll_inbox(
    now: int,
    dht: SimulatedDht,
    identity: ClientIdentity,
) -> list[crypto.Challenge | trust.ChallengeSolution]:
    """Drain my inbox: open, decode, and delete everything addressed to me.

    Undecodable or misaddressed values are deleted too; leaving them would
    let junk accumulate forever under my key.
    """
    key = inbox_key(identity.public_key)
    payloads = []
    for raw in dht.get(key, now):
        dht.remove(key, raw)
        try:
            sealed = SealedMessage.from_bytes(raw)
            plaintext = crypto.open_sealed(identity, sealed)
            payloads.append(trust.decode_payload(plaintext, issued_at=now))
        except (ValueError, crypto.NotAddressee, crypto.DecryptionFailure,
                trust.MalformedPayload) as exc:
            log.debug("dropping inbox value: %s", exc)
    return payloads
