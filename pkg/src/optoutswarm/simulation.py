"""Minute-stepped deterministic simulation of a client fleet plus adversaries.

Within each simulated minute, phases run in a fixed order:

  1. adversary actions
  2. spam delivery (evaluation and campaign handling)
  3. inbox polls (challenge/response traffic, new verifications)
  4. coordinator ticks (launch decisions)
  5. opt-out bursts from launched campaigns
  6. latency probes and campaign judgments
  7. per-site settlement

Every stochastic choice comes from an entity-private stream seeded as
"{seed}:{kind}:{index}", so adding an adversary never perturbs honest
clients' draws and a scenario replays byte-identically: run() twice with
the same scenario and the metrics serialization compares equal.
"""

from __future__ import annotations

import json
import statistics
from dataclasses import dataclass, field
from random import Random
from typing import Any

from optoutswarm import coordinator, crypto, evaluator, trust, website
from optoutswarm.coordinator import (
    CampaignStart,
    CampaignState,
    CoordinatorConfig,
    LocalCampaignDb,
)
from optoutswarm.crypto import ClientIdentity
from optoutswarm.dht import SimulatedDht, campaign_table_key, comrades_table_key, inbox_key
from optoutswarm.evaluator import CanonicalUrl
from optoutswarm.scenario import AdversarySpec, Scenario
from optoutswarm.trust import AnswerBudget, TrustConfig, TrustDb
from optoutswarm.website import TargetSite, TrafficLedger


class NoSuchCampaign(Exception):
    """No client in the run ever reported that URL."""


@dataclass
class ProbeLog:
    baseline: list[float] = field(default_factory=list)
    during: list[float] = field(default_factory=list)
    judged: bool = False


@dataclass
class SimClient:
    index: int
    identity: ClientIdentity
    cfg: CoordinatorConfig
    tcfg: TrustConfig
    rng: Random
    campaign_db: LocalCampaignDb = field(default_factory=LocalCampaignDb)
    trust_db: TrustDb = field(default_factory=TrustDb)
    budget: AnswerBudget = None  # type: ignore[assignment]
    probe_logs: dict[CampaignStart, ProbeLog] = field(default_factory=dict)
    urls_reported: set[str] = field(default_factory=set)
    solve_attempts: int = 0
    challenges_answered: int = 0
    challenges_sent: int = 0
    hash_evaluations: int = 0
    joins_rejected_unsuitable: int = 0

    def __post_init__(self) -> None:
        self.trust_db.current_min_accumulated_trust = self.cfg.min_accumulated_trust
        if self.budget is None:
            self.budget = AnswerBudget(cap=self.cfg.max_challenges_answered)

    def issuer_is_comrade(self, dht: SimulatedDht, issuer_pk: bytes, now: int) -> bool:
        for campaign in self.campaign_db.entries:
            if issuer_pk in coordinator.read_comrades(dht, campaign, now):
                return True
        return False


@dataclass
class MetricsReport:
    events: list[dict[str, Any]]
    summary: dict[str, Any]

    def to_ndjson(self) -> str:
        lines = [
            json.dumps(e, sort_keys=True, separators=(",", ":")) for e in self.events
        ]
        lines.append(
            json.dumps(self.summary, sort_keys=True, separators=(",", ":"))
        )
        return "\n".join(lines) + "\n"


def convergence(report: MetricsReport, url: str) -> float:
    """Share of a URL's reporters registered on its most popular start."""
    ratios = report.summary["convergence"]
    if url not in ratios:
        raise NoSuchCampaign(f"no client reported {url!r}")
    return ratios[url]


class _Adversary:
    """Base: full DHT read/write access, own identity and RNG, no honest keys."""

    strategy = "abstract"

    def __init__(self, spec: AdversarySpec, index: int, sim: "Simulation") -> None:
        self.spec = spec
        self.index = index
        self.rng = Random(f"{sim.scenario.seed}:adversary:{index}")
        self.identity = crypto.generate_identity(self.rng)
        self.counters: dict[str, int] = {}

    def bump(self, counter: str, by: int = 1) -> None:
        self.counters[counter] = self.counters.get(counter, 0) + by

    def step(self, sim: "Simulation", now: int) -> None:
        raise NotImplementedError

    def _announced_campaigns(
        self, sim: "Simulation", now: int
    ) -> list[tuple[CanonicalUrl, int]]:
        found = []
        for url in sim.known_urls():
            for value in sim.dht.get(campaign_table_key(url.render()), now):
                try:
                    found.append((url, int(value.decode("ascii"))))
                except (UnicodeDecodeError, ValueError):
                    continue
        return found

    def _register_everywhere(self, sim: "Simulation", now: int, pk: bytes) -> None:
        for url, start in self._announced_campaigns(sim, now):
            sim.dht.put(comrades_table_key(start, url.render()), pk, now)


class _TimePortalAdversary(_Adversary):
    """Parks campaigns in the far future so they can never fire."""

    strategy = "time_portal"

    def __init__(self, spec: AdversarySpec, index: int, sim: "Simulation") -> None:
        super().__init__(spec, index, sim)
        self.offset = int(spec.params["offset_minutes"])
        self.period = int(spec.params.get("injection_period", 30))

    def step(self, sim: "Simulation", now: int) -> None:
        if now % self.period != 0:
            return
        for url in sim.known_urls():
            start = now + self.offset
            sim.dht.put(
                campaign_table_key(url.render()), str(start).encode("ascii"), now
            )
            sim.adversarial_starts.add((url.render(), start))
            self.bump("injected")


class _SeparationAdversary(_Adversary):
    """Floods near-term starts to splinter the fleet below the threshold."""

    strategy = "separation"

    def __init__(self, spec: AdversarySpec, index: int, sim: "Simulation") -> None:
        super().__init__(spec, index, sim)
        self.period = int(spec.params["injection_period"])
        self.lead = int(spec.params.get("lead_minutes", 60))

    def step(self, sim: "Simulation", now: int) -> None:
        if now % self.period != 0:
            return
        for url in sim.known_urls():
            start = now + self.lead
            sim.dht.put(
                campaign_table_key(url.render()), str(start).encode("ascii"), now
            )
            sim.adversarial_starts.add((url.render(), start))
            self.bump("injected")


class _ChallengeFloodAdversary(_Adversary):
    """Registers as a comrade, then buries one victim in puzzles."""

    strategy = "challenge_flood"

    def __init__(self, spec: AdversarySpec, index: int, sim: "Simulation") -> None:
        super().__init__(spec, index, sim)
        self.victim = int(spec.params["victim"])
        self.count = int(spec.params["count"])
        self.at_minute = int(spec.params.get("at_minute", 30))
        self.max_rand = int(spec.params.get("max_rand", 10_000))

    def step(self, sim: "Simulation", now: int) -> None:
        self._register_everywhere(sim, now, self.identity.public_key)
        if now != self.at_minute:
            return
        victim_pk = sim.clients[self.victim].identity.public_key
        for _ in range(self.count):
            challenge, _expected = crypto.generate_challenge(
                self.identity, self.max_rand, self.rng, issued_at=now
            )
            sealed = crypto.seal(
                victim_pk, trust.encode_challenge_payload(challenge)
            )
            sim.dht.put(inbox_key(victim_pk), sealed.to_bytes(), now)
            self.bump("challenges_sent")


class _MitmForwarderAdversary(_Adversary):
    """Relays challenges it receives, hoping to pocket a verification.

    With rewrite_issuer the relayed copy claims the forwarder as issuer; the
    hash still binds the original key, so victims burn a full scan and find
    nothing. Without rewriting, victims solve fine but their responses route
    to the key inside the challenge, which is never the forwarder's.
    """

    strategy = "mitm_forwarder"

    def __init__(self, spec: AdversarySpec, index: int, sim: "Simulation") -> None:
        super().__init__(spec, index, sim)
        self.rewrite_issuer = bool(spec.params.get("rewrite_issuer", False))

    def step(self, sim: "Simulation", now: int) -> None:
        self._register_everywhere(sim, now, self.identity.public_key)
        my_inbox = inbox_key(self.identity.public_key)
        victims = set()
        for url, start in self._announced_campaigns(sim, now):
            key = comrades_table_key(start, url.render())
            victims.update(sim.dht.get(key, now))
        victims.discard(self.identity.public_key)
        for raw in sim.dht.get(my_inbox, now):
            sim.dht.remove(my_inbox, raw)
            try:
                sealed = crypto.SealedMessage.from_bytes(raw)
                payload = crypto.open_sealed(self.identity, sealed)
                message = trust.decode_payload(payload, issued_at=now)
            except (ValueError, crypto.NotAddressee, crypto.DecryptionFailure,
                    trust.MalformedPayload):
                continue
            if not isinstance(message, crypto.Challenge):
                continue
            forwarded = message
            if self.rewrite_issuer:
                forwarded = crypto.Challenge(
                    issuer_public_key=self.identity.public_key,
                    rand1=message.rand1,
                    target_hash=message.target_hash,
                    issued_at=now,
                )
            for victim_pk in sorted(victims - {message.issuer_public_key}):
                resealed = crypto.seal(
                    victim_pk, trust.encode_challenge_payload(forwarded)
                )
                sim.dht.put(inbox_key(victim_pk), resealed.to_bytes(), now)
                self.bump("forwarded")


class _SybilFloodAdversary(_Adversary):
    """Registers a crowd of fresh, never-verified identities everywhere."""

    strategy = "sybil_flood"

    def __init__(self, spec: AdversarySpec, index: int, sim: "Simulation") -> None:
        super().__init__(spec, index, sim)
        count = int(spec.params["identity_count"])
        self.sybil_keys = [
            crypto.generate_identity(self.rng).public_key for _ in range(count)
        ]

    def step(self, sim: "Simulation", now: int) -> None:
        registered = 0
        for url, start in self._announced_campaigns(sim, now):
            key = comrades_table_key(start, url.render())
            existing = set(sim.dht.get(key, now))
            for pk in self.sybil_keys:
                if pk not in existing:
                    sim.dht.put(key, pk, now)
                    registered += 1
        if registered:
            self.bump("registered", registered)


_ADVERSARY_CLASSES = {
    cls.strategy: cls
    for cls in (
        _TimePortalAdversary,
        _SeparationAdversary,
        _ChallengeFloodAdversary,
        _MitmForwarderAdversary,
        _SybilFloodAdversary,
    )
}


class Simulation:
    def __init__(self, scenario: Scenario) -> None:
        self.scenario = scenario
        self.dht = SimulatedDht()
        self.sites: dict[str, tuple[TargetSite, TrafficLedger]] = {
            site.url.render(): (site, TrafficLedger())
            for site in scenario.target_sites
        }
        self.clients: list[SimClient] = []
        index = 0
        for group in scenario.clients:
            for _ in range(group.count):
                rng = Random(f"{scenario.seed}:client:{index}")
                self.clients.append(
                    SimClient(
                        index=index,
                        identity=crypto.generate_identity(rng),
                        cfg=group.config,
                        tcfg=group.trust,
                        rng=rng,
                    )
                )
                index += 1
        self.honest_keys = {c.identity.public_key for c in self.clients}
        self.adversaries = [
            _ADVERSARY_CLASSES[spec.strategy](spec, i, self)
            for i, spec in enumerate(scenario.adversaries)
        ]
        self.events: list[dict[str, Any]] = []
        self.adversarial_starts: set[tuple[str, int]] = set()
        self.honest_joins_on_adversarial = 0
        self.known_campaigns: set[tuple[str, int]] = set()
        self.launched_by: dict[tuple[str, int], int] = {}
        self._confirm = (lambda _url: True) if (
            scenario.confirm_policy == "accept_all"
        ) else (lambda _url: False)

    def known_urls(self) -> list[CanonicalUrl]:
        """URLs an adversary can see: advertised sites plus announced ones."""
        seen = {site.url.render(): site.url for site, _ in self.sites.values()}
        for client in self.clients:
            for campaign in client.campaign_db.entries:
                seen.setdefault(campaign.url.render(), campaign.url)
        return [seen[key] for key in sorted(seen)]

    def emit(self, event: dict[str, Any]) -> None:
        self.events.append(event)

    # ------------------------------------------------------------------
    # phases

    def _phase_adversaries(self, now: int) -> None:
        for adversary in self.adversaries:
            adversary.step(self, now)

    def _phase_spam(self, now: int) -> None:
        whitelist = set(self.scenario.whitelist)
        for injection in self.scenario.spam_injections:
            if injection.minute != now:
                continue
            for index in sorted(self.scenario.injection_targets(injection)):
                client = self.clients[index]
                urls = evaluator.evaluate(
                    injection.mail,
                    self.scenario.redirect_map,
                    whitelist,
                    self._confirm,
                )
                for url in urls:
                    client.urls_reported.add(url.render())
                    try:
                        result = coordinator.handle_url(
                            url,
                            now,
                            client.cfg,
                            self.dht,
                            client.identity,
                            client.campaign_db,
                            client.trust_db,
                            client.rng,
                        )
                    except coordinator.NoFeasibleStart:
                        self.emit(
                            {
                                "t": now,
                                "type": "no_feasible_start",
                                "client": index,
                                "url": url.render(),
                            }
                        )
                        continue
                    client.joins_rejected_unsuitable += result.rejected_unsuitable
                    if result.proposed is not None:
                        self.known_campaigns.add(
                            (url.render(), result.proposed.start)
                        )
                        self.emit(
                            {
                                "t": now,
                                "type": "campaign_proposed",
                                "client": index,
                                "url": url.render(),
                                "start": result.proposed.start,
                            }
                        )
                    for campaign in result.joined:
                        key = (campaign.url.render(), campaign.start)
                        self.known_campaigns.add(key)
                        if key in self.adversarial_starts:
                            self.honest_joins_on_adversarial += 1
                        self.emit(
                            {
                                "t": now,
                                "type": "campaign_joined",
                                "client": index,
                                "url": campaign.url.render(),
                                "start": campaign.start,
                                "rejected_unsuitable": result.rejected_unsuitable,
                            }
                        )

    def _phase_polls(self, now: int) -> None:
        for client in self.clients:
            if now % client.cfg.poll_interval != 0:
                continue
            payloads = coordinator.poll_inbox(now, self.dht, client.identity)
            for payload in payloads:
                if isinstance(payload, crypto.Challenge):
                    handling = trust.handle_challenge(
                        client.identity,
                        payload,
                        self.dht,
                        client.budget,
                        lambda pk: client.issuer_is_comrade(self.dht, pk, now),
                        client.tcfg.max_rand,
                        now,
                    )
                    if handling.attempted:
                        client.solve_attempts += 1
                        client.hash_evaluations += handling.hash_evaluations
                    if handling.answered:
                        client.challenges_answered += 1
                        self.emit(
                            {
                                "t": now,
                                "type": "challenge_answered",
                                "client": client.index,
                                "issuer": payload.issuer_public_key.hex(),
                                "work": handling.hash_evaluations,
                            }
                        )
                    else:
                        self.emit(
                            {
                                "t": now,
                                "type": "challenge_dropped",
                                "client": client.index,
                                "reason": handling.dropped,
                            }
                        )
                else:
                    ok = trust.handle_response(
                        client.trust_db, payload, client.tcfg
                    )
                    self.emit(
                        {
                            "t": now,
                            "type": "verification",
                            "client": client.index,
                            "peer": payload.solver_public_key.hex(),
                            "ok": ok,
                        }
                    )
            self._initiate_verifications(client, now)

    def _initiate_verifications(self, client: SimClient, now: int) -> None:
        for campaign in sorted(
            client.campaign_db.entries, key=lambda c: (c.start, c.url.render())
        ):
            for peer_pk in coordinator.read_comrades(self.dht, campaign, now):
                if peer_pk == client.identity.public_key:
                    continue
                if peer_pk in client.trust_db.verified:
                    continue
                try:
                    sent = trust.initiate_verification(
                        client.identity,
                        peer_pk,
                        campaign,
                        self.dht,
                        client.trust_db,
                        client.tcfg,
                        client.rng,
                        now,
                    )
                except trust.NotAComrade:
                    continue
                if sent:
                    client.challenges_sent += 1
                    self.emit(
                        {
                            "t": now,
                            "type": "challenge_sent",
                            "client": client.index,
                            "peer": peer_pk.hex(),
                        }
                    )

    def _phase_ticks(self, now: int) -> None:
        for client in self.clients:
            decisions = coordinator.tick(
                now, self.dht, client.trust_db, client.cfg, client.campaign_db
            )
            for decision in decisions:
                key = (decision.campaign.url.render(), decision.campaign.start)
                if decision.launched:
                    self.launched_by[key] = self.launched_by.get(key, 0) + 1
                self.emit(
                    {
                        "t": now,
                        "type": "launch_decision",
                        "client": client.index,
                        "url": decision.campaign.url.render(),
                        "start": decision.campaign.start,
                        "launched": decision.launched,
                        "comrades": decision.comrade_count,
                        "trust_sum": decision.trust_sum,
                        "threshold": decision.trust_threshold,
                    }
                )

    def _phase_bursts(self, now: int) -> None:
        for client in self.clients:
            for campaign, record in client.campaign_db.entries.items():
                if record.state is not CampaignState.LAUNCHED:
                    continue
                if not campaign.start <= now < campaign.start + self.scenario.campaign_duration:
                    continue
                entry = self.sites.get(campaign.url.render())
                if entry is None:
                    continue
                site, ledger = entry
                website.send_opt_out_burst(
                    site, 1, self.scenario.opt_out_rate, now, ledger
                )

    def _probe_minutes(self, client: SimClient, campaign: CampaignStart) -> tuple[set[int], set[int]]:
        spacing = 30 // client.tcfg.probe_count
        baseline = {
            campaign.start - 30 + spacing * k for k in range(client.tcfg.probe_count)
        }
        during = {
            campaign.start + spacing * k for k in range(client.tcfg.probe_count)
        }
        return baseline, during

    def _phase_probes(self, now: int) -> None:
        for client in self.clients:
            for campaign, record in sorted(
                client.campaign_db.entries.items(),
                key=lambda item: (item[0].start, item[0].url.render()),
            ):
                entry = self.sites.get(campaign.url.render())
                if entry is None:
                    continue
                site, ledger = entry
                baseline_minutes, during_minutes = self._probe_minutes(
                    client, campaign
                )
                log = client.probe_logs.setdefault(campaign, ProbeLog())
                if now in baseline_minutes and now >= record.joined_at:
                    log.baseline.append(website.probe(site, now, ledger))
                if now in during_minutes:
                    log.during.append(website.probe(site, now, ledger))
                if now == campaign.start + 30 and not log.judged:
                    self._judge(client, campaign, log, now)

    def _judge(
        self, client: SimClient, campaign: CampaignStart, log: ProbeLog, now: int
    ) -> None:
        log.judged = True
        if (
            len(log.baseline) < client.tcfg.probe_count
            or len(log.during) < client.tcfg.probe_count
        ):
            self.emit(
                {
                    "t": now,
                    "type": "outcome_unjudged",
                    "client": client.index,
                    "url": campaign.url.render(),
                    "start": campaign.start,
                    "reason": "insufficient_probes",
                }
            )
            return
        comrades = tuple(
            pk
            for pk in coordinator.read_comrades(self.dht, campaign, now)
            if pk != client.identity.public_key
        )
        outcome = trust.CampaignOutcome(
            campaign=campaign,
            baseline_latency=statistics.median(log.baseline),
            during_latency=statistics.median(log.during),
            comrades=comrades,
        )
        verdict = trust.judge_outcome(outcome, client.tcfg.alpha)
        resets_before = client.trust_db.reset_count
        trust.apply_outcome(client.trust_db, verdict, outcome, client.tcfg)
        self.emit(
            {
                "t": now,
                "type": "outcome_judged",
                "client": client.index,
                "url": campaign.url.render(),
                "start": campaign.start,
                "verdict": verdict.value,
                "baseline_ms": outcome.baseline_latency,
                "during_ms": outcome.during_latency,
            }
        )
        if client.trust_db.reset_count > resets_before:
            self.emit({"t": now, "type": "trust_reset", "client": client.index})

    def _phase_settle(self, now: int) -> None:
        for url in sorted(self.sites):
            site, ledger = self.sites[url]
            website.settle_minute(site, now, ledger)
            record = ledger.minutes[now]
            if (
                record.opt_out_requests
                or record.probe_requests
                or record.visitors_lost
            ):
                self.emit(
                    {
                        "t": now,
                        "type": "site_minute",
                        "url": url,
                        "opt_out_requests": record.opt_out_requests,
                        "probe_requests": record.probe_requests,
                        "response_ms": record.response_ms,
                        "visitors_lost": record.visitors_lost,
                    }
                )

    # ------------------------------------------------------------------

    def run(self) -> MetricsReport:
        for now in range(self.scenario.duration):
            self._phase_adversaries(now)
            self._phase_spam(now)
            self._phase_polls(now)
            self._phase_ticks(now)
            self._phase_bursts(now)
            self._phase_probes(now)
            self._phase_settle(now)
        return MetricsReport(events=self.events, summary=self._summary())

    def _summary(self) -> dict[str, Any]:
        end = self.scenario.duration
        campaigns = []
        for url, start in sorted(self.known_campaigns | self.adversarial_starts):
            roster = self.dht.get(
                comrades_table_key(start, url), end - 1
            )
            distinct = set(roster)
            campaigns.append(
                {
                    "url": url,
                    "start": start,
                    "comrade_count": len(distinct),
                    "honest_comrades": len(distinct & self.honest_keys),
                    "launched_by": self.launched_by.get((url, start), 0),
                    "adversarial": (url, start) in self.adversarial_starts,
                }
            )
        sites = {}
        for url in sorted(self.sites):
            _site, ledger = self.sites[url]
            sites[url] = {
                "opt_out_requests": ledger.total_opt_out_requests,
                "probe_requests": ledger.total_probe_requests,
                "visitors_served": ledger.total_visitors_served,
                "visitors_lost": ledger.total_visitors_lost,
                "traffic_bytes": ledger.traffic_bytes,
                "traffic_cost": ledger.traffic_cost,
                "lost_revenue": ledger.lost_revenue,
            }
        clients = []
        for client in self.clients:
            clients.append(
                {
                    "index": client.index,
                    "trust_records": {
                        pk.hex(): value
                        for pk, value in sorted(client.trust_db.records.items())
                    },
                    "verified_peers": len(client.trust_db.verified),
                    "challenges_sent": client.challenges_sent,
                    "solve_attempts": client.solve_attempts,
                    "challenges_answered": client.challenges_answered,
                    "hash_evaluations": client.hash_evaluations,
                    "trust_resets": client.trust_db.reset_count,
                    "joins_rejected_unsuitable": client.joins_rejected_unsuitable,
                    "min_accumulated_trust": client.trust_db.current_min_accumulated_trust,
                }
            )
        reported_urls = sorted(
            {url for client in self.clients for url in client.urls_reported}
        )
        ratios = {}
        for url in reported_urls:
            ratios[url] = self._convergence_ratio(url)
        launched_campaigns = sorted(
            key for key, count in self.launched_by.items() if count > 0
        )
        return {
            "type": "summary",
            "campaigns": campaigns,
            "sites": sites,
            "clients": clients,
            "convergence": ratios,
            "adversaries": [
                {
                    "index": adversary.index,
                    "strategy": adversary.strategy,
                    "counters": dict(sorted(adversary.counters.items())),
                }
                for adversary in self.adversaries
            ],
            "totals": {
                "campaigns_launched": len(launched_campaigns),
                "launch_decisions_true": sum(self.launched_by.values()),
                "honest_joins_on_adversarial": self.honest_joins_on_adversarial,
                "hash_evaluations": sum(c.hash_evaluations for c in self.clients),
                "solve_attempts": sum(c.solve_attempts for c in self.clients),
            },
        }

    def _convergence_ratio(self, url: str) -> float:
        reporters = {
            client.identity.public_key
            for client in self.clients
            if url in client.urls_reported
        }
        if not reporters:
            return 0.0
        end = self.scenario.duration
        best = 0
        for known_url, start in self.known_campaigns:
            if known_url != url:
                continue
            roster = set(self.dht.get(comrades_table_key(start, url), end - 1))
            best = max(best, len(roster & reporters))
        return best / len(reporters)


def run(scenario: Scenario) -> MetricsReport:
    """Run one scenario to completion. Deterministic in the scenario alone."""
    return Simulation(scenario).run()
