"""The advertised website under opt-out load: congestion, traffic, money.

The response-time model is a quadratic congestion curve capped at a hard
timeout: min(timeout, base_latency * (1 + (load/capacity)^2)). It is
monotone in load and easy to invert, which keeps campaign-success
thresholds analytically checkable. Visitors are deterministic: visitor_rate
of them arrive each minute, and the whole minute's cohort is lost when the
response time exceeds their patience.

Every request that reaches the site (opt-out, probe, or visitor) moves
request_bytes of traffic and counts toward that minute's load.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from optoutswarm.evaluator import CanonicalUrl


@dataclass(frozen=True)
class TargetSite:
    url: CanonicalUrl
    base_latency: float  # ms at zero load
    capacity: float  # requests/minute where latency doubles
    timeout: float  # ms, hard cap
    request_bytes: int
    cost_per_gib: float
    visitor_rate: float  # legitimate visitors/minute
    revenue_per_visit: float
    patience: float  # ms a visitor tolerates before giving up

    def __post_init__(self) -> None:
        if self.base_latency <= 0:
            raise ValueError("base_latency must be positive")
        if self.capacity < 1:
            raise ValueError("capacity must be at least 1")
        if self.timeout <= self.base_latency:
            raise ValueError("timeout must exceed base_latency")


@dataclass
class MinuteTraffic:
    opt_out_requests: int = 0
    probe_requests: int = 0
    visitors_served: float = 0.0
    visitors_lost: float = 0.0
    response_ms: float = 0.0  # filled at settlement
    settled: bool = False


@dataclass
class TrafficLedger:
    minutes: dict[int, MinuteTraffic] = field(default_factory=dict)
    total_opt_out_requests: int = 0
    total_probe_requests: int = 0
    total_visitors_served: float = 0.0
    total_visitors_lost: float = 0.0
    traffic_bytes: float = 0.0
    traffic_cost: float = 0.0
    lost_revenue: float = 0.0

    def minute(self, minute: int) -> MinuteTraffic:
        return self.minutes.setdefault(minute, MinuteTraffic())


def response_time(site: TargetSite, load: float) -> float:
    """Milliseconds to answer one request at the given requests/minute."""
    if load < 0:
        raise ValueError("load must be non-negative")
    return min(site.timeout, site.base_latency * (1.0 + (load / site.capacity) ** 2))


def _minute_load(site: TargetSite, record: MinuteTraffic) -> float:
    return record.opt_out_requests + record.probe_requests + site.visitor_rate


def send_opt_out_burst(
    site: TargetSite,
    comrade_count: int,
    rate: int,
    minute: int,
    ledger: TrafficLedger,
) -> TrafficLedger:
    """Register comrade_count * rate opt-out requests for this minute."""
    if comrade_count < 0 or rate < 0:
        raise ValueError("comrade_count and rate must be non-negative")
    ledger.minute(minute).opt_out_requests += comrade_count * rate
    return ledger


def probe(site: TargetSite, minute: int, ledger: TrafficLedger) -> float:
    """Measure responsiveness; the probe itself adds one request of load."""
    record = ledger.minute(minute)
    record.probe_requests += 1
    return response_time(site, _minute_load(site, record))


def settle_minute(
    site: TargetSite,
    minute: int,
    ledger: TrafficLedger,
) -> tuple[float, float, float]:
    """Close out a minute: serve or lose its visitors, meter its traffic.

    Returns (traffic_bytes, traffic_cost, lost_revenue) for the minute.
    Settling the same minute twice is a no-op returning zeros.
    """
    record = ledger.minute(minute)
    if record.settled:
        return (0.0, 0.0, 0.0)
    record.settled = True
    record.response_ms = response_time(site, _minute_load(site, record))
    if record.response_ms > site.patience:
        record.visitors_lost = site.visitor_rate
    else:
        record.visitors_served = site.visitor_rate
    total_requests = record.opt_out_requests + record.probe_requests + site.visitor_rate
    traffic_bytes = total_requests * site.request_bytes
    traffic_cost = traffic_bytes * site.cost_per_gib / 2**30
    lost_revenue = record.visitors_lost * site.revenue_per_visit

    ledger.total_opt_out_requests += record.opt_out_requests
    ledger.total_probe_requests += record.probe_requests
    ledger.total_visitors_served += record.visitors_served
    ledger.total_visitors_lost += record.visitors_lost
    ledger.traffic_bytes += traffic_bytes
    ledger.traffic_cost += traffic_cost
    ledger.lost_revenue += lost_revenue
    return (traffic_bytes, traffic_cost, lost_revenue)
