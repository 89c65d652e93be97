"""Turns spam email text into campaign target URLs.

Pipeline: pull http(s) URLs out of the message, follow known redirector
mappings (short-link services hide the real target), canonicalize so every
client derives byte-identical URLs from personalized spam, drop whitelisted
hosts (mail providers whose footers appear in every message), then let a
confirmation policy make the final call.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from typing import Callable, Iterable

from urllib.parse import urlsplit

log = logging.getLogger(__name__)

DEFAULT_MAX_REDIRECT_DEPTH = 5

# Sentence punctuation that email prose glues onto URLs.
_TRAILING_PUNCTUATION = ".,!;"

_URL_RE = re.compile(r"https?://[^\s<>\"']+", re.IGNORECASE)

_DEFAULT_PORTS = {"http": 80, "https": 443}


class InvalidUrl(Exception):
    """Not a syntactically valid http(s) URL."""


class RedirectLoop(Exception):
    """Redirector mapping cycles back on itself."""


@dataclass(frozen=True)
class EmailDocument:
    """Plain-text spam message, already classified as spam upstream."""

    body: str
    footer_hint: str | None = None


@dataclass(frozen=True)
class CanonicalUrl:
    """Parameter-free URL identity shared by all clients.

    host keeps an explicit ":port" suffix only for non-default ports, so
    distinct origins stay distinct without a separate field.
    """

    scheme: str
    host: str
    path: str

    def render(self) -> str:
        return f"{self.scheme}://{self.host}{self.path}"

    def __str__(self) -> str:
        return self.render()

    @property
    def hostname(self) -> str:
        return self.host.rsplit(":", 1)[0] if ":" in self.host else self.host


@dataclass(frozen=True)
class RedirectMap:
    """Short-URL to destination mapping; stands in for live redirector lookups."""

    mapping: dict[str, str] = field(default_factory=dict)


def extract_urls(mail: EmailDocument) -> list[str]:
    """All http(s) URLs in the message, in order, deduplicated."""
    text = mail.body if mail.footer_hint is None else f"{mail.body}\n{mail.footer_hint}"
    found = []
    for match in _URL_RE.finditer(text):
        url = match.group(0).rstrip(_TRAILING_PUNCTUATION)
        if url:
            found.append(url)
    return list(dict.fromkeys(found))


def unwrap_redirects(
    url: str,
    redirects: RedirectMap,
    max_depth: int = DEFAULT_MAX_REDIRECT_DEPTH,
) -> str:
    """Follow the mapping until an unmapped URL or max_depth hops."""
    if max_depth < 1:
        raise ValueError("max_depth must be at least 1")
    seen = {url}
    current = url
    for _ in range(max_depth):
        nxt = redirects.mapping.get(current)
        if nxt is None:
            return current
        if nxt in seen:
            raise RedirectLoop(f"redirect cycle at {nxt!r}")
        seen.add(nxt)
        current = nxt
    return current


def canonicalize(url: str) -> CanonicalUrl:
    """Strip everything that varies per recipient: query, fragment, userinfo,
    default port, trailing slash, and letter case in scheme/host."""
    parts = urlsplit(url)
    scheme = parts.scheme.lower()
    if scheme not in ("http", "https"):
        raise InvalidUrl(f"unsupported scheme in {url!r}")
    host = parts.hostname  # urlsplit lowercases and drops userinfo
    if not host:
        raise InvalidUrl(f"missing host in {url!r}")
    if not host.isascii():
        raise InvalidUrl(f"non-ASCII host in {url!r}")
    try:
        port = parts.port
    except ValueError as exc:
        raise InvalidUrl(f"bad port in {url!r}") from exc
    if port is not None and port != _DEFAULT_PORTS[scheme]:
        host = f"{host}:{port}"
    path = parts.path.rstrip("/") or "/"
    return CanonicalUrl(scheme=scheme, host=host, path=path)


def load_whitelist(lines: Iterable[str]) -> set[str]:
    """Parse a whitelist: one host suffix per line, '#' starts a comment."""
    hosts = set()
    for line in lines:
        entry = line.split("#", 1)[0].strip().lower()
        if entry:
            hosts.add(entry)
    return hosts


def is_whitelisted(url: CanonicalUrl, whitelist: set[str]) -> bool:
    """Exact host match or subdomain of any whitelisted suffix."""
    host = url.hostname
    return any(host == entry or host.endswith("." + entry) for entry in whitelist)


def evaluate(
    mail: EmailDocument,
    redirects: RedirectMap,
    whitelist: set[str],
    confirm: Callable[[CanonicalUrl], bool],
    max_depth: int = DEFAULT_MAX_REDIRECT_DEPTH,
) -> list[CanonicalUrl]:
    """Extract, unwrap, canonicalize, filter. Per-URL failures are dropped.

    Each returned URL is meant to trigger exactly one campaign-coordination
    pass, so duplicates collapsing under canonicalization appear once.
    """
    results: list[CanonicalUrl] = []
    seen: set[CanonicalUrl] = set()
    for raw in extract_urls(mail):
        try:
            unwrapped = unwrap_redirects(raw, redirects, max_depth)
            canonical = canonicalize(unwrapped)
        except (RedirectLoop, InvalidUrl) as exc:
            log.debug("dropping %r: %s", raw, exc)
            continue
        if canonical in seen:
            continue
        seen.add(canonical)
        if is_whitelisted(canonical, whitelist):
            log.debug("dropping %s: whitelisted", canonical)
            continue
        if not confirm(canonical):
            log.debug("dropping %s: not confirmed", canonical)
            continue
        results.append(canonical)
    return results
