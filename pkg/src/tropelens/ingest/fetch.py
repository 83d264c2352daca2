"""Polite HTTP fetching of trope pages.

Requests to one host are serialized and spaced at least ``min_delay_ms``
apart; different hosts may be fetched concurrently. 5xx responses and
connection failures are retried with exponential backoff.
"""

from __future__ import annotations

import logging
import threading
import time
import urllib.error
import urllib.request
import urllib.robotparser
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from urllib.parse import urlsplit

from ..errors import HttpError, NetworkError, RobotsDisallowed

log = logging.getLogger(__name__)

DEFAULT_USER_AGENT = "tropelens/0.1 (corpus research; polite crawler)"


@dataclass(frozen=True)
class RawPage:
    url: str
    body: str
    fetched_at: datetime

    def __post_init__(self):
        parts = urlsplit(self.url)
        if not parts.scheme or not (parts.netloc or parts.scheme == "file"):
            raise ValueError(f"RawPage url must be absolute: {self.url!r}")
        if not self.body:
            raise ValueError(f"RawPage body is empty for {self.url}")


@dataclass(frozen=True)
class Politeness:
    min_delay_ms: int = 1000
    max_retries: int = 3
    user_agent: str = DEFAULT_USER_AGENT
    backoff_ms: int = 500
    timeout_s: float = 30.0


class _HostState:
    def __init__(self):
        self.lock = threading.Lock()
        self.last_request: float | None = None
        self.robots: urllib.robotparser.RobotFileParser | None = None


class Fetcher:
    """Fetch pages while honouring per-host delay and a robots policy.

    ``robots_path`` points to a local robots.txt that applies to every host;
    without it the host's own ``/robots.txt`` is consulted once per host
    (a missing file allows everything).
    """

    def __init__(self, politeness: Politeness | None = None, robots_path: str | Path | None = None,
                 sleep=time.sleep, clock=time.monotonic):
        self.politeness = politeness or Politeness()
        self._sleep = sleep
        self._clock = clock
        self._hosts: dict[str, _HostState] = {}
        self._hosts_lock = threading.Lock()
        self._robots_override = None
        if robots_path is not None:
            rp = urllib.robotparser.RobotFileParser()
            rp.parse(Path(robots_path).read_text(encoding="utf-8").splitlines())
            self._robots_override = rp
        self.request_log: list[tuple[str, float]] = []

    def _host(self, netloc: str) -> _HostState:
        with self._hosts_lock:
            return self._hosts.setdefault(netloc, _HostState())

    def _wait_turn(self, state: _HostState) -> None:
        if state.last_request is not None:
            gap = self.politeness.min_delay_ms / 1000.0
            remaining = state.last_request + gap - self._clock()
            while remaining > 0:
                self._sleep(remaining)
                remaining = state.last_request + gap - self._clock()

    def _open(self, url: str, state: _HostState):
        self._wait_turn(state)
        state.last_request = self._clock()
        self.request_log.append((urlsplit(url).netloc, state.last_request))
        req = urllib.request.Request(url, headers={"User-Agent": self.politeness.user_agent})
        return urllib.request.urlopen(req, timeout=self.politeness.timeout_s)

    def _robots_for(self, parts, state: _HostState) -> urllib.robotparser.RobotFileParser:
        if self._robots_override is not None:
            return self._robots_override
        if state.robots is None:
            rp = urllib.robotparser.RobotFileParser()
            robots_url = f"{parts.scheme}://{parts.netloc}/robots.txt"
            try:
                with self._open(robots_url, state) as resp:
                    rp.parse(resp.read().decode("utf-8", errors="replace").splitlines())
            except urllib.error.HTTPError as exc:
                if exc.code >= 500:
                    rp.disallow_all = True
                else:
                    rp.allow_all = True
            except (urllib.error.URLError, OSError):
                rp.allow_all = True
            state.robots = rp
        return state.robots

    def fetch(self, url: str) -> RawPage:
        parts = urlsplit(url)
        if parts.scheme not in ("http", "https") or not parts.netloc:
            raise ValueError(f"not an absolute http(s) URL: {url!r}")
        state = self._host(parts.netloc)
        with state.lock:
            robots = self._robots_for(parts, state)
            if not robots.can_fetch(self.politeness.user_agent, url):
                raise RobotsDisallowed(f"robots policy disallows {url}")
            attempt = 0
            while True:
                try:
                    with self._open(url, state) as resp:
                        status = resp.status
                        raw = resp.read()
                        charset = resp.headers.get_content_charset() or "utf-8"
                    if status != 200:
                        raise HttpError(status, url)
                    body = raw.decode(charset, errors="replace")
                    if not body:
                        raise NetworkError(f"empty body from {url}")
                    return RawPage(url, body, datetime.now(timezone.utc))
                except urllib.error.HTTPError as exc:
                    if exc.code < 500:
                        raise HttpError(exc.code, url) from None
                    failure = f"HTTP {exc.code}"
                except (urllib.error.URLError, OSError) as exc:
                    failure = str(getattr(exc, "reason", exc))
                if attempt >= self.politeness.max_retries:
                    raise NetworkError(f"{url}: giving up after {attempt} retries ({failure})")
                delay = self.politeness.backoff_ms / 1000.0 * (2 ** attempt)
                attempt += 1
                log.warning("fetch %s failed (%s); retry %d in %.2fs", url, failure, attempt, delay)
                self._sleep(delay)


def fetch_page(url: str, politeness: Politeness | None = None, robots_path: str | Path | None = None) -> RawPage:
    return Fetcher(politeness, robots_path).fetch(url)


def page_from_file(path: str | Path, url: str | None = None) -> RawPage:
    from .parse import page_canonical_url

    path = Path(path)
    body = path.read_text(encoding="utf-8", errors="replace")
    url = url or page_canonical_url(body) or path.resolve().as_uri()
    mtime = datetime.fromtimestamp(path.stat().st_mtime, timezone.utc)
    return RawPage(url, body, mtime)
