"""Short-token honey links: minting, the redirect-and-log tracker, UA parsing.

Every honey URL is hidden behind a 6-character token served from our own
short-link host, so any click lands on infrastructure we control. The
tracker logs the full request before answering, then either 302-redirects
known tokens to an innocuous page or 404s everything else. Unknown paths
are logged too: a scanner probing the host is itself a signal.
"""

from __future__ import annotations

import json
import re
import string
import threading
from dataclasses import dataclass, field
from datetime import datetime
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from random import Random
from urllib.parse import urlsplit

from ._util import canonical_dumps, compact_dumps, format_ts, parse_ts, utcnow
from .errors import BadDestination, KeyspaceExhausted

TOKEN_ALPHABET = string.ascii_letters + string.digits
TOKEN_LENGTH = 6
TARGET_CLASSES = ("controlled", "decoy_bank")

_TOKEN_PATH = re.compile(r"^/t/([A-Za-z0-9]+)$")

# Browser and OS markers in precedence order; the first substring hit wins.
# SamsungBrowser and Chrome UAs also contain "Safari", and Android UAs
# contain "Linux", which is what the ordering resolves.
_BROWSER_MARKERS = (
    ("SamsungBrowser", "Samsung"),
    ("Chrome", "Chrome"),
    ("Safari", "Safari"),
    ("Firefox", "Firefox"),
)
_OS_MARKERS = (
    ("Android", "Android"),
    ("Windows", "Windows"),
    ("Macintosh", "Macintosh"),
    ("Linux", "Linux"),
)


def parse_user_agent(header_value: str) -> tuple[str, str]:
    """Classify a User-Agent header into (browser, os); unknowns become Other."""
    browser = next((name for marker, name in _BROWSER_MARKERS if marker in header_value), "Other")
    os_name = next((name for marker, name in _OS_MARKERS if marker in header_value), "Other")
    return browser, os_name


@dataclass(frozen=True)
class HoneyLink:
    token: str
    target_class: str
    destination: str
    sheet_id: str
    short_url: str

    def __post_init__(self) -> None:
        if self.target_class not in TARGET_CLASSES:
            raise ValueError(f"unknown target class {self.target_class!r}")

    def to_dict(self) -> dict:
        return {
            "token": self.token,
            "target_class": self.target_class,
            "destination": self.destination,
            "sheet_id": self.sheet_id,
            "short_url": self.short_url,
        }

    @classmethod
    def from_dict(cls, data: dict) -> HoneyLink:
        return cls(
            token=data["token"],
            target_class=data["target_class"],
            destination=data["destination"],
            sheet_id=data["sheet_id"],
            short_url=data["short_url"],
        )


@dataclass
class LinkRegistry:
    """Injective token-to-link mapping plus the tracker's redirect target."""

    redirect_target: str = "https://www.google.com"
    short_base: str = "https://snip.example.net"
    controlled_domain: str | None = None
    token_length: int = TOKEN_LENGTH
    alphabet: str = TOKEN_ALPHABET
    links: dict[str, HoneyLink] = field(default_factory=dict)

    def keyspace(self) -> int:
        return len(self.alphabet) ** self.token_length

    def resolve(self, token: str) -> HoneyLink | None:
        return self.links.get(token)

    def by_class(self, target_class: str) -> list[HoneyLink]:
        return [link for link in self.links.values() if link.target_class == target_class]

    def for_sheet(self, sheet_id: str) -> list[HoneyLink]:
        return [link for link in self.links.values() if link.sheet_id == sheet_id]

    def to_dict(self) -> dict:
        return {
            "redirect_target": self.redirect_target,
            "short_base": self.short_base,
            "controlled_domain": self.controlled_domain,
            "token_length": self.token_length,
            "alphabet": self.alphabet,
            "links": {token: link.to_dict() for token, link in self.links.items()},
        }

    @classmethod
    def from_dict(cls, data: dict) -> LinkRegistry:
        return cls(
            redirect_target=data["redirect_target"],
            short_base=data["short_base"],
            controlled_domain=data.get("controlled_domain"),
            token_length=data["token_length"],
            alphabet=data["alphabet"],
            links={t: HoneyLink.from_dict(l) for t, l in data["links"].items()},
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(canonical_dumps(self.to_dict()), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> LinkRegistry:
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def mint_token(
    registry: LinkRegistry,
    target_class: str,
    destination: str,
    sheet_id: str,
    rng: Random,
) -> HoneyLink:
    """Mint a fresh obfuscated token for a destination and store it."""
    parts = urlsplit(destination)
    if parts.scheme not in ("http", "https") or not parts.netloc:
        raise BadDestination(f"not an absolute http(s) URL: {destination!r}")
    if (
        target_class == "controlled"
        and registry.controlled_domain is not None
        and parts.hostname != registry.controlled_domain
    ):
        raise BadDestination(
            f"controlled link host {parts.hostname!r} is not the configured "
            f"controlled domain {registry.controlled_domain!r}"
        )
    if len(registry.links) >= registry.keyspace():
        raise KeyspaceExhausted(
            f"all {registry.keyspace()} tokens of length {registry.token_length} assigned"
        )
    while True:
        token = "".join(rng.choice(registry.alphabet) for _ in range(registry.token_length))
        if token not in registry.links:
            break
    link = HoneyLink(
        token=token,
        target_class=target_class,
        destination=destination,
        sheet_id=sheet_id,
        short_url=f"{registry.short_base}/t/{token}",
    )
    registry.links[token] = link
    return link


@dataclass(frozen=True)
class AccessLogEntry:
    """One logged HTTP hit on the tracker."""

    ip: str
    port: int
    method: str
    path: str
    headers: tuple[tuple[str, str], ...]
    received_at: datetime
    token: str | None = None

    def header(self, name: str) -> str | None:
        lowered = name.lower()
        for key, value in self.headers:
            if key.lower() == lowered:
                return value
        return None

    def to_json_line(self) -> str:
        return compact_dumps(
            {
                "ip": self.ip,
                "port": self.port,
                "method": self.method,
                "path": self.path,
                "headers": [[k, v] for k, v in self.headers],
                "ts": format_ts(self.received_at),
                "token": self.token,
            }
        )

    @classmethod
    def from_json_line(cls, line: str) -> AccessLogEntry:
        data = json.loads(line)
        return cls(
            ip=data["ip"],
            port=data["port"],
            method=data["method"],
            path=data["path"],
            headers=tuple((k, v) for k, v in data["headers"]),
            received_at=parse_ts(data["ts"]),
            token=data["token"],
        )


class AccessLogWriter:
    """Append-only JSONL sink; writes are serialized so lines stay atomic."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._handle = open(self.path, "a", encoding="utf-8")

    def append(self, entry: AccessLogEntry) -> None:
        with self._lock:
            self._handle.write(entry.to_json_line() + "\n")
            self._handle.flush()

    def close(self) -> None:
        with self._lock:
            self._handle.close()

    def __enter__(self) -> AccessLogWriter:
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def load_access_log(path: str | Path) -> list[AccessLogEntry]:
    text = Path(path).read_text(encoding="utf-8")
    return [AccessLogEntry.from_json_line(line) for line in text.splitlines() if line]


class LinkServerCore:
    """Request handling shared by the HTTP front end and in-process replay.

    The log entry is appended before the response is computed, under one
    lock, so timestamps are non-decreasing within the file and a crash
    after logging never loses a hit. Sink failures are counted and
    surfaced at shutdown instead of breaking the response.
    """

    def __init__(self, registry: LinkRegistry, sink: AccessLogWriter, clock=utcnow):
        self.registry = registry
        self.sink = sink
        self.clock = clock
        self.sink_failures = 0
        self._lock = threading.Lock()

    def handle(
        self,
        method: str,
        path: str,
        headers: list[tuple[str, str]],
        ip: str,
        port: int,
        at: datetime | None = None,
    ) -> tuple[int, str | None]:
        match = _TOKEN_PATH.match(path)
        link = self.registry.resolve(match.group(1)) if match else None
        entry = AccessLogEntry(
            ip=ip,
            port=port,
            method=method,
            path=path,
            headers=tuple(headers),
            received_at=at if at is not None else self.clock(),
            token=link.token if link else None,
        )
        with self._lock:
            try:
                self.sink.append(entry)
            except Exception:
                self.sink_failures += 1
        if link is not None:
            return 302, self.registry.redirect_target
        return 404, None


class _TrackerHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "hlserve"

    def _serve(self, send_body: bool) -> None:
        core: LinkServerCore = self.server.core  # type: ignore[attr-defined]
        ip, port = self.client_address[0], self.client_address[1]
        headers = [(k, v) for k, v in self.headers.items()]
        pending = int(self.headers.get("Content-Length") or 0)
        if pending:  # drain the body so keep-alive framing stays intact
            self.rfile.read(pending)
        status, location = core.handle(self.command, self.path, headers, ip, port)
        if status == 302:
            self.send_response(302)
            self.send_header("Location", location)
            self.send_header("Content-Length", "0")
            self.end_headers()
        else:
            body = b"not found\n"
            self.send_response(404)
            self.send_header("Content-Type", "text/plain")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            if send_body:
                self.wfile.write(body)

    def do_GET(self) -> None:
        self._serve(send_body=True)

    def do_POST(self) -> None:
        self._serve(send_body=True)

    def do_HEAD(self) -> None:
        self._serve(send_body=False)

    def log_message(self, fmt, *args) -> None:  # requests are logged by the core
        pass


class HoneyLinkServer:
    """Threaded HTTP tracker; each request runs in its own handler thread."""

    def __init__(self, core: LinkServerCore, bind: tuple[str, int] = ("127.0.0.1", 0)):
        self.core = core
        self._httpd = ThreadingHTTPServer(bind, _TrackerHandler)
        self._httpd.core = core  # type: ignore[attr-defined]
        self._thread: threading.Thread | None = None

    @property
    def address(self) -> tuple[str, int]:
        host, port = self._httpd.server_address[:2]
        return str(host), port

    def start(self) -> None:
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()

    def wait(self, timeout: float | None = None) -> None:
        if self._thread is not None:
            self._thread.join(timeout)

    def stop(self) -> int:
        """Shut the server down; returns the count of failed log writes."""
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread is not None:
            self._thread.join()
        return self.core.sink_failures

    def __enter__(self) -> HoneyLinkServer:
        self.start()
        return self

    def __exit__(self, *exc) -> None:
        self.stop()
