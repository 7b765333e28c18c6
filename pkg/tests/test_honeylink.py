from __future__ import annotations

import http.client
from concurrent.futures import ThreadPoolExecutor
from random import Random

import pytest

from honeysheets.errors import BadDestination, KeyspaceExhausted
from honeysheets.honeylink import (
    AccessLogEntry,
    AccessLogWriter,
    HoneyLinkServer,
    LinkRegistry,
    LinkServerCore,
    load_access_log,
    mint_token,
    parse_user_agent,
)

from conftest import utc

# Labelled corpus used to pin down the substring precedence rules.
UA_CORPUS = [
    ("Mozilla/5.0 (Windows NT 10.0; Win64; x64) AppleWebKit/537.36 (KHTML, like Gecko) Chrome/70.0.3538.77 Safari/537.36", "Chrome", "Windows"),
    ("Mozilla/5.0 (Windows NT 6.1; Win64; x64) AppleWebKit/537.36 (KHTML, like Gecko) Chrome/63.0.3239.132 Safari/537.36", "Chrome", "Windows"),
    ("Mozilla/5.0 (Windows NT 6.3; WOW64) AppleWebKit/537.36 (KHTML, like Gecko) Chrome/55.0.2883.87 Safari/537.36", "Chrome", "Windows"),
    ("Mozilla/5.0 (Windows NT 10.0; Win64; x64) AppleWebKit/537.36 (KHTML, like Gecko) Chrome/91.0.4472.124 Safari/537.36 Edg/91.0.864.67", "Chrome", "Windows"),
    ("Mozilla/5.0 (Windows NT 10.0; Win64; x64) AppleWebKit/537.36 (KHTML, like Gecko) Chrome/62.0.3202.94 Safari/537.36 OPR/49.0.2725.47", "Chrome", "Windows"),
    ("Mozilla/5.0 (X11; Linux x86_64) AppleWebKit/537.36 (KHTML, like Gecko) Chrome/70.0.3538.77 Safari/537.36", "Chrome", "Linux"),
    ("Mozilla/5.0 (X11; Ubuntu; Linux x86_64) AppleWebKit/537.36 (KHTML, like Gecko) Chromium/65.0.3325.181 Chrome/65.0.3325.181 Safari/537.36", "Chrome", "Linux"),
    ("Mozilla/5.0 (Macintosh; Intel Mac OS X 10_13_6) AppleWebKit/537.36 (KHTML, like Gecko) Chrome/68.0.3440.106 Safari/537.36", "Chrome", "Macintosh"),
    ("Mozilla/5.0 (Macintosh; Intel Mac OS X 10_15_7) AppleWebKit/537.36 (KHTML, like Gecko) Chrome/90.0.4430.85 Safari/537.36", "Chrome", "Macintosh"),
    ("Mozilla/5.0 (Linux; Android 10; Pixel 3) AppleWebKit/537.36 (KHTML, like Gecko) Chrome/78.0.3904.108 Mobile Safari/537.36", "Chrome", "Android"),
    ("Mozilla/5.0 (Linux; Android 8.0.0; SM-G950F) AppleWebKit/537.36 (KHTML, like Gecko) Chrome/65.0.3325.109 Mobile Safari/537.36", "Chrome", "Android"),
    ("Mozilla/5.0 (Linux; Android 7.0; Nexus 9) AppleWebKit/537.36 (KHTML, like Gecko) Chrome/59.0.3071.92 Safari/537.36", "Chrome", "Android"),
    ("Mozilla/5.0 (Linux; Android 5.1; HTC One) AppleWebKit/537.36 (KHTML, like Gecko) Version/4.0 Chrome/43.0.2357.93 Mobile Safari/537.36", "Chrome", "Android"),
    ("Mozilla/5.0 (Windows NT 10.0; Win64; x64; rv:84.0) Gecko/20100101 Firefox/84.0", "Firefox", "Windows"),
    ("Mozilla/5.0 (Windows NT 6.1; WOW64; rv:54.0) Gecko/20100101 Firefox/54.0", "Firefox", "Windows"),
    ("Mozilla/5.0 (X11; Linux x86_64; rv:84.0) Gecko/20100101 Firefox/84.0", "Firefox", "Linux"),
    ("Mozilla/5.0 (X11; Fedora; Linux x86_64; rv:60.0) Gecko/20100101 Firefox/60.0", "Firefox", "Linux"),
    ("Mozilla/5.0 (Macintosh; Intel Mac OS X 10.13; rv:62.0) Gecko/20100101 Firefox/62.0", "Firefox", "Macintosh"),
    ("Mozilla/5.0 (Android 9; Mobile; rv:68.0) Gecko/68.0 Firefox/68.0", "Firefox", "Android"),
    ("Mozilla/5.0 (Android 7.1.2; Tablet; rv:57.0) Gecko/57.0 Firefox/57.0", "Firefox", "Android"),
    ("Mozilla/5.0 (Macintosh; Intel Mac OS X 10_15_7) AppleWebKit/605.1.15 (KHTML, like Gecko) Version/14.0 Safari/605.1.15", "Safari", "Macintosh"),
    ("Mozilla/5.0 (Macintosh; Intel Mac OS X 10_11_6) AppleWebKit/601.7.7 (KHTML, like Gecko) Version/9.1.2 Safari/601.7.7", "Safari", "Macintosh"),
    ("Mozilla/5.0 (iPhone; CPU iPhone OS 12_2 like Mac OS X) AppleWebKit/605.1.15 (KHTML, like Gecko) Version/12.1 Mobile/15E148 Safari/604.1", "Safari", "Other"),
    ("Mozilla/5.0 (iPad; CPU OS 11_0 like Mac OS X) AppleWebKit/604.1.34 (KHTML, like Gecko) Version/11.0 Mobile/15A5341f Safari/604.1", "Safari", "Other"),
    ("Mozilla/5.0 (Linux; Android 9; SM-G960F) AppleWebKit/537.36 (KHTML, like Gecko) SamsungBrowser/9.2 Chrome/67.0.3396.87 Mobile Safari/537.36", "Samsung", "Android"),
    ("Mozilla/5.0 (Linux; Android 7.0; SM-T810) AppleWebKit/537.36 (KHTML, like Gecko) SamsungBrowser/5.4 Chrome/51.0.2704.106 Safari/537.36", "Samsung", "Android"),
    ("Mozilla/5.0 (Linux; Android 6.0.1; SM-J700M) AppleWebKit/537.36 (KHTML, like Gecko) SamsungBrowser/4.0 Chrome/44.0.2403.133 Mobile Safari/537.36", "Samsung", "Android"),
    ("Mozilla/5.0 (Linux; Android 11; SM-A515F) AppleWebKit/537.36 (KHTML, like Gecko) SamsungBrowser/14.0 Chrome/87.0.4280.141 Mobile Safari/537.36", "Samsung", "Android"),
    ("curl/7.64.1", "Other", "Other"),
    ("curl/7.29.0", "Other", "Other"),
    ("Wget/1.19.4 (linux-gnu)", "Other", "Other"),
    ("python-requests/2.25.1", "Other", "Other"),
    ("Python-urllib/3.8", "Other", "Other"),
    ("Go-http-client/1.1", "Other", "Other"),
    ("Mozilla/5.0 (compatible; Googlebot/2.1; +http://www.google.com/bot.html)", "Other", "Other"),
    ("Mozilla/5.0 (compatible; bingbot/2.0; +http://www.bing.com/bingbot.htm)", "Other", "Other"),
    ("Mozilla/5.0 (compatible; YandexBot/3.0; +http://yandex.com/bots)", "Other", "Other"),
    ("", "Other", "Other"),
    ("Mozilla/4.0 (compatible; MSIE 6.0; Windows NT 5.1; SV1)", "Other", "Windows"),
    ("Mozilla/5.0 (Windows NT 6.3; Trident/7.0; rv:11.0) like Gecko", "Other", "Windows"),
    ("Mozilla/5.0 (compatible; MSIE 9.0; Windows NT 6.1; WOW64; Trident/5.0)", "Other", "Windows"),
    ("Dalvik/2.1.0 (Linux; U; Android 9; SM-G960F Build/PPR1.180610.011)", "Other", "Android"),
    ("Mozilla/5.0 (Linux; U; Android 4.4.2; en-us; GT-I9505 Build/KOT49H)", "Other", "Android"),
    ("Mozilla/5.0 (X11; Linux i686; rv:45.0) Gecko/20100101 konqueror/5.0", "Other", "Linux"),
    ("Mozilla/5.0 (X11; CrOS x86_64 13505.73.0) AppleWebKit/537.36 (KHTML, like Gecko) Chrome/87.0.4280.109 Safari/537.36", "Chrome", "Other"),
    ("Mozilla/5.0 (PlayStation 4 3.11) AppleWebKit/537.73 (KHTML, like Gecko)", "Other", "Other"),
    ("Mozilla/5.0 (SMART-TV; Linux; Tizen 2.4.0) AppleWebKit/538.1 (KHTML, like Gecko) Version/2.4.0 TV Safari/538.1", "Safari", "Linux"),
    ("Opera/9.80 (Windows NT 6.0) Presto/2.12.388 Version/12.14", "Other", "Windows"),
    ("Mozilla/5.0 (Macintosh; PPC Mac OS X 10_5_8) AppleWebKit/534.50.2 (KHTML, like Gecko) Version/5.0.6 Safari/533.22.3", "Safari", "Macintosh"),
    ("okhttp/3.12.1", "Other", "Other"),
]


def test_ua_corpus_is_fifty_strings() -> None:
    assert len(UA_CORPUS) == 50


@pytest.mark.parametrize("header,browser,os_name", UA_CORPUS)
def test_parse_user_agent_against_corpus(header: str, browser: str, os_name: str) -> None:
    assert parse_user_agent(header) == (browser, os_name)


def test_samsung_takes_precedence_over_chrome_and_safari() -> None:
    ua = "SamsungBrowser/9.2 Chrome/67 Safari/537"
    assert parse_user_agent(ua)[0] == "Samsung"


def test_mint_stores_and_resolves() -> None:
    registry = LinkRegistry()
    rng = Random(1)
    minted = [
        mint_token(registry, "controlled" if i < 3 else "decoy_bank",
                   f"https://trap.example.net/{i}" if i < 3 else f"https://bank.example/{i}",
                   "sheet-1", rng)
        for i in range(9)
    ]
    assert len(registry.links) == 9
    for link in minted:
        assert registry.resolve(link.token) is link
        assert link.short_url == f"{registry.short_base}/t/{link.token}"
        assert len(link.token) == 6
        assert all(ch.isalnum() for ch in link.token)


def test_minted_tokens_are_distinct_across_rng_states() -> None:
    registry = LinkRegistry()
    a = mint_token(registry, "controlled", "https://t.example/1", "s", Random(11))
    b = mint_token(registry, "controlled", "https://t.example/2", "s", Random(12))
    assert a.token != b.token


def test_collision_redraw_with_tiny_keyspace() -> None:
    registry = LinkRegistry(token_length=1, alphabet="ab")
    rng = Random(0)
    first = mint_token(registry, "controlled", "https://t.example/1", "s", rng)
    second = mint_token(registry, "controlled", "https://t.example/2", "s", rng)
    assert {first.token, second.token} == {"a", "b"}


def test_keyspace_exhaustion_raises() -> None:
    registry = LinkRegistry(token_length=1, alphabet="ab")
    rng = Random(0)
    mint_token(registry, "controlled", "https://t.example/1", "s", rng)
    mint_token(registry, "controlled", "https://t.example/2", "s", rng)
    with pytest.raises(KeyspaceExhausted):
        mint_token(registry, "controlled", "https://t.example/3", "s", rng)


def test_bad_destination_rejected() -> None:
    registry = LinkRegistry()
    with pytest.raises(BadDestination):
        mint_token(registry, "controlled", "not a url", "s", Random(1))
    with pytest.raises(BadDestination):
        mint_token(registry, "controlled", "ftp://host/file", "s", Random(1))


def test_controlled_domain_invariant_enforced() -> None:
    registry = LinkRegistry(controlled_domain="trap.example.net")
    with pytest.raises(BadDestination):
        mint_token(registry, "controlled", "https://elsewhere.example/x", "s", Random(1))
    link = mint_token(registry, "controlled", "https://trap.example.net/x", "s", Random(1))
    assert link.target_class == "controlled"
    # decoys may point anywhere
    mint_token(registry, "decoy_bank", "https://elsewhere.example/x", "s", Random(2))


def test_registry_save_load_roundtrip(tmp_path) -> None:
    registry = LinkRegistry(controlled_domain="trap.example.net")
    mint_token(registry, "controlled", "https://trap.example.net/x", "s", Random(5))
    registry.save(tmp_path / "reg.json")
    loaded = LinkRegistry.load(tmp_path / "reg.json")
    assert loaded.to_dict() == registry.to_dict()


def test_log_entry_line_roundtrip_is_byte_identical() -> None:
    entry = AccessLogEntry(
        ip="203.0.113.5",
        port=51000,
        method="GET",
        path="/t/abc123",
        headers=(("Host", "snip.example.net"), ("User-Agent", "curl/7.64.1")),
        received_at=utc(2016, 2, 1, 12, 30, 15, 123456),
        token="abc123",
    )
    line = entry.to_json_line()
    assert AccessLogEntry.from_json_line(line).to_json_line() == line


def _make_core(tmp_path):
    registry = LinkRegistry()
    link = mint_token(registry, "controlled", "https://trap.example.net/a", "s1", Random(3))
    sink = AccessLogWriter(tmp_path / "access.log")
    return registry, link, sink, LinkServerCore(registry, sink)


def test_core_logs_known_token_and_redirects(tmp_path) -> None:
    registry, link, sink, core = _make_core(tmp_path)
    status, location = core.handle(
        "GET", f"/t/{link.token}",
        [("Host", "snip.example.net"), ("User-Agent", "curl/7.64.1")],
        "203.0.113.5", 51000,
    )
    sink.close()
    assert (status, location) == (302, registry.redirect_target)
    entries = load_access_log(tmp_path / "access.log")
    assert len(entries) == 1
    assert entries[0].ip == "203.0.113.5"
    assert entries[0].port == 51000
    assert entries[0].path == f"/t/{link.token}"
    assert entries[0].token == link.token
    assert entries[0].header("User-Agent") == "curl/7.64.1"


def test_core_logs_unknown_token_with_404(tmp_path) -> None:
    registry, link, sink, core = _make_core(tmp_path)
    status, location = core.handle("GET", "/t/zzzzzz", [], "198.51.100.9", 1234)
    other = core.handle("GET", "/robots.txt", [], "198.51.100.9", 1235)
    sink.close()
    assert (status, location) == (404, None)
    assert other == (404, None)
    entries = load_access_log(tmp_path / "access.log")
    assert [e.token for e in entries] == [None, None]
    assert [e.path for e in entries] == ["/t/zzzzzz", "/robots.txt"]


class _BrokenSink:
    def append(self, entry) -> None:
        raise OSError("disk full")


def test_sink_failure_still_answers_and_counts(tmp_path) -> None:
    registry = LinkRegistry()
    link = mint_token(registry, "controlled", "https://trap.example.net/a", "s1", Random(3))
    core = LinkServerCore(registry, _BrokenSink())
    status, location = core.handle("GET", f"/t/{link.token}", [], "203.0.113.5", 51000)
    assert status == 302 and location == registry.redirect_target
    assert core.sink_failures == 1


def test_http_server_serves_and_logs_concurrently(tmp_path) -> None:
    registry = LinkRegistry()
    rng = Random(4)
    tokens = [
        mint_token(registry, "controlled", f"https://trap.example.net/{i}", "s1", rng).token
        for i in range(3)
    ]
    sink = AccessLogWriter(tmp_path / "access.log")
    core = LinkServerCore(registry, sink)
    with HoneyLinkServer(core) as server:
        host, port = server.address

        def hit(i: int) -> tuple[int, str | None]:
            conn = http.client.HTTPConnection(host, port, timeout=10)
            token = tokens[i % 3] if i % 2 == 0 else "nosuch"
            conn.request("GET", f"/t/{token}", headers={"User-Agent": f"probe/{i}"})
            response = conn.getresponse()
            response.read()
            location = response.getheader("Location")
            conn.close()
            return response.status, location

        with ThreadPoolExecutor(16) as pool:
            results = list(pool.map(hit, range(200)))
    sink.close()
    assert sum(1 for status, loc in results if status == 302 and loc == registry.redirect_target) == 100
    assert sum(1 for status, _ in results if status == 404) == 100
    entries = load_access_log(tmp_path / "access.log")
    assert len(entries) == 200
    assert all(a.received_at <= b.received_at for a, b in zip(entries, entries[1:]))


def test_every_minted_link_resolves_back() -> None:
    registry = LinkRegistry()
    rng = Random(8)
    for i in range(300):
        link = mint_token(registry, "decoy_bank", f"https://bank.example/{i}", f"s{i % 5}", rng)
        assert registry.resolve(link.token) == link
