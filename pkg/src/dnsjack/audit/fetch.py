"""Document fetchers: plain HTTP, in-memory mappings, and on-disk fixture corpora."""
from __future__ import annotations

import json
import logging
import os
import urllib.request
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from html.parser import HTMLParser
from typing import Iterable, Mapping, Protocol
from urllib.parse import urljoin, urlsplit

from ..errors import InputError
from .signatures import HTML, SCRIPT, Document

log = logging.getLogger(__name__)

FETCH_TIMEOUT = 90.0
DEFAULT_CONCURRENCY = 8


class Fetcher(Protocol):
    def fetch(self, url: str) -> bytes: ...


class HttpFetcher:
    """urllib client; redirects are followed by the default opener."""

    def __init__(self, timeout: float = FETCH_TIMEOUT, user_agent: str = "dnsjack-audit/0.1"):
        self.timeout = timeout
        self.user_agent = user_agent

    def fetch(self, url: str) -> bytes:
        req = urllib.request.Request(url, headers={"User-Agent": self.user_agent})
        with urllib.request.urlopen(req, timeout=self.timeout) as resp:
            return resp.read()


class MappingFetcher:
    def __init__(self, pages: Mapping[str, bytes]):
        self.pages = dict(pages)

    def fetch(self, url: str) -> bytes:
        try:
            return self.pages[url]
        except KeyError:
            raise OSError(f"no document for {url}") from None


def load_corpus(directory) -> MappingFetcher:
    """Read ``index.jsonl`` lines of ``{"url": ..., "path": ...}`` relative to ``directory``."""
    index = os.path.join(directory, "index.jsonl")
    pages = {}
    try:
        with open(index, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                entry = json.loads(line)
                with open(os.path.join(directory, entry["path"]), "rb") as body:
                    pages[entry["url"]] = body.read()
    except (OSError, ValueError, KeyError) as exc:
        raise InputError(f"bad corpus {directory}: {exc}") from exc
    return MappingFetcher(pages)


class _ScriptSrc(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.sources: list[str] = []

    def handle_starttag(self, tag, attrs):
        if tag == "script":
            for name, value in attrs:
                if name == "src" and value:
                    self.sources.append(value.strip())


def script_sources(html: bytes, base_url: str) -> list[str]:
    """Absolute http(s) URLs of ``<script src>`` tags; inline, data: and javascript: sources are skipped."""
    parser = _ScriptSrc()
    parser.feed(html.decode("utf-8", errors="replace"))
    out = []
    for src in parser.sources:
        url = urljoin(base_url, src)
        if urlsplit(url).scheme in ("http", "https") and url not in out:
            out.append(url)
    return out


def _fetch_site(fetcher: Fetcher, url: str) -> tuple[list[Document], list[tuple[str, str]]]:
    docs, failures = [], []
    try:
        html = fetcher.fetch(url)
    except Exception as exc:  # network failures are logged, not fatal
        log.warning("fetch failed for %s: %s", url, exc)
        return docs, [(url, str(exc))]
    docs.append(Document(url, HTML, html))
    for src in script_sources(html, url):
        try:
            docs.append(Document(url, SCRIPT, fetcher.fetch(src), src))
        except Exception as exc:
            log.warning("script fetch failed for %s: %s", src, exc)
            failures.append((src, str(exc)))
    return docs, failures


def collect_documents(urls: Iterable[str], fetcher: Fetcher, concurrency: int = DEFAULT_CONCURRENCY):
    """Fetch pages and their scripts; pages on one host are fetched one after another.

    Returns (documents in input URL order, [(url, error)]).
    """
    urls = list(dict.fromkeys(urls))
    by_host: dict[str, list[str]] = defaultdict(list)
    for url in urls:
        by_host[urlsplit(url).netloc].append(url)

    def run_host(host_urls):
        return {u: _fetch_site(fetcher, u) for u in host_urls}

    results: dict[str, tuple] = {}
    with ThreadPoolExecutor(max_workers=max(1, concurrency)) as pool:
        for part in pool.map(run_host, by_host.values()):
            results.update(part)
    docs, failures = [], []
    for url in urls:
        d, f = results[url]
        docs.extend(d)
        failures.extend(f)
    return docs, failures
