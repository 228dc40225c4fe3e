"""Case-insensitive miner-signature scanning over fetched documents."""
from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from typing import Iterable, NamedTuple

from ..errors import InputError, ParameterError

CONTEXT_BYTES = 40
HTML = "html"
SCRIPT = "script"


class Document(NamedTuple):
    url: str
    source: str  # HTML or SCRIPT
    body: bytes
    script_url: str | None = None


@dataclass(frozen=True)
class SignatureHit:
    url: str
    signature: str
    source: str
    offset: int
    context: str
    script_url: str | None = None

    def to_dict(self) -> dict:
        d = {"url": self.url, "signature": self.signature, "source": self.source,
             "offset": self.offset, "context": self.context}
        if self.script_url is not None:
            d["script_url"] = self.script_url
        return d


def parse_signature_list(text: str) -> list[str]:
    sigs = []
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            sigs.append(line)
    return list(dict.fromkeys(sigs))


def bundled_signatures() -> list[str]:
    return parse_signature_list(resources.files("dnsjack.data").joinpath("signatures.txt").read_text("utf-8"))


def load_signatures(path=None) -> list[str]:
    if path is None:
        return bundled_signatures()
    try:
        with open(path, encoding="utf-8") as fh:
            return parse_signature_list(fh.read())
    except OSError as exc:
        raise InputError(f"cannot read signature file {path}: {exc}") from exc


def scan_signatures(documents: Iterable[Document | tuple], signatures: Iterable[str]) -> list[SignatureHit]:
    """Report every (possibly overlapping) occurrence of every signature.

    Matching folds ASCII case on the raw bytes, so ``offset`` is a byte offset into
    the body. The context is the surrounding +-40 bytes decoded with replacement.
    """
    needles = [(s, s.lower().encode("utf-8")) for s in dict.fromkeys(signatures) if s]
    if not needles:
        raise ParameterError("at least one signature is required")
    hits: list[SignatureHit] = []
    for doc in documents:
        doc = Document(*doc)
        body = bytes(doc.body)
        folded = body.lower()
        for sig, needle in needles:
            pos = folded.find(needle)
            while pos >= 0:
                lo, hi = max(0, pos - CONTEXT_BYTES), pos + len(needle) + CONTEXT_BYTES
                context = body[lo:hi].decode("utf-8", errors="replace")
                hits.append(SignatureHit(doc.url, sig, doc.source, pos, context, doc.script_url))
                pos = folded.find(needle, pos + 1)
    return hits


def flagged_urls(hits: Iterable[SignatureHit]) -> list[str]:
    """Pages with at least one hit. Hits are triage leads, not verdicts."""
    return sorted({h.url for h in hits})
