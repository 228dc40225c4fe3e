"""Website audit: signature scanning, resource captures, and whois graphs."""
from .fetch import HttpFetcher, MappingFetcher, collect_documents, load_corpus, script_sources
from .resources import (KINDS, MEASURES, ResourceClustering, ResourceProfile, build_resource_profile,
                        cluster_resource_profiles, parse_resource_capture)
from .signatures import (Document, SignatureHit, bundled_signatures, flagged_urls, load_signatures,
                         scan_signatures)
from .whois import WhoisGraph, WhoisRecord, build_whois_graph, read_whois_jsonl

__all__ = [
    "HttpFetcher", "MappingFetcher", "collect_documents", "load_corpus", "script_sources",
    "KINDS", "MEASURES", "ResourceClustering", "ResourceProfile", "build_resource_profile",
    "cluster_resource_profiles", "parse_resource_capture",
    "Document", "SignatureHit", "bundled_signatures", "flagged_urls", "load_signatures", "scan_signatures",
    "WhoisGraph", "WhoisRecord", "build_whois_graph", "read_whois_jsonl",
]
