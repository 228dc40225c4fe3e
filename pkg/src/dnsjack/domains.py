"""Domain-name normalization and public-suffix splitting."""
from functools import lru_cache

from publicsuffixlist import PublicSuffixList

_PSL = PublicSuffixList()


def normalize_domain(name: str) -> str:
    """Lowercase, strip whitespace and a single trailing dot."""
    name = name.strip().lower()
    if name.endswith("."):
        name = name[:-1]
    return name


@lru_cache(maxsize=1 << 16)
def public_suffix(dn: str) -> str:
    """Effective TLD of ``dn`` (``co.uk`` for ``x.co.uk``)."""
    suffix = _PSL.publicsuffix(dn)
    return suffix if suffix is not None else dn.rsplit(".", 1)[-1]


@lru_cache(maxsize=1 << 16)
def registered_domain(dn: str) -> str:
    """eTLD+1 of ``dn``; a name that is itself a public suffix maps to itself."""
    reg = _PSL.privatesuffix(dn)
    return reg if reg is not None else dn


def subdomain_depth(dn: str) -> int:
    """Number of labels to the left of the registered domain."""
    reg = registered_domain(dn)
    if reg == dn:
        return 0
    return dn[: -len(reg) - 1].count(".") + 1
