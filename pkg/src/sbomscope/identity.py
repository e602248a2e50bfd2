"""Package identity: PURL parsing/printing, version ordering and range checks.

The version ordering is a deliberately small subset of Maven's
``ComparableVersion``:

* a version string is split on ``.``, ``-``, ``_``, ``+`` and on every
  digit/letter boundary;
* numeric tokens compare numerically;
* known qualifiers rank ``alpha < beta < milestone < rc < snapshot < release``
  (``a``, ``b``, ``m``, ``cr``, ``ga``, ``final`` are accepted as aliases);
* any other qualifier sorts above ``release`` but below every number, and
  unknown qualifiers compare lexically among themselves;
* zeros and ``release`` tokens are dropped at the end and directly before a
  qualifier, so ``1``, ``1.0`` and ``1.0-ga`` are equal, as are ``1.0-alpha``
  and ``1-alpha``; a missing token compares as ``release``.

Maven's nested-list semantics (``1-1`` versus ``1.1``) are not modelled.
"""

from __future__ import annotations

import enum
import functools
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence
from urllib.parse import quote, unquote_to_bytes

__all__ = [
    "ComponentIdentity",
    "LineageSource",
    "MalformedPurl",
    "Ordering",
    "Purl",
    "RangeEvent",
    "RangeEventKind",
    "VersionKey",
    "VersionRange",
    "compare_versions",
    "parse_purl",
    "range_contains",
]


class MalformedPurl(ValueError):
    """Raised when a string cannot be read as a package URL."""


_TYPE_RE = re.compile(r"^[a-z][a-z0-9.+-]*$")
_QUALIFIER_KEY_RE = re.compile(r"^[a-z][a-z0-9._-]*$")
_BAD_ESCAPE_RE = re.compile(r"%(?![0-9A-Fa-f]{2})")

# Types whose namespace/name are compared case-insensitively.
_CASE_INSENSITIVE_TYPES = frozenset({"maven"})


def _decode(token: str, what: str) -> str:
    if _BAD_ESCAPE_RE.search(token):
        raise MalformedPurl(f"invalid percent-encoding in {what}: {token!r}")
    try:
        return unquote_to_bytes(token).decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MalformedPurl(f"{what} is not valid UTF-8 after decoding: {token!r}") from exc


def _encode(token: str) -> str:
    return quote(token, safe=":")


@dataclass(frozen=True)
class Purl:
    """A parsed package URL. All tokens are held percent-decoded."""

    ptype: str
    name: str
    namespace: str | None = None
    version: str | None = None
    qualifiers: tuple[tuple[str, str], ...] = ()
    subpath: str | None = None

    def __post_init__(self) -> None:
        if not self.ptype or not _TYPE_RE.match(self.ptype):
            raise MalformedPurl(f"invalid purl type {self.ptype!r}")
        if not self.name:
            raise MalformedPurl("purl name is empty")
        if self.namespace == "":
            object.__setattr__(self, "namespace", None)
        if self.version == "":
            object.__setattr__(self, "version", None)
        object.__setattr__(self, "qualifiers", tuple(sorted(self.qualifiers)))

    def __str__(self) -> str:
        parts = ["pkg:", self.ptype, "/"]
        if self.namespace:
            parts.append("/".join(_encode(seg) for seg in self.namespace.split("/")))
            parts.append("/")
        parts.append(_encode(self.name))
        if self.version is not None:
            parts.append("@" + _encode(self.version))
        if self.qualifiers:
            parts.append("?" + "&".join(f"{k}={_encode(v)}" for k, v in self.qualifiers))
        if self.subpath:
            parts.append("#" + "/".join(_encode(seg) for seg in self.subpath.split("/")))
        return "".join(parts)

    @property
    def package_key(self) -> tuple[str, str | None, str]:
        """(type, namespace, name), case-folded where the type is case-insensitive."""
        if self.ptype in _CASE_INSENSITIVE_TYPES:
            ns = self.namespace.lower() if self.namespace else None
            return (self.ptype, ns, self.name.lower())
        return (self.ptype, self.namespace, self.name)

    def without_version(self) -> Purl:
        return Purl(self.ptype, self.name, self.namespace, None, self.qualifiers, self.subpath)

    def same_package(self, other: Purl) -> bool:
        return self.package_key == other.package_key

    def matches(self, other: Purl) -> bool:
        """Identity match ignoring qualifiers and subpath.

        A versionless ``self`` acts as a wildcard over versions of the package.
        """
        if not self.same_package(other):
            return False
        return self.version is None or self.version == other.version


def parse_purl(text: str) -> Purl:
    """Parse ``pkg:type/namespace/name@version?qualifiers#subpath``."""
    if not isinstance(text, str):
        raise MalformedPurl(f"purl must be a string, got {type(text).__name__}")
    remainder = text.strip()
    scheme, sep, remainder = remainder.partition(":")
    if not sep or scheme.lower() != "pkg":
        raise MalformedPurl(f"missing 'pkg:' scheme: {text!r}")

    subpath = None
    if "#" in remainder:
        remainder, raw_subpath = remainder.rsplit("#", 1)
        segs = [_decode(s, "subpath") for s in raw_subpath.split("/")]
        segs = [s for s in segs if s not in ("", ".", "..")]
        subpath = "/".join(segs) or None

    qualifiers: dict[str, str] = {}
    if "?" in remainder:
        remainder, raw_qualifiers = remainder.rsplit("?", 1)
        for pair in filter(None, raw_qualifiers.split("&")):
            key, eq, value = pair.partition("=")
            key = key.lower()
            if not eq or not _QUALIFIER_KEY_RE.match(key):
                raise MalformedPurl(f"invalid qualifier {pair!r}")
            value = _decode(value, "qualifier value")
            if value:
                qualifiers[key] = value

    remainder = remainder.strip("/")
    ptype, sep, remainder = remainder.partition("/")
    if not sep:
        raise MalformedPurl(f"purl has no name: {text!r}")
    ptype = ptype.lower()

    version = None
    if "@" in remainder:
        remainder, raw_version = remainder.rsplit("@", 1)
        version = _decode(raw_version, "version")

    remainder = remainder.strip("/")
    namespace_raw, _, name_raw = remainder.rpartition("/")
    name = _decode(name_raw, "name")
    ns_segments = [_decode(s, "namespace") for s in namespace_raw.split("/") if s]
    if any("/" in s for s in ns_segments):
        raise MalformedPurl(f"namespace segment contains '/': {text!r}")
    namespace = "/".join(ns_segments) or None

    return Purl(ptype, name, namespace, version, tuple(qualifiers.items()), subpath)


class Ordering(enum.IntEnum):
    LESS = -1
    EQUAL = 0
    GREATER = 1


_QUALIFIER_RANK = {"alpha": 1, "beta": 2, "milestone": 3, "rc": 4, "snapshot": 5}
_QUALIFIER_ALIASES = {
    "a": "alpha",
    "b": "beta",
    "m": "milestone",
    "cr": "rc",
    "ga": "",
    "final": "",
    "release": "",
}
_TOKEN_RE = re.compile(r"[0-9]+|[^\W\d_]+|[^\w.\-+]+")

# A token is a triple compared lexicographically:
#   known pre-release qualifier -> (0, rank, "")
#   release / missing token     -> (1, 0, "")
#   unknown qualifier q         -> (2, 0, q)
#   number n                    -> (3, n, "")
_Token = tuple[int, int, str]
_NULL: _Token = (1, 0, "")
_ZERO: _Token = (3, 0, "")


def _token(raw: str) -> _Token:
    if raw.isascii() and raw.isdigit():
        return (3, int(raw), "")
    q = raw.lower()
    q = _QUALIFIER_ALIASES.get(q, q)
    if q == "":
        return _NULL
    if q in _QUALIFIER_RANK:
        return (0, _QUALIFIER_RANK[q], "")
    return (2, 0, q)


def _normalize(tokens: list[_Token]) -> tuple[_Token, ...]:
    out: list[_Token] = []
    for tok in tokens + [_NULL]:
        if tok[0] != 3:  # a qualifier (or the end) absorbs preceding zeros and releases
            while out and out[-1] in (_NULL, _ZERO):
                out.pop()
        out.append(tok)
    return tuple(out[:-1])


@functools.total_ordering
@dataclass(frozen=True, eq=False)
class VersionKey:
    """Comparable form of a version string; trailing release/zero tokens are dropped."""

    text: str
    tokens: tuple[_Token, ...] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        tokens = _normalize([_token(t) for t in _TOKEN_RE.findall(self.text)])
        object.__setattr__(self, "tokens", tokens)

    def compare(self, other: VersionKey) -> Ordering:
        a, b = self.tokens, other.tokens
        for i in range(max(len(a), len(b))):
            x = a[i] if i < len(a) else _NULL
            y = b[i] if i < len(b) else _NULL
            if x != y:
                return Ordering.LESS if x < y else Ordering.GREATER
        return Ordering.EQUAL

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, VersionKey):
            return NotImplemented
        return self.tokens == other.tokens

    def __lt__(self, other: VersionKey) -> bool:
        return self.compare(other) is Ordering.LESS

    def __hash__(self) -> int:
        return hash(self.tokens)


def compare_versions(a: str, b: str) -> Ordering:
    return VersionKey(a).compare(VersionKey(b))


class RangeEventKind(enum.Enum):
    INTRODUCED = "introduced"
    FIXED = "fixed"
    LAST_AFFECTED = "last_affected"


@dataclass(frozen=True)
class RangeEvent:
    kind: RangeEventKind
    version: VersionKey

    @classmethod
    def of(cls, kind: RangeEventKind | str, version: str) -> RangeEvent:
        return cls(RangeEventKind(kind), VersionKey(version))


@dataclass(frozen=True)
class VersionRange:
    """OSV-style affected range: ordered events plus an optional exact version set.

    An introduced version of ``"0"`` means "from the beginning".
    """

    events: tuple[RangeEvent, ...] = ()
    exact: frozenset[VersionKey] = frozenset()

    @classmethod
    def from_events(
        cls, events: Iterable[tuple[str, str]] = (), exact: Iterable[str] = ()
    ) -> VersionRange:
        return cls(
            tuple(RangeEvent.of(k, v) for k, v in events),
            frozenset(VersionKey(v) for v in exact),
        )


_EVENT_ORDER = {
    RangeEventKind.INTRODUCED: 0,
    RangeEventKind.LAST_AFFECTED: 1,
    RangeEventKind.FIXED: 2,
}


def range_contains(vrange: VersionRange, v: str | VersionKey) -> bool:
    key = v if isinstance(v, VersionKey) else VersionKey(v)
    if key in vrange.exact:
        return True
    affected = False
    for event in sorted(vrange.events, key=lambda e: (e.version, _EVENT_ORDER[e.kind])):
        if event.kind is RangeEventKind.INTRODUCED:
            if key >= event.version:
                affected = True
        elif event.kind is RangeEventKind.FIXED:
            if key >= event.version:
                affected = False
        elif key > event.version:
            affected = False
    return affected


class LineageSource(enum.Enum):
    CYCLONEDX_PEDIGREE = "CycloneDxPedigree"
    SPDX_HAS_VARIANT = "SpdxHasVariant"


@dataclass(frozen=True)
class ComponentIdentity:
    """Primary PURL plus upstream identities recorded as variant lineage."""

    primary: Purl
    lineage: tuple[tuple[Purl, LineageSource], ...] = ()

    def __post_init__(self) -> None:
        seen: dict[Purl, LineageSource] = {}
        for purl, source in self.lineage:
            if purl == self.primary:
                continue
            seen.setdefault(purl, source)
        object.__setattr__(self, "lineage", tuple(seen.items()))

    @property
    def lineage_purls(self) -> frozenset[Purl]:
        return frozenset(p for p, _ in self.lineage)

    def with_lineage(self, extra: Sequence[tuple[Purl, LineageSource]]) -> ComponentIdentity:
        return ComponentIdentity(self.primary, self.lineage + tuple(extra))

    def all_identities(self) -> list[tuple[Purl, bool]]:
        """Primary first, then lineage entries flagged ``True``."""
        return [(self.primary, False)] + [(p, True) for p, _ in self.lineage]
