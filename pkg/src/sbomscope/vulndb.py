"""Offline OSV-style vulnerability database and identity-based matching."""

from __future__ import annotations

import json
import logging
import os
from collections import defaultdict
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Iterable, Mapping

from .identity import ComponentIdentity, MalformedPurl, Purl, VersionRange, parse_purl, range_contains
from .sbom import SbomDocument

if TYPE_CHECKING:
    from .vex import SuppressionVerdict

__all__ = [
    "AffectedPackage",
    "Finding",
    "MalformedRecord",
    "Match",
    "VulnDatabase",
    "VulnRecord",
    "load_db",
    "match_component",
    "parse_record",
    "scan_sbom",
]

log = logging.getLogger(__name__)


class MalformedRecord(ValueError):
    pass


@dataclass(frozen=True)
class AffectedPackage:
    package: Purl
    ranges: tuple[VersionRange, ...]

    def __post_init__(self) -> None:
        if self.package.version is not None:
            raise MalformedRecord(f"affected package {self.package} must not carry a version")

    def affects(self, version: str | None) -> bool:
        if version is None:
            return False
        return any(range_contains(r, version) for r in self.ranges)


@dataclass(frozen=True)
class VulnRecord:
    id: str
    affected: tuple[AffectedPackage, ...]
    aliases: frozenset[str] = frozenset()
    summary: str = ""
    severity: str | None = None

    @property
    def names(self) -> frozenset[str]:
        return self.aliases | {self.id}


def _ecosystem_purl(pkg: Mapping[str, Any]) -> Purl:
    ecosystem, name = pkg.get("ecosystem"), pkg.get("name")
    if ecosystem != "Maven" or not name or ":" not in name:
        raise MalformedRecord(f"package needs a purl or a Maven group:artifact name, got {dict(pkg)}")
    group, artifact = name.split(":", 1)
    return Purl("maven", artifact, group)


def parse_record(data: Mapping[str, Any]) -> VulnRecord:
    """Build a record from the OSV subset ``{id, aliases, summary, affected[...]}``."""
    if not isinstance(data, Mapping) or not data.get("id"):
        raise MalformedRecord("record has no id")
    affected = []
    for i, entry in enumerate(data.get("affected") or []):
        pkg = entry.get("package") or {}
        try:
            purl = parse_purl(pkg["purl"]) if pkg.get("purl") else _ecosystem_purl(pkg)
        except MalformedPurl as exc:
            raise MalformedRecord(f"affected[{i}].package: {exc}") from exc
        if purl.version is not None:
            raise MalformedRecord(f"affected[{i}].package.purl must not carry a version")
        ranges = []
        for r in entry.get("ranges") or []:
            events = []
            for ev in r.get("events") or []:
                if len(ev) != 1:
                    raise MalformedRecord(f"affected[{i}]: bad range event {ev}")
                ((kind, version),) = ev.items()
                events.append((kind, str(version)))
            try:
                ranges.append(VersionRange.from_events(events))
            except ValueError as exc:
                raise MalformedRecord(f"affected[{i}]: {exc}") from exc
        if entry.get("versions"):
            ranges.append(VersionRange.from_events(exact=[str(v) for v in entry["versions"]]))
        affected.append(AffectedPackage(purl.without_version(), tuple(ranges)))
    severity = data.get("severity")
    if isinstance(severity, list):
        severity = severity[0].get("score") if severity else None
    return VulnRecord(
        id=data["id"],
        affected=tuple(affected),
        aliases=frozenset(data.get("aliases") or ()),
        summary=data.get("summary", ""),
        severity=severity,
    )


@dataclass(frozen=True)
class Match:
    record: VulnRecord
    identity: Purl
    via_lineage: bool


class VulnDatabase:
    """Records indexed by the (type, namespace, name) of every affected package."""

    def __init__(self, records: Iterable[VulnRecord] = (), diagnostics: Iterable[str] = ()):
        self.records: dict[str, VulnRecord] = {}
        self._index: dict[tuple, list[VulnRecord]] = defaultdict(list)
        self.diagnostics = list(diagnostics)
        for rec in records:
            self.add(rec)

    def add(self, record: VulnRecord) -> None:
        if record.id in self.records:
            raise MalformedRecord(f"duplicate record id {record.id}")
        self.records[record.id] = record
        for key in dict.fromkeys(a.package.package_key for a in record.affected):
            self._index[key].append(record)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records.values())

    def candidates(self, purl: Purl) -> list[VulnRecord]:
        return list(self._index.get(purl.package_key, ()))


def load_db(path: str | os.PathLike[str]) -> VulnDatabase:
    """Load one JSON record per ``*.json`` file; bad files are skipped with a diagnostic."""
    if not os.path.isdir(path):
        raise FileNotFoundError(f"vulnerability database directory not found: {path}")
    db = VulnDatabase()
    for name in sorted(os.listdir(path)):
        if not name.endswith(".json"):
            continue
        full = os.path.join(path, name)
        try:
            with open(full, encoding="utf-8") as fh:
                record = parse_record(json.load(fh))
            db.add(record)
        except (OSError, ValueError) as exc:
            msg = f"{full}: skipped ({exc})"
            log.warning(msg)
            db.diagnostics.append(msg)
    return db


def match_component(db: VulnDatabase, identity: ComponentIdentity | None) -> list[Match]:
    if identity is None:
        return []
    out: list[Match] = []
    seen: set[str] = set()
    for purl, via_lineage in identity.all_identities():
        for record in db.candidates(purl):
            if record.id in seen:
                continue
            if any(a.package.same_package(purl) and a.affects(purl.version) for a in record.affected):
                seen.add(record.id)
                out.append(Match(record, purl, via_lineage))
    return out


@dataclass(frozen=True)
class Finding:
    vuln_id: str
    component_ref: str
    matched_identity: Purl
    via_lineage: bool
    aliases: frozenset[str] = frozenset()
    paths: tuple[tuple[str, ...], ...] = ()
    verdict: SuppressionVerdict | None = field(default=None, compare=False)

    @property
    def names(self) -> frozenset[str]:
        return self.aliases | {self.vuln_id}


def scan_sbom(db: VulnDatabase, doc: SbomDocument) -> list[Finding]:
    """One finding per (component, advisory), sorted by component ref then advisory id.

    A primary-identity match takes precedence over a lineage match for the same advisory.
    """
    findings = []
    for comp in doc.components:
        for m in match_component(db, comp.identity):
            findings.append(Finding(m.record.id, comp.ref, m.identity, m.via_lineage, m.record.aliases))
    return sorted(findings, key=lambda f: (f.component_ref, f.vuln_id))
