"""Map classes to SBOM components and derive missing Type-1 edges."""

from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

from ..sbom import Component, DependencyEdge, EdgeKind, Provenance, SbomDocument
from .classfile import MalformedClassFile, scan_class
from .jar import JarIndex, MavenCoords

__all__ = [
    "DEFAULT_EXCLUDE_PREFIXES",
    "TECHNIQUE",
    "EnrichmentEdge",
    "build_class_map",
    "compute_enrichment",
    "enrich_sbom",
]

log = logging.getLogger(__name__)

TECHNIQUE = "constant-pool-scan"

# Platform packages are never SBOM components.
DEFAULT_EXCLUDE_PREFIXES: tuple[str, ...] = ("java/", "javax/")


@dataclass(frozen=True)
class EnrichmentEdge:
    from_ref: str
    to_ref: str
    sites: tuple[tuple[str, str], ...]
    kind: EdgeKind = EdgeKind.STATIC_EXPLICIT

    def __post_init__(self) -> None:
        if self.from_ref == self.to_ref:
            raise ValueError("enrichment edge must connect two components")

    def to_dependency_edge(self) -> DependencyEdge:
        site = "; ".join(f"{src} -> {dst}" for src, dst in self.sites)
        return DependencyEdge(self.from_ref, self.to_ref, self.kind, Provenance(site, TECHNIQUE))


def _component_for(coords: MavenCoords, components: Sequence[Component]) -> list[Component]:
    hits = []
    for c in components:
        p = c.purl
        if p is None or p.ptype != "maven":
            continue
        if p.name.lower() != coords.artifact.lower() or p.version != coords.version:
            continue
        if coords.group is not None and (p.namespace or "").lower() != coords.group.lower():
            continue
        hits.append(c)
    return hits


def _owners(
    indices: Sequence[JarIndex], doc: SbomDocument, diagnostics: list[str]
) -> dict[str, tuple[str, JarIndex]]:
    owners: dict[str, tuple[str, JarIndex]] = {}
    seen_in: dict[str, list[str]] = {}
    for idx in indices:
        if idx.coords is None:
            diagnostics.append(f"{idx.jar_path}: no Maven coordinates, classes unmapped")
            continue
        hits = _component_for(idx.coords, doc.components)
        if len(hits) != 1:
            what = "no SBOM component" if not hits else f"ambiguous components {[c.ref for c in hits]}"
            diagnostics.append(f"{idx.jar_path}: {idx.coords} matches {what}, classes unmapped")
            continue
        ref = hits[0].ref
        for cls in sorted(idx.classes):
            seen_in.setdefault(cls, []).append(idx.jar_path)
            owners.setdefault(cls, (ref, idx))
    for cls, jars in sorted(seen_in.items()):
        if len(jars) > 1:
            msg = f"shading suspect: {cls} found in {jars}; mapped to {jars[0]}"
            log.warning(msg)
            diagnostics.append(msg)
    return owners


def build_class_map(
    indices: Sequence[JarIndex], doc: SbomDocument, diagnostics: list[str] | None = None
) -> dict[str, str]:
    """Internal class name -> component ref. Duplicate classes go to the first jar."""
    diags = diagnostics if diagnostics is not None else []
    return {cls: ref for cls, (ref, _) in _owners(indices, doc, diags).items()}


def compute_enrichment(
    doc: SbomDocument,
    indices: Sequence[JarIndex],
    *,
    exclude_prefixes: Iterable[str] = DEFAULT_EXCLUDE_PREFIXES,
    diagnostics: list[str] | None = None,
) -> list[EnrichmentEdge]:
    diags = diagnostics if diagnostics is not None else []
    excluded = tuple(exclude_prefixes)
    owners = _owners(indices, doc, diags)
    sites: dict[tuple[str, str], set[tuple[str, str]]] = {}
    unmapped: Counter[str] = Counter()
    declared = {c.ref: doc.declared_targets(c.ref) for c in doc.components}

    for cls in sorted(owners):
        owner, idx = owners[cls]
        try:
            refs = scan_class(idx.read_class(cls))
        except MalformedClassFile as exc:
            diags.append(f"{idx.jar_path}!{cls}: skipped ({exc})")
            continue
        for target_cls in refs.referenced:
            if target_cls.startswith(excluded):
                continue
            hit = owners.get(target_cls)
            if hit is None:
                unmapped[target_cls] += 1
                continue
            target = hit[0]
            if target == owner or target in declared.get(owner, ()):
                continue
            sites.setdefault((owner, target), set()).add((cls, target_cls))

    if unmapped:
        msg = f"{len(unmapped)} referenced classes belong to no known component"
        log.info(msg)
        diags.append(msg)
    return [EnrichmentEdge(a, b, tuple(sorted(s))) for (a, b), s in sorted(sites.items())]


def enrich_sbom(doc: SbomDocument, edges: Iterable[EnrichmentEdge]) -> SbomDocument:
    """Merge edges as StaticExplicit code-level edges; re-applying is a no-op."""
    present = {(e.source, e.target, e.kind) for e in doc.edges}
    declared = {(e.source, e.target) for e in doc.edges if e.kind is EdgeKind.DECLARED}
    added = []
    for edge in edges:
        key = (edge.from_ref, edge.to_ref, edge.kind)
        if key in present or (edge.from_ref, edge.to_ref) in declared:
            continue
        present.add(key)
        added.append(edge.to_dependency_edge())
    if not added:
        return doc
    return replace(doc, edges=doc.edges + tuple(added))
