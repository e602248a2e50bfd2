"""Unified CycloneDX / SPDX JSON ingestion with a typed dependency graph.

Code-level edges survive a CycloneDX round trip as component properties named
``enrichment:edge`` whose value is a small JSON object::

    {"kind": "StaticExplicit", "site": "...", "technique": "...", "to": "<bom-ref>"}

The target is also listed in the source's ``dependsOn`` so identity-only
consumers still see the edge. On parse, a ``dependsOn`` entry backed by an
``enrichment:edge`` property is read as that code-level edge, not as a
declared one.
"""

from __future__ import annotations

import copy
import enum
import json
import logging
import re
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Mapping

from .identity import ComponentIdentity, LineageSource, MalformedPurl, Purl, parse_purl

__all__ = [
    "Component",
    "DependencyEdge",
    "EdgeKind",
    "ENRICHMENT_PROPERTY",
    "LineageLink",
    "MalformedSbom",
    "Provenance",
    "SbomDocument",
    "SbomFormat",
    "load_sbom",
    "parse_cyclonedx",
    "parse_sbom",
    "parse_spdx",
    "serialize_cyclonedx",
]

log = logging.getLogger(__name__)

ENRICHMENT_PROPERTY = "enrichment:edge"


class MalformedSbom(ValueError):
    """The document cannot be used; the message names the offending JSON path."""


class SbomFormat(enum.Enum):
    CYCLONEDX = "CycloneDX"
    SPDX = "Spdx"


class EdgeKind(enum.Enum):
    """Dependency kinds: Declared is Type-0, the other three are code-level Type-1..3."""

    DECLARED = "Declared"
    STATIC_EXPLICIT = "StaticExplicit"
    DYNAMIC_DISPATCH = "DynamicDispatch"
    REFLECTIVE = "Reflective"

    @property
    def type_number(self) -> int:
        return list(EdgeKind).index(self)

    @property
    def is_code_level(self) -> bool:
        return self is not EdgeKind.DECLARED


@dataclass(frozen=True)
class Provenance:
    site: str
    technique: str


@dataclass(frozen=True)
class DependencyEdge:
    source: str
    target: str
    kind: EdgeKind = EdgeKind.DECLARED
    provenance: Provenance | None = None

    def __post_init__(self) -> None:
        if self.kind.is_code_level and self.provenance is None:
            raise ValueError(f"code-level edge {self.source}->{self.target} needs provenance")
        if not self.kind.is_code_level and self.provenance is not None:
            raise ValueError("declared edges carry no provenance")


@dataclass(frozen=True)
class LineageLink:
    subject: str
    upstream: Purl
    source: LineageSource


@dataclass(frozen=True)
class Component:
    ref: str
    name: str
    identity: ComponentIdentity | None
    raw_properties: tuple[tuple[str, str], ...] = ()
    raw: Mapping[str, Any] = field(default_factory=dict, compare=False, repr=False)

    @property
    def purl(self) -> Purl | None:
        return self.identity.primary if self.identity else None

    @property
    def matchable(self) -> bool:
        return self.identity is not None


@dataclass(frozen=True)
class SbomDocument:
    format: SbomFormat
    root_ref: str
    components: tuple[Component, ...]
    edges: tuple[DependencyEdge, ...] = ()
    lineage: tuple[LineageLink, ...] = ()
    diagnostics: tuple[str, ...] = field(default=(), compare=False)
    raw: Mapping[str, Any] = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self) -> None:
        refs = [c.ref for c in self.components]
        if len(set(refs)) != len(refs):
            dupes = sorted({r for r in refs if refs.count(r) > 1})
            raise MalformedSbom(f"duplicate component refs: {dupes}")
        known = set(refs) | {self.root_ref}
        for e in self.edges:
            for end in (e.source, e.target):
                if end not in known:
                    raise MalformedSbom(f"edge {e.source}->{e.target}: unknown ref {end!r}")
        for link in self.lineage:
            if link.subject not in known:
                raise MalformedSbom(f"lineage subject {link.subject!r} not in document")

    def component(self, ref: str) -> Component:
        for c in self.components:
            if c.ref == ref:
                return c
        raise KeyError(ref)

    @property
    def root(self) -> Component:
        return self.component(self.root_ref)

    def successors(self, ref: str) -> list[str]:
        out: list[str] = []
        for e in self.edges:
            if e.source == ref and e.target not in out:
                out.append(e.target)
        return out

    def declared_targets(self, ref: str) -> set[str]:
        return {e.target for e in self.edges if e.source == ref and e.kind is EdgeKind.DECLARED}

    def code_edges(self) -> list[DependencyEdge]:
        return [e for e in self.edges if e.kind.is_code_level]

    def graph_key(self) -> tuple[frozenset, frozenset, frozenset]:
        """Order-insensitive view of (components, edges, lineage) for equality checks."""
        return (frozenset(self.components), frozenset(self.edges), frozenset(self.lineage))

    def without_lineage(self) -> SbomDocument:
        comps = tuple(
            replace(c, identity=ComponentIdentity(c.identity.primary)) if c.identity else c
            for c in self.components
        )
        return replace(self, components=comps, lineage=())


def _load_json(document: str | bytes | Mapping[str, Any]) -> dict[str, Any]:
    if isinstance(document, Mapping):
        return dict(document)
    try:
        data = json.loads(document)
    except json.JSONDecodeError as exc:
        raise MalformedSbom(f"$: not valid JSON ({exc})") from exc
    if not isinstance(data, dict):
        raise MalformedSbom("$: top-level value must be an object")
    return data


def _identity(purl_text: str | None, where: str, diagnostics: list[str]) -> ComponentIdentity | None:
    if not purl_text:
        diagnostics.append(f"{where}: no purl, component is unmatchable")
        return None
    try:
        return ComponentIdentity(parse_purl(purl_text))
    except MalformedPurl as exc:
        diagnostics.append(f"{where}: malformed purl ({exc}), component is unmatchable")
        return None


def _variant_purls(pedigree: Any, where: str, diagnostics: list[str]) -> list[Purl]:
    if not isinstance(pedigree, Mapping):
        return []
    out = []
    for i, entry in enumerate(pedigree.get("variants") or []):
        text = entry if isinstance(entry, str) else (entry or {}).get("purl")
        if not text:
            diagnostics.append(f"{where}.pedigree.variants[{i}]: no purl, ignored")
            continue
        try:
            out.append(parse_purl(text))
        except MalformedPurl as exc:
            diagnostics.append(f"{where}.pedigree.variants[{i}]: {exc}")
    return out


def _decode_enrichment(value: str, where: str) -> tuple[str, EdgeKind, Provenance]:
    try:
        data = json.loads(value)
        kind = EdgeKind(data["kind"])
        if not kind.is_code_level:
            raise ValueError("enrichment edges must be code-level")
        return data["to"], kind, Provenance(data.get("site", ""), data.get("technique", ""))
    except (ValueError, KeyError, TypeError) as exc:
        raise MalformedSbom(f"{where}: bad {ENRICHMENT_PROPERTY} value {value!r} ({exc})") from exc


def _encode_enrichment(edge: DependencyEdge) -> str:
    assert edge.provenance is not None
    return json.dumps(
        {
            "kind": edge.kind.value,
            "site": edge.provenance.site,
            "technique": edge.provenance.technique,
            "to": edge.target,
        },
        sort_keys=True,
        separators=(",", ":"),
    )


def _walk_cdx_components(items: Any, path: str) -> Iterable[tuple[str, Mapping[str, Any]]]:
    if items is None:
        return
    if not isinstance(items, list):
        raise MalformedSbom(f"{path}: expected an array")
    for i, item in enumerate(items):
        where = f"{path}[{i}]"
        if not isinstance(item, Mapping):
            raise MalformedSbom(f"{where}: expected an object")
        yield where, item
        yield from _walk_cdx_components(item.get("components"), f"{where}.components")


def parse_cyclonedx(document: str | bytes | Mapping[str, Any]) -> SbomDocument:
    data = _load_json(document)
    if data.get("bomFormat") != "CycloneDX":
        raise MalformedSbom("$.bomFormat: missing or not 'CycloneDX'")
    diagnostics: list[str] = []

    root_raw = (data.get("metadata") or {}).get("component")
    if not isinstance(root_raw, Mapping):
        raise MalformedSbom("$.metadata.component: missing root component")

    entries = [("$.metadata.component", root_raw)]
    entries += list(_walk_cdx_components(data.get("components"), "$.components"))

    components: list[Component] = []
    lineage: list[LineageLink] = []
    code_edges: list[DependencyEdge] = []
    for where, raw in entries:
        ref = raw.get("bom-ref") or raw.get("purl")
        if not ref:
            raise MalformedSbom(f"{where}: component has neither bom-ref nor purl")
        identity = _identity(raw.get("purl"), where, diagnostics)
        variants = _variant_purls(raw.get("pedigree"), where, diagnostics)
        if identity is not None and variants:
            identity = identity.with_lineage([(p, LineageSource.CYCLONEDX_PEDIGREE) for p in variants])
        for p in variants:
            if identity is None or p != identity.primary:
                lineage.append(LineageLink(ref, p, LineageSource.CYCLONEDX_PEDIGREE))
        props = []
        for j, prop in enumerate(raw.get("properties") or []):
            name, value = prop.get("name"), prop.get("value", "")
            if name == ENRICHMENT_PROPERTY:
                to, kind, prov = _decode_enrichment(value, f"{where}.properties[{j}]")
                code_edges.append(DependencyEdge(ref, to, kind, prov))
            else:
                props.append((name, value))
        stripped = {k: v for k, v in raw.items() if k != "components"}
        components.append(Component(ref, raw.get("name", ""), identity, tuple(props), stripped))

    known = {c.ref for c in components}
    code_pairs = {(e.source, e.target) for e in code_edges}
    edges: list[DependencyEdge] = []
    for i, dep in enumerate(data.get("dependencies") or []):
        where = f"$.dependencies[{i}]"
        src = dep.get("ref")
        if src not in known:
            raise MalformedSbom(f"{where}.ref: unresolvable ref {src!r}")
        for j, dst in enumerate(dep.get("dependsOn") or []):
            if dst not in known:
                raise MalformedSbom(f"{where}.dependsOn[{j}]: unresolvable ref {dst!r}")
            if (src, dst) not in code_pairs:
                edges.append(DependencyEdge(src, dst))
    for e in code_edges:
        if e.target not in known:
            raise MalformedSbom(f"{ENRICHMENT_PROPERTY} on {e.source!r}: unresolvable ref {e.target!r}")
    edges.extend(code_edges)

    for msg in diagnostics:
        log.warning(msg)
    return SbomDocument(
        SbomFormat.CYCLONEDX,
        components[0].ref,
        tuple(components),
        tuple(dict.fromkeys(edges)),
        tuple(dict.fromkeys(lineage)),
        tuple(diagnostics),
        data,
    )


_SPDX_DOCUMENT = "SPDXRef-DOCUMENT"


def _relationship_type(value: Any) -> str:
    """``hasVariant`` (SPDX 3 spelling) and ``HAS_VARIANT`` both normalise to ``HAS_VARIANT``."""
    text = str(value or "")
    if "_" not in text:
        text = re.sub(r"(?<!^)(?=[A-Z])", "_", text)
    return text.upper()


def _spdx_purl(pkg: Mapping[str, Any]) -> str | None:
    for ref in pkg.get("externalRefs") or []:
        if str(ref.get("referenceType", "")).lower() == "purl":
            return ref.get("referenceLocator")
    return None


def parse_spdx(document: str | bytes | Mapping[str, Any]) -> SbomDocument:
    """Read an SPDX 2.x JSON document.

    ``HAS_VARIANT`` (also spelled ``hasVariant``, or ``VARIANT_OF``) is read in either orientation: the side that takes part in
    the dependency graph (root, or an endpoint of some other relationship) is
    the scanned component and the other side supplies the upstream identity.
    A package that appears *only* as the far end of ``HAS_VARIANT`` is a
    lineage descriptor and is not added to the component inventory. When both
    or neither side is in the graph, links are recorded in both directions.
    """
    data = _load_json(document)
    if "spdxVersion" not in data:
        raise MalformedSbom("$.spdxVersion: missing")
    diagnostics: list[str] = []

    packages: dict[str, tuple[str, Mapping[str, Any]]] = {}
    for i, pkg in enumerate(data.get("packages") or []):
        where = f"$.packages[{i}]"
        spdx_id = pkg.get("SPDXID")
        if not spdx_id:
            raise MalformedSbom(f"{where}.SPDXID: missing")
        if spdx_id in packages:
            raise MalformedSbom(f"{where}.SPDXID: duplicate {spdx_id!r}")
        packages[spdx_id] = (where, pkg)

    rels = data.get("relationships") or []
    described = [r["relatedSpdxElement"] for r in rels
                 if r.get("relationshipType") == "DESCRIBES" and r.get("spdxElementId") == _SPDX_DOCUMENT]
    described += [r["spdxElementId"] for r in rels if r.get("relationshipType") == "DESCRIBED_BY"
                  and r.get("relatedSpdxElement") == _SPDX_DOCUMENT]
    described += list(data.get("documentDescribes") or [])
    described = list(dict.fromkeys(described))
    if not described:
        raise MalformedSbom("$.relationships: no DESCRIBES relationship for the document")
    if len(described) > 1:
        diagnostics.append(f"$.relationships: document describes {described}; using {described[0]!r} as root")
    root_ref = described[0]
    if root_ref not in packages:
        raise MalformedSbom(f"$.relationships: DESCRIBES target {root_ref!r} is not a package")

    dep_pairs: list[tuple[str, str, str]] = []
    variant_pairs: list[tuple[str, str, str]] = []
    for i, r in enumerate(rels):
        where = f"$.relationships[{i}]"
        rtype = _relationship_type(r.get("relationshipType"))
        a, b = r.get("spdxElementId"), r.get("relatedSpdxElement")
        if rtype == "DEPENDS_ON":
            dep_pairs.append((a, b, where))
        elif rtype == "DEPENDENCY_OF":
            dep_pairs.append((b, a, where))
        elif rtype in ("HAS_VARIANT", "VARIANT_OF"):
            variant_pairs.append((a, b, where))

    in_graph = {root_ref} | {x for a, b, _ in dep_pairs for x in (a, b)}
    in_graph |= {x for r in rels
                 if _relationship_type(r.get("relationshipType")) not in ("HAS_VARIANT", "VARIANT_OF", "DESCRIBES")
                 for x in (r.get("spdxElementId"), r.get("relatedSpdxElement"))}
    variant_only = {x for a, b, _ in variant_pairs for x in (a, b)} - in_graph

    def purl_of(spdx_id: str, where: str) -> Purl | None:
        if spdx_id not in packages:
            raise MalformedSbom(f"{where}: unresolvable ref {spdx_id!r}")
        text = _spdx_purl(packages[spdx_id][1])
        if not text:
            return None
        try:
            return parse_purl(text)
        except MalformedPurl:
            return None

    links: list[LineageLink] = []
    for a, b, where in variant_pairs:
        if (a in in_graph) != (b in in_graph):
            pairs = [(a, b)] if a in in_graph else [(b, a)]
        else:
            pairs = [(a, b), (b, a)]
        for subject, other in pairs:
            upstream = purl_of(other, where)
            purl_of(subject, where)
            if upstream is None:
                diagnostics.append(f"{where}: variant {other!r} has no usable purl, link ignored")
                continue
            links.append(LineageLink(subject, upstream, LineageSource.SPDX_HAS_VARIANT))

    components: list[Component] = []
    for spdx_id, (where, pkg) in packages.items():
        if spdx_id in variant_only:
            continue
        identity = _identity(_spdx_purl(pkg), where, diagnostics)
        if identity is not None:
            extra = [(l.upstream, l.source) for l in links if l.subject == spdx_id]
            if extra:
                identity = identity.with_lineage(extra)
        components.append(Component(spdx_id, pkg.get("name", ""), identity, (), pkg))
    known = {c.ref for c in components}
    links = [l for l in links if l.subject in known]

    edges: list[DependencyEdge] = []
    for a, b, where in dep_pairs:
        for end in (a, b):
            if end not in known:
                raise MalformedSbom(f"{where}: unresolvable ref {end!r}")
        edges.append(DependencyEdge(a, b))

    for msg in diagnostics:
        log.warning(msg)
    return SbomDocument(
        SbomFormat.SPDX,
        root_ref,
        tuple(components),
        tuple(dict.fromkeys(edges)),
        tuple(dict.fromkeys(links)),
        tuple(diagnostics),
        data,
    )


def parse_sbom(document: str | bytes | Mapping[str, Any]) -> SbomDocument:
    """Dispatch on content: ``bomFormat`` selects CycloneDX, ``spdxVersion`` selects SPDX."""
    data = _load_json(document)
    if data.get("bomFormat") == "CycloneDX":
        return parse_cyclonedx(data)
    if "spdxVersion" in data:
        return parse_spdx(data)
    raise MalformedSbom("$: neither a CycloneDX (bomFormat) nor an SPDX (spdxVersion) document")


def load_sbom(path: str) -> SbomDocument:
    with open(path, encoding="utf-8") as fh:
        return parse_sbom(fh.read())


def _cdx_component(c: Component) -> dict[str, Any]:
    out = copy.deepcopy(dict(c.raw)) if c.raw else {"type": "library", "bom-ref": c.ref, "name": c.name}
    out["bom-ref"] = c.ref
    if c.name:
        out["name"] = c.name
    if c.purl is not None and "purl" not in out:
        out["purl"] = str(c.purl)
    cdx_variants = [p for p, src in (c.identity.lineage if c.identity else ())
                    if src is LineageSource.CYCLONEDX_PEDIGREE]
    if cdx_variants and not (out.get("pedigree") or {}).get("variants"):
        out.setdefault("pedigree", {})["variants"] = [{"purl": str(p)} for p in cdx_variants]
    out.pop("properties", None)
    if c.raw_properties:
        out["properties"] = [{"name": n, "value": v} for n, v in c.raw_properties]
    return out


def serialize_cyclonedx(doc: SbomDocument) -> str:
    """Emit CycloneDX JSON; code-level edges go to ``dependsOn`` and to properties."""
    if doc.format is not SbomFormat.CYCLONEDX:
        raise ValueError("only CycloneDX documents can be written back")
    base: dict[str, Any] = copy.deepcopy(dict(doc.raw))
    base.setdefault("bomFormat", "CycloneDX")
    base.setdefault("specVersion", "1.4")
    base.setdefault("version", 1)

    rendered = {c.ref: _cdx_component(c) for c in doc.components}
    for e in doc.code_edges():
        rendered[e.source].setdefault("properties", []).append(
            {"name": ENRICHMENT_PROPERTY, "value": _encode_enrichment(e)}
        )

    metadata = base.setdefault("metadata", {})
    metadata["component"] = rendered[doc.root_ref]
    base["components"] = [rendered[c.ref] for c in doc.components if c.ref != doc.root_ref]

    order: list[str] = [d.get("ref") for d in (base.get("dependencies") or []) if d.get("ref") in rendered]
    for e in doc.edges:
        if e.source not in order:
            order.append(e.source)
    depends: dict[str, list[str]] = {ref: [] for ref in order}
    for e in doc.edges:
        if e.target not in depends[e.source]:
            depends[e.source].append(e.target)
    if order or "dependencies" in base:
        base["dependencies"] = [{"ref": ref, "dependsOn": depends[ref]} for ref in order]
    return json.dumps(base, indent=2) + "\n"
