"""OpenVEX ingestion and path-sensitive suppression.

A statement suppresses a finding on component C only along the dependency
paths it is scoped to: paths where a node *before* C is one of the
statement's products (and C is one of its subcomponents, or the statement
lists none), or paths ending at a product that is C itself. A finding is
suppressed only when every root-to-C path is covered. Any hidden code-level
edge that routes around the product keeps the finding reported.
"""

from __future__ import annotations

import enum
import json
import logging
from collections import deque
from dataclasses import dataclass, field, replace
from typing import Any, Iterable, Mapping, Sequence

from .identity import MalformedPurl, Purl, parse_purl
from .sbom import SbomDocument
from .vulndb import Finding

__all__ = [
    "AppliedStatement",
    "MalformedVex",
    "Outcome",
    "PathExplosion",
    "SuppressionScope",
    "SuppressionVerdict",
    "VexDocument",
    "VexStatement",
    "VexStatus",
    "apply_vex",
    "enumerate_paths",
    "explain",
    "load_openvex",
    "parse_openvex",
]

log = logging.getLogger(__name__)

DEFAULT_PATH_CAP = 10_000


class MalformedVex(ValueError):
    pass


class PathExplosion(RuntimeError):
    def __init__(self, target: str, cap: int):
        super().__init__(f"more than {cap} simple paths lead to {target!r}")
        self.target = target
        self.cap = cap


class VexStatus(enum.Enum):
    NOT_AFFECTED = "not_affected"
    AFFECTED = "affected"
    FIXED = "fixed"
    UNDER_INVESTIGATION = "under_investigation"

    @property
    def suppresses(self) -> bool:
        return self in (VexStatus.NOT_AFFECTED, VexStatus.FIXED)


# A product or subcomponent: a parsed PURL, or an opaque identifier that matches nothing.
Identifier = Purl | str


def _identifier_matches(ident: Identifier, purl: Purl | None) -> bool:
    return isinstance(ident, Purl) and purl is not None and ident.matches(purl)


@dataclass(frozen=True)
class VexStatement:
    vulnerability: str
    products: tuple[Identifier, ...]
    status: VexStatus
    subcomponents: tuple[Identifier, ...] = ()
    vulnerability_aliases: frozenset[str] = frozenset()
    justification: str | None = None
    impact_statement: str | None = None

    def __post_init__(self) -> None:
        if not self.products:
            raise MalformedVex(f"statement for {self.vulnerability} has no products")
        if self.justification and self.status is not VexStatus.NOT_AFFECTED:
            raise MalformedVex(f"justification only allowed with not_affected ({self.vulnerability})")

    @property
    def vulnerability_names(self) -> frozenset[str]:
        return self.vulnerability_aliases | {self.vulnerability}


@dataclass(frozen=True)
class VexDocument:
    statements: tuple[VexStatement, ...]
    source_path: str = "<memory>"


def _ident(entry: Any) -> Identifier | None:
    if isinstance(entry, str):
        text = entry
    elif isinstance(entry, Mapping):
        text = (entry.get("identifiers") or {}).get("purl") or entry.get("@id")
    else:
        return None
    if not text:
        return None
    try:
        return parse_purl(text)
    except MalformedPurl:
        return text


def parse_openvex(document: str | bytes | Mapping[str, Any], source_path: str = "<memory>") -> VexDocument:
    data = document if isinstance(document, Mapping) else json.loads(document)
    statements = data.get("statements") if isinstance(data, Mapping) else None
    if not isinstance(statements, list):
        raise MalformedVex(f"{source_path}: no statements array")
    out = []
    for i, raw in enumerate(statements):
        vuln = raw.get("vulnerability")
        if isinstance(vuln, Mapping):
            name = vuln.get("name") or vuln.get("@id")
            aliases = frozenset(vuln.get("aliases") or ())
        else:
            name, aliases = vuln, frozenset()
        if not name:
            raise MalformedVex(f"{source_path}: statements[{i}] has no vulnerability name")
        try:
            status = VexStatus(raw.get("status"))
        except ValueError:
            raise MalformedVex(f"{source_path}: statements[{i}] bad status {raw.get('status')!r}") from None
        products: list[Identifier] = []
        subs: list[Identifier] = []
        for p in raw.get("products") or []:
            ident = _ident(p)
            if ident is not None:
                products.append(ident)
            if isinstance(p, Mapping):
                subs.extend(s for s in map(_ident, p.get("subcomponents") or []) if s is not None)
        subs.extend(s for s in map(_ident, raw.get("subcomponents") or []) if s is not None)
        try:
            out.append(
                VexStatement(
                    vulnerability=name,
                    products=tuple(products),
                    status=status,
                    subcomponents=tuple(dict.fromkeys(subs)),
                    vulnerability_aliases=aliases,
                    justification=raw.get("justification"),
                    impact_statement=raw.get("impact_statement"),
                )
            )
        except MalformedVex as exc:
            raise MalformedVex(f"{source_path}: statements[{i}]: {exc}") from None
    return VexDocument(tuple(out), source_path)


def load_openvex(path: str) -> VexDocument:
    with open(path, encoding="utf-8") as fh:
        return parse_openvex(fh.read(), source_path=path)


def _can_reach(doc: SbomDocument, target: str) -> set[str]:
    preds: dict[str, set[str]] = {}
    for e in doc.edges:
        preds.setdefault(e.target, set()).add(e.source)
    seen = {target}
    todo = [target]
    while todo:
        for p in preds.get(todo.pop(), ()):
            if p not in seen:
                seen.add(p)
                todo.append(p)
    return seen


def enumerate_paths(
    doc: SbomDocument, target: str, cap: int = DEFAULT_PATH_CAP
) -> list[tuple[str, ...]]:
    """All simple root-to-target paths over every edge kind, in lexicographic order."""
    if target != doc.root_ref and target not in {c.ref for c in doc.components}:
        raise KeyError(target)
    useful = _can_reach(doc, target)
    succ = {ref: sorted(set(doc.successors(ref)) & useful) for ref in useful}
    if doc.root_ref not in useful:
        return []
    paths: list[tuple[str, ...]] = []
    path = [doc.root_ref]
    on_path = {doc.root_ref}
    stack = [iter(succ[doc.root_ref])] if doc.root_ref != target else []
    if doc.root_ref == target:
        return [(target,)]
    while stack:
        nxt = next(stack[-1], None)
        if nxt is None:
            stack.pop()
            on_path.discard(path.pop())
            continue
        if nxt in on_path:
            continue
        if nxt == target:
            paths.append(tuple(path) + (target,))
            if len(paths) > cap:
                raise PathExplosion(target, cap)
            continue
        path.append(nxt)
        on_path.add(nxt)
        stack.append(iter(succ[nxt]))
    return sorted(paths)


class Outcome(enum.Enum):
    REPORTED = "Reported"
    SUPPRESSED = "Suppressed"
    REPORTED_ANNOTATED = "ReportedAnnotated"


class SuppressionScope(enum.Enum):
    """How statements are scoped. Only PATH is correct; the others emulate observed scanner behaviour."""

    PATH = "path"
    PRODUCT_ONLY = "product-only"
    SUBCOMPONENT_ONLY = "subcomponent-only"


@dataclass(frozen=True)
class AppliedStatement:
    index: int
    source_path: str
    status: VexStatus
    product: str
    paths: tuple[int, ...] = ()


@dataclass(frozen=True)
class SuppressionVerdict:
    outcome: Outcome
    covered_paths: tuple[int, ...] = ()
    uncovered_paths: tuple[int, ...] = ()
    applied_statements: tuple[AppliedStatement, ...] = ()
    notes: tuple[str, ...] = ()
    fallback: bool = False


@dataclass(frozen=True)
class _Assertion:
    index: int
    source_path: str
    statement: VexStatement
    product: Identifier

    @property
    def label(self) -> str:
        return str(self.product)


def _effective_assertions(vex_docs: Sequence[VexDocument], notes: list[str]) -> list[_Assertion]:
    """Expand statements per product; for a repeated (product, vulnerability, subcomponents)
    the latest statement in input order wins."""
    latest: dict[tuple, _Assertion] = {}
    for vdoc in vex_docs:
        for i, st in enumerate(vdoc.statements):
            subs = frozenset(str(s) for s in st.subcomponents)
            for product in st.products:
                key = (str(product), st.vulnerability, subs)
                prev = latest.pop(key, None)
                if prev is not None and prev.statement.status is not st.status:
                    msg = (
                        f"conflicting statements for {key[1]} on {key[0]}: "
                        f"{prev.source_path}#{prev.index} ({prev.statement.status.value}) superseded by "
                        f"{vdoc.source_path}#{i} ({st.status.value})"
                    )
                    log.warning(msg)
                    notes.append(msg)
                latest[key] = _Assertion(i, vdoc.source_path, st, product)
    return list(latest.values())


def _finding_identities(doc: SbomDocument, finding: Finding) -> list[Purl]:
    comp = doc.component(finding.component_ref)
    out = [finding.matched_identity]
    if comp.purl is not None and comp.purl != finding.matched_identity:
        out.append(comp.purl)
    return out


def _subcomponent_ok(a: _Assertion, identities: list[Purl]) -> bool:
    subs = a.statement.subcomponents
    if not subs:
        return True
    return any(_identifier_matches(s, p) for s in subs for p in identities)


def _names_product(a: _Assertion, identities: list[Purl]) -> bool:
    return any(_identifier_matches(a.product, p) for p in identities)


def _covers(a: _Assertion, doc: SbomDocument, path: Sequence[str], identities: list[Purl]) -> bool:
    if _names_product(a, identities):
        return True
    if not _subcomponent_ok(a, identities):
        return False
    return any(_identifier_matches(a.product, doc.component(ref).purl) for ref in path[:-1])


def _path_verdict(
    doc: SbomDocument,
    finding: Finding,
    paths: list[tuple[str, ...]],
    assertions: list[_Assertion],
    notes: list[str],
) -> SuppressionVerdict:
    identities = _finding_identities(doc, finding)
    covered_by: dict[int, list[int]] = {}
    hits: dict[int, list[int]] = {}
    for ai, a in enumerate(assertions):
        for pi, path in enumerate(paths):
            if _covers(a, doc, path, identities):
                hits.setdefault(ai, []).append(pi)
                if a.statement.status.suppresses:
                    covered_by.setdefault(pi, []).append(ai)
        if not paths and _names_product(a, identities):
            hits[ai] = []
        if ai in hits and not a.statement.subcomponents and not _names_product(a, identities):
            if _identifier_matches(a.product, doc.root.purl):
                notes.append(
                    f"{a.source_path}#{a.index}: product {a.label} is the scan root with no "
                    "subcomponents; treated as whole-tree suppression"
                )
    covered = tuple(sorted(covered_by))
    uncovered = tuple(i for i in range(len(paths)) if i not in covered_by)
    applied = tuple(
        AppliedStatement(a.index, a.source_path, a.statement.status, a.label, tuple(hits[ai]))
        for ai, a in enumerate(assertions)
        if ai in hits
    )
    suppressing = [s for s in applied if s.status.suppresses]
    if not uncovered and suppressing:
        outcome = Outcome.SUPPRESSED
    elif any(not s.status.suppresses for s in applied):
        outcome = Outcome.REPORTED_ANNOTATED
    else:
        outcome = Outcome.REPORTED
    if not paths:
        notes.append(f"{finding.component_ref} is not reachable from the root")
    return SuppressionVerdict(outcome, covered, uncovered, applied, tuple(dict.fromkeys(notes)))


def _fallback_verdict(
    doc: SbomDocument, finding: Finding, assertions: list[_Assertion], notes: list[str]
) -> tuple[list[tuple[str, ...]], SuppressionVerdict]:
    """Reachable-set semantics: suppressed iff every route from the root to the
    component must pass a product node of a suppressing statement."""
    identities = _finding_identities(doc, finding)
    target = finding.component_ref
    between = _reachable_from_root(doc) & _can_reach(doc, target)
    between.discard(target)
    blockers: set[str] = set()
    applied: list[AppliedStatement] = []
    direct = False
    for a in assertions:
        names = _names_product(a, identities)
        nodes = set()
        if not names and _subcomponent_ok(a, identities):
            nodes = {ref for ref in between if _identifier_matches(a.product, doc.component(ref).purl)}
        if not (names or nodes):
            continue
        applied.append(AppliedStatement(a.index, a.source_path, a.statement.status, a.label))
        if a.statement.status.suppresses:
            direct = direct or names
            blockers |= nodes
    notes.append("path cap exceeded; used reachable-set semantics")
    suppressing = any(s.status.suppresses for s in applied)
    witness = None if direct else _route_avoiding(doc, target, blockers)
    reachable = target == doc.root_ref or bool(between)
    if suppressing and witness is None and (direct or reachable):
        return [], SuppressionVerdict(Outcome.SUPPRESSED, (), (), tuple(applied), tuple(notes), True)
    paths = [witness] if witness else []
    outcome = Outcome.REPORTED_ANNOTATED if any(not s.status.suppresses for s in applied) else Outcome.REPORTED
    return paths, SuppressionVerdict(outcome, (), tuple(range(len(paths))), tuple(applied), tuple(notes), True)


def _reachable_from_root(doc: SbomDocument) -> set[str]:
    seen = {doc.root_ref}
    todo = [doc.root_ref]
    while todo:
        for nxt in doc.successors(todo.pop()):
            if nxt not in seen:
                seen.add(nxt)
                todo.append(nxt)
    return seen


def _route_avoiding(doc: SbomDocument, target: str, blocked: set[str]) -> tuple[str, ...] | None:
    if doc.root_ref in blocked and doc.root_ref != target:
        return None
    parent: dict[str, str | None] = {doc.root_ref: None}
    queue = deque([doc.root_ref])
    while queue:
        node = queue.popleft()
        if node == target:
            route = [node]
            while parent[route[-1]] is not None:
                route.append(parent[route[-1]])  # type: ignore[arg-type]
            return tuple(reversed(route))
        for nxt in sorted(doc.successors(node)):
            if nxt not in parent and (nxt == target or nxt not in blocked):
                parent[nxt] = node
                queue.append(nxt)
    return None


def _emulated_verdict(
    doc: SbomDocument,
    finding: Finding,
    paths: list[tuple[str, ...]],
    assertions: list[_Assertion],
    scope: SuppressionScope,
) -> SuppressionVerdict:
    identities = _finding_identities(doc, finding)
    root = doc.root.purl
    applied = []
    for a in assertions:
        if scope is SuppressionScope.PRODUCT_ONLY:
            ok = _names_product(a, identities) or _identifier_matches(a.product, root)
        else:
            ok = bool(a.statement.subcomponents) and _subcomponent_ok(a, identities)
        if ok:
            applied.append(AppliedStatement(a.index, a.source_path, a.statement.status, a.label))
    every = tuple(range(len(paths)))
    if any(s.status.suppresses for s in applied):
        return SuppressionVerdict(Outcome.SUPPRESSED, every, (), tuple(applied))
    outcome = Outcome.REPORTED_ANNOTATED if applied else Outcome.REPORTED
    return SuppressionVerdict(outcome, (), every, tuple(applied))


def apply_vex(
    findings: Iterable[Finding],
    doc: SbomDocument,
    vex_docs: Sequence[VexDocument],
    *,
    path_cap: int = DEFAULT_PATH_CAP,
    scope: SuppressionScope = SuppressionScope.PATH,
) -> list[Finding]:
    """Return the findings with ``paths`` and ``verdict`` filled in."""
    base_notes: list[str] = []
    assertions = _effective_assertions(vex_docs, base_notes)
    out = []
    for f in findings:
        relevant = [a for a in assertions if a.statement.vulnerability_names & f.names]
        notes = list(base_notes)
        try:
            paths = enumerate_paths(doc, f.component_ref, path_cap)
        except PathExplosion as exc:
            log.warning("%s; falling back to reachable-set semantics", exc)
            if scope is SuppressionScope.PATH:
                paths, verdict = _fallback_verdict(doc, f, relevant, notes)
                out.append(replace(f, paths=tuple(paths), verdict=verdict))
                continue
            paths = []
        if scope is SuppressionScope.PATH:
            verdict = _path_verdict(doc, f, paths, relevant, notes)
        else:
            verdict = _emulated_verdict(doc, f, paths, relevant, scope)
        out.append(replace(f, paths=tuple(paths), verdict=verdict))
    return out


def _render_path(doc: SbomDocument | None, path: Sequence[str]) -> str:
    def label(ref: str) -> str:
        if doc is None:
            return ref
        comp = doc.component(ref)
        return comp.name or ref

    return " -> ".join(label(r) for r in path)


def explain(finding: Finding, doc: SbomDocument | None = None) -> str:
    """Plain-text rationale: one line per path naming its covering statement or ``uncovered``."""
    v = finding.verdict
    if v is None:
        raise ValueError("finding has no verdict; run apply_vex first")
    lines = [
        f"{finding.vuln_id} in {finding.component_ref} ({finding.matched_identity}"
        f"{', via lineage' if finding.via_lineage else ''}): {v.outcome.value}"
    ]
    for pi, path in enumerate(finding.paths):
        covering = [s for s in v.applied_statements if pi in s.paths and s.status.suppresses]
        if covering:
            who = ", ".join(f"{s.product} [{s.status.value}, {s.source_path}#{s.index}]" for s in covering)
            lines.append(f"  path {pi}: {_render_path(doc, path)}  covered by {who}")
        else:
            lines.append(f"  path {pi}: {_render_path(doc, path)}  uncovered")
    for s in v.applied_statements:
        if not s.status.suppresses:
            lines.append(f"  annotation: {s.product} [{s.status.value}, {s.source_path}#{s.index}]")
        elif not s.paths:
            lines.append(f"  applied: {s.product} [{s.status.value}, {s.source_path}#{s.index}]")
    for note in v.notes:
        lines.append(f"  note: {note}")
    return "\n".join(lines)
