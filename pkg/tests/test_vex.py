import itertools
import json
import os
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sbomscope import bench
from sbomscope.identity import parse_purl
from sbomscope.sbom import Component, DependencyEdge, EdgeKind, Provenance, SbomDocument, SbomFormat, load_sbom
from sbomscope.sbom import parse_cyclonedx
from sbomscope.identity import ComponentIdentity
from sbomscope.vex import (
    MalformedVex,
    Outcome,
    PathExplosion,
    SuppressionScope,
    VexDocument,
    VexStatement,
    VexStatus,
    apply_vex,
    enumerate_paths,
    explain,
    load_openvex,
    parse_openvex,
)
from sbomscope.vulndb import Finding, load_db, scan_sbom

NA, AFF, FIXED, UI = VexStatus.NOT_AFFECTED, VexStatus.AFFECTED, VexStatus.FIXED, VexStatus.UNDER_INVESTIGATION


def _purl(i):
    return parse_purl(f"pkg:maven/ex/n{i}@1")


def _graph(n, pairs, code=()):
    comps = tuple(Component(f"n{i}", f"n{i}", ComponentIdentity(_purl(i))) for i in range(n))
    edges = [DependencyEdge(f"n{a}", f"n{b}") for a, b in pairs]
    edges += [DependencyEdge(f"n{a}", f"n{b}", EdgeKind.DYNAMIC_DISPATCH, Provenance("s", "t")) for a, b in code]
    return SbomDocument(SbomFormat.CYCLONEDX, "n0", comps, tuple(dict.fromkeys(edges)))


def _finding(target, vuln="V"):
    return Finding(vuln, f"n{target}", _purl(target), False)


def _stmt(product, status=NA, subs=(), vuln="V"):
    return VexStatement(vuln, (_purl(product),), status, tuple(_purl(s) for s in subs))


def _verdict(doc, target, statements, **kw):
    (f,) = apply_vex([_finding(target)], doc, [VexDocument(tuple(statements))], **kw)
    return f


# parse_openvex

def test_lib1_vex_fixture(fixtures_dir):
    vdoc = load_openvex(os.path.join(fixtures_dir, "study1/lib1/lib1.vex.json"))
    (st_,) = vdoc.statements
    assert st_.products == (parse_purl(bench.LIB1),)
    assert st_.subcomponents == (parse_purl(bench.LOG4J_CORE),)
    assert st_.status is NA and st_.justification == "vulnerable_code_not_in_execute_path"


def test_empty_statements():
    assert parse_openvex({"@context": "https://openvex.dev/ns/v0.2.0", "statements": []}).statements == ()


def test_fixed_without_justification_accepted():
    doc = parse_openvex({"statements": [{"vulnerability": "CVE-1", "products": ["pkg:maven/a/b@1"],
                                         "status": "fixed"}]})
    assert doc.statements[0].status is FIXED


def test_identifier_shapes_and_opaque_ids():
    doc = parse_openvex(json.dumps({"statements": [{
        "vulnerability": {"@id": "https://nvd/CVE-1", "name": "CVE-1", "aliases": ["GHSA-x"]},
        "products": [{"identifiers": {"purl": "pkg:maven/a/b@1"}}, {"@id": "urn:opaque"}],
        "subcomponents": ["pkg:maven/c/d@1"],
        "status": "affected"}]}))
    (s,) = doc.statements
    assert s.products == (parse_purl("pkg:maven/a/b@1"), "urn:opaque")
    assert s.vulnerability_names == {"CVE-1", "GHSA-x"}


@pytest.mark.parametrize("raw", [
    {},
    {"statements": "nope"},
    {"statements": [{"products": ["pkg:x/y"], "status": "fixed"}]},
    {"statements": [{"vulnerability": "V", "products": ["pkg:x/y"], "status": "maybe"}]},
    {"statements": [{"vulnerability": "V", "products": [], "status": "fixed"}]},
    {"statements": [{"vulnerability": "V", "products": ["pkg:x/y"], "status": "fixed",
                     "justification": "component_not_present"}]},
])
def test_malformed_vex(raw):
    with pytest.raises(MalformedVex):
        parse_openvex(raw)


# enumerate_paths

def test_example_paths(fixtures_dir):
    chain = load_sbom(os.path.join(fixtures_dir, "paths/chain-sbom.json"))
    shortcut = load_sbom(os.path.join(fixtures_dir, "paths/shortcut-sbom.json"))
    assert enumerate_paths(chain, "lib2") == [("app", "lib1", "lib2")]
    assert enumerate_paths(shortcut, "lib2") == [("app", "lib1", "lib2"), ("app", "lib2")]
    assert enumerate_paths(shortcut, "app") == [("app",)]
    with pytest.raises(KeyError):
        enumerate_paths(shortcut, "ghost")


def test_cycle_is_broken():
    doc = _graph(3, [(0, 1), (1, 2), (2, 1), (2, 0)])
    assert enumerate_paths(doc, "n2") == [("n0", "n1", "n2")]


def test_path_cap():
    # ladder of k diamonds has 2**k paths
    k = 6
    pairs = []
    for i in range(k):
        a, b, c, d = 3 * i, 3 * i + 1, 3 * i + 2, 3 * i + 3
        pairs += [(a, b), (a, c), (b, d), (c, d)]
    doc = _graph(3 * k + 1, pairs)
    assert len(enumerate_paths(doc, f"n{3 * k}")) == 2 ** k
    with pytest.raises(PathExplosion):
        enumerate_paths(doc, f"n{3 * k}", cap=10)


def _brute_force_paths(n, edges, target):
    if target == 0:
        return [("n0",)]
    others = [i for i in range(1, n) if i != target]
    out = []
    for k in range(len(others) + 1):
        for mid in itertools.permutations(others, k):
            seq = (0,) + mid + (target,)
            if all((a, b) in edges for a, b in zip(seq, seq[1:])):
                out.append(tuple(f"n{i}" for i in seq))
    return sorted(out)


@st.composite
def graphs(draw, max_nodes=8):
    n = draw(st.integers(1, max_nodes))
    pairs = draw(st.sets(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=n * 3))
    split = draw(st.sets(st.sampled_from(sorted(pairs)), max_size=len(pairs))) if pairs else set()
    return n, pairs - split, split


@settings(max_examples=600)
@given(graphs(), st.data())
def test_enumerate_paths_matches_brute_force(g, data):
    n, declared, code = g
    target = data.draw(st.integers(0, n - 1))
    doc = _graph(n, declared, code)
    assert enumerate_paths(doc, f"n{target}") == _brute_force_paths(n, declared | code, target)


# apply_vex on the path examples and the four apps

def test_example_verdicts(fixtures_dir):
    vex = [load_openvex(os.path.join(fixtures_dir, "paths/vex.json"))]
    out = {}
    for name in ("chain", "shortcut"):
        doc = load_sbom(os.path.join(fixtures_dir, f"paths/{name}-sbom.json"))
        (f,) = apply_vex([Finding("vul1", "lib2", doc.component("lib2").purl, False)], doc, vex)
        out[name] = f
    assert out["chain"].verdict.outcome is Outcome.SUPPRESSED
    assert out["shortcut"].verdict.outcome is Outcome.REPORTED
    assert [out["shortcut"].paths[i] for i in out["shortcut"].verdict.uncovered_paths] == [("app", "lib2")]


def _study1(fixtures_dir, app, enriched, scope=SuppressionScope.PATH):
    name = "bom-enriched.json" if enriched and app != "app-unreachable" else "bom.json"
    doc = load_sbom(os.path.join(fixtures_dir, "study1", app, name))
    db = load_db(os.path.join(fixtures_dir, "db"))
    vex = [load_openvex(os.path.join(fixtures_dir, "study1/lib1/lib1.vex.json"))]
    (f,) = apply_vex(scan_sbom(db, doc), doc, vex, scope=scope)
    return doc, f


def test_unreachable_is_suppressed(fixtures_dir):
    _, f = _study1(fixtures_dir, "app-unreachable", enriched=False)
    assert f.verdict.outcome is Outcome.SUPPRESSED
    assert [s.product for s in f.verdict.applied_statements] == [bench.LIB1]


def test_static_is_reported_with_uncovered_direct_path(fixtures_dir):
    doc, f = _study1(fixtures_dir, "app-static", enriched=True)
    assert f.verdict.outcome is Outcome.REPORTED
    core = f"{bench.LOG4J_CORE}?type=jar"
    assert [f.paths[i] for i in f.verdict.uncovered_paths] == [(doc.root_ref, core)]


def test_empty_vex_list_reports_everything(fixtures_dir):
    doc = load_sbom(os.path.join(fixtures_dir, "study1/app-unreachable/bom.json"))
    db = load_db(os.path.join(fixtures_dir, "db"))
    (f,) = apply_vex(scan_sbom(db, doc), doc, [])
    assert f.verdict.outcome is Outcome.REPORTED and f.verdict.applied_statements == ()


@pytest.mark.parametrize("app", bench.STUDY1_APPS)
def test_failure_modes_differ_from_path_scope(fixtures_dir, app):
    _, path = _study1(fixtures_dir, app, enriched=True)
    _, product_only = _study1(fixtures_dir, app, enriched=True, scope=SuppressionScope.PRODUCT_ONLY)
    _, sub_only = _study1(fixtures_dir, app, enriched=True, scope=SuppressionScope.SUBCOMPONENT_ONLY)
    assert product_only.verdict.outcome is Outcome.REPORTED
    assert sub_only.verdict.outcome is Outcome.SUPPRESSED
    if app == "app-unreachable":
        assert path.verdict.outcome is not product_only.verdict.outcome
    else:
        assert path.verdict.outcome is not sub_only.verdict.outcome


# statement semantics

def test_product_is_component_itself():
    doc = _graph(3, [(0, 1), (1, 2), (0, 2)])
    assert _verdict(doc, 2, [_stmt(2)]).verdict.outcome is Outcome.SUPPRESSED


def test_subcomponent_mismatch_does_not_cover():
    doc = _graph(3, [(0, 1), (1, 2)])
    assert _verdict(doc, 2, [_stmt(1, subs=[0])]).verdict.outcome is Outcome.REPORTED
    assert _verdict(doc, 2, [_stmt(1, subs=[2])]).verdict.outcome is Outcome.SUPPRESSED
    assert _verdict(doc, 2, [_stmt(1)]).verdict.outcome is Outcome.SUPPRESSED


def test_alias_matching():
    doc = _graph(2, [(0, 1)])
    f = Finding("CVE-1", "n1", _purl(1), False, aliases=frozenset({"GHSA-1"}))
    (out,) = apply_vex([f], doc, [VexDocument((_stmt(0, vuln="GHSA-1"),))])
    assert out.verdict.outcome is Outcome.SUPPRESSED
    (out,) = apply_vex([f], doc, [VexDocument((_stmt(0, vuln="CVE-2"),))])
    assert out.verdict.outcome is Outcome.REPORTED


def test_versionless_product_matches_any_version():
    doc = _graph(3, [(0, 1), (1, 2)])
    st_ = VexStatement("V", (parse_purl("pkg:maven/ex/n1"),), NA)
    assert _verdict(doc, 2, [st_]).verdict.outcome is Outcome.SUPPRESSED
    st_ = VexStatement("V", (parse_purl("pkg:maven/ex/n1@2"),), NA)
    assert _verdict(doc, 2, [st_]).verdict.outcome is Outcome.REPORTED


@pytest.mark.parametrize("status", [AFF, UI])
def test_non_suppressing_status_annotates(status):
    doc = _graph(3, [(0, 1), (1, 2)])
    f = _verdict(doc, 2, [_stmt(1, status)])
    assert f.verdict.outcome is Outcome.REPORTED_ANNOTATED
    assert status.value in explain(f, doc)


def test_root_product_without_subcomponents_is_whole_tree():
    doc = _graph(3, [(0, 1), (1, 2), (0, 2)])
    f = _verdict(doc, 2, [_stmt(0)])
    assert f.verdict.outcome is Outcome.SUPPRESSED
    assert any("whole-tree" in n for n in f.verdict.notes)


def test_conflict_latest_wins_with_diagnostic():
    doc = _graph(3, [(0, 1), (1, 2)])
    first = VexDocument((_stmt(1, AFF),), "a.json")
    second = VexDocument((_stmt(1, NA),), "b.json")
    (f,) = apply_vex([_finding(2)], doc, [first, second])
    assert f.verdict.outcome is Outcome.SUPPRESSED
    assert any("a.json#0" in n and "b.json#0" in n for n in f.verdict.notes)
    (f,) = apply_vex([_finding(2)], doc, [second, first])
    assert f.verdict.outcome is Outcome.REPORTED_ANNOTATED


def test_unreachable_component_note():
    doc = _graph(3, [(0, 1)])
    f = _verdict(doc, 2, [_stmt(1)])
    assert f.paths == () and f.verdict.outcome is Outcome.REPORTED
    assert any("not reachable" in n for n in f.verdict.notes)


def test_explain_wording():
    doc = _graph(3, [(0, 1), (1, 2), (0, 2)])
    text = explain(_verdict(doc, 2, [_stmt(1)]), doc)
    assert text.splitlines() == [
        "V in n2 (pkg:maven/ex/n2@1): Reported",
        "  path 0: n0 -> n1 -> n2  covered by pkg:maven/ex/n1@1 [not_affected, <memory>#0]",
        "  path 1: n0 -> n2  uncovered",
    ]
    with pytest.raises(ValueError):
        explain(_finding(2))


# properties over random (graph, statements) instances

statuses = st.sampled_from([NA, FIXED, AFF, UI])


@st.composite
def instances(draw):
    n, declared, code = draw(graphs())
    target = draw(st.integers(0, n - 1))
    nodes = st.integers(0, n - 1)
    stmts = draw(st.lists(st.builds(_stmt, nodes, statuses, st.lists(nodes, max_size=2)), max_size=4))
    return n, declared, code, target, stmts


def _oracle_outcome(n, edges, target, stmts):
    """Independent evaluation over brute-force paths; statements have distinct keys or latest-wins."""
    latest = {}
    for s in stmts:
        latest[(s.products[0], frozenset(s.subcomponents))] = s
    eff = list(latest.values())
    paths = _brute_force_paths(n, edges, target)
    me = _purl(target)

    def covers(s, path):
        if s.products[0] == me:
            return True
        if s.subcomponents and me not in s.subcomponents:
            return False
        return any(s.products[0] == _purl(int(ref[1:])) for ref in path[:-1])

    applied = [s for s in eff if any(covers(s, p) for p in paths) or (not paths and s.products[0] == me)]
    supp = [s for s in applied if s.status.suppresses]
    if supp and all(any(covers(s, p) for s in supp) for p in paths):
        return Outcome.SUPPRESSED
    if any(not s.status.suppresses for s in applied):
        return Outcome.REPORTED_ANNOTATED
    return Outcome.REPORTED


@settings(max_examples=600)
@given(instances())
def test_verdict_matches_oracle(inst):
    n, declared, code, target, stmts = inst
    f = _verdict(_graph(n, declared, code), target, stmts)
    assert f.verdict.outcome is _oracle_outcome(n, declared | code, target, stmts)
    assert (f.verdict.outcome is Outcome.SUPPRESSED) == (
        not f.verdict.uncovered_paths and any(s.status.suppresses for s in f.verdict.applied_statements))


@settings(max_examples=600)
@given(instances(), st.data())
def test_adding_not_affected_never_unsuppresses(inst, data):
    n, declared, code, target, stmts = inst
    doc = _graph(n, declared, code)
    extra = data.draw(st.builds(_stmt, st.integers(0, n - 1), st.just(NA), st.lists(st.integers(0, n - 1),
                                                                                     max_size=2)))
    before = _verdict(doc, target, stmts).verdict.outcome
    after = _verdict(doc, target, stmts + [extra]).verdict.outcome
    if before is Outcome.SUPPRESSED:
        assert after is Outcome.SUPPRESSED


@settings(max_examples=600)
@given(instances(), st.data())
def test_adding_code_edge_never_suppresses(inst, data):
    n, declared, code, target, stmts = inst
    doc = _graph(n, declared, code)
    # An orphaned component has no paths at all; reachability is a precondition here.
    if not enumerate_paths(doc, f"n{target}"):
        return
    a, b = data.draw(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)))
    grown = _graph(n, declared, code | {(a, b)})
    before = _verdict(doc, target, stmts).verdict.outcome
    after = _verdict(grown, target, stmts).verdict.outcome
    if before is not Outcome.SUPPRESSED:
        assert after is not Outcome.SUPPRESSED


@settings(max_examples=600)
@given(instances(), st.data())
def test_statement_off_every_path_has_no_effect(inst, data):
    n, declared, code, target, stmts = inst
    doc = _graph(n, declared, code)
    on_path = {int(ref[1:]) for p in enumerate_paths(doc, f"n{target}") for ref in p}
    # the root product speaks for its whole tree, so it is never "off path"
    off = [i for i in range(1, n) if i not in on_path and i != target]
    if not off:
        return
    extra = _stmt(data.draw(st.sampled_from(off)), data.draw(statuses))
    before = _verdict(doc, target, stmts).verdict
    after = _verdict(doc, target, stmts + [extra]).verdict
    assert (after.outcome, after.covered_paths, after.uncovered_paths) == (
        before.outcome, before.covered_paths, before.uncovered_paths)


@settings(max_examples=600)
@given(instances())
def test_fallback_agrees_with_exact_suppression(inst):
    n, declared, code, target, stmts = inst
    doc = _graph(n, declared, code)
    exact = _verdict(doc, target, stmts).verdict
    if target == 0 or not _brute_force_paths(n, declared | code, target):
        return  # the cap only engages when there is a route to explore
    fallback = _verdict(doc, target, stmts, path_cap=0)
    assert fallback.verdict.fallback
    assert (fallback.verdict.outcome is Outcome.SUPPRESSED) == (exact.outcome is Outcome.SUPPRESSED)
    if fallback.verdict.outcome is not Outcome.SUPPRESSED:
        (witness,) = fallback.paths
        assert witness in _brute_force_paths(n, declared | code, target)


def test_fallback_on_path_explosion_reports_witness():
    k = 8
    pairs = []
    for i in range(k):
        a, b, c, d = 3 * i, 3 * i + 1, 3 * i + 2, 3 * i + 3
        pairs += [(a, b), (a, c), (b, d), (c, d)]
    last = 3 * k
    doc = _graph(last + 1, pairs, code=[(0, last)])
    f = _verdict(doc, last, [_stmt(1), _stmt(2)], path_cap=50)
    assert f.verdict.fallback and f.verdict.outcome is Outcome.REPORTED
    assert f.paths == (("n0", f"n{last}"),)
    guarded = _graph(last + 1, pairs)
    f = _verdict(guarded, last, [_stmt(1), _stmt(2)], path_cap=50)
    assert f.verdict.outcome is Outcome.SUPPRESSED
    assert any("reachable-set" in n for n in f.verdict.notes)


def test_emulated_scopes_on_synthetic_graph():
    doc = _graph(3, [(0, 1), (1, 2), (0, 2)])
    f = _verdict(doc, 2, [_stmt(1, subs=[2])], scope=SuppressionScope.SUBCOMPONENT_ONLY)
    assert f.verdict.outcome is Outcome.SUPPRESSED
    f = _verdict(doc, 2, [_stmt(1, subs=[2])], scope=SuppressionScope.PRODUCT_ONLY)
    assert f.verdict.outcome is Outcome.REPORTED
    f = _verdict(doc, 2, [_stmt(0)], scope=SuppressionScope.PRODUCT_ONLY)
    assert f.verdict.outcome is Outcome.SUPPRESSED


def test_cyclonedx_enriched_graph_feeds_paths():
    doc = parse_cyclonedx(bench.study1_enriched_sbom("app-reflective"))
    core = f"{bench.LOG4J_CORE}?type=jar"
    assert len(enumerate_paths(doc, core)) == 2
    assert replace(doc, edges=tuple(e for e in doc.edges if not e.kind.is_code_level)).code_edges() == []
